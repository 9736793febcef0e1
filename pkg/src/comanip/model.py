"""Kinematic-tree rigid-body dynamics for block-diagonal multi-robot systems.

Conventions, used consistently everywhere:

* World frame is inertial, z up.
* Floating-base configuration is (position xyz, unit quaternion wxyz);
  floating-base velocity is the body-frame twist ordered (angular; linear),
  i.e. qd = (omega_body, v_body) where v_body is the velocity of the base
  origin expressed in base coordinates.
* ``frame_jacobian(..., kind="full6")`` returns world-frame rows ordered
  (angular; linear); ``kind="point3"`` returns the 3 linear rows of the
  frame origin point.
* Internally, dynamics run in world-origin Plücker coordinates: a spatial
  motion vector is (omega, v_O) with v_O the velocity of the body-fixed
  point currently at the world origin; a spatial force is (n_O, f).

Mass matrix via composite rigid bodies, bias forces via a recursive
Newton-Euler sweep with qdd = 0 and gravity folded into the root bias
acceleration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .spatial import cross3, cross_rows, integrate_quat, quat_to_rot, rows_cross, skew

_JTYPE_CODE = {"floating": 0, "revolute": 1, "prismatic": 2, "fixed": 3}

FLOATING = "floating"
REVOLUTE = "revolute"
PRISMATIC = "prismatic"
FIXED = "fixed"

_NV = {FLOATING: 6, REVOLUTE: 1, PRISMATIC: 1, FIXED: 0}
_NQ = {FLOATING: 7, REVOLUTE: 1, PRISMATIC: 1, FIXED: 0}


class DimensionError(ValueError):
    pass


class UnknownFrameError(KeyError):
    pass


@dataclass
class LinkSpec:
    """One link and the joint connecting it to its parent."""

    name: str
    parent: int                      # index of the parent link, -1 for a tree root
    joint_type: str                  # floating | revolute | prismatic | fixed
    axis: np.ndarray | None = None   # unit joint axis in the link frame (revolute/prismatic)
    t_pos: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t_rot: np.ndarray = field(default_factory=lambda: np.eye(3))
    mass: float = 0.0
    com: np.ndarray = field(default_factory=lambda: np.zeros(3))
    inertia: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))  # about the COM, link frame


@dataclass
class Frame:
    link: int                        # -1 pins the frame to the world (zero Jacobian)
    rot: np.ndarray = field(default_factory=lambda: np.eye(3))
    pos: np.ndarray = field(default_factory=lambda: np.zeros(3))


class RobotModel:
    """A forest of kinematic trees treated as one block-diagonal system."""

    def __init__(self, links: list[LinkSpec], frames: dict[str, Frame] | None = None,
                 actuated: np.ndarray | None = None,
                 torque_limits: tuple[np.ndarray, np.ndarray] | None = None):
        self.links = links
        self.frames = dict(frames or {})
        n = len(links)
        self.nv = 0
        self.nq = 0
        self._v_slice = []
        self._q_slice = []
        n_base = 0
        for i, lk in enumerate(links):
            if lk.parent >= i:
                raise ValueError(f"link {lk.name}: parent index must be smaller than its own")
            if lk.joint_type not in _NV:
                raise ValueError(f"link {lk.name}: unknown joint type {lk.joint_type!r}")
            if lk.joint_type == FLOATING:
                if lk.parent != -1:
                    raise ValueError(f"link {lk.name}: floating joints are only allowed at tree roots")
                n_base += 1
            if lk.mass < 0:
                raise ValueError(f"link {lk.name}: negative mass")
            inr = np.asarray(lk.inertia, dtype=float)
            if np.abs(inr - inr.T).max() > 1e-12:
                raise ValueError(f"link {lk.name}: inertia must be symmetric")
            if np.linalg.eigvalsh(inr).min() < -1e-12:
                raise ValueError(f"link {lk.name}: inertia must be positive (semi)definite")
            self._v_slice.append(slice(self.nv, self.nv + _NV[lk.joint_type]))
            self._q_slice.append(slice(self.nq, self.nq + _NQ[lk.joint_type]))
            self.nv += _NV[lk.joint_type]
            self.nq += _NQ[lk.joint_type]
        self.n_bases = n_base

        # static structure: link of each velocity coordinate, root-path masks
        self.coord_link = np.zeros(self.nv, dtype=int)
        for i in range(n):
            self.coord_link[self._v_slice[i]] = i
        anc = np.zeros((n, self.nv), dtype=bool)    # anc[l, j]: coord j on the root path of link l
        for i in range(n):
            if links[i].parent >= 0:
                anc[i] = anc[links[i].parent]
            anc[i, self._v_slice[i]] = True
        self.path_mask = anc
        self.path_idx = [np.flatnonzero(anc[i]) for i in range(n)]
        # pair_mask[j, k]: coordinate j lies on the root path of coord k's link
        self.pair_mask = anc[self.coord_link].T.copy()

        if actuated is None:
            actuated = np.ones(self.nv, dtype=bool)
            for i, lk in enumerate(links):
                if lk.joint_type == FLOATING:
                    actuated[self._v_slice[i]] = False
        self.actuated = np.asarray(actuated, dtype=bool)
        if self.actuated.size != self.nv:
            raise DimensionError("actuated flags dimension mismatch")
        self.n_act = int(self.actuated.sum())
        if torque_limits is None:
            lim = np.full(self.n_act, np.inf)
            torque_limits = (-lim, lim.copy())
        self.tau_min, self.tau_max = (np.asarray(t, dtype=float) for t in torque_limits)
        if self.tau_min.size != self.n_act or self.tau_max.size != self.n_act:
            raise DimensionError("torque limit dimension mismatch")

        self._link_index = {lk.name: i for i, lk in enumerate(links)}
        self._flat = None
        self._scalar_idx = None

    def scalar_joint_index(self):
        """(config indices, velocity indices, floating link ids) of the scalar joints."""
        if self._scalar_idx is None:
            qi, vi, bases = [], [], []
            for i, lk in enumerate(self.links):
                if lk.joint_type == FLOATING:
                    bases.append(i)
                elif lk.joint_type != FIXED:
                    qi.append(self._q_slice[i].start)
                    vi.append(self._v_slice[i].start)
            self._scalar_idx = (np.array(qi, dtype=int), np.array(vi, dtype=int), bases)
        return self._scalar_idx

    def flat_arrays(self):
        """Flattened tree description consumed by the compiled kernels."""
        if self._flat is None:
            n = len(self.links)
            self._flat = dict(
                parent=np.array([lk.parent for lk in self.links], dtype=np.int64),
                jtype=np.array([_JTYPE_CODE[lk.joint_type] for lk in self.links], dtype=np.int64),
                axis=np.array([lk.axis if lk.axis is not None else np.zeros(3)
                               for lk in self.links], dtype=float).reshape(n, 3),
                t_pos=np.array([lk.t_pos for lk in self.links], dtype=float).reshape(n, 3),
                t_rot=np.array([lk.t_rot for lk in self.links], dtype=float).reshape(n, 3, 3),
                q_off=np.array([s.start for s in self._q_slice], dtype=np.int64),
                v_off=np.array([s.start for s in self._v_slice], dtype=np.int64),
                mass=np.array([lk.mass for lk in self.links], dtype=float),
                com=np.array([lk.com for lk in self.links], dtype=float).reshape(n, 3),
                inertia=np.array([lk.inertia for lk in self.links], dtype=float).reshape(n, 3, 3),
            )
        return self._flat

    # -- selection matrices -------------------------------------------------
    def selection_diag(self) -> np.ndarray:
        """Diagonal of S (1 on actuated coordinates)."""
        return self.actuated.astype(float)

    def selection_ns(self) -> np.ndarray:
        """Non-square selection S_ns (D x L): picks actuated torques."""
        S_ns = np.zeros((self.nv, self.n_act))
        S_ns[np.flatnonzero(self.actuated), np.arange(self.n_act)] = 1.0
        return S_ns

    def add_frame(self, name: str, link: int | str, rot=None, pos=None):
        if isinstance(link, str):
            link = self._link_index[link]
        self.frames[name] = Frame(link, np.eye(3) if rot is None else np.asarray(rot, float),
                                  np.zeros(3) if pos is None else np.asarray(pos, float))

    def link_id(self, name: str) -> int:
        return self._link_index[name]

    def v_slice(self, link: int) -> slice:
        return self._v_slice[link]

    def q_slice(self, link: int) -> slice:
        return self._q_slice[link]

    def neutral_q(self) -> np.ndarray:
        q = np.zeros(self.nq)
        for i, lk in enumerate(self.links):
            if lk.joint_type == FLOATING:
                q[self._q_slice[i].start + 3] = 1.0   # identity quaternion
        return q


@dataclass
class SystemState:
    """Generalized configuration and velocity of the multi-robot system."""

    q: np.ndarray
    qd: np.ndarray
    t: float = 0.0

    def copy(self) -> "SystemState":
        return SystemState(self.q.copy(), self.qd.copy(), self.t)


def check_state(model: RobotModel, state: SystemState, quat_tol: float = 1e-9):
    if state.q.size != model.nq or state.qd.size != model.nv:
        raise DimensionError(
            f"state dims (nq={state.q.size}, nv={state.qd.size}) do not match "
            f"model (nq={model.nq}, nv={model.nv})")
    for i, lk in enumerate(model.links):
        if lk.joint_type == FLOATING:
            quat = state.q[model.q_slice(i)][3:7]
            if abs(np.linalg.norm(quat) - 1.0) > quat_tol:
                raise ValueError(f"link {lk.name}: quaternion not unit norm")


def integrate_state(model: RobotModel, q: np.ndarray, qd: np.ndarray, dt: float) -> np.ndarray:
    """Configuration update q ⊕ (qd * dt); quaternions via the exponential map."""
    q_new = q.copy()
    qi, vi, bases = model.scalar_joint_index()
    q_new[qi] += qd[vi] * dt
    for i in bases:
        qs, vs = model.q_slice(i), model.v_slice(i)
        w_b = qd[vs.start:vs.start + 3]
        v_b = qd[vs.start + 3:vs.start + 6]
        quat = q[qs.start + 3:qs.start + 7]
        R = quat_to_rot(quat)
        q_new[qs.start:qs.start + 3] = q[qs.start:qs.start + 3] + R @ v_b * dt
        q_new[qs.start + 3:qs.start + 7] = integrate_quat(quat, w_b, dt)
    return q_new


def semi_implicit_step(model: RobotModel, state: SystemState, qdd: np.ndarray,
                       dt: float) -> SystemState:
    """One integration step: qd+ = qd + qdd dt; q+ = q ⊕ (qd + qd+)/2 dt.

    Semi-implicit in velocity, trapezoidal in position (exact positions for
    piecewise-constant acceleration, which ballistic flight needs).  Floating
    bases advance their linear velocity in the world frame - the body-frame
    coordinates rotate with the base, so a naive body-frame Euler update
    would leak energy at O(dt w^2 v) - and their quaternion through the
    exponential map of the midpoint angular velocity.
    """
    qd_new = state.qd + qdd * dt
    q_new = state.q.copy()
    qi, vi, bases = model.scalar_joint_index()
    q_new[qi] = state.q[qi] + 0.5 * (state.qd[vi] + qd_new[vi]) * dt
    for i in bases:
        qs, vs = model.q_slice(i), model.v_slice(i)
        w0 = state.qd[vs.start:vs.start + 3]
        v0 = state.qd[vs.start + 3:vs.start + 6]
        wd = qdd[vs.start:vs.start + 3]
        vd = qdd[vs.start + 3:vs.start + 6]
        quat0 = state.q[qs.start + 3:qs.start + 7]
        R0 = quat_to_rot(quat0)
        w_new = w0 + wd * dt
        quat_new = integrate_quat(quat0, 0.5 * (w0 + w_new), dt)
        R_new = quat_to_rot(quat_new)
        # world-frame linear update: a_w = R (vdot_b + w x v_b)
        v_w0 = R0 @ v0
        v_w = v_w0 + (R0 @ (vd + cross3(w0, v0))) * dt
        v_b_new = R_new.T @ v_w
        qd_new[vs.start:vs.start + 3] = w_new
        qd_new[vs.start + 3:vs.start + 6] = v_b_new
        q_new[qs.start:qs.start + 3] = (state.q[qs.start:qs.start + 3]
                                        + 0.5 * (v_w0 + v_w) * dt)
        q_new[qs.start + 3:qs.start + 7] = quat_new
    return SystemState(q_new, qd_new, state.t + dt)


class Kinematics:
    """Per-state evaluation cache: link poses, coordinate axes, velocities and
    bias accelerations in world-origin spatial coordinates."""

    def __init__(self, model: RobotModel, state: SystemState, gravity=(0.0, 0.0, -9.81)):
        check_state(model, state)
        self.model = model
        self.state = state
        self.gravity = np.asarray(gravity, dtype=float)
        self._pose_cache = {}
        n = len(model.links)
        D = model.nv
        q, qd = state.q, state.qd

        if _kernels.HAVE_NUMBA:
            fl = model.flat_arrays()
            R, p, ax_w, ax_v, vel, bias = _kernels.forward_pass(
                fl["parent"], fl["jtype"], fl["axis"], fl["t_pos"], fl["t_rot"],
                fl["q_off"], fl["v_off"], q, qd, self.gravity)
            self.R, self.p = R, p
            self.ax_w, self.ax_v = ax_w, ax_v
            self.vel, self.bias = vel, bias
            self._io = None
            self._M = None
            self._h = None
            return

        R = np.zeros((n, 3, 3))
        p = np.zeros((n, 3))
        ax_w = np.zeros((D, 3))     # angular part of each coordinate axis
        ax_v = np.zeros((D, 3))     # linear part at the world origin
        vel = np.zeros((n, 6))      # link spatial velocity (omega, v_O)
        bias = np.zeros((n, 6))     # link spatial bias acceleration, qdd = 0, gravity folded
        g_bias = np.concatenate([np.zeros(3), -self.gravity])

        eye3 = np.eye(3)
        zero3 = np.zeros(3)
        for i, lk in enumerate(model.links):
            par = lk.parent
            jt = lk.joint_type
            if jt == FLOATING:
                qi = q[model.q_slice(i)]
                R[i] = quat_to_rot(qi[3:7])
                p[i] = qi[:3]
            else:
                R_par = R[par] if par >= 0 else eye3
                p_par = p[par] if par >= 0 else zero3
                R_j = R_par @ lk.t_rot
                p_j = p_par + R_par @ lk.t_pos
                if jt == REVOLUTE:
                    c = np.cos(q[model.q_slice(i)][0])
                    s = np.sin(q[model.q_slice(i)][0])
                    K = skew(lk.axis)
                    R[i] = R_j @ (eye3 + s * K + (1 - c) * (K @ K))
                    p[i] = p_j
                elif jt == PRISMATIC:
                    R[i] = R_j
                    p[i] = p_j + R_j @ (lk.axis * q[model.q_slice(i)][0])
                else:  # fixed
                    R[i] = R_j
                    p[i] = p_j

            vs = model.v_slice(i)
            v_par = vel[par] if par >= 0 else np.zeros(6)
            b_par = bias[par] if par >= 0 else g_bias
            v_joint = np.zeros(6)
            if jt == FLOATING:
                k = vs.start
                W_t = R[i].T
                ax_w[k:k + 3] = W_t
                ax_v[k:k + 3] = cross_rows(p[i], W_t)
                ax_v[k + 3:k + 6] = W_t
                qdv = qd[vs]
                v_joint[:3] = ax_w[vs].T @ qdv
                v_joint[3:] = ax_v[vs].T @ qdv
            elif jt == REVOLUTE:
                w = (R[par] if par >= 0 else eye3) @ (lk.t_rot @ lk.axis)
                ax_w[vs.start] = w
                ax_v[vs.start] = cross3(p[i], w)
                rate = qd[vs.start]
                v_joint[:3] = w * rate
                v_joint[3:] = ax_v[vs.start] * rate
            elif jt == PRISMATIC:
                w = (R[par] if par >= 0 else eye3) @ (lk.t_rot @ lk.axis)
                ax_v[vs.start] = w
                v_joint[3:] = w * qd[vs.start]

            vel[i] = v_par + v_joint
            # bias_l = bias_parent + v_l ×m v_joint  (valid for parent- and body-fixed axes)
            wl = vel[i, :3]
            vl = vel[i, 3:]
            bias[i, :3] = b_par[:3] + cross3(wl, v_joint[:3])
            bias[i, 3:] = b_par[3:] + cross3(wl, v_joint[3:]) + cross3(vl, v_joint[:3])

        self.R, self.p = R, p
        self.ax_w, self.ax_v = ax_w, ax_v
        self.vel, self.bias = vel, bias
        self._io = None      # lazy per-link spatial inertia at the origin
        self._M = None
        self._h = None

    # -- spatial inertia about the world origin ------------------------------
    def _link_inertia_origin(self) -> np.ndarray:
        if self._io is not None:
            return self._io
        if _kernels.HAVE_NUMBA:
            fl = self.model.flat_arrays()
            self._io = _kernels.inertia_origin(fl["mass"], fl["com"], fl["inertia"], self.R, self.p)
            return self._io
        n = len(self.model.links)
        IO = np.zeros((n, 6, 6))
        for i, lk in enumerate(self.model.links):
            if lk.mass == 0.0 and not np.any(lk.inertia):
                continue
            c = self.p[i] + self.R[i] @ lk.com
            Iw = self.R[i] @ lk.inertia @ self.R[i].T
            Sc = skew(c)
            IO[i, :3, :3] = Iw - lk.mass * (Sc @ Sc)
            IO[i, :3, 3:] = lk.mass * Sc
            IO[i, 3:, :3] = -lk.mass * Sc
            IO[i, 3:, 3:] = lk.mass * np.eye(3)
        self._io = IO
        return IO

    def mass_matrix(self) -> np.ndarray:
        if self._M is not None:
            return self._M
        model = self.model
        IO = self._link_inertia_origin()
        if _kernels.HAVE_NUMBA:
            IC = _kernels.composite_inertia_pass(model.flat_arrays()["parent"], IO)
        else:
            IC = IO.copy()
            for i in range(len(model.links) - 1, -1, -1):
                par = model.links[i].parent
                if par >= 0:
                    IC[par] += IC[i]
        A = np.concatenate([self.ax_w, self.ax_v], axis=1)          # (D, 6)
        if _kernels.HAVE_NUMBA:
            F = _kernels.coordinate_forces(IC, model.coord_link, self.ax_w, self.ax_v)
        else:
            F = np.einsum("dij,dj->di", IC[model.coord_link], A)    # (D, 6)
        W = A @ F.T                                                 # W[j,k] = a_j^T IC_lk a_k
        Cm = model.pair_mask
        M_raw = np.where(Cm, W, 0.0)
        both = Cm & Cm.T
        M = M_raw + M_raw.T - np.where(both, W, 0.0)
        M = 0.5 * (M + M.T)
        self._M = M
        return M

    def bias_forces(self) -> np.ndarray:
        """h(q, qd): gravity, Coriolis and centrifugal generalized forces."""
        if self._h is not None:
            return self._h
        model = self.model
        IO = self._link_inertia_origin()
        n = len(model.links)
        if _kernels.HAVE_NUMBA:
            f = _kernels.bias_force_pass(model.flat_arrays()["parent"], IO, self.vel, self.bias)
        else:
            f = np.zeros((n, 6))
            for i in range(n):
                Iv = IO[i] @ self.vel[i]
                w, v = self.vel[i, :3], self.vel[i, 3:]
                # force cross product: (w, v) ×f (n, f) = (w×n + v×f, w×f)
                f[i] = IO[i] @ self.bias[i]
                f[i, :3] += cross3(w, Iv[:3]) + cross3(v, Iv[3:])
                f[i, 3:] += cross3(w, Iv[3:])
            for i in range(n - 1, -1, -1):
                par = model.links[i].parent
                if par >= 0:
                    f[par] += f[i]
        A = np.concatenate([self.ax_w, self.ax_v], axis=1)
        self._h = np.einsum("dj,dj->d", A, f[model.coord_link])
        return self._h

    # -- frames ---------------------------------------------------------------
    def _frame(self, frame: str) -> Frame:
        try:
            return self.model.frames[frame]
        except KeyError:
            raise UnknownFrameError(f"unknown frame {frame!r}") from None

    def frame_pose(self, frame: str) -> tuple[np.ndarray, np.ndarray]:
        hit = self._pose_cache.get(frame)
        if hit is not None:
            return hit
        f = self._frame(frame)
        if f.link < 0:
            pose = (f.rot.copy(), f.pos.copy())
        else:
            pose = (self.R[f.link] @ f.rot, self.p[f.link] + self.R[f.link] @ f.pos)
        self._pose_cache[frame] = pose
        return pose

    def frame_jacobian_world(self, frame: str) -> np.ndarray:
        """6 x D world-frame rows (angular; linear) at the frame origin."""
        f = self._frame(frame)
        D = self.model.nv
        J = np.zeros((6, D))
        if f.link < 0:
            return J
        _, x = self.frame_pose(frame)
        idx = self.model.path_idx[f.link]
        if _kernels.HAVE_NUMBA:
            J[:, idx] = _kernels.gather_full_rows(self.ax_w, self.ax_v, idx, x)
        else:
            J[:3, idx] = self.ax_w[idx].T
            J[3:, idx] = (self.ax_v[idx] + rows_cross(self.ax_w[idx], x)).T
        return J

    def point_rows(self, frame: str, with_bias: bool = True):
        """Fused (J3, bias3, x) of the frame origin point (world linear rows)."""
        f = self._frame(frame)
        D = self.model.nv
        if f.link < 0:
            _, x = self.frame_pose(frame)
            return np.zeros((3, D)), np.zeros(3), x
        _, x = self.frame_pose(frame)
        idx = self.model.path_idx[f.link]
        J = np.zeros((3, D))
        if _kernels.HAVE_NUMBA:
            J[:, idx] = _kernels.gather_point_rows(self.ax_w, self.ax_v, idx, x)
        else:
            J[:, idx] = (self.ax_v[idx] + rows_cross(self.ax_w[idx], x)).T
        if not with_bias:
            return J, np.zeros(3), x
        w, vO = self.vel[f.link][:3], self.vel[f.link][3:]
        al = self.bias[f.link][:3]
        aO = self.bias[f.link][3:] + self.gravity
        v_pt = vO + cross3(w, x)
        a_pt = aO + cross3(al, x) + cross3(w, v_pt)
        return J, a_pt, x

    def frame_velocity_world(self, frame: str) -> np.ndarray:
        """(omega; v) of the frame in world coordinates."""
        f = self._frame(frame)
        if f.link < 0:
            return np.zeros(6)
        _, x = self.frame_pose(frame)
        w, vO = self.vel[f.link][:3], self.vel[f.link][3:]
        return np.concatenate([w, vO + cross3(w, x)])

    def frame_bias_world(self, frame: str) -> np.ndarray:
        """Jdot*qd of the world-frame rows: (alpha; a_point) with qdd = 0.

        Gravity folded into the root bias is removed again so the result is
        a purely kinematic quantity.
        """
        f = self._frame(frame)
        if f.link < 0:
            return np.zeros(6)
        _, x = self.frame_pose(frame)
        w, vO = self.vel[f.link][:3], self.vel[f.link][3:]
        al = self.bias[f.link][:3]
        aO = self.bias[f.link][3:] + self.gravity   # undo the gravity trick
        v_pt = vO + cross3(w, x)
        a_pt = aO + cross3(al, x) + cross3(w, v_pt)
        return np.concatenate([al, a_pt])


# -- spec-level operations ----------------------------------------------------

def mass_matrix(model: RobotModel, state: SystemState) -> np.ndarray:
    return Kinematics(model, state, gravity=(0, 0, 0)).mass_matrix()


def nonlinear_effects(model: RobotModel, state: SystemState, gravity=(0.0, 0.0, -9.81)) -> np.ndarray:
    return Kinematics(model, state, gravity).bias_forces()


def frame_jacobian(model: RobotModel, state: SystemState, frame: str, kind: str = "full6") -> np.ndarray:
    J = Kinematics(model, state, gravity=(0, 0, 0)).frame_jacobian_world(frame)
    if kind == "point3":
        return J[3:]
    if kind == "full6":
        return J
    raise ValueError(f"unknown jacobian kind {kind!r}")


def jacobian_drift(model: RobotModel, state: SystemState, frame: str, kind: str = "full6") -> np.ndarray:
    b = Kinematics(model, state, gravity=(0, 0, 0)).frame_bias_world(frame)
    if kind == "point3":
        return b[3:]
    if kind == "full6":
        return b
    raise ValueError(f"unknown jacobian kind {kind!r}")


def kinetic_energy(model: RobotModel, state: SystemState) -> float:
    M = mass_matrix(model, state)
    return 0.5 * float(state.qd @ M @ state.qd)


def potential_energy(model: RobotModel, state: SystemState, gravity=(0.0, 0.0, -9.81)) -> float:
    kin = Kinematics(model, state, gravity=(0, 0, 0))
    g = np.asarray(gravity, dtype=float)
    U = 0.0
    for i, lk in enumerate(model.links):
        c = kin.p[i] + kin.R[i] @ lk.com
        U -= lk.mass * float(g @ c)
    return U
