"""Grasp model, constraint Jacobian, orthogonal projection and constraint-wrench
inference for the co-manipulation control stack.

Constraint-row layout (fixed, used by the wrench QP and all traces):

* first ``3 * L`` rows: one block of 3 world-frame linear rows per contact
  foot, in declaration order; the matching multipliers are world-frame
  ground-reaction forces;
* then ``6 * N_c`` rows: one block of 6 rows per hand (then environment)
  contact, expressed in the contact frame and ordered (linear; angular);
  the matching multipliers are contact wrenches ordered (force; moment),
  i.e. (lambda_fx, lambda_fy, lambda_fz, lambda_mx, lambda_my, lambda_mz)
  with z the contact normal.

The (linear; angular) block order inside hand rows is what makes the grasp
nullspace projector ``I - G^T (G^+)^T`` annihilate exactly the rigid common
motions of the hands (and the wrench order match the friction and moment
constraint matrices).  ``model.frame_jacobian`` keeps its own
(angular; linear) world-frame convention; this module performs the
conversion at its boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Kinematics, RobotModel, SystemState, integrate_state
from .spatial import cross3, skew, truncated_pinv


@dataclass
class FootContact:
    frame: str
    mu: float = 0.7
    n_x: np.ndarray = field(default_factory=lambda: np.array([1.0, 0, 0]))
    n_y: np.ndarray = field(default_factory=lambda: np.array([0, 1.0, 0]))
    n_z: np.ndarray = field(default_factory=lambda: np.array([0, 0, 1.0]))
    anchor: np.ndarray | None = None      # world-frame stance point (sim constraint target)


@dataclass
class HandContact:
    """Surface contact between a hand (or the environment) and the object.

    ``rot``/``lever`` define the partial grasp matrix: rotation of the contact
    frame and lever arm from the object COM, both in the object frame and
    constant while the grasp holds.  ``frame`` is the robot hand frame
    carrying the contact; None marks an environment contact whose Jacobian
    is identically zero.  ``grip_rot``/``grip_pos`` place the contact frame
    relative to the hand frame.
    """

    frame: str | None
    rot: np.ndarray
    lever: np.ndarray
    mu: float = 0.5
    xi: float = 0.1                       # torsional friction coefficient
    half_x: float = 0.05                  # rectangular patch half extents
    half_y: float = 0.05
    grip_rot: np.ndarray = field(default_factory=lambda: np.eye(3))
    grip_pos: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass
class ContactSet:
    foot_contacts: list[FootContact] = field(default_factory=list)
    hand_contacts: list[HandContact] = field(default_factory=list)
    environment_contacts: list[HandContact] = field(default_factory=list)

    def __post_init__(self):
        for fc in self.foot_contacts:
            T = np.column_stack([fc.n_x, fc.n_y, fc.n_z])
            if np.abs(T.T @ T - np.eye(3)).max() > 1e-9:
                raise ValueError(f"foot {fc.frame}: surface axes not orthonormal")
            if fc.mu <= 0:
                raise ValueError(f"foot {fc.frame}: mu must be positive")
        for hc in self.hand_contacts + self.environment_contacts:
            _check_rotation(hc.rot)
            if hc.mu <= 0 or hc.xi < 0 or hc.half_x <= 0 or hc.half_y <= 0:
                raise ValueError("hand contact friction/patch parameters out of range")
        self._grasp_cache = None

    def grasp_pieces(self):
        """(G, N_G, G_pinv) for the grasp contacts; constants while the grasp
        holds, so they are built once per contact set."""
        if not self.n_grasp:
            return None, None, None
        if self._grasp_cache is None:
            G = complete_grasp_matrix(self)
            Gp, _, _ = truncated_pinv(G)
            N_G = np.eye(G.shape[1]) - G.T @ Gp.T
            self._grasp_cache = (G, N_G, Gp)
        return self._grasp_cache

    def grasp_contacts(self) -> list[HandContact]:
        return list(self.hand_contacts) + list(self.environment_contacts)

    @property
    def n_feet(self) -> int:
        return len(self.foot_contacts)

    @property
    def n_grasp(self) -> int:
        return len(self.hand_contacts) + len(self.environment_contacts)

    @property
    def k_rows(self) -> int:
        return 3 * self.n_feet + 6 * self.n_grasp

    def foot_slice(self, i: int) -> slice:
        return slice(3 * i, 3 * i + 3)

    def hand_slice(self, i: int) -> slice:
        return slice(3 * self.n_feet + 6 * i, 3 * self.n_feet + 6 * i + 6)


def _check_rotation(R):
    R = np.asarray(R, dtype=float)
    if np.abs(R.T @ R - np.eye(3)).max() > 1e-9 or np.linalg.det(R) < 0:
        raise ValueError("contact rotation is not orthonormal")


# -- grasp matrices -----------------------------------------------------------

def partial_grasp_matrix(rot, lever) -> np.ndarray:
    """[[R, 0], [S(r) R, R]]: transports contact-frame wrenches (f; m) to the
    object wrench and, read as its transpose, object twists (v; w) to
    contact-frame twists."""
    _check_rotation(rot)
    G = np.zeros((6, 6))
    G[:3, :3] = rot
    G[3:, 3:] = rot
    G[3:, :3] = skew(lever) @ rot
    return G


def complete_grasp_matrix(contacts: ContactSet) -> np.ndarray:
    grasp = contacts.grasp_contacts()
    if not grasp:
        raise ValueError("complete grasp matrix requires at least one hand or environment contact")
    return np.hstack([partial_grasp_matrix(hc.rot, hc.lever) for hc in grasp])


def grasp_nullspace(G: np.ndarray) -> np.ndarray:
    """I - G^T (G^+)^T: projector onto internal (zero net object wrench) space."""
    Gp, _, _ = truncated_pinv(G)
    n = G.shape[1]
    return np.eye(n) - G.T @ Gp.T


def rigid_grasp_jacobian(G: np.ndarray, J_ee: np.ndarray) -> np.ndarray:
    """Eq-style rigid-grasp constraint rows: only relative hand motion is
    constrained; the common object twist passes through freely."""
    return grasp_nullspace(G) @ J_ee


def object_jacobian(G: np.ndarray, J_ee: np.ndarray) -> np.ndarray:
    """Object-COM Jacobian (G^+)^T J_ee; rows (linear; angular) in the frame
    the grasp model was declared in (the object frame)."""
    Gp, _, _ = truncated_pinv(G)
    return Gp.T @ J_ee


# -- constraint rows ----------------------------------------------------------

def foot_rows(kin: Kinematics, fc: FootContact, with_drift: bool = True):
    """(J3, jdot_qd3, p) world-frame point rows of one foot."""
    return kin.point_rows(fc.frame, with_bias=with_drift)


def contact_frame_pose(kin: Kinematics, hc: HandContact):
    R_h, p_h = kin.frame_pose(hc.frame)
    return R_h @ hc.grip_rot, p_h + R_h @ hc.grip_pos


def hand_rows(kin: Kinematics, hc: HandContact, with_drift: bool = True):
    """(J6, jdot_qd6) of one hand contact: contact-frame rows (linear; angular).

    Environment contacts return zeros (Remark: object pressed against a wall).
    """
    D = kin.model.nv
    if hc.frame is None:
        return np.zeros((6, D)), np.zeros(6)
    R_c, x_c = contact_frame_pose(kin, hc)
    Jw = kin.frame_jacobian_world(hc.frame)          # (ang; lin) at hand origin
    R_h, p_h = kin.frame_pose(hc.frame)
    r = x_c - p_h
    # shift the linear rows from the hand origin to the contact point,
    # then rotate world rows into the contact frame
    J_lin = Jw[3:] - skew(r) @ Jw[:3]
    J_ang = Jw[:3]
    J = np.vstack([R_c.T @ J_lin, R_c.T @ J_ang])
    if not with_drift:
        return J, np.zeros(6)
    bw = kin.frame_bias_world(hc.frame)
    w = kin.frame_velocity_world(hc.frame)[:3]
    b_lin = bw[3:] - skew(r) @ bw[:3] + cross3(w, cross3(w, r))
    b_ang = bw[:3]
    # d/dt(Rc^T y) = Rc^T (ydot - w x y) for the moving contact frame
    vel_lin = J_lin @ kin.state.qd
    vel_ang = J_ang @ kin.state.qd
    b = np.concatenate([R_c.T @ (b_lin - cross3(w, vel_lin)),
                        R_c.T @ (b_ang - cross3(w, vel_ang))])
    return J, b


def stacked_hand_jacobian(kin: Kinematics, contacts: ContactSet, with_drift: bool = True):
    """J_ee (6 N_c x D) and its drift vector, hands then environment contacts."""
    grasp = contacts.grasp_contacts()
    D = kin.model.nv
    J = np.zeros((6 * len(grasp), D))
    b = np.zeros(6 * len(grasp))
    for i, hc in enumerate(grasp):
        J[6 * i:6 * i + 6], b[6 * i:6 * i + 6] = hand_rows(kin, hc, with_drift)
    return J, b


def constraint_jacobian(kin: Kinematics, contacts: ContactSet, with_drift: bool = True):
    """J_c = [J_cf; J_c,ee] (row-stacked) plus its drift vector and the grasp
    pieces (G, N_G, J_ee, J_ee drift)."""
    D = kin.model.nv
    K = contacts.k_rows
    J_c = np.zeros((K, D))
    jdot_qd = np.zeros(K)
    for i, fc in enumerate(contacts.foot_contacts):
        Jf, bf, _ = foot_rows(kin, fc, with_drift)
        J_c[contacts.foot_slice(i)] = Jf
        jdot_qd[contacts.foot_slice(i)] = bf
    G, N_G, _ = contacts.grasp_pieces()
    J_ee = None
    jdot_ee = None
    if contacts.n_grasp:
        J_ee, jdot_ee = stacked_hand_jacobian(kin, contacts, with_drift)
        J_c[3 * contacts.n_feet:] = N_G @ J_ee
        jdot_qd[3 * contacts.n_feet:] = N_G @ jdot_ee
    return J_c, jdot_qd, G, N_G, J_ee, jdot_ee


# -- projection bundle --------------------------------------------------------

@dataclass
class ProjectionBundle:
    """Immutable per-tick snapshot of the constrained-dynamics decomposition."""

    J_c: np.ndarray
    jdot_qd: np.ndarray          # Jc_dot @ qd, same row layout as J_c
    P: np.ndarray
    Pdot_qd: np.ndarray
    M: np.ndarray
    h: np.ndarray
    M_c: np.ndarray              # P M + I - P
    M_c_inv: np.ndarray
    Mbar: np.ndarray             # M M_c^-1
    B: np.ndarray                # I - [(I - S)(I - P)]^+
    PS_pinv: np.ndarray          # [P S]^+
    Jc_T_pinv: np.ndarray        # (J_c^T)^+, from the same SVD as P
    S_diag: np.ndarray
    rank_c: int
    drift_path: str              # "analytic" | "fd" | "static"
    G: np.ndarray | None
    N_G: np.ndarray | None
    J_ee: np.ndarray | None
    J_o: np.ndarray | None       # (G^+)^T J_ee, rows (lin; ang) in object frame
    jdot_ee: np.ndarray | None
    contacts: ContactSet | None
    tick: float = 0.0

    @property
    def K(self) -> int:
        return self.J_c.shape[0]

    @property
    def D(self) -> int:
        return self.P.shape[0]


def _projector_from_svd(D: int, Vt_r: np.ndarray) -> np.ndarray:
    if Vt_r.shape[0] == 0:
        return np.eye(D)
    return np.eye(D) - Vt_r.T @ Vt_r


def projector(J_c: np.ndarray, svd_scale: float | None = None) -> np.ndarray:
    """P = I - J_c^T (J_c^+)^T via the truncated SVD (rank-safe)."""
    _, _, (_, _, Vt_r) = truncated_pinv(J_c, svd_scale)
    return _projector_from_svd(J_c.shape[1], Vt_r)


def projection_drift(model: RobotModel, state: SystemState, contacts: ContactSet,
                     kin: Kinematics | None = None, fd_dt: float = 1e-6,
                     svd_scale: float | None = None, mode: str = "auto",
                     _pieces=None):
    """Pdot @ qd.

    Paths, recorded in the returned tag:
      * "analytic": full-row-rank J_c, pseudoinverse derivative formula;
      * "fd": central finite difference of P along the state flow;
      * "consistent": exact identity Pdot qd = -J_c^+ (Jc_dot qd), valid on
        states satisfying the contact constraint (J_c qd = 0), where the
        J_dot^+ (J_c qd) term of the general derivative vanishes;
      * "static": qd = 0 or no contacts.

    mode = "auto" prefers consistent > analytic > fd; "fd"/"analytic" force
    a path (the latter raises on rank-deficient J_c).
    """
    kin = kin or Kinematics(model, state, gravity=(0, 0, 0))
    if _pieces is None:
        J_c, jdot_qd, _, _, _, _ = constraint_jacobian(kin, contacts)
        Jc_pinv, rank, _ = truncated_pinv(J_c, svd_scale)
    else:
        J_c, jdot_qd, Jc_pinv, rank = _pieces
    K, D = J_c.shape
    if K == 0 or not np.any(state.qd):
        return np.zeros(D), "static"
    if mode == "auto":
        qd_res = np.abs(J_c @ state.qd).max()
        if qd_res <= 1e-8 * (1.0 + np.abs(state.qd).max()):
            return -Jc_pinv @ jdot_qd, "consistent"
        mode = "analytic" if rank == K else "fd"
    if mode == "analytic":
        if rank != K:
            raise ValueError("analytic projection drift requires full row rank")
        Jdot = _full_jacobian_rate(kin, contacts)
        JJt = J_c @ J_c.T
        Jp = np.linalg.solve(JJt, J_c).T          # J_c^+ for full row rank
        dJp = (-Jp @ Jdot @ Jp
               + (np.eye(D) - Jp @ J_c) @ Jdot.T @ np.linalg.inv(JJt))
        # P = I - J_c^T (J_c^+)^T  =>  Pdot = -(Jdot^T Jp^T + J_c^T dJp^T)
        Pdot = -(Jdot.T @ Jp.T + J_c.T @ dJp.T)
        return Pdot @ state.qd, "analytic"
    # finite difference along the flow
    qd = state.qd
    q_p = integrate_state(model, state.q, qd, +0.5 * fd_dt)
    q_m = integrate_state(model, state.q, qd, -0.5 * fd_dt)
    P_p = _projector_at(model, q_p, qd, contacts, svd_scale)
    P_m = _projector_at(model, q_m, qd, contacts, svd_scale)
    return (P_p - P_m) / fd_dt @ qd, "fd"


def _projector_at(model, q, qd, contacts, svd_scale):
    kin = Kinematics(model, SystemState(q, qd), gravity=(0, 0, 0))
    J_c, _, _, _, _, _ = constraint_jacobian(kin, contacts, with_drift=False)
    _, _, (_, _, Vt_r) = truncated_pinv(J_c, svd_scale)
    return _projector_from_svd(model.nv, Vt_r)


def _full_jacobian_rate(kin: Kinematics, contacts: ContactSet) -> np.ndarray:
    """Full matrix d(J_c)/dt, used only on the full-row-rank analytic path."""
    model = kin.model
    D = model.nv
    qd = kin.state.qd
    # per-coordinate axis rates
    wdot = np.zeros((D, 3))
    ddot = np.zeros((D, 3))
    for j in range(D):
        l = model.coord_link[j]
        lk = model.links[l]
        if lk.joint_type == "floating":
            w_carrier = kin.vel[l][:3]
            p_anchor = kin.p[l]
            v_anchor = kin.vel[l][3:] + np.cross(w_carrier, p_anchor)
        else:
            par = lk.parent
            w_carrier = kin.vel[par][:3] if par >= 0 else np.zeros(3)
            p_anchor = kin.p[l]
            v_par = kin.vel[par][3:] if par >= 0 else np.zeros(3)
            v_anchor = v_par + np.cross(w_carrier, p_anchor)
        w = kin.ax_w[j]
        wdot[j] = np.cross(w_carrier, w)
        if lk.joint_type == "prismatic":
            ddot[j] = np.cross(w_carrier, kin.ax_v[j])
        elif lk.joint_type == "floating" and not np.any(w):
            # linear coordinate of the floating joint
            ddot[j] = np.cross(w_carrier, kin.ax_v[j])
        else:
            ddot[j] = np.cross(v_anchor, w) + np.cross(p_anchor, wdot[j])

    K = contacts.k_rows
    Jdot = np.zeros((K, D))
    for i, fc in enumerate(contacts.foot_contacts):
        f = kin.model.frames[fc.frame]
        mask = model.path_mask[f.link]
        _, x = kin.frame_pose(fc.frame)
        xdot = kin.frame_velocity_world(fc.frame)[3:]
        cols = (ddot[mask] + np.cross(wdot[mask], x) + np.cross(kin.ax_w[mask], xdot)).T
        Jdot[contacts.foot_slice(i), mask] = cols
    if contacts.n_grasp:
        raise NotImplementedError("analytic Jc rate is only used for foot-only contact sets")
    return Jdot


def build_projection(model: RobotModel, state: SystemState, contacts: ContactSet,
                     gravity=(0.0, 0.0, -9.81), svd_scale: float | None = None,
                     kin: Kinematics | None = None, drift_mode: str = "auto") -> ProjectionBundle:
    kin = kin or Kinematics(model, state, gravity)
    D = model.nv
    J_c, jdot_qd, G, N_G, J_ee, jdot_ee = constraint_jacobian(kin, contacts)
    Jc_pinv, rank_c, (_, _, Vt_r) = truncated_pinv(J_c, svd_scale)
    P = _projector_from_svd(D, Vt_r)
    M = kin.mass_matrix()
    h = kin.bias_forces()
    I = np.eye(D)
    M_c = P @ M + I - P
    M_c_inv = np.linalg.inv(M_c)
    Mbar = M @ M_c_inv
    S_diag = model.selection_diag()
    # (I - S)(I - P) has nonzero rows only on unactuated coordinates; its
    # pseudoinverse reduces to that row block (B^+ = rows^+ selector^T)
    un = ~model.actuated
    rows = (I - P)[un]
    rows_p, _, _ = truncated_pinv(rows, svd_scale)
    B = I.copy()
    B -= rows_p @ np.eye(D)[un]
    PS = P * S_diag[None, :]
    PS_pinv, _, _ = truncated_pinv(PS, svd_scale)
    if J_c.shape[0] == 0:
        Pdot_qd, path = np.zeros(D), "static"
    else:
        Pdot_qd, path = projection_drift(
            model, state, contacts, kin=kin, svd_scale=svd_scale, mode=drift_mode,
            _pieces=(J_c, jdot_qd, Jc_pinv, rank_c))
    J_o = None
    if G is not None:
        J_o = contacts.grasp_pieces()[2].T @ J_ee
    return ProjectionBundle(
        J_c=J_c, jdot_qd=jdot_qd, P=P, Pdot_qd=Pdot_qd, M=M, h=h,
        M_c=M_c, M_c_inv=M_c_inv, Mbar=Mbar, B=B, PS_pinv=PS_pinv,
        Jc_T_pinv=Jc_pinv.T, S_diag=S_diag, rank_c=rank_c, drift_path=path,
        G=G, N_G=N_G, J_ee=J_ee, J_o=J_o, jdot_ee=jdot_ee, contacts=contacts,
        tick=state.t,
    )


# -- acceleration / wrench inference -------------------------------------------

def infer_acceleration(bundle: ProjectionBundle, tau: np.ndarray,
                       F_ext: np.ndarray | None = None,
                       J_x: np.ndarray | None = None) -> np.ndarray:
    """qdd = M_c^-1 (P S tau - P h + Pdot qd + P J_x^T F)."""
    P, S = bundle.P, bundle.S_diag
    rhs = P @ (S * tau) - P @ bundle.h + bundle.Pdot_qd
    if F_ext is not None and J_x is not None:
        rhs = rhs + P @ (J_x.T @ F_ext)
    return bundle.M_c_inv @ rhs


def infer_constraint_wrench(bundle: ProjectionBundle, tau: np.ndarray,
                            F_ext: np.ndarray | None = None,
                            J_x: np.ndarray | None = None) -> np.ndarray:
    """Constraint wrenches from the projected dynamics (closed form)."""
    if bundle.K == 0:
        return np.zeros(0)
    P, S, Mbar, h = bundle.P, bundle.S_diag, bundle.Mbar, bundle.h
    I = np.eye(bundle.D)
    ImP = I - P
    core = ImP @ (Mbar @ (P @ (S * tau) - P @ h + bundle.Pdot_qd) + h) - ImP @ (S * tau)
    if F_ext is not None and J_x is not None:
        core = core + ImP @ ((Mbar @ P - I) @ (J_x.T @ F_ext))
    return bundle.Jc_T_pinv @ core


def detect_slip(bundle: ProjectionBundle, qd: np.ndarray, tol: float = 1e-3):
    """True iff the constraint velocity residual J_c qd exceeds tol (inf-norm)."""
    residual = bundle.J_c @ qd if bundle.K else np.zeros(0)
    slipping = bool(residual.size and np.abs(residual).max() > tol)
    return slipping, residual
