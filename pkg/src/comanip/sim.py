"""Constrained forward-dynamics simulator: the ground-truth oracle.

The simulated system couples the robot model with the manipulated object as
one extended KKT problem: foot rows pin stance points to their world anchors,
hand rows are bilateral 6-DoF welds between each hand contact frame and the
matching object-fixed frame while grasped.  Baumgarte feedback stabilizes the
constraint drift during integration; reported multipliers are solved from
the unstabilized rows so they are the physical contact wrenches at the
current state.

Multiplier layout matches the controller's constraint rows: world-frame foot
forces, then hand wrenches (force; moment) in contact frames, acting on the
robots.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .contact import (ContactSet, contact_frame_pose, foot_rows, hand_rows,
                      partial_grasp_matrix)
from .model import (Kinematics, RobotModel, SystemState, semi_implicit_step)
from .spatial import cross3, quat_to_rot, rot_log


@dataclass
class Perturbation:
    """Time-windowed external wrench (world frame, (force; moment)) applied
    at a named frame or at the object COM ("object")."""

    target: str
    wrench: np.ndarray
    t_on: float
    t_off: float

    def active(self, t: float) -> bool:
        return self.t_on <= t < self.t_off


@dataclass
class World:
    model: RobotModel                    # robot system
    state: SystemState
    contacts: ContactSet
    object_model: RobotModel | None = None
    object_state: SystemState | None = None
    perturbations: list[Perturbation] = field(default_factory=list)
    gravity: tuple = (0.0, 0.0, -9.81)
    baumgarte_alpha: float = 50.0
    baumgarte_beta: float = 50.0
    flags: list[str] = field(default_factory=list)

    @property
    def grasped(self) -> bool:
        return self.object_model is not None and self.contacts.n_grasp > 0

    def copy(self) -> "World":
        w = World(self.model, self.state.copy(), self.contacts,
                  self.object_model,
                  self.object_state.copy() if self.object_state else None,
                  list(self.perturbations), self.gravity,
                  self.baumgarte_alpha, self.baumgarte_beta, list(self.flags))
        return w


def _object_dynamics(world: World):
    """Body-frame mass matrix and bias of the object in its (w; v) state
    coordinates."""
    lk = world.object_model.links[0]
    q = world.object_state.q
    qd = world.object_state.qd
    R = quat_to_rot(q[3:7])
    w_b, v_b = qd[:3], qd[3:]
    M = np.zeros((6, 6))
    M[:3, :3] = lk.inertia
    M[3:, 3:] = lk.mass * np.eye(3)
    g = np.asarray(world.gravity)
    bias = np.concatenate([
        cross3(w_b, lk.inertia @ w_b),
        lk.mass * cross3(w_b, v_b) - lk.mass * (R.T @ g),
    ])
    return M, bias, R


# flips object (w; v) state coordinates into (v; w) twist blocks
_FLIP = np.zeros((6, 6))
_FLIP[:3, 3:] = np.eye(3)
_FLIP[3:, :3] = np.eye(3)


def _weld_rows(world: World, kin: Kinematics):
    """Hand-object weld constraint blocks: J_r (rows x D), J_o (rows x 6),
    drift (rows), position error c (rows)."""
    grasp = world.contacts.grasp_contacts()
    D = world.model.nv
    n = len(grasp)
    J_r = np.zeros((6 * n, D))
    J_o = np.zeros((6 * n, 6))
    drift = np.zeros(6 * n)
    c_err = np.zeros(6 * n)
    q_o = world.object_state.q
    R_obj = quat_to_rot(q_o[3:7])
    p_obj = q_o[:3]
    for i, hc in enumerate(grasp):
        sl = slice(6 * i, 6 * i + 6)
        Jh, bh = hand_rows(kin, hc)
        J_r[sl] = Jh
        drift[sl] = bh
        G_i = partial_grasp_matrix(hc.rot, hc.lever)
        J_o[sl] = -G_i.T @ _FLIP
        # pose error: hand contact frame vs object-fixed contact frame
        R_oc = R_obj @ hc.rot
        p_oc = p_obj + R_obj @ hc.lever
        if hc.frame is None:
            R_hc, p_hc = hc.grip_rot, hc.grip_pos
        else:
            R_hc, p_hc = contact_frame_pose(kin, hc)
        c_err[sl.start:sl.start + 3] = R_hc.T @ (p_hc - p_oc)
        c_err[sl.start + 3:sl.start + 6] = rot_log(R_hc.T @ R_oc) * -1.0
    return J_r, J_o, drift, c_err


def _external_generalized(world: World, kin: Kinematics, t: float):
    """Generalized forces of the active perturbations on (robots, object)."""
    D = world.model.nv
    f_r = np.zeros(D)
    f_o = np.zeros(6)
    for p in world.perturbations:
        if not p.active(t):
            continue
        w = np.asarray(p.wrench, dtype=float)
        if p.target == "object":
            if world.object_state is None:
                continue
            R = quat_to_rot(world.object_state.q[3:7])
            f_o += np.concatenate([R.T @ w[3:], R.T @ w[:3]])   # (torque; force) body
        else:
            J = kin.frame_jacobian_world(p.target)              # (ang; lin)
            f_r += J.T @ np.concatenate([w[3:], w[:3]])
    return f_r, f_o


def forward_dynamics_kkt(world: World, tau: np.ndarray, t: float = 0.0,
                         kin: Kinematics | None = None, with_baumgarte: bool = True):
    """Solve the extended KKT system.

    Returns (qdd robots, qdd object (or None), lambda, lambda_clean, flags):
    lambda is the multiplier of the integrated (stabilized) dynamics,
    lambda_clean of the unstabilized rows (the physical contact wrench).
    """
    model = world.model
    D = model.nv
    kin = kin or Kinematics(model, world.state, world.gravity)
    M_r = kin.mass_matrix()
    h_r = kin.bias_forces()
    f_r, f_o = _external_generalized(world, kin, t)

    cs = world.contacts
    n_feet = cs.n_feet
    grasped = world.grasped
    n_obj = 6 if grasped else 0
    K = cs.k_rows if grasped else 3 * n_feet

    J = np.zeros((K, D + n_obj))
    jdot = np.zeros(K)
    c_err = np.zeros(K)
    qd_full = world.state.qd if not grasped else np.concatenate(
        [world.state.qd, world.object_state.qd])
    for i, fc in enumerate(cs.foot_contacts):
        Jf, bf, p = foot_rows(kin, fc)
        J[3 * i:3 * i + 3, :D] = Jf
        jdot[3 * i:3 * i + 3] = bf
        anchor = fc.anchor if fc.anchor is not None else p
        c_err[3 * i:3 * i + 3] = p - anchor
    if grasped:
        J_r, J_oc, drift, c_w = _weld_rows(world, kin)
        J[3 * n_feet:, :D] = J_r
        J[3 * n_feet:, D:] = J_oc
        jdot[3 * n_feet:] = drift
        c_err[3 * n_feet:] = c_w

    nv = D + n_obj
    A = np.zeros((nv + K, nv + K))
    A[:D, :D] = M_r
    rhs_top = model.selection_diag() * tau - h_r + f_r
    if grasped:
        M_o, h_o, _ = _object_dynamics(world)
        A[D:nv, D:nv] = M_o
        rhs_top = np.concatenate([rhs_top, -h_o + f_o])
    A[:nv, nv:] = -J.T
    A[nv:, :nv] = J
    al, be = (world.baumgarte_alpha, world.baumgarte_beta) if with_baumgarte else (0.0, 0.0)
    Jqd = J @ qd_full
    rhs = np.concatenate([rhs_top, -jdot - 2.0 * al * Jqd - be * be * c_err])
    rhs_clean = np.concatenate([rhs_top, -jdot])
    flags = []
    try:
        sol = np.linalg.solve(A, np.column_stack([rhs, rhs_clean]))
        sol_b, sol_c = sol[:, 0], sol[:, 1]
    except np.linalg.LinAlgError:
        flags.append("singular_kkt")
        sol_b, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        sol_c, *_ = np.linalg.lstsq(A, rhs_clean, rcond=None)
    qdd_r = sol_b[:D]
    qdd_o = sol_b[D:nv] if grasped else None
    lam = sol_b[nv:]
    lam_clean = sol_c[nv:]
    if not grasped and world.object_state is not None:
        # free object: ballistic
        M_o, h_o, _ = _object_dynamics(world)
        qdd_o = np.linalg.solve(M_o, -h_o + f_o)
    return qdd_r, qdd_o, lam, lam_clean, flags


def step(world: World, tau: np.ndarray, dt: float, t: float = 0.0,
         kin: Kinematics | None = None) -> World:
    """One integration substep (in place); dt = 0 leaves the world unchanged."""
    if dt == 0.0:
        return world
    qdd_r, qdd_o, _, _, flags = forward_dynamics_kkt(world, tau, t, kin)
    world.flags.extend(flags)
    world.state = semi_implicit_step(world.model, world.state, qdd_r, dt)
    if world.object_state is not None:
        world.object_state = semi_implicit_step(world.object_model, world.object_state,
                                                qdd_o, dt)
    return world


def resolve_impact(world: World) -> float:
    """Inelastic impact: project the extended velocity onto the manifold of
    the active constraints (momentum-consistent).  Returns the velocity
    change magnitude."""
    model = world.model
    D = model.nv
    kin = Kinematics(model, world.state, world.gravity)
    cs = world.contacts
    grasped = world.grasped
    n_obj = 6 if grasped else 0
    K = cs.k_rows if grasped else 3 * cs.n_feet
    if K == 0:
        return 0.0
    J = np.zeros((K, D + n_obj))
    for i, fc in enumerate(cs.foot_contacts):
        Jf, _, _ = foot_rows(kin, fc, with_drift=False)
        J[3 * i:3 * i + 3, :D] = Jf
    if grasped:
        J_r, J_oc, _, _ = _weld_rows(world, kin)
        J[3 * cs.n_feet:, :D] = J_r
        J[3 * cs.n_feet:, D:] = J_oc
    M = np.zeros((D + n_obj, D + n_obj))
    M[:D, :D] = kin.mass_matrix()
    qd = world.state.qd
    if grasped:
        M_o, _, _ = _object_dynamics(world)
        M[D:, D:] = M_o
        qd = np.concatenate([qd, world.object_state.qd])
    Minv_Jt = np.linalg.solve(M, J.T)
    G = J @ Minv_Jt
    imp, *_ = np.linalg.lstsq(G, J @ qd, rcond=None)
    dqd = Minv_Jt @ imp
    qd_new = qd - dqd
    world.state.qd = qd_new[:D]
    if grasped:
        world.object_state.qd = qd_new[D:]
    return float(np.linalg.norm(dqd))


def gait_schedule(*args, **kwargs):
    from .gait import gait_schedule as _gs
    return _gs(*args, **kwargs)


def run_scenario(name: str, config) -> "tuple":
    """Execute one named scenario; see scenarios.run for the machinery."""
    from .scenarios import run_named_scenario
    return run_named_scenario(name, config)
