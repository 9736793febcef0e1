"""Underactuated torque composition and the per-tick control pipeline.

tau = [P S]^+ P tau_M + B J_c^T F_c: the motion-space part realizes the
impedance tasks, the constraint-space part injects the optimized contact
wrenches, and B keeps the command off the virtual floating-base joints.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import wrench_qp
from .contact import (ContactSet, ProjectionBundle, build_projection,
                      detect_slip, infer_acceleration, infer_constraint_wrench)
from .model import Kinematics, RobotModel, SystemState
from .spatial import cross3, truncated_pinv
from .tasks import ImpedanceTask, motion_torque, object_pose_from_grasp


@dataclass
class ObjectParams:
    """Manipulated-object model knowledge used for wrench prediction."""

    mass: float
    inertia: np.ndarray       # 3x3 about COM, object frame
    calibration: list         # (rot, pos) hand-to-object transforms


@dataclass
class ControlOutput:
    tau_cmd: np.ndarray
    tau_motion: np.ndarray        # [P S]^+ P tau_M
    tau_constraint: np.ndarray    # B J_c^T F_c
    F_c: np.ndarray
    lambda_pred: np.ndarray       # predicted constraint wrenches at tau_cmd
    qp_status: str
    tick: float
    fault: bool = False
    fallback: str = "none"        # none | reuse_previous | gravity_distribution
    slip: bool = False
    qp_iterations: int = 0
    qp_residuals: dict = field(default_factory=dict)
    cross_term: float = 0.0
    clamped: bool = False
    virtual_torque: float = 0.0   # max |(I - S) tau_cmd|
    orthogonality: float = 0.0    # relative overlap of the two torque parts
    margins: dict = field(default_factory=dict)
    task_errors: dict = field(default_factory=dict)
    object_reaction: np.ndarray | None = None
    projector_residual: float = 0.0   # max of |P^2-P|, |P-P^T|, |P Jc^T|
    slip_residual: float = 0.0
    tau_M: np.ndarray | None = None
    dynamics_residual: float = 0.0    # MQP equality residual diagnostic
    tick_ms: float = 0.0


def compose_torque(bundle: ProjectionBundle, tau_M: np.ndarray, F_c: np.ndarray,
                   rho: np.ndarray | None = None,
                   eta: np.ndarray | None = None) -> ControlOutput:
    tau_motion = bundle.PS_pinv @ (bundle.P @ tau_M)
    tau_constraint = bundle.B @ (bundle.J_c.T @ F_c) if bundle.K else np.zeros(bundle.D)
    tau = tau_motion + tau_constraint
    lam = rho @ F_c + eta if rho is not None else np.zeros(bundle.K)
    nm = np.linalg.norm(tau_motion) * np.linalg.norm(tau_constraint)
    ortho = float(abs(tau_motion @ tau_constraint) / (1e-30 + nm))
    virt = float(np.abs((1.0 - bundle.S_diag) * tau).max(initial=0.0))
    return ControlOutput(tau_cmd=tau, tau_motion=tau_motion,
                         tau_constraint=tau_constraint, F_c=F_c.copy(),
                         lambda_pred=lam, qp_status="unsolved", tick=bundle.tick,
                         virtual_torque=virt, orthogonality=ortho)


def object_reaction_wrench(bundle: ProjectionBundle, obj: ObjectParams,
                           model: RobotModel, state: SystemState, tau: np.ndarray,
                           kin: Kinematics | None = None,
                           gravity=(0.0, 0.0, -9.81)) -> np.ndarray:
    """Gravito-inertial reaction of the rigidly grasped object on the hands,
    solved self-consistently with the projected robot dynamics.

    Body-frame wrench (force; moment) conjugate to the object Jacobian rows;
    pass as (F_ext, J_x = bundle.J_o) to the wrench inference.
    """
    J_o = bundle.J_o
    R_o, _ = object_pose_from_grasp(bundle.contacts, model, state, obj.calibration, kin)
    tw = J_o @ state.qd                      # (v; w) object frame
    v_b, w_b = tw[:3], tw[3:]
    g = np.asarray(gravity, dtype=float)
    M_o = np.zeros((6, 6))
    M_o[:3, :3] = obj.mass * np.eye(3)
    M_o[3:, 3:] = obj.inertia
    bias = np.concatenate([
        obj.mass * cross3(w_b, v_b) - obj.mass * (R_o.T @ g),
        cross3(w_b, obj.inertia @ w_b),
    ])
    jdot_o = bundle.contacts.grasp_pieces()[2].T @ bundle.jdot_ee
    a0 = J_o @ infer_acceleration(bundle, tau) + jdot_o
    W = J_o @ (bundle.M_c_inv @ (bundle.P @ J_o.T))
    A = np.eye(6) + M_o @ W
    return np.linalg.solve(A, -(M_o @ a0 + bias))


@dataclass
class PidcController:
    model: RobotModel
    tasks: list[ImpedanceTask]
    object_params: ObjectParams | None = None
    gravity: tuple = (0.0, 0.0, -9.81)
    qp_max_iter: int = 200
    qp_tol_abs: float = 1e-8
    qp_tol_rel: float = 1e-6
    slip_tol: float = 1e-3
    control_dt: float = 1e-3      # sampled-data damping stabilization period
    svd_scale: float | None = None
    warm_start: np.ndarray | None = None
    fault_count: int = 0

    def tick(self, state: SystemState, contacts: ContactSet,
             t: float | None = None) -> ControlOutput:
        t0 = time.perf_counter()
        t = state.t if t is None else t
        kin = Kinematics(self.model, state, self.gravity)
        bundle = build_projection(self.model, state, contacts, self.gravity,
                                  svd_scale=self.svd_scale, kin=kin)
        tau_M, evals = motion_torque(self.tasks, bundle, self.model, state, t, kin,
                                     damping_dt=self.control_dt,
                                     residual_gravity=True)
        limits = (self.model.tau_min, self.model.tau_max)
        qp = wrench_qp.assemble(bundle, tau_M, contacts, limits)
        warm = self.warm_start if (self.warm_start is not None
                                   and self.warm_start.size == qp.n) else None
        res = wrench_qp.solve(qp, warm_start=warm, max_iter=self.qp_max_iter,
                              tol_abs=self.qp_tol_abs, tol_rel=self.qp_tol_rel)
        out, F_c = self._resolve_fallback(qp, res, warm, contacts)
        self.warm_start = F_c.copy()

        ctl = compose_torque(bundle, tau_M, F_c, qp.rho, qp.eta)
        ctl.qp_status = qp.status
        ctl.qp_iterations = qp.iterations
        ctl.qp_residuals = qp.residuals
        ctl.fallback = out
        ctl.fault = out == "gravity_distribution" or qp.status == "infeasible"
        if ctl.fault:
            self.fault_count += 1
        ctl.cross_term = qp.cross_term_residual
        ctl.slip, slip_res = detect_slip(bundle, state.qd, self.slip_tol)
        ctl.slip_residual = float(np.abs(slip_res).max(initial=0.0))
        ctl.tau_M = tau_M
        P = bundle.P
        ctl.projector_residual = max(
            float(np.abs(P @ P - P).max()),
            float(np.abs(P - P.T).max()),
            float(np.abs(P @ bundle.J_c.T).max(initial=0.0)))

        # saturation guard: the torque rows should already prevent this
        act = self.model.actuated
        tau_act = ctl.tau_cmd[act]
        clip = np.clip(tau_act, self.model.tau_min, self.model.tau_max)
        if np.abs(clip - tau_act).max(initial=0.0) > 1e-12:
            ctl.clamped = True
            ctl.fault = True
            self.fault_count += 1
            ctl.tau_cmd[act] = clip

        if bundle.K:
            s_w, s_t = wrench_qp.constraint_slacks(qp, F_c)
            normals = self._normal_components(bundle, qp, F_c)
            ctl.margins = {
                "min_wrench_slack": float(s_w.min(initial=np.inf)),
                "min_torque_slack": float(s_t.min(initial=np.inf)),
                "min_normal_force": float(normals.min(initial=np.inf)),
            }
        # prediction of realized constraint wrenches, including the object's
        # gravito-inertial reaction through the external-force channel
        if self.object_params is not None and bundle.J_o is not None:
            F_hat = object_reaction_wrench(bundle, self.object_params, self.model,
                                           state, ctl.tau_cmd, kin, self.gravity)
            ctl.object_reaction = F_hat
            ctl.lambda_pred = infer_constraint_wrench(bundle, ctl.tau_cmd, F_hat, bundle.J_o)
        else:
            ctl.lambda_pred = infer_constraint_wrench(bundle, ctl.tau_cmd)
        ctl.task_errors = {name: ev.e.copy() for name, ev in evals.items()}
        ctl.tick_ms = 1e3 * (time.perf_counter() - t0)
        return ctl

    def _normal_components(self, bundle, qp, F_c):
        lam = qp.rho @ F_c + qp.eta
        cs = bundle.contacts
        vals = []
        for i, fc in enumerate(cs.foot_contacts):
            vals.append(fc.n_z @ lam[cs.foot_slice(i)])
        for i in range(cs.n_grasp):
            vals.append(lam[cs.hand_slice(i)][2])
        return np.array(vals)

    def _resolve_fallback(self, qp, res, warm, contacts):
        if res.status == "optimal":
            return "none", res.x
        if warm is not None:
            s_w, s_t = wrench_qp.constraint_slacks(qp, warm)
            if min(s_w.min(initial=0.0), s_t.min(initial=0.0)) >= -1e-9:
                return "reuse_previous", warm
        # least-squares gravity distribution, normal components forced >= 0
        rho_p, _, _ = truncated_pinv(qp.rho)
        F_c = clip_normal_components(-rho_p @ qp.eta, contacts)
        return "gravity_distribution", F_c


def clip_normal_components(F_c: np.ndarray, contacts: ContactSet) -> np.ndarray:
    F = F_c.copy()
    for i, fc in enumerate(contacts.foot_contacts):
        sl = contacts.foot_slice(i)
        n = fc.n_z
        val = n @ F[sl]
        if val < 0.0:
            F[sl] = F[sl] - val * n
    for i in range(contacts.n_grasp):
        sl = contacts.hand_slice(i)
        if F[sl.start + 2] < 0.0:
            F[sl.start + 2] = 0.0
    return F
