"""Baseline comparison controller: one quadratic program over
(qdd, lambda, tau) tracking task accelerations subject to dynamics, contact,
torque, joint-motion and friction constraints.

The decision couples all blocks through the equality-constrained dynamics;
contact wrenches fall out of the optimization rather than a closed-form
projection, which is the structural difference to the projected
inverse-dynamics controller it is compared against.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .contact import ContactSet, build_projection, detect_slip
from .model import Kinematics, RobotModel, SystemState
from .pidc import ControlOutput, ObjectParams
from .qpsolver import solve_qp
from .spatial import truncated_pinv
from .tasks import ImpedanceTask, evaluate_task
from .wrench_qp import friction_rows, moment_rows

REG = 1e-8


@dataclass
class MqpProblem:
    """Assembled per-tick QP: decision x = [qdd (D); lambda (K); tau (L)]."""

    H: np.ndarray
    g: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    C: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    D: int
    K: int
    L: int

    def split(self, x):
        return x[:self.D], x[self.D:self.D + self.K], x[self.D + self.K:]


def build_problem(model: RobotModel, bundle, contacts: ContactSet,
                  task_rows: list[tuple[np.ndarray, np.ndarray]],
                  qd: np.ndarray, control_dt: float,
                  acc_limit: float = 200.0, vel_limit: float = 10.0) -> MqpProblem:
    D = model.nv
    K = bundle.K
    L = model.n_act
    n = D + K + L
    S_ns = model.selection_ns()

    H = REG * np.eye(n)
    g = np.zeros(n)
    for J_x, acc_ref in task_rows:
        A = np.zeros((J_x.shape[0], n))
        A[:, :D] = J_x
        H += A.T @ A
        g += -A.T @ acc_ref
    H = 0.5 * (H + H.T)

    # dynamics: M qdd - J_c^T lambda - S_ns tau = -h
    A_dyn = np.zeros((D, n))
    A_dyn[:, :D] = bundle.M
    if K:
        A_dyn[:, D:D + K] = -bundle.J_c.T
    A_dyn[:, D + K:] = -S_ns
    b_dyn = -bundle.h
    # contact kinematics, row-compressed to the numerical rank of J_c
    if K:
        _, rank, (U_r, _, _) = truncated_pinv(bundle.J_c)
        A_con = np.zeros((rank, n))
        A_con[:, :D] = U_r.T @ bundle.J_c
        b_con = -(U_r.T @ bundle.jdot_qd)
        A_eq = np.vstack([A_dyn, A_con])
        b_eq = np.concatenate([b_dyn, b_con])
    else:
        A_eq, b_eq = A_dyn, b_dyn

    rows = []
    lo_l = []
    hi_l = []
    # torque bounds
    T = np.zeros((L, n))
    T[:, D + K:] = np.eye(L)
    rows.append(T)
    lo_l.append(model.tau_min)
    hi_l.append(model.tau_max)
    # joint acceleration and one-step velocity bounds on actuated coordinates
    act = np.flatnonzero(model.actuated)
    Aq = np.zeros((act.size, n))
    Aq[np.arange(act.size), act] = 1.0
    rows.append(Aq)
    lo_l.append(np.full(act.size, -acc_limit))
    hi_l.append(np.full(act.size, acc_limit))
    rows.append(Aq.copy())
    lo_l.append((-vel_limit - qd[act]) / control_dt)
    hi_l.append((vel_limit - qd[act]) / control_dt)
    # friction pyramid / unilateral / moment rows directly on lambda
    unit = np.eye(3)
    for i, fc in enumerate(contacts.foot_contacts):
        Ci, lo, hi = friction_rows(fc.n_x, fc.n_y, fc.n_z, fc.mu)
        block = np.zeros((5, n))
        block[:, D + contacts.foot_slice(i).start:D + contacts.foot_slice(i).stop] = Ci
        rows.append(block)
        lo_l.append(lo)
        hi_l.append(hi)
    for i, hc in enumerate(contacts.grasp_contacts()):
        sl = contacts.hand_slice(i)
        Ci, lo, hi = friction_rows(unit[0], unit[1], unit[2], hc.mu)
        block = np.zeros((5, n))
        block[:, D + sl.start:D + sl.start + 3] = Ci
        rows.append(block)
        lo_l.append(lo)
        hi_l.append(hi)
        Cm, lo_m, hi_m = moment_rows(hc.xi, hc.half_x, hc.half_y)
        block = np.zeros((6, n))
        block[:, D + sl.start:D + sl.stop] = Cm
        rows.append(block)
        lo_l.append(lo_m)
        hi_l.append(hi_m)
    C = np.vstack(rows)
    lo = np.concatenate(lo_l)
    hi = np.concatenate(hi_l)
    return MqpProblem(H, g, A_eq, b_eq, C, lo, hi, D, K, L)


@dataclass
class MqpController:
    model: RobotModel
    tasks: list[ImpedanceTask]
    object_params: ObjectParams | None = None
    gravity: tuple = (0.0, 0.0, -9.81)
    acc_limit: float = 200.0
    vel_limit: float = 10.0
    control_dt: float = 1e-3
    qp_max_iter: int = 200
    slip_tol: float = 1e-3
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
        task_rows = []
        errors = {}
        for task in self.tasks:
            if not task.enabled:
                continue
            ev = evaluate_task(task, bundle, self.model, state, t, kin)
            acc_ref = ev.acc_ref - task.kp * ev.e - task.kd * ev.edot
            task_rows.append((ev.J, acc_ref - ev.jdot_qd))
            errors[task.name] = ev.e.copy()
        prob = build_problem(self.model, bundle, contacts, task_rows, state.qd,
                             self.control_dt, self.acc_limit, self.vel_limit)
        warm = self.warm_start if (self.warm_start is not None
                                   and self.warm_start.size == prob.H.shape[0]) else None
        res = solve_qp(prob.H, prob.g, prob.C, prob.lo, prob.hi,
                       prob.A_eq, prob.b_eq, x0=warm, max_iter=self.qp_max_iter)
        fallback = "none"
        if res.status != "optimal":
            # zero-task relaxation: drop the tracking objective
            H0 = REG * np.eye(prob.H.shape[0])
            res = solve_qp(H0, np.zeros(prob.H.shape[0]), prob.C, prob.lo, prob.hi,
                           prob.A_eq, prob.b_eq, max_iter=self.qp_max_iter)
            fallback = "zero_task"
        self.warm_start = res.x.copy()
        qdd, lam, tau_act = prob.split(res.x)
        tau = np.zeros(self.model.nv)
        tau[self.model.actuated] = tau_act
        out = ControlOutput(
            tau_cmd=tau, tau_motion=tau.copy(), tau_constraint=np.zeros_like(tau),
            F_c=lam.copy(), lambda_pred=lam.copy(), qp_status=res.status,
            tick=state.t, fallback=fallback,
            fault=fallback != "none" or res.status != "optimal",
            qp_iterations=res.iterations, qp_residuals=res.residuals)
        if out.fault:
            self.fault_count += 1
        out.task_errors = errors
        out.virtual_torque = float(np.abs((1.0 - bundle.S_diag) * tau).max(initial=0.0))
        out.slip, slip_res = detect_slip(bundle, state.qd, self.slip_tol)
        out.slip_residual = float(np.abs(slip_res).max(initial=0.0))
        P = bundle.P
        out.projector_residual = max(
            float(np.abs(P @ P - P).max()),
            float(np.abs(P - P.T).max()),
            float(np.abs(P @ bundle.J_c.T).max(initial=0.0)))
        out.dynamics_residual = float(np.abs(
            bundle.M @ qdd + bundle.h - (bundle.S_diag * tau)
            - (bundle.J_c.T @ lam if bundle.K else 0.0)).max())
        out.tick_ms = 1e3 * (time.perf_counter() - t0)
        return out
