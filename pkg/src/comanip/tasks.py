"""Cartesian impedance tasks in the motion space.

Each enabled task contributes J_task^T F_task to the motion torque, where
F_task is the task-space impedance wrench with operational-space inertia
feedforward and nonlinear compensation.  Task rows are world-aligned and
ordered (linear; angular); the pose error convention is

    e_pos = p - p_d,   e_ori = log(R R_d^T)   (world rotation vector),

so -K_p e restores toward the reference for diagonal positive gains.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contact import ContactSet, ProjectionBundle, contact_frame_pose
from .model import Kinematics, RobotModel, SystemState
from .spatial import cross3, rot_log

LAMBDA_REG = 1e-6
COND_LIMIT = 1e10


@dataclass
class ImpedanceTask:
    name: str
    kind: str                     # "object" | "frame6" | "point3"
    kp: np.ndarray                # diagonal gains, 6 (lin then ang) or 3
    kd: np.ndarray
    ref: object                   # Pose6Ref / Point3Ref supplier, callable of t
    frame: str | None = None      # for frame6 / point3
    enabled: bool = True
    feedforward: np.ndarray | None = None     # constant wrench added to F_d
    calibration: list | None = None           # object kind: (rot, pos) per hand
    coupled_body: tuple | None = None         # object kind: (mass, inertia3x3)
                                              # added to the apparent task inertia

    def __post_init__(self):
        self.kp = np.asarray(self.kp, dtype=float)
        self.kd = np.asarray(self.kd, dtype=float)
        if np.any(self.kp < 0) or np.any(self.kd < 0):
            raise ValueError(f"task {self.name}: gains must be nonnegative")
        dim = 3 if self.kind == "point3" else 6
        if self.kp.size != dim or self.kd.size != dim:
            raise ValueError(f"task {self.name}: gain dimension must be {dim}")


def object_pose_from_grasp(contacts: ContactSet, model: RobotModel,
                           state: SystemState, calibration: list,
                           kin: Kinematics | None = None):
    """Object pose inferred from the rigid-grasp assumption: hand pose
    composed with the constant hand-to-object calibration, averaged over
    hands (position mean, chordal orientation mean)."""
    kin = kin or Kinematics(model, state, gravity=(0, 0, 0))
    ps = []
    Rs = []
    for hc, (c_rot, c_pos) in zip(contacts.hand_contacts, calibration):
        R_h, p_h = kin.frame_pose(hc.frame)
        Rs.append(R_h @ c_rot)
        ps.append(p_h + R_h @ c_pos)
    p = np.mean(ps, axis=0)
    A = np.mean(Rs, axis=0)
    U, _, Vt = np.linalg.svd(A)
    R = U @ np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))]) @ Vt
    return R, p


@dataclass
class TaskEval:
    """Per-tick task linearization: world-aligned rows and reference errors."""

    J: np.ndarray
    jdot_qd: np.ndarray
    e: np.ndarray
    edot: np.ndarray
    acc_ref: np.ndarray
    rot: np.ndarray | None = None      # current task-frame orientation
    singular: bool = False
    wrench: np.ndarray | None = None
    grav_wrench: np.ndarray | None = None   # Lambda J M_c^-1 P h part of mu_c


def _object_rows(bundle: ProjectionBundle, R_o: np.ndarray):
    """World-aligned object rows from the body-frame object Jacobian."""
    J_o = bundle.J_o
    Jw = np.vstack([R_o @ J_o[:3], R_o @ J_o[3:]])
    return Jw, J_o


def evaluate_task(task: ImpedanceTask, bundle: ProjectionBundle, model: RobotModel,
                  state: SystemState, t: float, kin: Kinematics | None = None) -> TaskEval:
    kin = kin or Kinematics(model, state, gravity=(0, 0, 0))
    ref = task.ref(t)
    if task.kind == "object":
        if bundle.J_o is None:
            raise ValueError("object task requires a grasp in the contact set")
        R_o, p_o = object_pose_from_grasp(bundle.contacts, model, state,
                                          task.calibration, kin)
        Jw, J_o = _object_rows(bundle, R_o)
        tw_body = J_o @ state.qd
        v_w = R_o @ tw_body[:3]
        w_w = R_o @ tw_body[3:]
        # Jdot qd: frame-alignment rate plus body drift
        jdot_body = bundle.contacts.grasp_pieces()[2].T @ bundle.jdot_ee
        jdot_qd = np.concatenate([
            cross3(w_w, v_w) + R_o @ jdot_body[:3],
            R_o @ jdot_body[3:],
        ])
        e = np.concatenate([p_o - ref.pos, rot_log(R_o @ ref.rot.T)])
        edot = np.concatenate([v_w, w_w]) - ref.vel
        return TaskEval(Jw, jdot_qd, e, edot, ref.acc, rot=R_o)
    if task.kind == "frame6":
        Jf = kin.frame_jacobian_world(task.frame)       # (ang; lin)
        bf = kin.frame_bias_world(task.frame)
        J = np.vstack([Jf[3:], Jf[:3]])
        jdot_qd = np.concatenate([bf[3:], bf[:3]])
        R, p = kin.frame_pose(task.frame)
        tw = kin.frame_velocity_world(task.frame)
        e = np.concatenate([p - ref.pos, rot_log(R @ ref.rot.T)])
        edot = np.concatenate([tw[3:], tw[:3]]) - ref.vel
        return TaskEval(J, jdot_qd, e, edot, ref.acc, rot=R)
    if task.kind == "point3":
        J = kin.frame_jacobian_world(task.frame)[3:]
        jdot_qd = kin.frame_bias_world(task.frame)[3:]
        _, p = kin.frame_pose(task.frame)
        v = kin.frame_velocity_world(task.frame)[3:]
        return TaskEval(J, jdot_qd, p - ref.pos, v - ref.vel, ref.acc)
    raise ValueError(f"unknown task kind {task.kind!r}")


def task_wrench(task: ImpedanceTask, bundle: ProjectionBundle, model: RobotModel,
                state: SystemState, t: float, kin: Kinematics | None = None,
                damping_dt: float = 0.0) -> TaskEval:
    """Desired task wrench F = mu_c + Lambda_c acc_d - K_d edot - K_p e
    (+ constant feedforward); operational-space quantities built from the
    projected dynamics of the bundle.

    damping_dt > 0 applies the semi-implicit damping discretization
    K_d_eff = K_d / (1 + K_d dt / Lambda_axis): identical to the continuous
    law as dt -> 0, and keeps the sampled-data loop stable on axes whose
    apparent inertia is small against K_d dt (the object roll axis, realized
    almost entirely by the wrist-roll joints, is the critical one).
    """
    ev = evaluate_task(task, bundle, model, state, t, kin)
    J = ev.J
    A = J @ bundle.M_c_inv @ (bundle.P @ J.T)
    A = 0.5 * (A + A.T)
    singular = False
    try:
        Lam = np.linalg.inv(A)
        if np.abs(Lam).max() * np.abs(A).max() > COND_LIMIT:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        # damped inverse: swing tasks can momentarily lose rank at limits
        singular = True
        A = A + LAMBDA_REG * np.eye(A.shape[0])
        Lam = np.linalg.inv(A)
    # nonlinear compensation is for the robot-side dynamics
    grav = Lam @ (J @ (bundle.M_c_inv @ (bundle.P @ bundle.h)))
    mu_c = grav - Lam @ (J @ (bundle.M_c_inv @ bundle.Pdot_qd) + ev.jdot_qd)
    ev.grav_wrench = grav
    Lam_ff = Lam
    if task.kind == "object" and task.coupled_body is not None:
        # the grasped body rides the task frame 1:1; its inertia belongs to
        # the apparent inertia the feedforward must accelerate
        mass, inertia = task.coupled_body
        R_o = ev.rot if ev.rot is not None else np.eye(3)
        Lam_ff = Lam.copy()
        Lam_ff[:3, :3] += mass * np.eye(3)
        Lam_ff[3:, 3:] += R_o @ inertia @ R_o.T
    kd = task.kd
    if damping_dt > 0.0:
        kd = kd / (1.0 + kd * damping_dt / np.maximum(np.diag(Lam_ff), 1e-12))
    F = mu_c + Lam_ff @ ev.acc_ref - kd * ev.edot - task.kp * ev.e
    if task.feedforward is not None:
        F = F + task.feedforward
    ev.singular = singular
    ev.wrench = F
    return ev


def motion_torque(tasks: list[ImpedanceTask], bundle: ProjectionBundle,
                  model: RobotModel, state: SystemState, t: float,
                  kin: Kinematics | None = None, damping_dt: float = 0.0,
                  residual_gravity: bool = False):
    """tau_M = sum of J_task^T F_task over enabled tasks.

    The per-task mu_c terms each compensate the projected gravity seen in
    their own operational space; the superposition of independent tasks
    routes it imperfectly (their inertia matrices ignore task coupling),
    which would leave a spring-balanced static offset.  With
    residual_gravity=True (used by the controller pipeline) the
    uncompensated remainder h - sum_i J_i^T (Lambda_i J_i M_c^-1 P h) is
    added centrally, making the static balance exact while each task wrench
    keeps the impedance form.

    Returns (tau_M, per-task TaskEval dict).
    """
    kin = kin or Kinematics(model, state, gravity=(0, 0, 0))
    tau = np.zeros(model.nv)
    injected = np.zeros(model.nv)
    evals: dict[str, TaskEval] = {}
    any_task = False
    for task in tasks:
        if not task.enabled:
            continue
        any_task = True
        ev = task_wrench(task, bundle, model, state, t, kin, damping_dt)
        tau = tau + ev.J.T @ ev.wrench
        injected = injected + ev.J.T @ ev.grav_wrench
        evals[task.name] = ev
    if residual_gravity and any_task:
        tau = tau + bundle.h - injected
    return tau, evals
