"""Scenario construction and the closed-loop runner.

Scenarios mirror the validation studies: (a) simultaneous torso and object
sinusoids, (b) quadruped walking while grasping, (c) object circle in the
X-Z plane, (d) object orientation sinusoids, (e) impedance/perturbation
test, and the motion-tracking QP baseline comparison.  All references are
analytic; runs are deterministic functions of the configuration.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .contact import ContactSet, FootContact
from .gait import GaitParams, GaitPlan, gait_schedule
from .model import Kinematics, SystemState
from .pidc import ObjectParams, PidcController
from .robots import LEG_ORDER, QuadArmParams, Scene, build_scene
from .sim import (Perturbation, World, forward_dynamics_kkt, resolve_impact)
from .spatial import quat_to_rot, rot_log, yaw_of
from .tasks import ImpedanceTask
from .trace import RunningStats, SimTrace
from .trajectories import ConstantPose, CirclePose, Sinusoid, SinusoidPose
from .model import semi_implicit_step


@dataclass
class ScenarioSetup:
    name: str
    scene: Scene
    world: World
    controller: object                    # PidcController or MqpController
    duration_s: float
    control_dt: float = 1e-3
    substeps: int = 4
    record_every: int = 10
    rms_skip_s: float = 0.0
    schedule: GaitPlan | None = None
    swing_tasks: dict = field(default_factory=dict)
    amplitudes: dict = field(default_factory=dict)   # task -> per-axis commanded amp


def _torso_tasks(scene, kin, gains, refs=None):
    tasks = []
    for rn in scene.robot_names:
        R, p = kin.frame_pose(f"{rn}/trunk")
        ref = refs[rn] if refs and rn in refs else ConstantPose(p, R)
        tasks.append(ImpedanceTask(
            f"torso_{rn}", "frame6", kp=np.asarray(gains["torso_kp"], float),
            kd=np.asarray(gains["torso_kd"], float), ref=ref, frame=f"{rn}/trunk"))
    return tasks


def _object_task(scene, gains, ref, object_mass, object_inertia,
                 gravity_ff=True, inertia_ff=True):
    ff = np.array([0.0, 0.0, object_mass * 9.81, 0.0, 0.0, 0.0]) if gravity_ff else None
    return ImpedanceTask(
        "object", "object", kp=np.asarray(gains["object_kp"], float),
        kd=np.asarray(gains["object_kd"], float), ref=ref,
        feedforward=ff, calibration=scene.grasp_calibration,
        coupled_body=(object_mass, object_inertia) if inertia_ff else None)


def make_world(scene: Scene, cfg) -> World:
    st = SystemState(scene.q0.copy(), np.zeros(scene.nv))
    ost = SystemState(scene.object_q0.copy(), np.zeros(6))
    return World(scene.model, st, scene.contacts, scene.object_model, ost,
                 gravity=tuple(cfg.gravity),
                 baumgarte_alpha=cfg.baumgarte_alpha,
                 baumgarte_beta=cfg.baumgarte_beta)


def build_setup(cfg) -> ScenarioSetup:
    """Scenario dispatch from a validated configuration object."""
    scene = build_scene(object_mass=cfg.object_mass, object_side=cfg.object_side,
                        mu_ground=cfg.mu_ground, mu_hand=cfg.mu_hand,
                        xi_hand=cfg.xi_hand, patch=tuple(cfg.hand_patch),
                        params=QuadArmParams(**cfg.robot_overrides))
    if cfg.mass_perturbation:
        rng = np.random.default_rng(cfg.seed)
        sim_scene = build_scene(object_mass=cfg.object_mass, object_side=cfg.object_side,
                                mu_ground=cfg.mu_ground, mu_hand=cfg.mu_hand,
                                xi_hand=cfg.xi_hand, patch=tuple(cfg.hand_patch),
                                params=_perturbed_params(cfg, rng))
        world = make_world(sim_scene, cfg)
        world.contacts = scene.contacts
    else:
        world = make_world(scene, cfg)
    builder = _BUILDERS.get(cfg.scenario)
    if builder is None:
        raise ValueError(f"unknown scenario {cfg.scenario!r}; "
                         f"known: {sorted(_BUILDERS)}")
    setup = builder(scene, world, cfg)
    if cfg.controller == "mqp":
        from .baseline_mqp import MqpController
        pidc = setup.controller
        setup.controller = MqpController(
            model=scene.model, tasks=pidc.tasks, object_params=pidc.object_params,
            gravity=pidc.gravity)
    return setup


def _perturbed_params(cfg, rng):
    par = QuadArmParams(**cfg.robot_overrides)
    f = 1.0 + cfg.mass_perturbation_fraction * (2.0 * rng.random() - 1.0)
    par.trunk_mass *= f
    par.arm_masses = tuple(m * f for m in par.arm_masses)
    return par


# -- individual scenarios -------------------------------------------------------

def _sec4a(scene, world, cfg) -> ScenarioSetup:
    """Simultaneous torso and object sinusoids."""
    kin = Kinematics(scene.model, world.state, gravity=(0, 0, 0))
    g = cfg.gains
    tr = cfg.trajectory
    refs = {}
    for rn in scene.robot_names:
        R, p = kin.frame_pose(f"{rn}/trunk")
        refs[rn] = SinusoidPose(p, R, lin=Sinusoid(
            np.asarray(tr["torso_lin_amp"], float),
            np.asarray(tr["torso_lin_freq"], float), np.zeros(3), t0=tr["t_start"]))
    obj_ref = SinusoidPose(
        scene.object_q0[:3], np.eye(3),
        lin=Sinusoid(np.asarray(tr["object_lin_amp"], float),
                     np.asarray(tr["object_lin_freq"], float), np.zeros(3),
                     t0=tr["t_start"]),
        ang=Sinusoid(np.asarray(tr["object_ang_amp"], float),
                     np.asarray(tr["object_ang_freq"], float), np.zeros(3),
                     t0=tr["t_start"]))
    tasks = _torso_tasks(scene, kin, g, refs)
    tasks.append(_object_task(scene, g, obj_ref, cfg.object_mass, _obj_inertia(cfg),
                              cfg.object_gravity_ff, cfg.object_inertia_ff))
    ctl = _controller(scene, tasks, cfg)
    amp = {"object": np.concatenate([tr["object_lin_amp"], tr["object_ang_amp"]])}
    for rn in scene.robot_names:
        amp[f"torso_{rn}"] = np.concatenate([tr["torso_lin_amp"], np.zeros(3)])
    freqs = np.concatenate([tr["torso_lin_freq"], tr["object_lin_freq"],
                            tr["object_ang_freq"]])
    period = 1.0 / min(f for f in freqs if f > 0)
    return ScenarioSetup("sec4a", scene, world, ctl, cfg.duration_s,
                         cfg.control_dt, cfg.substeps, cfg.record_every,
                         rms_skip_s=tr["t_start"] + period, amplitudes=amp)


def _sec4b(scene, world, cfg) -> ScenarioSetup:
    """Static walk: in place, backward, return, yaw turn."""
    kin = Kinematics(scene.model, world.state, gravity=(0, 0, 0))
    g = cfg.gains
    tr = cfg.trajectory
    robot = tr.get("walking_robot", "r1")
    feet0 = {leg: kin.frame_pose(f"{robot}/foot_{leg}")[1] for leg in LEG_ORDER}
    R_t, p_t = kin.frame_pose(f"{robot}/trunk")
    par = GaitParams(step_height=tr["step_height"], t_shift=tr["t_shift"],
                     t_swing=tr["t_swing"], t_settle=tr["t_settle"],
                     sway_gain=tr["sway_gain"])
    dist = tr["walk_distance"]
    n_back = int(tr["cycles_backward"])
    n_yaw = int(tr["cycles_yaw"])
    yaw_total = np.deg2rad(tr["yaw_deg"])
    cycles = [(np.zeros(3), 0.0)]                         # walk in place
    step_x = -dist / n_back
    cycles += [(np.array([step_x, 0, 0]), 0.0)] * n_back  # backward
    cycles += [(np.array([-step_x, 0, 0]), 0.0)] * n_back # return
    cycles += [(np.zeros(3), yaw_total / n_yaw)] * n_yaw  # yaw turn
    plan = gait_schedule(robot, feet0, p_t, R_t, cycles, par, t0=tr["t_start"])

    refs = {robot: plan.torso_ref}
    tasks = _torso_tasks(scene, kin, g, refs)
    tasks.append(_object_task(scene, g, ConstantPose(scene.object_q0[:3], np.eye(3)),
                              cfg.object_mass, _obj_inertia(cfg),
                              cfg.object_gravity_ff, cfg.object_inertia_ff))
    swing_tasks = {}
    for leg in LEG_ORDER:
        task = ImpedanceTask(
            f"swing_{robot}_{leg}", "point3", kp=np.asarray(g["feet_kp"], float),
            kd=np.asarray(g["feet_kd"], float), ref=plan.foot_paths[leg],
            frame=f"{robot}/foot_{leg}", enabled=False)
        tasks.append(task)
        swing_tasks[f"{robot}/foot_{leg}"] = (task, plan.swing_windows[leg])
    ctl = _controller(scene, tasks, cfg)
    duration = max(cfg.duration_s, plan.t_end + tr["t_tail"])
    return ScenarioSetup("sec4b", scene, world, ctl, duration, cfg.control_dt,
                         cfg.substeps, cfg.record_every, rms_skip_s=0.0,
                         schedule=plan, swing_tasks=swing_tasks)


def _sec5a(scene, world, cfg) -> ScenarioSetup:
    """Object circular motion in the X-Z plane (hardware mirror)."""
    kin = Kinematics(scene.model, world.state, gravity=(0, 0, 0))
    g = cfg.gains
    tr = cfg.trajectory
    tasks = _torso_tasks(scene, kin, g)
    ref = CirclePose(scene.object_q0[:3], np.eye(3), tr["radius"],
                     tr["period_s"], tr["ramp_s"])
    tasks.append(_object_task(scene, g, ref, cfg.object_mass, _obj_inertia(cfg),
                              cfg.object_gravity_ff, cfg.object_inertia_ff))
    ctl = _controller(scene, tasks, cfg)
    return ScenarioSetup("sec5a", scene, world, ctl, cfg.duration_s, cfg.control_dt,
                         cfg.substeps, cfg.record_every, rms_skip_s=tr["ramp_s"],
                         amplitudes={"object": np.array([tr["radius"]] * 3 + [0.0] * 3)})


def _sec5b(scene, world, cfg) -> ScenarioSetup:
    """Object orientation sinusoids (roll, then pitch, then yaw)."""
    kin = Kinematics(scene.model, world.state, gravity=(0, 0, 0))
    g = cfg.gains
    tr = cfg.trajectory
    tasks = _torso_tasks(scene, kin, g)
    amp = np.deg2rad(tr["angle_deg"])
    T = tr["window_s"]
    f = tr["freq_hz"]

    class SequentialAxes:
        def __init__(self, base_pos):
            self.subs = [
                SinusoidPose(base_pos, np.eye(3),
                             ang=Sinusoid(amp * np.eye(3)[k], f * np.ones(3),
                                          np.zeros(3), t0=tr["t_start"] + k * T))
                for k in range(3)
            ]

        def __call__(self, t):
            k = min(2, max(0, int((t - tr["t_start"]) // T)))
            return self.subs[k](min(t, tr["t_start"] + (k + 1) * T))

    ref = SequentialAxes(scene.object_q0[:3])
    tasks.append(_object_task(scene, g, ref, cfg.object_mass, _obj_inertia(cfg),
                              cfg.object_gravity_ff, cfg.object_inertia_ff))
    ctl = _controller(scene, tasks, cfg)
    return ScenarioSetup("sec5b", scene, world, ctl, cfg.duration_s, cfg.control_dt,
                         cfg.substeps, cfg.record_every, rms_skip_s=tr["t_start"] + 1.0 / f,
                         amplitudes={"object": np.array([0.0] * 3 + [amp] * 3)})


def _sec5c(scene, world, cfg) -> ScenarioSetup:
    """Cartesian impedance under scripted pushes (hardware mirror)."""
    kin = Kinematics(scene.model, world.state, gravity=(0, 0, 0))
    g = cfg.gains
    tasks = _torso_tasks(scene, kin, g)
    tasks.append(_object_task(scene, g, ConstantPose(scene.object_q0[:3], np.eye(3)),
                              cfg.object_mass, _obj_inertia(cfg),
                              cfg.object_gravity_ff, cfg.object_inertia_ff))
    ctl = _controller(scene, tasks, cfg)
    for p in cfg.perturbations:
        world.perturbations.append(Perturbation(
            p["target"], np.asarray(p["wrench"], float), p["t_on"], p["t_off"]))
    return ScenarioSetup("sec5c", scene, world, ctl, cfg.duration_s, cfg.control_dt,
                         cfg.substeps, cfg.record_every)


_BUILDERS = {
    "sec4a": _sec4a,
    "sec4b": _sec4b,
    "sec5a": _sec5a,
    "sec5b": _sec5b,
    "sec5c": _sec5c,
}


def _obj_inertia(cfg):
    return cfg.object_mass * cfg.object_side ** 2 / 6.0 * np.eye(3)


def _controller(scene, tasks, cfg) -> PidcController:
    obj = ObjectParams(cfg.object_mass, _obj_inertia(cfg), scene.grasp_calibration)
    return PidcController(scene.model, tasks, obj, gravity=tuple(cfg.gravity),
                          qp_max_iter=cfg.qp_max_iter, qp_tol_abs=cfg.qp_tol_abs,
                          qp_tol_rel=cfg.qp_tol_rel, control_dt=cfg.control_dt,
                          slip_tol=cfg.slip_tol)


# -- closed loop ----------------------------------------------------------------

def _trace_columns(setup: ScenarioSetup) -> list[str]:
    D = setup.scene.nv
    K = setup.scene.contacts.k_rows
    cols = ["t"]
    cols += [f"qd{i:02d}" for i in range(D)]
    cols += [f"obj_{n}" for n in ("x", "y", "z", "qw", "qx", "qy", "qz")]
    cols += [f"objv{i}" for i in range(6)]
    for name in sorted(t.name for t in setup.controller.tasks):
        task = next(t for t in setup.controller.tasks if t.name == name)
        dim = 3 if task.kind == "point3" else 6
        cols += [f"err_{name}_{i}" for i in range(dim)]
    cols += [f"lam_sim{i:02d}" for i in range(K)]
    cols += [f"lam_pred{i:02d}" for i in range(K)]
    cols += [f"fc{i:02d}" for i in range(K)]
    cols += ["min_normal_sim", "max_friction_ratio", "min_wrench_slack",
             "min_torque_slack", "lambda_dev", "slip_residual", "fault",
             "perturb_active", "qp_iterations"]
    return cols


def _active_contacts(scene: Scene, kin: Kinematics, active_feet) -> ContactSet:
    feet = []
    for fc in scene.contacts.foot_contacts:
        if fc.frame in active_feet:
            feet.append(FootContact(frame=fc.frame, mu=fc.mu, n_x=fc.n_x,
                                    n_y=fc.n_y, n_z=fc.n_z,
                                    anchor=kin.frame_pose(fc.frame)[1].copy()))
    return ContactSet(foot_contacts=feet,
                      hand_contacts=scene.contacts.hand_contacts,
                      environment_contacts=scene.contacts.environment_contacts)


def _foot_metrics(contacts: ContactSet, lam: np.ndarray):
    """(min normal force, max friction ratio) over the stance feet."""
    min_n = np.inf
    max_ratio = 0.0
    for i, fc in enumerate(contacts.foot_contacts):
        f = lam[contacts.foot_slice(i)]
        n = float(fc.n_z @ f)
        min_n = min(min_n, n)
        tang = f - n * fc.n_z
        if n > 1e-9:
            max_ratio = max(max_ratio, float(np.linalg.norm(tang)) / (n * fc.mu) * fc.mu)
    return min_n, max_ratio


def run_setup(setup: ScenarioSetup):
    """Run the closed loop; returns (SimTrace, summary dict)."""
    world = setup.world
    ctl = setup.controller
    scene = setup.scene
    model = scene.model
    dt = setup.control_dt
    sub_dt = dt / setup.substeps
    n_ticks = int(round(setup.duration_s / dt))
    stats = RunningStats()
    trace = SimTrace(_trace_columns(setup))
    switches = sorted(setup.schedule.switches, key=lambda s: s.t) if setup.schedule else []
    sw_idx = 0
    N_G = scene.contacts.grasp_pieces()[1]
    n_hand_rows = 6 * scene.contacts.n_grasp
    tick_times = []
    aborted = False
    # momentum bookkeeping
    mom_drift = 0.0
    mom_prev = None
    masses = np.array([lk.mass for lk in model.links])
    m_obj = world.object_model.links[0].mass if world.object_model else 0.0
    g_vec = np.asarray(world.gravity)
    m_total = masses.sum() + m_obj

    for k in range(n_ticks):
        t = k * dt
        world.state.t = t
        # scheduled contact switches
        while sw_idx < len(switches) and switches[sw_idx].t <= t + 1e-12:
            kin_sw = Kinematics(model, world.state, world.gravity)
            world.contacts = _active_contacts(scene, kin_sw, switches[sw_idx].active_feet)
            resolve_impact(world)
            ctl.warm_start = None
            sw_idx += 1
        for task, windows in setup.swing_tasks.values():
            task.enabled = any(t0 - 1e-12 <= t < t1 + 1e-12 for (t0, t1) in windows)

        out = ctl.tick(world.state, world.contacts, t)
        tick_times.append(out.tick_ms)
        lam_sim_clean = None
        for i in range(setup.substeps):
            kin_i = Kinematics(model, world.state, world.gravity)
            qdd_r, qdd_o, lam, lam_clean, flags = forward_dynamics_kkt(
                world, out.tau_cmd, t, kin_i)
            world.flags.extend(flags)
            if i == 0:
                lam_sim_clean = lam_clean
            # momentum bookkeeping at substep resolution
            p_lin = _linear_momentum(kin_i, masses)
            if world.object_state is not None:
                R_o = quat_to_rot(world.object_state.q[3:7])
                p_lin = p_lin + m_obj * (R_o @ world.object_state.qd[3:])
            if mom_prev is not None:
                mom_drift += np.linalg.norm(p_lin - mom_prev - mom_impulse)
            F_ext = m_total * g_vec + _foot_force_sum(world.contacts, lam)
            F_ext = F_ext + _pert_force_sum(world, t)
            mom_impulse = F_ext * sub_dt
            mom_prev = p_lin
            world.state = semi_implicit_step(model, world.state, qdd_r, sub_dt)
            if world.object_state is not None:
                world.object_state = semi_implicit_step(world.object_model,
                                                        world.object_state, qdd_o, sub_dt)
        if not (np.all(np.isfinite(world.state.qd)) and np.all(np.isfinite(world.state.q))):
            stats.count("aborted_nan")
            aborted = True
            break

        # per-tick monitors (full rate)
        K = world.contacts.k_rows
        lam_mapped = lam_sim_clean.copy()
        if n_hand_rows and K == scene.contacts.k_rows:
            lam_mapped[-n_hand_rows:] = N_G @ lam_sim_clean[-n_hand_rows:]
            lam_dev = float(np.abs(lam_mapped - out.lambda_pred).max())
        elif out.lambda_pred.size == lam_mapped.size:
            lam_mapped[-n_hand_rows:] = N_G @ lam_sim_clean[-n_hand_rows:]
            lam_dev = float(np.abs(lam_mapped - out.lambda_pred).max())
        else:
            lam_dev = np.nan
        min_n, max_ratio = _foot_metrics(world.contacts, lam_sim_clean)
        stats.track_max("projector_residual", out.projector_residual)
        stats.track_max("virtual_torque", out.virtual_torque)
        stats.track_max("lambda_deviation", lam_dev)
        stats.track_max("slip_residual", out.slip_residual)
        stats.track_max("cross_term", out.cross_term)
        stats.track_max("orthogonality", out.orthogonality)
        stats.track_min("normal_force_sim", min_n)
        stats.track_max("friction_ratio", max_ratio)
        stats.track_max("qp_stationarity", out.qp_residuals.get("stationarity", 0.0))
        stats.track_max("qp_primal", out.qp_residuals.get("primal", 0.0))
        stats.track_max("qp_complementarity", out.qp_residuals.get("complementarity", 0.0))
        tau_act = out.tau_cmd[model.actuated]
        stats.track_min("torque_slack",
                        float(np.minimum(tau_act - model.tau_min,
                                         model.tau_max - tau_act).min()))
        if out.fault:
            stats.count("fault_count")
        if out.slip:
            stats.count("slip_count")
        if t >= setup.rms_skip_s:
            for name, e in out.task_errors.items():
                stats.track_rms(f"err_{name}", e)
                stats.track_max(f"err_{name}", np.abs(e).max())

        if k % setup.record_every == 0:
            row = [t]
            row += list(world.state.qd)
            if world.object_state is not None:
                row += list(world.object_state.q)
                row += list(world.object_state.qd)
            else:
                row += [0.0] * 13
            for name in sorted(t_.name for t_ in ctl.tasks):
                if name in out.task_errors:
                    row += list(out.task_errors[name])
                else:
                    task = next(t_ for t_ in ctl.tasks if t_.name == name)
                    row += [0.0] * (3 if task.kind == "point3" else 6)
            pad = scene.contacts.k_rows - lam_sim_clean.size
            row += list(lam_sim_clean) + [0.0] * pad
            row += list(out.lambda_pred) + [0.0] * (scene.contacts.k_rows - out.lambda_pred.size)
            row += list(out.F_c) + [0.0] * (scene.contacts.k_rows - out.F_c.size)
            row += [min_n, max_ratio,
                    out.margins.get("min_wrench_slack", np.inf),
                    out.margins.get("min_torque_slack", np.inf),
                    lam_dev, out.slip_residual, float(out.fault),
                    float(any(p.active(t) for p in world.perturbations)),
                    float(out.qp_iterations)]
            trace.append(np.array(row, dtype=float))

    summary = stats.summary()
    summary["scenario"] = setup.name
    summary["duration_s"] = setup.duration_s
    summary["control_dt"] = setup.control_dt
    summary["substeps"] = setup.substeps
    summary["n_ticks"] = n_ticks
    summary["aborted"] = aborted
    summary["fault_count"] = summary.get("fault_count", 0)
    summary["slip_count"] = summary.get("slip_count", 0)
    summary["median_tick_ms"] = float(np.median(tick_times)) if tick_times else 0.0
    summary["momentum_drift_per_s"] = float(mom_drift / max(setup.duration_s, 1e-9))
    summary["controller"] = type(ctl).__name__
    for name, amp in setup.amplitudes.items():
        rms = stats.rms(f"err_{name}")
        if rms is not None:
            rel = [float(r / a) if a > 0 else None for r, a in zip(rms, amp)]
            summary[f"rms_rel_{name}"] = rel
    if setup.schedule is not None:
        kin_f = Kinematics(model, world.state, world.gravity)
        robot = setup.schedule.robot
        R_t, p_t = kin_f.frame_pose(f"{robot}/trunk")
        ref = setup.schedule.torso_ref(setup.duration_s)
        summary["final_torso_pos_err"] = float(np.linalg.norm(p_t - ref.pos))
        summary["final_torso_yaw_err_deg"] = float(np.rad2deg(abs(
            rot_log(R_t @ ref.rot.T)[2])))
        summary["gait_t_end"] = setup.schedule.t_end
    return trace, summary


def _linear_momentum(kin: Kinematics, masses) -> np.ndarray:
    coms = np.stack([lk.com for lk in kin.model.links])
    c = kin.p + np.einsum("nij,nj->ni", kin.R, coms)
    w = kin.vel[:, :3]
    vO = kin.vel[:, 3:]
    v_com = vO + np.cross(w, c)
    return masses @ v_com


def _foot_force_sum(contacts: ContactSet, lam: np.ndarray) -> np.ndarray:
    f = np.zeros(3)
    for i in range(contacts.n_feet):
        f += lam[contacts.foot_slice(i)]
    return f


def _pert_force_sum(world: World, t: float) -> np.ndarray:
    f = np.zeros(3)
    for p in world.perturbations:
        if p.active(t):
            f += np.asarray(p.wrench[:3], dtype=float)
    return f


def run_named_scenario(name: str, config):
    """Spec-level entry: build the named scenario from config and run it."""
    cfg = config
    if getattr(cfg, "scenario", None) != name:
        cfg.scenario = name
    setup = build_setup(cfg)
    t0 = time.perf_counter()
    trace, summary = run_setup(setup)
    summary["wall_time_s"] = time.perf_counter() - t0
    return trace, summary
