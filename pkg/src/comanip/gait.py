"""Static-walk gait scheduling: one swing foot at a time, torso pre-shifted
over the remaining support triangle, smooth swing arcs consumed by the
point-impedance tasks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contact import ContactSet, FootContact
from .trajectories import PiecewisePath, PiecewisePose, Segment


@dataclass
class GaitParams:
    step_height: float = 0.06
    t_shift: float = 0.30          # torso pre-shift before each swing
    t_swing: float = 0.45
    t_settle: float = 0.15         # pause after touchdown
    sway_gain: float = 0.7         # torso shift toward the 3-foot centroid
    foot_order: tuple = ("lf", "rh", "rf", "lh")


@dataclass
class ContactSwitch:
    t: float
    active_feet: frozenset        # frame names in stance after the switch


@dataclass
class GaitPlan:
    """Everything the runner needs to replay a walk: contact switches,
    per-foot world trajectories, torso reference, swing windows."""

    robot: str
    switches: list[ContactSwitch]
    foot_paths: dict[str, PiecewisePath]
    torso_ref: PiecewisePose
    swing_windows: dict[str, list[tuple[float, float]]]
    t_end: float
    final_foot_positions: dict[str, np.ndarray]
    final_torso_pos: np.ndarray
    final_torso_yaw: float


class _Builder:
    def __init__(self, robot, feet0: dict, torso_pos, torso_rot, par: GaitParams,
                 t0: float = 0.0):
        self.robot = robot
        self.par = par
        self.feet = {k: np.asarray(v, dtype=float).copy() for k, v in feet0.items()}
        self.torso = np.asarray(torso_pos, dtype=float).copy()
        self.yaw = 0.0
        self.t = t0
        self.switches: list[ContactSwitch] = []
        self.paths = {k: PiecewisePath(v) for k, v in self.feet.items()}
        self.torso_ref = PiecewisePose(self.torso, torso_rot)
        self.windows = {k: [] for k in self.feet}

    def _stance_names(self, swing_leg):
        return frozenset(f"{self.robot}/foot_{leg}" for leg in self.feet if leg != swing_leg)

    def step_foot(self, leg: str, target: np.ndarray):
        par = self.par
        # torso shift toward the centroid of the remaining support triangle
        support = [self.feet[k] for k in self.feet if k != leg]
        centroid = np.mean(support, axis=0)
        goal = self.torso.copy()
        goal[:2] = (1 - par.sway_gain) * self.torso[:2] + par.sway_gain * centroid[:2]
        self.torso_ref.add_move(self.t, self.t + par.t_shift, self.torso, goal)
        self.torso = goal
        self.t += par.t_shift
        # lift
        self.switches.append(ContactSwitch(self.t, self._stance_names(leg)))
        self.paths[leg].add(Segment(self.t, self.t + par.t_swing,
                                    self.feet[leg].copy(), np.asarray(target, float).copy(),
                                    bump=par.step_height))
        self.windows[leg].append((self.t, self.t + par.t_swing))
        self.feet[leg] = np.asarray(target, dtype=float).copy()
        self.t += par.t_swing
        # touchdown
        self.switches.append(ContactSwitch(self.t, frozenset(
            f"{self.robot}/foot_{k}" for k in self.feet)))
        self.t += par.t_settle

    def walk_cycle(self, displacement: np.ndarray, dyaw: float = 0.0):
        """One static-walk cycle: each foot steps once; the torso ends
        displaced by `displacement` and yawed by `dyaw`."""
        disp = np.asarray(displacement, dtype=float)
        c_yaw = self.yaw + dyaw
        cz = np.cos(dyaw)
        sz = np.sin(dyaw)
        Rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
        center0 = np.mean(list(self.feet.values()), axis=0)
        center1 = center0 + disp
        targets = {}
        for leg in self.par.foot_order:
            rel = self.feet[leg] - center0
            targets[leg] = center1 + Rz @ rel
        for leg in self.par.foot_order:
            self.step_foot(leg, targets[leg])
        # torso returns over the new stance center, carrying the yaw
        goal = self.torso.copy()
        goal[:2] = self.torso[:2] + disp[:2]
        t1 = self.t + 2.0 * self.par.t_shift
        self.torso_ref.add_move(self.t, t1, self.torso, goal)
        if dyaw:
            self.torso_ref.add_yaw(self.t, t1, self.yaw, c_yaw)
        self.torso = goal
        self.yaw = c_yaw
        self.t = t1

def gait_schedule(robot: str, feet0: dict, torso_pos, torso_rot,
                  cycles: list[tuple], params: GaitParams | None = None,
                  t0: float = 0.0) -> GaitPlan:
    """Build a walk plan from per-cycle (displacement, dyaw) primitives.

    cycles: list of (displacement 3-vector, yaw increment rad); one walk
    cycle moves every foot once and carries the torso along.
    """
    par = params or GaitParams()
    b = _Builder(robot, feet0, torso_pos, torso_rot, par, t0)
    for disp, dyaw in cycles:
        b.walk_cycle(np.asarray(disp, dtype=float), float(dyaw))
    return GaitPlan(robot=robot, switches=b.switches, foot_paths=b.paths,
                    torso_ref=b.torso_ref, swing_windows=b.windows, t_end=b.t,
                    final_foot_positions={k: v.copy() for k, v in b.feet.items()},
                    final_torso_pos=b.torso.copy(), final_torso_yaw=b.yaw)
