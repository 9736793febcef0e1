"""Parameterized robot builders: a simplified quadruped with a 6-DoF arm
(boxes and rods for links), a free rigid box, and the standard two-robot
co-grasp scene used by the scenarios.

Robot frame convention: x forward, y left, z up.  Arm links extend along
their local +x; the hand frame has its z axis along the plate outward
normal (local +x of the last link).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contact import ContactSet, FootContact, HandContact
from .model import (FIXED, FLOATING, PRISMATIC, REVOLUTE, Kinematics,
                    LinkSpec, RobotModel, SystemState)
from .spatial import rot_to_quat, rpy_to_rot

X = np.array([1.0, 0, 0])
Y = np.array([0, 1.0, 0])
Z = np.array([0, 0, 1.0])


def box_inertia(m, lx, ly, lz) -> np.ndarray:
    return m / 12.0 * np.diag([ly * ly + lz * lz, lx * lx + lz * lz, lx * lx + ly * ly])


def rod_inertia(m, length, axis=0, radius=0.03) -> np.ndarray:
    """Solid cylinder of given length along a coordinate axis."""
    i = m * (length * length / 12.0 + radius * radius / 4.0)
    d = [i, i, i]
    d[axis] = 0.5 * m * radius * radius
    return np.diag(d)


@dataclass
class QuadArmParams:
    trunk_mass: float = 18.0
    trunk_dims: tuple = (0.6, 0.3, 0.15)
    hip_x: float = 0.25
    hip_y: float = 0.16
    abduct_y: float = 0.09
    thigh_len: float = 0.30
    shank_len: float = 0.32
    hip_mass: float = 1.2
    thigh_mass: float = 1.8
    shank_mass: float = 0.4
    arm_mount: tuple = (0.22, 0.0, 0.12)
    upper_len: float = 0.40
    fore_len: float = 0.40
    wrist_len: float = 0.09
    hand_len: float = 0.07
    arm_masses: tuple = (0.8, 1.2, 1.0, 0.4, 0.4, 0.5)
    leg_torque: float = 80.0
    arm_torque: tuple = (60.0, 60.0, 40.0, 20.0, 20.0, 20.0)
    # nominal joint angles; the deep elbow bend leaves ~0.3 m of reach
    # margin for locomotion while grasping
    thigh_angle: float = 0.5
    shoulder_pitch: float = -1.1
    elbow_pitch: float = 2.2

    @property
    def wrist_pitch(self) -> float:
        # keeps the hand plate normal horizontal
        return -(self.shoulder_pitch + self.elbow_pitch)


LEG_ORDER = ("lf", "rf", "lh", "rh")


def quadruped_manipulator(prefix: str, par: QuadArmParams | None = None):
    """Return (links, frames, torque_limits, nominal_joint_q) for one robot.

    Link indices are local; the caller offsets parents when composing robots.
    """
    p = par or QuadArmParams()
    links: list[LinkSpec] = []
    frames: dict = {}
    tq: list[float] = []
    qnom: list[float] = []

    trunk = LinkSpec(f"{prefix}/trunk", -1, FLOATING, mass=p.trunk_mass,
                     inertia=box_inertia(p.trunk_mass, *p.trunk_dims))
    links.append(trunk)
    frames[f"{prefix}/trunk"] = (0, np.eye(3), np.zeros(3))

    for leg in LEG_ORDER:
        sx = 1.0 if leg[1] == "f" else -1.0
        sy = 1.0 if leg[0] == "l" else -1.0
        i_hip = len(links)
        links.append(LinkSpec(
            f"{prefix}/{leg}_hip", 0, REVOLUTE, axis=X,
            t_pos=np.array([sx * p.hip_x, sy * p.hip_y, 0.0]),
            mass=p.hip_mass, com=np.array([0.0, sy * 0.04, 0.0]),
            inertia=rod_inertia(p.hip_mass, 0.08, axis=1)))
        links.append(LinkSpec(
            f"{prefix}/{leg}_thigh", i_hip, REVOLUTE, axis=Y,
            t_pos=np.array([0.0, sy * p.abduct_y, 0.0]),
            mass=p.thigh_mass, com=np.array([0.0, 0.0, -p.thigh_len / 2]),
            inertia=rod_inertia(p.thigh_mass, p.thigh_len, axis=2)))
        links.append(LinkSpec(
            f"{prefix}/{leg}_shank", i_hip + 1, REVOLUTE, axis=Y,
            t_pos=np.array([0.0, 0.0, -p.thigh_len]),
            mass=p.shank_mass, com=np.array([0.0, 0.0, -p.shank_len / 2]),
            inertia=rod_inertia(p.shank_mass, p.shank_len, axis=2)))
        frames[f"{prefix}/foot_{leg}"] = (i_hip + 2, np.eye(3), np.array([0.0, 0.0, -p.shank_len]))
        tq += [p.leg_torque] * 3
        th = p.thigh_angle if sx > 0 else -p.thigh_angle
        qnom += [0.0, th, -2.0 * th]

    # arm: yaw, pitch, pitch, roll, pitch, roll; links extend along local +x
    mounts = [
        (0, np.array(p.arm_mount), Z),
        (None, np.array([0.0, 0.0, 0.06]), Y),
        (None, np.array([p.upper_len, 0.0, 0.0]), Y),
        (None, np.array([p.fore_len, 0.0, 0.0]), X),
        (None, np.array([p.wrist_len, 0.0, 0.0]), Y),
        (None, np.array([p.wrist_len, 0.0, 0.0]), X),
    ]
    arm_coms = [0.02, p.upper_len / 2, p.fore_len / 2, p.wrist_len / 2, p.wrist_len / 2, p.hand_len / 2]
    arm_lens = [0.06, p.upper_len, p.fore_len, p.wrist_len, p.wrist_len, p.hand_len]
    base_idx = len(links)
    for j, ((parent, tpos, axis), m_j) in enumerate(zip(mounts, p.arm_masses)):
        par_idx = 0 if parent == 0 else base_idx + j - 1
        links.append(LinkSpec(
            f"{prefix}/arm{j + 1}", par_idx, REVOLUTE, axis=axis, t_pos=tpos,
            mass=m_j, com=np.array([arm_coms[j], 0.0, 0.0]),
            inertia=rod_inertia(m_j, arm_lens[j], axis=0)))
    tq += list(p.arm_torque)
    qnom += [0.0, p.shoulder_pitch, p.elbow_pitch, 0.0, p.wrist_pitch, 0.0]
    # hand plate: z axis along local +x
    R_hand = np.array([[0.0, 0.0, 1.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])
    frames[f"{prefix}/hand"] = (base_idx + 5, R_hand, np.array([p.hand_len, 0.0, 0.0]))
    return links, frames, np.array(tq), np.array(qnom)


def box_object_model(mass=1.0, side=0.6, name="object") -> RobotModel:
    """A free rigid cube (solid, inertia m l^2 / 6 per axis)."""
    lk = LinkSpec(name, -1, FLOATING, mass=mass, inertia=mass * side * side / 6.0 * np.eye(3))
    m = RobotModel([lk])
    m.add_frame(name, 0)
    return m


@dataclass
class RobotPlacement:
    name: str
    xy: tuple = (0.0, 0.0)
    yaw: float = 0.0
    params: QuadArmParams = field(default_factory=QuadArmParams)


def compose_robots(placements: list[RobotPlacement]):
    """Block-diagonal multi-robot model plus the nominal configuration with
    all feet exactly on the ground plane z = 0."""
    links: list[LinkSpec] = []
    frames: dict = {}
    tq_lo: list[np.ndarray] = []
    joint_q: list[np.ndarray] = []
    for pl in placements:
        lks, frs, tq, qnom = quadruped_manipulator(pl.name, pl.params)
        off = len(links)
        for lk in lks:
            lk.parent = lk.parent + off if lk.parent >= 0 else -1
            links.append(lk)
        for nm, (li, R, p) in frs.items():
            frames[nm] = (li + off, R, p)
        tq_lo.append(tq)
        joint_q.append(qnom)
    model = RobotModel(links, torque_limits=(-np.concatenate(tq_lo), np.concatenate(tq_lo)))
    for nm, (li, R, p) in frames.items():
        model.add_frame(nm, li, R, p)

    q0 = model.neutral_q()
    for pl, qj in zip(placements, joint_q):
        base = model.q_slice(model.link_id(f"{pl.name}/trunk")).start
        R0 = rpy_to_rot(0, 0, pl.yaw)
        q0[base:base + 3] = [pl.xy[0], pl.xy[1], 0.0]
        q0[base + 3:base + 7] = rot_to_quat(R0)
        # joint angles follow the trunk quaternion in the flat layout
        q0[base + 7:base + 7 + qj.size] = qj
    # drop each robot so its lowest foot touches z = 0
    kin = Kinematics(model, SystemState(q0, np.zeros(model.nv)), gravity=(0, 0, 0))
    for pl in placements:
        foot_z = min(kin.frame_pose(f"{pl.name}/foot_{leg}")[1][2] for leg in LEG_ORDER)
        base = model.q_slice(model.link_id(f"{pl.name}/trunk")).start
        q0[base + 2] -= foot_z
    return model, q0


@dataclass
class Scene:
    """The co-manipulation scene: robots, object, contacts and calibration."""

    model: RobotModel                       # robots only (the controller's system)
    object_model: RobotModel
    q0: np.ndarray
    object_q0: np.ndarray
    contacts: ContactSet
    robot_names: list[str]
    hand_frames: list[str]
    grasp_calibration: list[tuple]          # (rot, pos): object pose in each hand frame

    @property
    def nv(self) -> int:
        return self.model.nv


def build_scene(object_mass=1.0, object_side=0.6, mu_ground=0.7, mu_hand=0.5,
                xi_hand=0.1, patch=(0.05, 0.05), robot_gap=None,
                params: QuadArmParams | None = None,
                environment_wall: bool = False) -> Scene:
    """Two quadruped manipulators facing each other along x, rigidly grasping
    a cube at the midpoint.  Contact calibration is measured from the built
    configuration, so the initial state satisfies all constraints exactly.
    """
    p = params or QuadArmParams()
    # hand reach in the robot frame, measured on a single robot at nominal pose
    single, q_single = compose_robots([RobotPlacement("tmp", (0.0, 0.0), 0.0, p)])
    kin_s = Kinematics(single, SystemState(q_single, np.zeros(single.nv)), gravity=(0, 0, 0))
    hand_x = kin_s.frame_pose("tmp/hand")[1][0]

    half = object_side / 2.0
    gap = robot_gap if robot_gap is not None else half + hand_x
    placements = [
        RobotPlacement("r1", (-gap, 0.0), 0.0, p),
        RobotPlacement("r2", (+gap, 0.0), np.pi, p),
    ]
    model, q0 = compose_robots(placements)
    kin = Kinematics(model, SystemState(q0, np.zeros(model.nv)), gravity=(0, 0, 0))

    hands = ["r1/hand", "r2/hand"]
    hand_poses = [kin.frame_pose(h) for h in hands]
    p_obj = 0.5 * (hand_poses[0][1] + hand_poses[1][1])
    R_obj = np.eye(3)

    object_model = box_object_model(object_mass, object_side)
    object_q0 = object_model.neutral_q()
    object_q0[:3] = p_obj
    object_q0[3:7] = rot_to_quat(R_obj)

    hand_contacts = []
    calibration = []
    for h, (R_c, x_c) in zip(hands, hand_poses):
        hand_contacts.append(HandContact(
            frame=h, rot=R_obj.T @ R_c, lever=R_obj.T @ (x_c - p_obj),
            mu=mu_hand, xi=xi_hand, half_x=patch[0], half_y=patch[1]))
        calibration.append((R_c.T @ R_obj, R_c.T @ (p_obj - x_c)))

    env = []
    if environment_wall:
        # object face pressed against a static wall at +y; grip_* hold the
        # world pose of the environment contact frame
        R_w = np.column_stack([X, -Z, Y])   # wall contact normal +y (into the object)
        p_w = p_obj + np.array([0.0, half, 0.0])
        env.append(HandContact(frame=None, rot=R_obj.T @ R_w,
                               lever=R_obj.T @ (p_w - p_obj),
                               mu=mu_hand, xi=xi_hand, half_x=patch[0], half_y=patch[1],
                               grip_rot=R_w, grip_pos=p_w))

    feet = []
    for rn in ("r1", "r2"):
        for leg in LEG_ORDER:
            fr = f"{rn}/foot_{leg}"
            feet.append(FootContact(frame=fr, mu=mu_ground,
                                    anchor=kin.frame_pose(fr)[1].copy()))
    contacts = ContactSet(foot_contacts=feet, hand_contacts=hand_contacts,
                          environment_contacts=env)
    return Scene(model=model, object_model=object_model, q0=q0, object_q0=object_q0,
                 contacts=contacts, robot_names=["r1", "r2"], hand_frames=hands,
                 grasp_calibration=calibration)
