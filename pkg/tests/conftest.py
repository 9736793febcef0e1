import numpy as np
import pytest

from comanip.model import FLOATING, REVOLUTE, LinkSpec, RobotModel, SystemState
from comanip.robots import build_scene


@pytest.fixture(scope="session")
def scene():
    return build_scene()


@pytest.fixture
def free_cube():
    """1 kg cube of 0.6 m side: inertia m l^2 / 6 = 0.06 per axis."""
    m = RobotModel([LinkSpec("box", -1, FLOATING, mass=1.0, inertia=0.06 * np.eye(3))])
    m.add_frame("box", 0)
    return m


@pytest.fixture
def pendulum():
    """Point mass 1 kg at 1 m below a y-axis revolute joint at the origin."""
    m = RobotModel([LinkSpec("rod", -1, REVOLUTE, axis=np.array([0.0, 1.0, 0.0]),
                             mass=1.0, com=np.array([0.0, 0.0, -1.0]))])
    m.add_frame("tip", 0, pos=np.array([0.0, 0.0, -1.0]))
    return m


def random_state(model, rng, base_scale=0.3, joint_scale=0.6, vel_scale=0.5):
    q = model.neutral_q()
    for i, lk in enumerate(model.links):
        qs = model.q_slice(i)
        if lk.joint_type == "floating":
            q[qs.start:qs.start + 3] = base_scale * rng.standard_normal(3)
            quat = rng.standard_normal(4)
            q[qs.start + 3:qs.start + 7] = quat / np.linalg.norm(quat)
        elif lk.joint_type != "fixed":
            q[qs] = joint_scale * rng.standard_normal(1)
    qd = vel_scale * rng.standard_normal(model.nv)
    return SystemState(q, qd)
