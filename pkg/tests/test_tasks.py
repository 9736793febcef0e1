import numpy as np
import pytest

from comanip.contact import ContactSet, build_projection
from comanip.model import (FLOATING, PRISMATIC, Kinematics, LinkSpec,
                           RobotModel, SystemState)
from comanip.robots import build_scene
from comanip.spatial import rot_exp, rot_log
from comanip.tasks import (ImpedanceTask, evaluate_task, motion_torque,
                           object_pose_from_grasp, task_wrench)
from comanip.trajectories import (CirclePose, ConstantPoint, ConstantPose,
                                  PiecewisePath, Segment, Sinusoid,
                                  SinusoidPose)


def cart3():
    """Fully actuated 3-DoF Cartesian stage (x, y, z prismatic)."""
    links = [
        LinkSpec("x", -1, PRISMATIC, axis=np.array([1.0, 0, 0]), mass=1.0),
        LinkSpec("y", 0, PRISMATIC, axis=np.array([0, 1.0, 0]), mass=1.0),
        LinkSpec("z", 1, PRISMATIC, axis=np.array([0, 0, 1.0]), mass=1.0),
    ]
    m = RobotModel(links)
    m.add_frame("tip", 2)
    return m


class TestTaskWrench:
    def test_pure_stiffness_object_gain(self, scene):
        """0.1 m error against the 1500 N/m object stiffness -> -150 N."""
        m = cart3()
        st_ = SystemState(np.zeros(3), np.zeros(3))
        b = build_projection(m, st_, ContactSet(), gravity=(0, 0, 0))
        task = ImpedanceTask(
            "tip", "point3", kp=np.array([1500.0, 1500, 1500]),
            kd=np.zeros(3), ref=ConstantPoint([-0.1, 0.0, 0.0]), frame="tip")
        ev = task_wrench(task, b, m, st_, 0.0)
        assert np.allclose(ev.e, [0.1, 0, 0], atol=1e-12)
        assert ev.wrench[0] == pytest.approx(-150.0, abs=1e-9)
        assert np.allclose(ev.wrench[1:], 0.0, atol=1e-9)

    def test_zero_error_zero_wrench(self):
        m = cart3()
        st_ = SystemState(np.zeros(3), np.zeros(3))
        b = build_projection(m, st_, ContactSet(), gravity=(0, 0, 0))
        task = ImpedanceTask("tip", "point3", kp=np.full(3, 100.0),
                             kd=np.full(3, 10.0), ref=ConstantPoint([0.0, 0, 0]),
                             frame="tip")
        ev = task_wrench(task, b, m, st_, 0.0)
        assert np.abs(ev.wrench).max() <= 1e-12

    def test_inertia_feedforward(self):
        """With zero errors, F = Lambda_c acc_d: the stage accelerates as
        commanded under tau = J^T F."""
        m = cart3()
        st_ = SystemState(np.zeros(3), np.zeros(3))
        b = build_projection(m, st_, ContactSet(), gravity=(0, 0, 0))
        acc = np.array([0.7, -0.2, 0.4])

        class Ref:
            def __call__(self, t):
                from comanip.trajectories import Point3Ref
                return Point3Ref(np.zeros(3), np.zeros(3), acc)

        task = ImpedanceTask("tip", "point3", kp=np.zeros(3), kd=np.zeros(3),
                             ref=Ref(), frame="tip")
        ev = task_wrench(task, b, m, st_, 0.0)
        tau = ev.J.T @ ev.wrench
        qdd = np.linalg.solve(b.M, tau)
        assert np.allclose(ev.J @ qdd, acc, atol=1e-9)

    def test_orientation_error_sign(self, scene):
        """Current rotated +10 deg about z from the reference -> negative
        restoring moment about z."""
        st_ = SystemState(scene.q0, np.zeros(scene.nv))
        b = build_projection(scene.model, st_, scene.contacts)
        kin = Kinematics(scene.model, st_, gravity=(0, 0, 0))
        R_cur, p_cur = kin.frame_pose("r1/trunk")
        R_des = rot_exp(np.array([0, 0, -0.17])) @ R_cur   # desired = current rotated -z
        task = ImpedanceTask("torso", "frame6", kp=np.full(6, 100.0), kd=np.zeros(6),
                             ref=ConstantPose(p_cur, R_des), frame="r1/trunk")
        ev = task_wrench(task, b, scene.model, st_, 0.0)
        assert ev.e[5] == pytest.approx(0.17, abs=1e-9)
        assert ev.wrench[5] == pytest.approx(-17.0, abs=1e-6)


class TestMotionTorque:
    def test_no_tasks(self, scene):
        st_ = SystemState(scene.q0, np.zeros(scene.nv))
        b = build_projection(scene.model, st_, scene.contacts)
        tau, evals = motion_torque([], b, scene.model, st_, 0.0)
        assert np.all(tau == 0.0) and evals == {}

    def test_single_object_task_definition(self, scene):
        st_ = SystemState(scene.q0, np.zeros(scene.nv))
        b = build_projection(scene.model, st_, scene.contacts)
        task = ImpedanceTask(
            "object", "object", kp=np.full(6, 100.0), kd=np.full(6, 10.0),
            ref=ConstantPose(scene.object_q0[:3]), calibration=scene.grasp_calibration)
        tau, evals = motion_torque([task], b, scene.model, st_, 0.0)
        ev = evals["object"]
        assert np.allclose(tau, ev.J.T @ ev.wrench, atol=1e-12)

    def test_superposition_linearity(self, scene):
        """Disjoint tasks add without interference."""
        st_ = SystemState(scene.q0, np.zeros(scene.nv))
        b = build_projection(scene.model, st_, scene.contacts)
        kin = Kinematics(scene.model, st_, gravity=(0, 0, 0))
        t1 = ImpedanceTask("torso1", "frame6", kp=np.full(6, 200.0), kd=np.full(6, 20.0),
                           ref=ConstantPose(kin.frame_pose("r1/trunk")[1] + [0.01, 0, 0],
                                            kin.frame_pose("r1/trunk")[0]),
                           frame="r1/trunk")
        t2 = ImpedanceTask("torso2", "frame6", kp=np.full(6, 200.0), kd=np.full(6, 20.0),
                           ref=ConstantPose(kin.frame_pose("r2/trunk")[1] - [0.01, 0, 0],
                                            kin.frame_pose("r2/trunk")[0]),
                           frame="r2/trunk")
        tau1, _ = motion_torque([t1], b, scene.model, st_, 0.0)
        tau2, _ = motion_torque([t2], b, scene.model, st_, 0.0)
        tau12, _ = motion_torque([t1, t2], b, scene.model, st_, 0.0)
        assert np.allclose(tau12, tau1 + tau2, atol=1e-10)

    def test_disabled_task_contributes_zero(self, scene):
        st_ = SystemState(scene.q0, np.zeros(scene.nv))
        b = build_projection(scene.model, st_, scene.contacts)
        task = ImpedanceTask("swing", "point3", kp=np.full(3, 100.0), kd=np.zeros(3),
                             ref=ConstantPoint([0, 0, 0.1]), frame="r1/foot_lf",
                             enabled=False)
        tau, evals = motion_torque([task], b, scene.model, st_, 0.0)
        assert np.all(tau == 0.0) and "swing" not in evals


class TestObjectPoseFromGrasp:
    def test_single_hand_identity(self, scene):
        st_ = SystemState(scene.q0, np.zeros(scene.nv))
        kin = Kinematics(scene.model, st_, gravity=(0, 0, 0))
        cs = ContactSet(hand_contacts=scene.contacts.hand_contacts[:1])
        R_h, p_h = kin.frame_pose("r1/hand")
        R, p = object_pose_from_grasp(cs, scene.model, st_,
                                      [(np.eye(3), np.zeros(3))], kin)
        assert np.allclose(R, R_h, atol=1e-12)
        assert np.allclose(p, p_h, atol=1e-12)

    def test_two_hands_consistent(self, scene):
        st_ = SystemState(scene.q0, np.zeros(scene.nv))
        R, p = object_pose_from_grasp(scene.contacts, scene.model, st_,
                                      scene.grasp_calibration)
        assert np.allclose(p, scene.object_q0[:3], atol=1e-9)
        assert np.allclose(R, np.eye(3), atol=1e-9)

    def test_perturbed_average_betweenness(self, scene):
        rng = np.random.default_rng(0)
        q = scene.q0.copy()
        # perturb robot-1 arm joints only
        base = scene.model.q_slice(scene.model.link_id("r1/arm1")).start
        q[base:base + 6] += 1e-3 * rng.standard_normal(6)
        st_ = SystemState(q, np.zeros(scene.nv))
        kin = Kinematics(scene.model, st_, gravity=(0, 0, 0))
        est = []
        for hc, (c_rot, c_pos) in zip(scene.contacts.hand_contacts, scene.grasp_calibration):
            R_h, p_h = kin.frame_pose(hc.frame)
            est.append(p_h + R_h @ c_pos)
        _, p = object_pose_from_grasp(scene.contacts, scene.model, st_,
                                      scene.grasp_calibration)
        assert np.linalg.norm(est[0] - est[1]) > 1e-5   # estimates disagree
        assert np.allclose(p, 0.5 * (est[0] + est[1]), atol=1e-12)
        lo = np.minimum(est[0], est[1]) - 1e-12
        hi = np.maximum(est[0], est[1]) + 1e-12
        assert np.all(p >= lo) and np.all(p <= hi)


class TestTrajectories:
    @pytest.mark.parametrize("maker", [
        lambda: SinusoidPose(np.array([0.1, 0, 0.5]), rot_exp(np.array([0.1, 0.2, 0.3])),
                             lin=Sinusoid(np.array([0.05, 0.02, 0.03]),
                                          np.array([0.3, 0.25, 0.4]), np.zeros(3)),
                             ang=Sinusoid(np.array([0.15, 0.1, 0.2]),
                                          np.array([0.2, 0.3, 0.25]), np.zeros(3))),
        lambda: CirclePose(np.array([0.0, 0, 0.6]), np.eye(3), 0.08, 8.0, ramp_s=2.0),
    ])
    def test_derivative_consistency(self, maker):
        """Velocities and accelerations are the analytic derivatives of the
        returned pose (finite-difference cross-check)."""
        ref = maker()
        eps = 1e-6
        for t in [0.31, 1.0, 2.37, 5.5]:
            r0 = ref(t - eps)
            r1 = ref(t)
            r2 = ref(t + eps)
            v_fd = (r2.pos - r0.pos) / (2 * eps)
            a_fd = (r2.pos - 2 * r1.pos + r0.pos) / (eps * eps)
            assert np.abs(r1.vel[:3] - v_fd).max() <= 1e-6
            assert np.abs(r1.acc[:3] - a_fd).max() <= 1e-3
            W = (r2.rot - r0.rot) / (2 * eps) @ r1.rot.T
            w_fd = np.array([W[2, 1], W[0, 2], W[1, 0]])
            assert np.abs(r1.vel[3:] - w_fd).max() <= 1e-6

    def test_piecewise_path_boundary_velocities(self):
        path = PiecewisePath(np.zeros(3), [
            Segment(1.0, 2.0, np.zeros(3), np.array([0.1, 0, 0]), bump=0.06),
        ])
        for t in (0.5, 1.0, 2.0, 3.0):
            r = path(t)
            assert np.abs(r.vel).max() <= 1e-12
        r = path(1.5)
        assert r.pos[2] == pytest.approx(0.06, abs=1e-12)   # mid-swing bump
        assert r.pos[0] == pytest.approx(0.05, abs=1e-12)
        assert path(3.0).pos[0] == pytest.approx(0.1)
