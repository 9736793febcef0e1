import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from comanip.model import (FLOATING, REVOLUTE, DimensionError, Kinematics,
                           semi_implicit_step,
                           LinkSpec, RobotModel, SystemState, UnknownFrameError,
                           frame_jacobian, integrate_state, jacobian_drift,
                           kinetic_energy, mass_matrix, nonlinear_effects,
                           potential_energy)
from comanip.robots import QuadArmParams, RobotPlacement, compose_robots

from conftest import random_state
from oracle_rnea import rnea

RNG = np.random.default_rng(1234)


class TestMassMatrix:
    def test_free_cube_body_coords(self, free_cube):
        # (angular; linear) body twist: rotational inertia block first
        st_ = SystemState(free_cube.neutral_q(), np.zeros(6))
        M = mass_matrix(free_cube, st_)
        assert np.allclose(M, np.diag([0.06, 0.06, 0.06, 1.0, 1.0, 1.0]), atol=1e-14)

    def test_free_cube_orientation_invariant(self, free_cube):
        q = free_cube.neutral_q()
        q[3:7] = [0.4, -0.3, 0.5, 0.2]
        q[3:7] /= np.linalg.norm(q[3:7])
        M = mass_matrix(free_cube, SystemState(q, np.zeros(6)))
        assert np.allclose(M, np.diag([0.06, 0.06, 0.06, 1.0, 1.0, 1.0]), atol=1e-12)

    def test_pendulum_point_mass(self, pendulum):
        M = mass_matrix(pendulum, SystemState(np.array([0.3]), np.zeros(1)))
        assert np.allclose(M, [[1.0]], atol=1e-14)

    def test_disconnected_robots_block_diagonal(self):
        model, q0 = compose_robots([
            RobotPlacement("a", (-1.0, 0.0), 0.0),
            RobotPlacement("b", (1.0, 0.0), 1.0),
        ])
        st_ = random_state(model, RNG)
        M = mass_matrix(model, st_)
        na = model.nv // 2
        assert np.all(M[:na, na:] == 0.0)
        assert np.all(M[na:, :na] == 0.0)

    def test_symmetry_and_spd(self, scene):
        for _ in range(20):
            st_ = random_state(scene.model, RNG)
            M = mass_matrix(scene.model, st_)
            assert np.abs(M - M.T).max() <= 1e-10
            np.linalg.cholesky(M)   # raises if not PD

    def test_dimension_mismatch(self, free_cube, pendulum):
        bad = SystemState(pendulum.neutral_q(), np.zeros(1))
        with pytest.raises(DimensionError):
            mass_matrix(free_cube, bad)


class TestNonlinearEffects:
    def test_zero_velocity_zero_gravity(self, scene):
        st_ = random_state(scene.model, RNG, vel_scale=0.0)
        h = nonlinear_effects(scene.model, st_, gravity=(0, 0, 0))
        assert np.abs(h).max() <= 1e-12

    def test_pendulum_gravity_torque(self, pendulum):
        # angle measured from straight down; torque m g l sin(theta)
        for th in (0.0, np.pi / 2, 0.7):
            h = nonlinear_effects(pendulum, SystemState(np.array([th]), np.zeros(1)))
            assert h[0] == pytest.approx(9.81 * np.sin(th), abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_rnea_oracle_cross_check(self, scene, seed):
        rng = np.random.default_rng(seed)
        st_ = random_state(scene.model, rng)
        qdd = rng.standard_normal(scene.model.nv)
        M = mass_matrix(scene.model, st_)
        h = nonlinear_effects(scene.model, st_)
        tau = rnea(scene.model, st_.q, st_.qd, qdd)
        scale = max(1.0, np.abs(tau).max())
        assert np.abs(M @ qdd + h - tau).max() / scale <= 1e-10

    def test_rnea_oracle_simple_models(self, free_cube, pendulum):
        rng = np.random.default_rng(7)
        for model in (free_cube, pendulum):
            st_ = random_state(model, rng)
            qdd = rng.standard_normal(model.nv)
            lhs = mass_matrix(model, st_) @ qdd + nonlinear_effects(model, st_)
            assert np.allclose(lhs, rnea(model, st_.q, st_.qd, qdd), atol=1e-10)


class TestFrameJacobian:
    def test_free_body_identity_pose(self, free_cube):
        st_ = SystemState(free_cube.neutral_q(), np.zeros(6))
        J = frame_jacobian(free_cube, st_, "box", kind="full6")
        assert np.allclose(J, np.eye(6), atol=1e-14)

    def test_world_fixed_frame_zero(self, free_cube):
        free_cube.add_frame("wall", -1, pos=np.array([1.0, 0, 0]))
        st_ = SystemState(free_cube.neutral_q(), np.zeros(6))
        assert np.all(frame_jacobian(free_cube, st_, "wall") == 0.0)

    def test_unknown_frame(self, free_cube):
        st_ = SystemState(free_cube.neutral_q(), np.zeros(6))
        with pytest.raises(UnknownFrameError):
            frame_jacobian(free_cube, st_, "nope")

    @pytest.mark.parametrize("frame", ["r1/hand", "r1/foot_lf", "r2/trunk"])
    def test_finite_difference_oracle(self, scene, frame):
        """Column k of J equals the pose change under a perturbation of
        velocity coordinate k (central differences)."""
        model = scene.model
        rng = np.random.default_rng(3)
        st_ = random_state(model, rng, vel_scale=0.0)
        J = frame_jacobian(model, st_, frame, kind="full6")
        kin0 = Kinematics(model, st_, gravity=(0, 0, 0))
        eps = 1e-6
        for k in range(model.nv):
            dq = np.zeros(model.nv)
            dq[k] = 1.0
            q_p = integrate_state(model, st_.q, dq, +eps)
            q_m = integrate_state(model, st_.q, dq, -eps)
            kp = Kinematics(model, SystemState(q_p, st_.qd), gravity=(0, 0, 0))
            km = Kinematics(model, SystemState(q_m, st_.qd), gravity=(0, 0, 0))
            Rp, pp = kp.frame_pose(frame)
            Rm, pm = km.frame_pose(frame)
            dlin = (pp - pm) / (2 * eps)
            W = (Rp - Rm) / (2 * eps) @ kin0.frame_pose(frame)[0].T
            dang = np.array([W[2, 1], W[0, 2], W[1, 0]])
            assert np.abs(J[3:, k] - dlin).max() <= 1e-6
            assert np.abs(J[:3, k] - dang).max() <= 1e-6


class TestJacobianDrift:
    def test_zero_velocity(self, scene):
        st_ = random_state(scene.model, RNG, vel_scale=0.0)
        assert np.abs(jacobian_drift(scene.model, st_, "r1/hand")).max() <= 1e-12

    def test_pendulum_centripetal(self, pendulum):
        # tip of a pendulum swinging at rate w: |Jdot qd| = l w^2 toward pivot
        th, w = 0.6, 1.7
        st_ = SystemState(np.array([th]), np.array([w]))
        drift = jacobian_drift(pendulum, st_, "tip", kind="point3")
        assert np.linalg.norm(drift) == pytest.approx(1.0 * w * w, abs=1e-12)
        tip_dir = np.array([-np.sin(th), 0.0, -np.cos(th)])   # +y rotation
        assert np.allclose(drift, -w * w * tip_dir, atol=1e-12)

    @pytest.mark.parametrize("frame", ["r1/hand", "r2/foot_rh"])
    def test_finite_difference_oracle(self, scene, frame):
        model = scene.model
        rng = np.random.default_rng(11)
        for _ in range(10):
            st_ = random_state(model, rng)
            drift = jacobian_drift(model, st_, frame)
            dt = 1e-7
            q2 = integrate_state(model, st_.q, st_.qd, dt)
            J1 = frame_jacobian(model, st_, frame)
            J2 = frame_jacobian(model, SystemState(q2, st_.qd), frame)
            fd = (J2 - J1) / dt @ st_.qd
            assert np.abs(drift - fd).max() <= 1e-5


class TestEnergyAndIntegration:
    def test_quaternion_stays_unit(self, free_cube):
        q = free_cube.neutral_q()
        qd = np.array([2.0, -1.0, 0.5, 0.1, 0.0, -0.2])
        for _ in range(2000):
            q = integrate_state(free_cube, q, qd, 1e-3)
        assert abs(np.linalg.norm(q[3:7]) - 1.0) <= 1e-12

    def test_energy_drift_free_flight(self, free_cube):
        """Unforced, contact-free tumbling body: energy drift <= 0.1% over 1 s."""
        model = free_cube
        q = model.neutral_q()
        qd = np.array([3.0, 2.0, -1.0, 0.4, 0.0, 0.6])
        st_ = SystemState(q, qd)
        E0 = kinetic_energy(model, st_) + potential_energy(model, st_)
        dt = 2.5e-4
        for _ in range(4000):
            kin = Kinematics(model, st_)
            qdd = np.linalg.solve(kin.mass_matrix(), -kin.bias_forces())
            st_ = semi_implicit_step(model, st_, qdd, dt)
        E1 = kinetic_energy(model, st_) + potential_energy(model, st_)
        assert abs(E1 - E0) / abs(E0) <= 1e-3

    def test_energy_drift_double_pendulum(self):
        links = [
            LinkSpec("a", -1, REVOLUTE, axis=np.array([0, 1.0, 0]), mass=1.0,
                     com=np.array([0, 0, -0.5]), inertia=np.diag([0.02, 0.02, 1e-4])),
            LinkSpec("b", 0, REVOLUTE, axis=np.array([0, 1.0, 0]), t_pos=np.array([0, 0, -1.0]),
                     mass=1.0, com=np.array([0, 0, -0.5]), inertia=np.diag([0.02, 0.02, 1e-4])),
        ]
        model = RobotModel(links)
        st_ = SystemState(np.array([0.5, 0.25]), np.zeros(2))
        E0 = kinetic_energy(model, st_) + potential_energy(model, st_)
        dt = 2.5e-4
        for _ in range(4000):
            kin = Kinematics(model, st_)
            qdd = np.linalg.solve(kin.mass_matrix(), -kin.bias_forces())
            st_ = semi_implicit_step(model, st_, qdd, dt)
        E1 = kinetic_energy(model, st_) + potential_energy(model, st_)
        assert abs(E1 - E0) / max(abs(E0), 1e-9) <= 1e-3


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=25, deadline=None)
def test_mass_matrix_properties_random_states(seed):
    """M stays symmetric positive definite across random states (property)."""
    model, _ = compose_robots([RobotPlacement("r", (0.0, 0.0), 0.3)])
    rng = np.random.default_rng(seed)
    st_ = random_state(model, rng)
    M = mass_matrix(model, st_)
    assert np.abs(M - M.T).max() <= 1e-10
    assert np.linalg.eigvalsh(M).min() > 0
