import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from comanip.contact import (ContactSet, FootContact, HandContact,
                             build_projection, complete_grasp_matrix,
                             constraint_jacobian, detect_slip, grasp_nullspace,
                             infer_acceleration, infer_constraint_wrench,
                             object_jacobian, partial_grasp_matrix,
                             projection_drift, projector, rigid_grasp_jacobian)
from comanip.model import (FLOATING, Kinematics, LinkSpec, RobotModel,
                           SystemState)
from comanip.robots import build_scene
from comanip.spatial import rot_exp, skew

from conftest import random_state

RNG = np.random.default_rng(99)


def rand_rotation(rng):
    return rot_exp(rng.standard_normal(3))


def two_hand_model():
    """Two free 'hand' bodies rigidly holding a virtual box between them."""
    links = [
        LinkSpec("h1", -1, FLOATING, mass=2.0, inertia=0.02 * np.eye(3)),
        LinkSpec("h2", -1, FLOATING, mass=2.0, inertia=0.02 * np.eye(3)),
    ]
    m = RobotModel(links)
    m.add_frame("hand1", "h1")
    m.add_frame("hand2", "h2")
    q = m.neutral_q()
    q[0:3] = [-0.3, 0.0, 0.5]
    q[7:10] = [0.3, 0.0, 0.5]
    hc1 = HandContact("hand1", rot=np.eye(3), lever=np.array([-0.3, 0.0, 0.0]))
    hc2 = HandContact("hand2", rot=np.eye(3), lever=np.array([0.3, 0.0, 0.0]))
    return m, q, ContactSet(hand_contacts=[hc1, hc2])


def rigid_qd_for(model, kin, contacts, t_obj):
    """State velocity moving every hand with the common object twist t_obj
    ((linear; angular) in the grasp reference frame)."""
    from comanip.contact import stacked_hand_jacobian
    G = complete_grasp_matrix(contacts)
    J_ee, _ = stacked_hand_jacobian(kin, contacts)
    qd, *_ = np.linalg.lstsq(J_ee, G.T @ t_obj, rcond=None)
    return qd


class TestPartialGraspMatrix:
    def test_identity(self):
        assert np.allclose(partial_grasp_matrix(np.eye(3), np.zeros(3)), np.eye(6))

    def test_lever_block(self):
        G = partial_grasp_matrix(np.eye(3), np.array([1.0, 0, 0]))
        S_expected = np.array([[0, 0, 0], [0, 0, -1.0], [0, 1.0, 0]])
        assert np.allclose(G[3:, :3], S_expected)
        assert np.allclose(G[:3, :3], np.eye(3))
        assert np.allclose(G[3:, 3:], np.eye(3))

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            partial_grasp_matrix(np.eye(3) * 1.01, np.zeros(3))

    @pytest.mark.parametrize("seed", range(10))
    def test_twist_transport_oracle(self, seed):
        """G_i maps the contact twist of a rigid body to the object twist
        ((angular; linear) ordering, independent point-velocity oracle)."""
        rng = np.random.default_rng(seed)
        R = rand_rotation(rng)
        r = rng.standard_normal(3)
        w_o = rng.standard_normal(3)
        v_o = rng.standard_normal(3)
        # contact point rides on the object: v_c = v_o + w x r, in contact coords
        w_c = R.T @ w_o
        v_c = R.T @ (v_o + np.cross(w_o, r))
        out = partial_grasp_matrix(R, r) @ np.concatenate([w_c, v_c])
        assert np.allclose(out, np.concatenate([w_o, v_o]), atol=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_object_twist_to_contact_twists(self, seed):
        """Read as its transpose, G distributes (linear; angular) object
        twists to the contacts - the stacked form used by the constraint."""
        rng = np.random.default_rng(seed)
        R = rand_rotation(rng)
        r = rng.standard_normal(3)
        v_o = rng.standard_normal(3)
        w_o = rng.standard_normal(3)
        tc = partial_grasp_matrix(R, r).T @ np.concatenate([v_o, w_o])
        v_expected = R.T @ (v_o + np.cross(w_o, r))
        assert np.allclose(tc[:3], v_expected, atol=1e-12)
        assert np.allclose(tc[3:], R.T @ w_o, atol=1e-12)


class TestCompleteGraspMatrix:
    def test_single_contact(self):
        hc = HandContact("h", rot=np.eye(3), lever=np.array([0.1, 0.2, 0.0]))
        cs = ContactSet(hand_contacts=[hc])
        assert np.allclose(complete_grasp_matrix(cs), partial_grasp_matrix(hc.rot, hc.lever))

    def test_antipodal_cube_contacts(self):
        """Two mirrored contacts on the 0.6 m cube faces."""
        r = np.array([0.3, 0.0, 0.0])
        cs = ContactSet(hand_contacts=[
            HandContact("h1", rot=np.eye(3), lever=-r),
            HandContact("h2", rot=np.eye(3), lever=+r),
        ])
        G = complete_grasp_matrix(cs)
        assert G.shape == (6, 12)
        assert np.allclose(G[3:, :3], skew(-r))
        assert np.allclose(G[3:, 6:9], skew(r))
        assert np.allclose(G[3:, :3], -G[3:, 6:9])

    def test_empty_grasp_rejected(self):
        with pytest.raises(ValueError):
            complete_grasp_matrix(ContactSet())

    def test_nullspace_annihilation(self):
        rng = np.random.default_rng(5)
        cs = ContactSet(hand_contacts=[
            HandContact("a", rot=rand_rotation(rng), lever=rng.standard_normal(3)),
            HandContact("b", rot=rand_rotation(rng), lever=rng.standard_normal(3)),
            HandContact("c", rot=rand_rotation(rng), lever=rng.standard_normal(3)),
        ])
        G = complete_grasp_matrix(cs)
        N = grasp_nullspace(G)
        for _ in range(100):
            x = rng.standard_normal(18)
            assert np.abs(G @ (N @ x)).max() <= 1e-9


class TestRigidGraspJacobian:
    def test_single_contact_no_relative_motion(self):
        rng = np.random.default_rng(2)
        G = partial_grasp_matrix(rand_rotation(rng), rng.standard_normal(3))
        J_ee = rng.standard_normal((6, 10))
        assert np.abs(rigid_grasp_jacobian(G, J_ee)).max() <= 1e-12

    def test_two_hand_common_twist_annihilated(self):
        model, q, cs = two_hand_model()
        kin = Kinematics(model, SystemState(q, np.zeros(12)), gravity=(0, 0, 0))
        rng = np.random.default_rng(3)
        for _ in range(5):
            qd = rigid_qd_for(model, kin, cs, rng.standard_normal(6))
            J_c, *_ = constraint_jacobian(kin, cs)
            assert np.abs(J_c @ qd).max() <= 1e-8

    def test_wall_contact_rows(self):
        """Remark-2 style wall: zero Jacobian block, but its grasp-matrix
        columns make the wall rows of J_c constrain the hands."""
        sc = build_scene(environment_wall=True)
        st_ = SystemState(sc.q0, np.zeros(sc.nv))
        kin = Kinematics(sc.model, st_, gravity=(0, 0, 0))
        J_c, _, G, N_G, J_ee, _ = constraint_jacobian(kin, sc.contacts)
        n_feet = sc.contacts.n_feet
        wall = sc.contacts.hand_slice(2)       # third grasp contact is the wall
        assert np.all(J_ee[12:18] == 0.0)      # zero hand-Jacobian block
        assert np.abs(J_c[wall]).max() > 1e-3  # but rows are active through G
        # with the wall welded, no common object twist remains feasible
        t = np.array([1.0, 0, 0, 0, 0, 0])
        qd = rigid_qd_for(sc.model, kin, sc.contacts, t)
        assert np.abs(J_c @ qd).max() > 1e-3


class TestObjectJacobian:
    def test_single_contact_at_com(self):
        rng = np.random.default_rng(4)
        J_ee = rng.standard_normal((6, 12))
        assert np.allclose(object_jacobian(np.eye(6), J_ee), J_ee)

    def test_two_hand_twist_recovery(self):
        model, q, cs = two_hand_model()
        kin = Kinematics(model, SystemState(q, np.zeros(12)), gravity=(0, 0, 0))
        from comanip.contact import stacked_hand_jacobian
        G = complete_grasp_matrix(cs)
        J_ee, _ = stacked_hand_jacobian(kin, cs)
        J_o = object_jacobian(G, J_ee)
        rng = np.random.default_rng(5)
        for _ in range(5):
            t = rng.standard_normal(6)
            qd = rigid_qd_for(model, kin, cs, t)
            assert np.abs(J_o @ qd - t).max() <= 1e-9

    def test_internal_motion_invariance(self):
        """Adding internal-motion components (nullspace of (G^+)^T) to the
        hand twists leaves the object twist unchanged."""
        model, q, cs = two_hand_model()
        kin = Kinematics(model, SystemState(q, np.zeros(12)), gravity=(0, 0, 0))
        from comanip.contact import stacked_hand_jacobian
        G = complete_grasp_matrix(cs)
        N_G = grasp_nullspace(G)
        J_ee, _ = stacked_hand_jacobian(kin, cs)
        J_o = object_jacobian(G, J_ee)
        rng = np.random.default_rng(6)
        for _ in range(10):
            qd = rigid_qd_for(model, kin, cs, rng.standard_normal(6))
            dqd, *_ = np.linalg.lstsq(J_ee, N_G @ rng.standard_normal(12), rcond=None)
            assert np.abs(J_o @ (qd + dqd) - J_o @ qd).max() <= 1e-9


class TestBuildProjection:
    def test_no_contacts(self, free_cube):
        st_ = SystemState(free_cube.neutral_q(), np.zeros(6))
        b = build_projection(free_cube, st_, ContactSet())
        assert np.allclose(b.P, np.eye(6))
        assert np.allclose(b.B, np.eye(6))
        assert b.K == 0 and b.rank_c == 0

    def test_single_row_projector(self):
        J_c = np.zeros((1, 5))
        J_c[0, 0] = 1.0
        P = projector(J_c)
        assert np.allclose(P, np.diag([0.0, 1, 1, 1, 1]))

    def test_fully_actuated_B_identity(self):
        """S = I reduces the underactuation matrix to exactly B = I."""
        model, q, cs = two_hand_model()
        model.actuated[:] = True
        model.n_act = 12
        model.tau_min = -np.full(12, np.inf)
        model.tau_max = np.full(12, np.inf)
        b = build_projection(model, SystemState(q, np.zeros(12)), cs, gravity=(0, 0, 0))
        assert np.abs(b.B - np.eye(12)).max() <= 1e-10

    def test_bundle_invariants_scene(self, scene):
        rng = np.random.default_rng(8)
        for _ in range(5):
            st_ = random_state(scene.model, rng, base_scale=0.05, joint_scale=0.15,
                               vel_scale=0.0)
            b = build_projection(scene.model, st_, scene.contacts)
            D = scene.model.nv
            assert np.abs(b.P @ b.P - b.P).max() <= 1e-9
            assert np.abs(b.P - b.P.T).max() <= 1e-9
            assert np.abs(b.P @ b.J_c.T).max() <= 1e-9
            # (I - P) J_c^T = J_c^T (used to rewrite the QP objective)
            assert np.abs((np.eye(D) - b.P) @ b.J_c.T - b.J_c.T).max() <= 1e-9
            # M_c and Mbar well conditioned
            assert np.linalg.cond(b.M_c) < 1e8
            assert np.linalg.cond(b.Mbar) < 1e8

    def test_consistent_velocity_in_motion_space(self, scene):
        rng = np.random.default_rng(9)
        st_ = SystemState(scene.q0, np.zeros(scene.nv))
        b = build_projection(scene.model, st_, scene.contacts)
        for _ in range(20):
            qd = b.P @ rng.standard_normal(scene.nv)
            assert np.abs((np.eye(scene.nv) - b.P) @ qd).max() <= 1e-8

    def test_internal_force_zero_net_wrench(self, scene):
        st_ = SystemState(scene.q0, np.zeros(scene.nv))
        b = build_projection(scene.model, st_, scene.contacts)
        rng = np.random.default_rng(10)
        for _ in range(100):
            lam_ee = b.N_G @ rng.standard_normal(b.N_G.shape[0])
            assert np.abs(b.G @ lam_ee).max() <= 1e-9

    def test_B_annihilates_virtual_joints(self, scene):
        """(I-S)[ [PS]^+ P tau_M + B (I-P) tau_C ] = 0 for random torques."""
        st_ = SystemState(scene.q0, np.zeros(scene.nv))
        b = build_projection(scene.model, st_, scene.contacts)
        rng = np.random.default_rng(11)
        ImS = 1.0 - b.S_diag
        for _ in range(50):
            tau_M = rng.standard_normal(scene.nv)
            tau_C = rng.standard_normal(scene.nv)
            cmd = b.PS_pinv @ (b.P @ tau_M) + b.B @ ((np.eye(scene.nv) - b.P) @ tau_C)
            assert np.abs(ImS * cmd).max() <= 1e-9


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=20, deadline=None)
def test_projector_orthogonal_split_property(seed):
    """||P x||^2 + ||(I-P) x||^2 == ||x||^2 for random constraint sets."""
    rng = np.random.default_rng(seed)
    K = int(rng.integers(1, 10))
    D = int(rng.integers(K, 15))
    J_c = rng.standard_normal((K, D))
    P = projector(J_c)
    x = rng.standard_normal(D)
    lhs = np.linalg.norm(P @ x) ** 2 + np.linalg.norm((np.eye(D) - P) @ x) ** 2
    assert abs(lhs - np.linalg.norm(x) ** 2) <= 1e-9 * max(1.0, np.linalg.norm(x) ** 2)
    assert np.abs(P @ P - P).max() <= 1e-9
    assert np.abs(P - P.T).max() <= 1e-9


class TestProjectionDrift:
    def test_zero_velocity(self, scene):
        st_ = SystemState(scene.q0, np.zeros(scene.nv))
        v, path = projection_drift(scene.model, st_, scene.contacts)
        assert np.all(v == 0.0) and path == "static"

    def test_configuration_independent_constraint(self):
        """A wall-welded free box: J_c is constant, so Pdot qd = 0."""
        box = RobotModel([LinkSpec("b", -1, FLOATING, mass=1.0, inertia=0.06 * np.eye(3))])
        box.add_frame("b", 0)
        wall = HandContact(frame=None, rot=np.eye(3), lever=np.array([0.3, 0, 0]))
        hand = HandContact(frame="b", rot=np.eye(3), lever=np.array([-0.3, 0, 0]))
        cs = ContactSet(hand_contacts=[hand], environment_contacts=[wall])
        st_ = SystemState(box.neutral_q(), 0.1 * np.ones(6))
        v, path = projection_drift(box, st_, cs, mode="fd")
        assert np.abs(v).max() <= 1e-6

    def test_analytic_vs_fd_full_rank(self, scene):
        """Feet-only contact set has full row rank; both paths must agree."""
        cs = ContactSet(foot_contacts=scene.contacts.foot_contacts)
        rng = np.random.default_rng(12)
        for _ in range(10):
            st_ = random_state(scene.model, rng, base_scale=0.05, joint_scale=0.2,
                               vel_scale=0.4)
            va, pa = projection_drift(scene.model, st_, cs, mode="analytic")
            vf, pf = projection_drift(scene.model, st_, cs, mode="fd")
            assert pa == "analytic" and pf == "fd"
            assert np.abs(va - vf).max() <= 1e-5

    def test_consistent_shortcut_matches_fd(self, scene):
        rng = np.random.default_rng(13)
        st0 = SystemState(scene.q0, np.zeros(scene.nv))
        b0 = build_projection(scene.model, st0, scene.contacts)
        for _ in range(5):
            qd = b0.P @ rng.standard_normal(scene.nv)
            st_ = SystemState(scene.q0, qd)
            va, pa = projection_drift(scene.model, st_, scene.contacts, mode="auto")
            vf, _ = projection_drift(scene.model, st_, scene.contacts, mode="fd")
            assert pa == "consistent"
            assert np.abs(va - vf).max() <= 1e-5


def reduced_kkt(bundle, tau, F_ext=None, J_x=None):
    """Independent oracle: Lagrange-multiplier KKT solve of the same system."""
    D, K = bundle.D, bundle.K
    rhs_top = bundle.S_diag * tau - bundle.h
    if F_ext is not None and J_x is not None:
        rhs_top = rhs_top + J_x.T @ F_ext
    A = np.block([[bundle.M, -bundle.J_c.T],
                  [bundle.J_c, np.zeros((K, K))]])
    rhs = np.concatenate([rhs_top, -bundle.jdot_qd])
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return sol[:D], sol[D:]


class TestInference:
    def test_free_fall(self, free_cube):
        st_ = SystemState(free_cube.neutral_q(), np.zeros(6))
        b = build_projection(free_cube, st_, ContactSet())
        qdd = infer_acceleration(b, np.zeros(6))
        assert np.allclose(qdd, [0, 0, 0, 0, 0, -9.81], atol=1e-12)
        assert infer_constraint_wrench(b, np.zeros(6)).size == 0

    def test_static_normal_force(self):
        """1 kg body resting on a contact at its COM supports 9.81 N."""
        box = RobotModel([LinkSpec("b", -1, FLOATING, mass=1.0, inertia=0.06 * np.eye(3))])
        box.add_frame("b", 0)
        cs = ContactSet(foot_contacts=[FootContact(frame="b")])
        st_ = SystemState(box.neutral_q(), np.zeros(6))
        b = build_projection(box, st_, cs)
        lam = infer_constraint_wrench(b, np.zeros(6))
        assert lam == pytest.approx([0.0, 0.0, 9.81], abs=1e-9)

    def test_constraint_acceleration_identity(self, scene):
        rng = np.random.default_rng(14)
        st0 = SystemState(scene.q0, np.zeros(scene.nv))
        b0 = build_projection(scene.model, st0, scene.contacts)
        for _ in range(5):
            qd = b0.P @ rng.standard_normal(scene.nv)
            st_ = SystemState(scene.q0, qd)
            b = build_projection(scene.model, st_, scene.contacts)
            tau = rng.standard_normal(scene.nv)
            qdd = infer_acceleration(b, tau)
            assert np.abs(b.J_c @ qdd + b.jdot_qd).max() <= 1e-7

    @pytest.mark.parametrize("with_force", [False, True])
    def test_matches_kkt_oracle(self, scene, with_force):
        rng = np.random.default_rng(15)
        st0 = SystemState(scene.q0, np.zeros(scene.nv))
        b0 = build_projection(scene.model, st0, scene.contacts)
        for _ in range(10):
            qd = b0.P @ rng.standard_normal(scene.nv)
            st_ = SystemState(scene.q0, qd)
            b = build_projection(scene.model, st_, scene.contacts)
            tau = 5.0 * rng.standard_normal(scene.nv)
            F = rng.standard_normal(6) if with_force else None
            J_x = b.J_o if with_force else None
            qdd = infer_acceleration(b, tau, F, J_x)
            lam = infer_constraint_wrench(b, tau, F, J_x)
            qdd_o, lam_o = reduced_kkt(b, tau, F, J_x)
            assert np.abs(qdd - qdd_o).max() <= 1e-6 * max(1.0, np.abs(qdd_o).max())
            assert np.abs(lam - lam_o).max() <= 1e-6 * max(1.0, np.abs(lam_o).max())


class TestDetectSlip:
    def test_consistent_velocity_no_slip(self, scene):
        rng = np.random.default_rng(16)
        st0 = SystemState(scene.q0, np.zeros(scene.nv))
        b = build_projection(scene.model, st0, scene.contacts)
        qd = b.P @ rng.standard_normal(scene.nv)
        slipping, res = detect_slip(b, qd, tol=1e-3)
        assert not slipping
        assert res.shape == (b.K,)

    def test_injected_hand_velocity_detected(self, scene):
        st0 = SystemState(scene.q0, np.zeros(scene.nv))
        b = build_projection(scene.model, st0, scene.contacts)
        # relative hand velocity of 0.01 m/s along the grasp axis
        qd, *_ = np.linalg.lstsq(
            b.J_ee, np.concatenate([[0.01, 0, 0, 0, 0, 0], np.zeros(6)]), rcond=None)
        slipping, _ = detect_slip(b, qd, tol=1e-3)
        assert slipping

    def test_no_contacts(self, free_cube):
        st_ = SystemState(free_cube.neutral_q(), np.ones(6))
        b = build_projection(free_cube, st_, ContactSet())
        slipping, res = detect_slip(b, st_.qd)
        assert not slipping and res.size == 0
