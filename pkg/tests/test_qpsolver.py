import numpy as np
import pytest

from comanip.qpsolver import solve_qp

from oracle_qp import enumerate_qp, random_feasible_qp


class TestBasics:
    def test_unconstrained_zero(self):
        H = np.diag([2.0, 4.0])
        r = solve_qp(H, np.zeros(2))
        assert r.status == "optimal"
        assert np.allclose(r.x, 0.0, atol=1e-9)

    def test_unconstrained_newton(self):
        H = np.diag([2.0, 4.0])
        g = np.array([-2.0, 8.0])
        r = solve_qp(H, g)
        assert np.allclose(r.x, [1.0, -2.0], atol=1e-9)

    def test_one_dimensional_bound(self):
        # min x^2 s.t. x >= 3
        r = solve_qp(np.array([[2.0]]), np.zeros(1),
                     C=np.array([[1.0]]), l=np.array([3.0]), u=np.array([np.inf]))
        assert r.status == "optimal"
        assert r.x[0] == pytest.approx(3.0, abs=1e-7)

    def test_two_sided_row(self):
        # min (x-5)^2 s.t. -1 <= x <= 2
        r = solve_qp(np.array([[2.0]]), np.array([-10.0]),
                     C=np.array([[1.0]]), l=np.array([-1.0]), u=np.array([2.0]))
        assert r.x[0] == pytest.approx(2.0, abs=1e-7)

    def test_equality_constraint(self):
        # min x^2 + y^2 s.t. x + y = 2  ->  (1, 1)
        r = solve_qp(2 * np.eye(2), np.zeros(2),
                     A_eq=np.array([[1.0, 1.0]]), b_eq=np.array([2.0]))
        assert np.allclose(r.x, [1.0, 1.0], atol=1e-7)

    def test_infeasible_bounds_detected(self):
        r = solve_qp(np.eye(1), np.zeros(1),
                     C=np.array([[1.0]]), l=np.array([3.0]), u=np.array([2.0]))
        assert r.status == "infeasible"
        assert r.most_violated == 0

    def test_infeasible_rows_detected(self):
        # x >= 3 and x <= 2 given as separate rows
        C = np.array([[1.0], [1.0]])
        r = solve_qp(np.eye(1), np.zeros(1), C=C,
                     l=np.array([3.0, -np.inf]), u=np.array([np.inf, 2.0]))
        assert r.status == "infeasible"
        assert r.most_violated in (0, 1)

    def test_empty_problem(self):
        r = solve_qp(np.zeros((0, 0)), np.zeros(0))
        assert r.status == "optimal" and r.x.size == 0


class TestAgainstEnumerationOracle:
    @pytest.mark.parametrize("seed", range(40))
    def test_random_instances(self, seed):
        rng = np.random.default_rng(seed)
        H, g, C, l, u = random_feasible_qp(rng, n_max=12, m_max=8)
        r = solve_qp(H, g, C, l, u)
        assert r.status == "optimal", f"seed {seed}: {r.status} {r.residuals}"
        x_o, obj_o = enumerate_qp(H, g, C, l, u)
        assert x_o is not None
        scale = max(1.0, abs(obj_o))
        assert abs(r.objective - obj_o) <= 1e-6 * scale

    def test_kkt_residuals_reported(self):
        rng = np.random.default_rng(123)
        H, g, C, l, u = random_feasible_qp(rng, n_max=20, m_max=10)
        r = solve_qp(H, g, C, l, u)
        assert r.residuals["stationarity"] <= 1e-6
        assert r.residuals["primal"] <= 1e-6
        assert r.residuals["complementarity"] <= 1e-6


class TestDeterminismAndWarmStart:
    def test_bitwise_determinism(self):
        rng = np.random.default_rng(7)
        H, g, C, l, u = random_feasible_qp(rng, n_max=15, m_max=10)
        r1 = solve_qp(H, g, C, l, u)
        r2 = solve_qp(H, g, C, l, u)
        assert np.array_equal(r1.x, r2.x)
        assert r1.iterations == r2.iterations

    def test_warm_start_same_solution(self):
        rng = np.random.default_rng(8)
        for seed in range(10):
            rng = np.random.default_rng(seed)
            H, g, C, l, u = random_feasible_qp(rng, n_max=10, m_max=6)
            r_cold = solve_qp(H, g, C, l, u)
            r_warm = solve_qp(H, g, C, l, u, x0=r_cold.x + 0.1 * rng.standard_normal(H.shape[0]))
            assert np.abs(r_cold.x - r_warm.x).max() <= 1e-6
            assert abs(r_cold.objective - r_warm.objective) <= 1e-8 * max(1.0, abs(r_cold.objective))
