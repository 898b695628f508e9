import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from gmmot.errors import DimensionMismatch, InfeasibleMarginals, NumericalStall
from gmmot.gaussian import Gaussian, gaussian_w2_squared
from gmmot.mixture import Gmm
from gmmot.oracles import brute_force_transport
from gmmot.synthetic import random_gmm
from gmmot.transport import (
    DualSolution,
    build_cost_matrix,
    gmm_wasserstein,
    solve_transport,
    verify_duality,
)


def gmm1d(weights, means, variances):
    return Gmm(np.array(weights, float), tuple(Gaussian([m], [[v]]) for m, v in zip(means, variances)))


def lp_reference(a, b, cost):
    n, m = cost.shape
    eq = np.zeros((n + m, n * m))
    for i in range(n):
        eq[i, i * m:(i + 1) * m] = 1
    for j in range(m):
        eq[n + j, j::m] = 1
    res = linprog(cost.reshape(-1), A_eq=eq, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    return res.fun


class TestCostMatrix:
    def test_self_has_zero_diagonal(self, rng):
        p = random_gmm(3, 2, rng)
        assert np.all(np.diag(build_cost_matrix(p, p)) <= 1e-12)

    def test_single_pair(self, rng):
        p, q = random_gmm(1, 3, rng), random_gmm(1, 3, rng)
        assert build_cost_matrix(p, q)[0, 0] == gaussian_w2_squared(p.components[0], q.components[0])

    def test_hand_example(self):
        cost = build_cost_matrix(gmm1d([1.0], [0.0], [1.0]), gmm1d([0.5, 0.5], [3.0, -3.0], [1.0, 1.0]))
        np.testing.assert_allclose(cost, [[9.0, 9.0]], rtol=1e-14)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatch):
            build_cost_matrix(random_gmm(1, 2, rng), random_gmm(1, 3, rng))


class TestSolveTransport:
    def test_one_by_one(self):
        plan, dual = solve_transport([1.0], [1.0], [[2.5]])
        np.testing.assert_array_equal(plan.flows, [[1.0]])
        assert plan.objective == 2.5
        assert (dual.alpha[0], dual.beta[0]) == (2.5, 0.0)

    def test_zero_diagonal(self):
        a = np.array([0.2, 0.5, 0.3])
        cost = np.array([[0, 1, 2], [3, 0, 1], [4, 5, 0]], float)
        plan, _ = solve_transport(a, a, cost)
        assert plan.objective == 0.0
        np.testing.assert_allclose(plan.flows, np.diag(a))

    def test_anti_diagonal_costs(self):
        plan, _ = solve_transport([0.5, 0.5], [0.5, 0.5], [[0, 1], [1, 0]])
        assert plan.objective == 0.0
        np.testing.assert_allclose(plan.flows, np.diag([0.5, 0.5]))

    def test_two_by_two_hand_example(self):
        a, b, cost = [0.7, 0.3], [0.4, 0.6], np.array([[1.0, 2.0], [3.0, 1.0]])
        oracle, _ = brute_force_transport(a, b, cost)
        assert oracle == pytest.approx(1.3, rel=1e-12)
        plan, _ = solve_transport(a, b, cost)
        assert plan.objective == pytest.approx(1.3, rel=1e-12)
        np.testing.assert_allclose(plan.flows, [[0.4, 0.3], [0.0, 0.3]], atol=1e-15)

    def test_zero_weights_are_reinserted(self):
        a = np.array([0.0, 0.6, 0.4])
        b = np.array([0.5, 0.0, 0.5])
        cost = np.array([[0.1, 2, 3], [1, 2, 0.5], [0.2, 1, 4]])
        plan, dual = solve_transport(a, b, cost)
        assert np.all(plan.flows[0] == 0) and np.all(plan.flows[:, 1] == 0)
        assert verify_duality(plan, dual, a, b, cost).passed
        assert plan.objective == pytest.approx(lp_reference(a, b, cost), rel=1e-12)

    def test_infeasible_marginals(self):
        with pytest.raises(InfeasibleMarginals):
            solve_transport([0.5, 0.5], [0.5, 0.4], np.ones((2, 2)))
        with pytest.raises(InfeasibleMarginals):
            solve_transport([1.5, -0.5], [1.0], np.ones((2, 1)))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            solve_transport([1.0], [1.0], np.ones((2, 1)))

    def test_pivot_budget(self):
        rng = np.random.default_rng(1)
        a, b = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
        with pytest.raises(NumericalStall):
            solve_transport(a, b, rng.uniform(size=(6, 6))[:, ::-1], max_pivots=0)

    def test_larger_instances_match_linprog(self, rng):
        for _ in range(20):
            n, m = rng.integers(5, 30, size=2)
            a, b = rng.dirichlet(np.ones(n) * 0.5), rng.dirichlet(np.ones(m) * 0.5)
            cost = np.round(rng.uniform(0, 5, (n, m)))
            plan, dual = solve_transport(a, b, cost)
            assert plan.objective == pytest.approx(lp_reference(a, b, cost), rel=1e-9, abs=1e-12)
            assert verify_duality(plan, dual, a, b, cost).passed
            assert plan.support_size <= n + m - 1


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 4), st.booleans())
def test_matches_enumeration(seed, n, m, integral):
    r = np.random.default_rng(seed)
    a, b = r.dirichlet(np.ones(n)), r.dirichlet(np.ones(m))
    cost = r.uniform(0.1, 10, (n, m))
    if integral:
        cost = np.round(cost)
    oracle, _ = brute_force_transport(a, b, cost)
    plan, dual = solve_transport(a, b, cost)
    assert plan.objective == pytest.approx(oracle, rel=1e-9)
    report = verify_duality(plan, dual, a, b, cost)
    assert report.passed, report
    assert plan.support_size <= n + m - 1


class TestVerifyDuality:
    def setup_method(self):
        self.a = np.array([0.3, 0.7])
        self.b = np.array([0.6, 0.4])
        self.cost = np.array([[1.0, 4.0], [2.0, 0.5]])

    def test_zero_dual_is_feasible(self):
        plan, _ = solve_transport(self.a, self.b, self.cost)
        zero = DualSolution(np.zeros(2), np.zeros(2))
        report = verify_duality(plan, zero, self.a, self.b, self.cost)
        assert report.dual_feasible and report.weak_duality_ok
        assert report.dual_objective == 0.0 <= report.primal_objective

    def test_optimal_pair_closes_gap(self):
        plan, dual = solve_transport(self.a, self.b, self.cost)
        report = verify_duality(plan, dual, self.a, self.b, self.cost)
        assert report.passed
        assert abs(report.primal_objective - report.dual_objective) <= 1e-7 * (1 + report.primal_objective)
        assert "gamma" in report.note

    def test_perturbed_dual_reports_violations(self):
        plan, dual = solve_transport(self.a, self.b, self.cost)
        bumped = DualSolution(dual.alpha + np.array([10.0, 0.0]), dual.beta)
        report = verify_duality(plan, bumped, self.a, self.b, self.cost)
        assert not report.dual_feasible and not report.passed
        assert report.violated_pairs == [(0, 0), (0, 1)]

    def test_infeasible_plan_is_reported(self):
        plan, dual = solve_transport(self.a, self.b, self.cost)
        broken = type(plan)(plan.flows * 1.1, plan.objective)
        assert not verify_duality(broken, dual, self.a, self.b, self.cost).primal_feasible


class TestGmmWasserstein:
    def test_identical(self, rng):
        p = random_gmm(3, 3, rng)
        assert gmm_wasserstein(p, p)[0] <= 1e-7

    def test_single_components_reduce_to_gaussian(self, rng):
        p, q = random_gmm(1, 4, rng), random_gmm(1, 4, rng)
        exact = np.sqrt(gaussian_w2_squared(p.components[0], q.components[0]))
        assert gmm_wasserstein(p, q)[0] == pytest.approx(exact, rel=1e-14)

    def test_hand_example(self):
        d, plan = gmm_wasserstein(gmm1d([1.0], [0.0], [1.0]), gmm1d([0.5, 0.5], [3.0, -3.0], [1.0, 1.0]))
        assert d == pytest.approx(3.0, rel=1e-14)
        np.testing.assert_allclose(plan.flows, [[0.5, 0.5]])

    def test_linear_convention(self):
        p = gmm1d([0.5, 0.5], [0.0, 10.0], [1.0, 1.0])
        q = gmm1d([1.0], [4.0], [1.0])
        # unsquared costs (4 and 6), each carrying half the mass
        assert gmm_wasserstein(p, q, "linear")[0] == pytest.approx(5.0, rel=1e-14)
        assert gmm_wasserstein(p, q, "squared")[0] == pytest.approx(np.sqrt(0.5 * 16 + 0.5 * 36), rel=1e-14)
        with pytest.raises(ValueError):
            gmm_wasserstein(p, q, "cubic")

    def test_scale_equivariance(self, rng):
        for _ in range(20):
            p, q = random_gmm(3, 2, rng), random_gmm(2, 2, rng)
            c = float(rng.uniform(-4, 4))
            scaled = [Gmm.from_arrays(g.weights, c * g.means, c * c * g.covariances) for g in (p, q)]
            assert gmm_wasserstein(*scaled)[0] == pytest.approx(abs(c) * gmm_wasserstein(p, q)[0], rel=1e-7)

    def test_plan_support(self, rng):
        for _ in range(20):
            p, q = random_gmm(int(rng.integers(1, 6)), 2, rng), random_gmm(int(rng.integers(1, 6)), 2, rng)
            _, plan = gmm_wasserstein(p, q)
            assert plan.support_size <= p.n_components + q.n_components - 1


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_metric_axioms(seed):
    r = np.random.default_rng(seed)
    d = int(r.integers(1, 5))
    p, q, s = (random_gmm(int(r.integers(1, 4)), d, r, spread=2.0) for _ in range(3))
    pq, qp = gmm_wasserstein(p, q)[0], gmm_wasserstein(q, p)[0]
    assert abs(pq - qp) <= 1e-9 * max(pq, qp)
    assert gmm_wasserstein(p, p)[0] <= 1e-7
    assert gmm_wasserstein(p, s)[0] <= pq + gmm_wasserstein(q, s)[0] + 1e-7
