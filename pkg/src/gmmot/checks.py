"""Oracle suites shared by ``gmmot selftest`` and the acceptance tests.

Each suite draws its instances from a named sub-seed, compares the library
against an independent reference (enumeration, sampling, algebraic
identities) and returns a :class:`SuiteResult`. ``values`` collects every
number the suite computed so repeated runs can be compared bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .classifier import EvalProtocol, evaluate
from .gaussian import Gaussian, gaussian_w2_squared
from .mixture import FitConfig, fit
from .oracles import brute_force_transport
from .seeding import stage_rng, stage_seed
from .synthetic import classification_dataset, random_gmm, separated_class_models
from .transport import TransportPlan, DualSolution, gmm_wasserstein, solve_transport, verify_duality
from .wasserstein1d import (
    check_rearrangement_inequality,
    empirical_wn,
    empirical_wn_bootstrap_se,
    sample_gmm,
)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    checked: int
    failures: list = field(default_factory=list)
    values: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        extra = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}"
                          for k, v in self.detail.items())
        return f"[{verdict}] {self.name}: {self.checked} checked, {len(self.failures)} failed" + (
            f" ({extra})" if extra else "")


def _result(name, checked, failures, values, **detail) -> SuiteResult:
    return SuiteResult(name, not failures, checked, failures, values, detail)


def transport_instances(count: int, seed: int = 0, max_size: int = 4):
    """Random small transportation problems, some with ties and zero weights."""
    rng = stage_rng(seed, "transport")
    for k in range(count):
        n, m = (int(v) for v in rng.integers(1, max_size + 1, size=2))
        a = rng.dirichlet(np.ones(n))
        b = rng.dirichlet(np.ones(m))
        if k % 7 == 3 and n > 1:
            a[int(rng.integers(n))] = 0.0
            a /= a.sum()
        cost = rng.uniform(0.05, 10.0, size=(n, m))
        if k % 5 == 2:
            cost = np.round(cost)
        yield a, b, cost


def transport_suite(count: int = 200, seed: int = 0, rtol: float = 1e-9,
                    slack_tol: float = 1e-7) -> SuiteResult:
    failures, values = [], []
    worst = 0.0
    for k, (a, b, cost) in enumerate(transport_instances(count, seed)):
        plan, dual = solve_transport(a, b, cost)
        oracle, _ = brute_force_transport(a, b, cost)
        rel = abs(plan.objective - oracle) / max(abs(oracle), 1e-300)
        worst = max(worst, rel)
        report = verify_duality(plan, dual, a, b, cost, slack_tol=slack_tol)
        values += [plan.objective, oracle]
        if rel > rtol:
            failures.append(f"instance {k}: objective {plan.objective!r} vs enumeration {oracle!r}")
        if not report.slackness_ok:
            failures.append(f"instance {k}: complementary slackness off by {report.worst_slackness:.3g}")
        if plan.support_size > a.size + b.size - 1:
            failures.append(f"instance {k}: {plan.support_size} positive flows")
    return _result("transport", count, failures, values, worst_rel_error=worst)


def duality_suite(count: int = 200, seed: int = 0, feas_tol: float = 1e-9,
                  gap_rtol: float = 1e-7) -> SuiteResult:
    failures, values = [], []
    worst_gap = 0.0
    for k, (a, b, cost) in enumerate(transport_instances(count, seed)):
        plan, dual = solve_transport(a, b, cost)
        report = verify_duality(plan, dual, a, b, cost, feas_tol=feas_tol, gap_rtol=gap_rtol)
        gap = abs(report.primal_objective - report.dual_objective) / (1.0 + abs(report.primal_objective))
        worst_gap = max(worst_gap, gap)
        values += [report.dual_objective, report.worst_dual_violation]
        if not (report.dual_feasible and report.gap_ok and report.primal_feasible):
            failures.append(f"instance {k}: dual violation {report.worst_dual_violation:.3g}, gap {gap:.3g}")
        zero = DualSolution(np.zeros(a.size), np.zeros(b.size))
        zero_report = verify_duality(plan, zero, a, b, cost, feas_tol=feas_tol, gap_rtol=gap_rtol)
        if not (zero_report.dual_feasible and zero_report.weak_duality_ok):
            failures.append(f"instance {k}: all-zero dual rejected")
    return _result("duality", count, failures, values, worst_rel_gap=worst_gap)


def gaussian_sampling_suite(count: int = 50, samples: int = 100_000, seed: int = 0,
                            rel_floor: float = 0.02, n_se: float = 3.0, n_boot: int = 20) -> SuiteResult:
    """Closed-form 1-D Gaussian W2 against the empirical quantile estimate."""
    rng = stage_rng(seed, "gaussian-pairs")
    failures, values = [], []
    worst = 0.0
    for k in range(count):
        m1, m2 = rng.uniform(-5, 5, size=2)
        s1, s2 = rng.uniform(0.2, 3.0, size=2)
        exact = math.sqrt(gaussian_w2_squared(Gaussian([m1], [[s1 * s1]]), Gaussian([m2], [[s2 * s2]])))
        draw = stage_rng(seed, "gaussian-samples", k)
        x = m1 + s1 * draw.standard_normal(samples)
        y = m2 + s2 * draw.standard_normal(samples)
        est = empirical_wn(x, y, 2)
        se = empirical_wn_bootstrap_se(x, y, 2, n_boot, stage_seed(seed, "gaussian-boot", k))
        tol = max(rel_floor * exact, n_se * se)
        worst = max(worst, abs(est - exact) / tol)
        values += [exact, est, se]
        if abs(est - exact) > tol:
            failures.append(f"pair {k}: closed form {exact:.6g}, empirical {est:.6g} (tol {tol:.3g})")
    return _result("sampling", count, failures, values, worst_error_over_tol=worst)


def _random_triple(rng):
    d = int(rng.integers(1, 5))
    return [random_gmm(int(rng.integers(1, 4)), d, rng, spread=2.0, eig_range=(0.1, 3.0))
            for _ in range(3)]


def default_distance(p, q) -> float:
    return gmm_wasserstein(p, q, "squared")[0]


def metric_suite(count: int = 100, seed: int = 0, distance: Callable = default_distance,
                 sym_rtol: float = 1e-9, identity_tol: float = 1e-7, triangle_slack: float = 1e-7) -> SuiteResult:
    rng = stage_rng(seed, "metric")
    failures, values = [], []
    for k in range(count):
        p, q, r = _random_triple(rng)
        pq, qp = distance(p, q), distance(q, p)
        qr, pr, pp = distance(q, r), distance(p, r), distance(p, p)
        values += [pq, qp, qr, pr, pp]
        if abs(pq - qp) > sym_rtol * max(pq, qp):
            failures.append(f"triple {k}: asymmetric {pq!r} vs {qp!r}")
        if pp > identity_tol:
            failures.append(f"triple {k}: distance(p, p) = {pp:.3g}")
        if pr > pq + qr + triangle_slack:
            failures.append(f"triple {k}: triangle {pr:.6g} > {pq:.6g} + {qr:.6g}")
    return _result("metric", count, failures, values)


def upper_bound_suite(count: int = 30, samples: int = 100_000, seed: int = 0, n_se: float = 3.0,
                      n_boot: int = 20) -> SuiteResult:
    """The component-restricted distance never falls below the sampled true W2."""
    rng = stage_rng(seed, "upper-bound")
    failures, values = [], []
    for k in range(count):
        p, q = (random_gmm(int(rng.integers(1, 4)), 1, rng, center=rng.uniform(-3, 3, 1),
                           spread=2.0, eig_range=(0.04, 4.0)) for _ in range(2))
        approx = gmm_wasserstein(p, q)[0]
        x = sample_gmm(p, samples, stage_seed(seed, "upper-bound-p", k))
        y = sample_gmm(q, samples, stage_seed(seed, "upper-bound-q", k))
        est = empirical_wn(x, y, 2)
        se = empirical_wn_bootstrap_se(x, y, 2, n_boot, stage_seed(seed, "upper-bound-boot", k))
        values += [approx, est, se]
        if approx < est - n_se * se:
            failures.append(f"pair {k}: approximate {approx:.6g} < empirical {est:.6g} - {n_se} * {se:.3g}")
    return _result("upper_bound", count, failures, values)


def rearrangement_suite(count: int = 10_000, seed: int = 0) -> SuiteResult:
    rng = stage_rng(seed, "rearrangement")
    failures, values = [], []
    for k in range(count):
        x1, y1 = np.sort(rng.uniform(-10, 10, 2))
        y2, x2 = np.sort(rng.uniform(-10, 10, 2))
        if not (x1 < y1 and y2 < x2):
            continue
        order = int(rng.integers(1, 4))
        ok = check_rearrangement_inequality(float(x1), float(x2), float(y1), float(y2), order)
        values.append(float(ok))
        if not ok:
            failures.append(f"quadruple {k}: {(x1, y1, x2, y2)} order {order}")
    return _result("rearrangement", len(values), failures, values)


def em_monotonicity_suite(count: int = 100, seed: int = 0, slack: float = 1e-8) -> SuiteResult:
    """Log-likelihood traces over random data, both well-posed and degenerate."""
    rng = stage_rng(seed, "em")
    failures, values = [], []
    worst = 0.0
    for k in range(count):
        d = int(rng.integers(1, 9))
        n = int(rng.integers(1, 6))
        if k % 3 == 0:
            # few rows per component: regularisation is active
            rows = int(rng.integers(n, 4 * n + 10))
            x = rng.standard_normal((rows, d))
            if k % 2:
                x = np.round(x)
        else:
            rows = int(rng.integers(max(n, 50), 2001))
            blobs = int(rng.integers(1, 6))
            centers = rng.normal(0, 4, (blobs, d))
            x = centers[rng.integers(blobs, size=rows)] + rng.standard_normal((rows, d)) * rng.uniform(0.1, 2, d)
        config = FitConfig(n_components=n, covariance_type="full" if k % 4 else "diagonal",
                           seed=int(rng.integers(2**32)), max_iter=300)
        _, report = fit(x, config)
        steps = np.diff(report.log_likelihood_trace)
        drop = float(-steps.min()) if steps.size else 0.0
        worst = max(worst, drop)
        values += report.log_likelihood_trace
        if drop > slack:
            failures.append(f"fit {k}: log-likelihood dropped by {drop:.3g}")
    return _result("em_monotonicity", count, failures, values, worst_drop=worst)


def classification_suite(n_classes: int = 5, n_components: int = 3, dim: int = 8,
                         chunks_per_class: int = 40, chunk_size: int = 500, min_separation: float = 6.0,
                         repetitions: int = 5, folds: int = 2, seed: int = 0, shuffle_labels: bool = False,
                         min_accuracy: float = 0.95, n_se: float = 3.0) -> SuiteResult:
    """Synthetic chunk classification; with ``shuffle_labels`` the null model instead.

    The real run must reach ``min_accuracy`` and beat (or tie) the mean-vector
    baseline on identical splits. The null run must land within ``n_se``
    binomial standard errors of chance.
    """
    rng = stage_rng(seed, "classification-data")
    models = separated_class_models(n_classes, n_components, dim, min_separation, rng)
    x, y = classification_dataset(models, chunks_per_class * chunk_size, rng)
    methods = ["gmm_wasserstein"] if shuffle_labels else ["gmm_wasserstein", "gmm_l2_baseline"]
    if shuffle_labels:
        y = y[stage_rng(seed, "classification-shuffle").permutation(y.size)]
    protocol = EvalProtocol(folds=folds, repetitions=repetitions, chunk_size=chunk_size, seed=seed)
    report = evaluate(x, y, protocol, FitConfig(n_components=n_components, seed=seed), methods)
    summary = {s["method"]: s for s in report.summary()}
    acc = summary["gmm_wasserstein"]["mean_accuracy"]
    values = [r["accuracy"] for r in report.rows]
    failures = [f"chunk failure: {f}" for f in report.failures]
    if shuffle_labels:
        total = sum(r["n_chunks"] for r in report.rows if r["method"] == "gmm_wasserstein")
        chance = 1.0 / n_classes
        se = math.sqrt(chance * (1 - chance) / total)
        if abs(acc - chance) > n_se * se:
            failures.append(f"null accuracy {acc:.4f} not within {n_se} SE ({se:.4f}) of {chance:.4f}")
        return _result("null_model", len(report.rows), failures, values, accuracy=acc, chance=chance, se=se)
    l2 = summary["gmm_l2_baseline"]["mean_accuracy"]
    if acc < min_accuracy:
        failures.append(f"accuracy {acc:.4f} below {min_accuracy}")
    if acc < l2:
        failures.append(f"accuracy {acc:.4f} below the L2 baseline {l2:.4f}")
    return _result("classification", len(report.rows), failures, values, accuracy=acc, l2_accuracy=l2)


SELFTEST_SUITES = {
    "transport": lambda seed, fault: transport_suite(count=40, seed=seed),
    "sampling": lambda seed, fault: gaussian_sampling_suite(count=10, samples=20_000, seed=seed),
    "metric": lambda seed, fault: metric_suite(count=100, seed=seed, distance=fault or default_distance),
    "duality": lambda seed, fault: duality_suite(count=40, seed=seed),
}


def unrooted_distance(p, q) -> float:
    """Fault for negative controls: squared costs reported without the square root."""
    return gmm_wasserstein(p, q, "squared")[1].objective
