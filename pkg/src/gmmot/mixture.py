"""Gaussian mixture models: EM fitting, component-count selection and
a plain-text JSON model format.

Notation follows the usual EM write-up: ``resp[j, i]`` is the posterior
probability that observation ``j`` was drawn from component ``i``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .errors import (
    DegenerateComponent,
    DimensionMismatch,
    EmptyComponent,
    MalformedModel,
    NonFiniteData,
    TooFewObservations,
)
from .gaussian import Gaussian

COVARIANCE_TYPES = ("full", "diagonal")
WEIGHT_SUM_TOL = 1e-12
DEAD_MASS = 1e-300
# weight handed to a re-seeded component; small enough not to dent the likelihood
RESEED_WEIGHT = 1e-14
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class FitConfig:
    """EM hyper-parameters.

    ``reg_eps=None`` selects ``1e-6 * mean per-coordinate variance`` of the
    data being fitted (``1e-6`` when that variance is zero).
    """

    n_components: int = 1
    covariance_type: str = "full"
    reg_eps: float | None = None
    tol: float = 1e-6
    max_iter: int = 200
    n_restarts: int = 1
    seed: int = 0

    def __post_init__(self):
        if int(self.n_components) != self.n_components or self.n_components < 1:
            raise ValueError(f"n_components must be an integer >= 1, got {self.n_components}")
        if self.covariance_type not in COVARIANCE_TYPES:
            raise ValueError(f"covariance_type must be one of {COVARIANCE_TYPES}")
        if self.reg_eps is not None and not (self.reg_eps > 0 and math.isfinite(self.reg_eps)):
            raise ValueError(f"reg_eps must be positive, got {self.reg_eps}")
        if not (self.tol > 0):
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.n_restarts < 1:
            raise ValueError(f"n_restarts must be >= 1, got {self.n_restarts}")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    def resolve_reg_eps(self, data: np.ndarray) -> float:
        if self.reg_eps is not None:
            return float(self.reg_eps)
        var = float(np.mean(np.var(data, axis=0)))
        return 1e-6 * var if var > 0 else 1e-6


@dataclass(frozen=True, eq=False)
class Gmm:
    """Weights on the probability simplex plus one Gaussian per component."""

    weights: np.ndarray
    components: tuple[Gaussian, ...]
    covariance_type: str = "full"

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float).reshape(-1)
        components = tuple(self.components)
        if len(components) < 1:
            raise ValueError("a mixture needs at least one component")
        if weights.size != len(components):
            raise DimensionMismatch(
                f"{weights.size} weights for {len(components)} components"
            )
        if not np.all(np.isfinite(weights)) or np.any(weights < 0) or np.any(weights > 1):
            raise ValueError("weights must lie in [0, 1]")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, expected 1")
        dims = {g.dim for g in components}
        if len(dims) != 1:
            raise DimensionMismatch(f"components have mixed dimensions {sorted(dims)}")
        if self.covariance_type not in COVARIANCE_TYPES:
            raise ValueError(f"unknown covariance type {self.covariance_type!r}")
        if self.covariance_type == "diagonal":
            for g in components:
                if np.any(g.cov - np.diag(np.diag(g.cov))):
                    raise ValueError("diagonal mixture with a non-diagonal covariance")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "components", components)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def means(self) -> np.ndarray:
        return np.stack([g.mean for g in self.components])

    @property
    def covariances(self) -> np.ndarray:
        return np.stack([g.cov for g in self.components])

    def __eq__(self, other):
        if not isinstance(other, Gmm):
            return NotImplemented
        return (
            self.covariance_type == other.covariance_type
            and np.array_equal(self.weights, other.weights)
            and self.components == other.components
        )

    def __hash__(self):
        return hash((self.weights.tobytes(), self.components, self.covariance_type))

    @classmethod
    def from_arrays(cls, weights, means, covariances, covariance_type="full") -> "Gmm":
        comps = tuple(Gaussian(m, c) for m, c in zip(means, covariances))
        return cls(np.asarray(weights, dtype=float), comps, covariance_type)


@dataclass
class FitReport:
    log_likelihood_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    restarts_used: int = 0
    reseeded_components: int = 0
    floored_steps: int = 0

    @property
    def final_log_likelihood(self) -> float:
        return self.log_likelihood_trace[-1]

    def to_dict(self) -> dict:
        return {
            "final_log_likelihood": self.final_log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "restarts_used": self.restarts_used,
            "reseeded_components": self.reseeded_components,
            "floored_steps": self.floored_steps,
        }


def _as_data(data, dim: int | None = None) -> np.ndarray:
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1) if dim in (None, 1) else x.reshape(1, -1)
    if x.ndim != 2 or x.shape[0] == 0:
        raise TooFewObservations("data must be a non-empty k x d matrix")
    if dim is not None and x.shape[1] != dim:
        raise DimensionMismatch(f"data has dimension {x.shape[1]}, model has {dim}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteData("data contains NaN or infinite values")
    return x


def _component_log_pdf(x: np.ndarray, g: Gaussian) -> np.ndarray:
    try:
        chol = np.linalg.cholesky(g.cov)
    except np.linalg.LinAlgError:
        raise DegenerateComponent("covariance is numerically singular") from None
    diag = np.diag(chol)
    if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        raise DegenerateComponent("covariance is numerically singular")
    z = solve_triangular(chol, (x - g.mean).T, lower=True, check_finite=False)
    maha = np.sum(z * z, axis=0)
    return -0.5 * (x.shape[1] * LOG_2PI + maha) - np.sum(np.log(diag))


def _weighted_log_pdf(model: Gmm, x: np.ndarray) -> np.ndarray:
    """k x n matrix of log w_i + log N(x_j | mu_i, Sigma_i)."""
    out = np.empty((x.shape[0], model.n_components))
    with np.errstate(divide="ignore"):
        log_w = np.log(model.weights)
    for i, g in enumerate(model.components):
        out[:, i] = log_w[i] + _component_log_pdf(x, g)
    return out


def _e_step(model: Gmm, x: np.ndarray):
    logp = _weighted_log_pdf(model, x)
    norm = logsumexp(logp, axis=1)
    resp = np.exp(logp - norm[:, None])
    return resp, norm


def log_likelihood(model: Gmm, data) -> float:
    """Total log-likelihood of ``data`` (rows are observations)."""
    x = _as_data(data, model.dim)
    return float(np.sum(logsumexp(_weighted_log_pdf(model, x), axis=1)))


def e_step(model: Gmm, data) -> np.ndarray:
    """Responsibilities, shape ``(k, n)``; each row sums to one."""
    x = _as_data(data, model.dim)
    return _e_step(model, x)[0]


def _m_step_arrays(resp: np.ndarray, x: np.ndarray, covariance_type: str, reg: float,
                   floor: bool = False):
    """Closed-form M-step on raw arrays.

    ``floor=False`` adds ``reg`` to the diagonal of each weighted scatter.
    ``floor=True`` instead raises its eigenvalues to at least ``reg``, which is
    the exact maximiser over covariances with ``Sigma >= reg * I``.
    """
    k, d = x.shape
    mass = resp.sum(axis=0)
    dead = np.flatnonzero(mass < DEAD_MASS)
    n = resp.shape[1]
    weights = mass / k
    means = np.zeros((n, d))
    covs = np.zeros((n, d, d))
    for i in range(n):
        if i in dead:
            continue
        r = resp[:, i] / mass[i]
        mu = r @ x
        diff = x - mu
        if covariance_type == "full":
            cov = (r[:, None] * diff).T @ diff
            cov = 0.5 * (cov + cov.T)
            if floor:
                vals, vecs = np.linalg.eigh(cov)
                cov = (vecs * np.maximum(vals, reg)) @ vecs.T
                cov = 0.5 * (cov + cov.T)
            else:
                cov = cov + reg * np.eye(d)
        else:
            var = r @ (diff * diff)
            cov = np.diag(np.maximum(var, reg) if floor else var + reg)
        covs[i] = cov
        means[i] = mu
    return weights, means, covs, dead


def m_step(resp, data, config: FitConfig) -> Gmm:
    """Closed-form maximiser of the expected complete-data log-likelihood.

    Weights are the mean responsibilities, means the responsibility-weighted
    averages, covariances the weighted scatter about those means (divisor
    equal to the component mass) plus ``reg_eps`` on the diagonal.

    Raises
    ------
    EmptyComponent
        If a component's total responsibility is below ``1e-300``.
    """
    x = _as_data(data)
    resp = np.asarray(resp, dtype=float)
    if resp.shape != (x.shape[0], config.n_components):
        raise DimensionMismatch(
            f"responsibilities have shape {resp.shape}, expected {(x.shape[0], config.n_components)}"
        )
    weights, means, covs, dead = _m_step_arrays(
        resp, x, config.covariance_type, config.resolve_reg_eps(x)
    )
    if dead.size:
        raise EmptyComponent(dead)
    return Gmm.from_arrays(weights / weights.sum(), means, covs, config.covariance_type)


def _global_cov(x: np.ndarray, covariance_type: str, reg: float) -> np.ndarray:
    d = x.shape[1]
    diff = x - x.mean(axis=0)
    cov = diff.T @ diff / x.shape[0]
    if covariance_type == "diagonal":
        cov = np.diag(np.diag(cov))
    return 0.5 * (cov + cov.T) + reg * np.eye(d)


def kmeans_pp_seeds(x: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Pick ``n`` distinct rows of ``x`` with k-means++ (D^2) sampling."""
    k = x.shape[0]
    chosen = [int(rng.integers(k))]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(1, n):
        avail = np.ones(k, dtype=bool)
        avail[chosen] = False
        p = np.where(avail, d2, 0.0)
        total = p.sum()
        if total > 0:
            idx = int(rng.choice(k, p=p / total))
        else:
            idx = int(rng.choice(np.flatnonzero(avail)))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((x - x[idx]) ** 2, axis=1))
    return x[chosen]


def initial_model(x: np.ndarray, config: FitConfig, rng: np.random.Generator, reg: float) -> Gmm:
    n = config.n_components
    means = kmeans_pp_seeds(x, n, rng)
    cov = _global_cov(x, config.covariance_type, reg)
    return Gmm.from_arrays(np.full(n, 1.0 / n), means, [cov] * n, config.covariance_type)


def _m_update(resp, log_px, x, config, reg, report, floor=False) -> Gmm:
    weights, means, covs, dead = _m_step_arrays(resp, x, config.covariance_type, reg, floor)
    if dead.size:
        global_cov = _global_cov(x, config.covariance_type, reg)
        order = np.argsort(log_px, kind="stable")
        for slot, i in enumerate(dead):
            means[i] = x[order[slot % x.shape[0]]]
            covs[i] = global_cov
            weights[i] = RESEED_WEIGHT
        report.reseeded_components += int(dead.size)
    return Gmm.from_arrays(weights / weights.sum(), means, covs, config.covariance_type)


def _run_em(x, config, rng, reg):
    model = initial_model(x, config, rng, reg)
    report = FitReport()
    trace = report.log_likelihood_trace
    prev = None
    while True:
        resp, log_px = _e_step(model, x)
        ll = float(np.sum(log_px))
        if prev is not None and ll < trace[-1]:
            # The ridge update is not an exact maximiser and can lose a little
            # likelihood on degenerate fits; redo it with the eigenvalue floor.
            model = _m_update(*prev, x, config, reg, report, floor=True)
            resp, log_px = _e_step(model, x)
            ll = float(np.sum(log_px))
            report.floored_steps += 1
        trace.append(ll)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) / (1.0 + abs(ll)) < config.tol:
            report.converged = True
            break
        if report.iterations >= config.max_iter:
            break
        prev = (resp, log_px)
        model = _m_update(resp, log_px, x, config, reg, report)
        report.iterations += 1
    return model, report


def fit(data, config: FitConfig) -> tuple[Gmm, FitReport]:
    """Fit a mixture by EM, keeping the best of ``config.n_restarts`` runs.

    Each run stops when ``|LL_t - LL_{t-1}| / (1 + |LL_t|) < tol`` or after
    ``max_iter`` M-steps. Restart ``r`` draws its k-means++ seeding from the
    ``r``-th child of ``SeedSequence(config.seed)``.
    """
    x = _as_data(data)
    if x.shape[0] < config.n_components:
        raise TooFewObservations(
            f"{x.shape[0]} observations for {config.n_components} components"
        )
    reg = config.resolve_reg_eps(x)
    best = None
    for r, child in enumerate(np.random.SeedSequence(config.seed).spawn(config.n_restarts)):
        model, report = _run_em(x, config, np.random.Generator(np.random.PCG64(child)), reg)
        if best is None or report.final_log_likelihood > best[1].final_log_likelihood:
            best = (model, report)
    best[1].restarts_used = config.n_restarts
    return best


def n_parameters(n: int, d: int, covariance_type: str) -> int:
    cov_params = d * (d + 1) // 2 if covariance_type == "full" else d
    return (n - 1) + n * d + n * cov_params


def bic(model: Gmm, data) -> float:
    x = _as_data(data, model.dim)
    p = n_parameters(model.n_components, model.dim, model.covariance_type)
    return -2.0 * log_likelihood(model, x) + p * math.log(x.shape[0])


def select_n_components(data, candidates: Sequence[int], config: FitConfig):
    """Fit every candidate component count and keep the lowest-BIC model.

    Returns ``(model, chosen_n, table)`` where ``table`` holds one dict per
    candidate with keys ``n``, ``log_likelihood``, ``n_params`` and ``bic``.
    Ties go to the smaller count.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidates must be non-empty")
    x = _as_data(data)
    table = []
    best = None
    for n in sorted(set(candidates)):
        model, _ = fit(x, replace(config, n_components=n))
        ll = log_likelihood(model, x)
        p = n_parameters(n, x.shape[1], config.covariance_type)
        score = -2.0 * ll + p * math.log(x.shape[0])
        table.append({"n": n, "log_likelihood": ll, "n_params": p, "bic": score})
        if best is None or score < best[2]:
            best = (model, n, score)
    return best[0], best[1], table



# --- model file format -------------------------------------------------------


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _fmt_array(values) -> str:
    return "[" + ", ".join(_fmt(v) for v in np.asarray(values).reshape(-1)) + "]"


def save_model(model: Gmm) -> bytes:
    """Serialize ``model`` as UTF-8 JSON text, reals printed with 17 significant digits."""
    lines = [
        "{",
        f'  "dim": {model.dim},',
        f'  "covariance_type": "{model.covariance_type}",',
        f'  "weights": {_fmt_array(model.weights)},',
        '  "components": [',
    ]
    for i, g in enumerate(model.components):
        sep = "," if i < model.n_components - 1 else ""
        lines.append(f'    {{"mean": {_fmt_array(g.mean)}, "cov": {_fmt_array(g.cov)}}}{sep}')
    lines += ["  ]", "}", ""]
    return "\n".join(lines).encode("utf-8")


def _real_list(value, where: str) -> list[float]:
    if not isinstance(value, list):
        raise MalformedModel(f"{where}: expected an array of reals")
    for idx, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise MalformedModel(f"{where}[{idx}]: expected a finite real, got {v!r}")
    return [float(v) for v in value]


def load_model(raw: bytes | str) -> Gmm:
    """Parse the format written by :func:`save_model`.

    Every failure is reported as :class:`MalformedModel` naming the line or
    field at fault.
    """
    try:
        text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
    except UnicodeDecodeError as exc:
        raise MalformedModel(f"model file is not UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedModel(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise MalformedModel("top level: expected an object")
    for key in ("dim", "covariance_type", "weights", "components"):
        if key not in doc:
            raise MalformedModel(f"missing field {key!r}")
    dim = doc["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise MalformedModel(f"dim: expected a positive integer, got {dim!r}")
    cov_type = doc["covariance_type"]
    if cov_type not in COVARIANCE_TYPES:
        raise MalformedModel(f"covariance_type: unknown value {cov_type!r}")
    weights = _real_list(doc["weights"], "weights")
    comps = doc["components"]
    if not isinstance(comps, list) or not comps:
        raise MalformedModel("components: expected a non-empty array")
    if len(comps) != len(weights):
        raise MalformedModel(
            f"weights: {len(weights)} entries for {len(comps)} components"
        )
    if any(w < 0 or w > 1 for w in weights):
        raise MalformedModel("weights: entries must lie in [0, 1]")
    total = math.fsum(weights)
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise MalformedModel(f"weights: sum to {total!r}, expected 1")
    gaussians = []
    for i, comp in enumerate(comps):
        where = f"components[{i}]"
        if not isinstance(comp, dict) or "mean" not in comp or "cov" not in comp:
            raise MalformedModel(f"{where}: expected an object with 'mean' and 'cov'")
        mean = _real_list(comp["mean"], f"{where}.mean")
        cov = _real_list(comp["cov"], f"{where}.cov")
        if len(mean) != dim:
            raise MalformedModel(f"{where}.mean: {len(mean)} entries, dim is {dim}")
        if len(cov) != dim * dim:
            raise MalformedModel(f"{where}.cov: {len(cov)} entries, expected {dim * dim}")
        try:
            gaussians.append(Gaussian(mean, np.reshape(cov, (dim, dim))))
        except ValueError as exc:
            raise MalformedModel(f"{where}.cov: {exc}") from None
    try:
        return Gmm(np.array(weights), tuple(gaussians), cov_type)
    except ValueError as exc:
        raise MalformedModel(str(exc)) from None
