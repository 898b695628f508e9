"""One-dimensional Wasserstein distances through quantile functions.

For two empirical measures with the same number of atoms the quantile
integral is exactly the order-statistic sum

    W_n^n = (1/k) sum_r |x_(r) - y_(r)|^n,

so these helpers double as a sampling oracle for the closed-form Gaussian
distance and for the mixture-level distance.

All sampling uses numpy's PCG64 bit generator seeded through
``SeedSequence``, which is portable across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionNotOne, EmptySamples, OrderingViolated, UnequalSampleCounts
from .mixture import Gmm


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator from an int, an int sequence or a ``SeedSequence``."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """Sorted, finite samples of a real random variable."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float).reshape(-1))
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.size


def _samples(x) -> np.ndarray:
    if isinstance(x, EmpiricalDistribution):
        return x.samples
    return np.sort(np.asarray(x, dtype=float).reshape(-1))


def empirical_wn(x, y, order: int = 2) -> float:
    """n-th Wasserstein distance between two equal-size empirical measures."""
    xs, ys = _samples(x), _samples(y)
    if xs.size == 0 or ys.size == 0:
        raise EmptySamples("both sample sets must be non-empty")
    if xs.size != ys.size:
        raise UnequalSampleCounts(f"{xs.size} vs {ys.size} samples")
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    return float(np.mean(np.abs(xs - ys) ** order) ** (1.0 / order))


def empirical_wn_bootstrap_se(x, y, order: int = 2, n_boot: int = 20, seed=0) -> float:
    """Bootstrap standard error of :func:`empirical_wn`.

    Both sample sets are resampled independently with replacement.
    """
    xs, ys = _samples(x), _samples(y)
    rng = make_rng(seed)
    stats = np.empty(n_boot)
    for b in range(n_boot):
        bx = np.sort(xs[rng.integers(xs.size, size=xs.size)])
        by = np.sort(ys[rng.integers(ys.size, size=ys.size)])
        stats[b] = np.mean(np.abs(bx - by) ** order) ** (1.0 / order)
    return float(np.std(stats, ddof=1))


def sample_gmm(model: Gmm, count: int, seed) -> EmpiricalDistribution:
    """Draw ``count`` i.i.d. samples from a one-dimensional mixture."""
    if model.dim != 1:
        raise DimensionNotOne(f"model has dimension {model.dim}")
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = make_rng(seed)
    labels = rng.choice(model.n_components, size=count, p=model.weights)
    means = model.means[:, 0]
    stds = np.sqrt(model.covariances[:, 0, 0])
    draws = means[labels] + stds[labels] * rng.standard_normal(count)
    return EmpiricalDistribution(draws)


def check_rearrangement_inequality(x1, x2, y1, y2, order: int) -> bool:
    """Return whether un-crossing a crossing pair of couplings never costs more.

    For a crossing pair (x1 < y1 and y2 < x2) compares
    ``|x1 - y2|^n + |y1 - x2|^n`` against ``|x1 - x2|^n + |y1 - y2|^n``.
    Equality is accepted, since it occurs for ``n = 1``.
    """
    if not (x1 < y1 and y2 < x2):
        raise OrderingViolated("expected x1 < y1 and y2 < x2")
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    uncrossed = abs(x1 - y2) ** order + abs(y1 - x2) ** order
    crossed = abs(x1 - x2) ** order + abs(y1 - y2) ** order
    return uncrossed <= crossed * (1.0 + 1e-12)
