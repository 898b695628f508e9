"""Gaussian components and the closed-form 2-Wasserstein distance between them.

The distance between N(m1, S1) and N(m2, S2) is

    W2^2 = |m1 - m2|^2 + tr(S1 + S2 - 2 (S1^{1/2} S2 S1^{1/2})^{1/2})

and all square roots are taken on the PSD branch through a symmetric
eigendecomposition. The trace term is evaluated as ``|S1^{1/2} - S2^{1/2} U|_F^2``
with ``U`` the orthogonal polar factor of ``S2^{1/2} S1^{1/2}``, which is
nonnegative by construction and exact to round-off for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotPsd, NotSymmetric

SYMMETRY_RTOL = 1e-12
PSD_FLOOR = 1e-10


def _check_symmetric(m: np.ndarray) -> None:
    scale = np.max(np.abs(m)) if m.size else 0.0
    asym = np.max(np.abs(m - m.T)) if m.size else 0.0
    if asym > SYMMETRY_RTOL * scale:
        raise NotSymmetric(f"matrix asymmetry {asym:.3g} exceeds {SYMMETRY_RTOL:g} * {scale:.3g}")


def _psd_floor(m: np.ndarray) -> float:
    d = m.shape[0]
    return -PSD_FLOOR * max(float(np.trace(m)), 0.0) / d


def _as_square(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class SpdSqrtResult:
    sqrt: np.ndarray
    clamped_count: int


def spd_sqrt(m) -> SpdSqrtResult:
    """Symmetric PSD square root of ``m`` via eigendecomposition.

    Eigenvalues in ``[-1e-10 * trace(m) / d, 0)`` are treated as round-off,
    clamped to zero and counted in ``clamped_count``.

    Raises
    ------
    NotSymmetric
        If ``max|m - m.T| > 1e-12 * max|m|``.
    NotPsd
        If an eigenvalue lies below the clamping floor.
    """
    m = _as_square(m)
    _check_symmetric(m)
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    floor = _psd_floor(m)
    if vals[0] < floor:
        raise NotPsd(f"eigenvalue {vals[0]:.6g} below floor {floor:.3g}")
    negative = vals < 0
    vals = np.where(negative, 0.0, vals)
    root = (vecs * np.sqrt(vals)) @ vecs.T
    root = 0.5 * (root + root.T)
    return SpdSqrtResult(sqrt=root, clamped_count=int(np.count_nonzero(negative)))


@dataclass(frozen=True, eq=False)
class Gaussian:
    """A multivariate normal component with a symmetric PSD covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if mean.size == 1 and cov.ndim < 2:
            cov = cov.reshape(1, 1)
        cov = _as_square(cov)
        if cov.shape[0] != mean.size:
            raise DimensionMismatch(
                f"mean has dimension {mean.size} but covariance is {cov.shape}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("Gaussian parameters must be finite")
        _check_symmetric(cov)
        lowest = np.linalg.eigvalsh(0.5 * (cov + cov.T))[0]
        if lowest < _psd_floor(cov):
            raise NotPsd(f"covariance eigenvalue {lowest:.6g} is negative")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def __eq__(self, other):
        if not isinstance(other, Gaussian):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.cov, other.cov)

    def __hash__(self):
        return hash((self.mean.tobytes(), self.cov.tobytes()))

    def __repr__(self):
        return f"Gaussian(mean={self.mean.tolist()}, cov={self.cov.tolist()})"


def gaussian_w2_squared(g1: Gaussian, g2: Gaussian) -> float:
    """Squared 2-Wasserstein distance between two Gaussians (closed form)."""
    if g1.dim != g2.dim:
        raise DimensionMismatch(f"dimensions differ: {g1.dim} vs {g2.dim}")
    diff = g1.mean - g2.mean
    root1 = spd_sqrt(g1.cov).sqrt
    root2 = spd_sqrt(g2.cov).sqrt
    # With root1 @ root2 = P D Q^T and U = Q P^T, the trace term equals
    # |root1 - root2 U|_F^2: a sum of squares, free of cancellation.
    p, _, qt = np.linalg.svd(root1 @ root2)
    residual = root1 - root2 @ (qt.T @ p.T)
    return float(diff @ diff) + float(np.sum(residual * residual))


def gaussian_w2(g1: Gaussian, g2: Gaussian) -> float:
    return float(np.sqrt(gaussian_w2_squared(g1, g2)))
