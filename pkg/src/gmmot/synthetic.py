"""Random mixtures and labelled datasets for experiments and self-checks."""

from __future__ import annotations

import numpy as np

from .gaussian import Gaussian
from .mixture import Gmm


def random_spd(dim: int, rng: np.random.Generator, low: float = 0.3, high: float = 1.5) -> np.ndarray:
    """Random rotation of a diagonal matrix with eigenvalues in ``[low, high]``."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    cov = (q * rng.uniform(low, high, dim)) @ q.T
    return 0.5 * (cov + cov.T)


def random_gmm(n_components: int, dim: int, rng: np.random.Generator, center=None,
               spread: float = 1.0, eig_range=(0.3, 1.5), concentration: float = 3.0) -> Gmm:
    center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    weights = rng.dirichlet(np.full(n_components, concentration))
    comps = tuple(
        Gaussian(center + spread * rng.standard_normal(dim), random_spd(dim, rng, *eig_range))
        for _ in range(n_components)
    )
    return Gmm(weights / weights.sum(), comps)


def sample_mixture(model: Gmm, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. rows drawn from ``model``."""
    labels = rng.choice(model.n_components, size=count, p=model.weights)
    out = np.empty((count, model.dim))
    for i, g in enumerate(model.components):
        sel = labels == i
        chol = np.linalg.cholesky(g.cov)
        out[sel] = g.mean + rng.standard_normal((int(sel.sum()), model.dim)) @ chol.T
    return out


def separated_class_models(n_classes: int, n_components: int, dim: int, min_separation: float,
                           rng: np.random.Generator, center_scale: float = 4.0) -> dict:
    """One random mixture per class, redrawn until all overall means are ``min_separation`` apart."""
    while True:
        centers = center_scale * rng.standard_normal((n_classes, dim))
        models = {f"class{c}": random_gmm(n_components, dim, rng, centers[c]) for c in range(n_classes)}
        means = np.stack([m.weights @ m.means for m in models.values()])
        gaps = np.linalg.norm(means[:, None] - means[None], axis=-1)
        if np.all(gaps[~np.eye(n_classes, dtype=bool)] >= min_separation):
            return models


def classification_dataset(models: dict, rows_per_class: int, rng: np.random.Generator):
    """Rows and string labels, classes concatenated in sorted label order."""
    xs, ys = [], []
    for label in sorted(models):
        xs.append(sample_mixture(models[label], rows_per_class, rng))
        ys += [label] * rows_per_class
    return np.concatenate(xs), np.array(ys)
