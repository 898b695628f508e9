"""Chunk-level classification by nearest class mixture, plus an evaluation
harness with repeated stratified k-fold splits.

Each training label gets its own fitted mixture. A test chunk (rows known to
share one label) is summarised by its own mixture and assigned the label whose
model is closest under the approximate mixture Wasserstein distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimensionMismatch, EmptyTrainingSet, GmmotError, LabelTooSmall
from .mixture import FitConfig, Gmm, fit
from .seeding import stage_rng
from .transport import gmm_wasserstein

METHODS = ("gmm_wasserstein", "gmm_l2_baseline", "knn_baseline")
ROWS_PER_COMPONENT = 8


@dataclass(frozen=True, eq=False)
class LabeledChunk:
    data: np.ndarray
    id: str
    label: str | None = None

    def __post_init__(self):
        x = np.asarray(self.data, dtype=float)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError(f"chunk {self.id!r} must hold at least one row")
        if not np.all(np.isfinite(x)):
            raise ValueError(f"chunk {self.id!r} has non-finite entries")
        object.__setattr__(self, "data", x)


@dataclass(frozen=True)
class ClassModelSet:
    models: dict
    config: FitConfig

    def __post_init__(self):
        if not self.models:
            raise ValueError("at least one class model is required")
        dims = {m.dim for m in self.models.values()}
        if len(dims) != 1:
            raise DimensionMismatch(f"class models have mixed dimensions {sorted(dims)}")

    @property
    def labels(self) -> list[str]:
        return sorted(self.models)

    @property
    def dim(self) -> int:
        return next(iter(self.models.values())).dim


@dataclass(frozen=True)
class MatchResult:
    chunk_id: str
    predicted_label: str
    distance_row: dict
    runner_up_margin: float

    def to_record(self) -> dict:
        margin = self.runner_up_margin
        return {
            "chunk_id": self.chunk_id,
            "predicted_label": self.predicted_label,
            "distance_row": dict(self.distance_row),
            "runner_up_margin": margin if math.isfinite(margin) else None,
        }


def fit_class_models(data, labels, config: FitConfig) -> ClassModelSet:
    """Fit one mixture per distinct label, each on that label's rows only."""
    x = np.asarray(data, dtype=float)
    labels = np.asarray([str(v) for v in labels])
    if x.ndim != 2 or x.shape[0] != labels.size:
        raise DimensionMismatch("data must be k x d with one label per row")
    if x.shape[0] == 0:
        raise EmptyTrainingSet("no training rows")
    groups = {lab: x[labels == lab] for lab in sorted(set(labels.tolist()))}
    for lab, rows in groups.items():
        if rows.shape[0] < config.n_components:
            raise LabelTooSmall(lab, rows.shape[0], config.n_components)
    models = {lab: fit(rows, config)[0] for lab, rows in groups.items()}
    return ClassModelSet(models, config)


def chunk_config(config: FitConfig, n_rows: int) -> FitConfig:
    """Chunk mixtures get at most one component per eight rows (minimum one)."""
    n = max(1, min(config.n_components, n_rows // ROWS_PER_COMPONENT))
    return config if n == config.n_components else replace(config, n_components=n)


def gmm_l2_baseline(p: Gmm, q: Gmm) -> float:
    """Euclidean distance between the two mixtures' overall means.

    Blind to everything but the first moment; kept as a reference point.
    """
    if p.dim != q.dim:
        raise DimensionMismatch(f"mixture dimensions differ: {p.dim} vs {q.dim}")
    return float(np.linalg.norm(p.weights @ p.means - q.weights @ q.means))


def _distance(metric: str, p: Gmm, q: Gmm, cost: str) -> float:
    if metric == "gmm_wasserstein":
        return gmm_wasserstein(p, q, cost)[0]
    if metric == "gmm_l2_baseline":
        return gmm_l2_baseline(p, q)
    raise ValueError(f"unknown distance {metric!r}")


def nearest_label(distance_row: dict) -> tuple[str, float]:
    """Argmin with ties resolved by lexicographic label order."""
    ordered = sorted(distance_row)
    best = ordered[0]
    for lab in ordered[1:]:
        if distance_row[lab] < distance_row[best]:
            best = lab
    others = [distance_row[lab] for lab in ordered if lab != best]
    margin = min(others) - distance_row[best] if others else math.inf
    return best, margin


def match_model(models: ClassModelSet, chunk_model: Gmm, chunk_id: str,
                metric: str = "gmm_wasserstein", cost: str = "squared") -> MatchResult:
    row = {lab: _distance(metric, models.models[lab], chunk_model, cost) for lab in models.labels}
    label, margin = nearest_label(row)
    return MatchResult(chunk_id, label, row, margin)


def classify_chunk(models: ClassModelSet, chunk: LabeledChunk, config: FitConfig | None = None,
                   metric: str = "gmm_wasserstein", cost: str = "squared") -> MatchResult:
    """Fit a mixture to ``chunk`` and return the nearest class model.

    ``config`` defaults to the one the class models were fitted with; the
    chunk mixture uses ``min(n_components, rows // 8)`` components.
    """
    config = config or models.config
    if chunk.data.shape[1] != models.dim:
        raise DimensionMismatch(f"chunk {chunk.id!r} has dimension {chunk.data.shape[1]}, models have {models.dim}")
    chunk_model, _ = fit(chunk.data, chunk_config(config, chunk.data.shape[0]))
    return match_model(models, chunk_model, chunk.id, metric, cost)


def knn_baseline(train_x, train_labels, chunk, k_neighbors: int = 5) -> str:
    """Label a chunk by pooling the labels of each row's nearest training rows.

    Every chunk row contributes the labels of its ``k_neighbors`` nearest
    training rows (Euclidean); the most frequent label wins, ties going to the
    lexicographically first one.
    """
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be >= 1")
    train_x = np.asarray(train_x, dtype=float)
    train_labels = np.asarray([str(v) for v in train_labels])
    if train_x.shape[0] == 0:
        raise EmptyTrainingSet("no training rows")
    rows = chunk.data if isinstance(chunk, LabeledChunk) else np.atleast_2d(np.asarray(chunk, dtype=float))
    return _knn_vote(cKDTree(train_x), train_labels, rows, k_neighbors)


def _knn_vote(tree: cKDTree, train_labels: np.ndarray, rows: np.ndarray, k: int) -> str:
    k = min(k, tree.n)
    _, idx = tree.query(rows, k=k)
    votes = train_labels[np.asarray(idx).reshape(-1)]
    uniq, counts = np.unique(votes, return_counts=True)
    return str(uniq[int(np.argmax(counts))])


# --- evaluation harness ------------------------------------------------------


@dataclass(frozen=True)
class EvalProtocol:
    folds: int = 2
    repetitions: int = 5
    chunk_size: int = 100
    seed: int = 0
    k_neighbors: int = 5

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")


@dataclass
class EvaluationReport:
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def accuracies(self, method: str) -> np.ndarray:
        return np.array([r["accuracy"] for r in self.rows if r["method"] == method])

    @property
    def methods(self) -> list[str]:
        seen = []
        for r in self.rows:
            if r["method"] not in seen:
                seen.append(r["method"])
        return seen

    def summary(self) -> list[dict]:
        out = []
        for m in self.methods:
            acc = self.accuracies(m)
            out.append({
                "method": m,
                "runs": int(acc.size),
                "mean_accuracy": float(np.mean(acc)),
                "std_accuracy": float(np.std(acc, ddof=1)) if acc.size > 1 else 0.0,
            })
        return out


def stratified_folds(labels: np.ndarray, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Fold index per row; each label is shuffled and dealt round-robin."""
    assign = np.empty(labels.size, dtype=int)
    for lab in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == lab)
        idx = idx[rng.permutation(idx.size)]
        assign[idx] = np.arange(idx.size) % folds
    return assign


def make_chunks(x: np.ndarray, labels: np.ndarray, rows: np.ndarray, chunk_size: int,
                prefix: str = "") -> list[LabeledChunk]:
    """Cut ``rows`` into same-label chunks of exactly ``chunk_size`` rows.

    Rows left over after the last full chunk of a label are not used.
    """
    chunks = []
    for lab in sorted(set(labels[rows].tolist())):
        idx = rows[labels[rows] == lab]
        for c in range(idx.size // chunk_size):
            part = idx[c * chunk_size:(c + 1) * chunk_size]
            chunks.append(LabeledChunk(x[part], f"{prefix}{lab}/{c}", lab))
    return chunks


def evaluate(data, labels, protocol: EvalProtocol, config: FitConfig,
             methods: Iterable[str] = ("gmm_wasserstein",), cost: str = "squared") -> EvaluationReport:
    """Repeated stratified k-fold evaluation of chunk classification.

    Produces one row per (method, repetition, fold) with the fraction of test
    chunks labelled correctly. A chunk whose fit fails is counted as wrong
    and listed in ``report.failures``.
    """
    requested = set(methods)
    if not requested or requested - set(METHODS):
        raise ValueError(f"methods must be a non-empty subset of {METHODS}")
    methods = [m for m in METHODS if m in requested]
    x = np.asarray(data, dtype=float)
    labels = np.asarray([str(v) for v in labels])
    if x.ndim != 2 or x.shape[0] != labels.size:
        raise DimensionMismatch("data must be k x d with one label per row")
    if protocol.chunk_size < config.n_components:
        raise ValueError("chunk_size must be at least n_components")

    report = EvaluationReport()
    gmm_methods = [m for m in methods if m != "knn_baseline"]
    for rep in range(protocol.repetitions):
        assign = stratified_folds(labels, protocol.folds, stage_rng(protocol.seed, "folds", rep))
        for fold in range(protocol.folds):
            train = np.flatnonzero(assign != fold)
            test = np.flatnonzero(assign == fold)
            chunks = make_chunks(x, labels, test, protocol.chunk_size, f"r{rep}f{fold}:")
            correct = {m: 0 for m in methods}
            models = fit_class_models(x[train], labels[train], config) if gmm_methods else None
            tree = cKDTree(x[train]) if "knn_baseline" in methods else None
            for chunk in chunks:
                chunk_model = None
                for m in methods:
                    try:
                        if m == "knn_baseline":
                            pred = _knn_vote(tree, labels[train], chunk.data, protocol.k_neighbors)
                        else:
                            if chunk_model is None:
                                chunk_model, _ = fit(chunk.data, chunk_config(config, chunk.data.shape[0]))
                            pred = match_model(models, chunk_model, chunk.id, m, cost).predicted_label
                    except GmmotError as exc:
                        report.failures.append({"method": m, "repetition": rep, "fold": fold,
                                                "chunk_id": chunk.id, "error": str(exc)})
                        continue
                    correct[m] += pred == chunk.label
            for m in methods:
                report.rows.append({
                    "method": m,
                    "repetition": rep,
                    "fold": fold,
                    "n_chunks": len(chunks),
                    "accuracy": correct[m] / len(chunks) if chunks else float("nan"),
                })
    return report


def evaluate_sweep(data, labels, protocol: EvalProtocol, config: FitConfig, methods: Sequence[str],
                   parameter: str, values: Sequence[int], cost: str = "squared") -> list[dict]:
    """Mean and standard deviation of accuracy per method for each swept value.

    ``parameter`` is ``"chunk_size"`` or ``"n_components"``.
    """
    if parameter not in ("chunk_size", "n_components"):
        raise ValueError(f"cannot sweep {parameter!r}")
    out = []
    for value in values:
        if parameter == "chunk_size":
            rep = evaluate(data, labels, replace(protocol, chunk_size=int(value)), config, methods, cost)
        else:
            rep = evaluate(data, labels, protocol, replace(config, n_components=int(value)), methods, cost)
        for s in rep.summary():
            out.append({"method": s["method"], "parameter": parameter, "x": int(value),
                        "mean": s["mean_accuracy"], "std": s["std_accuracy"]})
    return out
