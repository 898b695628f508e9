import math

import numpy as np
import pytest

from gmmot.classifier import (
    ClassModelSet,
    EvalProtocol,
    LabeledChunk,
    chunk_config,
    classify_chunk,
    evaluate,
    evaluate_sweep,
    fit_class_models,
    gmm_l2_baseline,
    knn_baseline,
    match_model,
    nearest_label,
)
from gmmot.errors import EmptyTrainingSet, LabelTooSmall
from gmmot.gaussian import Gaussian
from gmmot.mixture import FitConfig, Gmm, fit
from gmmot.synthetic import classification_dataset, sample_mixture, separated_class_models


@pytest.fixture(scope="module")
def blobs():
    rng = np.random.default_rng(7)
    d = 3
    a = rng.standard_normal((400, d)) + 10
    b = rng.standard_normal((400, d)) - 10
    return np.vstack([a, b]), np.array(["A"] * 400 + ["B"] * 400)


class TestFitClassModels:
    def test_single_label_equals_plain_fit(self, rng):
        x = rng.standard_normal((200, 2))
        cfg = FitConfig(n_components=2, seed=4)
        models = fit_class_models(x, ["only"] * 200, cfg)
        assert models.labels == ["only"]
        assert models.models["only"] == fit(x, cfg)[0]

    def test_disjoint_blobs(self, blobs):
        x, y = blobs
        models = fit_class_models(x, y, FitConfig(n_components=2))
        for label in ("A", "B"):
            m = models.models[label]
            np.testing.assert_allclose(m.weights @ m.means, x[y == label].mean(axis=0), atol=1e-8)

    def test_label_too_small(self, rng):
        with pytest.raises(LabelTooSmall) as info:
            fit_class_models(rng.standard_normal((12, 2)), ["a"] * 10 + ["b"] * 2, FitConfig(n_components=3))
        assert info.value.label == "b"


class TestClassifyChunk:
    def test_chunk_from_class_model(self, blobs):
        x, y = blobs
        models = fit_class_models(x, y, FitConfig(n_components=2))
        rng = np.random.default_rng(1)
        chunk = LabeledChunk(rng.standard_normal((100, 3)) - 10, "c0")
        result = classify_chunk(models, chunk)
        assert result.predicted_label == "B"
        assert result.distance_row["B"] < result.distance_row["A"]
        assert result.runner_up_margin > 0

    def test_self_match_distance_is_zero(self, blobs):
        x, y = blobs
        cfg = FitConfig(n_components=2, seed=5)
        models = fit_class_models(x, y, cfg)
        for label in ("A", "B"):
            result = classify_chunk(models, LabeledChunk(x[y == label], label), cfg)
            assert result.predicted_label == label
            assert result.distance_row[label] <= 1e-6

    def test_identical_models_tie_lexicographically(self):
        m = Gmm(np.ones(1), (Gaussian([0.0], [[1.0]]),))
        models = ClassModelSet({"zeta": m, "alpha": m}, FitConfig())
        result = match_model(models, m, "c")
        assert result.predicted_label == "alpha"
        assert result.runner_up_margin == 0.0

    def test_order_of_models_is_irrelevant(self, blobs):
        x, y = blobs
        models = fit_class_models(x, y, FitConfig(n_components=2))
        flipped = ClassModelSet(dict(reversed(list(models.models.items()))), models.config)
        chunk = LabeledChunk(x[::7], "mixed")
        assert classify_chunk(models, chunk).predicted_label == classify_chunk(flipped, chunk).predicted_label

    def test_argmin_survives_monotone_transform(self, rng):
        models = separated_class_models(4, 2, 3, 4.0, rng)
        cms = ClassModelSet(models, FitConfig(n_components=2))
        for label, model in models.items():
            chunk = LabeledChunk(sample_mixture(model, 200, rng), label)
            rooted = classify_chunk(cms, chunk)
            squared = {k: v * v for k, v in rooted.distance_row.items()}
            assert nearest_label(squared)[0] == rooted.predicted_label == label

    def test_single_row_chunk(self, blobs):
        x, y = blobs
        models = fit_class_models(x, y, FitConfig(n_components=1))
        result = classify_chunk(models, LabeledChunk(x[:1], "tiny"))
        assert result.predicted_label == "A"

    def test_chunk_component_cap(self):
        cfg = FitConfig(n_components=5)
        assert chunk_config(cfg, 17).n_components == 2
        assert chunk_config(cfg, 3).n_components == 1
        assert chunk_config(cfg, 400) is cfg

    def test_single_class_margin_is_infinite(self):
        m = Gmm(np.ones(1), (Gaussian([0.0], [[1.0]]),))
        result = match_model(ClassModelSet({"a": m}, FitConfig()), m, "c")
        assert math.isinf(result.runner_up_margin)
        assert result.to_record()["runner_up_margin"] is None


class TestBaselines:
    def test_l2_identical(self, rng):
        m = separated_class_models(1, 3, 2, 0.0, rng)["class0"]
        assert gmm_l2_baseline(m, m) == 0.0

    def test_l2_single_components(self):
        v = np.array([3.0, 4.0])
        p = Gmm(np.ones(1), (Gaussian([0.0, 0.0], np.eye(2)),))
        q = Gmm(np.ones(1), (Gaussian(v, 2 * np.eye(2)),))
        assert gmm_l2_baseline(p, q) == pytest.approx(5.0)

    def test_l2_is_blind_to_spread(self):
        narrow = Gmm(np.array([0.5, 0.5]), (Gaussian([-1.0], [[1.0]]), Gaussian([1.0], [[1.0]])))
        wide = Gmm(np.array([0.5, 0.5]), (Gaussian([-8.0], [[1.0]]), Gaussian([8.0], [[1.0]])))
        assert gmm_l2_baseline(narrow, wide) == 0.0

    def test_knn_copies(self, blobs):
        x, y = blobs
        assert knn_baseline(x, y, LabeledChunk(x[y == "B"][:10], "c"), 5) == "B"

    def test_knn_all_way_tie(self, blobs):
        x, y = blobs
        assert knn_baseline(x, y, x[:3], k_neighbors=len(x)) == "A"

    def test_knn_separable(self, blobs):
        x, y = blobs
        rng = np.random.default_rng(3)
        assert knn_baseline(x, y, rng.standard_normal((20, 3)) + 10, 3) == "A"
        assert knn_baseline(x, y, rng.standard_normal((20, 3)) - 10, 3) == "B"

    def test_knn_errors(self):
        with pytest.raises(EmptyTrainingSet):
            knn_baseline(np.zeros((0, 2)), [], np.zeros((1, 2)))
        with pytest.raises(ValueError):
            knn_baseline(np.zeros((1, 2)), ["a"], np.zeros((1, 2)), 0)


@pytest.fixture(scope="module")
def small_dataset():
    rng = np.random.default_rng(11)
    models = separated_class_models(3, 2, 4, 6.0, rng)
    return classification_dataset(models, 800, rng)


class TestEvaluate:
    def test_separable_is_perfect(self, small_dataset):
        x, y = small_dataset
        report = evaluate(x, y, EvalProtocol(chunk_size=100, seed=2), FitConfig(n_components=2),
                          ["gmm_wasserstein", "gmm_l2_baseline", "knn_baseline"])
        for s in report.summary():
            assert s["mean_accuracy"] == 1.0, s
        assert not report.failures

    def test_protocol_arithmetic(self, small_dataset):
        x, y = small_dataset
        report = evaluate(x, y, EvalProtocol(chunk_size=100, repetitions=5, folds=2),
                          FitConfig(n_components=2), ["gmm_wasserstein", "knn_baseline"])
        for m in ("gmm_wasserstein", "knn_baseline"):
            assert report.accuracies(m).size == 10
        # 800 rows per class, 400 per fold, 4 chunks per class
        assert {r["n_chunks"] for r in report.rows} == {12}

    def test_null_labels(self, small_dataset):
        x, y = small_dataset
        shuffled = y[np.random.default_rng(0).permutation(y.size)]
        report = evaluate(x, shuffled, EvalProtocol(chunk_size=50, seed=1), FitConfig(n_components=2))
        total = sum(r["n_chunks"] for r in report.rows)
        acc = report.summary()[0]["mean_accuracy"]
        assert abs(acc - 1 / 3) <= 3 * math.sqrt((1 / 3) * (2 / 3) / total)

    def test_deterministic(self, small_dataset):
        x, y = small_dataset
        args = (x, y, EvalProtocol(chunk_size=100, repetitions=2, seed=3), FitConfig(n_components=2, seed=1))
        assert evaluate(*args).rows == evaluate(*args).rows

    def test_bad_methods(self, small_dataset):
        x, y = small_dataset
        with pytest.raises(ValueError):
            evaluate(x, y, EvalProtocol(), FitConfig(), ["svm"])

    def test_sweep(self, small_dataset):
        x, y = small_dataset
        points = evaluate_sweep(x, y, EvalProtocol(chunk_size=100, repetitions=1), FitConfig(n_components=1),
                                ["gmm_wasserstein", "gmm_l2_baseline"], "chunk_size", [50, 100])
        assert [(p["method"], p["x"]) for p in points] == [
            ("gmm_wasserstein", 50), ("gmm_l2_baseline", 50), ("gmm_wasserstein", 100), ("gmm_l2_baseline", 100)]
        assert all(0 <= p["mean"] <= 1 and p["std"] >= 0 for p in points)
