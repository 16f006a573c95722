import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vinnpruner.metrics import (
    EvalReport,
    MetricsError,
    compare_reports,
    evaluate,
    pr_curve,
    softmax,
)
from vinnpruner.model import Dataset, Model

from conftest import dense, random_model


def identity_model(n: int) -> Model:
    return Model("id", (n,), [dense(np.eye(n, dtype=np.float32))])


def one_hot_dataset(n_classes: int, per_class: int, gain: float = 5.0) -> Dataset:
    samples, labels = [], []
    for c in range(n_classes):
        for _ in range(per_class):
            x = np.zeros(n_classes, np.float32)
            x[c] = gain
            samples.append(x)
            labels.append(c)
    return Dataset("oh", np.asarray(samples), np.asarray(labels), [str(c) for c in range(n_classes)])


def test_perfect_model_metrics():
    model = identity_model(2)
    ds = one_hot_dataset(2, 5)
    report = evaluate(model, model.all_ones_masks(), ds)
    assert report.accuracy == 1.0
    np.testing.assert_array_equal(report.confusion, [[5, 0], [0, 5]])
    for curve in report.pr_curves:
        assert all(p == 1.0 for _, p in curve)


def test_constant_scores_predict_class_zero():
    model = Model("c", (2,), [dense(np.zeros((3, 2), np.float32))])
    ds = Dataset(
        "d", np.random.default_rng(0).standard_normal((6, 2)).astype(np.float32),
        np.array([0, 1, 2, 0, 1, 2]), ["a", "b", "c"],
    )
    report = evaluate(model, None, ds)
    assert report.confusion[:, 0].sum() == 6
    assert report.confusion[:, 1:].sum() == 0


def test_fixture_mlp_accuracy_matches_golden(mlp, blobs_test, golden):
    report = evaluate(mlp, mlp.all_ones_masks(), blobs_test)
    assert abs(report.accuracy - golden["mlp_baseline_report"]["accuracy"]) <= 1e-6
    assert abs(report.mean_loss - golden["mlp_baseline_report"]["mean_loss"]) <= 1e-6


def test_empty_dataset_rejected(mlp, blobs_test):
    with pytest.raises(Exception):
        Dataset("empty", np.zeros((0, 16), np.float32), np.zeros(0, np.int64), ["a"])


def test_loss_uses_probability_floor():
    model = Model("m", (2,), [dense([[1000.0, 0.0], [0.0, 0.0]])])
    ds = Dataset("d", np.array([[1.0, 0.0]], np.float32), np.array([1]), ["a", "b"])
    report = evaluate(model, None, ds)
    assert np.isfinite(report.mean_loss)
    assert report.mean_loss <= -np.log(1e-12) + 1e-6


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 40), n_classes=st.integers(2, 5))
def test_confusion_row_sums_and_trace(seed, n, n_classes):
    rng = np.random.default_rng(seed)
    scores = rng.standard_normal((n, n_classes))
    labels = rng.integers(0, n_classes, size=n)
    # direct counting oracle
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    correct = 0
    for s, y in zip(scores, labels):
        p = int(np.argmax(s))
        confusion[y, p] += 1
        correct += p == y
    model = Model("id", (n_classes,), [dense(np.eye(n_classes))])
    ds = Dataset("d", scores.astype(np.float32), labels, [str(i) for i in range(n_classes)])
    report = evaluate(model, None, ds)
    np.testing.assert_array_equal(report.confusion, confusion)
    for c in range(n_classes):
        assert report.confusion[c].sum() == (labels == c).sum()
    assert report.accuracy == pytest.approx(correct / n)
    assert report.accuracy == pytest.approx(np.trace(report.confusion) / n)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 50))
def test_pr_curve_monotone_recall_and_valid_points(seed, n):
    rng = np.random.default_rng(seed)
    probs = rng.random(n)
    positives = rng.random(n) < 0.4
    points = pr_curve(probs, positives)
    # sweep order is ascending threshold, so recall must be non-increasing
    recalls = [r for r, _ in points[:-1]]
    assert all(a >= b for a, b in zip(recalls, recalls[1:]))
    assert all(0.0 <= r <= 1.0 and 0.0 <= p <= 1.0 for r, p in points)
    assert points[-1] == (0.0, 1.0)


def test_loss_improves_toward_one_hot():
    rng = np.random.default_rng(2)
    model = random_model(rng, [4, 4])
    samples = rng.standard_normal((10, 4)).astype(np.float32)
    labels = rng.integers(0, 4, size=10)
    noisy = Dataset("n", samples, labels, list("abcd"))
    base = evaluate(model, None, noisy)
    sharp = Dataset(
        "s",
        np.asarray([np.eye(4, dtype=np.float32)[y] * 10 for y in labels]),
        labels,
        list("abcd"),
    )
    ident = identity_model(4)
    better = evaluate(ident, None, sharp)
    assert better.mean_loss < base.mean_loss


def test_softmax_is_a_distribution():
    p = softmax(np.array([1.0, 2.0, 3.0], np.float32))
    assert p.sum() == pytest.approx(1.0)
    assert (p > 0).all()


def test_compare_reports_identical_is_zero(mlp, blobs_test):
    r = evaluate(mlp, mlp.all_ones_masks(), blobs_test)
    delta = compare_reports(r, r)
    assert delta.accuracy_delta == 0.0 and delta.loss_delta == 0.0
    assert all(d.pruned == 0 for d in delta.sparsity_deltas)


def test_compare_reports_fixture_delta(mlp, blobs_test, golden):
    base = EvalReport.from_dict(golden["mlp_baseline_report"])
    half = EvalReport.from_dict(golden["mlp_map_half_report"])
    delta = compare_reports(base, half)
    assert delta.accuracy_delta == pytest.approx(
        golden["mlp_map_half_report"]["accuracy"] - golden["mlp_baseline_report"]["accuracy"]
    )


def test_compare_reports_class_mismatch():
    a = EvalReport(1.0, 0.0, np.zeros((2, 2), np.int64), [[], []])
    b = EvalReport(1.0, 0.0, np.zeros((3, 3), np.int64), [[], [], []])
    with pytest.raises(MetricsError):
        compare_reports(a, b)


def test_global_ratio_from_sparsity(mlp, blobs_test):
    masks = mlp.all_ones_masks()
    masks[0][:16] = 0
    report = evaluate(mlp, masks, blobs_test)
    pruned = sum(s.pruned for s in report.sparsity)
    total = sum(s.total for s in report.sparsity)
    assert report.global_ratio == pytest.approx(pruned / total)
