import math

import numpy as np
import pytest
from sklearn.metrics import auc

from exceptions import InvalidInputError
from metrics import ConfusionCounts, CurvePoints, confusion, evaluate_scores, macro_scores, mcc, pr_auc, prf1, roc_auc
from test_utils.oracles import confusion_by_counting, mann_whitney_auc, pr_auc_by_sweep


def test_confusion_of_a_perfect_pair():
    assert confusion([1, 0], [1, 0]) == ConfusionCounts(tp=1, fp=0, tn=1, fn=0)


def test_flipped_predictions_swap_counts():
    rng = np.random.default_rng(0)
    truth, predicted = rng.integers(0, 2, 40), rng.integers(0, 2, 40)
    c, flipped = confusion(truth, predicted), confusion(truth, 1 - predicted)
    assert (flipped.tp, flipped.fn, flipped.tn, flipped.fp) == (c.fn, c.tp, c.fp, c.tn)


def test_confusion_matches_counting():
    rng = np.random.default_rng(1)
    for _ in range(20):
        truth, predicted = rng.integers(0, 2, 50), rng.integers(0, 2, 50)
        c = confusion(truth, predicted)
        assert c.to_dict() == confusion_by_counting(truth.tolist(), predicted.tolist())
        assert c.total == 50


def test_confusion_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        confusion([0, 1], [0])
    with pytest.raises(InvalidInputError):
        confusion([0, 2], [0, 1])


def test_rates_by_hand():
    perfect = prf1(ConfusionCounts(tp=5, fp=0, tn=3, fn=0))
    assert (perfect.precision, perfect.recall, perfect.f1) == (1.0, 1.0, 1.0)
    mixed = prf1(ConfusionCounts(tp=5, fp=2, tn=8, fn=1))
    assert mixed.precision == pytest.approx(5 / 7)
    assert mixed.recall == pytest.approx(5 / 6)
    assert mixed.fpr == pytest.approx(0.2)
    assert mixed.f1 == pytest.approx(10 / 13, abs=1e-12)
    assert not mixed.degenerate


def test_zero_denominators_are_flagged():
    rates = prf1(ConfusionCounts(tp=0, fp=0, tn=4, fn=3))
    assert rates.precision == 0.0
    assert {"precision", "f1"} <= rates.degenerate
    precision, recall, fpr, f1 = rates
    assert (precision, recall, fpr, f1) == (0.0, 0.0, 0.0, 0.0)


def test_mcc_by_hand():
    assert mcc(ConfusionCounts(tp=5, fp=2, tn=8, fn=1)) == pytest.approx(38 / math.sqrt(3780), abs=1e-12)
    assert mcc(ConfusionCounts(tp=4, fp=0, tn=6, fn=0)) == 1.0
    assert mcc(ConfusionCounts(tp=0, fp=6, tn=0, fn=4)) == -1.0
    assert mcc(ConfusionCounts(tp=3, fp=2, tn=0, fn=0)) == 0.0


def test_mcc_ignores_which_class_is_positive():
    rng = np.random.default_rng(2)
    for _ in range(20):
        c = ConfusionCounts(*(int(v) for v in rng.integers(1, 20, 4)))
        assert mcc(c) == pytest.approx(mcc(c.swapped()), abs=1e-12)


def test_roc_extremes():
    assert roc_auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9])[0] == 1.0
    assert roc_auc([0, 1, 0, 1], [0.5] * 4)[0] == pytest.approx(0.5)
    with pytest.raises(InvalidInputError):
        roc_auc([1, 1, 1], [0.1, 0.2, 0.3])


def test_roc_matches_pair_counting():
    rng = np.random.default_rng(3)
    for case in range(500):
        n = int(rng.integers(2, 13))
        labels = rng.integers(0, 2, n)
        labels[:2] = [0, 1]
        scores = rng.integers(0, 5, n) / 4.0 if case % 2 else rng.random(n)
        area, curve = roc_auc(labels, scores)
        assert area == pytest.approx(mann_whitney_auc(labels.tolist(), scores.tolist()), abs=1e-12)
        assert len(curve) == len(np.unique(scores)) + 1
        assert np.all(np.diff(curve.thresholds) < 0)
        assert np.all(np.diff(curve.x) >= 0) and np.all(np.diff(curve.y) >= 0)
        assert (curve.x[0], curve.y[0], curve.x[-1], curve.y[-1]) == (0.0, 0.0, 1.0, 1.0)


def test_negated_scores_complement_the_area():
    rng = np.random.default_rng(4)
    labels = np.array([0, 1] * 10)
    scores = rng.permutation(20) / 20.0
    assert roc_auc(labels, scores)[0] + roc_auc(labels, -scores)[0] == pytest.approx(1.0, abs=1e-12)


def test_metrics_ignore_paired_order():
    rng = np.random.default_rng(5)
    labels = rng.integers(0, 2, 30)
    labels[:2] = [0, 1]
    scores = rng.random(30)
    perm = rng.permutation(30)
    first, second = evaluate_scores(labels, scores), evaluate_scores(labels[perm], scores[perm])
    assert first.to_dict() == second.to_dict()


def test_pr_area():
    assert pr_auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9])[0] == pytest.approx(1.0)
    assert pr_auc([0, 1, 0, 0], [0.3] * 4)[0] == pytest.approx(0.25)
    with pytest.raises(InvalidInputError):
        pr_auc([0, 0], [0.1, 0.2])
    labels, scores = [0, 1, 1, 0, 1, 0], [0.9, 0.8, 0.4, 0.4, 0.3, 0.1]
    area, curve = pr_auc(labels, scores)
    assert area == pytest.approx(pr_auc_by_sweep(labels, scores), abs=1e-12)
    assert curve.x[0] == 0.0 and curve.y[0] == curve.y[1] == 0.0
    assert np.all(np.diff(curve.thresholds) < 0)


def test_pr_matches_the_sweep():
    rng = np.random.default_rng(6)
    for _ in range(100):
        n = int(rng.integers(2, 13))
        labels = rng.integers(0, 2, n)
        labels[0] = 1
        scores = rng.integers(0, 6, n) / 5.0
        assert pr_auc(labels, scores)[0] == pytest.approx(pr_auc_by_sweep(labels.tolist(), scores.tolist()), abs=1e-12)


def test_macro_scores_average_both_classes():
    c = ConfusionCounts(tp=5, fp=2, tn=8, fn=1)
    macro = macro_scores(c)
    assert macro["precision"] == pytest.approx((5 / 7 + 8 / 9) / 2)
    assert macro["recall"] == pytest.approx((5 / 6 + 0.8) / 2)


def test_report_document():
    report = evaluate_scores([0, 0, 1, 1, 0], [0.1, 0.7, 0.8, 0.9, 0.2])
    document = report.to_dict()
    assert set(document) == {"precision", "recall", "f1", "fpr", "auc_roc", "pr_auc", "mcc", "confusion",
                             "flags", "macro"}
    assert document["confusion"] == {"tp": 2, "fp": 1, "tn": 2, "fn": 0}
    assert document["flags"] == []


def test_curve_csv_round_trip(tmp_path):
    area, curve = roc_auc([0, 1, 0, 1, 1], [0.1, 0.35, 0.4, 0.8, 1 / 3])
    path = str(tmp_path / "roc.csv")
    curve.save_csv(path)
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    assert lines[0] == "threshold,x,y"
    assert lines[1].startswith("inf,0,0")
    assert len(lines) == len(curve) + 1
    loaded = CurvePoints.load_csv(path, "roc")
    assert np.array_equal(loaded.x, curve.x) and np.array_equal(loaded.y, curve.y)
    assert np.array_equal(loaded.thresholds, curve.thresholds)
    assert auc(loaded.x, loaded.y) == pytest.approx(area, abs=1e-9)
