import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linear_sum_assignment

from acspeech.metrics import (LabelMismatchError, MatchCounts, boundary_report,
                              classification_report, confusion_counts, match_boundaries, prf,
                              row_normalise, write_confusion_csv)

frames = st.lists(st.integers(0, 200), max_size=25, unique=True)


def greedy_oracle(detected, truth, tol):
    """The matching rule written out on plain lists."""
    free = sorted(detected)
    tp = 0
    for g in sorted(truth):
        window = [d for d in free if abs(d - g) <= tol]
        if window:
            best = min(window, key=lambda d: (abs(d - g), d))
            free.remove(best)
            tp += 1
    return MatchCounts(tp, len(detected) - tp, len(truth) - tp)


def max_matching(detected, truth, tol):
    if not detected or not truth:
        return 0
    cost = np.array([[0 if abs(d - g) <= tol else 1 for d in detected] for g in truth])
    r, c = linear_sum_assignment(cost)
    return int((cost[r, c] == 0).sum())


def test_matching_examples():
    c = match_boundaries([11, 80], [10, 50], 2)
    assert c == MatchCounts(1, 1, 1)
    assert prf(c) == pytest.approx((0.5, 0.5, 0.5))
    assert match_boundaries([11], [10, 12], 2) == MatchCounts(1, 0, 1)
    assert prf(match_boundaries([3, 9], [3, 9], 0)) == (1.0, 1.0, 1.0)


def test_tie_goes_to_earlier_detection():
    # 10 can take 9 or 11; taking 9 leaves 11 for 13
    assert match_boundaries([9, 11], [10, 13], 2).tp == 2


def test_empty_detections_score_zero():
    assert prf(match_boundaries([], [4, 8], 2)) == (0.0, 0.0, 0.0)
    assert prf(MatchCounts(0, 0, 0)) == (0.0, 0.0, 0.0)


@given(frames, frames, st.integers(0, 6))
def test_matching_agrees_with_oracle(det, gt, tol):
    assert match_boundaries(det, gt, tol) == greedy_oracle(det, gt, tol)


@given(frames, frames, st.integers(0, 6))
def test_matching_invariants(det, gt, tol):
    c = match_boundaries(det, gt, tol)
    assert c.tp + c.fp == len(det) and c.tp + c.fn == len(gt)
    assert c.tp <= max_matching(det, gt, tol)
    shifted = match_boundaries([d + 7 for d in det], [g + 7 for g in gt], tol)
    assert shifted == c
    p, r, f = prf(c)
    assert 0 <= min(p, r, f) and max(p, r, f) <= 1


def test_single_seed_report_equals_its_counts():
    c = MatchCounts(3, 1, 2)
    rep = boundary_report({0: [c]}, 2)
    p, r, f = prf(c)
    assert rep.mean == pytest.approx({"precision": p, "recall": r, "f1": f})
    assert rep.std == {"precision": 0.0, "recall": 0.0, "f1": 0.0}


def test_report_micro_averages_then_spreads_over_seeds():
    rep = boundary_report({0: [MatchCounts(1, 0, 0), MatchCounts(0, 1, 1)],
                           1: [MatchCounts(2, 0, 0)]}, 5)
    assert rep.per_seed[0]["f1"] == pytest.approx(0.5)
    assert rep.per_seed[1]["f1"] == 1.0
    assert rep.mean["f1"] == pytest.approx(0.75)
    assert rep.std["f1"] == pytest.approx(np.std([0.5, 1.0]))
    assert rep.to_dict()["tolerance_frames"] == 5


def test_report_needs_data():
    with pytest.raises(ValueError):
        boundary_report({}, 2)


def test_classification_report_values():
    rep = classification_report(list("aabc"), list("abbc"), ["a", "b", "c"])
    assert rep["accuracy"] == 0.75
    assert rep["confusion"] == [[1, 0, 0], [1, 1, 0], [0, 0, 1]]
    assert rep["per_class"]["a"]["precision"] == 0.5
    assert rep["per_class"]["b"]["recall"] == 0.5
    assert rep["chance"] == pytest.approx(1 / 3)


@pytest.mark.parametrize("n, chance", [(39, 0.026), (10, 0.100)])
def test_chance_levels(n, chance):
    labels = [str(i) for i in range(n)]
    assert round(classification_report(labels, labels, labels)["chance"], 3) == chance


def test_perfect_and_constant_predictors():
    truths = [c for c in "abcd" for _ in range(5)]
    perfect = classification_report(truths, truths)
    assert perfect["accuracy"] == 1.0
    assert np.array_equal(np.array(perfect["confusion"]), 5 * np.eye(4, dtype=int))
    assert classification_report(["a"] * 20, truths)["accuracy"] == pytest.approx(0.25)


def test_length_mismatch():
    with pytest.raises(LabelMismatchError):
        confusion_counts(["a"], ["a", "b"], ["a", "b"])


def test_row_normalise_handles_empty_rows():
    np.testing.assert_allclose(row_normalise(np.array([[1, 3], [0, 0]])), [[0.25, 0.75], [0, 0]])


def test_confusion_csv(tmp_path):
    write_confusion_csv(tmp_path / "c.csv", np.array([[2, 0], [1, 1]]), ["x", "y"])
    assert (tmp_path / "c.csv").read_text().splitlines() == ["true\\pred,x,y", "x,2,0", "y,1,1"]
