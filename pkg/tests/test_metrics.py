import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pugnn.metrics import compute_metrics, confusion, f1_from_counts, pairwise_auc, rank_auc


def labelled(draw_scores, min_size=2, max_size=200):
    return st.integers(min_size, max_size).flatmap(
        lambda n: st.tuples(
            st.lists(draw_scores, min_size=n, max_size=n),
            st.lists(st.sampled_from([1, -1]), min_size=n, max_size=n).filter(lambda l: len(set(l)) == 2),
        )
    )


def test_perfect_scores():
    y = np.array([1, -1, 1, -1, -1])
    r = compute_metrics(y.astype(float), y)
    assert (r.f1, r.auc, r.tpr, r.tnr) == (1.0, 1.0, 1.0, 1.0)


def test_confusion_hand_example():
    # TP=2, FP=1, FN=2, TN=6: precision 2/3, recall 1/2
    labels = np.array([1, 1, -1, 1, 1] + [-1] * 6)
    scores = np.array([0.9, 0.5, 0.3, -0.2, -0.4] + [-0.5] * 6)
    r = compute_metrics(scores, labels)
    assert (r.tp, r.fp, r.fn, r.tn) == (2, 1, 2, 6)
    assert r.f1 == pytest.approx(4 / 7, abs=1e-15)
    assert r.tpr == 0.5 and r.tnr == pytest.approx(6 / 7, abs=1e-15)


def test_f1_formula():
    assert f1_from_counts(2, 1, 1) == pytest.approx(2 / 3, abs=1e-15)
    assert f1_from_counts(2, 1, 2) == pytest.approx(4 / 7, abs=1e-15)


def test_threshold_is_strict():
    r = compute_metrics([0.0, 0.0], [1, -1])
    assert (r.tp, r.fp) == (0, 0)


def test_all_ties_auc_half():
    assert rank_auc([0.3] * 6, [1, -1, 1, -1, -1, 1]) == 0.5


def test_single_class_auc_error():
    with pytest.raises(ValueError, match="single class"):
        compute_metrics([0.1, 0.2], [1, 1])


def test_degenerate_f1_warns():
    with pytest.warns(RuntimeWarning, match="F1 undefined"):
        assert f1_from_counts(0, 0, 0) == 0.0


def test_shape_mismatch():
    with pytest.raises(ValueError):
        compute_metrics([0.1, 0.2, 0.3], [1, -1])


@settings(max_examples=200, deadline=None)
@given(labelled(st.integers(-5, 5).map(float)))
def test_rank_auc_equals_pairwise_with_ties(data):
    scores, labels = data
    assert rank_auc(scores, labels) == pairwise_auc(scores, labels)


@settings(max_examples=200, deadline=None)
@given(labelled(st.floats(-1, 1)))
def test_rank_auc_equals_pairwise(data):
    scores, labels = data
    assert rank_auc(scores, labels) == pairwise_auc(scores, labels)


@settings(max_examples=100, deadline=None)
@given(labelled(st.integers(-60, 60).map(lambda k: k / 16)))
def test_auc_monotone_invariance(data):
    # coarse grid so that the transforms stay strictly increasing in floating point
    scores, labels = data
    s = np.asarray(scores)
    assert rank_auc(np.exp(s), labels) == rank_auc(s, labels)
    assert rank_auc(s ** 3 + 2 * s, labels) == rank_auc(s, labels)


@settings(max_examples=100, deadline=None)
@given(labelled(st.floats(-1, 1)), st.randoms(use_true_random=False))
def test_order_free(data, rnd):
    scores, labels = data
    idx = list(range(len(scores)))
    rnd.shuffle(idx)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        a = compute_metrics(scores, labels)
        b = compute_metrics(np.asarray(scores)[idx], np.asarray(labels)[idx])
    assert a == b


@settings(max_examples=100, deadline=None)
@given(labelled(st.floats(-1, 1)))
def test_report_invariants(data):
    scores, labels = data
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        r = compute_metrics(scores, labels)
    assert r.tp + r.fp + r.fn + r.tn == len(labels)
    assert r.tpr == r.tp / (r.tp + r.fn) and r.tnr == r.tn / (r.tn + r.fp)
    for v in (r.f1, r.auc, r.tpr, r.tnr):
        assert 0.0 <= v <= 1.0


def test_confusion_counts():
    assert confusion([1, 1, -1, -1], [1, -1, 1, -1]) == (1, 1, 1, 1)
