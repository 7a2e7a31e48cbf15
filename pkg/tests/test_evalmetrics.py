import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from perturbnet.evalmetrics import (
    EvaluationSet,
    MetricError,
    auc,
    evaluation_set,
    holdout_split,
    rank_correlation,
    tolerant_rankdata,
)
from perturbnet.perturbsim import Observation


def brute_auc(pos, neg):
    total = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return total / (len(pos) * len(neg))


def scored(pos, neg):
    values = np.concatenate([pos, neg])
    es = EvaluationSet(np.arange(len(pos)), np.arange(len(pos), len(values)))
    return values, es


def test_examples():
    assert auc(*scored([0.9], [0.1])) == 1.0
    assert auc(*scored([0.3, 0.3], [0.3, 0.3, 0.3])) == 0.5
    assert auc(*scored([0.8, 0.2], [0.6, 0.1])) == 0.75


def test_undefined():
    with pytest.raises(MetricError, match="AUC undefined"):
        auc(np.zeros(3), EvaluationSet([0, 1], []))


def test_overlapping_sets_rejected():
    with pytest.raises(MetricError):
        EvaluationSet([0, 1], [1, 2])


@pytest.mark.parametrize("seed", range(200))
def test_rank_auc_equals_brute_force(seed):
    rng = np.random.default_rng(seed)
    p, n = rng.integers(1, 31, size=2)
    # few distinct levels so that ties are frequent
    levels = rng.integers(2, 8)
    pos = rng.integers(0, levels, p) / levels
    neg = rng.integers(0, levels, n) / levels
    assert auc(*scored(pos, neg)) == brute_auc(pos, neg)


# multiples of 1/8 keep the cubic map strictly increasing in floating point
score_lists = st.lists(st.integers(-40, 40).map(lambda k: k / 8), min_size=1, max_size=20)


@given(score_lists, score_lists)
def test_invariant_under_increasing_maps(pos, neg):
    values, es = scored(np.array(pos), np.array(neg))
    base = auc(values, es)
    assert auc(2.0 * values + 3.0, es) == pytest.approx(base)
    assert auc(values**3, es) == pytest.approx(base)


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=30, unique=True), st.integers(1, 29))
def test_complementarity_without_ties(values, split):
    split = min(split, len(values) - 1)
    values = np.array(values)
    es = EvaluationSet(np.arange(split), np.arange(split, len(values)))
    assert auc(values, es) + auc(-values, es) == pytest.approx(1.0)


def test_tolerant_ties():
    v = np.array([0.1, 0.1 + 1e-9, 0.5])
    assert tolerant_rankdata(v, 1e-6).tolist() == [1.5, 1.5, 3.0]
    assert tolerant_rankdata(v).tolist() == [1.0, 2.0, 3.0]
    assert auc(np.array([0.2 + 1e-9, 0.2]), EvaluationSet([0], [1]), tie_tolerance=1e-6) == 0.5


def test_rank_correlation():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    assert rank_correlation(a, a**2) == pytest.approx(1.0)
    assert rank_correlation(a, -a) == pytest.approx(-1.0)
    assert rank_correlation(np.ones(3), np.ones(3)) == 1.0
    assert rank_correlation(np.ones(4), a) == 0.0


def test_evaluation_set_from_observation():
    truth = np.array([1, 1, 0, 0, 1], dtype=np.int8)
    obs = Observation([0, 2], truth[[0, 2]], truth=truth)
    es = evaluation_set(obs)
    assert es.positives.tolist() == [1, 4] and es.negatives.tolist() == [3]
    with pytest.raises(MetricError):
        evaluation_set(Observation([0], [1]))


def test_holdout_sizes():
    obs = Observation(np.arange(10), np.array([1, 0] * 5))
    reduced, es = holdout_split(obs, 0.3, seed=1)
    assert len(reduced) == 7 and len(es.nodes) == 3
    assert not set(reduced.nodes) & set(es.nodes)
    assert es.defined


def test_holdout_all_unperturbed():
    with pytest.raises(MetricError):
        holdout_split(Observation(np.arange(10), np.zeros(10)), 0.5, seed=0)


def test_holdout_metabolic_shape():
    states = np.array([1] * 19 + [0] * 84)
    obs = Observation(np.arange(103), states)
    reduced, es = holdout_split(obs, 0.5, seed=3)
    assert len(es.nodes) == 51 and len(reduced) == 52
    assert len(es.positives) >= 1 and len(es.negatives) >= 1
    hidden = dict(zip(obs.nodes.tolist(), obs.states.tolist()))
    assert all(hidden[v] == 1 for v in es.positives) and all(hidden[v] == 0 for v in es.negatives)


def test_holdout_deterministic():
    obs = Observation(np.arange(40), np.arange(40) % 3 == 0)
    a = holdout_split(obs, 0.4, seed=9)
    b = holdout_split(obs, 0.4, seed=9)
    assert np.array_equal(a[0].nodes, b[0].nodes) and np.array_equal(a[1].positives, b[1].positives)
