"""AUC with half credit for ties, evaluation sets and the hold-out protocol."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .perturbsim import Observation
from .scores import ScoreVector

HOLDOUT_ATTEMPTS = 100


class MetricError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EvaluationSet:
    positives: np.ndarray
    negatives: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positives, dtype=np.int64)
        neg = np.asarray(self.negatives, dtype=np.int64)
        if np.intersect1d(pos, neg).size:
            raise MetricError("positives and negatives overlap")
        object.__setattr__(self, "positives", pos)
        object.__setattr__(self, "negatives", neg)

    @property
    def nodes(self) -> np.ndarray:
        return np.concatenate([self.positives, self.negatives])

    @property
    def defined(self) -> bool:
        return len(self.positives) > 0 and len(self.negatives) > 0


def evaluation_set(obs: Observation, truth: np.ndarray | None = None) -> EvaluationSet:
    """Unobserved nodes split by their true state."""
    truth = obs.truth if truth is None else truth
    if truth is None:
        raise MetricError("observation carries no ground truth")
    truth = np.asarray(truth)
    hidden = ~obs.mask(len(truth))
    return EvaluationSet(np.flatnonzero(hidden & (truth == 1)), np.flatnonzero(hidden & (truth == 0)))


def tie_groups(values: np.ndarray, tolerance: float = 0.0) -> np.ndarray:
    """Replace values by group ids; sorted neighbours closer than ``tolerance`` share a group."""
    values = np.asarray(values, dtype=float)
    if tolerance <= 0 or len(values) < 2:
        return values
    order = np.argsort(values, kind="stable")
    gaps = np.diff(values[order]) > tolerance
    groups = np.empty(len(values))
    groups[order] = np.concatenate(([0], np.cumsum(gaps)))
    return groups


def tolerant_rankdata(values: np.ndarray, tolerance: float = 0.0) -> np.ndarray:
    """Average ranks, treating values within ``tolerance`` (chained) as ties."""
    return rankdata(tie_groups(values, tolerance))


def auc(
    scores: ScoreVector | np.ndarray, eval_set: EvaluationSet, tie_tolerance: float = 0.0
) -> float:
    """Fraction of (positive, negative) pairs ranked correctly, ties counting one half.

    Computed from average ranks (Mann-Whitney U) in O(m log m). Scores
    closer than ``tie_tolerance`` count as tied.
    """
    if not eval_set.defined:
        raise MetricError("AUC undefined: need at least one positive and one negative")
    values = scores.score if isinstance(scores, ScoreVector) else np.asarray(scores, dtype=float)
    pos = values[eval_set.positives]
    neg = values[eval_set.negatives]
    ranks = tolerant_rankdata(np.concatenate([pos, neg]), tie_tolerance)
    n_pos, n_neg = len(pos), len(neg)
    u = ranks[:n_pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def rank_correlation(a: np.ndarray, b: np.ndarray, tie_tolerance: float = 0.0) -> float:
    """Spearman correlation with tolerant ties.

    Two constant vectors count as perfectly correlated; a constant against a
    non-constant vector gives 0.
    """
    ra = tolerant_rankdata(a, tie_tolerance)
    rb = tolerant_rankdata(b, tie_tolerance)
    flat_a = np.ptp(ra) == 0
    flat_b = np.ptp(rb) == 0
    if flat_a or flat_b:
        return 1.0 if flat_a and flat_b else 0.0
    return float(np.corrcoef(ra, rb)[0, 1])


def holdout_split(
    obs: Observation, hide_fraction: float, seed: int
) -> tuple[Observation, EvaluationSet]:
    """Move ``floor(hide_fraction * |O|)`` observed nodes into an evaluation set.

    Draws are repeated (same seed stream) until both classes are present in
    the hidden part, up to ``HOLDOUT_ATTEMPTS`` tries.
    """
    if not 0.0 < hide_fraction < 1.0:
        raise MetricError("hide_fraction must be in (0,1)")
    if len(obs) == 0:
        raise MetricError("observation is empty")
    size = int(np.floor(hide_fraction * len(obs) + 1e-9))
    if size == 0:
        raise MetricError("hide_fraction hides no node")
    rng = np.random.default_rng(seed)
    for _ in range(HOLDOUT_ATTEMPTS):
        pick = np.zeros(len(obs), dtype=bool)
        pick[rng.choice(len(obs), size=size, replace=False)] = True
        hidden_states = obs.states[pick]
        if hidden_states.any() and not hidden_states.all():
            reduced = Observation(obs.nodes[~pick], obs.states[~pick], truth=obs.truth)
            hidden = obs.nodes[pick]
            return reduced, EvaluationSet(hidden[hidden_states == 1], hidden[hidden_states == 0])
    raise MetricError(
        f"could not draw an evaluation set with both classes in {HOLDOUT_ATTEMPTS} attempts"
    )
