"""Infer which nodes of a partially observed network were reached by a spreading perturbation."""

from .baselines import label_propagation_scores, shortest_path_scores
from .evalmetrics import EvaluationSet, auc, evaluation_set, holdout_split
from .exact_oracle import ExactMarginals, exact_eta_opt, exact_marginals_at_eta
from .exposure_bp import BeliefState, Diagnostics, SolverSettings, infer, solve_at_eta
from .netgraph import Network, bfs_distances, giant_component, parse_edge_list, read_edge_list
from .perturbsim import (
    Observation,
    PerturbationOutcome,
    mask_observation,
    simulate_si_heterogeneous,
    simulate_si_homogeneous,
)
from .scores import ScoreVector

__all__ = [
    "BeliefState",
    "Diagnostics",
    "EvaluationSet",
    "ExactMarginals",
    "Network",
    "Observation",
    "PerturbationOutcome",
    "ScoreVector",
    "SolverSettings",
    "auc",
    "bfs_distances",
    "evaluation_set",
    "exact_eta_opt",
    "exact_marginals_at_eta",
    "giant_component",
    "holdout_split",
    "infer",
    "label_propagation_scores",
    "mask_observation",
    "parse_edge_list",
    "read_edge_list",
    "shortest_path_scores",
    "simulate_si_heterogeneous",
    "simulate_si_homogeneous",
    "solve_at_eta",
]
