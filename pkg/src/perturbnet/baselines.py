"""Comparator rankings: shortest-path parsimony and label propagation."""

from __future__ import annotations

import numpy as np

from .netgraph import UNREACHABLE, Network, bfs_distances
from .perturbsim import Observation
from .scores import ScoreVector


class BaselineError(ValueError):
    pass


def shortest_path_scores(net: Network, obs: Observation) -> ScoreVector:
    """Count, per node, the observed-perturbed pairs it lies on a geodesic of.

    ``v`` is on some shortest s-t path iff ``d(s, v) + d(v, t) == d(s, t)``.
    Pairs in different components are skipped. Observed nodes take part as
    endpoints only; their own score is reported as 0.
    """
    obs.validate_for(net)
    sources = obs.perturbed_nodes
    if len(sources) == 0:
        raise BaselineError("parsimony undefined: no observed perturbed node")
    dist = np.stack([bfs_distances(net, int(s)) for s in sources])
    reach = dist != UNREACHABLE
    score = np.zeros(net.node_count)
    for a in range(len(sources) - 1):
        da, ra = dist[a], reach[a]
        others = np.arange(a + 1, len(sources))
        d_st = dist[others, sources[a]]
        others = others[d_st != UNREACHABLE]
        if len(others) == 0:
            continue
        d_st = dist[others, sources[a]]
        on_path = ra[None, :] & reach[others] & (da[None, :] + dist[others] == d_st[:, None])
        score += on_path.sum(axis=0)
    score[obs.nodes] = 0.0
    return ScoreVector(score, "shortest_paths")


def label_propagation_scores(
    net: Network,
    obs: Observation,
    tolerance: float = 1e-6,
    max_iters: int = 10_000,
    initial: float = 0.5,
) -> ScoreVector:
    """Clamped neighbour-averaging iteration (harmonic label propagation).

    Unobserved scores start at ``initial`` and are repeatedly replaced by the
    mean of their neighbours' scores (Jacobi sweep); observed nodes stay at
    their state. Isolated unobserved nodes keep the initial value.
    """
    obs.validate_for(net)
    if len(obs) == 0:
        raise BaselineError("label propagation needs at least one observed node")
    adj = net.adjacency_matrix
    deg = net.degrees.astype(np.float64)
    free = ~obs.mask(net.node_count) & (deg > 0)
    f = np.full(net.node_count, float(initial))
    f[obs.nodes] = obs.states
    inv_deg = np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 0.0)
    converged = False
    for _ in range(max_iters):
        mean = (adj @ f) * inv_deg
        change = float(np.max(np.abs(mean[free] - f[free]), initial=0.0))
        f[free] = mean[free]
        if change < tolerance:
            converged = True
            break
    return ScoreVector(f, "label_propagation", converged=converged)
