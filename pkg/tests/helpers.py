"""Instance builders shared by the test modules."""

import numpy as np

from perturbnet.netgraph import Network, erdos_renyi, giant_component, random_tree
from perturbnet.perturbsim import Observation, simulate_si_homogeneous


def graph(n, edges):
    return Network.from_edges(n, edges)


def path(n):
    return graph(n, [(i, i + 1) for i in range(n - 1)])


def star(k):
    """Centre 0 with leaves 1..k."""
    return graph(k + 1, [(0, i) for i in range(1, k + 1)])


def cycle(n):
    return graph(n, [(i, (i + 1) % n) for i in range(n)])


def observe(mapping, truth=None):
    return Observation.from_mapping(mapping, truth=truth)


def oracle_instance(rng, index, max_hidden=15):
    """Small SI instance for BP-vs-enumeration checks.

    Even indices use Erdos-Renyi graphs (<k> = 3), odd ones random trees;
    N in [10, 30] before taking the giant component, between 5 and
    ``max_hidden`` unobserved nodes.
    """
    while True:
        n = int(rng.integers(10, 31))
        s = int(rng.integers(2**32))
        net = giant_component(erdos_renyi(n, 3.0, s) if index % 2 == 0 else random_tree(n, s))
        if net.node_count < 6:
            continue
        out = simulate_si_homogeneous(net, float(rng.uniform(0.3, 0.7)), int(rng.integers(2**32)))
        if out.perturbed_count < 2:
            continue
        m = int(rng.integers(5, min(max_hidden, net.node_count - 1) + 1))
        hidden = rng.choice(net.node_count, m, replace=False)
        keep = np.ones(net.node_count, bool)
        keep[hidden] = False
        nodes = np.flatnonzero(keep)
        return net, Observation(nodes, out.state[nodes], truth=out.state)


def exposed_fraction(net, state):
    """(perturbed nodes with a perturbed neighbour) / (nodes with a perturbed neighbour)."""
    state = np.asarray(state)
    exposed = np.array([state[list(net.adjacency[i])].any() for i in range(net.node_count)], dtype=bool)
    if not exposed.any():
        return None
    return float((exposed & (state == 1)).sum() / exposed.sum())
