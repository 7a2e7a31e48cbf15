"""Small hand-built instances used by tests, the CLI and the docs."""

from __future__ import annotations

import numpy as np

from .netgraph import Network, parse_edge_list
from .perturbsim import Observation, simulate_si_homogeneous

# Two equally short routes 1-2-3-4-5-6 and 1-11-12-13-14-6. The upper route
# has an unobserved side region 7-10 hanging off node 4; the lower route
# touches the observed unperturbed nodes 15, 17, 18 and the unobserved 16.
TWO_ROUTE_EDGES = """\
1 2
2 3
3 4
4 5
5 6
1 11
11 12
12 13
13 14
14 6
4 9
9 7
9 8
9 10
7 8
12 15
13 16
16 17
14 18
"""

TWO_ROUTE_TRUE_PERTURBED = ("1", "2", "3", "4", "5", "6", "9")
TWO_ROUTE_OBSERVED = {"1": 1, "6": 1, "15": 0, "17": 0, "18": 0}


def two_route_example() -> tuple[Network, Observation]:
    net = parse_edge_list(TWO_ROUTE_EDGES)
    index = net.node_index()
    truth = np.zeros(net.node_count, dtype=np.int8)
    truth[[index[v] for v in TWO_ROUTE_TRUE_PERTURBED]] = 1
    obs = Observation.from_mapping({index[k]: v for k, v in TWO_ROUTE_OBSERVED.items()}, truth=truth)
    return net, obs


def metabolic_standin(
    seed: int,
    node_count: int = 1422,
    edge_count: int = 1760,
    n_positive: int = 19,
    n_negative: int = 84,
    c: float = 0.5,
    min_cascade: int = 60,
) -> tuple[Network, Observation]:
    """Synthetic observation shaped like a sparse metabolomics screen.

    A connected random network, one SI cascade large enough to supply the
    requested positives, and a uniformly drawn set of observed perturbed and
    unperturbed nodes.
    """
    from .netgraph import random_connected

    net = random_connected(node_count, edge_count, seed)
    rng = np.random.default_rng([seed, 7])
    for attempt in range(1000):
        outcome = simulate_si_homogeneous(net, c, seed=int(rng.integers(2**63)))
        if outcome.perturbed_count >= max(min_cascade, n_positive):
            break
    else:
        raise RuntimeError("no sufficiently large cascade found")
    pert = np.flatnonzero(outcome.state == 1)
    unpert = np.flatnonzero(outcome.state == 0)
    nodes = np.concatenate(
        [rng.choice(pert, n_positive, replace=False), rng.choice(unpert, n_negative, replace=False)]
    )
    order = np.argsort(nodes)
    states = np.concatenate([np.ones(n_positive), np.zeros(n_negative)]).astype(np.int8)
    return net, Observation(nodes[order], states[order], truth=outcome.state)
