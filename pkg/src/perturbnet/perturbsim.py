"""SI perturbation generators and observation masking."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .netgraph import Network


class SimulationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PerturbationOutcome:
    state: np.ndarray  # int8, 1 = perturbed
    root: int
    generator_params: dict
    seed: int
    # number of (attacker, target) transmission attempts made
    attempts: int = 0

    @property
    def perturbed_count(self) -> int:
        return int(self.state.sum())


@dataclass(frozen=True, eq=False)
class Observation:
    """Known final states on a subset of nodes.

    ``truth`` optionally carries the full hidden state vector so that the
    unobserved nodes can be scored afterwards.
    """

    nodes: np.ndarray
    states: np.ndarray
    truth: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.int64)
        states = np.asarray(self.states, dtype=np.int8)
        if nodes.shape != states.shape:
            raise ValueError("nodes and states must have the same length")
        if len(np.unique(nodes)) != len(nodes):
            raise ValueError("duplicate node in observation")
        if np.any((states != 0) & (states != 1)):
            raise ValueError("observed states must be 0 or 1")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "states", states)

    @classmethod
    def from_mapping(cls, observed: dict[int, int], truth=None) -> "Observation":
        items = sorted(observed.items())
        return cls(
            np.array([k for k, _ in items], dtype=np.int64),
            np.array([v for _, v in items], dtype=np.int8),
            truth=truth,
        )

    def as_dict(self) -> dict[int, int]:
        return {int(n): int(s) for n, s in zip(self.nodes, self.states)}

    def __len__(self) -> int:
        return len(self.nodes)

    def mask(self, node_count: int) -> np.ndarray:
        out = np.zeros(node_count, dtype=bool)
        out[self.nodes] = True
        return out

    def state_vector(self, node_count: int, fill: int = -1) -> np.ndarray:
        out = np.full(node_count, fill, dtype=np.int8)
        out[self.nodes] = self.states
        return out

    @property
    def perturbed_nodes(self) -> np.ndarray:
        return self.nodes[self.states == 1]

    def validate_for(self, net: Network) -> None:
        if len(self.nodes) and (self.nodes.min() < 0 or self.nodes.max() >= net.node_count):
            raise ValueError("observation references a node outside the network")


def _check_probability(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise SimulationError(f"{name} must be in [0,1]")


def _spread(net: Network, root: int, rng: np.random.Generator, draw_c) -> tuple[np.ndarray, int]:
    state = np.zeros(net.node_count, dtype=np.int8)
    state[root] = 1
    frontier = deque([root])
    attempts = 0
    while frontier:
        u = frontier.popleft()
        for v in net.adjacency[u]:
            if state[v]:
                continue
            attempts += 1
            if rng.random() < draw_c():
                state[v] = 1
                frontier.append(v)
    return state, attempts


def _pick_root(net: Network, rng: np.random.Generator, root: int | None) -> int:
    if net.node_count == 0:
        raise SimulationError("cannot simulate on an empty network")
    if root is None:
        return int(rng.integers(net.node_count))
    if not 0 <= root < net.node_count:
        raise SimulationError(f"root {root} out of range")
    return int(root)


def simulate_si_homogeneous(
    net: Network, c: float, seed: int, root: int | None = None
) -> PerturbationOutcome:
    """SI cascade where every transmission attempt succeeds with probability ``c``.

    Each perturbed node tries each still-unperturbed neighbour once, in
    breadth-first order; a failed target may still be reached later via a
    different perturbed neighbour.
    """
    _check_probability("c", c)
    rng = np.random.default_rng(seed)
    root = _pick_root(net, rng, root)
    state, attempts = _spread(net, root, rng, lambda: c)
    return PerturbationOutcome(
        state, root, {"mode": "homogeneous", "c": float(c)}, int(seed), attempts
    )


def simulate_si_heterogeneous(
    net: Network, l: float, u: float, seed: int, root: int | None = None
) -> PerturbationOutcome:
    """SI cascade whose transmission probability is redrawn from U[l, u] on every attempt."""
    _check_probability("l", l)
    _check_probability("u", u)
    if l > u:
        raise SimulationError("l must not exceed u")
    rng = np.random.default_rng(seed)
    root = _pick_root(net, rng, root)
    if l == u:
        draw = lambda: l  # noqa: E731
    else:
        draw = lambda: rng.uniform(l, u)  # noqa: E731
    state, attempts = _spread(net, root, rng, draw)
    params = {"mode": "heterogeneous", "l": float(l), "u": float(u), "c_draw": "per-attempt"}
    return PerturbationOutcome(state, root, params, int(seed), attempts)


def mask_observation(
    outcome: PerturbationOutcome,
    fraction_observed: float,
    seed: int,
    bias: float | None = None,
) -> Observation:
    """Reveal ``floor(fraction_observed * N)`` node states.

    With ``bias`` set, perturbed nodes are drawn with weight ``bias`` and
    unperturbed ones with weight 1 (successive sampling without replacement).
    """
    if not 0.0 < fraction_observed <= 1.0:
        raise SimulationError("fraction_observed must be in (0,1]")
    n = len(outcome.state)
    size = int(np.floor(fraction_observed * n + 1e-9))
    if size == 0:
        raise SimulationError("empty observation")
    rng = np.random.default_rng(seed)
    if bias is None:
        chosen = rng.choice(n, size=size, replace=False)
    else:
        if bias <= 0:
            raise SimulationError("bias must be positive")
        weights = np.where(outcome.state == 1, float(bias), 1.0)
        chosen = rng.choice(n, size=size, replace=False, p=weights / weights.sum())
    chosen = np.sort(chosen)
    return Observation(chosen, outcome.state[chosen], truth=outcome.state.copy())
