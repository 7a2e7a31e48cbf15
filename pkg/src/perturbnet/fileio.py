"""Text formats for observations and simulated outcomes.

Both are ``label<TAB>state`` lines with ``#`` comments; outcome files carry
their generator settings in ``# key: value`` header lines.
"""

from __future__ import annotations

import json

import numpy as np

from .netgraph import Network
from .perturbsim import Observation, PerturbationOutcome


class FormatError(ValueError):
    pass


def _state_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2 or tokens[1] not in ("0", "1"):
            raise FormatError(f"line {lineno}: expected '<label> 0|1'")
        yield lineno, tokens[0], int(tokens[1])


def parse_observation(text: str, net: Network) -> Observation:
    """Observation over ``net``; every label must be a node of the network."""
    index = net.node_index()
    observed: dict[int, int] = {}
    for lineno, label, state in _state_lines(text):
        if label not in index:
            raise FormatError(f"line {lineno}: node {label!r} is not in the network")
        node = index[label]
        if node in observed:
            raise FormatError(f"line {lineno}: node {label!r} observed twice")
        observed[node] = state
    return Observation.from_mapping(observed)


def read_observation(path, net: Network) -> Observation:
    with open(path, encoding="utf-8") as fh:
        return parse_observation(fh.read(), net)


def format_observation(net: Network, obs: Observation) -> str:
    lines = [f"{net.label(int(n))}\t{int(s)}" for n, s in zip(obs.nodes, obs.states)]
    return "\n".join(lines) + "\n"


def format_outcome(net: Network, outcome: PerturbationOutcome) -> str:
    header = [
        f"# mode: {outcome.generator_params.get('mode', '')}",
        f"# params: {json.dumps(outcome.generator_params, sort_keys=True)}",
        f"# root: {net.label(outcome.root)}",
        f"# seed: {outcome.seed}",
        f"# attempts: {outcome.attempts}",
    ]
    body = [f"{net.label(i)}\t{int(s)}" for i, s in enumerate(outcome.state)]
    return "\n".join(header + body) + "\n"


def parse_outcome(text: str, net: Network) -> PerturbationOutcome:
    """Inverse of :func:`format_outcome`; every node must be listed."""
    meta = {}
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("#") and ":" in line:
            key, value = line[1:].split(":", 1)
            meta[key.strip()] = value.strip()
    index = net.node_index()
    state = np.full(net.node_count, -1, dtype=np.int8)
    for lineno, label, value in _state_lines(text):
        if label not in index:
            raise FormatError(f"line {lineno}: node {label!r} is not in the network")
        state[index[label]] = value
    if np.any(state < 0):
        raise FormatError("outcome does not list every node")
    try:
        root = index[meta["root"]]
        params = json.loads(meta["params"])
        seed = int(meta["seed"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"outcome header incomplete: {exc}") from None
    return PerturbationOutcome(state, root, params, seed, int(meta.get("attempts", 0)))


def read_outcome(path, net: Network) -> PerturbationOutcome:
    with open(path, encoding="utf-8") as fh:
        return parse_outcome(fh.read(), net)
