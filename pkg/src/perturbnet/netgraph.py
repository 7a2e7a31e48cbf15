"""Undirected simple graphs, edge-list ingestion and connectivity helpers."""

from __future__ import annotations

import heapq
import logging
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

UNREACHABLE = -1


class GraphError(ValueError):
    pass


class EdgeListParseError(GraphError):
    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable undirected simple graph over nodes ``0 .. node_count - 1``.

    Build instances with :meth:`from_edges` (or :func:`parse_edge_list`);
    the constructor trusts its arguments.
    """

    node_count: int
    edges: tuple[tuple[int, int], ...]
    adjacency: tuple[tuple[int, ...], ...]
    labels: tuple[str, ...] | None = None
    # original index of every node when this network is an induced subgraph
    index_map: tuple[int, ...] | None = None
    ingest_stats: dict = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_edges(
        cls,
        node_count: int,
        edges: Iterable[tuple[int, int]],
        labels: Sequence[str] | None = None,
        index_map: Sequence[int] | None = None,
    ) -> "Network":
        if node_count < 0:
            raise GraphError("node_count must be non-negative")
        if labels is not None and len(labels) != node_count:
            raise GraphError("labels must have one entry per node")
        seen: set[tuple[int, int]] = set()
        self_loops = duplicates = 0
        for a, b in edges:
            a, b = int(a), int(b)
            if not (0 <= a < node_count and 0 <= b < node_count):
                raise GraphError(f"edge ({a}, {b}) out of range for {node_count} nodes")
            if a == b:
                self_loops += 1
                continue
            key = (a, b) if a < b else (b, a)
            if key in seen:
                duplicates += 1
                continue
            seen.add(key)
        ordered = tuple(sorted(seen))
        neigh: list[list[int]] = [[] for _ in range(node_count)]
        for a, b in ordered:
            neigh[a].append(b)
            neigh[b].append(a)
        adjacency = tuple(tuple(sorted(n)) for n in neigh)
        net = cls(
            node_count=node_count,
            edges=ordered,
            adjacency=adjacency,
            labels=tuple(labels) if labels is not None else None,
            index_map=tuple(int(i) for i in index_map) if index_map is not None else None,
            ingest_stats={"self_loops_dropped": self_loops, "duplicates_dropped": duplicates},
        )
        assert int(net.degrees.sum()) == 2 * len(net.edges)
        return net

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    @property
    def mean_degree(self) -> float:
        return 2.0 * self.edge_count / self.node_count if self.node_count else 0.0

    @cached_property
    def indptr(self) -> np.ndarray:
        out = np.zeros(self.node_count + 1, dtype=np.int64)
        np.cumsum(self.degrees, out=out[1:])
        return out

    @cached_property
    def indices(self) -> np.ndarray:
        if not self.edges:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([np.asarray(a, dtype=np.int64) for a in self.adjacency])

    @cached_property
    def edge_src(self) -> np.ndarray:
        """Source node of every directed edge, in CSR order."""
        return np.repeat(np.arange(self.node_count, dtype=np.int64), self.degrees)

    @property
    def edge_dst(self) -> np.ndarray:
        return self.indices

    @cached_property
    def edge_reverse(self) -> np.ndarray:
        """Index of the opposite directed edge (k -> i for i -> k)."""
        n = max(self.node_count, 1)
        forward = self.edge_src * n + self.edge_dst
        backward = self.edge_dst * n + self.edge_src
        # forward keys are sorted because CSR rows are sorted
        return np.searchsorted(forward, backward)

    @cached_property
    def adjacency_matrix(self):
        from scipy import sparse

        data = np.ones(len(self.indices), dtype=np.float64)
        return sparse.csr_matrix(
            (data, self.indices, self.indptr), shape=(self.node_count, self.node_count)
        )

    def label(self, node: int) -> str:
        return self.labels[node] if self.labels is not None else str(node)

    def node_index(self) -> dict[str, int]:
        return {self.label(i): i for i in range(self.node_count)}


@dataclass(frozen=True)
class ComponentLabeling:
    component_id: np.ndarray
    giant_component_nodes: list[int]


def parse_edge_list(text: str | Iterable[str]) -> Network:
    """Parse whitespace-separated edge lines into a :class:`Network`.

    Identifiers are interned in order of first appearance. Lines starting
    with ``#`` and blank lines are skipped.
    """
    lines = text.splitlines() if isinstance(text, str) else text
    index: dict[str, int] = {}
    edges: list[tuple[int, int]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise EdgeListParseError(f"expected 2 tokens, got {len(tokens)}", lineno)
        ids = []
        for tok in tokens:
            if tok not in index:
                index[tok] = len(index)
            ids.append(index[tok])
        edges.append((ids[0], ids[1]))
    if not edges:
        raise EdgeListParseError("no edges")
    net = Network.from_edges(len(index), edges, labels=list(index))
    stats = net.ingest_stats
    if stats["self_loops_dropped"] or stats["duplicates_dropped"]:
        log.info(
            "dropped %d self-loops and %d duplicate edges",
            stats["self_loops_dropped"],
            stats["duplicates_dropped"],
        )
    return net


def read_edge_list(path) -> Network:
    with open(path, encoding="utf-8") as fh:
        return parse_edge_list(fh.read())


def format_edge_list(net: Network) -> str:
    lines = [f"{net.label(a)}\t{net.label(b)}" for a, b in net.edges]
    return "\n".join(lines) + "\n"


def connected_components(net: Network) -> ComponentLabeling:
    comp = np.full(net.node_count, -1, dtype=np.int64)
    sizes: list[int] = []
    for start in range(net.node_count):
        if comp[start] >= 0:
            continue
        cid = len(sizes)
        comp[start] = cid
        queue = deque([start])
        size = 0
        while queue:
            u = queue.popleft()
            size += 1
            for v in net.adjacency[u]:
                if comp[v] < 0:
                    comp[v] = cid
                    queue.append(v)
        sizes.append(size)
    if not sizes:
        return ComponentLabeling(comp, [])
    # components are numbered by their smallest node, so argmax breaks ties correctly
    giant = int(np.argmax(sizes))
    return ComponentLabeling(comp, np.flatnonzero(comp == giant).tolist())


def induced_subgraph(net: Network, nodes: Sequence[int]) -> Network:
    nodes = sorted(int(v) for v in nodes)
    remap = {old: new for new, old in enumerate(nodes)}
    edges = [(remap[a], remap[b]) for a, b in net.edges if a in remap and b in remap]
    labels = [net.label(v) for v in nodes] if net.labels is not None else [str(v) for v in nodes]
    if net.index_map is not None:
        back = [net.index_map[v] for v in nodes]
    else:
        back = nodes
    return Network.from_edges(len(nodes), edges, labels=labels, index_map=back)


def giant_component(net: Network) -> Network:
    if net.node_count == 0:
        raise GraphError("empty network has no giant component")
    labeling = connected_components(net)
    return induced_subgraph(net, labeling.giant_component_nodes)


def bfs_distances(net: Network, source: int) -> np.ndarray:
    """Hop distances from ``source``; unreachable nodes hold ``UNREACHABLE``."""
    if not 0 <= source < net.node_count:
        raise GraphError(f"source {source} out of range")
    dist = np.full(net.node_count, UNREACHABLE, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for v in net.adjacency[u]:
            if dist[v] == UNREACHABLE:
                dist[v] = du
                queue.append(v)
    return dist


def is_connected(net: Network) -> bool:
    if net.node_count == 0:
        return True
    return bool(np.all(bfs_distances(net, 0) != UNREACHABLE))


# --- random graph generators used by the test and benchmark harnesses ---


def erdos_renyi(node_count: int, mean_degree: float, seed: int) -> Network:
    """G(n, m) random graph with ``m = round(n * mean_degree / 2)`` edges."""
    rng = np.random.default_rng(seed)
    target = int(round(node_count * mean_degree / 2))
    max_edges = node_count * (node_count - 1) // 2
    if target > max_edges:
        raise GraphError("mean degree too large for node count")
    chosen: set[tuple[int, int]] = set()
    while len(chosen) < target:
        need = target - len(chosen)
        pairs = rng.integers(0, node_count, size=(need + need // 4 + 8, 2))
        for a, b in pairs:
            if a == b:
                continue
            key = (int(a), int(b)) if a < b else (int(b), int(a))
            if key not in chosen:
                chosen.add(key)
                if len(chosen) == target:
                    break
    return Network.from_edges(node_count, sorted(chosen))


def random_tree(node_count: int, seed: int) -> Network:
    """Uniform random labelled tree, decoded from a random Pruefer sequence."""
    if node_count < 2:
        return Network.from_edges(node_count, [])
    rng = np.random.default_rng(seed)
    if node_count == 2:
        return Network.from_edges(2, [(0, 1)])
    seq = rng.integers(0, node_count, size=node_count - 2).tolist()
    degree = [1] * node_count
    for v in seq:
        degree[v] += 1
    leaves = [i for i in range(node_count) if degree[i] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    edges.append((heapq.heappop(leaves), heapq.heappop(leaves)))
    return Network.from_edges(node_count, edges)


def random_connected(node_count: int, edge_count: int, seed: int) -> Network:
    """Random spanning tree plus uniformly placed extra edges."""
    if edge_count < node_count - 1:
        raise GraphError("need at least node_count - 1 edges for a connected graph")
    tree = random_tree(node_count, seed)
    rng = np.random.default_rng([seed, 1])
    chosen = set(tree.edges)
    max_edges = node_count * (node_count - 1) // 2
    if edge_count > max_edges:
        raise GraphError("too many edges requested")
    while len(chosen) < edge_count:
        a, b = rng.integers(0, node_count, size=2)
        if a != b:
            chosen.add((int(min(a, b)), int(max(a, b))))
    return Network.from_edges(node_count, sorted(chosen))
