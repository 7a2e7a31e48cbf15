from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netgraph import Network


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Per-node "probability perturbed" ranking; higher means more likely perturbed."""

    score: np.ndarray
    method_tag: str
    converged: bool = True

    def __post_init__(self):
        score = np.asarray(self.score, dtype=np.float64)
        if not np.all(np.isfinite(score)):
            raise ValueError("scores must be finite")
        object.__setattr__(self, "score", score)

    def __len__(self) -> int:
        return len(self.score)


def format_scores(net: Network, scores: ScoreVector, nodes=None) -> str:
    """``label<TAB>score`` lines (9 significant digits) under a method header."""
    if nodes is None:
        nodes = range(net.node_count)
    lines = [f"# method: {scores.method_tag}"]
    lines += [f"{net.label(int(i))}\t{scores.score[int(i)]:.9g}" for i in nodes]
    return "\n".join(lines) + "\n"


def parse_scores(text: str, net: Network) -> ScoreVector:
    index = net.node_index()
    tag = "unknown"
    score = np.zeros(net.node_count)
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line[1:].strip().startswith("method:"):
                tag = line.split(":", 1)[1].strip()
            continue
        label, value = line.split("\t")
        score[index[label]] = float(value)
    return ScoreVector(score, tag)
