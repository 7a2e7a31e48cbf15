"""Seeded experiment sweeps: simulate, mask, score with each method, compute AUC."""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .baselines import label_propagation_scores, shortest_path_scores
from .evalmetrics import MetricError, auc, evaluation_set, holdout_split
from .exposure_bp import SolverSettings, infer
from .netgraph import Network
from .perturbsim import (
    Observation,
    mask_observation,
    simulate_si_heterogeneous,
    simulate_si_homogeneous,
)

log = logging.getLogger(__name__)

METHODS = ("exposure", "shortest_paths", "label_propagation")
RESULT_COLUMNS = (
    "network",
    "method",
    "param",
    "observed_fraction",
    "replicate",
    "auc",
    "eta_star",
    "wall_time_ms",
    "converged",
    "error",
)
# cascades redrawn per replicate before it is recorded as failed
MAX_CASCADE_DRAWS = 100


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    network_path: str | None = None
    mode: str = "homogeneous"  # homogeneous | heterogeneous | holdout
    c_values: list = field(default_factory=lambda: [0.5])
    delta_ranges: list = field(default_factory=list)  # [(l, u), ...]
    observed_fractions: list = field(default_factory=lambda: [0.1, 0.3, 0.5])
    replicates: int = 100
    methods: list = field(default_factory=lambda: list(METHODS))
    master_seed: int = 0
    solver: SolverSettings = field(default_factory=SolverSettings)
    bias: float | None = None
    c_preset: str | None = None  # "paper": 1/(<k> + 0.05) and 0.5
    hide_fractions: list = field(default_factory=lambda: [0.5])
    observation_path: str | None = None
    threads: int = 1

    def validate(self) -> None:
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if self.mode not in ("homogeneous", "heterogeneous", "holdout"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")
        for f in self.observed_fractions:
            if not 0.0 < f < 1.0 and not (f == 1.0 and self.mode != "holdout"):
                raise ConfigError("observed fractions must be in (0,1)")
        for c in self.c_values:
            if not 0.0 <= c <= 1.0:
                raise ConfigError("c must be in [0,1]")
        for lo, hi in self.delta_ranges:
            if not 0.0 <= lo <= hi <= 1.0:
                raise ConfigError("ranges need 0 <= l <= u <= 1")
        for h in self.hide_fractions:
            if not 0.0 < h < 1.0:
                raise ConfigError("hide fractions must be in (0,1)")
        for p in (self.network_path, self.observation_path):
            if p is not None and not Path(p).exists():
                raise ConfigError(f"file not found: {p}")
        if self.c_preset not in (None, "paper"):
            raise ConfigError(f"unknown c preset {self.c_preset!r}")


def limiting_c_values(net: Network) -> list[float]:
    """The two limiting transmission probabilities ``1/(<k> + 0.05)`` and ``0.5``."""
    return [1.0 / (net.mean_degree + 0.05), 0.5]


def derive_seed(*parts) -> int:
    """64-bit seed from the BLAKE2b digest of ``"|".join(map(repr, parts))``.

    Floats go through ``repr`` so the same grid value always maps to the
    same seed, whatever its position in the sweep.
    """
    key = "|".join(repr(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def _parse_list(text: str) -> list[str]:
    return [t for t in (x.strip() for x in text.replace(";", ",").split(",")) if t]


def parse_config(text: str) -> ExperimentConfig:
    """Flat ``key = value`` lines; list values are comma separated.

    Solver fields are addressed as ``solver.<field>``; ranges as ``l:u``.
    """
    cfg = ExperimentConfig()
    solver = {}
    names = {f.name for f in fields(ExperimentConfig)}
    solver_fields = {f.name: f for f in fields(SolverSettings)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("solver."):
            name = key[len("solver."):]
            if name not in solver_fields:
                raise ConfigError(f"line {lineno}: unknown solver setting {name!r}")
            default = getattr(SolverSettings(), name)
            if isinstance(default, bool):
                solver[name] = value.lower() in ("1", "true", "yes")
            else:
                solver[name] = type(default)(value)
            continue
        if key not in names or key == "solver":
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in ("c_values", "observed_fractions", "hide_fractions"):
            setattr(cfg, key, [float(v) for v in _parse_list(value)])
        elif key == "delta_ranges":
            pairs = []
            for item in _parse_list(value):
                lo, hi = item.split(":")
                pairs.append((float(lo), float(hi)))
            cfg.delta_ranges = pairs
        elif key == "methods":
            items = _parse_list(value)
            cfg.methods = list(METHODS) if items == ["all"] else items
        elif key in ("replicates", "master_seed", "threads"):
            setattr(cfg, key, int(value))
        elif key == "bias":
            cfg.bias = None if value.lower() in ("", "none") else float(value)
        else:
            setattr(cfg, key, value or None)
    cfg.solver = SolverSettings(**solver)
    return cfg


def read_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# --- single replicate --------------------------------------------------------------


def score_method(method: str, net: Network, obs: Observation, solver: SolverSettings):
    """Scores for one method; returns (ScoreVector, eta_star or None)."""
    if method == "exposure":
        scores, eta, _ = infer(net, obs, solver)
        return scores, eta
    if method == "shortest_paths":
        return shortest_path_scores(net, obs), None
    if method == "label_propagation":
        return label_propagation_scores(net, obs), None
    raise ConfigError(f"unknown method {method!r}")


def _evaluate(network_name, method, param, fraction, replicate, net, obs, eval_set, solver):
    row = dict.fromkeys(RESULT_COLUMNS, "")
    row.update(network=network_name, method=method, param=param,
               observed_fraction=fraction, replicate=replicate)
    start = time.perf_counter()
    try:
        scores, eta = score_method(method, net, obs, solver)
        row["auc"] = auc(scores, eval_set)
        row["eta_star"] = "" if eta is None else eta
        row["converged"] = scores.converged
    except (ValueError, ArithmeticError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wall_time_ms"] = (time.perf_counter() - start) * 1e3
    return row


def draw_instance(net: Network, mode: str, param, fraction: float, seed: int, bias=None):
    """Simulate and mask until there is an observed perturbed node and both
    classes among the hidden ones. Returns (outcome, observation, draws)."""
    for draw in range(MAX_CASCADE_DRAWS):
        sim_seed = derive_seed(seed, "cascade", draw)
        if mode == "homogeneous":
            outcome = simulate_si_homogeneous(net, param, sim_seed)
        else:
            outcome = simulate_si_heterogeneous(net, param[0], param[1], sim_seed)
        obs = mask_observation(outcome, fraction, derive_seed(seed, "mask", draw), bias=bias)
        if not obs.states.any():
            continue
        if evaluation_set(obs).defined:
            return outcome, obs, draw + 1
    raise MetricError(f"no usable cascade in {MAX_CASCADE_DRAWS} draws")


def run_replicate(net: Network, network_name: str, cfg: ExperimentConfig, param, fraction, replicate):
    """All method rows for one (grid point, replicate)."""
    label = param if cfg.mode == "homogeneous" else round(param[1] - param[0], 12)
    seed = derive_seed(cfg.master_seed, cfg.mode, param, fraction, replicate)
    try:
        _, obs, _ = draw_instance(net, cfg.mode, param, fraction, seed, cfg.bias)
    except (ValueError, ArithmeticError) as exc:
        rows = []
        for method in cfg.methods:
            row = dict.fromkeys(RESULT_COLUMNS, "")
            row.update(network=network_name, method=method, param=label,
                       observed_fraction=fraction, replicate=replicate,
                       error=f"{type(exc).__name__}: {exc}")
            rows.append(row)
        return rows
    eval_set = evaluation_set(obs)
    return [
        _evaluate(network_name, m, label, fraction, replicate, net, obs, eval_set, cfg.solver)
        for m in cfg.methods
    ]


# --- sweeps -----------------------------------------------------------------------------


def grid_points(cfg: ExperimentConfig, net: Network) -> list:
    if cfg.mode == "homogeneous":
        values = limiting_c_values(net) if cfg.c_preset == "paper" else list(cfg.c_values)
        return [(c, f) for c in values for f in cfg.observed_fractions]
    if cfg.mode == "heterogeneous":
        return [(tuple(r), f) for r in cfg.delta_ranges for f in cfg.observed_fractions]
    raise ConfigError("holdout mode has no simulation grid")


def _task(args):
    net, name, cfg, param, fraction, rep = args
    return run_replicate(net, name, cfg, param, fraction, rep)


def iter_experiment(net: Network, cfg: ExperimentConfig, network_name: str = "network") -> Iterator[dict]:
    """Rows ordered by (grid point, replicate, method)."""
    cfg.validate()
    tasks = [
        (net, network_name, cfg, param, fraction, rep)
        for param, fraction in grid_points(cfg, net)
        for rep in range(cfg.replicates)
    ]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            for rows in pool.map(_task, tasks, chunksize=4):
                yield from rows
    else:
        for t in tasks:
            yield from _task(t)


def iter_holdout(
    net: Network, obs: Observation, cfg: ExperimentConfig, network_name: str = "network"
) -> Iterator[dict]:
    """Hold-out sweep over ``cfg.hide_fractions`` on a fixed observation."""
    cfg.validate()
    for hide in cfg.hide_fractions:
        for rep in range(cfg.replicates):
            seed = derive_seed(cfg.master_seed, "holdout", hide, rep)
            try:
                reduced, eval_set = holdout_split(obs, hide, seed)
            except MetricError as exc:
                for method in cfg.methods:
                    row = dict.fromkeys(RESULT_COLUMNS, "")
                    row.update(network=network_name, method=method, param=hide,
                               replicate=rep, error=f"MetricError: {exc}")
                    yield row
                continue
            fed = len(reduced) / net.node_count
            for method in cfg.methods:
                yield _evaluate(network_name, method, hide, fed, rep, net, reduced, eval_set, cfg.solver)


# --- output ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def write_rows(rows: Iterable[dict], fh, header: bool = True) -> list[dict]:
    """Stream rows as CSV with the fixed result header; returns the rows."""
    writer = csv.writer(fh, lineterminator="\n")
    if header:
        writer.writerow(RESULT_COLUMNS)
    kept = []
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in RESULT_COLUMNS])
        fh.flush()
        kept.append(row)
    return kept


def summarize(rows: Iterable[dict], axis: str = "observed_fraction") -> list[dict]:
    """Mean and standard error of AUC per (method, param, axis value)."""
    groups: dict[tuple, list[float]] = {}
    failures: dict[tuple, int] = {}
    for row in rows:
        key = (row["method"], row["param"], row[axis] if axis else "")
        groups.setdefault(key, [])
        failures.setdefault(key, 0)
        if row["error"] or row["auc"] == "":
            failures[key] += 1
        else:
            groups[key].append(float(row["auc"]))
    out = []
    for key, values in groups.items():
        n = len(values)
        mean = float(np.mean(values)) if n else math.nan
        se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        out.append({"method": key[0], "param": key[1], axis or "group": key[2],
                    "n": n, "failed": failures[key], "mean_auc": mean, "se_auc": se})
    return out


def format_summary(summary: list[dict]) -> str:
    if not summary:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(summary[0]), lineterminator="\n")
    writer.writeheader()
    for row in summary:
        writer.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()


def holdout_table(rows: Iterable[dict], methods: Iterable[str]) -> str:
    """One line per hide fraction with a mean and SE column per method."""
    summary = summarize(rows, axis="")
    methods = list(methods)
    by_param: dict = {}
    for s in summary:
        by_param.setdefault(s["param"], {})[s["method"]] = s
    cols = ["hide_fraction"] + [f"{m}_{k}" for m in methods for k in ("mean_auc", "se_auc")]
    lines = [",".join(cols)]
    for param, per in by_param.items():
        vals = [_fmt(param)]
        for m in methods:
            s = per.get(m)
            vals += [_fmt(s["mean_auc"]), _fmt(s["se_auc"])] if s else ["", ""]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def config_as_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["solver"] = asdict(cfg.solver)
    return d


def with_solver(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, solver=replace(cfg.solver, **changes))
