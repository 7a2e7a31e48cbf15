"""Command-line entry point: simulate, infer, experiment, holdout, oracle-check."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .evalmetrics import rank_correlation
from .exact_oracle import exact_eta_opt
from .exposure_bp import SolverSettings, infer, solve_at_eta
from .fileio import format_outcome, format_observation, read_observation
from .harness import METHODS, ExperimentConfig, derive_seed
from .netgraph import read_edge_list
from .perturbsim import mask_observation, simulate_si_heterogeneous, simulate_si_homogeneous
from .scores import format_scores

log = logging.getLogger("perturbnet")

MODES = {"homo": "homogeneous", "homogeneous": "homogeneous",
         "hetero": "heterogeneous", "heterogeneous": "heterogeneous"}


class UsageError(ValueError):
    pass


def _network(args):
    if not args.network:
        raise UsageError("--network is required")
    return read_edge_list(args.network)


def _network_name(args) -> str:
    return Path(args.network).stem if args.network else "network"


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="")


def _solver_from_args(args, base: SolverSettings | None = None) -> SolverSettings:
    base = base or SolverSettings()
    changes = {}
    for flag, name in (("variant", "variant"), ("schedule", "schedule"), ("damping", "damping"),
                       ("eta_init", "eta_init"), ("max_sweeps", "max_bp_sweeps"),
                       ("tolerance", "message_tolerance")):
        value = getattr(args, flag, None)
        if value is not None:
            changes[name] = value
    if getattr(args, "fixed_eta", None) is not None:
        changes.update(eta_init=args.fixed_eta, estimate_eta=False)
    return replace(base, **changes)


def _add_solver_flags(p):
    g = p.add_argument_group("exposure solver")
    g.add_argument("--variant", choices=("pair", "cavity"))
    g.add_argument("--schedule", choices=("synchronous", "asynchronous"))
    g.add_argument("--damping", type=float)
    g.add_argument("--eta-init", type=float)
    g.add_argument("--fixed-eta", type=float, help="skip EM and use this eta")
    g.add_argument("--max-sweeps", type=int)
    g.add_argument("--tolerance", type=float)


def _methods(values) -> list[str]:
    if not values:
        return list(METHODS)
    out = []
    for v in values:
        for m in v.split(","):
            if m == "all":
                out.extend(x for x in METHODS if x not in out)
            elif m not in METHODS:
                raise UsageError(f"unknown method {m!r}")
            elif m not in out:
                out.append(m)
    return out


# --- commands -----------------------------------------------------------------


def cmd_simulate(args) -> int:
    net = _network(args)
    mode = MODES[args.mode]
    root = None
    if args.root is not None:
        index = net.node_index()
        if args.root not in index:
            raise UsageError(f"root {args.root!r} is not in the network")
        root = index[args.root]
    if mode == "homogeneous":
        if args.c is None:
            raise UsageError("--c is required in homogeneous mode")
        outcome = simulate_si_homogeneous(net, args.c, args.seed, root)
    else:
        if args.range is None:
            raise UsageError("--range L U is required in heterogeneous mode")
        outcome = simulate_si_heterogeneous(net, args.range[0], args.range[1], args.seed, root)
    text = format_outcome(net, outcome)
    if args.out:
        with _open_out(args.out) as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.observe is not None:
        if not args.observation_out:
            raise UsageError("--observe needs --observation-out")
        obs = mask_observation(outcome, args.observe, derive_seed(args.seed, "mask"), bias=args.bias)
        with _open_out(args.observation_out) as fh:
            fh.write(format_observation(net, obs))
    summary = {"root": net.label(outcome.root), "perturbed": outcome.perturbed_count,
               "params": outcome.generator_params, "seed": outcome.seed}
    print(json.dumps(summary), file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_infer(args) -> int:
    net = _network(args)
    if not args.observation:
        raise UsageError("--observation is required")
    obs = read_observation(args.observation, net)
    methods = _methods(args.method)
    solver = _solver_from_args(args)
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    results = {}
    # run everything first so a failing method leaves no partial output
    for m in methods:
        if m == "exposure":
            scores, _, diag = infer(net, obs, solver)
            results[m] = (scores, diag)
        else:
            scores, _ = harness.score_method(m, net, obs, solver)
            results[m] = (scores, None)
    for m, (scores, diag) in results.items():
        (outdir / f"{m}.scores.tsv").write_text(format_scores(net, scores), encoding="utf-8")
        if diag is not None:
            (outdir / "exposure.diagnostics.json").write_text(diag.to_json() + "\n", encoding="utf-8")
            print(f"exposure: eta*={diag.eta_star:.6g} converged={diag.converged}")
        print(f"wrote {outdir / f'{m}.scores.tsv'}")
    return 0


def _experiment_config(args) -> ExperimentConfig:
    cfg = harness.read_config(args.config) if args.config else ExperimentConfig()
    if args.network:
        cfg.network_path = args.network
    if args.mode:
        cfg.mode = MODES[args.mode]
    if args.c:
        cfg.c_values = list(args.c)
    if args.c_preset:
        cfg.c_preset = args.c_preset
    if args.range:
        cfg.delta_ranges = [tuple(r) for r in args.range]
    if args.fractions:
        cfg.observed_fractions = list(args.fractions)
    if args.replicates is not None:
        cfg.replicates = args.replicates
    if args.method:
        cfg.methods = _methods(args.method)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.bias is not None:
        cfg.bias = args.bias
    cfg.solver = _solver_from_args(args, cfg.solver)
    if cfg.network_path is None:
        raise UsageError("--network (or network_path in the config) is required")
    cfg.validate()
    return cfg


def cmd_experiment(args) -> int:
    cfg = _experiment_config(args)
    net = read_edge_list(cfg.network_path)
    name = Path(cfg.network_path).stem
    out = _open_out(args.out)
    try:
        rows = harness.write_rows(harness.iter_experiment(net, cfg, name), out)
    finally:
        if out is not sys.stdout:
            out.close()
    summary = harness.format_summary(harness.summarize(rows))
    if args.summary:
        Path(args.summary).write_text(summary, encoding="utf-8")
    else:
        print(summary, end="", file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return 0


def cmd_holdout(args) -> int:
    net = _network(args)
    if not args.observation:
        raise UsageError("--observation is required")
    obs = read_observation(args.observation, net)
    cfg = ExperimentConfig(
        network_path=args.network,
        mode="holdout",
        hide_fractions=list(args.hide_fractions or [0.5]),
        replicates=args.replicates if args.replicates is not None else 100,
        methods=_methods(args.method),
        master_seed=args.seed,
        solver=_solver_from_args(args),
    )
    cfg.validate()
    out = _open_out(args.out)
    try:
        rows = harness.write_rows(harness.iter_holdout(net, obs, cfg, _network_name(args)), out)
    finally:
        if out is not sys.stdout:
            out.close()
    table = harness.holdout_table(rows, cfg.methods)
    print(table, end="", file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return 0


def cmd_oracle_check(args) -> int:
    net = _network(args)
    if not args.observation:
        raise UsageError("--observation is required")
    obs = read_observation(args.observation, net)
    solver = _solver_from_args(args)
    eta_opt, exact = exact_eta_opt(net, obs, grid_step=args.grid_step)
    scores, _, _ = solve_at_eta(net, obs, eta_opt, solver)
    _, eta_star, diag = infer(net, obs, solver)
    bp = 1.0 - scores.score[exact.nodes]
    ex = exact.p_unperturbed
    print("node\tbp_p_unperturbed\texact_p_unperturbed\tabs_diff")
    for node, b, e in zip(exact.nodes, bp, ex):
        print(f"{net.label(int(node))}\t{b:.9f}\t{e:.9f}\t{abs(b - e):.3e}")
    deviation = float(np.max(np.abs(bp - ex), initial=0.0))
    print(f"max_abs_deviation\t{deviation:.6e}")
    print(f"spearman\t{rank_correlation(bp, ex, tie_tolerance=args.tie_tolerance):.6f}")
    print(f"eta_grid_opt\t{eta_opt:.6f}")
    print(f"eta_star\t{eta_star:.6f}\tconverged={diag.converged}")
    return 0


# --- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress: bool):
        # flags are accepted before or after the subcommand; the subcommand copy
        # must not overwrite a value given before it
        g = argparse.ArgumentParser(add_help=False)
        kw = {"default": argparse.SUPPRESS} if suppress else {}
        g.add_argument("--seed", type=int, **({"default": None} | kw))
        g.add_argument("--network", help="edge list file", **kw)
        g.add_argument("--out", help="output file (or directory for infer)", **kw)
        g.add_argument("--threads", type=int, **kw)
        g.add_argument("-v", "--verbose", action="store_true", **kw)
        return g

    common = global_flags(suppress=True)
    parser = argparse.ArgumentParser(
        prog="perturbnet", parents=[global_flags(suppress=False)],
        description="Infer perturbed nodes of a network from a partial observation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate one SI cascade")
    p.add_argument("--mode", choices=sorted(MODES), default="homo")
    p.add_argument("--c", type=float)
    p.add_argument("--range", type=float, nargs=2, metavar=("L", "U"))
    p.add_argument("--root", help="label of the seed node (default: random)")
    p.add_argument("--observe", type=float, help="also write a random observation of this fraction")
    p.add_argument("--observation-out")
    p.add_argument("--bias", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("infer", parents=[common], help="score nodes from an observation")
    p.add_argument("--observation", help="'label<TAB>0|1' file")
    p.add_argument("--method", action="append", help=f"one of {', '.join(METHODS)} or all")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("experiment", parents=[common], help="seeded simulation sweep to CSV")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--mode", choices=sorted(MODES))
    p.add_argument("--c", type=float, nargs="+")
    p.add_argument("--c-preset", choices=("paper",))
    p.add_argument("--range", type=float, nargs=2, action="append", metavar=("L", "U"))
    p.add_argument("--fractions", type=float, nargs="+")
    p.add_argument("--replicates", type=int)
    p.add_argument("--method", action="append")
    p.add_argument("--bias", type=float)
    p.add_argument("--summary", help="write the per-grid-point summary here")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("holdout", parents=[common], help="hide part of a real observation")
    p.add_argument("--observation")
    p.add_argument("--hide-fractions", type=float, nargs="+")
    p.add_argument("--replicates", type=int)
    p.add_argument("--method", action="append")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_holdout)

    p = sub.add_parser("oracle-check", parents=[common], help="compare BP with exact enumeration")
    p.add_argument("--observation")
    p.add_argument("--grid-step", type=float, default=1e-3)
    p.add_argument("--tie-tolerance", type=float, default=1e-6)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command != "experiment" and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"perturbnet {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
