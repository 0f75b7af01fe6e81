"""Command-line interface: run experiments, estimate widths, fit rates."""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from polyfw import bench, geometry
from polyfw.core import RunTrace
from polyfw.oracles import VertexList


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyfw",
        description="Projection-free solvers over polytopes and their rate diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config and write traces")
    run_p.add_argument("config", help="path to an experiment JSON file")
    run_p.add_argument("--out-dir", default="runs", help="directory for traces and summary")
    run_p.add_argument("--seed", type=int, default=None, help="override the problem rng_seed")
    run_p.add_argument("--max-iter", type=int, default=None, help="override max_iter")
    run_p.add_argument("--epsilon", type=float, default=None, help="override epsilon")

    pw_p = sub.add_parser("pwidth", help="estimate the pyramidal width of a vertex CSV")
    pw_p.add_argument("vertices_csv", help="CSV matrix, one atom per row")
    pw_p.add_argument("--directions", type=int, default=64, help="sphere samples per face")
    pw_p.add_argument("--seed", type=int, default=0, help="direction-sampling seed")

    rate_p = sub.add_parser("rate", help="fit a log-linear rate to a trace CSV")
    rate_p.add_argument("trace_csv", help="trace file written by `polyfw run`")
    rate_p.add_argument(
        "--quantity",
        choices=list(bench.RATE_QUANTITIES),
        default="fw_gap",
        help="which series to fit",
    )
    rate_p.add_argument(
        "--f-star",
        type=float,
        default=None,
        help="optimal value, required for f_gap_to_opt",
    )
    rate_p.add_argument("--floor", type=float, default=0.0, help="truncate values at this floor")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    config = bench.ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        config.problem["rng_seed"] = args.seed
    if args.max_iter is not None:
        config.max_iter = args.max_iter
    if args.epsilon is not None:
        config.epsilon = args.epsilon
    summary = bench.run_experiment(config, args.out_dir)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0 if bench.all_runs_clean(summary) else 1


def _cmd_pwidth(args: argparse.Namespace) -> int:
    spec = VertexList.read_csv(args.vertices_csv)
    report = geometry.pwidth(spec.matrix, n_directions=args.directions, seed=args.seed)
    print(json.dumps(report.to_json(), indent=2))
    return 0


def _cmd_rate(args: argparse.Namespace) -> int:
    trace = RunTrace.read_csv(args.trace_csv)
    if args.quantity == "f_gap_to_opt" and args.f_star is None:
        print("error: --f-star is required for f_gap_to_opt", file=sys.stderr)
        return 2
    fit = bench.fit_rate(
        trace, quantity=args.quantity, f_star=args.f_star, floor=args.floor
    )
    print(json.dumps(fit.to_json(), indent=2))
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "pwidth":
        return _cmd_pwidth(args)
    if args.command == "rate":
        return _cmd_rate(args)
    raise AssertionError(f"unhandled command {args.command}")  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
