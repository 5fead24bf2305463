"""Command-line entry point: optimize / simulate / sweep subcommands."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .experiments import ExperimentSpec, run_experiment, write_csv
from .model import FeasibilityError, ModelError

log = logging.getLogger("tailopt")

_POLICIES = ["WLTP", "WLTP-RP", "WLTP-RP-FixedT", "PEAP", "PEAP-RP", "PSPP", "PSPP-RP"]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _add_common(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scenario", help="path to a JSON scenario file")
    src.add_argument("--builtin", default="table1", choices=["table1"],
                     help="built-in scenario name (default: table1)")
    p.add_argument("--policy", action="append", choices=_POLICIES,
                   help="policy to run; repeatable (default: WLTP)")
    p.add_argument("--x-grid", type=_floats, default=[20, 30, 40, 50, 60, 70],
                   help="comma-separated latency thresholds in seconds")
    p.add_argument("--files-per-group", type=_ints, default=[5],
                   help="files per group for the builtin scenario "
                        "(comma list sweeps it)")
    p.add_argument("--rate-mult", type=_floats, default=[1.0],
                   help="arrival-rate multiplier (comma list sweeps it)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--out", help="output CSV path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tailopt",
        description="Tail-latency bound optimization and simulation for "
                    "erasure-coded storage",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="optimize policies over an x grid")
    _add_common(p_opt)

    p_sim = sub.add_parser("simulate",
                           help="optimize, then validate bounds by simulation")
    _add_common(p_sim)
    p_sim.add_argument("--requests", type=int, default=100_000,
                       help="simulated requests per run")

    p_sweep = sub.add_parser("sweep",
                             help="sweep arrival-rate multipliers and/or "
                                  "files per group")
    _add_common(p_sweep)
    return parser


def _spec_from_args(args) -> ExperimentSpec:
    fpg = args.files_per_group
    return ExperimentSpec(
        scenario=args.scenario,
        builtin=None if args.scenario else args.builtin,
        policies=args.policy or ["WLTP"],
        x_grid=args.x_grid,
        rate_mults=args.rate_mult,
        files_per_group_list=fpg if len(fpg) > 1 else None,
        files_per_group=fpg[0],
        seed=args.seed,
        tol=args.tol,
        max_outer=args.max_iter,
        simulate=args.command == "simulate",
        request_count=getattr(args, "requests", 100_000),
        out=args.out,
    )


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("TAILOPT_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        spec = _spec_from_args(args)
        rows = run_experiment(spec)
    except (ModelError, FeasibilityError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if spec.out:
        write_csv(rows, spec.out)
    else:
        from .experiments import CSV_COLUMNS, _fmt
        print(",".join(CSV_COLUMNS))
        for row in rows:
            print(",".join(_fmt(row[c]) for c in CSV_COLUMNS))
    return 0


if __name__ == "__main__":
    sys.exit(main())
