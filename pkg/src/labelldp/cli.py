"""Command-line harness: verification suites and benchmark sweeps.

Exit codes: 0 success, 1 verification or run failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ParameterError
from .runners import (
    run_reduce_demo,
    run_sweep,
    run_verify_estimators,
    run_verify_privacy,
)


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--out", help="output path (overrides config)")
    parser.add_argument("--mechanism", help="comma-separated mechanism list")
    parser.add_argument("--epsilon", help="comma-separated epsilon list")
    parser.add_argument("--k", help="comma-separated label-count list")
    parser.add_argument("--n", help="comma-separated dataset-size list")
    parser.add_argument("--trials", type=int, help="trials per grid cell")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labelldp",
        description="Benchmarks and exact verification for label-private SGD.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("verify-privacy", "enumerate worst-case likelihood ratios against e^eps"),
        ("verify-estimators", "brute-force estimator means and second moments"),
        ("sweep", "run the (mechanism, K, epsilon, n) benchmark grid to CSV"),
        ("reduce-demo", "demonstrate the estimation reduction identity to CSV"),
    ):
        _add_common_flags(sub.add_parser(name, help=help_text))
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    ov: dict = {}
    if args.mechanism is not None:
        ov["mechanism"] = tuple(s.strip() for s in args.mechanism.split(",") if s.strip())
    if args.epsilon is not None:
        ov["epsilon"] = tuple(float(s) for s in args.epsilon.split(",") if s.strip())
    if args.k is not None:
        ov["k"] = tuple(int(s) for s in args.k.split(",") if s.strip())
    if args.n is not None:
        ov["n"] = tuple(int(s) for s in args.n.split(",") if s.strip())
    if args.trials is not None:
        ov["trials"] = args.trials
    if args.seed is not None:
        ov["master_seed"] = args.seed
    if args.out is not None:
        ov["out"] = args.out
    return ov


_RUNNERS = {
    "verify-privacy": run_verify_privacy,
    "verify-estimators": run_verify_estimators,
    "sweep": run_sweep,
    "reduce-demo": run_reduce_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, _overrides(args))
    except (ParameterError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return _RUNNERS[args.command](config)


if __name__ == "__main__":
    sys.exit(main())
