"""Command-line interface: verify | sharp | sweep | schema.

Pin BLAS to one thread before numpy loads so repeated runs of the same
config are byte-identical regardless of machine load.
"""

import os

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import argparse
import json
import sys

from .config import CONFIG_SCHEMA, ConfigError, load_config
from .runner import run_sharp, run_sweep, run_verify

_RUNNERS = {"verify": run_verify, "sharp": run_sharp, "sweep": run_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poincheck",
        description=(
            "Verify weighted and fractional Poincare-type inequalities on "
            "discretized balls, estimate sharp constants, and sweep the "
            "fractional order."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("verify", "run the configured inequality checks"),
        ("sharp", "estimate sharp constants and compare to the explicit ones"),
        ("sweep", "tabulate energies and check ratios over the (s, R) grid"),
    ):
        cmd = sub.add_parser(name, help=doc)
        cmd.add_argument("--config", required=True, help="path to the JSON config")
        cmd.add_argument("--out", default="out", help="output directory (default: out)")
        cmd.add_argument("--seed", type=int, default=None, help="override the suite seed")
        cmd.add_argument("--verbose", action="store_true", help="emit progress and traces")
    sub.add_parser("schema", help="print the config JSON schema")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        json.dump(CONFIG_SCHEMA, sys.stdout, indent=1)
        sys.stdout.write("\n")
        return 0
    try:
        config = load_config(args.config, seed_override=args.seed)
        result = _RUNNERS[args.command](config, args.out, verbose=args.verbose)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.verbose:
        print(f"{len(result.rows)} rows -> {result.csv_path}")
    if not result.all_passed:
        failed = sum(1 for row in result.rows if str(row.get("pass")).lower() != "true")
        print(f"FAIL: {failed} of {len(result.rows)} rows failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
