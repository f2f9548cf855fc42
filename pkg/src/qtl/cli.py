"""Command line entry point.

Usage: qtl <mode> --config <file> [--seed N] [--workers N] [--out DIR]

Exit codes: 0 success, 2 configuration error, 3 numerical failure
(wavefunction leak or trajectory divergence).
"""

from __future__ import annotations

import argparse
import sys

from .config import MODES, parse_config
from .errors import ConfigError, LeakError, NumericalError, QtlError
from .harness import run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtl",
        description="Continuously measured double-well simulations: "
                    "conditioned quantum trajectories, matched classical "
                    "dynamics, Lyapunov exponents and stroboscopic maps.")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, help="configuration file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the master seed")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker processes for ensemble modes")
    parser.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"qtl: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        config = parse_config(text, mode_override=args.mode,
                              seed_override=args.seed)
        summary = run(config, out_dir=args.out, workers=args.workers)
    except ConfigError as exc:
        print(f"qtl: config error: {exc}", file=sys.stderr)
        return 2
    except (LeakError, NumericalError) as exc:
        print(f"qtl: numerical failure: {exc}", file=sys.stderr)
        return 3
    except QtlError as exc:
        print(f"qtl: error: {exc}", file=sys.stderr)
        return 2
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
