"""Command-line entry point.

Subcommands: run-schrodinger, run-field, run-constrained, dequantize, verify,
convergence, render, spectrum. All numeric output goes to files under --out;
stdout carries a short summary unless --quiet is given. `verify` exits
nonzero iff any asserted identity fails.
"""

import argparse
import sys

from . import runs
from .config import parse_config
from .errors import ConfigError
from .render import render_snapshots


def _add_common(parser, config_required=True):
    parser.add_argument("--config", required=config_required, help="scenario JSON path")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized batches")
    parser.add_argument("--quiet", action="store_true", help="suppress stdout summary")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="schrofield",
        description=(
            "Numerical laboratory for the Schrodinger equation, its real "
            "wave-potential field theory, and the constrained system that "
            "unifies them."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run-schrodinger", "run-field", "run-constrained", "dequantize", "spectrum"):
        _add_common(sub.add_parser(name))
    verify = sub.add_parser("verify")
    verify.add_argument("--config", required=True)
    verify.add_argument("--out", default=None, help="optional report directory")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--quiet", action="store_true")
    conv = sub.add_parser("convergence")
    _add_common(conv)
    conv.add_argument("--levels", type=int, default=3, help="refinement levels")
    rend = sub.add_parser("render")
    rend.add_argument("--out", required=True, help="run directory holding snapshots")
    rend.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", 0) < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return 2
    try:
        if args.command == "render":
            written = render_snapshots(args.out)
            if not args.quiet:
                print(f"render: {len(written)} SVG files")
            return 0
        cfg = parse_config(args.config)
        if args.command == "run-schrodinger":
            runs.run_schrodinger(cfg, args.out, quiet=args.quiet)
        elif args.command == "run-field":
            runs.run_field(cfg, args.out, quiet=args.quiet)
        elif args.command == "run-constrained":
            runs.run_constrained(cfg, args.out, quiet=args.quiet)
        elif args.command == "dequantize":
            runs.run_dequantize(cfg, args.out, quiet=args.quiet)
        elif args.command == "spectrum":
            runs.run_spectrum(cfg, args.out, quiet=args.quiet)
        elif args.command == "convergence":
            runs.run_convergence(cfg, args.out, levels=args.levels, quiet=args.quiet)
        elif args.command == "verify":
            _, all_pass = runs.run_verify(
                cfg, seed=args.seed, out_dir=args.out, quiet=args.quiet
            )
            return 0 if all_pass else 1
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
