"""Standalone plotting command over pathkernel CSV outputs.

Exit codes: 0 success, 2 bad input (with a row/column diagnostic).
"""

from __future__ import annotations

import argparse
import sys

from .figures import plot_orbit, plot_sweep
from .tables import TableError


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathkernel-plots",
        description="Render pathkernel sweep/trace CSV files to image files",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="observable dots with derivative tick marks")
    sweep.add_argument("csv", help="sweep CSV produced by `pathkernel sweep`")
    sweep.add_argument("out", help="output image path (e.g. sweep.png)")
    sweep.add_argument("--title", default="", help="figure title")

    orbit = sub.add_parser("orbit", help="time series of traced coordinates")
    orbit.add_argument("csv", help="trace CSV produced by `pathkernel run --trace`")
    orbit.add_argument("out", help="output image path (e.g. orbit.png)")
    orbit.add_argument("--coords", default=None, help="comma-separated coordinate columns (default: all)")
    orbit.add_argument("--title", default="", help="figure title")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            out = plot_sweep(args.csv, args.out, title=args.title)
        else:
            coords = [c.strip() for c in args.coords.split(",")] if args.coords else None
            out = plot_orbit(args.csv, args.out, coords=coords, title=args.title)
    except TableError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
