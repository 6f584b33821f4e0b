"""Command-line driver: render chart families from grid CSVs.

Exit codes: 0 success, 2 input/usage error (matching the producer CLI).
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .charts import FAMILIES, ChartSpec, EmptySelectionError, FigureError, render


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vmauction-figures",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "--csv",
        action="append",
        required=True,
        metavar="PATH",
        help="grid results CSV; repeat to combine runs (e.g. several market sizes)",
    )
    parser.add_argument(
        "--family",
        choices=("all",) + FAMILIES,
        default="all",
        help="chart family to render (default: every family the data supports)",
    )
    parser.add_argument("--out", default=".", help="output directory (default: .)")
    parser.add_argument("--k", type=int, default=None, help="only rows with this many types")
    parser.add_argument(
        "--supply-pcts",
        type=_floats,
        default=None,
        metavar="a,b",
        help="only rows with exactly this supply combination",
    )
    parser.add_argument("--rp-min", type=float, default=None, help="lowest reserve level")
    parser.add_argument("--rp-max", type=float, default=None, help="highest reserve level")
    parser.add_argument("--cost-run", type=float, default=None, help="only this run cost")
    parser.add_argument("--cost-idle", type=float, default=None, help="only this idle cost")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    filters = dict(
        k=args.k,
        supply_pcts=args.supply_pcts,
        rp_min=args.rp_min,
        rp_max=args.rp_max,
        cost_run=args.cost_run,
        cost_idle=args.cost_idle,
    )
    families = FAMILIES if args.family == "all" else (args.family,)
    written: list[str] = []
    try:
        for family in families:
            spec = ChartSpec(family=family, **filters)
            try:
                written.extend(render(args.csv, spec, args.out))
            except EmptySelectionError:
                if args.family != "all":
                    raise
                print(f"skipping {family}: no data", file=sys.stderr)
    except FigureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
