"""Command-line driver.

Subcommands::

    auction   run one auction from a market document, emit the outcome
    verify    run the incentive/property checks on a market document
    grid      sweep an experiment grid from a scenario document, emit CSV
    oracle    compute exact optima (with and without the reserve filter)

Exit codes are a stable contract: 0 success, 1 property violation,
2 input or usage error.  When ``--out`` is not given, files default into
``$VMAUCTION_OUT`` if set, otherwise results go to stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from typing import Sequence

from .documents import (
    SCHEMA_VERSION,
    DocumentError,
    load_market_document,
    load_scenario_document,
    optimal_to_document,
    outcome_to_document,
)
from .market import (
    Ask,
    AuctionOutcome,
    Bid,
    MarketError,
    MechanismConfig,
    bid_density,
    outcome_violations,
)
from .mechanism import PricedOutcome, run_auction
from .oracle import (
    EnumerationSizeError,
    OptimalResult,
    OracleCapacityError,
    enumerate_optimal,
    mkp_optimal,
    mkp_rp_optimal,
)
from .simulate import CostParams, csv_header, row_to_csv, run_grid, write_csv
from .strategy import DeviationGrid, run_property_suite

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2

#: Environment variable naming the default output directory.
OUT_DIR_ENV = "VMAUCTION_OUT"


def _floats(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one number")
    return values


def _resolve_out(explicit: str | None, default_name: str) -> str | None:
    """File to write: ``--out`` wins, then ``$VMAUCTION_OUT/<name>``, else stdout."""
    if explicit:
        return explicit
    out_dir = os.environ.get(OUT_DIR_ENV)
    if out_dir:
        return os.path.join(out_dir, default_name)
    return None


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)
        print(f"wrote {out}", file=sys.stderr)


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def _apply_overrides(config: MechanismConfig, args: argparse.Namespace) -> MechanismConfig:
    kwargs = {}
    if getattr(args, "q", None) is not None:
        kwargs["density_exponent"] = args.q
    if getattr(args, "relativity", None) is not None:
        kwargs["relativity"] = args.relativity
    return replace(config, **kwargs) if kwargs else config


# ---------------------------------------------------------------------------
# auction


def _auction_table(
    priced: PricedOutcome, ask: Ask, bids: Sequence[Bid], config: MechanismConfig
) -> str:
    outcome = priced.outcome
    by_id = {b.bidder_id: b for b in bids}
    lines = [
        "winners : " + (", ".join(sorted(outcome.winners)) or "(none)"),
        f"revenue : {priced.revenue:.6f}",
        f"value   : {priced.allocated_value:.6f}",
        "sold    : " + ", ".join(f"{s}/{c}" for s, c in zip(outcome.sold, ask.supplies)),
        "",
        f"{'bidder':<12}{'density':>12}{'decision':>12}{'payment':>12}  basis",
    ]
    for bidder in priced.trace.sorted_order:
        density = bid_density(by_id[bidder], config)
        payment = outcome.payments.get(bidder)
        lines.append(
            f"{bidder:<12}"
            f"{density:>12.4f}"
            f"{priced.trace.decisions[bidder]:>12}"
            f"{'' if payment is None else f'{payment:.4f}':>12}"
            f"  {priced.price_basis.get(bidder, '')}"
        )
    return "\n".join(lines) + "\n"


def _auction_csv(
    priced: PricedOutcome, bids: Sequence[Bid], config: MechanismConfig
) -> str:
    by_id = {b.bidder_id: b for b in bids}
    outcome = priced.outcome
    rows = ["bidder_id,density,decision,payment,price_basis"]
    for bidder in priced.trace.sorted_order:
        payment = outcome.payments.get(bidder)
        rows.append(
            ",".join(
                [
                    bidder,
                    f"{bid_density(by_id[bidder], config):.6f}",
                    priced.trace.decisions[bidder],
                    "" if payment is None else f"{payment:.6f}",
                    priced.price_basis.get(bidder, ""),
                ]
            )
        )
    return "\n".join(rows) + "\n"


def cmd_auction(args: argparse.Namespace) -> int:
    ask, bids, config = load_market_document(args.market)
    config = _apply_overrides(config, args)
    priced = run_auction(ask, bids, config)

    if args.format == "table":
        text = _auction_table(priced, ask, bids, config)
    elif args.format == "csv":
        text = _auction_csv(priced, bids, config)
    else:
        text = json.dumps(outcome_to_document(priced, ask), indent=2) + "\n"

    suffix = {"json": ".outcome.json", "csv": ".outcome.csv", "table": ".outcome.txt"}
    _emit(text, _resolve_out(args.out, _stem(args.market) + suffix[args.format]))
    if args.verbose and args.format != "table":
        sys.stderr.write(_auction_table(priced, ask, bids, config))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args: argparse.Namespace) -> int:
    ask, bids, config = load_market_document(args.market)
    config = _apply_overrides(config, args)

    if args.inject_fault == "underpay":
        # Diagnostic mode: perturb every winning payment downward and confirm
        # the validator catches it.  Exercises the exit-1 path on demand.
        priced = run_auction(ask, bids, config)
        payments = {w: p - 1.0 for w, p in priced.outcome.payments.items()}
        faulted = AuctionOutcome(
            winners=priced.outcome.winners, payments=payments, sold=priced.outcome.sold
        )
        violations = outcome_violations(ask, list(bids), faulted)
        for winner in sorted(priced.outcome.winners):
            critical = priced.outcome.payments[winner]
            if payments[winner] < critical - 1e-9:
                violations.append(
                    f"winner {winner!r} pays {payments[winner]} "
                    f"below the critical value {critical}"
                )
        for violation in violations:
            print(f"violation: {violation}", file=sys.stderr)
        return EXIT_VIOLATION if violations else EXIT_OK

    grid = DeviationGrid(random_samples=args.samples, seed=args.seed)
    report, deviations = run_property_suite(
        ask, bids, config, grid=grid, seed=args.seed
    )

    lines = [json.dumps(d.to_dict(), sort_keys=True) for d in deviations]
    lines.append(
        json.dumps(
            {
                "schema_version": SCHEMA_VERSION,
                "instances": 1,
                "deviations": report.deviations,
                "violations": len(report.violations),
                "checks": report.checks,
            },
            sort_keys=True,
        )
    )
    _emit("\n".join(lines) + "\n", _resolve_out(args.out, _stem(args.market) + ".verify.jsonl"))

    if args.verbose:
        for name, ok in report.checks.items():
            print(f"check {name}: {'ok' if ok else 'FAIL'}", file=sys.stderr)
        print(f"deviations evaluated: {report.deviations}", file=sys.stderr)

    if report.violations:
        print(
            "violation: " + json.dumps(report.violations[0], sort_keys=True),
            file=sys.stderr,
        )
        return EXIT_VIOLATION
    return EXIT_OK


# ---------------------------------------------------------------------------
# grid


def _read_existing_rows(path: str, expected_header: list[str]) -> dict[int, list[str]]:
    import csv

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected_header:
            raise DocumentError(
                f"{path}: existing CSV header does not match this scenario's schema"
            )
        return {int(line[0]): line for line in reader if line}


def cmd_grid(args: argparse.Namespace) -> int:
    spec, costs = load_scenario_document(args.scenario)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.q is not None:
        spec = replace(spec, density_exponent=args.q)
    if args.relativity is not None:
        spec = replace(spec, relativity=args.relativity)
    if args.rp_levels is not None:
        spec = replace(spec, rp_levels=args.rp_levels)
    if args.cost_run is not None or args.cost_idle is not None:
        cost_run = args.cost_run if args.cost_run is not None else CostParams().cost_run
        idle_values = args.cost_idle if args.cost_idle is not None else (cost_run * 0.5,)
        costs = [CostParams(cost_run=cost_run, cost_idle=idle) for idle in idle_values]

    out = _resolve_out(args.out, "results.csv")
    if args.resume and out is None:
        raise DocumentError("--resume needs a file to resume into (--out or $VMAUCTION_OUT)")
    if args.plots and out is None:
        raise DocumentError("--plots needs a CSV file to plot from (--out or $VMAUCTION_OUT)")

    existing: dict[int, list[str]] = {}
    if args.resume and out and os.path.exists(out):
        existing = _read_existing_rows(out, csv_header(spec.k))
        print(f"resuming: {len(existing)} rows already present", file=sys.stderr)

    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)

    def progress(done: int, total: int) -> None:
        print(f"grid: {done}/{total} settings", file=sys.stderr, flush=True)

    rows = list(
        run_grid(
            spec,
            costs,
            oracles=not args.no_oracles,
            measure_timings=not args.no_timings,
            jobs=jobs,
            skip_setting_ids=frozenset(existing),
            progress=progress if args.verbose else None,
        )
    )

    import csv as _csv

    if out is None:
        writer = _csv.writer(sys.stdout)
        writer.writerow(csv_header(spec.k))
        for row in sorted(rows, key=lambda r: r.setting_id):
            writer.writerow(row_to_csv(row))
        return EXIT_OK

    if existing:
        merged = dict(existing)
        merged.update({row.setting_id: row_to_csv(row) for row in rows})
        with open(out, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(csv_header(spec.k))
            for sid in sorted(merged):
                writer.writerow(merged[sid])
        count = len(merged)
    else:
        count = write_csv(out, spec, rows)
    print(f"wrote {count} rows -> {out}", file=sys.stderr)

    if args.plots:
        try:
            from vmauction_figures import render_all
        except ImportError:
            raise DocumentError(
                "--plots needs the vmauction-figures package (pip install ./figures)"
            )
        for path in render_all(out, os.path.dirname(os.path.abspath(out))):
            print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle


def _solve(ask: Ask, bids: Sequence[Bid], method: str) -> OptimalResult:
    if method == "dp":
        return mkp_optimal(ask, bids)
    if method == "enum":
        return enumerate_optimal(ask, bids)
    try:
        return mkp_optimal(ask, bids)
    except OracleCapacityError:
        return enumerate_optimal(ask, bids)


def cmd_oracle(args: argparse.Namespace) -> int:
    ask, bids, config = load_market_document(args.market)
    config = _apply_overrides(config, args)

    from .market import satisfies_rpc

    best = _solve(ask, bids, args.method)
    best_rp = _solve(ask, [b for b in bids if satisfies_rpc(b, ask)], args.method)
    priced = run_auction(ask, bids, config)

    def ratio(opt: float) -> float:
        return 1.0 if opt <= 0 else priced.allocated_value / opt

    doc = {
        "schema_version": SCHEMA_VERSION,
        "mkp": optimal_to_document(best),
        "mkp_rp": optimal_to_document(best_rp),
        "greedy": {
            "welfare": priced.allocated_value,
            "winners": sorted(priced.outcome.winners),
            "q": config.density_exponent,
        },
        "ratio_mkp": ratio(best.welfare),
        "ratio_mkp_rp": ratio(best_rp.welfare),
    }
    if args.format == "table":
        text = (
            f"{'solver':<12}{'welfare':>12}  winners\n"
            f"{'mkp':<12}{best.welfare:>12.6f}  {', '.join(sorted(best.winners))}\n"
            f"{'mkp_rp':<12}{best_rp.welfare:>12.6f}  {', '.join(sorted(best_rp.winners))}\n"
            f"{'greedy':<12}{priced.allocated_value:>12.6f}  "
            f"{', '.join(sorted(priced.outcome.winners))}\n"
        )
    else:
        text = json.dumps(doc, indent=2) + "\n"
    _emit(text, _resolve_out(args.out, _stem(args.market) + ".optimal.json"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vmauction",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--q", type=float, default=None, help="density exponent override")
        p.add_argument(
            "--relativity",
            type=_floats,
            default=None,
            metavar="a,b,c",
            help="relativity weights override",
        )
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--out", default=None, help="output file (default: $VMAUCTION_OUT or stdout)")
        p.add_argument("-v", "--verbose", action="store_true", help="extra diagnostics on stderr")

    p_auction = sub.add_parser("auction", help="run one auction from a market document")
    p_auction.add_argument("market", help="market document (JSON)")
    common(p_auction)
    p_auction.add_argument(
        "--format", choices=["json", "csv", "table"], default="json", help="output format"
    )
    p_auction.set_defaults(func=cmd_auction)

    p_verify = sub.add_parser("verify", help="run incentive and invariant checks")
    p_verify.add_argument("market", help="market document (JSON)")
    common(p_verify)
    p_verify.add_argument(
        "--samples", type=int, default=25, help="random deviations per bidder (default 25)"
    )
    p_verify.add_argument(
        "--inject-fault",
        choices=["underpay"],
        default=None,
        help="diagnostic: perturb payments to confirm violations are reported",
    )
    p_verify.set_defaults(func=cmd_verify)

    p_grid = sub.add_parser("grid", help="run an experiment grid from a scenario document")
    p_grid.add_argument("scenario", help="scenario document (JSON)")
    common(p_grid)
    p_grid.add_argument(
        "--jobs", type=int, default=None, help="worker processes (default: all cores)"
    )
    p_grid.add_argument(
        "--rp-levels", type=_floats, default=None, metavar="a,b,c", help="reserve levels override"
    )
    p_grid.add_argument("--cost-run", type=float, default=None, help="run cost override")
    p_grid.add_argument(
        "--cost-idle",
        type=_floats,
        default=None,
        metavar="a,b,c",
        help="idle cost sweep override (one row set per value)",
    )
    p_grid.add_argument(
        "--no-oracles", action="store_true", help="skip exact optima (faster, no ratios)"
    )
    p_grid.add_argument(
        "--no-timings",
        action="store_true",
        help="write zero timings so identical seeds give byte-identical CSV",
    )
    p_grid.add_argument(
        "--resume", action="store_true", help="keep rows already in the output CSV"
    )
    p_grid.add_argument(
        "--plots",
        action="store_true",
        help="also render every chart family next to the CSV (needs vmauction-figures)",
    )
    p_grid.set_defaults(func=cmd_grid)

    p_oracle = sub.add_parser("oracle", help="exact optima with and without the reserve filter")
    p_oracle.add_argument("market", help="market document (JSON)")
    common(p_oracle)
    p_oracle.add_argument(
        "--method", choices=["auto", "dp", "enum"], default="auto", help="solver selection"
    )
    p_oracle.add_argument(
        "--format", choices=["json", "table"], default="json", help="output format"
    )
    p_oracle.set_defaults(func=cmd_oracle)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DocumentError, MarketError, OracleCapacityError, EnumerationSizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
