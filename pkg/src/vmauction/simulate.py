"""Experiment grids: generate random markets, run the auction, record metrics.

One replication draws a single market (bundles and unit values from
truncated normals); the whole settings grid — every combination of per-type
supply percentage and reserve-price level — is then evaluated against that
same market.  Demand is fixed first and supply is derived from it, so
settings within a replication are paired and the reserve-price sweep is a
clean within-instance comparison.

Randomness is fully seeded and splittable: the market of replication ``r``
comes from ``default_rng([seed, r])``, so any scheduling of settings across
workers reproduces identical results.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .market import Ask, Bid, MarketError, MechanismConfig, bundle_reserve, bundle_weight
from .mechanism import PricedOutcome, run_auction
from .oracle import OracleCapacityError, mkp_optimal, mkp_rp_optimal

#: Run-cost per weighted unit actually sold (a quarter of the mean unit value).
DEFAULT_COST_RUN = 0.125

#: Idle-cost variants studied in the experiments: 25..100% of the run cost.
COST_IDLE_SWEEP = tuple(DEFAULT_COST_RUN * x for x in (0.25, 0.5, 0.75, 1.0))


@dataclass(frozen=True)
class TruncatedNormal:
    """A normal distribution rejection-sampled into ``[low, high]``."""

    mean: float
    sd: float
    low: float
    high: float

    def __post_init__(self) -> None:
        if not (self.low < self.high) or self.sd <= 0:
            raise MarketError("truncated normal needs low < high and sd > 0")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` values, regenerating anything out of range."""
        out = np.empty(size, dtype=np.float64)
        filled = 0
        while filled < size:
            draw = rng.normal(self.mean, self.sd, size=size - filled)
            keep = draw[(draw >= self.low) & (draw <= self.high)]
            out[filled : filled + keep.size] = keep
            filled += keep.size
        return out


BUNDLE_DIST = TruncatedNormal(mean=2.5, sd=0.833, low=0.0, high=5.0)
UNIT_VALUE_DIST = TruncatedNormal(mean=0.5, sd=0.166, low=0.0, high=1.0)

#: Relativity used when none is given: each VM type twice the previous.
DEFAULT_RELATIVITY = (1.0, 2.0, 4.0)


@dataclass(frozen=True)
class CostParams:
    """Seller's cost model: running sold units vs. keeping the rest idle."""

    cost_run: float = DEFAULT_COST_RUN
    cost_idle: float = DEFAULT_COST_RUN * 0.5

    def __post_init__(self) -> None:
        if not (0 <= self.cost_idle <= self.cost_run):
            raise MarketError(
                f"expected 0 <= cost_idle <= cost_run, got {self.cost_idle}, {self.cost_run}"
            )


@dataclass(frozen=True)
class ScenarioSpec:
    """One experiment grid: market shape plus the settings to sweep.

    ``supply_pcts`` is the per-type menu of supply percentages; the grid
    crosses it over all ``k`` types.  ``rp_levels`` are per-unit reserve
    levels on the unit-value scale; type ``i`` gets reserve
    ``rp_level * relativity[i]``.
    """

    seed: int
    replications: int
    n_buyers: int = 50
    k: int = 2
    supply_pcts: tuple[float, ...] = (50.0, 75.0, 100.0, 125.0, 150.0)
    rp_levels: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    relativity: tuple[float, ...] | None = None
    density_exponent: float = 1.0
    bundle_dist: TruncatedNormal = BUNDLE_DIST
    unit_value_dist: TruncatedNormal = UNIT_VALUE_DIST

    def __post_init__(self) -> None:
        if self.k < 1:
            raise MarketError("k must be >= 1")
        if self.n_buyers < 0:
            raise MarketError("n_buyers must be >= 0")
        if self.replications < 0:
            raise MarketError("replications must be >= 0")
        if not self.supply_pcts or any(p <= 0 for p in self.supply_pcts):
            raise MarketError("supply_pcts must be non-empty and positive")
        if not self.rp_levels or any(r < 0 for r in self.rp_levels):
            raise MarketError("rp_levels must be non-empty and non-negative")
        if self.relativity is not None and len(self.relativity) != self.k:
            raise MarketError(
                f"relativity has {len(self.relativity)} entries, expected k={self.k}"
            )
        if self.relativity is None and self.k > len(DEFAULT_RELATIVITY):
            raise MarketError(
                f"no default relativity for k={self.k}; pass one explicitly"
            )

    @property
    def relativity_vector(self) -> tuple[float, ...]:
        if self.relativity is not None:
            return tuple(float(f) for f in self.relativity)
        return DEFAULT_RELATIVITY[: self.k]

    def config(self) -> MechanismConfig:
        return MechanismConfig(
            relativity=self.relativity_vector, density_exponent=self.density_exponent
        )


def generate_bids(spec: ScenarioSpec, rng: np.random.Generator) -> list[Bid]:
    """Draw one market's bids.

    Bundle entries are truncated-normal draws rounded to integers; all-zero
    bundles are redrawn.  Each valuation is a unit value times the bid's
    weighted bundle size.
    """
    f = spec.relativity_vector
    width = max(3, len(str(max(spec.n_buyers, 1))))
    bids = []
    for j in range(spec.n_buyers):
        while True:
            bundle = tuple(
                int(round(x)) for x in spec.bundle_dist.sample(rng, spec.k)
            )
            if any(bundle):
                break
        unit_value = float(spec.unit_value_dist.sample(rng, 1)[0])
        weight = math.fsum(r * fi for r, fi in zip(bundle, f))
        bids.append(
            Bid(
                bidder_id=f"b{j:0{width}d}",
                bundle=bundle,
                valuation=unit_value * weight,
            )
        )
    return bids


def derive_ask(
    bids: Sequence[Bid],
    supply_pcts: Sequence[float],
    rp_level: float,
    relativity: Sequence[float],
) -> Ask:
    """Build the seller's ask from observed demand.

    Per-type supply is the demand scaled by that type's percentage, rounded
    half-up; per-type reserve is the level scaled by the type's relativity.
    """
    k = len(relativity)
    demand = [0] * k
    for b in bids:
        for i, r in enumerate(b.bundle):
            demand[i] += r
    supplies = tuple(
        int(math.floor(pct / 100.0 * d + 0.5)) for pct, d in zip(supply_pcts, demand)
    )
    reserves = tuple(rp_level * f for f in relativity)
    return Ask(supplies=supplies, reserve_prices=reserves)


@dataclass(frozen=True)
class MetricsRecord:
    """Everything measured about one auction under one cost model."""

    utilization: tuple[float, ...]
    util_avg: float
    revenue: float
    buyer_utility: float
    allocated_value: float
    reserve_floor: float
    cost_run_total: float
    cost_idle_total: float
    total_cost: float
    seller_utility: float
    ratio_mkp: float | None
    ratio_mkp_rp: float | None
    mechanism_time_ms: float
    oracle_time_ms: float | None


def compute_metrics(
    ask: Ask,
    bids: Sequence[Bid],
    priced: PricedOutcome,
    config: MechanismConfig,
    cost: CostParams,
    mkp_welfare: float | None = None,
    mkp_rp_welfare: float | None = None,
    mechanism_time_ms: float = 0.0,
    oracle_time_ms: float | None = None,
) -> MetricsRecord:
    """Derive the per-auction metrics from a priced outcome."""
    f = config.relativity
    sold = priced.outcome.sold
    utilization = tuple(
        (s / cap) if cap > 0 else 0.0 for s, cap in zip(sold, ask.supplies)
    )
    weighted_sold = math.fsum(s * fi for s, fi in zip(sold, f))
    weighted_idle = math.fsum((cap - s) * fi for s, cap, fi in zip(sold, ask.supplies, f))
    cost_run_total = cost.cost_run * weighted_sold
    cost_idle_total = cost.cost_idle * weighted_idle
    total_cost = cost_run_total + cost_idle_total

    by_id = {b.bidder_id: b for b in bids}
    buyer_utility = math.fsum(
        by_id[w].valuation - priced.outcome.payments[w] for w in priced.outcome.winners
    )
    reserve_floor = math.fsum(
        bundle_reserve(by_id[w].bundle, ask) for w in priced.outcome.winners
    )

    def ratio(opt: float | None) -> float | None:
        if opt is None:
            return None
        if opt <= 0:
            return 1.0
        return priced.allocated_value / opt

    return MetricsRecord(
        utilization=utilization,
        util_avg=math.fsum(utilization) / len(utilization),
        revenue=priced.revenue,
        buyer_utility=buyer_utility,
        allocated_value=priced.allocated_value,
        reserve_floor=reserve_floor,
        cost_run_total=cost_run_total,
        cost_idle_total=cost_idle_total,
        total_cost=total_cost,
        seller_utility=priced.revenue - total_cost,
        ratio_mkp=ratio(mkp_welfare),
        ratio_mkp_rp=ratio(mkp_rp_welfare),
        mechanism_time_ms=mechanism_time_ms,
        oracle_time_ms=oracle_time_ms,
    )


@dataclass(frozen=True)
class GridRow:
    """One settings row: metrics averaged over all replications."""

    setting_id: int
    k: int
    supply_pcts: tuple[float, ...]
    rp_level: float
    q: float
    n: int
    cost: CostParams
    replications: int
    seed: int
    utilization: tuple[float, ...]
    util_avg: float
    revenue: float
    buyer_utility: float
    allocated_value: float
    reserve_floor: float
    cost_run_total: float
    cost_idle_total: float
    total_cost: float
    seller_utility: float
    ratio_mkp: float | None
    ratio_mkp_rp: float | None
    mechanism_time_ms: float
    oracle_time_ms: float | None


def _mean(values: list[float]) -> float:
    return math.fsum(values) / len(values) if values else 0.0


def _mean_or_none(values: list[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    if not present:
        return None
    return math.fsum(present) / len(present)


def _setting_combos(spec: ScenarioSpec) -> list[tuple[float, ...]]:
    combos: list[tuple[float, ...]] = [()]
    for _ in range(spec.k):
        combos = [c + (p,) for c in combos for p in spec.supply_pcts]
    return combos


def _evaluate_setting(
    spec: ScenarioSpec,
    combo_index: int,
    rp_index: int,
    costs: Sequence[CostParams],
    oracles: bool,
    measure_timings: bool,
) -> list[GridRow]:
    """Compute the aggregated rows (one per cost model) for one setting."""
    combo = _setting_combos(spec)[combo_index]
    rp_level = spec.rp_levels[rp_index]
    config = spec.config()
    f = spec.relativity_vector

    per_cost: list[list[MetricsRecord]] = [[] for _ in costs]
    for rep in range(spec.replications):
        rng = np.random.default_rng([spec.seed, rep])
        bids = generate_bids(spec, rng)
        ask = derive_ask(bids, combo, rp_level, f)

        t0 = time.perf_counter()
        priced = run_auction(ask, bids, config)
        mech_ms = (time.perf_counter() - t0) * 1000 if measure_timings else 0.0

        mkp_welfare = mkp_rp_welfare = None
        oracle_ms: float | None = None
        if oracles:
            try:
                t0 = time.perf_counter()
                mkp_welfare = mkp_optimal(ask, bids).welfare
                oracle_ms = (time.perf_counter() - t0) * 1000 if measure_timings else 0.0
                mkp_rp_welfare = mkp_rp_optimal(ask, bids).welfare
            except OracleCapacityError:
                mkp_welfare = mkp_rp_welfare = None
                oracle_ms = None

        for ci, cost in enumerate(costs):
            per_cost[ci].append(
                compute_metrics(
                    ask,
                    bids,
                    priced,
                    config,
                    cost,
                    mkp_welfare=mkp_welfare,
                    mkp_rp_welfare=mkp_rp_welfare,
                    mechanism_time_ms=mech_ms,
                    oracle_time_ms=oracle_ms,
                )
            )

    n_rp = len(spec.rp_levels)
    rows = []
    for ci, cost in enumerate(costs):
        records = per_cost[ci]
        sid = ((combo_index * n_rp) + rp_index) * len(costs) + ci
        rows.append(
            GridRow(
                setting_id=sid,
                k=spec.k,
                supply_pcts=combo,
                rp_level=rp_level,
                q=spec.density_exponent,
                n=spec.n_buyers,
                cost=cost,
                replications=spec.replications,
                seed=spec.seed,
                utilization=tuple(
                    _mean([r.utilization[i] for r in records]) for i in range(spec.k)
                ),
                util_avg=_mean([r.util_avg for r in records]),
                revenue=_mean([r.revenue for r in records]),
                buyer_utility=_mean([r.buyer_utility for r in records]),
                allocated_value=_mean([r.allocated_value for r in records]),
                reserve_floor=_mean([r.reserve_floor for r in records]),
                cost_run_total=_mean([r.cost_run_total for r in records]),
                cost_idle_total=_mean([r.cost_idle_total for r in records]),
                total_cost=_mean([r.total_cost for r in records]),
                seller_utility=_mean([r.seller_utility for r in records]),
                ratio_mkp=_mean_or_none([r.ratio_mkp for r in records]),
                ratio_mkp_rp=_mean_or_none([r.ratio_mkp_rp for r in records]),
                mechanism_time_ms=_mean([r.mechanism_time_ms for r in records]),
                oracle_time_ms=_mean_or_none([r.oracle_time_ms for r in records]),
            )
        )
    return rows


def _eval_star(args: tuple) -> list[GridRow]:
    return _evaluate_setting(*args)


def run_grid(
    spec: ScenarioSpec,
    costs: Sequence[CostParams] = (CostParams(),),
    *,
    oracles: bool = True,
    measure_timings: bool = True,
    jobs: int = 1,
    skip_setting_ids: frozenset[int] = frozenset(),
    progress: Callable[[int, int], None] | None = None,
) -> Iterator[GridRow]:
    """Sweep the whole grid, yielding aggregated rows in setting-id order.

    Results are bit-identical for any ``jobs`` value: every setting derives
    its randomness from ``(seed, replication)`` alone, so scheduling cannot
    leak into the numbers.  ``measure_timings=False`` writes zero timings,
    making the output reproducible byte for byte.

    Args:
        costs: cost models to report; each setting yields one row per model.
        skip_setting_ids: rows to skip (resume support).
    """
    if not costs:
        raise MarketError("at least one cost model is required")
    if spec.replications == 0:
        return
    combos = _setting_combos(spec)
    tasks = []
    for combo_index in range(len(combos)):
        for rp_index in range(len(spec.rp_levels)):
            base = (combo_index * len(spec.rp_levels) + rp_index) * len(costs)
            if all(base + ci in skip_setting_ids for ci in range(len(costs))):
                continue
            tasks.append((spec, combo_index, rp_index, tuple(costs), oracles, measure_timings))

    total = len(tasks)
    done = 0
    if jobs > 1 and total > 1:
        import multiprocessing

        with multiprocessing.Pool(processes=jobs) as pool:
            for rows in pool.imap(_eval_star, tasks, chunksize=1):
                done += 1
                if progress is not None:
                    progress(done, total)
                for row in rows:
                    if row.setting_id not in skip_setting_ids:
                        yield row
    else:
        for task in tasks:
            rows = _eval_star(task)
            done += 1
            if progress is not None:
                progress(done, total)
            for row in rows:
                if row.setting_id not in skip_setting_ids:
                    yield row


# ---------------------------------------------------------------------------
# CSV serialisation of grid rows


def csv_header(k: int) -> list[str]:
    cols = ["setting_id", "k"]
    cols += [f"supply_pct_{i + 1}" for i in range(k)]
    cols += ["rp_level", "q", "n"]
    cols += [f"util_{i + 1}" for i in range(k)]
    cols += [
        "util_avg",
        "revenue",
        "buyer_utility",
        "allocated_value",
        "cost_run",
        "cost_idle",
        "total_cost",
        "seller_utility",
        "ratio_mkp",
        "ratio_mkp_rp",
        "t_mech_ms",
        "t_mkp_ms",
        "replications",
        "seed",
    ]
    return cols


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def row_to_csv(row: GridRow) -> list[str]:
    """Serialise one row; floats get six decimals, absent values are empty."""
    cells = [str(row.setting_id), str(row.k)]
    cells += [_fmt(p) for p in row.supply_pcts]
    cells += [_fmt(row.rp_level), _fmt(row.q), str(row.n)]
    cells += [_fmt(u) for u in row.utilization]
    cells += [
        _fmt(row.util_avg),
        _fmt(row.revenue),
        _fmt(row.buyer_utility),
        _fmt(row.allocated_value),
        _fmt(row.cost.cost_run),
        _fmt(row.cost.cost_idle),
        _fmt(row.total_cost),
        _fmt(row.seller_utility),
        _fmt(row.ratio_mkp),
        _fmt(row.ratio_mkp_rp),
        _fmt(row.mechanism_time_ms),
        _fmt(row.oracle_time_ms),
        str(row.replications),
        str(row.seed),
    ]
    return cells


def write_csv(
    path: str,
    spec: ScenarioSpec,
    rows: Iterable[GridRow],
) -> int:
    """Write rows (sorted by setting id) to ``path``; returns the row count."""
    import csv

    ordered = sorted(rows, key=lambda r: r.setting_id)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(csv_header(spec.k))
        for row in ordered:
            writer.writerow(row_to_csv(row))
    return len(ordered)
