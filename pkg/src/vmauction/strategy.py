"""Strategic-deviation checks: does lying ever beat truthful bidding?

A buyer is single-minded: her utility is ``true_value - payment`` when the
bid she declared wins a bundle containing her true bundle, and zero in every
other case (losing, or winning something that misses part of what she
actually needs).  The mechanism is supposed to make the truthful declaration
a dominant strategy; this module hunts for counterexamples.

Four checks cover the standard sufficient conditions:

* exactness      — winners receive exactly what they asked for;
* participation  — losers pay nothing;
* monotonicity   — a winner still wins after bidding more for less, a loser
  still loses after bidding less for more;
* critical value — each winner pays the exact threshold between losing and
  winning (probed at payment ± delta).

Plus a direct utility comparison over a deviation grid (value scalings,
bundle perturbations, joint changes, boundary probes, random samples).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from .market import Ask, Bid, MarketError, MechanismConfig, MONEY_EPS
from .mechanism import (
    DENIED_RPC,
    GRANTED,
    MechanismError,
    PricedOutcome,
    grp_allocate,
    price_for_bidder,
    run_auction,
)

#: Default probe distance around a winner's payment.
BOUNDARY_DELTA = 1e-6

#: Default value-scaling factors for the deviation grid.
VALUE_MULTIPLIERS = (0.25, 0.5, 0.75, 0.9, 1.0, 1.1, 1.5, 2.0, 4.0)


@dataclass(frozen=True)
class Deviation:
    """One alternative declaration for a target bidder."""

    target: str
    declared_bundle: tuple[int, ...]
    declared_valuation: float
    kind: str

    def __post_init__(self) -> None:
        bundle = tuple(int(r) for r in self.declared_bundle)
        if any(r < 0 for r in bundle) or not any(bundle):
            raise MarketError(
                f"deviation for {self.target!r}: declared bundle must be non-negative "
                "and request at least one unit"
            )
        object.__setattr__(self, "declared_bundle", bundle)
        v = float(self.declared_valuation)
        if not math.isfinite(v) or v < 0:
            raise MarketError(f"deviation for {self.target!r}: declared valuation must be >= 0")
        object.__setattr__(self, "declared_valuation", v)


@dataclass(frozen=True)
class DeviationReport:
    """Utility comparison between the truthful and one deviated declaration."""

    scenario: Deviation
    truthful_utility: float
    deviated_utility: float
    deviated_won: bool
    deviated_payment: float
    profitable: bool

    def to_dict(self) -> dict:
        return {
            "target": self.scenario.target,
            "kind": self.scenario.kind,
            "declared_bundle": list(self.scenario.declared_bundle),
            "declared_valuation": self.scenario.declared_valuation,
            "truthful_utility": self.truthful_utility,
            "deviated_utility": self.deviated_utility,
            "deviated_won": self.deviated_won,
            "deviated_payment": self.deviated_payment,
            "profitable": self.profitable,
        }


@dataclass(frozen=True)
class DeviationGrid:
    """What the sweep tries.

    An all-empty grid (no multipliers, no bundle steps, no probes, no random
    samples) produces an empty report list.
    """

    value_multipliers: tuple[float, ...] = VALUE_MULTIPLIERS
    include_boundary_probes: bool = True
    boundary_delta: float = BOUNDARY_DELTA
    bundle_step: int = 1
    include_joint: bool = True
    random_samples: int = 0
    seed: int | None = None


@dataclass(frozen=True)
class CheckResult:
    """Outcome of a property check: ok, how much was checked, first failure."""

    ok: bool
    checked: int
    counterexample: dict | None = None


def classify_kind(true_bid: Bid, bundle: tuple[int, ...], valuation: float) -> str:
    """Label a deviation relative to the truthful declaration."""
    same_bundle = bundle == true_bid.bundle
    superset = all(a >= b for a, b in zip(bundle, true_bid.bundle)) and not same_bundle
    subset = all(a <= b for a, b in zip(bundle, true_bid.bundle)) and not same_bundle
    if same_bundle:
        return "value_up" if valuation >= true_bid.valuation else "value_down"
    if valuation == true_bid.valuation:
        if superset:
            return "bundle_superset"
        if subset:
            return "bundle_subset"
    return "joint"


def _utility(true_bid: Bid, declared: Bid, won: bool, payment: float) -> float:
    if not won:
        return 0.0
    covers = all(d >= t for d, t in zip(declared.bundle, true_bid.bundle))
    if not covers:
        return 0.0
    return true_bid.valuation - payment


def _swap(bids: Sequence[Bid], declared: Bid) -> list[Bid]:
    return [declared if b.bidder_id == declared.bidder_id else b for b in bids]


def evaluate_deviation(
    ask: Ask, bids: Sequence[Bid], config: MechanismConfig, deviation: Deviation
) -> DeviationReport:
    """Compare the target's utility under truth vs. one deviation.

    The target keeps her bidder id (and hence her tie-break position); only
    the declared bundle and valuation change.

    Raises:
        MechanismError: if the target id is not in the bid list.
    """
    true_bid = next((b for b in bids if b.bidder_id == deviation.target), None)
    if true_bid is None:
        raise MechanismError(f"no bid from {deviation.target!r}")

    won, payment = price_for_bidder(ask, bids, config, deviation.target)
    truthful_utility = _utility(true_bid, true_bid, won, payment)

    declared = Bid(
        bidder_id=deviation.target,
        bundle=deviation.declared_bundle,
        valuation=deviation.declared_valuation,
    )
    dev_won, dev_payment = price_for_bidder(ask, _swap(bids, declared), config, deviation.target)
    deviated_utility = _utility(true_bid, declared, dev_won, dev_payment)

    return DeviationReport(
        scenario=deviation,
        truthful_utility=truthful_utility,
        deviated_utility=deviated_utility,
        deviated_won=dev_won,
        deviated_payment=dev_payment if dev_won else 0.0,
        profitable=deviated_utility > truthful_utility + MONEY_EPS,
    )


def _bundle_variants(
    true_bid: Bid, ask: Ask, step: int
) -> Iterator[tuple[int, ...]]:
    if step <= 0:
        return
    for i in range(len(true_bid.bundle)):
        grown = list(true_bid.bundle)
        grown[i] += step
        if grown[i] <= ask.supplies[i]:
            yield tuple(grown)
        shrunk = list(true_bid.bundle)
        shrunk[i] -= step
        if shrunk[i] >= 0 and any(shrunk):
            yield tuple(shrunk)


def generate_deviations(
    ask: Ask, bids: Sequence[Bid], config: MechanismConfig, target: str, grid: DeviationGrid
) -> list[Deviation]:
    """Materialise the deviation grid for one target, in deterministic order."""
    true_bid = next((b for b in bids if b.bidder_id == target), None)
    if true_bid is None:
        raise MechanismError(f"no bid from {target!r}")

    candidates: list[tuple[tuple[int, ...], float]] = []
    for m in grid.value_multipliers:
        candidates.append((true_bid.bundle, m * true_bid.valuation))

    if grid.include_boundary_probes:
        won, payment = price_for_bidder(ask, bids, config, target)
        if won:
            d = grid.boundary_delta
            candidates.append((true_bid.bundle, payment + d))
            if payment - d >= 0:
                candidates.append((true_bid.bundle, payment - d))

    variants = list(_bundle_variants(true_bid, ask, grid.bundle_step))
    for bundle in variants:
        candidates.append((bundle, true_bid.valuation))
    if grid.include_joint:
        for bundle in variants:
            for m in grid.value_multipliers:
                candidates.append((bundle, m * true_bid.valuation))

    if grid.random_samples > 0:
        rng = np.random.default_rng(grid.seed)
        drawn = 0
        while drawn < grid.random_samples:
            bundle = tuple(int(rng.integers(0, s + 1)) for s in ask.supplies)
            if not any(bundle):
                continue
            value = float(true_bid.valuation * rng.uniform(0.25, 4.0))
            candidates.append((bundle, value))
            drawn += 1

    return [
        Deviation(
            target=target,
            declared_bundle=bundle,
            declared_valuation=value,
            kind=classify_kind(true_bid, bundle, value),
        )
        for bundle, value in candidates
    ]


def sweep_deviations(
    ask: Ask,
    bids: Sequence[Bid],
    config: MechanismConfig,
    target: str,
    grid: DeviationGrid = DeviationGrid(),
) -> list[DeviationReport]:
    """Evaluate every deviation in the grid for one target."""
    return [
        evaluate_deviation(ask, bids, config, dev)
        for dev in generate_deviations(ask, bids, config, target, grid)
    ]


def check_exactness(
    ask: Ask, bids: Sequence[Bid], priced: PricedOutcome
) -> CheckResult:
    """Winners receive exactly their requested bundles (sold bookkeeping)."""
    by_id = {b.bidder_id: b for b in bids}
    expected = [0] * ask.k
    for w in priced.outcome.winners:
        for i, r in enumerate(by_id[w].bundle):
            expected[i] += r
    ok = tuple(expected) == priced.outcome.sold
    return CheckResult(
        ok=ok,
        checked=len(priced.outcome.winners),
        counterexample=None
        if ok
        else {"sold": list(priced.outcome.sold), "expected": expected},
    )


def check_participation(bids: Sequence[Bid], priced: PricedOutcome) -> CheckResult:
    """Losers pay exactly zero."""
    for b in bids:
        if b.bidder_id not in priced.outcome.winners:
            p = priced.outcome.payments[b.bidder_id]
            if p != 0:
                return CheckResult(
                    ok=False,
                    checked=len(bids),
                    counterexample={"bidder": b.bidder_id, "payment": p},
                )
    return CheckResult(ok=True, checked=len(bids))


def check_monotonicity(
    ask: Ask,
    bids: Sequence[Bid],
    config: MechanismConfig,
    samples: int = 2,
    seed: int | None = None,
) -> CheckResult:
    """Winners keep winning with better bids; losers keep losing with worse.

    For every bidder, tries deterministic corner variants (same declaration,
    doubled/halved value, one-unit bundle shrink/growth) plus ``samples``
    random variants on the favourable side, and re-runs the allocation.
    """
    winners, _ = grp_allocate(ask, bids, config)
    rng = np.random.default_rng(seed)
    checked = 0
    for bid in bids:
        is_winner = bid.bidder_id in winners
        variants: list[tuple[float, tuple[int, ...]]] = [(bid.valuation, bid.bundle)]
        if is_winner:
            variants.append((2 * bid.valuation + 1, bid.bundle))
            for i in range(ask.k):
                shrunk = list(bid.bundle)
                if shrunk[i] >= 1:
                    shrunk[i] -= 1
                    if any(shrunk):
                        variants.append((bid.valuation, tuple(shrunk)))
            for _ in range(samples):
                value = bid.valuation * (1 + rng.uniform(0, 3))
                shrunk = tuple(
                    int(rng.integers(1 if sum(bid.bundle) == r else 0, r + 1)) if r else 0
                    for r in bid.bundle
                )
                if any(shrunk):
                    variants.append((value, shrunk))
        else:
            variants.append((bid.valuation / 2, bid.bundle))
            for i in range(ask.k):
                grown = list(bid.bundle)
                grown[i] += 1
                variants.append((bid.valuation, tuple(grown)))
            for _ in range(samples):
                value = bid.valuation * rng.uniform(0, 1)
                grown = tuple(r + int(rng.integers(0, 3)) for r in bid.bundle)
                variants.append((value, grown))

        for value, bundle in variants:
            changed = Bid(bidder_id=bid.bidder_id, bundle=bundle, valuation=value)
            new_winners, _ = grp_allocate(ask, _swap(bids, changed), config)
            now_wins = bid.bidder_id in new_winners
            checked += 1
            if is_winner and not now_wins:
                return CheckResult(
                    ok=False,
                    checked=checked,
                    counterexample={
                        "bidder": bid.bidder_id,
                        "was": "winner",
                        "declared_valuation": value,
                        "declared_bundle": list(bundle),
                    },
                )
            if not is_winner and now_wins:
                return CheckResult(
                    ok=False,
                    checked=checked,
                    counterexample={
                        "bidder": bid.bidder_id,
                        "was": "loser",
                        "declared_valuation": value,
                        "declared_bundle": list(bundle),
                    },
                )
    return CheckResult(ok=True, checked=checked)


def check_critical_value(
    ask: Ask,
    bids: Sequence[Bid],
    config: MechanismConfig,
    delta: float = BOUNDARY_DELTA,
) -> CheckResult:
    """Each winner's payment is the win/lose threshold of her value.

    Re-declares each winner at ``payment + delta`` (must still win) and at
    ``payment - delta`` (must lose; skipped when that would be negative).
    """
    priced = run_auction(ask, bids, config)
    by_id = {b.bidder_id: b for b in bids}
    checked = 0
    for winner in sorted(priced.outcome.winners):
        bid = by_id[winner]
        payment = priced.outcome.payments[winner]
        above = Bid(bidder_id=winner, bundle=bid.bundle, valuation=payment + delta)
        new_winners, _ = grp_allocate(ask, _swap(bids, above), config)
        checked += 1
        if winner not in new_winners:
            return CheckResult(
                ok=False,
                checked=checked,
                counterexample={"bidder": winner, "probe": payment + delta, "expected": "win"},
            )
        if payment - delta >= 0:
            below = Bid(bidder_id=winner, bundle=bid.bundle, valuation=payment - delta)
            new_winners, _ = grp_allocate(ask, _swap(bids, below), config)
            checked += 1
            if winner in new_winners:
                return CheckResult(
                    ok=False,
                    checked=checked,
                    counterexample={
                        "bidder": winner,
                        "probe": payment - delta,
                        "expected": "lose",
                    },
                )
    return CheckResult(ok=True, checked=checked)


@dataclass(frozen=True)
class SuiteReport:
    """Aggregate result of the verification suite on one instance."""

    deviations: int
    checks: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def run_property_suite(
    ask: Ask,
    bids: Sequence[Bid],
    config: MechanismConfig,
    targets: Sequence[str] | None = None,
    grid: DeviationGrid = DeviationGrid(),
    seed: int | None = None,
) -> tuple[SuiteReport, list[DeviationReport]]:
    """Run every check on one instance.

    Args:
        targets: bidders to sweep deviations for (default: all of them).

    Returns:
        The aggregate report and the individual deviation reports.
    """
    priced = run_auction(ask, bids, config)
    violations: list[dict] = []
    checks: dict[str, bool] = {}

    for name, result in (
        ("exactness", check_exactness(ask, bids, priced)),
        ("participation", check_participation(bids, priced)),
        ("monotonicity", check_monotonicity(ask, bids, config, seed=seed)),
        ("critical_value", check_critical_value(ask, bids, config)),
    ):
        checks[name] = result.ok
        if not result.ok:
            violations.append({"check": name, "counterexample": result.counterexample})

    reports: list[DeviationReport] = []
    for target in targets if targets is not None else [b.bidder_id for b in bids]:
        reports.extend(sweep_deviations(ask, bids, config, target, grid))
    for report in reports:
        if report.profitable:
            violations.append({"check": "truthfulness", "counterexample": report.to_dict()})

    return SuiteReport(deviations=len(reports), checks=checks, violations=violations), reports
