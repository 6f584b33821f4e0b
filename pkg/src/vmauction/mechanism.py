"""Greedy reserve-price auction: allocation and critical-value pricing.

Allocation walks the bids in non-increasing density order (ties broken by
ascending bidder id) and grants each bid iff

* capacity: adding its bundle keeps every VM type within supply, and
* reserve cover: its value is at least its bundle's reserve price.

Denied bids consume nothing and the walk never stops early.

Pricing charges each winner her critical density: remove her bid, re-run the
allocation, and look at the bids that win only in her absence.  The highest
density among them is the competitor floor; the winner's own reserve density
is the seller floor.  She pays the larger floor times her weighted bundle
size raised to ``q`` — the exact value below which she would have lost, and
never more than she bid.  Losers pay zero.  The combination (monotone
allocation + critical-value payments + all-or-nothing grants + zero for
losers) is what makes truthful bidding a dominant strategy for
single-minded buyers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Sequence

from .market import (
    Ask,
    AuctionOutcome,
    Bid,
    DimensionMismatch,
    MarketError,
    MechanismConfig,
    bundle_reserve,
    bundle_weight,
    validate_outcome,
)

#: Decision labels recorded in the allocation trace.
GRANTED = "granted"
DENIED_ARC = "denied_arc"  # bundle did not fit the remaining capacity
DENIED_RPC = "denied_rpc"  # valuation below the bundle's reserve price


class MechanismError(MarketError):
    """Raised when the mechanism is invoked with inconsistent arguments."""


@dataclass(frozen=True)
class AllocationTrace:
    """Step-by-step record of one greedy allocation pass.

    Attributes:
        sorted_order: bidder ids in the order they were examined.
        decisions: per bidder id, one of ``granted`` / ``denied_arc`` /
            ``denied_rpc`` (a bid failing both checks counts as
            ``denied_rpc``; reserve cover is evaluated first).
        remaining: per-type remaining capacity snapshot after each grant,
            in grant order.
    """

    sorted_order: tuple[str, ...]
    decisions: Mapping[str, str]
    remaining: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "decisions", MappingProxyType(dict(self.decisions)))


@dataclass(frozen=True)
class PricedOutcome:
    """Full auction result: outcome plus the pricing evidence.

    Attributes:
        outcome: winners, payments and per-type sold units.
        critical_densities: per winner, the density floor that set her price.
        price_basis: per winner, ``"competitor"`` when a displaced rival's
            density was binding, ``"reserve"`` when her own reserve density
            was (ties report ``"reserve"``, the two prices coincide there).
        trace: the allocation trace of the truthful run.
        revenue: sum of payments.
        allocated_value: sum of the winners' valuations.
    """

    outcome: AuctionOutcome
    critical_densities: Mapping[str, float]
    price_basis: Mapping[str, str]
    trace: AllocationTrace
    revenue: float
    allocated_value: float

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "critical_densities", MappingProxyType(dict(self.critical_densities))
        )
        object.__setattr__(self, "price_basis", MappingProxyType(dict(self.price_basis)))


@dataclass(frozen=True)
class _PreparedBid:
    """A bid with its derived scalars, computed once per auction."""

    bid: Bid
    weight: float
    weight_q: float
    density: float
    reserve: float


def _prepare(ask: Ask, bids: Sequence[Bid], config: MechanismConfig) -> list[_PreparedBid]:
    if config.k != ask.k:
        raise DimensionMismatch(
            f"relativity has {config.k} entries but the ask has {ask.k} types"
        )
    seen: set[str] = set()
    prepared = []
    q = config.density_exponent
    for bid in bids:
        if bid.bidder_id in seen:
            raise MechanismError(f"duplicate bidder id {bid.bidder_id!r}")
        seen.add(bid.bidder_id)
        w = bundle_weight(bid.bundle, config)
        wq = w**q
        prepared.append(
            _PreparedBid(
                bid=bid,
                weight=w,
                weight_q=wq,
                density=bid.valuation / wq,
                reserve=bundle_reserve(bid.bundle, ask),
            )
        )
    return prepared


def _sort(prepared: list[_PreparedBid]) -> list[_PreparedBid]:
    # Non-increasing density; ties go to the lexicographically smaller id.
    return sorted(prepared, key=lambda p: (-p.density, p.bid.bidder_id))


def _allocate(ask: Ask, ordered: list[_PreparedBid]) -> tuple[list[_PreparedBid], AllocationTrace]:
    used = [0] * ask.k
    winners: list[_PreparedBid] = []
    decisions: dict[str, str] = {}
    snapshots: list[tuple[int, ...]] = []
    for p in ordered:
        if p.bid.valuation < p.reserve:
            decisions[p.bid.bidder_id] = DENIED_RPC
            continue
        if all(u + r <= s for u, r, s in zip(used, p.bid.bundle, ask.supplies)):
            for i, r in enumerate(p.bid.bundle):
                used[i] += r
            winners.append(p)
            decisions[p.bid.bidder_id] = GRANTED
            snapshots.append(tuple(s - u for s, u in zip(ask.supplies, used)))
        else:
            decisions[p.bid.bidder_id] = DENIED_ARC
    trace = AllocationTrace(
        sorted_order=tuple(p.bid.bidder_id for p in ordered),
        decisions=decisions,
        remaining=tuple(snapshots),
    )
    return winners, trace


def grp_allocate(
    ask: Ask, bids: Sequence[Bid], config: MechanismConfig
) -> tuple[frozenset[str], AllocationTrace]:
    """Run the greedy allocation pass.

    Returns:
        The winner ids and the full allocation trace.
    """
    ordered = _sort(_prepare(ask, bids, config))
    winners, trace = _allocate(ask, ordered)
    return frozenset(p.bid.bidder_id for p in winners), trace


def _critical_floor(
    ask: Ask,
    ordered: list[_PreparedBid],
    winner_ids: frozenset[str],
    target: _PreparedBid,
) -> tuple[float, float, str]:
    """Price one winner: (critical density, payment, basis).

    Re-runs the allocation without the target and takes the top density among
    bids that win only in her absence; her own reserve density is the other
    floor.  The payment is clamped into ``[reserve, valuation]`` — both bounds
    hold algebraically, the clamp only shields against float rounding.
    """
    without = [p for p in ordered if p.bid.bidder_id != target.bid.bidder_id]
    counter_winners, _ = _allocate(ask, without)
    displaced = [p for p in counter_winners if p.bid.bidder_id not in winner_ids]
    competitor = max((p.density for p in displaced), default=0.0)
    reserve_floor = target.reserve / target.weight_q
    if competitor > reserve_floor:
        critical = competitor
        payment = min(max(competitor * target.weight_q, target.reserve), target.bid.valuation)
        basis = "competitor"
    else:
        critical = reserve_floor
        payment = target.reserve
        basis = "reserve"
    return critical, payment, basis


def grp_price(
    ask: Ask,
    bids: Sequence[Bid],
    config: MechanismConfig,
    winners: frozenset[str],
) -> PricedOutcome:
    """Price a winner set produced by :func:`grp_allocate`.

    Each winner's counterfactual is independent of the others', so they are
    evaluated one by one in examination order (they could equally run in
    parallel — nothing here mutates shared state).

    Raises:
        MechanismError: if ``winners`` is not what a fresh allocation yields.
    """
    ordered = _sort(_prepare(ask, bids, config))
    fresh, trace = _allocate(ask, ordered)
    fresh_ids = frozenset(p.bid.bidder_id for p in fresh)
    if frozenset(winners) != fresh_ids:
        raise MechanismError(
            f"winner set {sorted(winners)} is inconsistent with a fresh allocation "
            f"{sorted(fresh_ids)}"
        )

    payments = {p.bid.bidder_id: 0.0 for p in ordered}
    critical: dict[str, float] = {}
    basis: dict[str, str] = {}
    for p in fresh:
        e_cr, pay, b = _critical_floor(ask, ordered, fresh_ids, p)
        payments[p.bid.bidder_id] = pay
        critical[p.bid.bidder_id] = e_cr
        basis[p.bid.bidder_id] = b

    sold = [0] * ask.k
    for p in fresh:
        for i, r in enumerate(p.bid.bundle):
            sold[i] += r
    outcome = AuctionOutcome(winners=fresh_ids, payments=payments, sold=tuple(sold))
    validate_outcome(ask, list(bids), outcome)
    return PricedOutcome(
        outcome=outcome,
        critical_densities=critical,
        price_basis=basis,
        trace=trace,
        revenue=outcome.revenue,
        allocated_value=math.fsum(p.bid.valuation for p in fresh),
    )


def run_auction(ask: Ask, bids: Sequence[Bid], config: MechanismConfig) -> PricedOutcome:
    """Allocate and price in one call."""
    winners, _ = grp_allocate(ask, bids, config)
    return grp_price(ask, bids, config, winners)


def price_for_bidder(
    ask: Ask, bids: Sequence[Bid], config: MechanismConfig, bidder_id: str
) -> tuple[bool, float]:
    """Fast path: (won?, payment) for one bidder without pricing the rest.

    Produces exactly the payment :func:`grp_price` would assign that bidder;
    the deviation sweeps lean on this to stay cheap.
    """
    ordered = _sort(_prepare(ask, bids, config))
    winners, _ = _allocate(ask, ordered)
    winner_ids = frozenset(p.bid.bidder_id for p in winners)
    target = next((p for p in winners if p.bid.bidder_id == bidder_id), None)
    if target is None:
        if all(p.bid.bidder_id != bidder_id for p in ordered):
            raise MechanismError(f"no bid from {bidder_id!r}")
        return False, 0.0
    _, payment, _ = _critical_floor(ask, ordered, winner_ids, target)
    return True, payment
