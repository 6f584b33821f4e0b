"""Exact welfare oracles for benchmarking the greedy mechanism.

Two independent routes to the optimal allocation:

* :func:`mkp_optimal` — dynamic programming over the k-dimensional capacity
  grid (0/1 multidimensional knapsack).  Exact, polynomial in the grid size,
  refuses instances whose table would blow the cell budget.
* :func:`enumerate_optimal` — brute-force subset search with capacity
  pruning.  Exponential, capped at 25 bids, exists so the DP has something
  independent to be checked against.

:func:`mkp_rp_optimal` is the reserve-respecting variant: drop every bid
whose value does not cover its bundle reserve, then solve the same knapsack.

Both routes report welfare as an exact rounding of the true sum
(``math.fsum``), so two optimal winner sets with equal true welfare compare
equal.  Among equally optimal sets, both return the lexicographically
smallest sorted id tuple, making results reproducible and comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .market import Ask, Bid, DimensionMismatch, satisfies_rpc

#: Upper bound on (bids + 1) * capacity-grid cells for the DP route.
DP_CELL_BUDGET = 10**8

#: Upper bound on the bid count for the enumeration route.
ENUMERATION_MAX_BIDS = 25


class OracleCapacityError(ValueError):
    """The DP table would exceed the cell budget; try enumerate_optimal."""


class EnumerationSizeError(ValueError):
    """Too many bids for exhaustive enumeration."""


@dataclass(frozen=True)
class OptimalResult:
    """An exact-optimal allocation: welfare, winners, and which route ran."""

    welfare: float
    winners: frozenset[str]
    method: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "winners", frozenset(self.winners))


def _check_instance(ask: Ask, bids: Sequence[Bid]) -> list[Bid]:
    for b in bids:
        if len(b.bundle) != ask.k:
            raise DimensionMismatch(
                f"bid {b.bidder_id!r} bundle has {len(b.bundle)} entries, expected {ask.k}"
            )
    ordered = sorted(bids, key=lambda b: b.bidder_id)
    seen = set()
    for b in ordered:
        if b.bidder_id in seen:
            raise DimensionMismatch(f"duplicate bidder id {b.bidder_id!r}")
        seen.add(b.bidder_id)
    return ordered


def _welfare(chosen: Sequence[Bid]) -> float:
    return math.fsum(b.valuation for b in chosen)


def mkp_optimal(
    ask: Ask, bids: Sequence[Bid], *, cell_budget: int = DP_CELL_BUDGET
) -> OptimalResult:
    """Exact optimum of the capacity-constrained welfare problem.

    Dynamic program over the full capacity grid, one suffix table per bid.
    Backtracking walks the bids in ascending id order and keeps a bid exactly
    when an optimal completion through it exists (and stops once the
    remaining optimum hits zero), which yields the lexicographically
    smallest optimal winner set.

    Raises:
        OracleCapacityError: when ``(n + 1) * prod(s_i + 1)`` exceeds the
            cell budget; use :func:`enumerate_optimal` on small bid counts
            instead.
    """
    ordered = _check_instance(ask, bids)
    n = len(ordered)
    shape = tuple(s + 1 for s in ask.supplies)
    cells = math.prod(shape)
    if (n + 1) * cells > cell_budget:
        raise OracleCapacityError(
            f"DP needs {(n + 1) * cells} cells (> budget {cell_budget}); "
            "for few bids, enumerate_optimal can solve the instance instead"
        )

    # tables[j][c] = best welfare using bids j.. with per-type capacity c.
    tables: list[np.ndarray] = [np.zeros(shape, dtype=np.float64) for _ in range(n + 1)]
    for j in range(n - 1, -1, -1):
        prev = tables[j + 1]
        cur = prev.copy()
        bundle = ordered[j].bundle
        if all(r <= s for r, s in zip(bundle, ask.supplies)):
            to = tuple(slice(r, None) for r in bundle)
            frm = tuple(slice(None, size - r) for r, size in zip(bundle, shape))
            np.maximum(prev[to], prev[frm] + ordered[j].valuation, out=cur[to])
        tables[j] = cur

    chosen: list[Bid] = []
    cap = list(ask.supplies)
    for j, bid in enumerate(ordered):
        here = tables[j][tuple(cap)]
        if here <= 0:
            break
        if all(r <= c for r, c in zip(bid.bundle, cap)):
            after = tuple(c - r for c, r in zip(cap, bid.bundle))
            if bid.valuation + tables[j + 1][after] == here:
                chosen.append(bid)
                cap = list(after)
    return OptimalResult(
        welfare=_welfare(chosen),
        winners=frozenset(b.bidder_id for b in chosen),
        method="dp",
    )


def mkp_rp_optimal(
    ask: Ask, bids: Sequence[Bid], *, cell_budget: int = DP_CELL_BUDGET
) -> OptimalResult:
    """Exact optimum over the bids whose value covers their bundle reserve."""
    eligible = [b for b in bids if satisfies_rpc(b, ask)]
    return mkp_optimal(ask, eligible, cell_budget=cell_budget)


def enumerate_optimal(
    ask: Ask, bids: Sequence[Bid], *, max_bids: int = ENUMERATION_MAX_BIDS
) -> OptimalResult:
    """Exhaustive subset search; independent cross-check for the DP route.

    Raises:
        EnumerationSizeError: with more than ``max_bids`` bids.
    """
    ordered = _check_instance(ask, bids)
    n = len(ordered)
    if n > max_bids:
        raise EnumerationSizeError(f"{n} bids exceed the enumeration cap of {max_bids}")

    best_value = 0.0
    best_set: tuple[str, ...] = ()
    chosen: list[Bid] = []

    def visit(j: int, cap: tuple[int, ...], value: float) -> None:
        nonlocal best_value, best_set
        if j == n:
            ids = tuple(b.bidder_id for b in chosen)
            if value > best_value or (value == best_value and ids < best_set):
                best_value = value
                best_set = ids
            return
        bid = ordered[j]
        if all(r <= c for r, c in zip(bid.bundle, cap)):
            chosen.append(bid)
            visit(j + 1, tuple(c - r for c, r in zip(cap, bid.bundle)), value + bid.valuation)
            chosen.pop()
        visit(j + 1, cap, value)

    visit(0, ask.supplies, 0.0)
    id_set = frozenset(best_set)
    by_id = {b.bidder_id: b for b in ordered}
    return OptimalResult(
        welfare=_welfare([by_id[i] for i in best_set]),
        winners=id_set,
        method="enumeration",
    )
