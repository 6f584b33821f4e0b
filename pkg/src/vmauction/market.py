"""Domain types and bid arithmetic for a sealed-bid VM market.

A seller offers ``k`` VM types with integer supplies and per-unit reserve
prices.  Buyers submit single-minded bundle bids: an integer demand vector
over the VM types plus one money amount for the whole bundle.  Everything
downstream (allocation, pricing, oracles, simulation) is built on the four
scalar quantities defined here:

* weighted bundle size  ``w(d) = sum_i r_i * f_i``  (the "relativity" vector
  ``f`` expresses how much bigger one VM type is than another),
* bid density           ``e(b) = v / w(d)**q``  (value per weighted unit,
  optionally sublinear in the bundle size via the exponent ``q``),
* bundle reserve price  ``res(d) = sum_i r_i * o_i``,
* reserve density       ``e_res(b) = res(d) / w(d)**q``.

Money and densities are floats compared with tolerance :data:`MONEY_EPS`
where an equality test is needed; the feasibility constraints themselves
(capacity, reserve-price cover) are checked with exact ``>=`` / ``<=``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

#: Comparison tolerance for money/density equality checks.
MONEY_EPS = 1e-9

#: The only supported tie-break rule: equal-density bids are ordered by
#: ascending bidder id.  The order is fixed before the auction and reused
#: unchanged in every counterfactual re-run.
TIE_BREAK_BY_ID = "by_id"


class MarketError(ValueError):
    """Base class for malformed market inputs."""


class DimensionMismatch(MarketError):
    """A vector's length does not match the market's number of VM types."""


class DegenerateBid(MarketError):
    """A bid's bundle has zero weighted size, so its density is undefined."""


class OutcomeInvariant(MarketError):
    """An auction outcome violates a feasibility or payment invariant."""


def _coerce_int_vector(values: Iterable[object], what: str) -> tuple[int, ...]:
    out = []
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise MarketError(f"{what}[{i}] must be a number, got {v!r}")
        if isinstance(v, float) and not v.is_integer():
            raise MarketError(f"{what}[{i}] must be an integer, got {v!r}")
        iv = int(v)
        if iv < 0:
            raise MarketError(f"{what}[{i}] must be non-negative, got {iv}")
        out.append(iv)
    return tuple(out)


def _coerce_money_vector(values: Iterable[object], what: str) -> tuple[float, ...]:
    out = []
    for i, v in enumerate(values):
        fv = float(v)
        if not math.isfinite(fv) or fv < 0:
            raise MarketError(f"{what}[{i}] must be finite and non-negative, got {v!r}")
        out.append(fv)
    return tuple(out)


@dataclass(frozen=True)
class Ask:
    """The seller's side of the market.

    Args:
        supplies: available units per VM type (non-negative integers).
        reserve_prices: per-unit reserve price per VM type (non-negative).
    """

    supplies: tuple[int, ...]
    reserve_prices: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "supplies", _coerce_int_vector(self.supplies, "supplies"))
        object.__setattr__(
            self, "reserve_prices", _coerce_money_vector(self.reserve_prices, "reserve_prices")
        )
        if len(self.supplies) == 0:
            raise MarketError("ask needs at least one VM type")
        if len(self.supplies) != len(self.reserve_prices):
            raise DimensionMismatch(
                f"supplies has {len(self.supplies)} types but reserve_prices has "
                f"{len(self.reserve_prices)}"
            )

    @property
    def k(self) -> int:
        """Number of VM types."""
        return len(self.supplies)


@dataclass(frozen=True)
class Bid:
    """A single-minded bundle bid.

    The buyer wants exactly ``bundle`` (all-or-nothing) and values it at
    ``valuation``.  Partial fulfilment is worth nothing to her; a superset
    that contains the bundle is as good as the bundle itself.
    """

    bidder_id: str
    bundle: tuple[int, ...]
    valuation: float

    def __post_init__(self) -> None:
        if not isinstance(self.bidder_id, str) or not self.bidder_id:
            raise MarketError(f"bidder_id must be a non-empty string, got {self.bidder_id!r}")
        object.__setattr__(self, "bundle", _coerce_int_vector(self.bundle, "bundle"))
        if not any(self.bundle):
            raise DegenerateBid(f"bid {self.bidder_id!r}: bundle must request at least one unit")
        v = float(self.valuation)
        if not math.isfinite(v) or v < 0:
            raise MarketError(f"bid {self.bidder_id!r}: valuation must be finite and >= 0")
        object.__setattr__(self, "valuation", v)


@dataclass(frozen=True)
class MechanismConfig:
    """Parameters the mechanism needs beyond the ask itself.

    Args:
        relativity: the weight vector ``f``; strictly positive and
            non-decreasing (type ``i+1`` is at least as "big" as type ``i``).
        density_exponent: the exponent ``q`` > 0 used in ``e(b) = v/w**q``.
            ``q = 1`` ranks by value per weighted unit; ``q < 1`` favours
            larger bundles.
        tie_break: rule applied when two bids have equal density.  Only
            ``"by_id"`` (ascending bidder id) is supported.
    """

    relativity: tuple[float, ...]
    density_exponent: float = 1.0
    tie_break: str = TIE_BREAK_BY_ID

    def __post_init__(self) -> None:
        rel = tuple(float(f) for f in self.relativity)
        if len(rel) == 0:
            raise MarketError("relativity needs at least one entry")
        for i, f in enumerate(rel):
            if not math.isfinite(f) or f <= 0:
                raise MarketError(f"relativity[{i}] must be finite and > 0, got {f!r}")
        for i in range(1, len(rel)):
            if rel[i] < rel[i - 1]:
                raise MarketError(
                    "relativity must be non-decreasing "
                    f"(relativity[{i}]={rel[i]} < relativity[{i-1}]={rel[i-1]})"
                )
        object.__setattr__(self, "relativity", rel)
        q = float(self.density_exponent)
        if not math.isfinite(q) or q <= 0:
            raise MarketError(f"density_exponent must be finite and > 0, got {q!r}")
        object.__setattr__(self, "density_exponent", q)
        if self.tie_break != TIE_BREAK_BY_ID:
            raise MarketError(f"unsupported tie_break {self.tie_break!r} (expected 'by_id')")

    @classmethod
    def from_ask(
        cls,
        ask: Ask,
        density_exponent: float = 1.0,
        tie_break: str = TIE_BREAK_BY_ID,
    ) -> "MechanismConfig":
        """Derive the relativity vector from the ask's reserve prices.

        Uses ``f_i = o_i / o_1``, which treats the reserve-price ratio as the
        size ratio between VM types.  Only valid when every reserve price is
        positive; otherwise the caller must supply relativity explicitly.
        """
        if any(o <= 0 for o in ask.reserve_prices):
            raise MarketError(
                "cannot derive relativity from reserve prices containing zero; "
                "pass an explicit relativity vector"
            )
        o1 = ask.reserve_prices[0]
        return cls(
            relativity=tuple(o / o1 for o in ask.reserve_prices),
            density_exponent=density_exponent,
            tie_break=tie_break,
        )

    @property
    def k(self) -> int:
        return len(self.relativity)


def _check_dims(length: int, k: int, what: str) -> None:
    if length != k:
        raise DimensionMismatch(f"{what} has {length} entries, expected {k}")


def bundle_weight(bundle: Iterable[int], config: MechanismConfig) -> float:
    """Weighted size ``w(d) = sum_i r_i * f_i`` of a demand vector."""
    bundle = tuple(bundle)
    _check_dims(len(bundle), config.k, "bundle")
    return math.fsum(r * f for r, f in zip(bundle, config.relativity))


def bundle_reserve(bundle: Iterable[int], ask: Ask) -> float:
    """Reserve price ``res(d) = sum_i r_i * o_i`` the bundle must cover."""
    bundle = tuple(bundle)
    _check_dims(len(bundle), ask.k, "bundle")
    return math.fsum(r * o for r, o in zip(bundle, ask.reserve_prices))


def bid_density(bid: Bid, config: MechanismConfig) -> float:
    """Ranking score ``e(b) = v / w(d)**q``.

    Raises:
        DegenerateBid: if the weighted bundle size is zero.
    """
    w = bundle_weight(bid.bundle, config)
    if w <= 0:
        raise DegenerateBid(f"bid {bid.bidder_id!r}: zero-weight bundle has no density")
    return bid.valuation / w**config.density_exponent


def reserve_density(bid: Bid, ask: Ask, config: MechanismConfig) -> float:
    """The density the bid would need to exactly cover its reserve price."""
    w = bundle_weight(bid.bundle, config)
    if w <= 0:
        raise DegenerateBid(f"bid {bid.bidder_id!r}: zero-weight bundle has no reserve density")
    return bundle_reserve(bid.bundle, ask) / w**config.density_exponent


def satisfies_rpc(bid: Bid, ask: Ask) -> bool:
    """Reserve-price cover: does the bid's value reach its bundle reserve?"""
    return bid.valuation >= bundle_reserve(bid.bundle, ask)


@dataclass(frozen=True)
class AuctionOutcome:
    """Who won, what everyone pays, and what was sold.

    ``payments`` maps every bidder id to a payment; losers pay exactly 0.
    ``sold`` is the per-type total handed to winners.
    """

    winners: frozenset[str]
    payments: Mapping[str, float]
    sold: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "winners", frozenset(self.winners))
        object.__setattr__(self, "payments", MappingProxyType(dict(self.payments)))
        object.__setattr__(self, "sold", tuple(int(s) for s in self.sold))

    @property
    def revenue(self) -> float:
        return math.fsum(self.payments.values())


def outcome_violations(ask: Ask, bids: list[Bid], outcome: AuctionOutcome) -> list[str]:
    """Check every outcome invariant; return human-readable violations.

    The checks are the three feasibility/payment conditions any valid outcome
    must satisfy, plus bookkeeping consistency:

    * allocation feasibility: per-type sold equals the winners' bundle sum and
      never exceeds supply;
    * individual rationality with reserve cover: for each winner,
      ``res(d) <= payment <= valuation`` (exact comparisons);
    * participation: losers pay exactly 0, and every bidder has a payment.

    Returns an empty list when the outcome is valid.
    """
    violations: list[str] = []
    by_id = {b.bidder_id: b for b in bids}
    if len(by_id) != len(bids):
        violations.append("duplicate bidder ids in bid list")
        return violations

    unknown = outcome.winners - by_id.keys()
    if unknown:
        violations.append(f"winners not present in bid list: {sorted(unknown)}")
    missing = by_id.keys() - outcome.payments.keys()
    if missing:
        violations.append(f"bidders missing from payments: {sorted(missing)}")
    extra = outcome.payments.keys() - by_id.keys()
    if extra:
        violations.append(f"payments for unknown bidders: {sorted(extra)}")

    if len(outcome.sold) != ask.k:
        violations.append(f"sold has {len(outcome.sold)} types, expected {ask.k}")
        return violations

    expected_sold = [0] * ask.k
    for w in outcome.winners & by_id.keys():
        for i, r in enumerate(by_id[w].bundle):
            expected_sold[i] += r
    if tuple(expected_sold) != outcome.sold:
        violations.append(
            f"sold {outcome.sold} does not equal winners' bundle sum {tuple(expected_sold)}"
        )
    for i, (s, cap) in enumerate(zip(outcome.sold, ask.supplies)):
        if s > cap:
            violations.append(f"type {i + 1}: sold {s} exceeds supply {cap}")

    for bid in bids:
        p = outcome.payments.get(bid.bidder_id)
        if p is None:
            continue
        if bid.bidder_id in outcome.winners:
            res = bundle_reserve(bid.bundle, ask)
            if p < res:
                violations.append(
                    f"winner {bid.bidder_id!r} pays {p} below bundle reserve {res}"
                )
            if p > bid.valuation:
                violations.append(
                    f"winner {bid.bidder_id!r} pays {p} above valuation {bid.valuation}"
                )
        elif p != 0:
            violations.append(f"loser {bid.bidder_id!r} pays {p} instead of 0")
    return violations


def validate_outcome(ask: Ask, bids: list[Bid], outcome: AuctionOutcome) -> None:
    """Raise :class:`OutcomeInvariant` if the outcome violates any invariant."""
    violations = outcome_violations(ask, bids, outcome)
    if violations:
        raise OutcomeInvariant("; ".join(violations))
