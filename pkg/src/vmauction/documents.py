"""JSON document schemas: market in, outcome out, scenario in.

Every emitted document carries ``schema_version``.  Parsing errors name the
offending field with a JSON-path-style prefix so CLI users can find the
problem without reading a stack trace.
"""

from __future__ import annotations

import json
from typing import Any, Sequence

from .market import Ask, AuctionOutcome, Bid, MarketError, MechanismConfig
from .mechanism import PricedOutcome
from .simulate import (
    BUNDLE_DIST,
    UNIT_VALUE_DIST,
    CostParams,
    ScenarioSpec,
    TruncatedNormal,
)

SCHEMA_VERSION = 1


class DocumentError(MarketError):
    """A document is malformed; the message names the bad field."""


def _expect(doc: dict, key: str, kind: type | tuple, where: str) -> Any:
    if key not in doc:
        raise DocumentError(f"{where}.{key}: missing required field")
    value = doc[key]
    if not isinstance(value, kind):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise DocumentError(f"{where}.{key}: expected {names}, got {type(value).__name__}")
    return value


def _wrap(where: str, fn, *args):
    try:
        return fn(*args)
    except DocumentError:
        raise
    except MarketError as exc:
        raise DocumentError(f"{where}: {exc}") from exc


def parse_market_document(
    doc: dict,
) -> tuple[Ask, list[Bid], MechanismConfig]:
    """Parse and validate a market document.

    The ``config`` object is optional; a missing relativity is derived from
    the reserve prices (which must then all be positive), a missing exponent
    defaults to 1, and the tie-break defaults to ``by_id``.
    """
    if not isinstance(doc, dict):
        raise DocumentError("market: expected a JSON object at the top level")

    ask_doc = _expect(doc, "ask", dict, "market")
    supplies = _expect(ask_doc, "supplies", list, "market.ask")
    reserves = _expect(ask_doc, "reserve_prices", list, "market.ask")
    ask = _wrap("market.ask", Ask, supplies, reserves)

    bids_doc = _expect(doc, "bids", list, "market")
    bids: list[Bid] = []
    seen: set[str] = set()
    for i, bid_doc in enumerate(bids_doc):
        where = f"market.bids[{i}]"
        if not isinstance(bid_doc, dict):
            raise DocumentError(f"{where}: expected an object")
        bidder_id = _expect(bid_doc, "id", str, where)
        if bidder_id in seen:
            raise DocumentError(f"{where}.id: duplicate bidder id {bidder_id!r}")
        seen.add(bidder_id)
        bundle = _expect(bid_doc, "bundle", list, where)
        if len(bundle) != ask.k:
            raise DocumentError(
                f"{where}.bundle: has {len(bundle)} entries, expected {ask.k}"
            )
        valuation = _expect(bid_doc, "valuation", (int, float), where)
        bids.append(_wrap(where, Bid, bidder_id, bundle, valuation))

    config_doc = doc.get("config", {})
    if not isinstance(config_doc, dict):
        raise DocumentError("market.config: expected an object")
    q = config_doc.get("q", 1.0)
    if not isinstance(q, (int, float)) or isinstance(q, bool):
        raise DocumentError("market.config.q: expected a number")
    tie_break = config_doc.get("tie_break", "by_id")
    if "relativity" in config_doc:
        relativity = _expect(config_doc, "relativity", list, "market.config")
        if len(relativity) != ask.k:
            raise DocumentError(
                f"market.config.relativity: has {len(relativity)} entries, expected {ask.k}"
            )
        config = _wrap(
            "market.config", MechanismConfig, tuple(relativity), float(q), tie_break
        )
    else:
        config = _wrap(
            "market.config",
            lambda: MechanismConfig.from_ask(ask, float(q), tie_break),
        )
    return ask, bids, config


def load_market_document(path: str) -> tuple[Ask, list[Bid], MechanismConfig]:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DocumentError(
                f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
            ) from exc
    return parse_market_document(doc)


def outcome_to_document(priced: PricedOutcome, ask: Ask) -> dict:
    """Serialise a priced outcome (winners sorted for stable output)."""
    outcome = priced.outcome
    return {
        "schema_version": SCHEMA_VERSION,
        "winners": sorted(outcome.winners),
        "payments": {bidder: outcome.payments[bidder] for bidder in sorted(outcome.payments)},
        "price_basis": {w: priced.price_basis[w] for w in sorted(priced.price_basis)},
        "critical_densities": {
            w: priced.critical_densities[w] for w in sorted(priced.critical_densities)
        },
        "revenue": priced.revenue,
        "allocated_value": priced.allocated_value,
        "sold": list(outcome.sold),
        "remaining": [s - u for s, u in zip(ask.supplies, outcome.sold)],
    }


def outcome_from_document(doc: dict) -> AuctionOutcome:
    """Rebuild the outcome part of an emitted document (for re-validation)."""
    if not isinstance(doc, dict):
        raise DocumentError("outcome: expected a JSON object")
    winners = _expect(doc, "winners", list, "outcome")
    payments = _expect(doc, "payments", dict, "outcome")
    sold = _expect(doc, "sold", list, "outcome")
    return _wrap("outcome", AuctionOutcome, frozenset(winners), payments, sold)


def _parse_dist(doc: dict, key: str, default: TruncatedNormal, where: str) -> TruncatedNormal:
    if key not in doc:
        return default
    sub = _expect(doc, key, dict, where)
    return _wrap(
        f"{where}.{key}",
        TruncatedNormal,
        _expect(sub, "mean", (int, float), f"{where}.{key}"),
        _expect(sub, "sd", (int, float), f"{where}.{key}"),
        _expect(sub, "low", (int, float), f"{where}.{key}"),
        _expect(sub, "high", (int, float), f"{where}.{key}"),
    )


def parse_scenario_document(doc: dict) -> tuple[ScenarioSpec, list[CostParams]]:
    """Parse a grid scenario document into a spec plus cost models."""
    if not isinstance(doc, dict):
        raise DocumentError("scenario: expected a JSON object at the top level")
    where = "scenario"
    seed = _expect(doc, "seed", int, where)
    replications = _expect(doc, "replications", int, where)
    kwargs: dict[str, Any] = {"seed": seed, "replications": replications}
    if "n_buyers" in doc:
        kwargs["n_buyers"] = _expect(doc, "n_buyers", int, where)
    if "k" in doc:
        kwargs["k"] = _expect(doc, "k", int, where)
    if "supply_pcts" in doc:
        kwargs["supply_pcts"] = tuple(_expect(doc, "supply_pcts", list, where))
    if "rp_levels" in doc:
        kwargs["rp_levels"] = tuple(_expect(doc, "rp_levels", list, where))
    if "relativity" in doc and doc["relativity"] is not None:
        kwargs["relativity"] = tuple(_expect(doc, "relativity", list, where))
    if "q" in doc:
        q = _expect(doc, "q", (int, float), where)
        kwargs["density_exponent"] = float(q)
    kwargs["bundle_dist"] = _parse_dist(doc, "bundle_dist", BUNDLE_DIST, where)
    kwargs["unit_value_dist"] = _parse_dist(doc, "unit_value_dist", UNIT_VALUE_DIST, where)
    spec = _wrap(where, lambda: ScenarioSpec(**kwargs))

    costs: list[CostParams]
    if "cost_params" in doc:
        cost_docs = _expect(doc, "cost_params", list, where)
        if not cost_docs:
            raise DocumentError("scenario.cost_params: must not be empty")
        costs = []
        for i, cd in enumerate(cost_docs):
            cw = f"scenario.cost_params[{i}]"
            if not isinstance(cd, dict):
                raise DocumentError(f"{cw}: expected an object")
            costs.append(
                _wrap(
                    cw,
                    CostParams,
                    _expect(cd, "cost_run", (int, float), cw),
                    _expect(cd, "cost_idle", (int, float), cw),
                )
            )
    else:
        costs = [CostParams()]
    return spec, costs


def load_scenario_document(path: str) -> tuple[ScenarioSpec, list[CostParams]]:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DocumentError(
                f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
            ) from exc
    return parse_scenario_document(doc)


def optimal_to_document(result) -> dict:
    return {
        "welfare": result.welfare,
        "winners": sorted(result.winners),
        "method": result.method,
    }
