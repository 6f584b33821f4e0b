"""Truthful greedy combinatorial auction for VM markets with reserve prices.

The public surface:

- :mod:`vmauction.market` — asks, bids, densities, outcome invariants.
- :mod:`vmauction.mechanism` — greedy allocation and critical-value pricing.
- :mod:`vmauction.oracle` — exact optima (DP and enumeration cross-checks).
- :mod:`vmauction.strategy` — misreport sweeps and property checks.
- :mod:`vmauction.simulate` — seeded experiment grids and CSV output.
- :mod:`vmauction.documents` — JSON schemas for markets/outcomes/scenarios.
- :mod:`vmauction.cli` — the ``vmauction`` command.
"""

from .market import (
    Ask,
    AuctionOutcome,
    Bid,
    DegenerateBid,
    DimensionMismatch,
    MarketError,
    MechanismConfig,
    OutcomeInvariant,
    bid_density,
    bundle_reserve,
    bundle_weight,
    outcome_violations,
    reserve_density,
    satisfies_rpc,
    validate_outcome,
)
from .mechanism import (
    AllocationTrace,
    MechanismError,
    PricedOutcome,
    grp_allocate,
    grp_price,
    price_for_bidder,
    run_auction,
)
from .oracle import (
    EnumerationSizeError,
    OptimalResult,
    OracleCapacityError,
    enumerate_optimal,
    mkp_optimal,
    mkp_rp_optimal,
)
from .simulate import (
    CostParams,
    GridRow,
    ScenarioSpec,
    TruncatedNormal,
    compute_metrics,
    derive_ask,
    generate_bids,
    run_grid,
    write_csv,
)
from .documents import (
    SCHEMA_VERSION,
    DocumentError,
    load_market_document,
    load_scenario_document,
    optimal_to_document,
    outcome_from_document,
    outcome_to_document,
    parse_market_document,
    parse_scenario_document,
)
from .strategy import (
    CheckResult,
    Deviation,
    DeviationGrid,
    DeviationReport,
    SuiteReport,
    check_critical_value,
    check_exactness,
    check_monotonicity,
    check_participation,
    classify_kind,
    evaluate_deviation,
    generate_deviations,
    run_property_suite,
    sweep_deviations,
)

__version__ = "0.1.0"

__all__ = [
    "Ask",
    "AuctionOutcome",
    "Bid",
    "MechanismConfig",
    "MarketError",
    "DimensionMismatch",
    "DegenerateBid",
    "OutcomeInvariant",
    "MechanismError",
    "bid_density",
    "bundle_weight",
    "bundle_reserve",
    "reserve_density",
    "satisfies_rpc",
    "outcome_violations",
    "validate_outcome",
    "AllocationTrace",
    "PricedOutcome",
    "grp_allocate",
    "grp_price",
    "price_for_bidder",
    "run_auction",
    "OptimalResult",
    "OracleCapacityError",
    "EnumerationSizeError",
    "mkp_optimal",
    "mkp_rp_optimal",
    "enumerate_optimal",
    "Deviation",
    "DeviationReport",
    "DeviationGrid",
    "CheckResult",
    "SuiteReport",
    "classify_kind",
    "evaluate_deviation",
    "generate_deviations",
    "sweep_deviations",
    "check_exactness",
    "check_participation",
    "check_monotonicity",
    "check_critical_value",
    "run_property_suite",
    "TruncatedNormal",
    "CostParams",
    "ScenarioSpec",
    "GridRow",
    "generate_bids",
    "derive_ask",
    "compute_metrics",
    "run_grid",
    "write_csv",
    "SCHEMA_VERSION",
    "DocumentError",
    "parse_market_document",
    "load_market_document",
    "outcome_to_document",
    "outcome_from_document",
    "parse_scenario_document",
    "load_scenario_document",
    "optimal_to_document",
    "__version__",
]
