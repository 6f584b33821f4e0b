"""Shared fixtures: the two shipped market documents and a random-instance factory."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from vmauction import Ask, Bid, MechanismConfig
from vmauction.documents import load_market_document

REPO_ROOT = Path(__file__).resolve().parent.parent
MARKETS = REPO_ROOT / "markets"


@pytest.fixture(scope="session")
def two_type_market() -> tuple[Ask, list[Bid], MechanismConfig]:
    """Five bids over two VM types; reserves 8/16, relativity 1:2."""
    return load_market_document(str(MARKETS / "two_type_market.json"))


@pytest.fixture(scope="session")
def three_type_market() -> tuple[Ask, list[Bid], MechanismConfig]:
    """Three bids over three VM types; relativity equals the reserve vector."""
    return load_market_document(str(MARKETS / "three_type_market.json"))


def random_instance(
    rng: np.random.Generator,
    n_max: int = 20,
    k_max: int = 3,
    supply_max: int = 8,
) -> tuple[Ask, list[Bid], MechanismConfig]:
    """Draw a small random market: mixed reserve levels, mixed exponents.

    Valuations are spread around the reserve scale so that instances contain
    a mix of granted, capacity-denied, and reserve-denied bids.
    """
    k = int(rng.integers(1, k_max + 1))
    n = int(rng.integers(1, n_max + 1))
    relativity = tuple(sorted(float(x) for x in rng.uniform(0.5, 4.0, size=k)))
    supplies = tuple(int(s) for s in rng.integers(0, supply_max + 1, size=k))
    rp_level = float(rng.uniform(0.0, 0.9))
    reserves = tuple(rp_level * f for f in relativity)
    q = float(rng.choice([0.5, 1.0, 1.0, 2.0]))

    ask = Ask(supplies=supplies, reserve_prices=reserves)
    config = MechanismConfig(relativity=relativity, density_exponent=q)

    bids = []
    for j in range(n):
        while True:
            bundle = tuple(int(r) for r in rng.integers(0, 5, size=k))
            if any(bundle):
                break
        weight = sum(r * f for r, f in zip(bundle, relativity))
        valuation = float(rng.uniform(0.0, 1.2) * weight)
        bids.append(Bid(bidder_id=f"b{j:03d}", bundle=bundle, valuation=valuation))
    return ask, bids, config
