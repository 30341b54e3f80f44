"""Shared fixtures: small hand-built markets with known equilibria."""

from typing import Optional, Sequence

import numpy as np
import pytest

from market.case import (
    Batch,
    Bus,
    BusKind,
    DemandCurve,
    Generator,
    HyperscalerSpec,
    MarketCase,
    MdcSpec,
    Network,
)
from market.caseio import load_case
from market.network import Line


def single_bus_case(capacity: float = 500.0, name: str = "single-bus") -> MarketCase:
    """One generator (c0=10, c1=0.1) and one consumer (b0=40, b1=0.05) at bus 1."""
    network = Network(buses=(Bus(1, BusKind.LOAD),), reference_bus=1)
    return MarketCase(
        network=network,
        generators=(Generator("G1", 1, c0=10.0, c1=0.1, capacity=capacity, emission_rate=0.5, fuel="coal"),),
        demand_curves=(DemandCurve(1, 0, b0=40.0, b1=0.05),),
        name=name,
    )


def two_bus_hyperscaler_case(
    capacity: float = 500.0,
    limit: float = 1000.0,
    loads: Sequence[float] = (50.0,),
    delta: float = 0.5,
    with_consumer: bool = True,
) -> MarketCase:
    """Generator and consumer at bus 1, hyperscaler at bus 2, one line 1->2."""
    network = Network(
        buses=(Bus(1, BusKind.LOAD if with_consumer else BusKind.TRANSIT), Bus(2, BusKind.HYPERSCALER)),
        lines=(Line("L1", 1, 2, reactance=0.1, limit=limit),),
        reference_bus=1,
    )
    batches = tuple(Batch(f"b{n + 1}", load) for n, load in enumerate(loads))
    curves = (DemandCurve(1, 0, b0=40.0, b1=0.05),) if with_consumer else ()
    return MarketCase(
        network=network,
        generators=(Generator("G1", 1, c0=10.0, c1=0.1, capacity=capacity, emission_rate=0.5),),
        demand_curves=curves,
        hyperscaler=HyperscalerSpec(bus=2, batches=batches, delta=delta),
        name="two-bus",
    )


def three_bus_case(
    periods: int = 1,
    batches: Sequence[str] = ("b1", "b2"),
    rng: Optional[np.random.Generator] = None,
) -> MarketCase:
    """Consumer at 1, MDC at 2, hyperscaler at 3; generators at 1 and 2; a three-line ring."""
    costs = [(10.0, 0.1), (25.0, 0.05)]
    if rng is not None:
        costs = [(float(rng.uniform(5, 40)), float(rng.uniform(0.01, 0.2))) for _ in range(2)]
    network = Network(
        buses=(Bus(1, BusKind.LOAD), Bus(2, BusKind.MDC), Bus(3, BusKind.HYPERSCALER)),
        lines=(
            Line("L12", 1, 2, reactance=0.1, limit=300.0),
            Line("L23", 2, 3, reactance=0.1, limit=300.0),
            Line("L13", 1, 3, reactance=0.1, limit=300.0),
        ),
        reference_bus=1,
    )
    return MarketCase(
        network=network,
        generators=(
            Generator("G1", 1, c0=costs[0][0], c1=costs[0][1], capacity=400.0, emission_rate=0.9, fuel="coal"),
            Generator("G2", 2, c0=costs[1][0], c1=costs[1][1], capacity=400.0, emission_rate=0.4, fuel="gas"),
        ),
        demand_curves=tuple(DemandCurve(1, t, b0=60.0, b1=0.1) for t in range(periods)),
        hyperscaler=HyperscalerSpec(bus=3, batches=tuple(Batch(b, 20.0) for b in batches), delta=0.5),
        mdcs=(MdcSpec(bus=2, capacity=15.0, curtailed={"pv2": (3.0,) * periods}, admissible_batches=tuple(batches)),),
        periods=periods,
        name="three-bus",
    )


@pytest.fixture
def micro1() -> MarketCase:
    return single_bus_case()


@pytest.fixture
def three_bus() -> MarketCase:
    return three_bus_case()


@pytest.fixture(scope="session")
def micro_mdc() -> MarketCase:
    return load_case("micro-mdc")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240517)
