"""Market model: buses, agents, demand curves and the case container."""

import dataclasses
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Mapping, Optional, Sequence

from .errors import CalibrationError
from .network import Line, PtdfMatrix, compute_ptdf

logger = logging.getLogger(__name__)

DEFAULT_ELASTICITY = -0.2
DEFAULT_REFERENCE_BUS = 13
DELTA_FLOOR = 1e-3


class BusKind(str, Enum):
    LOAD = "conventional-load"
    HYPERSCALER = "hyperscaler"
    MDC = "mdc"
    TRANSIT = "transit"


class Scheme(str, Enum):
    EX_POST = "expost"
    EX_ANTE = "exante"


@dataclass(frozen=True)
class Bus:
    id: int
    kind: BusKind = BusKind.TRANSIT


@dataclass(frozen=True)
class Generator:
    id: str
    bus: int
    c0: float
    c1: float
    capacity: float
    emission_rate: float
    fuel: str = ""

    @property
    def key(self) -> tuple[int, str]:
        return (self.bus, self.id)


@dataclass(frozen=True)
class DemandCurve:
    bus: int
    period: int
    b0: float
    b1: float

    def marginal_benefit(self, load: float) -> float:
        return self.b0 - self.b1 * load


@dataclass(frozen=True)
class Batch:
    id: str
    load: float


@dataclass(frozen=True)
class MdcSpec:
    bus: int
    capacity: float
    # renewable unit id -> curtailed energy per period (MWh)
    curtailed: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    admissible_batches: tuple[str, ...] = ()
    # generator ids the MDC may contract with; empty means every generator
    suppliers: tuple[str, ...] = ()

    def endowment(self, period: int) -> float:
        return float(sum(values[period] for values in self.curtailed.values()))


@dataclass(frozen=True)
class HyperscalerSpec:
    bus: int
    batches: tuple[Batch, ...] = ()
    delta: float = 0.5
    gpu_power_factor: float = 1000.0
    # $ per tonne of CO2 at delta = 0.5
    emission_price: float = 1.0
    # generator ids the hub may contract with; empty means every generator
    suppliers: tuple[str, ...] = ()

    @property
    def total_load(self) -> float:
        return float(sum(batch.load for batch in self.batches))

    @property
    def effective_delta(self) -> float:
        return max(self.delta, DELTA_FLOOR)

    @property
    def emission_weight(self) -> float:
        """emission_price * (1 - delta) / delta, the $/t weight on emissions after normalizing by delta."""
        return self.emission_price * (1.0 - self.delta) / self.effective_delta


@dataclass(frozen=True)
class ForwardPolicy:
    fraction: float
    # (generator bus, generator id, consumer bus, period) -> baseline quantity g* (MWh)
    baseline: Mapping[tuple[int, str, int, int], float] = field(default_factory=dict)


@dataclass(frozen=True)
class Network:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...] = ()
    reference_bus: int = DEFAULT_REFERENCE_BUS

    @property
    def bus_ids(self) -> tuple[int, ...]:
        return tuple(bus.id for bus in self.buses)

    @cached_property
    def ptdf(self) -> PtdfMatrix:
        return compute_ptdf(self.lines, self.bus_ids, self.reference_bus)

    def kind(self, bus_id: int) -> BusKind:
        for bus in self.buses:
            if bus.id == bus_id:
                return bus.kind
        raise KeyError(bus_id)

    def buses_of(self, *kinds: BusKind) -> tuple[int, ...]:
        return tuple(bus.id for bus in self.buses if bus.kind in kinds)


@dataclass(frozen=True)
class MarketCase:
    network: Network
    generators: tuple[Generator, ...]
    demand_curves: tuple[DemandCurve, ...] = ()
    hyperscaler: Optional[HyperscalerSpec] = None
    mdcs: tuple[MdcSpec, ...] = ()
    periods: int = 1
    scheme: Scheme = Scheme.EX_POST
    forward: Optional[ForwardPolicy] = None
    name: str = "case"

    @property
    def load_buses(self) -> tuple[int, ...]:
        return self.network.buses_of(BusKind.LOAD)

    @property
    def mdc_buses(self) -> tuple[int, ...]:
        return self.network.buses_of(BusKind.MDC)

    @property
    def hyperscaler_buses(self) -> tuple[int, ...]:
        return self.network.buses_of(BusKind.HYPERSCALER)

    @property
    def buyer_buses(self) -> tuple[int, ...]:
        return self.network.buses_of(BusKind.LOAD, BusKind.MDC, BusKind.HYPERSCALER)

    @property
    def sorted_generators(self) -> tuple[Generator, ...]:
        return tuple(sorted(self.generators, key=lambda gen: gen.key))

    @property
    def batches(self) -> tuple[Batch, ...]:
        return self.hyperscaler.batches if self.hyperscaler else ()

    def mdc(self, bus: int) -> MdcSpec:
        for spec in self.mdcs:
            if spec.bus == bus:
                return spec
        raise KeyError(bus)

    def sells_to(self, gen: Generator, bus: int) -> bool:
        """Whether gen may hold a contract with the buyer at bus; consumers buy from every generator."""
        kind = self.network.kind(bus)
        if kind == BusKind.MDC:
            suppliers = self.mdc(bus).suppliers
        elif kind == BusKind.HYPERSCALER and self.hyperscaler is not None:
            suppliers = self.hyperscaler.suppliers
        else:
            return True
        return not suppliers or gen.id in suppliers

    def sellers(self, bus: int) -> tuple[Generator, ...]:
        return tuple(gen for gen in self.sorted_generators if self.sells_to(gen, bus))

    def curve(self, bus: int, period: int) -> Optional[DemandCurve]:
        for curve in self.demand_curves:
            if curve.bus == bus and curve.period == period:
                return curve
        return None

    @property
    def batch_load(self) -> float:
        """Total batch load Q_t; batch loads are the same in every period."""
        return self.hyperscaler.total_load if self.hyperscaler else 0.0

    def with_delta(self, delta: float) -> "MarketCase":
        if self.hyperscaler is None:
            return self
        return dataclasses.replace(self, hyperscaler=dataclasses.replace(self.hyperscaler, delta=delta))

    def with_scheme(self, scheme: Scheme) -> "MarketCase":
        return dataclasses.replace(self, scheme=Scheme(scheme))

    def with_forward(self, forward: Optional[ForwardPolicy]) -> "MarketCase":
        return dataclasses.replace(self, forward=forward)

    def without_batch_load(self) -> "MarketCase":
        """Same case with every batch load set to zero (the forward-contract baseline)."""
        if self.hyperscaler is None:
            return dataclasses.replace(self, forward=None)
        batches = tuple(dataclasses.replace(batch, load=0.0) for batch in self.hyperscaler.batches)
        return dataclasses.replace(
            self, hyperscaler=dataclasses.replace(self.hyperscaler, batches=batches), forward=None
        )


def validate_case(case: MarketCase) -> list[str]:
    """Return one message per violated invariant; an empty list means the case is well formed."""
    violations: list[str] = []
    network = case.network
    bus_ids = [bus.id for bus in network.buses]
    known = set(bus_ids)

    if len(known) != len(bus_ids):
        violations.append("bus ids are not unique")
    if network.reference_bus not in known:
        violations.append(f"reference bus {network.reference_bus} is not a network bus")
    if case.periods < 1:
        violations.append(f"periods must be >= 1, got {case.periods}")

    for line in network.lines:
        if line.from_bus not in known or line.to_bus not in known:
            violations.append(f"line {line.id} references an unknown bus")
        if line.from_bus == line.to_bus:
            violations.append(f"line {line.id} has fromBus == toBus")
        if not line.reactance > 0:
            violations.append(f"line {line.id} reactance must be > 0")
        if line.limit < 0:
            violations.append(f"line {line.id} limit must be >= 0")

    gen_ids = [gen.id for gen in case.generators]
    if len(set(gen_ids)) != len(gen_ids):
        violations.append("generator ids are not unique")
    for gen in case.generators:
        if gen.bus not in known:
            violations.append(f"generator {gen.id} sits on unknown bus {gen.bus}")
        if gen.c1 < 0:
            violations.append(f"generator {gen.id} c1 must be >= 0")
        if gen.capacity < 0:
            violations.append(f"generator {gen.id} capacity must be >= 0")
        if gen.emission_rate < 0:
            violations.append(f"generator {gen.id} emission rate must be >= 0")

    load_buses = set(case.load_buses)
    seen_curves = set()
    for curve in case.demand_curves:
        if curve.bus not in load_buses:
            violations.append(f"demand curve at bus {curve.bus} does not reference a conventional-load bus")
        if not 0 <= curve.period < case.periods:
            violations.append(f"demand curve at bus {curve.bus} has period {curve.period} outside horizon")
        if curve.b0 <= 0:
            violations.append(f"demand curve at bus {curve.bus} has b0 <= 0")
        if curve.b1 < 0:
            violations.append(f"demand curve at bus {curve.bus} has b1 < 0")
        if (curve.bus, curve.period) in seen_curves:
            violations.append(f"duplicate demand curve for bus {curve.bus} period {curve.period}")
        seen_curves.add((curve.bus, curve.period))
    for bus in load_buses:
        for t in range(case.periods):
            if (bus, t) not in seen_curves:
                violations.append(f"conventional-load bus {bus} has no demand curve for period {t}")

    hyperscaler_buses = case.hyperscaler_buses
    batch_ids: set[str] = set()
    hs = case.hyperscaler
    if hs is not None:
        if hs.bus not in hyperscaler_buses:
            violations.append(f"hyperscaler bus {hs.bus} is not marked as a hyperscaler bus")
        if not 0.0 <= hs.delta <= 1.0:
            violations.append(f"hyperscaler delta must lie in [0, 1], got {hs.delta}")
        if not hs.gpu_power_factor > 0:
            violations.append(f"hyperscaler gpu power factor must be > 0, got {hs.gpu_power_factor}")
        if not hs.emission_price >= 0:
            violations.append(f"hyperscaler emission price must be >= 0, got {hs.emission_price}")
        for unit in hs.suppliers:
            if unit not in gen_ids:
                violations.append(f"hyperscaler lists unknown supplier {unit}")
        for batch in hs.batches:
            if batch.load < 0:
                violations.append(f"batch {batch.id} load must be >= 0")
        batch_ids = {batch.id for batch in hs.batches}
        if len(batch_ids) != len(hs.batches):
            violations.append("batch ids are not unique")
    if len(hyperscaler_buses) > 1:
        violations.append(f"at most one hyperscaler bus is supported, got {list(hyperscaler_buses)}")
    if hyperscaler_buses and hs is None:
        violations.append(f"bus {hyperscaler_buses[0]} is a hyperscaler bus but no hyperscaler is defined")

    mdc_buses = set(case.mdc_buses)
    seen_mdcs = set()
    for spec in case.mdcs:
        if spec.bus not in known:
            violations.append(f"MDC bus {spec.bus} is not a network bus")
        elif spec.bus not in mdc_buses:
            violations.append(f"MDC at bus {spec.bus} conflicts with bus kind {network.kind(spec.bus).value}")
        if spec.bus in seen_mdcs:
            violations.append(f"more than one MDC at bus {spec.bus}")
        seen_mdcs.add(spec.bus)
        if spec.capacity < 0:
            violations.append(f"MDC {spec.bus} capacity must be >= 0")
        for unit, values in spec.curtailed.items():
            if len(values) != case.periods:
                violations.append(f"MDC {spec.bus} unit {unit} needs {case.periods} curtailed values")
            if any(v < 0 for v in values):
                violations.append(f"MDC {spec.bus} unit {unit} curtailed energy must be >= 0")
        for unit in spec.suppliers:
            if unit not in gen_ids:
                violations.append(f"MDC {spec.bus} lists unknown supplier {unit}")
        for batch in spec.admissible_batches:
            if batch not in batch_ids:
                violations.append(f"MDC {spec.bus} admits unknown batch {batch}")
    for bus in mdc_buses - seen_mdcs:
        violations.append(f"bus {bus} is an MDC bus but has no MDC definition")

    if case.forward is not None and not 0.0 <= case.forward.fraction <= 1.0:
        violations.append(f"forward fraction must lie in [0, 1], got {case.forward.fraction}")
    return violations


def calibrate_demand(
    fixed_loads: Mapping[int, Sequence[float]],
    duals: Mapping[int, Sequence[float]],
    elasticity: float = DEFAULT_ELASTICITY,
) -> list[DemandCurve]:
    """Affine inverse demand through (load, price) with the given point elasticity.

    b1 = -P / (elasticity * L) and b0 = P + b1 * L, so B'(L) = P.
    """
    if not elasticity < 0:
        raise CalibrationError(-1, f"elasticity must be negative, got {elasticity}")
    curves = []
    for bus in sorted(duals):
        loads = fixed_loads.get(bus)
        if loads is None:
            raise CalibrationError(bus, "no fixed load given")
        for period, (load, price) in enumerate(zip(loads, duals[bus])):
            if load <= 0:
                raise CalibrationError(bus, f"load must be positive in period {period}, got {load}")
            if not price > 0:
                raise CalibrationError(bus, f"dual price must be positive in period {period}, got {price}")
            b1 = -price / (elasticity * load)
            curves.append(DemandCurve(bus=bus, period=period, b0=price + b1 * load, b1=b1))
    logger.debug("calibrated %d demand curves at elasticity %s", len(curves), elasticity)
    return curves
