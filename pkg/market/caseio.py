"""Case files: YAML documents validated with pydantic and turned into MarketCase objects."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from .case import (
    DEFAULT_ELASTICITY,
    DEFAULT_REFERENCE_BUS,
    Batch,
    Bus,
    BusKind,
    DemandCurve,
    ForwardPolicy,
    Generator,
    HyperscalerSpec,
    MarketCase,
    MdcSpec,
    Network,
    Scheme,
    calibrate_demand,
    validate_case,
)
from .dispatch import least_cost_dispatch
from .errors import CaseFileError, CaseValidationError
from .lemke import SolverConfig
from .network import Line

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"
BUNDLED_CASES = ("rts24", "micro1", "micro-overload", "micro-mdc")

PerPeriod = Union[float, list[float]]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BusModel(_Model):
    id: int
    kind: BusKind = BusKind.TRANSIT


class LineModel(_Model):
    id: str
    from_bus: int
    to_bus: int
    reactance: float
    limit: float


class GeneratorModel(_Model):
    id: str
    bus: int
    c0: float
    c1: float
    capacity: float
    emission_rate: float
    fuel: str = ""


class CurveModel(_Model):
    bus: int
    period: int = 0
    b0: float
    b1: float


class DemandModel(_Model):
    curves: list[CurveModel] = []
    fixed_loads: dict[int, PerPeriod] = {}
    elasticity: float = DEFAULT_ELASTICITY

    @model_validator(mode="after")
    def _one_form(self):
        if self.curves and self.fixed_loads:
            raise ValueError("give demand either as curves or as fixed_loads, not both")
        return self


class BatchModel(_Model):
    id: str
    load: float


class HyperscalerModel(_Model):
    bus: int
    delta: float = 0.5
    gpu_power_factor: float = 1000.0
    emission_price: float = 1.0
    suppliers: list[str] = []
    batches: list[BatchModel] = []


class MdcModel(_Model):
    bus: int
    capacity: float
    curtailed: dict[str, PerPeriod] = {}
    batches: list[str] = []
    suppliers: list[str] = []


class ForwardModel(_Model):
    fraction: float


class SolverModel(_Model):
    pivot_tolerance: Optional[float] = None
    complementarity_tolerance: Optional[float] = None
    equality_tolerance: Optional[float] = None
    relative_tolerance: Optional[bool] = None
    max_pivots: Optional[int] = None
    tie_break: Optional[str] = None
    covering: Optional[str] = None
    scaling: Optional[bool] = None


class CaseFileModel(_Model):
    name: str = "case"
    periods: int = 1
    scheme: Scheme = Scheme.EX_POST
    reference_bus: int = DEFAULT_REFERENCE_BUS
    line_limit_scale: float = 1.0
    buses: list[BusModel]
    lines: list[LineModel] = []
    generators: list[GeneratorModel]
    demand: DemandModel = DemandModel()
    hyperscaler: Optional[HyperscalerModel] = None
    mdcs: list[MdcModel] = []
    forward: Optional[ForwardModel] = None
    solver: Optional[SolverModel] = None


@dataclass
class CaseFile:
    case: MarketCase
    solver: SolverConfig = field(default_factory=SolverConfig)
    path: Optional[str] = None


def resolve_case_path(name_or_path: Union[str, Path]) -> Path:
    """A file path, or the name of a bundled case."""
    path = Path(name_or_path)
    if path.exists():
        return path
    bundled = DATA_DIR / f"{name_or_path}.yaml"
    if bundled.exists():
        return bundled
    raise CaseFileError(str(name_or_path), f"no such case file (bundled cases: {', '.join(BUNDLED_CASES)})")


def _per_period(value: PerPeriod, periods: int, what: str, path: str) -> tuple[float, ...]:
    if isinstance(value, list):
        if len(value) != periods:
            raise CaseFileError(path, f"{what} needs {periods} values, got {len(value)}")
        return tuple(float(v) for v in value)
    return (float(value),) * periods


def _read_document(path: Path) -> dict:
    try:
        with open(path) as f:
            document = yaml.safe_load(f)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise CaseFileError(str(path), exc.problem or str(exc),
                            line=mark.line + 1 if mark else None, column=mark.column + 1 if mark else None) from exc
    except yaml.YAMLError as exc:
        raise CaseFileError(str(path), str(exc)) from exc
    if not isinstance(document, dict):
        raise CaseFileError(str(path), "case file must be a mapping at the top level", line=1, column=1)
    return document


def _format_validation(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        where = ".".join(str(part) for part in error["loc"])
        parts.append(f"{where}: {error['msg']}")
    return "; ".join(parts)


def build_case(model: CaseFileModel, path: str = "<memory>", solver: Optional[SolverConfig] = None) -> MarketCase:
    scale = model.line_limit_scale
    network = Network(
        buses=tuple(Bus(bus.id, bus.kind) for bus in model.buses),
        lines=tuple(Line(line.id, line.from_bus, line.to_bus, line.reactance, line.limit * scale) for line in model.lines),
        reference_bus=model.reference_bus,
    )
    generators = tuple(Generator(**gen.model_dump()) for gen in model.generators)

    hyperscaler = None
    if model.hyperscaler is not None:
        hs = model.hyperscaler
        hyperscaler = HyperscalerSpec(
            bus=hs.bus,
            batches=tuple(Batch(batch.id, batch.load) for batch in hs.batches),
            delta=hs.delta,
            gpu_power_factor=hs.gpu_power_factor,
            emission_price=hs.emission_price,
            suppliers=tuple(hs.suppliers),
        )
    mdcs = tuple(
        MdcSpec(
            bus=mdc.bus,
            capacity=mdc.capacity,
            curtailed={unit: _per_period(v, model.periods, f"mdc {mdc.bus} unit {unit}", path)
                       for unit, v in mdc.curtailed.items()},
            admissible_batches=tuple(mdc.batches),
            suppliers=tuple(mdc.suppliers),
        )
        for mdc in model.mdcs
    )

    demand = model.demand
    if demand.fixed_loads:
        loads = {bus: _per_period(v, model.periods, f"fixed load at bus {bus}", path)
                 for bus, v in demand.fixed_loads.items()}
        dispatch = least_cost_dispatch(network, generators, loads, model.periods, solver)
        duals = {bus: dispatch.prices[bus] for bus in loads}
        curves = tuple(calibrate_demand(loads, duals, demand.elasticity))
        logger.info("calibrated %d demand curves for %s from least-cost duals", len(curves), model.name)
    else:
        curves = tuple(DemandCurve(c.bus, c.period, c.b0, c.b1) for c in demand.curves)

    forward = ForwardPolicy(model.forward.fraction) if model.forward else None
    return MarketCase(
        network=network,
        generators=generators,
        demand_curves=curves,
        hyperscaler=hyperscaler,
        mdcs=mdcs,
        periods=model.periods,
        scheme=model.scheme,
        forward=forward,
        name=model.name,
    )


def load_case_file(name_or_path: Union[str, Path]) -> CaseFile:
    path = resolve_case_path(name_or_path)
    document = _read_document(path)
    try:
        model = CaseFileModel.model_validate(document)
    except ValidationError as exc:
        raise CaseFileError(str(path), _format_validation(exc)) from exc

    solver = SolverConfig()
    if model.solver is not None:
        try:
            solver = solver.with_overrides(**model.solver.model_dump())
        except ValueError as exc:
            raise CaseFileError(str(path), f"solver: {exc}") from exc

    case = build_case(model, str(path), solver)
    violations = validate_case(case)
    if violations:
        raise CaseValidationError(violations)
    logger.debug("loaded case %s from %s", case.name, path)
    return CaseFile(case=case, solver=solver, path=str(path))


def load_case(name_or_path: Union[str, Path]) -> MarketCase:
    return load_case_file(name_or_path).case


def serialize_case(case: MarketCase) -> dict:
    """Plain-data document that load_case turns back into an equal MarketCase.

    Demand is written as explicit curves and line limits already scaled;
    a forward policy keeps only its fraction.
    """
    document = {
        "name": case.name,
        "periods": case.periods,
        "scheme": Scheme(case.scheme).value,
        "reference_bus": case.network.reference_bus,
        "line_limit_scale": 1.0,
        "buses": [{"id": bus.id, "kind": BusKind(bus.kind).value} for bus in case.network.buses],
        "lines": [
            {"id": line.id, "from_bus": line.from_bus, "to_bus": line.to_bus,
             "reactance": line.reactance, "limit": line.limit}
            for line in case.network.lines
        ],
        "generators": [
            {"id": gen.id, "bus": gen.bus, "c0": gen.c0, "c1": gen.c1, "capacity": gen.capacity,
             "emission_rate": gen.emission_rate, "fuel": gen.fuel}
            for gen in case.generators
        ],
        "demand": {"curves": [
            {"bus": c.bus, "period": c.period, "b0": c.b0, "b1": c.b1} for c in case.demand_curves
        ]},
        "mdcs": [
            {"bus": mdc.bus, "capacity": mdc.capacity,
             "curtailed": {unit: list(values) for unit, values in mdc.curtailed.items()},
             "batches": list(mdc.admissible_batches), "suppliers": list(mdc.suppliers)}
            for mdc in case.mdcs
        ],
    }
    if case.hyperscaler is not None:
        hs = case.hyperscaler
        document["hyperscaler"] = {
            "bus": hs.bus, "delta": hs.delta, "gpu_power_factor": hs.gpu_power_factor,
            "emission_price": hs.emission_price, "suppliers": list(hs.suppliers),
            "batches": [{"id": batch.id, "load": batch.load} for batch in hs.batches],
        }
    if case.forward is not None:
        document["forward"] = {"fraction": case.forward.fraction}
    return document


def dump_case(case: MarketCase, path: Union[str, Path]):
    with open(path, "w") as f:
        yaml.safe_dump(serialize_case(case), f, sort_keys=False)
