"""Scenario engine: ex post and ex ante solves, delta sweeps and forward-contract sweeps."""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .case import ForwardPolicy, MarketCase, Scheme
from .dispatch import ensure_feasible
from .errors import FixedPointError, MarketError
from .kkt import MlcpInstance, SchemeContext, apply_forward_bounds, assemble, with_disclosed_intensities
from .lemke import EquilibriumSolution, SolverConfig, prepare_system, solve_mixed
from .report import EquilibriumReport, build_report, mdc_intensities

logger = logging.getLogger(__name__)

DEFAULT_DAMPING = 0.5
DEFAULT_FIXED_POINT_TOLERANCE = 1e-6
MAX_FIXED_POINT_ITERATIONS = 100


@dataclass
class FixedPointConfig:
    damping: float = DEFAULT_DAMPING
    tolerance: float = DEFAULT_FIXED_POINT_TOLERANCE
    max_iterations: int = MAX_FIXED_POINT_ITERATIONS

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")


@dataclass
class ScenarioResult:
    instance: MlcpInstance
    solution: EquilibriumSolution
    report: EquilibriumReport
    iterations: int = 1
    history: list[dict] = field(default_factory=list)


def build_instance(case: MarketCase, context: SchemeContext) -> MlcpInstance:
    instance = assemble(case, context)
    if case.forward is not None and case.forward.fraction > 0:
        instance = apply_forward_bounds(instance, case.forward.baseline, case.forward.fraction)
    return instance


def forward_baseline(case: MarketCase, config: Optional[SolverConfig] = None) -> dict[tuple, float]:
    """Consumer contract quantities g* of the same market without datacenter load."""
    baseline_case = case.without_batch_load()
    instance = assemble(baseline_case, SchemeContext(Scheme.EX_POST))
    solution = solve_mixed(instance, config).raise_for_status()
    keys = instance.layout.z_blocks["d"].keys
    return {key: solution.z_value("g", key) for key in keys}


def resolve_forward(case: MarketCase, config: Optional[SolverConfig]) -> MarketCase:
    forward = case.forward
    if forward is None or forward.fraction == 0 or forward.baseline:
        return case
    logger.debug("computing forward baseline for %s", case.name)
    return case.with_forward(ForwardPolicy(forward.fraction, forward_baseline(case, config)))


def _report(case, instance, solution, iterations, include_solution):
    return build_report(case, instance, solution, iterations=iterations, include_solution=include_solution)


def solve_ex_post(
    case: MarketCase,
    config: Optional[SolverConfig] = None,
    check_feasibility: bool = True,
    include_solution: bool = False,
) -> ScenarioResult:
    case = resolve_forward(case, config)
    if check_feasibility:
        ensure_feasible(case, config)
    instance = build_instance(case, SchemeContext(Scheme.EX_POST))
    solution = solve_mixed(instance, config).raise_for_status()
    return ScenarioResult(instance, solution, _report(case, instance, solution, 1, include_solution))


def solve_ex_ante(
    case: MarketCase,
    fixed_point: Optional[FixedPointConfig] = None,
    config: Optional[SolverConfig] = None,
    check_feasibility: bool = True,
    include_solution: bool = False,
) -> ScenarioResult:
    """Damped fixed point on the disclosed MDC intensities, starting from zero.

    The instance is assembled and prepared once; each iteration only rewrites the leasing premiums.
    """
    fixed_point = fixed_point or FixedPointConfig()
    case = resolve_forward(case, config)
    if check_feasibility:
        ensure_feasible(case, config)

    weight = case.hyperscaler.emission_weight if case.hyperscaler else 0.0
    estimate = {(i, t): 0.0 for i in sorted(case.mdc_buses) for t in range(case.periods)}
    history: list[dict] = []
    sigma = fixed_point.damping
    base = build_instance(case, SchemeContext(Scheme.EX_ANTE, dict(estimate)))
    prepared = prepare_system(base, config)

    for iteration in range(1, fixed_point.max_iterations + 1):
        instance = with_disclosed_intensities(base, estimate)
        solution = solve_mixed(instance, config, prepared).raise_for_status()
        computed = mdc_intensities(case, solution)

        if weight == 0.0:
            # disclosed intensities carry no weight: the computed ones are the fixed point
            updated, change = computed, 0.0
        else:
            updated = {key: (1 - sigma) * estimate[key] + sigma * computed[key] for key in estimate}
            change = max((abs(updated[key] - estimate[key]) for key in estimate), default=0.0)
        history.append({
            "iteration": iteration,
            "change": change,
            "pivots": solution.pivots,
            "estimate": {f"{i},{t}": value for (i, t), value in estimate.items()},
            "computed": {f"{i},{t}": value for (i, t), value in computed.items()},
        })
        logger.debug("ex ante iteration %d: change %.3g after %d pivots", iteration, change, solution.pivots)
        estimate = updated
        if change <= fixed_point.tolerance:
            report = _report(case, instance, solution, iteration, include_solution)
            return ScenarioResult(instance, solution, report, iteration, history)

    raise FixedPointError(fixed_point.max_iterations, history)


def solve_scenario(
    case: MarketCase,
    scheme: Optional[Scheme] = None,
    config: Optional[SolverConfig] = None,
    fixed_point: Optional[FixedPointConfig] = None,
    check_feasibility: bool = True,
    include_solution: bool = False,
) -> ScenarioResult:
    scheme = Scheme(scheme or case.scheme)
    if scheme == Scheme.EX_ANTE:
        return solve_ex_ante(case, fixed_point, config, check_feasibility, include_solution)
    return solve_ex_post(case, config, check_feasibility, include_solution)


@dataclass
class SweepPoint:
    delta: float
    fraction: float = 0.0
    report: Optional[EquilibriumReport] = None
    error: Optional[str] = None
    error_type: Optional[str] = None
    elapsed_ms: float = 0.0

    @property
    def ok(self) -> bool:
        return self.report is not None

    def to_row(self) -> dict:
        if self.report is not None:
            row = self.report.to_row()
        else:
            row = {"delta": self.delta, "forward_fraction": self.fraction, "status": self.error_type}
        row["error"] = self.error
        return row


def point_trace_path(trace_path: str, delta: float, fraction: float) -> str:
    """Per-point trace file: results/trace.log becomes results/trace_d0.5_f0.9.log."""
    path = Path(trace_path)
    return str(path.with_name(f"{path.stem}_d{delta:g}_f{fraction:g}{path.suffix}"))


def _solve_point(task: tuple) -> SweepPoint:
    case, delta, fraction, scheme, config, fixed_point = task
    if config is not None and config.trace_path:
        config = config.with_overrides(trace_path=point_trace_path(config.trace_path, delta, fraction))
    started = time.perf_counter()
    point = SweepPoint(delta=delta, fraction=fraction)
    try:
        result = solve_scenario(case.with_delta(delta), scheme, config, fixed_point, check_feasibility=False)
        point.report = result.report
    except MarketError as exc:
        point.error = str(exc)
        point.error_type = type(exc).__name__
        logger.warning("sweep point delta=%.3f fraction=%.2f failed: %s", delta, fraction, exc)
    point.elapsed_ms = (time.perf_counter() - started) * 1000
    return point


def _run(tasks: list[tuple], workers: int) -> list[SweepPoint]:
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_solve_point, tasks))
    return [_solve_point(task) for task in tasks]


def delta_sweep(
    case: MarketCase,
    deltas: Sequence[float],
    scheme: Optional[Scheme] = None,
    config: Optional[SolverConfig] = None,
    fixed_point: Optional[FixedPointConfig] = None,
    workers: int = 1,
) -> list[SweepPoint]:
    """Independent solves per delta; failures are recorded per point."""
    for delta in deltas:
        if not 0.0 <= delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {delta}")
    scheme = Scheme(scheme or case.scheme)
    case = resolve_forward(case, config)
    ensure_feasible(case, config)
    fraction = case.forward.fraction if case.forward else 0.0
    tasks = [(case, float(delta), fraction, scheme, config, fixed_point) for delta in deltas]
    return _run(tasks, workers)


def forward_sweep(
    case: MarketCase,
    fractions: Sequence[float],
    deltas: Sequence[float],
    scheme: Optional[Scheme] = None,
    config: Optional[SolverConfig] = None,
    fixed_point: Optional[FixedPointConfig] = None,
    workers: int = 1,
) -> list[SweepPoint]:
    """Grid over forward fractions (outer) and deltas (inner) sharing one baseline solve."""
    for fraction in fractions:
        if not 0.0 <= fraction <= 1.0:
            raise ValueError(f"forward fraction must lie in [0, 1], got {fraction}")
    for delta in deltas:
        if not 0.0 <= delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {delta}")
    scheme = Scheme(scheme or case.scheme)
    ensure_feasible(case, config)
    baseline = forward_baseline(case, config) if any(f > 0 for f in fractions) else {}

    tasks = []
    for fraction in fractions:
        policy = ForwardPolicy(float(fraction), baseline) if fraction > 0 else None
        variant = case.with_forward(policy)
        tasks.extend((variant, float(delta), float(fraction), scheme, config, fixed_point) for delta in deltas)
    return _run(tasks, workers)
