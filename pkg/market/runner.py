"""Runner coordinating case loading, scenario solves, sweeps and result files."""

import logging
import os
import time
from pathlib import Path
from typing import Optional, Sequence

from .caseio import CaseFile, load_case_file
from .case import Scheme
from .dispatch import FeasibilityVerdict, check_batch_feasibility
from .errors import MarketError
from .kkt import SchemeContext, write_mlcp_dump
from .metrics import SweepMetrics
from .report import write_reports_csv
from .scenarios import (
    FixedPointConfig,
    ScenarioResult,
    SweepPoint,
    build_instance,
    delta_sweep,
    forward_sweep,
    solve_scenario,
    resolve_forward,
)

DEFAULT_OUTPUT_DIR = "results"
OUTPUT_DIR_ENV = "MARKET_OUTPUT_DIR"


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)


class ScenarioRunner:
    def __init__(
        self,
        case_file: CaseFile,
        output_dir: Optional[str] = None,
        verbose: bool = False,
        quiet: bool = False,
        workers: int = 1,
        fixed_point: Optional[FixedPointConfig] = None,
    ):
        self.case_file = case_file
        self.case = case_file.case
        self.solver = case_file.solver
        self.output_dir = Path(output_dir) if output_dir else default_output_dir()
        self.verbose = verbose
        self.quiet = quiet
        self.workers = workers
        self.fixed_point = fixed_point or FixedPointConfig()
        self.metrics = SweepMetrics()

        # Setup logging
        logging.basicConfig(
            level=logging.DEBUG if verbose else (logging.WARNING if quiet else logging.INFO),
            format='%(asctime)s [%(levelname)s] %(message)s',
            datefmt='%H:%M:%S'
        )
        self.logger = logging.getLogger(__name__)

    def log(self, msg: str, level: str = "info"):
        if not self.quiet:
            elapsed = time.time() - self.metrics.start_time
            prefix = f"[{elapsed:6.1f}s]"
            getattr(self.logger, level)(f"{prefix} {msg}")

    def _path(self, stem: str, suffix: str) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self.output_dir / f"{stem}{suffix}"

    def _scheme(self, scheme: Optional[str]) -> Scheme:
        return Scheme(scheme or self.case.scheme)

    def solve(self, scheme: Optional[str] = None, delta: Optional[float] = None) -> ScenarioResult:
        scheme = self._scheme(scheme)
        case = self.case if delta is None else self.case.with_delta(delta)
        shown = case.hyperscaler.delta if case.hyperscaler else None
        label = f"{case.name} {scheme.value} delta={shown}"
        self.metrics.command = f"solve {label}"
        point = self.metrics.start_point(label)
        self.log(f"Solving {label}")

        try:
            result = solve_scenario(case, scheme, self.solver, self.fixed_point, include_solution=True)
        except MarketError as e:
            self.metrics.complete_point(point, type(e).__name__, error=str(e))
            self.metrics.finish(aborted=True, reason=str(e))
            self.log(f"✗ {label} failed: {e}", "error")
            raise

        self.metrics.complete_point(point, result.solution.status.value, result.solution.pivots, result.iterations)
        self.metrics.finish()
        self.log(f"✓ {label}: {result.solution.pivots} pivots, {result.iterations} iteration(s)")

        stem = f"{case.name}_{scheme.value}" + (f"_d{shown:.2f}" if shown is not None else "")
        write_reports_csv([result.report.to_row()], str(self._path(stem, ".csv")))
        result.report.save(str(self._path(stem, ".json")))
        self.metrics.save(str(self._path(stem, "_metrics.json")))
        if not self.quiet:
            result.report.print_summary()
        return result

    def sweep(
        self,
        deltas: Sequence[float],
        fractions: Optional[Sequence[float]] = None,
        scheme: Optional[str] = None,
    ) -> list[SweepPoint]:
        scheme = self._scheme(scheme)
        self.metrics.command = f"sweep {self.case.name} {scheme.value}"
        self.log(f"Sweeping {len(deltas)} delta value(s)"
                 + (f" x {len(fractions)} forward fraction(s)" if fractions else "")
                 + f" with {self.workers} worker(s)")

        try:
            if fractions:
                points = forward_sweep(self.case, fractions, deltas, scheme, self.solver, self.fixed_point, self.workers)
            else:
                points = delta_sweep(self.case, deltas, scheme, self.solver, self.fixed_point, self.workers)
        except MarketError as e:
            self.metrics.finish(aborted=True, reason=str(e))
            self.log(f"✗ sweep aborted: {e}", "error")
            raise

        for p in points:
            metrics = self.metrics.start_point(f"delta={p.delta:.3f} forward={p.fraction:.2f}")
            report = p.report
            self.metrics.complete_point(
                metrics,
                report.status if report else p.error_type,
                report.pivots if report else 0,
                report.iterations if report else 0,
                error=p.error,
                duration_ms=p.elapsed_ms,
            )
        self.metrics.finish()

        stem = f"{self.case.name}_{scheme.value}_sweep"
        write_reports_csv([p.to_row() for p in points], str(self._path(stem, ".csv")))
        self.metrics.save(str(self._path(stem, "_metrics.json")))
        failed = sum(1 for p in points if not p.ok)
        self.log(f"Sweep finished: {len(points) - failed}/{len(points)} point(s) solved",
                 "warning" if failed else "info")
        if not self.quiet:
            self.metrics.print_summary()
        return points

    def feascheck(self) -> list[FeasibilityVerdict]:
        verdicts = check_batch_feasibility(self.case, self.solver)
        for v in verdicts:
            mark = "✓" if v.feasible else "✗"
            self.log(f"{mark} t={v.period}: Q={v.load:.3f} Lambda*={v.limit:.3f}",
                     "info" if v.feasible else "warning")
        return verdicts

    def dump_mlcp(self, scheme: Optional[str] = None, stream=None) -> Optional[Path]:
        scheme = self._scheme(scheme)
        case = resolve_forward(self.case, self.solver)
        context = SchemeContext(scheme)
        if scheme == Scheme.EX_ANTE:
            context = SchemeContext(scheme, {(i, t): 0.0 for i in case.mdc_buses for t in range(case.periods)})
        instance = build_instance(case, context)
        if stream is not None:
            write_mlcp_dump(instance, stream)
            return None
        path = self._path(f"{case.name}_{scheme.value}_mlcp", ".txt")
        with open(path, "w") as f:
            write_mlcp_dump(instance, f)
        self.log(f"Wrote MLCP (n_z={instance.n_z}, n_pi={instance.n_pi}) to {path}")
        return path


def run_scenario(
    case: str,
    scheme: Optional[str] = None,
    delta: Optional[float] = None,
    output_dir: Optional[str] = None,
    verbose: bool = False,
) -> ScenarioResult:
    """Convenience function to load a case and solve one scenario."""
    runner = ScenarioRunner(load_case_file(case), output_dir=output_dir, verbose=verbose)
    return runner.solve(scheme, delta)
