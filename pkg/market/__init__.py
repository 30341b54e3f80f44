"""Equilibrium model of a power market with hyperscaler workload outsourcing to micro datacenters."""

from .case import (
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
from .caseio import CaseFile, dump_case, load_case, load_case_file, serialize_case
from .dispatch import (
    FeasibilityVerdict,
    check_batch_feasibility,
    ensure_feasible,
    least_cost_dispatch,
    throughput_limit,
)
from .errors import (
    AssemblyError,
    BalanceError,
    CalibrationError,
    CaseFileError,
    CaseValidationError,
    FixedPointError,
    InfeasibleCaseError,
    MarketError,
    NetworkNumericalError,
    SolverError,
    TopologyError,
)
from .kkt import MlcpInstance, SchemeContext, aggregate_signature, apply_forward_bounds, assemble, residual
from .lemke import EquilibriumSolution, SolverConfig, SolveStatus, solve_lcp, solve_mixed
from .metrics import SolveMetrics, SweepMetrics
from .network import Line, PtdfMatrix, compute_ptdf, congestion_cost, line_flows
from .report import EquilibriumReport, build_report, write_reports_csv
from .runner import ScenarioRunner, run_scenario
from .scenarios import (
    FixedPointConfig,
    ScenarioResult,
    SweepPoint,
    delta_sweep,
    forward_baseline,
    forward_sweep,
    solve_ex_ante,
    solve_ex_post,
    solve_scenario,
)

__all__ = [
    "Batch",
    "Bus",
    "BusKind",
    "DemandCurve",
    "ForwardPolicy",
    "Generator",
    "HyperscalerSpec",
    "MarketCase",
    "MdcSpec",
    "Network",
    "Scheme",
    "calibrate_demand",
    "validate_case",
    "CaseFile",
    "dump_case",
    "load_case",
    "load_case_file",
    "serialize_case",
    "FeasibilityVerdict",
    "check_batch_feasibility",
    "ensure_feasible",
    "least_cost_dispatch",
    "throughput_limit",
    "AssemblyError",
    "BalanceError",
    "CalibrationError",
    "CaseFileError",
    "CaseValidationError",
    "FixedPointError",
    "InfeasibleCaseError",
    "MarketError",
    "NetworkNumericalError",
    "SolverError",
    "TopologyError",
    "MlcpInstance",
    "SchemeContext",
    "aggregate_signature",
    "apply_forward_bounds",
    "assemble",
    "residual",
    "EquilibriumSolution",
    "SolverConfig",
    "SolveStatus",
    "solve_lcp",
    "solve_mixed",
    "SolveMetrics",
    "SweepMetrics",
    "Line",
    "PtdfMatrix",
    "compute_ptdf",
    "congestion_cost",
    "line_flows",
    "EquilibriumReport",
    "build_report",
    "write_reports_csv",
    "ScenarioRunner",
    "run_scenario",
    "FixedPointConfig",
    "ScenarioResult",
    "SweepPoint",
    "delta_sweep",
    "forward_baseline",
    "forward_sweep",
    "solve_ex_ante",
    "solve_ex_post",
    "solve_scenario",
]
