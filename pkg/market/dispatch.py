"""Single-period network LPs/QPs solved through their KKT systems.

throughput_limit: largest generation deliverable to hyperscaler buses.
least_cost_dispatch: DC-OPF with fixed loads whose nodal duals calibrate demand.
"""

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .case import Generator, MarketCase, Network
from .errors import InfeasibleCaseError
from .kkt import MlcpBuilder, add_network_rows
from .layout import BlockLayout
from .lemke import SolverConfig, SolveStatus, solve_mixed

logger = logging.getLogger(__name__)

FEASIBILITY_TOLERANCE = 1e-6


def _network_blocks(network: Network) -> tuple[list, list]:
    lines = [(k, 0) for k in range(len(network.lines))]
    buses = [(i, 0) for i in sorted(network.bus_ids)]
    return (
        [("mu1", lines), ("mu2", lines)],
        [("omega", buses), ("y", buses), ("gamma", [(0,)])],
    )


def throughput_limit(case: MarketCase, t: int = 0, config: Optional[SolverConfig] = None) -> float:
    """Maximum total generation from the hubs' suppliers that can reach hyperscaler buses in period t.

    Capacities and limits do not vary over periods, so every t gives the same value.
    """
    hubs = sorted(case.hyperscaler_buses)
    contracts = [(gen, i) for i in hubs for gen in case.sellers(i)]
    gens = tuple(dict.fromkeys(gen for gen, _ in contracts))
    if not contracts:
        return 0.0

    network = case.network
    mu_blocks, free_blocks = _network_blocks(network)
    layout = BlockLayout(
        [("g", [(*gen.key, i) for gen, i in contracts]), ("lambda", [gen.key for gen in gens]), *mu_blocks],
        free_blocks,
    )
    builder = MlcpBuilder(layout)
    for gen in gens:
        builder.q[layout.z("lambda", gen.key)] = gen.capacity
    for gen, i in contracts:
        cap_row = layout.z("lambda", gen.key)
        row = layout.z("g", (*gen.key, i))
        builder.q[row] = -1.0
        builder.m(row, cap_row, 1.0)
        builder.m(cap_row, row, -1.0)
        builder.n(row, layout.pi("omega", (i, 0)), 1.0)
        builder.n(row, layout.pi("omega", (gen.bus, 0)), -1.0)
    add_network_rows(builder, network, range(1))

    solution = solve_mixed(builder.build(kind="throughput", period=t), config)
    solution.raise_for_status()
    value = float(solution.z_block("g").sum())
    logger.debug("throughput limit for period %d: %.4f MW", t, value)
    return value


@dataclass
class FeasibilityVerdict:
    period: int
    limit: float
    load: float

    @property
    def feasible(self) -> bool:
        return self.load <= self.limit + FEASIBILITY_TOLERANCE

    def to_dict(self) -> dict:
        return {"period": self.period, "limit": self.limit, "load": self.load, "feasible": self.feasible}


def check_batch_feasibility(case: MarketCase, config: Optional[SolverConfig] = None) -> list[FeasibilityVerdict]:
    load = case.batch_load
    limit = throughput_limit(case, 0, config) if load > 0 else 0.0
    return [FeasibilityVerdict(period=t, limit=limit, load=load) for t in range(case.periods)]


def ensure_feasible(case: MarketCase, config: Optional[SolverConfig] = None) -> list[FeasibilityVerdict]:
    verdicts = check_batch_feasibility(case, config)
    if not all(verdict.feasible for verdict in verdicts):
        raise InfeasibleCaseError([v.limit for v in verdicts], [v.load for v in verdicts])
    return verdicts


@dataclass
class DispatchResult:
    # generator id -> output per period (MW)
    output: dict[str, list[float]] = field(default_factory=dict)
    # bus -> nodal price per period ($/MWh)
    prices: dict[int, list[float]] = field(default_factory=dict)
    # line id -> flow per period (MW)
    flows: dict[str, list[float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"output": self.output, "prices": {str(k): v for k, v in self.prices.items()}, "flows": self.flows}


def least_cost_dispatch(
    network: Network,
    generators: Sequence[Generator],
    fixed_loads: Mapping[int, Sequence[float]],
    periods: int = 1,
    config: Optional[SolverConfig] = None,
) -> DispatchResult:
    """Minimize sum(c0 x + c1 x^2 / 2) subject to capacity, nodal balance and line limits."""
    gens = sorted(generators, key=lambda gen: gen.key)
    mu_blocks, free_blocks = _network_blocks(network)
    layout = BlockLayout(
        [("x", [gen.key for gen in gens]), ("lambda", [gen.key for gen in gens]), *mu_blocks],
        free_blocks,
    )
    result = DispatchResult(
        output={gen.id: [] for gen in gens},
        prices={bus: [] for bus in sorted(network.bus_ids)},
        flows={line.id: [] for line in network.lines},
    )
    for t in range(periods):
        builder = MlcpBuilder(layout)
        for gen in gens:
            row = layout.z("x", gen.key)
            cap_row = layout.z("lambda", gen.key)
            builder.q[row] = gen.c0
            builder.q[cap_row] = gen.capacity
            builder.m(row, row, gen.c1)
            builder.m(row, cap_row, 1.0)
            builder.m(cap_row, row, -1.0)
            builder.n(row, layout.pi("omega", (gen.bus, 0)), -1.0)
        for bus, loads in fixed_loads.items():
            builder.r[layout.pi("omega", (bus, 0))] = -float(loads[t])
        add_network_rows(builder, network, range(1))

        solution = solve_mixed(builder.build(kind="dispatch", period=t), config)
        if solution.status == SolveStatus.INFEASIBLE:
            demand = sum(float(loads[t]) for loads in fixed_loads.values())
            capacity = sum(gen.capacity for gen in gens)
            raise InfeasibleCaseError(
                [capacity], [demand],
                message=f"least-cost dispatch infeasible in period {t}: load {demand:.1f} MW cannot be served "
                        f"within capacity {capacity:.1f} MW and line limits",
            )
        solution.raise_for_status()

        for gen in gens:
            result.output[gen.id].append(solution.z_value("x", gen.key))
        for bus in result.prices:
            result.prices[bus].append(solution.pi_value("omega", (bus, 0)))
        injections = np.array([solution.pi_value("y", (bus, 0)) for bus in network.bus_ids])
        flows = network.ptdf.values @ injections
        for k, line in enumerate(network.lines):
            result.flows[line.id].append(float(flows[k]))
    return result
