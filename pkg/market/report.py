"""Equilibrium reports: costs, emissions, leasing prices and network metrics."""

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np
import pandas as pd

from .case import MarketCase, Scheme
from .kkt import MlcpInstance
from .lemke import EquilibriumSolution
from .network import congestion_cost

logger = logging.getLogger(__name__)

INTENSITY_EPSILON = 1e-9
KG_PER_TONNE = 1000.0

CSV_COLUMNS = (
    "case",
    "scheme",
    "delta",
    "forward_fraction",
    "status",
    "pivots",
    "iterations",
    "processing_cost_local",
    "processing_cost_mdc",
    "processing_cost_total",
    "emissions_local",
    "emissions_mdc",
    "emissions_workload_total",
    "emissions_system",
    "congestion_cost",
    "local_share",
)
MDC_COLUMNS = ("workload", "procurement", "spillover", "intensity_kg_per_mwh", "leasing_price", "avg_procurement_cost")


def _key(parts) -> str:
    return ",".join(str(part) for part in parts)


def mdc_intensities(case: MarketCase, solution: EquilibriumSolution) -> dict[tuple[int, int], float]:
    """Procurement-weighted emission intensity (t/MWh) per MDC bus and period; zero without procurement."""
    intensities = {}
    for i in sorted(case.mdc_buses):
        for t in range(case.periods):
            bought = 0.0
            emitted = 0.0
            for gen in case.sellers(i):
                p = solution.z_value("p", (*gen.key, i, t))
                bought += p
                emitted += p * gen.emission_rate
            intensities[i, t] = emitted / bought if bought > INTENSITY_EPSILON else 0.0
    return intensities


@dataclass
class MdcSummary:
    bus: int
    workload: float = 0.0
    procurement: float = 0.0
    spillover: float = 0.0
    emissions: float = 0.0
    intensity_kg_per_mwh: float = 0.0
    leasing_price: float = 0.0
    avg_procurement_cost: float = 0.0
    leasing_revenue: float = 0.0


@dataclass
class EquilibriumReport:
    case: str
    scheme: str
    delta: Optional[float]
    forward_fraction: float
    status: str
    pivots: int
    iterations: int = 1
    processing_cost_local: float = 0.0
    processing_cost_mdc: float = 0.0
    processing_cost_total: float = 0.0
    emissions_local: float = 0.0
    emissions_mdc: float = 0.0
    emissions_workload_total: float = 0.0
    emissions_system: float = 0.0
    congestion_cost: float = 0.0
    local_share: float = 0.0
    mdcs: dict[int, MdcSummary] = field(default_factory=dict)
    leasing_bids: dict[str, float] = field(default_factory=dict)
    alpha: dict[str, float] = field(default_factory=dict)
    intensities: dict[str, float] = field(default_factory=dict)
    demand: dict[str, float] = field(default_factory=dict)
    generation: dict[str, float] = field(default_factory=dict)
    theta_d: dict[str, float] = field(default_factory=dict)
    theta_x: dict[str, float] = field(default_factory=dict)
    theta_k: dict[str, float] = field(default_factory=dict)
    omega: dict[str, float] = field(default_factory=dict)
    line_flows: dict[str, float] = field(default_factory=dict)
    solution: dict = field(default_factory=dict)

    def to_row(self) -> dict:
        row = {column: getattr(self, column) for column in CSV_COLUMNS}
        for bus, summary in sorted(self.mdcs.items()):
            for column in MDC_COLUMNS:
                row[f"mdc{bus}_{column}"] = getattr(summary, column)
        return row

    def to_dict(self) -> dict:
        data = asdict(self)
        data["mdcs"] = {str(bus): asdict(summary) for bus, summary in self.mdcs.items()}
        return data

    def save(self, filepath: str):
        with open(filepath, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    def print_summary(self):
        print("\n" + "=" * 60)
        print(f"EQUILIBRIUM REPORT: {self.case} ({self.scheme}, delta={self.delta}, forward={self.forward_fraction})")
        print("=" * 60)
        print(f"Status:            {self.status} ({self.pivots} pivots, {self.iterations} iteration(s))")
        print(f"Processing cost:   local ${self.processing_cost_local:,.2f} | MDCs ${self.processing_cost_mdc:,.2f}"
              f" | total ${self.processing_cost_total:,.2f}")
        print(f"Emissions [t]:     local {self.emissions_local:.3f} | MDCs {self.emissions_mdc:.3f}"
              f" | workload {self.emissions_workload_total:.3f} | system {self.emissions_system:.3f}")
        print(f"Congestion cost:   ${self.congestion_cost:,.2f}")
        print(f"Local share:       {self.local_share:.1%}")
        if self.mdcs:
            print("\nPer-MDC:")
            for bus, mdc in sorted(self.mdcs.items()):
                print(f"  MDC {bus}: workload {mdc.workload:.2f} MWh, bought {mdc.procurement:.2f} MWh, "
                      f"{mdc.intensity_kg_per_mwh:.1f} kg/MWh, lease ${mdc.leasing_price:.4f}/GPU, "
                      f"energy ${mdc.avg_procurement_cost:.2f}/MWh")
        print("=" * 60)


def build_report(
    case: MarketCase,
    instance: MlcpInstance,
    solution: EquilibriumSolution,
    iterations: int = 1,
    include_solution: bool = False,
) -> EquilibriumReport:
    layout = instance.layout
    metadata = instance.metadata
    gens = case.sorted_generators
    periods = range(case.periods)
    hs = case.hyperscaler
    nu = hs.gpu_power_factor if hs else 1.0
    weight = metadata.get("emission_weight", 0.0)
    scheme = metadata.get("scheme", Scheme.EX_POST.value)
    frozen = metadata.get("intensities") or {}
    rate = {gen.key: gen.emission_rate for gen in gens}

    report = EquilibriumReport(
        case=case.name,
        scheme=scheme,
        delta=hs.delta if hs else None,
        forward_fraction=float(metadata.get("forward_fraction", 0.0)),
        status=solution.status.value,
        pivots=solution.pivots,
        iterations=iterations,
    )

    # local processing at the hyperscaler
    ell = layout.z_blocks["ell"]
    local_workload = 0.0
    for key, value in zip(ell.keys, solution.z[ell.slice]):
        b, j, h, i, t = key
        report.processing_cost_local += value * solution.pi_value("theta_k", (j, h, i, t))
        report.emissions_local += value * rate[j, h]
        local_workload += value

    # MDC leasing
    ks = layout.z_blocks["ks"]
    for key, value in zip(ks.keys, solution.z[ks.slice]):
        report.processing_cost_mdc += value * nu * solution.pi_value("alpha", key)

    intensities = mdc_intensities(case, solution)
    for i in sorted(case.mdc_buses):
        spec = case.mdc(i)
        summary = MdcSummary(bus=i)
        spent = 0.0
        bids = []
        for t in periods:
            summary.spillover += solution.z_value("s", (i, t))
            for gen in case.sellers(i):
                p = solution.z_value("p", (*gen.key, i, t))
                summary.procurement += p
                summary.emissions += p * gen.emission_rate
                spent += p * solution.pi_value("theta_x", (*gen.key, i, t))
            premium = weight * float(frozen.get((i, t), 0.0)) if scheme == Scheme.EX_ANTE.value else 0.0
            for batch in case.batches:
                if batch.id not in spec.admissible_batches:
                    continue
                key = (batch.id, i, t)
                summary.workload += solution.z_value("kr", key)
                alpha = solution.pi_value("alpha", key)
                bid = -(solution.pi_value("psi", (batch.id, t)) + premium) / nu
                report.alpha[_key(key)] = alpha
                report.leasing_bids[_key(key)] = bid
                summary.leasing_revenue += alpha * nu * solution.z_value("ks", key)
                bids.append(bid)
            report.intensities[_key((i, t))] = intensities[i, t]
        if summary.procurement > INTENSITY_EPSILON:
            summary.intensity_kg_per_mwh = KG_PER_TONNE * summary.emissions / summary.procurement
            summary.avg_procurement_cost = spent / summary.procurement
        summary.leasing_price = float(np.mean(bids)) if bids else 0.0
        report.emissions_mdc += summary.emissions
        report.mdcs[i] = summary

    report.processing_cost_total = report.processing_cost_local + report.processing_cost_mdc
    report.emissions_workload_total = report.emissions_local + report.emissions_mdc
    total_load = case.batch_load * case.periods
    report.local_share = local_workload / total_load if total_load > 0 else 0.0

    # energy market
    g = layout.z_blocks["g"]
    for key, value in zip(g.keys, solution.z[g.slice]):
        j, h, i, t = key
        report.emissions_system += value * rate[j, h]
        name = _key((h, t))
        report.generation[name] = report.generation.get(name, 0.0) + float(value)
    d = layout.z_blocks["d"]
    for key, value in zip(d.keys, solution.z[d.slice]):
        name = _key((key[2], key[3]))
        report.demand[name] = report.demand.get(name, 0.0) + float(value)
    for block_name, target in (("theta_d", report.theta_d), ("theta_x", report.theta_x), ("theta_k", report.theta_k)):
        block = layout.pi_blocks[block_name]
        for key, value in zip(block.keys, solution.pi[block.slice]):
            target[_key(key)] = float(value)

    network = case.network
    reference = network.reference_bus
    for t in periods:
        hub_price = solution.pi_value("omega", (reference, t))
        for i in network.bus_ids:
            report.omega[_key((i, t))] = solution.pi_value("omega", (i, t)) - hub_price
        if network.lines:
            y = np.array([solution.pi_value("y", (i, t)) for i in network.bus_ids])
            for line, flow in zip(network.lines, network.ptdf.values @ y):
                report.line_flows[_key((line.id, t))] = float(flow)

    n_lines = len(network.lines)
    mu1 = solution.z_block("mu1").reshape(n_lines, case.periods)
    mu2 = solution.z_block("mu2").reshape(n_lines, case.periods)
    report.congestion_cost = congestion_cost([line.limit for line in network.lines], mu1, mu2)

    if include_solution:
        report.solution = solution.to_dict(by_block=True)
    return report


def reports_frame(rows: Iterable[Mapping]) -> pd.DataFrame:
    """DataFrame with the fixed columns first, then per-MDC and any extra columns in first-seen order."""
    rows = list(rows)
    columns = list(CSV_COLUMNS)
    for row in rows:
        for column in row:
            if column not in columns:
                columns.append(column)
    return pd.DataFrame(rows, columns=columns)


def write_reports_csv(rows: Iterable[Mapping], path: str) -> pd.DataFrame:
    frame = reports_frame(rows)
    frame.to_csv(path, index=False)
    logger.info("wrote %d report row(s) to %s", len(frame), path)
    return frame
