"""Linearized DC network: PTDF computation, line flows and the congestion metric."""

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import BalanceError, NetworkNumericalError, TopologyError

logger = logging.getLogger(__name__)

BALANCE_TOLERANCE = 1e-6
MAX_CONDITION_NUMBER = 1e12


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: int
    to_bus: int
    reactance: float
    limit: float


@dataclass(frozen=True, eq=False)
class PtdfMatrix:
    """Flow sensitivities, one row per line and one column per bus.

    Flows are positive along the from->to orientation of each line; the
    column of ``reference_bus`` is zero.
    """

    lines: tuple[str, ...]
    buses: tuple[int, ...]
    reference_bus: int
    values: np.ndarray
    _columns: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_columns", {bus: j for j, bus in enumerate(self.buses)})

    def column(self, bus: int) -> np.ndarray:
        return self.values[:, self._columns[bus]]

    def entry(self, line_index: int, bus: int) -> float:
        return float(self.values[line_index, self._columns[bus]])

    def bus_index(self, bus: int) -> int:
        return self._columns[bus]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def incidence_matrix(lines: Sequence[Line], buses: Sequence[int]) -> np.ndarray:
    position = {bus: j for j, bus in enumerate(buses)}
    incidence = np.zeros((len(lines), len(buses)))
    for k, line in enumerate(lines):
        incidence[k, position[line.from_bus]] = 1.0
        incidence[k, position[line.to_bus]] = -1.0
    return incidence


def _check_topology(lines: Sequence[Line], buses: Sequence[int], reference_bus: int):
    known = set(buses)
    if len(known) != len(buses):
        raise TopologyError("duplicate bus ids")
    if reference_bus not in known:
        raise TopologyError(f"reference bus {reference_bus} is not a network bus")
    for line in lines:
        if line.from_bus not in known or line.to_bus not in known:
            raise TopologyError(f"line {line.id} connects unknown bus")
        if line.from_bus == line.to_bus:
            raise TopologyError(f"line {line.id} is a self-loop at bus {line.from_bus}")
        if not line.reactance > 0:
            raise TopologyError(f"line {line.id} has non-positive reactance {line.reactance}")

    if len(buses) > 1:
        position = {bus: j for j, bus in enumerate(buses)}
        rows = [position[line.from_bus] for line in lines]
        cols = [position[line.to_bus] for line in lines]
        graph = coo_matrix((np.ones(len(lines)), (rows, cols)), shape=(len(buses), len(buses)))
        count, labels = connected_components(graph, directed=False)
        if count > 1:
            ref_label = labels[position[reference_bus]]
            islanded = sorted(bus for bus, lab in zip(buses, labels) if lab != ref_label)
            raise TopologyError(f"network is disconnected; buses {islanded} are not reachable from the reference bus")


def compute_ptdf(lines: Sequence[Line], buses: Sequence[int], reference_bus: int) -> PtdfMatrix:
    """PTDF from the reduced susceptance matrix; injections are withdrawn at the reference bus."""
    buses = tuple(buses)
    lines = tuple(lines)
    _check_topology(lines, buses, reference_bus)

    incidence = incidence_matrix(lines, buses)
    susceptance = np.array([1.0 / line.reactance for line in lines])
    bbus = incidence.T @ (susceptance[:, None] * incidence)

    keep = [j for j, bus in enumerate(buses) if bus != reference_bus]
    angles = np.zeros((len(buses), len(buses)))
    if keep:
        reduced = bbus[np.ix_(keep, keep)]
        condition = np.linalg.cond(reduced)
        if not np.isfinite(condition) or condition > MAX_CONDITION_NUMBER:
            raise NetworkNumericalError(f"reduced susceptance matrix is singular (condition {condition:.3g})")
        try:
            inverse = scipy.linalg.solve(reduced, np.eye(len(keep)), assume_a="sym")
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise NetworkNumericalError(f"reduced susceptance solve failed: {exc}") from exc
        angles[np.ix_(keep, keep)] = inverse

    values = susceptance[:, None] * (incidence @ angles)
    values[np.abs(values) < 1e-14] = 0.0
    logger.debug("PTDF computed for %d lines x %d buses (reference %s)", len(lines), len(buses), reference_bus)
    return PtdfMatrix(lines=tuple(line.id for line in lines), buses=buses, reference_bus=reference_bus, values=values)


def line_flows(ptdf: PtdfMatrix, injections, tolerance: float = BALANCE_TOLERANCE) -> np.ndarray:
    """Flows for net injections shaped (buses,) or (buses, periods)."""
    y = np.asarray(injections, dtype=float)
    if y.shape[0] != len(ptdf.buses):
        raise ValueError(f"expected {len(ptdf.buses)} bus injections, got {y.shape[0]}")
    imbalance = np.abs(y.sum(axis=0))
    scale = max(1.0, float(np.abs(y).max(initial=0.0)))
    if np.any(imbalance > tolerance * scale):
        raise BalanceError(f"net injections do not sum to zero (imbalance {float(np.max(imbalance)):.3g} MW)")
    return ptdf.values @ y


def congestion_cost(limits, mu_lower, mu_upper) -> float:
    """Sum over lines and periods of F_k * (mu1 + mu2)."""
    limits = np.asarray(limits, dtype=float)
    mu = np.asarray(mu_lower, dtype=float) + np.asarray(mu_upper, dtype=float)
    if mu.size == 0:
        return 0.0
    if mu.ndim == 1:
        mu = mu[:, None]
    return float(np.sum(limits[:, None] * mu))
