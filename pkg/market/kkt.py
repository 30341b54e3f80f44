"""Assembly of the market KKT system as a mixed LCP.

    0 <= z  _|_  M z + N pi + q >= 0
    N^T z + D pi = r,  pi free

D is skew-symmetric and only couples the grid operator's free variables.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, TextIO

import numpy as np
import scipy.sparse as sp

from .case import BusKind, MarketCase, Scheme
from .errors import AssemblyError
from .layout import FORWARD_BLOCK, BlockLayout, build_layout

logger = logging.getLogger(__name__)

PTDF_DROP_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class MlcpInstance:
    M: sp.csr_matrix
    N: sp.csr_matrix
    D: sp.csr_matrix
    q: np.ndarray
    r: np.ndarray
    layout: BlockLayout
    monotone: bool = True
    metadata: dict = field(default_factory=dict)

    @property
    def n_z(self) -> int:
        return self.layout.n_z

    @property
    def n_pi(self) -> int:
        return self.layout.n_pi

    def complementarity_rows(self, z: np.ndarray, pi: np.ndarray) -> np.ndarray:
        return self.M @ z + self.N @ pi + self.q

    def equality_rows(self, z: np.ndarray, pi: np.ndarray) -> np.ndarray:
        return self.N.T @ z + self.D @ pi - self.r

    @classmethod
    def from_arrays(cls, M, q, N=None, D=None, r=None, monotone: bool = True) -> "MlcpInstance":
        """Instance over a generic two-block layout ("z" and "pi")."""
        M = sp.csr_matrix(np.atleast_2d(np.asarray(M, dtype=float)))
        q = np.asarray(q, dtype=float)
        n_z = q.shape[0]
        n_pi = 0 if N is None else np.asarray(N).shape[1]
        N = sp.csr_matrix((n_z, 0)) if N is None else sp.csr_matrix(np.asarray(N, dtype=float))
        D = sp.csr_matrix((n_pi, n_pi)) if D is None else sp.csr_matrix(np.asarray(D, dtype=float))
        r = np.zeros(n_pi) if r is None else np.asarray(r, dtype=float)
        layout = BlockLayout([("z", [(i,) for i in range(n_z)])], [("pi", [(i,) for i in range(n_pi)])])
        return cls(M=M, N=N, D=D, q=q, r=r, layout=layout, monotone=monotone)


@dataclass(frozen=True)
class SchemeContext:
    scheme: Scheme = Scheme.EX_POST
    # (MDC bus, period) -> frozen emission intensity (t/MWh), ex ante only
    intensities: Optional[Mapping[tuple[int, int], float]] = None


@dataclass
class Residual:
    complementarity_gap: float
    equality_gap: float
    nonneg_violation: float

    def within(self, complementarity_tolerance: float, equality_tolerance: Optional[float] = None) -> bool:
        equality_tolerance = complementarity_tolerance if equality_tolerance is None else equality_tolerance
        return (
            self.complementarity_gap <= complementarity_tolerance
            and self.equality_gap <= equality_tolerance
            and self.nonneg_violation <= equality_tolerance
        )

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.complementarity_gap, self.equality_gap, self.nonneg_violation)

    def to_dict(self) -> dict:
        return {
            "complementarity_gap": self.complementarity_gap,
            "equality_gap": self.equality_gap,
            "nonneg_violation": self.nonneg_violation,
        }


class MlcpBuilder:
    """Collects sparse triplets for M, N and D plus the dense q and r."""

    def __init__(self, layout: BlockLayout):
        self.layout = layout
        self.q = np.zeros(layout.n_z)
        self.r = np.zeros(layout.n_pi)
        self._triplets = {"M": ([], [], []), "N": ([], [], []), "D": ([], [], [])}

    def _add(self, which: str, row: int, col: int, value: float):
        if value == 0.0:
            return
        rows, cols, vals = self._triplets[which]
        rows.append(row)
        cols.append(col)
        vals.append(value)

    def m(self, row: int, col: int, value: float):
        self._add("M", row, col, value)

    def n(self, row: int, col: int, value: float):
        self._add("N", row, col, value)

    def d(self, row: int, col: int, value: float):
        self._add("D", row, col, value)

    def _matrix(self, which: str, shape: tuple[int, int]) -> sp.csr_matrix:
        rows, cols, vals = self._triplets[which]
        matrix = sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        return matrix

    def build(self, monotone: bool = True, **metadata) -> MlcpInstance:
        n_z, n_pi = self.layout.n_z, self.layout.n_pi
        return MlcpInstance(
            M=self._matrix("M", (n_z, n_z)),
            N=self._matrix("N", (n_z, n_pi)),
            D=self._matrix("D", (n_pi, n_pi)),
            q=self.q,
            r=self.r,
            layout=self.layout,
            monotone=monotone,
            metadata=metadata,
        )


def add_network_rows(builder: MlcpBuilder, network, periods) -> None:
    """Thermal-limit rows and the grid operator's free-variable couplings.

    Expects blocks mu1/mu2 keyed (k, t), omega/y keyed (i, t) over all buses
    and gamma keyed (t,).
    """
    layout = builder.layout
    ptdf = network.ptdf
    for t in periods:
        for k, line in enumerate(network.lines):
            upper = layout.z("mu1", (k, t))
            lower = layout.z("mu2", (k, t))
            builder.q[upper] = line.limit
            builder.q[lower] = line.limit
            for bus in network.bus_ids:
                factor = ptdf.entry(k, bus)
                if abs(factor) <= PTDF_DROP_TOLERANCE:
                    continue
                builder.n(upper, layout.pi("y", (bus, t)), factor)
                builder.n(lower, layout.pi("y", (bus, t)), -factor)
        gamma = layout.pi("gamma", (t,))
        for bus in network.bus_ids:
            omega = layout.pi("omega", (bus, t))
            y = layout.pi("y", (bus, t))
            # omega row: y - injection = 0; y row: PTDF^T(mu1 - mu2) - omega - gamma = 0
            builder.d(omega, y, 1.0)
            builder.d(y, omega, -1.0)
            builder.d(y, gamma, -1.0)
            builder.d(gamma, y, 1.0)


_PRICE_BLOCK = {BusKind.LOAD: "theta_d", BusKind.MDC: "theta_x", BusKind.HYPERSCALER: "theta_k"}


def assemble(case: MarketCase, context: Optional[SchemeContext] = None) -> MlcpInstance:
    context = context or SchemeContext(case.scheme)
    scheme = Scheme(context.scheme)
    if scheme == Scheme.EX_ANTE and context.intensities is None:
        raise AssemblyError("ex ante assembly needs frozen MDC emission intensities")

    layout = build_layout(case)
    builder = MlcpBuilder(layout)
    network = case.network
    gens = case.sorted_generators
    buyers = sorted(case.buyer_buses)
    loads = sorted(case.load_buses)
    mdcs = sorted(case.mdc_buses)
    hubs = sorted(case.hyperscaler_buses)
    hs = case.hyperscaler
    weight = hs.emission_weight if hs else 0.0
    nu = hs.gpu_power_factor if hs else 1.0
    periods = range(case.periods)

    premium = {}
    for i in mdcs:
        for t in periods:
            if scheme == Scheme.EX_POST:
                premium[i, t] = 0.0
            else:
                try:
                    premium[i, t] = weight * float(context.intensities[i, t])
                except KeyError:
                    raise AssemblyError(f"missing ex ante intensity for MDC bus {i} period {t}") from None

    for t in periods:
        # consumers
        for gen in gens:
            for i in loads:
                curve = case.curve(i, t)
                if curve is None:
                    raise AssemblyError(f"no demand curve for bus {i} period {t}")
                row = layout.z("d", (*gen.key, i, t))
                builder.q[row] = -curve.b0
                for other in gens:
                    builder.m(row, layout.z("d", (*other.key, i, t)), curve.b1)
                builder.n(row, layout.pi("theta_d", (*gen.key, i, t)), 1.0)

        # producers
        for gen in gens:
            cap_row = layout.z("lambda", (*gen.key, t))
            builder.q[cap_row] = gen.capacity
            customers = [i for i in buyers if case.sells_to(gen, i)]
            for i in customers:
                row = layout.z("g", (*gen.key, i, t))
                builder.q[row] = gen.c0
                for other in customers:
                    builder.m(row, layout.z("g", (*gen.key, other, t)), gen.c1)
                builder.m(row, cap_row, 1.0)
                builder.m(cap_row, row, -1.0)
                price_block = _PRICE_BLOCK[network.kind(i)]
                builder.n(row, layout.pi(price_block, (*gen.key, i, t)), -1.0)
                builder.n(row, layout.pi("omega", (i, t)), 1.0)
                builder.n(row, layout.pi("omega", (gen.bus, t)), -1.0)

        # MDCs
        for i in mdcs:
            spec = case.mdc(i)
            eta = layout.pi("eta", (i, t))
            rho = layout.z("rho", (i, t))
            spill = layout.z("s", (i, t))
            upsilon = layout.z("upsilon", (i, t))
            endowment = spec.endowment(t)
            for gen in case.sellers(i):
                row = layout.z("p", (*gen.key, i, t))
                builder.n(row, layout.pi("theta_x", (*gen.key, i, t)), 1.0)
                builder.n(row, eta, -1.0)
            for b in (batch.id for batch in case.batches):
                if b not in spec.admissible_batches:
                    continue
                row = layout.z("kr", (b, i, t))
                builder.n(row, layout.pi("alpha", (b, i, t)), -nu)
                builder.n(row, eta, 1.0)
                builder.m(row, rho, 1.0)
                builder.m(rho, row, -1.0)
            builder.n(spill, eta, 1.0)
            builder.m(spill, upsilon, 1.0)
            builder.m(upsilon, spill, -1.0)
            builder.q[rho] = spec.capacity
            builder.q[upsilon] = endowment
            builder.r[eta] = endowment

        # hyperscaler
        for batch in case.batches:
            psi = layout.pi("psi", (batch.id, t))
            builder.r[psi] = batch.load
            for i in mdcs:
                if batch.id not in case.mdc(i).admissible_batches:
                    continue
                row = layout.z("ks", (batch.id, i, t))
                builder.n(row, layout.pi("alpha", (batch.id, i, t)), nu)
                builder.n(row, psi, 1.0)
                builder.q[row] = premium[i, t]
            for i in hubs:
                for gen in case.sellers(i):
                    row = layout.z("ell", (batch.id, *gen.key, i, t))
                    builder.n(row, layout.pi("theta_k", (*gen.key, i, t)), 1.0)
                    builder.n(row, psi, 1.0)
                    builder.q[row] = weight * gen.emission_rate

    add_network_rows(builder, network, periods)

    instance = builder.build(
        monotone=True,
        scheme=scheme.value,
        delta=hs.delta if hs else None,
        emission_weight=weight,
        intensities=dict(context.intensities) if context.intensities else {},
    )
    logger.debug("assembled %s instance: n_z=%d n_pi=%d nnz(M)=%d nnz(N)=%d",
                  scheme.value, layout.n_z, layout.n_pi, instance.M.nnz, instance.N.nnz)
    return instance


def apply_forward_bounds(
    instance: MlcpInstance, baseline: Mapping[tuple, float], fraction: float
) -> MlcpInstance:
    """Add g >= fraction * g* for every consumer contract, with multiplier block beta."""
    if not 0.0 <= fraction <= 1.0:
        raise AssemblyError(f"forward fraction must lie in [0, 1], got {fraction}")
    if fraction == 0.0:
        return instance

    layout = instance.layout
    keys = layout.z_blocks["d"].keys
    missing = [key for key in keys if key not in baseline]
    if missing:
        raise AssemblyError(f"forward baseline is missing {len(missing)} contracts, e.g. {missing[0]}")

    extended = layout.with_z_block(FORWARD_BLOCK, keys)
    n_beta = len(keys)
    coupling = sp.lil_matrix((layout.n_z, n_beta))
    for offset, key in enumerate(keys):
        coupling[layout.z("g", key), offset] = -1.0
    coupling = coupling.tocsr()

    M = sp.bmat([[instance.M, coupling], [-coupling.T, None]], format="csr")
    N = sp.vstack([instance.N, sp.csr_matrix((n_beta, layout.n_pi))], format="csr")
    q_beta = np.array([-fraction * float(baseline[key]) for key in keys])
    metadata = dict(instance.metadata, forward_fraction=fraction)
    return MlcpInstance(
        M=M, N=N, D=instance.D, q=np.concatenate([instance.q, q_beta]), r=instance.r,
        layout=extended, monotone=instance.monotone, metadata=metadata,
    )


def with_disclosed_intensities(
    instance: MlcpInstance, intensities: Mapping[tuple[int, int], float]
) -> MlcpInstance:
    """Ex ante instance with its leasing premiums rebuilt from new intensities.

    Only q changes, so M, N and D are shared with the original instance.
    """
    if instance.metadata.get("scheme") != Scheme.EX_ANTE.value:
        raise AssemblyError("disclosed intensities only apply to ex ante instances")
    weight = instance.metadata.get("emission_weight", 0.0)
    block = instance.layout.z_blocks["ks"]
    q = instance.q.copy()
    for position, (_, i, t) in zip(range(block.start, block.stop), block.keys):
        try:
            q[position] = weight * float(intensities[i, t])
        except KeyError:
            raise AssemblyError(f"missing ex ante intensity for MDC bus {i} period {t}") from None
    metadata = dict(instance.metadata, intensities=dict(intensities))
    return dataclasses.replace(instance, q=q, metadata=metadata)


def residual(instance: MlcpInstance, z, pi) -> Residual:
    z = np.asarray(z, dtype=float)
    pi = np.asarray(pi, dtype=float)
    w = instance.complementarity_rows(z, pi)
    equality = instance.equality_rows(z, pi)
    comp = float(np.max(np.abs(z * w))) if z.size else 0.0
    eq = float(np.max(np.abs(equality))) if equality.size else 0.0
    low = min(float(z.min(initial=0.0)), float(w.min(initial=0.0)))
    return Residual(complementarity_gap=comp, equality_gap=eq, nonneg_violation=max(0.0, -low))


@dataclass
class AggregateSignature:
    """Quantities that are unique across all equilibria."""

    weighted_demand: np.ndarray
    weighted_generation: np.ndarray
    demand: dict

    def max_difference(self, other: "AggregateSignature") -> float:
        diffs = [0.0]
        if self.weighted_demand.size:
            diffs.append(float(np.max(np.abs(self.weighted_demand - other.weighted_demand))))
        if self.weighted_generation.size:
            diffs.append(float(np.max(np.abs(self.weighted_generation - other.weighted_generation))))
        diffs.extend(abs(value - other.demand[key]) for key, value in self.demand.items())
        return max(diffs)


def aggregate_signature(instance: MlcpInstance, solution) -> AggregateSignature:
    layout = instance.layout
    z = np.asarray(solution.z)
    d_slice = layout.z_slice("d")
    g_slice = layout.z_slice("g")
    d = z[d_slice]
    g = z[g_slice]
    demand: dict = {}
    for key, value in zip(layout.z_blocks["d"].keys, d):
        bus_period = (key[2], key[3])
        demand[bus_period] = demand.get(bus_period, 0.0) + float(value)
    return AggregateSignature(
        weighted_demand=instance.M[d_slice, d_slice] @ d,
        weighted_generation=instance.M[g_slice, g_slice] @ g,
        demand=demand,
    )


def write_mlcp_dump(instance: MlcpInstance, stream: TextIO) -> None:
    """Sparse-triplet text dump of (M, N, D, q, r) and the block layout."""
    stream.write(f"# mlcp n_z={instance.n_z} n_pi={instance.n_pi}\n")
    for name, matrix in (("M", instance.M), ("N", instance.N), ("D", instance.D)):
        stream.write(f"[{name}]\n")
        coo = matrix.tocoo()
        for row, col, value in sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())):
            stream.write(f"{row} {col} {value!r}\n")
    for name, vector in (("q", instance.q), ("r", instance.r)):
        stream.write(f"[{name}]\n")
        for index, value in enumerate(vector.tolist()):
            if value != 0.0:
                stream.write(f"{index} {value!r}\n")
    stream.write("[layout]\n")
    for side, blocks in (("z", instance.layout.z_blocks), ("pi", instance.layout.pi_blocks)):
        for block in blocks.values():
            stream.write(f"{side} {block.name} {block.start} {block.stop}\n")
