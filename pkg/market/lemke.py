"""Lemke's complementary pivoting for mixed LCPs.

Free variables are split (pi = pi_plus - pi_minus) and the equality rows are
written as two opposite inequalities, giving the standard LCP

    w = [[M, N, -N], [-N^T, -D, D], [N^T, D, -D]] x + (q, r, -r)

whose symmetric part is that of M. The LCP is solved on a dense tableau with
an artificial variable z0 and covering vector d (Bazaraa, ch. 11).
"""

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, TextIO

import numpy as np
import scipy.linalg

from .errors import SolverError
from .kkt import MlcpInstance, Residual, residual
from .layout import BlockLayout

logger = logging.getLogger(__name__)

DEFAULT_PIVOT_TOLERANCE = 1e-9
DEFAULT_COMPLEMENTARITY_TOLERANCE = 1e-8
DEFAULT_EQUALITY_TOLERANCE = 1e-8
PIVOTS_PER_VARIABLE = 50
RATIO_TIE_TOLERANCE = 1e-11
SCALING_PASSES = 8
NOISE_FLOOR = 1e-12

COVERING_CHOICES = ("ones", "ramp")
TIE_BREAK_CHOICES = ("lexicographic", "lowest-index")


class SolveStatus(str, Enum):
    SOLVED = "Solved"
    INFEASIBLE = "Infeasible"
    RAY_TERMINATION = "RayTermination"
    ITERATION_LIMIT = "IterLimit"
    NUMERICAL_BREAKDOWN = "NumericalBreakdown"


@dataclass
class SolverConfig:
    pivot_tolerance: float = DEFAULT_PIVOT_TOLERANCE
    # absolute bounds on max|z*w| and on the equality and sign residuals
    complementarity_tolerance: float = DEFAULT_COMPLEMENTARITY_TOLERANCE
    equality_tolerance: float = DEFAULT_EQUALITY_TOLERANCE
    # scale both bounds by max(1, |q|, |r|) instead
    relative_tolerance: bool = False
    max_pivots: Optional[int] = None
    tie_break: str = "lexicographic"
    covering: str = "ones"
    scaling: bool = True
    polish: bool = True
    trace: bool = False
    trace_path: Optional[str] = None

    def __post_init__(self):
        if not self.pivot_tolerance > 0:
            raise ValueError(f"pivot_tolerance must be > 0, got {self.pivot_tolerance}")
        if not self.complementarity_tolerance > 0:
            raise ValueError(f"complementarity_tolerance must be > 0, got {self.complementarity_tolerance}")
        if not self.equality_tolerance > 0:
            raise ValueError(f"equality_tolerance must be > 0, got {self.equality_tolerance}")
        if self.max_pivots is not None and self.max_pivots <= 0:
            raise ValueError(f"max_pivots must be > 0, got {self.max_pivots}")
        if self.tie_break not in TIE_BREAK_CHOICES:
            raise ValueError(f"tie_break must be one of {TIE_BREAK_CHOICES}, got {self.tie_break!r}")
        if self.covering not in COVERING_CHOICES:
            raise ValueError(f"covering must be one of {COVERING_CHOICES}, got {self.covering!r}")

    @property
    def lexicographic(self) -> bool:
        return self.tie_break == "lexicographic"

    def tolerances(self, instance: MlcpInstance) -> tuple[float, float]:
        """(complementarity, equality) bounds a Solved result must meet on instance."""
        if not self.relative_tolerance:
            return self.complementarity_tolerance, self.equality_tolerance
        magnitude = max(1.0, float(np.abs(instance.q).max(initial=0.0)), float(np.abs(instance.r).max(initial=0.0)))
        return self.complementarity_tolerance * magnitude, self.equality_tolerance * magnitude

    def pivot_limit(self, size: int) -> int:
        return self.max_pivots or PIVOTS_PER_VARIABLE * max(size, 1)

    def with_overrides(self, **overrides) -> "SolverConfig":
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})


@dataclass
class EquilibriumSolution:
    z: np.ndarray
    pi: np.ndarray
    residual: Residual
    pivots: int
    status: SolveStatus
    message: str = ""
    offending_row: Optional[str] = None
    elapsed_ms: float = 0.0
    layout: Optional[BlockLayout] = field(default=None, repr=False)

    @property
    def solved(self) -> bool:
        return self.status == SolveStatus.SOLVED

    def z_block(self, name: str) -> np.ndarray:
        return self.z[self.layout.z_slice(name)]

    def pi_block(self, name: str) -> np.ndarray:
        return self.pi[self.layout.pi_slice(name)]

    def z_value(self, name: str, key: tuple) -> float:
        return float(self.z[self.layout.z(name, key)])

    def pi_value(self, name: str, key: tuple) -> float:
        return float(self.pi[self.layout.pi(name, key)])

    def raise_for_status(self) -> "EquilibriumSolution":
        if not self.solved:
            raise SolverError(self.status.value, self.message, self.pivots, self.offending_row)
        return self

    def to_dict(self, by_block: bool = False) -> dict:
        data = {
            "status": self.status.value,
            "message": self.message,
            "pivots": self.pivots,
            "elapsed_ms": round(self.elapsed_ms, 2),
            "residual": self.residual.to_dict(),
        }
        if by_block and self.layout is not None:
            data["z"] = {
                name: {",".join(map(str, key)): float(v) for key, v in zip(block.keys, self.z[block.slice])}
                for name, block in self.layout.z_blocks.items()
            }
            data["pi"] = {
                name: {",".join(map(str, key)): float(v) for key, v in zip(block.keys, self.pi[block.slice])}
                for name, block in self.layout.pi_blocks.items()
            }
        return data


@dataclass
class _LemkeOutcome:
    values: np.ndarray
    status: SolveStatus
    pivots: int
    message: str = ""
    offending_row: Optional[int] = None


def split_vector(instance: MlcpInstance) -> np.ndarray:
    return np.concatenate([instance.q, instance.r, -instance.r])


def split_free_variables(instance: MlcpInstance) -> tuple[np.ndarray, np.ndarray]:
    """Dense LCP matrix and vector for the split system."""
    M = instance.M.toarray()
    N = instance.N.toarray()
    D = instance.D.toarray()
    big = np.block([
        [M, N, -N],
        [-N.T, -D, D],
        [N.T, D, -D],
    ])
    return big, split_vector(instance)


def symmetric_scaling(matrix: np.ndarray, passes: int = SCALING_PASSES) -> np.ndarray:
    """Diagonal S such that S A S has rows and columns of max-norm close to one."""
    size = matrix.shape[0]
    scale = np.ones(size)
    magnitude = np.abs(matrix)
    for _ in range(passes):
        scaled = scale[:, None] * magnitude * scale[None, :]
        norms = np.maximum(scaled.max(axis=1, initial=0.0), scaled.max(axis=0, initial=0.0))
        norms[norms == 0.0] = 1.0
        scale /= np.sqrt(norms)
    return scale


def _covering_vector(size: int, choice: str) -> np.ndarray:
    if choice == "ramp":
        return 1.0 + np.arange(size) / max(size, 1)
    return np.ones(size)


def _pivot(tableau: np.ndarray, row: int, col: int):
    pivot_row = tableau[row] / tableau[row, col]
    column = tableau[:, col]
    touched = np.flatnonzero(column)
    touched = touched[touched != row]
    if touched.size:
        tableau[touched] -= np.outer(column[touched], pivot_row)
    tableau[row] = pivot_row


def _lexicographic_pick(tableau: np.ndarray, rows: np.ndarray, divisor: np.ndarray, size: int) -> int:
    """Row whose (B^-1 row / divisor) is lexicographically smallest."""
    for j in range(size):
        if rows.size == 1:
            break
        values = tableau[rows, j] / divisor
        low = values.min()
        keep = values <= low + RATIO_TIE_TOLERANCE
        rows, divisor = rows[keep], divisor[keep]
    return int(rows[0])


class _Lemke:
    def __init__(self, M: np.ndarray, q: np.ndarray, config: SolverConfig, labels: list[str], trace: Optional[TextIO]):
        self.size = len(q)
        self.M = M
        self.q = q
        self.config = config
        self.cover = _covering_vector(self.size, config.covering)
        self.labels = labels
        self.trace = trace
        self.z0 = 2 * self.size
        self.rhs = 2 * self.size + 1

    def label(self, var: int) -> str:
        n = self.size
        if var == self.z0:
            return "z0"
        if var < n:
            return f"w:{self.labels[var]}"
        return f"x:{self.labels[var - n]}"

    def complement(self, var: int) -> int:
        return var + self.size if var < self.size else var - self.size

    def _record(self, count: int, entering: int, leaving: int, value: float, basis: np.ndarray, tableau: np.ndarray):
        if not (self.config.trace or self.trace):
            return
        where = np.flatnonzero(basis == self.z0)
        z0_value = float(tableau[where[0], self.rhs]) if where.size else 0.0
        line = (f"pivot={count} enter={self.label(entering)} leave={self.label(leaving)} "
                f"value={value:.12g} z0={z0_value:.12g}")
        logger.debug(line)
        if self.trace:
            self.trace.write(line + "\n")

    def _ratio_row(self, tableau: np.ndarray, column: np.ndarray, basis: np.ndarray) -> Optional[int]:
        positive = np.flatnonzero(column > self.config.pivot_tolerance)
        if positive.size == 0:
            return None
        ratios = tableau[positive, self.rhs] / column[positive]
        best = ratios.min()
        tied = positive[ratios <= best + RATIO_TIE_TOLERANCE * max(1.0, abs(best))]
        if tied.size == 1:
            return int(tied[0])
        artificial = tied[basis[tied] == self.z0]
        if artificial.size:
            return int(artificial[0])
        if not self.config.lexicographic:
            return int(tied[np.argmin(basis[tied])])
        return _lexicographic_pick(tableau, tied, column[tied], self.size)

    def run(self) -> _LemkeOutcome:
        n = self.size
        if n == 0 or self.q.min() >= 0:
            return _LemkeOutcome(values=np.zeros(2 * n + 1), status=SolveStatus.SOLVED, pivots=0,
                                 message="trivial solution x = 0")

        tableau = np.zeros((n, 2 * n + 2))
        tableau[:, :n] = np.eye(n)
        tableau[:, n:2 * n] = -self.M
        tableau[:, self.z0] = -self.cover
        tableau[:, self.rhs] = self.q
        basis = np.arange(n)

        # z0 enters at the most negative q_i / d_i
        ratios = self.q / self.cover
        tied = np.flatnonzero(ratios <= ratios.min() + RATIO_TIE_TOLERANCE * max(1.0, abs(ratios.min())))
        row = _lexicographic_pick(tableau, tied, self.cover[tied], n) if tied.size > 1 else int(tied[0])
        _pivot(tableau, row, self.z0)
        leaving = int(basis[row])
        basis[row] = self.z0
        self._record(0, self.z0, leaving, -self.cover[row], basis, tableau)

        limit = self.config.pivot_limit(n)
        for count in range(1, limit + 1):
            entering = self.complement(leaving)
            column = tableau[:, entering]
            row = self._ratio_row(tableau, column, basis)
            if row is None:
                small = np.flatnonzero(column > NOISE_FLOOR)
                if small.size:
                    worst = int(small[np.argmax(column[small])])
                    return _LemkeOutcome(
                        values=self._values(tableau, basis), status=SolveStatus.NUMERICAL_BREAKDOWN, pivots=count,
                        message=f"largest pivot candidate {column[worst]:.3g} is below tolerance "
                                f"entering {self.label(entering)}",
                        offending_row=int(basis[worst]),
                    )
                return _LemkeOutcome(
                    values=self._values(tableau, basis), status=SolveStatus.RAY_TERMINATION, pivots=count,
                    message=f"ray termination entering {self.label(entering)}",
                    offending_row=int(entering),
                )
            value = float(tableau[row, entering])
            _pivot(tableau, row, entering)
            rhs = tableau[:, self.rhs]
            rhs[(rhs < 0) & (rhs > -self.config.pivot_tolerance)] = 0.0
            leaving = int(basis[row])
            basis[row] = entering
            self._record(count, entering, leaving, value, basis, tableau)
            if leaving == self.z0:
                values = self._values(tableau, basis)
                if self.config.polish:
                    polished = self._polish(basis)
                    if polished is not None:
                        values = polished
                return _LemkeOutcome(values=values, status=SolveStatus.SOLVED, pivots=count)

        return _LemkeOutcome(values=self._values(tableau, basis), status=SolveStatus.ITERATION_LIMIT, pivots=limit,
                             message=f"no complementary basis after {limit} pivots")

    def _values(self, tableau: np.ndarray, basis: np.ndarray) -> np.ndarray:
        values = np.zeros(2 * self.size + 2)
        values[basis] = tableau[:, self.rhs]
        return values[:2 * self.size + 1]

    def _polish(self, basis: np.ndarray) -> Optional[np.ndarray]:
        """Re-solve the final basis directly from (M, q) to drop accumulated pivoting error."""
        n = self.size
        columns = np.zeros((n, n))
        for position, var in enumerate(basis):
            if var < n:
                columns[var, position] = 1.0
            elif var < 2 * n:
                columns[:, position] = -self.M[:, var - n]
            else:
                columns[:, position] = -self.cover
        try:
            solved = scipy.linalg.solve(columns, self.q)
        except (scipy.linalg.LinAlgError, ValueError):
            logger.debug("polish skipped: final basis matrix is singular")
            return None
        if solved.min(initial=0.0) < -1e-6 * max(1.0, float(np.abs(self.q).max())):
            logger.debug("polish rejected: basic solution has negative entries")
            return None
        values = np.zeros(2 * n + 1)
        values[basis] = np.maximum(solved, 0.0)
        return values


@dataclass(frozen=True, eq=False)
class PreparedSystem:
    """Split and scaled LCP matrix of an instance.

    Valid for every instance sharing M, N, D and the layout; only q and r may differ.
    """

    matrix: np.ndarray
    scale: np.ndarray
    labels: list[str]

    @property
    def size(self) -> int:
        return len(self.scale)


def prepare_system(instance: MlcpInstance, config: Optional[SolverConfig] = None) -> PreparedSystem:
    config = config or SolverConfig()
    big, _ = split_free_variables(instance)
    scale = symmetric_scaling(big) if config.scaling else np.ones(big.shape[0])
    return PreparedSystem(
        matrix=scale[:, None] * big * scale[None, :], scale=scale, labels=_labels(instance.layout)
    )


def _labels(layout: BlockLayout) -> list[str]:
    z = [layout.z_label(i) for i in range(layout.n_z)]
    plus = [f"+{layout.pi_label(i)}" for i in range(layout.n_pi)]
    minus = [f"-{layout.pi_label(i)}" for i in range(layout.n_pi)]
    return z + plus + minus


def solve_mixed(
    instance: MlcpInstance,
    config: Optional[SolverConfig] = None,
    prepared: Optional[PreparedSystem] = None,
) -> EquilibriumSolution:
    """Solve the mixed LCP; pass prepared to reuse the split and scaled matrix across right-hand sides."""
    config = config or SolverConfig()
    started = time.perf_counter()
    n_z, n_pi = instance.n_z, instance.n_pi

    q_big = split_vector(instance)
    if prepared is None:
        prepared = prepare_system(instance, config)
    elif prepared.size != len(q_big):
        raise ValueError(f"prepared system has size {prepared.size}, instance needs {len(q_big)}")
    scale = prepared.scale
    labels = prepared.labels

    trace = open(config.trace_path, "a") if config.trace_path else None
    try:
        outcome = _Lemke(prepared.matrix, scale * q_big, config, labels, trace).run()
    finally:
        if trace:
            trace.close()

    size = len(q_big)
    x = scale * outcome.values[size:2 * size]
    z = x[:n_z]
    pi = x[n_z:n_z + n_pi] - x[n_z + n_pi:]
    diagnostics = residual(instance, z, pi)

    status = outcome.status
    message = outcome.message
    if status == SolveStatus.RAY_TERMINATION and instance.monotone:
        status = SolveStatus.INFEASIBLE
        message = f"{message}; the instance is monotone, so it has no feasible point"
    if status == SolveStatus.SOLVED:
        comp_tolerance, eq_tolerance = config.tolerances(instance)
        if not diagnostics.within(comp_tolerance, eq_tolerance):
            status = SolveStatus.NUMERICAL_BREAKDOWN
            message = (f"residual {diagnostics.as_tuple()} exceeds tolerances "
                       f"{comp_tolerance:.3g}/{eq_tolerance:.3g}")

    offending = None
    if outcome.offending_row is not None:
        offending = labels[outcome.offending_row % size] if outcome.offending_row < 2 * size else "z0"

    elapsed = (time.perf_counter() - started) * 1000
    logger.info("lemke: %s after %d pivots (n=%d, gaps %.2e/%.2e/%.2e) in %.1f ms",
                status.value, outcome.pivots, size, *diagnostics.as_tuple(), elapsed)
    return EquilibriumSolution(
        z=z, pi=pi, residual=diagnostics, pivots=outcome.pivots, status=status, message=message,
        offending_row=offending, elapsed_ms=elapsed, layout=instance.layout,
    )


def solve_lcp(M, q, config: Optional[SolverConfig] = None) -> EquilibriumSolution:
    """Plain LCP 0 <= z _|_ Mz + q >= 0."""
    return solve_mixed(MlcpInstance.from_arrays(M, q), config)
