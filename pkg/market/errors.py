"""Exception types raised across the market package."""

from typing import Optional, Sequence


class MarketError(Exception):
    """Base class for every error the package raises on purpose."""


class CaseValidationError(MarketError):
    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid case")


class CalibrationError(MarketError):
    def __init__(self, bus: int, reason: str):
        self.bus = bus
        super().__init__(f"cannot calibrate demand at bus {bus}: {reason}")


class TopologyError(MarketError):
    pass


class NetworkNumericalError(MarketError):
    pass


class BalanceError(MarketError):
    pass


class AssemblyError(MarketError):
    pass


class SolverError(MarketError):
    def __init__(self, status: str, message: str, pivots: int = 0, offending_row: Optional[str] = None):
        self.status = status
        self.pivots = pivots
        self.offending_row = offending_row
        detail = f" (row {offending_row})" if offending_row else ""
        super().__init__(f"{status} after {pivots} pivots: {message}{detail}")


class InfeasibleCaseError(MarketError):
    def __init__(self, limits: Sequence[float], loads: Sequence[float], message: Optional[str] = None):
        self.limits = list(limits)
        self.loads = list(loads)
        if message is None:
            parts = [
                f"t={t}: Q={q:.3f} > Lambda*={lim:.3f}"
                for t, (lim, q) in enumerate(zip(self.limits, self.loads))
                if q > lim
            ]
            message = "batch load exceeds deliverable throughput: " + ", ".join(parts)
        super().__init__(message)


class FixedPointError(MarketError):
    def __init__(self, iterations: int, trajectory: Sequence[dict]):
        self.iterations = iterations
        self.trajectory = list(trajectory)
        last = self.trajectory[-1]["change"] if self.trajectory else float("nan")
        super().__init__(f"emission intensities did not converge in {iterations} iterations (last change {last:.3g})")


class CaseFileError(MarketError):
    def __init__(self, path: str, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.path = path
        self.line = line
        self.column = column
        where = f"{path}:{line}:{column}" if line is not None else path
        super().__init__(f"{where}: {message}")
