"""Timing and pivot statistics for scenario runs."""

import json
import time
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional


@dataclass
class SolveMetrics:
    label: str
    start_time: float
    end_time: Optional[float] = None
    pivots: int = 0
    iterations: int = 0
    status: str = "pending"
    success: bool = False
    error: Optional[str] = None

    @property
    def duration_ms(self) -> float:
        if self.end_time:
            return (self.end_time - self.start_time) * 1000
        return 0

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "duration_ms": round(self.duration_ms, 2),
            "pivots": self.pivots,
            "iterations": self.iterations,
            "status": self.status,
            "success": self.success,
            "error": self.error,
        }


@dataclass
class SweepMetrics:
    command: str = ""
    start_time: float = field(default_factory=time.time)
    end_time: Optional[float] = None
    points: list[SolveMetrics] = field(default_factory=list)
    total_points_solved: int = 0
    aborted: bool = False
    abort_reason: Optional[str] = None

    @property
    def total_duration_ms(self) -> float:
        if self.end_time:
            return (self.end_time - self.start_time) * 1000
        return (time.time() - self.start_time) * 1000

    @property
    def total_duration_seconds(self) -> float:
        return self.total_duration_ms / 1000

    @property
    def total_pivots(self) -> int:
        return sum(point.pivots for point in self.points)

    def start_point(self, label: str) -> SolveMetrics:
        metrics = SolveMetrics(label=label, start_time=time.time())
        self.points.append(metrics)
        return metrics

    def complete_point(self, metrics: SolveMetrics, status: str, pivots: int = 0, iterations: int = 0,
                       error: str = None, duration_ms: Optional[float] = None):
        metrics.end_time = time.time()
        if duration_ms is not None:
            metrics.end_time = metrics.start_time + duration_ms / 1000
        metrics.status = status
        metrics.pivots = pivots
        metrics.iterations = iterations
        metrics.error = error
        metrics.success = error is None
        if metrics.success:
            self.total_points_solved += 1

    def finish(self, aborted: bool = False, reason: str = None):
        self.end_time = time.time()
        self.aborted = aborted
        self.abort_reason = reason

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "run_timestamp": datetime.fromtimestamp(self.start_time).isoformat(),
            "total_duration_seconds": round(self.total_duration_seconds, 2),
            "total_duration_ms": round(self.total_duration_ms, 2),
            "points_solved": self.total_points_solved,
            "points_attempted": len(self.points),
            "total_pivots": self.total_pivots,
            "aborted": self.aborted,
            "abort_reason": self.abort_reason,
            "points": [p.to_dict() for p in self.points],
        }

    def save(self, filepath: str):
        with open(filepath, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    def print_summary(self):
        print("\n" + "=" * 60)
        print(f"SOLVE SUMMARY  {self.command}")
        print("=" * 60)
        print(f"Wall time:         {self.total_duration_seconds:.2f}s")
        print(f"Points:            {self.total_points_solved}/{len(self.points)} solved")
        print(f"Pivots:            {self.total_pivots:,}")
        if self.aborted:
            print(f"Aborted:           {self.abort_reason}")

        print("\nPer-Point Breakdown:")
        for p in self.points:
            mark = "✓" if p.success else "✗"
            detail = f", {p.error}" if p.error else ""
            print(f"  {mark} {p.label}: {p.duration_ms:.0f}ms, {p.pivots} pivots, {p.iterations} iteration(s){detail}")

        if len(self.points) > 1:
            slowest = sorted(self.points, key=lambda x: x.duration_ms, reverse=True)
            print("\nSlowest Points:")
            for p in slowest[:5]:
                print(f"  {p.label}: {p.duration_ms:.0f}ms")

        print("=" * 60)
