"""Convergence bookkeeping: per-iteration rows, per-phase records, CSV export."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np


class PhaseExit(Enum):
    """How a gap-reduction phase terminated."""

    LEVEL_PROVEN = "level"  # localizer empty or projection left the ball: lb rises to the level
    GAP_CLOSED = "gap"      # best value met the level target: ub drops
    D_DOUBLED = "doubled"   # smoothing diameter estimate doubled (structured solver only)


@dataclass
class TraceRow:
    phase: int
    iteration: int
    lb: float
    ub: float
    gap: float
    fxu: float
    oracle_calls: int
    ns: int


@dataclass
class PhaseRecord:
    """Summary of one gap-reduction phase, recorded by the drivers."""

    phase: int
    exit: PhaseExit
    lb_in: float
    ub_in: float
    lb_out: float
    ub_out: float
    iterations: int
    radius: Optional[float] = None
    d_in: Optional[float] = None
    d_out: Optional[float] = None
    incumbent_in: Optional[np.ndarray] = None

    @property
    def gap_in(self) -> float:
        return self.ub_in - self.lb_in

    @property
    def gap_out(self) -> float:
        return self.ub_out - self.lb_out


CSV_HEADER = "phase,iter,lb,ub,gap,fxu,oracle_calls,ns"


class ConvergenceTrace:
    """Append-only record of a solver run.

    ``counter`` is a zero-argument callable returning the cumulative number of
    oracle calls; the trace stores call counts relative to its construction,
    so each run starts at zero regardless of oracle reuse.
    """

    def __init__(self, counter: Optional[Callable[[], int]] = None):
        self.rows: list[TraceRow] = []
        self.phases: list[PhaseRecord] = []
        self._counter = counter
        self._base = counter() if counter is not None else 0
        self._t0 = time.perf_counter_ns()

    @property
    def oracle_calls(self) -> int:
        if self._counter is None:
            return 0
        return self._counter() - self._base

    @property
    def total_iterations(self) -> int:
        return len(self.rows)

    def add_row(self, phase: int, iteration: int, lb: float, ub: float, fxu: float) -> None:
        self.rows.append(
            TraceRow(
                phase=phase,
                iteration=iteration,
                lb=float(lb),
                ub=float(ub),
                gap=float(ub) - float(lb),
                fxu=float(fxu),
                oracle_calls=self.oracle_calls,
                ns=time.perf_counter_ns() - self._t0,
            )
        )

    def add_phase(self, record: PhaseRecord) -> None:
        self.phases.append(record)

    def iterations_until(self, ub_target: float) -> Optional[int]:
        """Cumulative iteration count at which the upper bound first reached a target."""
        for i, row in enumerate(self.rows):
            if row.ub <= ub_target:
                return i + 1
        return None

    def write_csv(self, path, deterministic_ns: bool = False) -> None:
        """Write rows as CSV. ``deterministic_ns`` zeroes the wall-clock column
        so that repeated runs of a deterministic configuration produce
        byte-identical files."""
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for r in self.rows:
                ns = 0 if deterministic_ns else r.ns
                fh.write(
                    f"{r.phase},{r.iteration},{r.lb!r},{r.ub!r},{r.gap!r},"
                    f"{r.fxu!r},{r.oracle_calls},{ns}\n"
                )


@dataclass
class SolveResult:
    """Outcome of a solver run: final iterate, certified bounds, and trace."""

    x: np.ndarray
    lb: float
    ub: float
    trace: ConvergenceTrace
    status: str = "converged"  # "converged" | "budget"

    @property
    def gap(self) -> float:
        return self.ub - self.lb
