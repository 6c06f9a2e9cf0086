"""Accelerated projected-gradient baseline for benchmark comparisons."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .oracle import Ball, FirstOrderOracle
from .trace import ConvergenceTrace, SolveResult


@dataclass(frozen=True)
class NestConfig:
    lipschitz: float
    max_iter: int

    def __post_init__(self):
        if not self.lipschitz > 0:
            raise ValueError("lipschitz must be positive")


def nest_solve(
    oracle: FirstOrderOracle,
    ball: Ball,
    lipschitz: float,
    max_iter: int,
    p0: Optional[np.ndarray] = None,
    target: Optional[float] = None,
) -> SolveResult:
    """Two-sequence accelerated gradient descent with ball projection.

    Constant step ``1/L``; the trace records the objective at every iterate
    and the returned point is the best one seen. ``target`` allows early
    exit once the best value drops below it.
    """
    if lipschitz <= 0:
        raise ValueError("lipschitz must be positive")
    x = ball.center.copy() if p0 is None else np.asarray(p0, dtype=float).copy()
    trace = ConvergenceTrace(counter=lambda: oracle.call_counter)
    y = x.copy()
    t = 1.0
    best_x, best_f = x.copy(), math.inf
    for k in range(1, max_iter + 1):
        _, gy = oracle.eval(y)
        x_next = ball.project(y - gy / lipschitz)
        fx, _ = oracle.eval(x_next)
        if fx < best_f:
            best_x, best_f = x_next, fx
        trace.add_row(1, k, -math.inf, best_f, fx)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_next + ((t - 1.0) / t_next) * (x_next - x)
        x, t = x_next, t_next
        if target is not None and best_f <= target:
            break
    return SolveResult(x=best_x, lb=-math.inf, ub=best_f, trace=trace,
                       status="converged" if target is None or best_f <= target else "budget")
