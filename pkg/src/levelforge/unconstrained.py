"""Radius-expansion wrapper: unconstrained minimization through ball solves.

A ball-constrained solver is called on ``B(center, r)`` and ``B(center, 2r)``
at target gap ``delta``. If the two returned values differ by more than
``delta`` the optimum must lie outside the smaller ball, so the radius
doubles; otherwise the larger-ball point is committed, the committed value
is within ``(3 + 2 D/r) * delta`` of the unconstrained optimum for
``D = |center - x*|``, and ``delta`` halves. The radius stays below twice the
distance to the optimum throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fapl import POLYNOMIAL, StepsizeRule, fapl_solve
from .oracle import Ball, FirstOrderOracle, min_linear_over_ball
from .trace import SolveResult

# A ball solver maps (center, radius, accuracy) to a SolveResult whose x is
# an accuracy-optimal point of the ball-constrained problem.
BallSolver = Callable[[np.ndarray, float, float], SolveResult]


@dataclass
class RoundRecord:
    radius: float
    delta: float
    f_small: float
    f_large: float
    expanded: bool
    inner_iterations: int


@dataclass
class UnconstrainedResult:
    x: np.ndarray
    f: float
    rounds: list[RoundRecord] = field(default_factory=list)
    status: str = "converged"

    @property
    def expansion_count(self) -> int:
        return sum(1 for r in self.rounds if r.expanded)

    @property
    def commits(self) -> list[RoundRecord]:
        return [r for r in self.rounds if not r.expanded]


def initial_gap(oracle: FirstOrderOracle, x_bar: np.ndarray, r0: float) -> float:
    """Starting target gap: objective value minus the linear-model minimum
    over the initial ball (equals ``r0`` times the subgradient norm)."""
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    x_bar = np.asarray(x_bar, dtype=float)
    v, g = oracle.eval(x_bar)
    _, h_min = min_linear_over_ball(v, g, x_bar, Ball(x_bar, r0))
    return v - h_min


def solve_unconstrained(
    solver: BallSolver,
    oracle: FirstOrderOracle,
    x_bar: np.ndarray,
    r0: float,
    eps_stop: float,
    *,
    max_rounds: int = 10_000,
    known_fstar: Optional[float] = None,
    fstar_tol: Optional[float] = None,
) -> UnconstrainedResult:
    """Drive a ball solver to an unconstrained epsilon-solution.

    Stops once the target gap satisfies ``delta <= eps_stop / 8`` (a
    conservative proxy for the committed-value error once the radius has
    grown past half the distance to the optimum), or earlier when a known
    optimal value is approached within ``fstar_tol``. The committed iterate
    is kept monotone: a new commit only replaces the incumbent when it
    improves the value, which preserves the per-commit error bound.
    """
    if eps_stop <= 0:
        raise ValueError("eps_stop must be positive")
    x_bar = np.asarray(x_bar, dtype=float)
    delta = initial_gap(oracle, x_bar, r0)
    f_center, _ = oracle.eval(x_bar)
    best_x, best_f = x_bar.copy(), f_center
    result = UnconstrainedResult(x=best_x, f=best_f)
    if delta == 0.0:
        return result  # zero subgradient: the center is already optimal

    r = float(r0)
    for _ in range(max_rounds):
        small = solver(x_bar, r, delta)
        f_small, _ = oracle.eval(small.x)
        large = solver(x_bar, 2.0 * r, delta)
        f_large, _ = oracle.eval(large.x)
        inner = small.trace.total_iterations + large.trace.total_iterations
        expanded = f_small - f_large > delta
        result.rounds.append(RoundRecord(r, delta, f_small, f_large, expanded, inner))
        if expanded:
            r *= 2.0
            continue
        if f_large < best_f:
            best_x, best_f = large.x, f_large
        delta *= 0.5
        result.x, result.f = best_x, best_f
        if known_fstar is not None and fstar_tol is not None and best_f - known_fstar <= fstar_tol:
            return result
        if delta <= eps_stop / 8.0:
            return result
    result.status = "budget"
    result.x, result.f = best_x, best_f
    return result


def make_fapl_ball_solver(
    oracle: FirstOrderOracle,
    *,
    beta: float = 0.5,
    theta: float = 0.5,
    rule: StepsizeRule = POLYNOMIAL,
    memory_depth: int = 10,
    lb_init: Optional[float] = None,
) -> BallSolver:
    """Wrap the black-box level solver as a BallSolver starting at the center."""

    def solve(center: np.ndarray, radius: float, eps: float) -> SolveResult:
        return fapl_solve(
            Ball(np.asarray(center, float), radius), center, eps, oracle,
            beta=beta, theta=theta, rule=rule, memory_depth=memory_depth,
            lb_init=lb_init, keep_incumbents=False,
        )

    return solve
