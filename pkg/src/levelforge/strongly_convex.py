"""Level methods for strongly convex objectives: recenter and shrink per phase.

Strong convexity with modulus ``mu`` traps the optimum inside
``B(x_hat, sqrt(2 * gap / mu))`` whenever ``gap`` bounds the suboptimality of
the incumbent ``x_hat``. Each phase therefore re-anchors the ball at the
incumbent with that trust radius before running the usual gap reduction,
which shrinks the working region geometrically instead of keeping one large
ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .fapl import (
    CutBundle,
    DEFAULT_PHASE_MAX_ITER,
    POLYNOMIAL,
    StepsizeRule,
    contraction_factor,
    gap_reduction_fapl,
)
from .fusl import StructuredObjective, gap_reduction_fusl
from .oracle import Ball, FirstOrderOracle
from .trace import ConvergenceTrace, PhaseExit, PhaseRecord, SolveResult


@dataclass(frozen=True)
class StrongConvexityInfo:
    """Modulus of strong convexity plus a valid initial lower bound."""

    mu: float
    lb0: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")


def trust_radius(delta: float, mu: float) -> float:
    """Radius of the ball certified to contain the optimum at gap ``delta``."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if mu <= 0:
        raise ValueError("mu must be positive")
    return math.sqrt(2.0 * delta / mu)


def sc_phase_count_bound(gap1: float, eps: float, beta: float, theta: float) -> int:
    """Audit cap on the number of phases from initial gap to accuracy eps."""
    q = contraction_factor(beta, theta)
    if gap1 <= eps:
        return 0
    return int(math.ceil(math.log(gap1 / eps) / math.log(1.0 / q)))


def fapl_sc_solve(
    p0: np.ndarray,
    lb1: float,
    mu: float,
    eps: float,
    oracle: FirstOrderOracle,
    *,
    beta: float = 0.5,
    theta: float = 0.5,
    rule: StepsizeRule = POLYNOMIAL,
    memory_depth: int = 10,
    max_phase_iter: int = DEFAULT_PHASE_MAX_ITER,
    max_phases: int = 100_000,
    keep_incumbents: bool = True,
    on_iteration: Optional[Callable[[dict], None]] = None,
) -> SolveResult:
    """Black-box level method specialized to a ``mu``-strongly convex objective.

    Requires a valid initial lower bound ``lb1``; each phase recenters the
    ball at the incumbent with the trust radius of the current gap.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if mu <= 0:
        raise ValueError("mu must be positive")
    p0 = np.asarray(p0, dtype=float)
    trace = ConvergenceTrace(counter=lambda: oracle.call_counter)
    ub, _ = oracle.eval(p0)
    lb = float(lb1)
    xhat = p0.copy()
    status = "converged"
    s = 0
    cuts: Optional[CutBundle] = None
    halfspace = None
    while ub - lb > eps:
        s += 1
        if s > max_phases:
            status = "budget"
            break
        r = trust_radius(ub - lb, mu)
        ball = Ball(xhat.copy(), r)
        res = gap_reduction_fapl(
            xhat, lb, ball, beta, theta, oracle,
            rule=rule, memory_depth=memory_depth, max_iter=max_phase_iter,
            seed_cuts=cuts, seed_halfspace=halfspace,
            trace=trace, phase=s, on_iteration=on_iteration,
        )
        trace.add_phase(PhaseRecord(
            phase=s, exit=res.termination, lb_in=lb, ub_in=ub,
            lb_out=res.lb_plus, ub_out=res.f_plus, iterations=res.iterations,
            radius=r, incumbent_in=xhat.copy() if keep_incumbents else None,
        ))
        xhat, ub, lb, cuts = res.x_plus, res.f_plus, res.lb_plus, res.cuts
        halfspace = res.halfspace if res.termination is PhaseExit.GAP_CLOSED else None
    return SolveResult(x=xhat, lb=lb, ub=ub, trace=trace, status=status)


def fusl_sc_solve(
    p0: np.ndarray,
    lb1: float,
    mu: float,
    d1: float,
    eps: float,
    obj: StructuredObjective,
    *,
    beta: float = 0.5,
    theta: float = 0.5,
    rule: StepsizeRule = POLYNOMIAL,
    memory_depth: int = 10,
    max_phase_iter: int = DEFAULT_PHASE_MAX_ITER,
    max_phases: int = 100_000,
    keep_incumbents: bool = True,
    on_iteration: Optional[Callable[[dict], None]] = None,
) -> SolveResult:
    """Structured level method for strongly convex smooth parts.

    Same recentering pattern as the black-box variant, threading the dual
    diameter estimate through the phases unchanged.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if mu <= 0:
        raise ValueError("mu must be positive")
    if d1 <= 0:
        raise ValueError("d1 must be positive")
    p0 = np.asarray(p0, dtype=float)
    trace = ConvergenceTrace(counter=obj.total_calls)
    ub = obj.true_value(p0, d_hint=d1)
    lb = float(lb1)
    xhat = p0.copy()
    d_estimate = float(d1)
    status = "converged"
    s = 0
    cuts: Optional[CutBundle] = None
    halfspace = None
    while ub - lb > eps:
        s += 1
        if s > max_phases:
            status = "budget"
            break
        r = trust_radius(ub - lb, mu)
        ball = Ball(xhat.copy(), r)
        res = gap_reduction_fusl(
            xhat, d_estimate, lb, ball, beta, theta, obj,
            rule=rule, memory_depth=memory_depth, max_iter=max_phase_iter,
            seed_cuts=cuts, seed_halfspace=halfspace,
            trace=trace, phase=s, on_iteration=on_iteration,
        )
        trace.add_phase(PhaseRecord(
            phase=s, exit=res.termination, lb_in=lb, ub_in=ub,
            lb_out=res.lb_plus, ub_out=res.f_plus, iterations=res.iterations,
            radius=r, d_in=d_estimate, d_out=res.d_plus,
            incumbent_in=xhat.copy() if keep_incumbents else None,
        ))
        xhat, ub, lb, d_estimate = res.x_plus, res.f_plus, res.lb_plus, res.d_plus
        cuts = res.cuts
        halfspace = res.halfspace if res.termination is not PhaseExit.LEVEL_PROVEN else None
    return SolveResult(x=xhat, lb=lb, ub=ub, trace=trace, status=status)
