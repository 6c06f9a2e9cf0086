"""Smoothing-based bundle-level method for structured saddle objectives.

Handles objectives ``f = f_smooth + F`` where
``F(x) = max_{y in Y} { <Ax, y> - g(y) }`` over a compact dual set. The
nonsmooth part is approximated by ``F_eta``, obtained by subtracting
``eta * V(y)`` inside the max, which is smooth with constant
``|A|^2 / (eta * sigma_v)`` and satisfies
``F_eta <= F <= F_eta + eta * max_Y V``. The phase structure mirrors the
black-box solver, with cuts taken from the smoothed objective and the
smoothing weight tied to the current gap through a running diameter estimate
``D`` that doubles whenever a phase reveals it was too small.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .fapl import (
    CutBundle,
    DEFAULT_PHASE_MAX_ITER,
    IterationLimitError,
    POLYNOMIAL,
    PhaseResult,
    StepsizeRule,
    alpha_sequence,
)
from .oracle import Ball, FirstOrderOracle, min_linear_over_ball
from .projection import project
from .trace import ConvergenceTrace, PhaseExit, PhaseRecord, SolveResult


@dataclass
class StructuredObjective:
    """Composite objective ``f_smooth(x) + max_{y in Y} {<Ax, y> - g(y)}``.

    ``dual_prox(w, eta)`` must return ``(y_star, value)`` where ``y_star``
    maximizes ``<w, y> - g(y) - eta * V(y)`` over ``Y`` and ``value`` is the
    attained maximum; ``eta = 0`` must be supported and then yields an exact
    maximizer (used for true subgradients). ``lipschitz_smooth`` and
    ``operator_norm`` feed bound audits only; the solver never reads them.
    """

    smooth_part: FirstOrderOracle
    op: Callable[[np.ndarray], np.ndarray]
    op_adjoint: Callable[[np.ndarray], np.ndarray]
    dual_prox: Callable[[np.ndarray, float], Tuple[np.ndarray, float]]
    sigma_v: float = 1.0
    lipschitz_smooth: Optional[float] = None
    operator_norm: Optional[float] = None
    exact_F: Optional[Callable[[np.ndarray], float]] = None
    dual_diameter: Optional[float] = None  # max_Y V(y) when known
    dual_prox_calls: int = field(default=0)
    exact_f_calls: int = field(default=0)

    def smoothed(self, x: np.ndarray, eta: float) -> Tuple[float, np.ndarray, np.ndarray]:
        """Value, gradient, and dual maximizer of the smoothed objective."""
        v, gs = self.smooth_part.eval(x)
        w = self.op(x)
        self.dual_prox_calls += 1
        y, fe = self.dual_prox(w, eta)
        return v + fe, gs + self.op_adjoint(y), y

    def smoothed_value(self, x: np.ndarray, eta: float) -> float:
        v, _ = self.smooth_part.eval(x)
        w = self.op(x)
        self.dual_prox_calls += 1
        _, fe = self.dual_prox(w, eta)
        return v + fe

    def true_value(self, x: np.ndarray, d_hint: Optional[float] = None) -> float:
        """Value of the unsmoothed objective.

        Uses the exact evaluator when available; otherwise falls back to the
        dual prox at a tiny smoothing weight, padded by ``eta * d_hint`` so
        the result stays an upper estimate.
        """
        v, _ = self.smooth_part.eval(x)
        if self.exact_F is not None:
            self.exact_f_calls += 1
            return v + float(self.exact_F(x))
        eta = 1e-12 * (1.0 + abs(v))
        w = self.op(x)
        self.dual_prox_calls += 1
        _, fe = self.dual_prox(w, eta)
        return v + fe + eta * (d_hint if d_hint is not None else 0.0)

    def true_eval(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        """Value and one subgradient of the unsmoothed objective."""
        v, gs = self.smooth_part.eval(x)
        w = self.op(x)
        self.dual_prox_calls += 1
        y, fe = self.dual_prox(w, 0.0)
        if self.exact_F is not None:
            self.exact_f_calls += 1
            fe = float(self.exact_F(x))
        return v + fe, gs + self.op_adjoint(y)

    def full_eval(
        self, x: np.ndarray, eta: float, d_hint: Optional[float] = None
    ) -> Tuple[float, float, np.ndarray]:
        """True value, smoothed value, and smoothed gradient in one pass,
        sharing the smooth-part evaluation."""
        v, gs = self.smooth_part.eval(x)
        w = self.op(x)
        self.dual_prox_calls += 1
        y, fe = self.dual_prox(w, eta)
        f_eta = v + fe
        grad = gs + self.op_adjoint(y)
        if self.exact_F is not None:
            self.exact_f_calls += 1
            f_true = v + float(self.exact_F(x))
        else:
            eta0 = 1e-12 * (1.0 + abs(v))
            self.dual_prox_calls += 1
            _, fe0 = self.dual_prox(w, eta0)
            f_true = v + fe0 + eta0 * (d_hint if d_hint is not None else 0.0)
        return f_true, f_eta, grad

    def total_calls(self) -> int:
        return self.smooth_part.call_counter + self.dual_prox_calls + self.exact_f_calls

    def call_counts(self) -> dict:
        return {
            "smooth": self.smooth_part.call_counter,
            "dual_prox": self.dual_prox_calls,
            "exact_f": self.exact_f_calls,
        }


@dataclass
class SmoothingState:
    """Per-phase smoothing weight and the running dual-diameter estimate."""

    eta: float
    d_estimate: float


def smoothed_eval(
    obj: StructuredObjective, eta: float, x: np.ndarray
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Smoothed value, its gradient, and the dual maximizer at ``x``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return obj.smoothed(np.asarray(x, float), float(eta))


def sandwich_check(obj: StructuredObjective, eta: float, x: np.ndarray, d_vy: float) -> bool:
    """Whether ``F_eta(x) <= F(x) <= F_eta(x) + eta * d_vy`` holds at ``x``.

    Requires the exact evaluator; the comparison allows a relative slack of
    ``1e-9 * (1 + |F(x)|)``.
    """
    if obj.exact_F is None:
        raise ValueError("sandwich_check needs an exact evaluator for the nonsmooth part")
    x = np.asarray(x, float)
    f_exact = float(obj.exact_F(x))
    w = obj.op(x)
    _, f_eta = obj.dual_prox(w, float(eta))
    tol = 1e-9 * (1.0 + abs(f_exact))
    return (f_eta <= f_exact + tol) and (f_exact <= f_eta + eta * d_vy + tol)


@dataclass
class FuslPhaseResult(PhaseResult):
    d_plus: float = 0.0


def gap_reduction_fusl(
    x_hat: np.ndarray,
    d_estimate: float,
    lb: float,
    ball: Ball,
    beta: float,
    theta: float,
    obj: StructuredObjective,
    *,
    rule: StepsizeRule = POLYNOMIAL,
    memory_depth: int = 10,
    max_iter: int = DEFAULT_PHASE_MAX_ITER,
    prox: str = "incumbent",
    seed_cuts: Optional[CutBundle] = None,
    seed_halfspace: Optional[Tuple[np.ndarray, float]] = None,
    trace: Optional[ConvergenceTrace] = None,
    phase: int = 1,
    on_iteration: Optional[Callable[[dict], None]] = None,
) -> FuslPhaseResult:
    """One gap-reduction phase with smoothed cuts.

    Three exits: the level is proven (as in the black-box phase), the true
    upper bound clears the level target, or the smoothed value clears half
    the target while the true value does not, which certifies the diameter
    estimate is too small and doubles it without touching the bounds.
    Seeded cuts stay valid even though the smoothing weight changes between
    phases: every smoothed linearization underestimates the true objective.
    ``prox`` anchors the projection as in the black-box phase.
    """
    if not (0.0 < beta < 1.0 and 0.0 < theta < 1.0):
        raise ValueError("beta and theta must lie in (0, 1)")
    if d_estimate <= 0:
        raise ValueError("the dual diameter estimate must be positive")
    if prox not in ("incumbent", "center"):
        raise ValueError(f"unknown prox anchor {prox!r}")
    x_hat = np.asarray(x_hat, dtype=float)
    xbar, radius = ball.center, ball.radius
    anchored = prox == "incumbent"
    p = x_hat if anchored else xbar

    f0 = obj.true_value(x_hat, d_hint=d_estimate)
    level = beta * lb + (1.0 - beta) * f0
    spread = f0 - level
    bundle = seed_cuts if seed_cuts is not None else CutBundle(x_hat.size, memory_depth)
    qbar = None if anchored else seed_halfspace
    if spread <= 0:
        return FuslPhaseResult(x_hat, f0, lb, PhaseExit.GAP_CLOSED, 0, bundle, qbar, d_estimate)
    eta = theta * spread / (2.0 * d_estimate)
    target = level + theta * spread
    half_target = level + 0.5 * theta * spread

    x_prev = x_hat
    xu, fu = x_hat, f0
    feta_u: Optional[float] = None  # cached smoothed value at the phase incumbent
    alphas = alpha_sequence(rule)
    m_cap = memory_depth + 2

    for k in range(1, max_iter + 1):
        a = next(alphas)
        xl = x_hat if k == 1 else (1.0 - a) * xu + a * x_prev
        v, g, _ = obj.smoothed(xl, eta)
        bundle.append(g, v - float(g @ xl))
        q_lower = bundle.materialize(level, center_halfspace=qbar)
        out = project(p, q_lower, m_max=m_cap)
        exit_level = not out.feasible
        if not exit_level:
            xk = out.x_star
            if float(np.linalg.norm(xk - xbar)) > radius * (1.0 + 1e-12):
                if not anchored:
                    exit_level = True
                else:
                    out2 = project(xbar, q_lower, m_max=m_cap)
                    exit_level = (
                        not out2.feasible
                        or float(np.linalg.norm(out2.x_star - xbar)) > radius * (1.0 + 1e-12)
                    )
                    if not exit_level:
                        xk = out2.x_star
        if exit_level:
            if trace is not None:
                trace.add_row(phase, k, lb, fu, fu)
            return FuslPhaseResult(xu, fu, level, PhaseExit.LEVEL_PROVEN, k, bundle, qbar, d_estimate)
        xt = (1.0 - a) * xu + a * xk
        if anchored:
            ft, feta_t, gt = obj.full_eval(xt, eta, d_hint=d_estimate)
            if k > 1:
                fk, feta_k, gk = obj.full_eval(xk, eta, d_hint=d_estimate)
            else:
                fk, feta_k, gk = ft, feta_t, gt  # the first blend is the projection
            bundle.append(gk, feta_k - float(gk @ xk))
            if ft < fu:
                xu, fu, feta_u = xt, ft, feta_t
            if fk < fu:
                xu, fu, feta_u = xk, fk, feta_k
        else:
            ft = obj.true_value(xt, d_hint=d_estimate)
            if ft < fu:
                xu, fu = xt, ft
                feta_u = None
        if trace is not None:
            trace.add_row(phase, k, lb, fu, fu)
        if on_iteration is not None:
            on_iteration(
                dict(phase=phase, k=k, x_level=xl, x_proj=xk, x_upper=xu,
                     level=level, eta=eta, q_lower=q_lower, f_upper=fu)
            )
        if not anchored:
            d = xbar - xk
            if float(np.linalg.norm(d)) > 0.0:
                qbar = (d, float(d @ xk))
        if fu <= target:
            return FuslPhaseResult(xu, fu, lb, PhaseExit.GAP_CLOSED, k, bundle, qbar, d_estimate)
        if feta_u is None:
            feta_u = obj.smoothed_value(xu, eta)
        if feta_u <= half_target:
            return FuslPhaseResult(xu, fu, lb, PhaseExit.D_DOUBLED, k, bundle, qbar, 2.0 * d_estimate)
        x_prev = xk

    raise IterationLimitError(
        f"phase {phase} exceeded {max_iter} iterations at gap {f0 - lb:.3e}; "
        "check the operator norm scale or the tolerance"
    )


def fusl_solve(
    ball: Ball,
    p0: np.ndarray,
    d1: float,
    eps: float,
    obj: StructuredObjective,
    *,
    beta: float = 0.5,
    theta: float = 0.5,
    rule: StepsizeRule = POLYNOMIAL,
    memory_depth: int = 10,
    lb_init: Optional[float] = None,
    prox: str = "incumbent",
    max_phase_iter: int = DEFAULT_PHASE_MAX_ITER,
    max_total_iter: Optional[int] = None,
    max_phases: int = 100_000,
    keep_incumbents: bool = True,
    on_iteration: Optional[Callable[[dict], None]] = None,
) -> SolveResult:
    """Minimize a structured objective over a ball to gap ``eps``.

    ``d1`` is the initial guess of the dual prox-diameter; underestimates are
    repaired online by doubling, so any positive value is admissible. Phases
    that double the estimate leave the bounds unchanged.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if d1 <= 0:
        raise ValueError("d1 must be positive")
    p0 = np.asarray(p0, dtype=float)
    if not ball.contains(p0):
        raise ValueError("initial point lies outside the ball")

    trace = ConvergenceTrace(counter=obj.total_calls)
    v0, g0 = obj.true_eval(p0)
    p1, h1 = min_linear_over_ball(v0, g0, p0, ball)
    lb = h1 if lb_init is None else max(float(lb_init), h1)
    v1 = obj.true_value(p1, d_hint=d1)
    if v0 <= v1:
        xhat, ub = p0.copy(), v0
    else:
        xhat, ub = p1, v1

    d_estimate = float(d1)
    status = "converged"
    s = 0
    cuts: Optional[CutBundle] = None
    halfspace: Optional[Tuple[np.ndarray, float]] = None
    while ub - lb > eps:
        s += 1
        if s > max_phases:
            status = "budget"
            break
        res = gap_reduction_fusl(
            xhat, d_estimate, lb, ball, beta, theta, obj,
            rule=rule, memory_depth=memory_depth, max_iter=max_phase_iter,
            prox=prox, seed_cuts=cuts, seed_halfspace=halfspace,
            trace=trace, phase=s, on_iteration=on_iteration,
        )
        trace.add_phase(PhaseRecord(
            phase=s, exit=res.termination, lb_in=lb, ub_in=ub,
            lb_out=res.lb_plus, ub_out=res.f_plus, iterations=res.iterations,
            radius=ball.radius, d_in=d_estimate, d_out=res.d_plus,
            incumbent_in=xhat.copy() if keep_incumbents else None,
        ))
        xhat, ub, lb, d_estimate = res.x_plus, res.f_plus, res.lb_plus, res.d_plus
        cuts = res.cuts
        # valid while the level cannot rise: gap-closing and doubling exits
        halfspace = res.halfspace if res.termination is not PhaseExit.LEVEL_PROVEN else None
        if max_total_iter is not None and trace.total_iterations >= max_total_iter and ub - lb > eps:
            status = "budget"
            break
    return SolveResult(x=xhat, lb=lb, ub=ub, trace=trace, status=status)


def fusl_phase_bound(
    delta: float,
    d_estimate: float,
    radius: float,
    lipschitz_smooth: float,
    operator_norm: float,
    sigma_v: float,
    beta: float,
    theta: float,
    c: float,
) -> float:
    """Audit cap on iterations of one smoothed phase at entering gap ``delta``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    smooth_term = radius * math.sqrt(c * lipschitz_smooth / (theta * beta * delta))
    bilinear_term = (
        math.sqrt(2.0) * radius * operator_norm / (theta * beta * delta)
    ) * math.sqrt(c * d_estimate / sigma_v)
    return smooth_term + bilinear_term + 1.0
