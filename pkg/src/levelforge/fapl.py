"""Accelerated bundle-level method for ball-constrained black-box problems.

Each phase keeps a level ``l`` between the certified bounds and repeatedly
projects the ball center onto a short-memory polyhedral localizer of the
level set. An empty localizer, or a projection that leaves the ball, proves
``l`` is a valid lower bound; otherwise the accelerated upper-bound sequence
crosses the level target. Either way the gap contracts by
``q = max(beta, 1 - (1 - theta) * beta)`` per phase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Tuple

import numpy as np

from .oracle import Ball, FirstOrderOracle, HolderClass, min_linear_over_ball
from .projection import Polyhedron, project
from .trace import ConvergenceTrace, PhaseExit, PhaseRecord, SolveResult

DEFAULT_PHASE_MAX_ITER = 500_000


class IterationLimitError(RuntimeError):
    """A gap-reduction phase exceeded its iteration budget.

    Indicates the growth assumptions on the objective are violated over the
    current ball, or tolerances are set inconsistently with the data scale.
    """


@dataclass(frozen=True)
class StepsizeRule:
    """Model-point averaging schedule.

    ``polynomial`` uses ``alpha_k = 2/(k+1)``; ``recursive`` solves
    ``alpha_k^2 = (1 - alpha_k) * gamma_{k-1}`` with ``gamma_k = alpha_k^2``.
    Both certify the accumulation condition the phase bound rests on, with
    constant ``c_of_rho`` depending on the smoothness exponent.
    """

    scheme: str = "polynomial"

    def __post_init__(self):
        if self.scheme not in ("polynomial", "recursive"):
            raise ValueError(f"unknown stepsize scheme {self.scheme!r}")

    def c_of_rho(self, rho: float) -> float:
        if self.scheme == "polynomial":
            return 2.0 ** (1.0 + rho) * 3.0 ** (-(1.0 - rho) / 2.0)
        return 4.0 / 3.0 ** ((1.0 - rho) / 2.0)


POLYNOMIAL = StepsizeRule("polynomial")
RECURSIVE = StepsizeRule("recursive")


def alpha_sequence(rule: StepsizeRule) -> Iterator[float]:
    """Yields ``alpha_1, alpha_2, ...`` for the chosen rule."""
    if rule.scheme == "polynomial":
        k = 1
        while True:
            yield 2.0 / (k + 1)
            k += 1
    else:
        gamma = 1.0
        yield 1.0
        while True:
            alpha = 0.5 * (math.sqrt(gamma * gamma + 4.0 * gamma) - gamma)
            gamma = alpha * alpha
            yield alpha


def stepsize(rule: StepsizeRule, k: int) -> float:
    """``alpha_k`` for the chosen rule (``alpha_1 = 1`` in both schemes)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    it = alpha_sequence(rule)
    for _ in range(k - 1):
        next(it)
    return next(it)


def alpha_gamma_sequence(rule: StepsizeRule, kmax: int) -> Tuple[np.ndarray, np.ndarray]:
    """Arrays of ``alpha_k`` and ``gamma_k`` for ``k = 1..kmax`` (audits)."""
    alphas = np.empty(kmax)
    it = alpha_sequence(rule)
    for i in range(kmax):
        alphas[i] = next(it)
    gammas = np.empty(kmax)
    gammas[0] = 1.0
    for i in range(1, kmax):
        gammas[i] = gammas[i - 1] * (1.0 - alphas[i])
    return alphas, gammas


def contraction_factor(beta: float, theta: float) -> float:
    """Per-phase gap contraction ``q = max(beta, 1 - (1 - theta) * beta)``."""
    return max(beta, 1.0 - (1.0 - theta) * beta)


def fapl_phase_bound(
    delta: float, holder: HolderClass, radius: float, beta: float, theta: float, c: float
) -> float:
    """Audit cap on iterations of one phase at entering gap ``delta``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    rho, big_m = holder.rho, holder.M
    base = c * big_m * radius ** (1.0 + rho) / ((1.0 + rho) * theta * beta * delta)
    return base ** (2.0 / (1.0 + 3.0 * rho)) + 1.0


def fapl_phase_count_bound(
    eps: float, holder: HolderClass, radius: float, beta: float, theta: float
) -> int:
    """Audit cap on the number of phases needed for accuracy ``eps``."""
    q = contraction_factor(beta, theta)
    top = (2.0 * radius) ** (1.0 + holder.rho) * holder.M / (1.0 + holder.rho)
    return int(math.ceil(max(0.0, math.log(top / eps) / math.log(1.0 / q))))


@dataclass
class PhaseResult:
    """Output of one gap-reduction phase."""

    x_plus: np.ndarray
    f_plus: float
    lb_plus: float
    termination: PhaseExit
    iterations: int
    cuts: Optional["CutBundle"] = None  # retained linearizations, reusable by the next phase
    # supporting half-space at the last projection point; contains every later
    # level set as long as the level does not rise, so drivers may seed the
    # next phase with it after gap-closing exits
    halfspace: Optional[Tuple[np.ndarray, float]] = None


def update_localizer(
    bundle: Polyhedron,
    new_cut: Tuple[np.ndarray, float],
    x_k: np.ndarray,
    prox_center: np.ndarray,
    memory_depth: int,
) -> Polyhedron:
    """Next localizer: supporting half-space at the projection point plus the
    most recent level cuts (up to ``memory_depth``, oldest dropped first).

    The supporting half-space ``<x_k - center, x - x_k> >= 0`` is stored in
    ``<A, x> <= b`` form; it degenerates to the whole space when the
    projection landed on the center and is then skipped.
    """
    g, rhs = new_cut
    start = 1 if bundle.center_cut else 0
    level_n = np.vstack([bundle.normals[start:], np.asarray(g, float)[None, :]])
    level_b = np.append(bundle.offsets[start:], float(rhs))
    if memory_depth >= 0 and level_n.shape[0] > memory_depth:
        level_n = level_n[level_n.shape[0] - memory_depth:]
        level_b = level_b[level_b.shape[0] - memory_depth:]
    d = np.asarray(prox_center, float) - np.asarray(x_k, float)
    if float(np.linalg.norm(d)) > 0.0:
        normals = np.vstack([d[None, :], level_n])
        offsets = np.concatenate([[float(d @ x_k)], level_b])
        return Polyhedron(normals, offsets, center_cut=True)
    return Polyhedron(level_n, level_b, center_cut=False)


class CutBundle:
    """Restricted-memory store of linearization cuts in anchor form.

    A cut built at anchor ``z`` is kept as ``(g, c)`` with ``c = f(z) - g.z``
    so that for any level ``l`` the half-space ``<g, x> <= l - c`` contains
    the level set ``{f <= l}`` (the linearization underestimates f). Cuts
    therefore stay valid when the level moves between phases and only their
    offsets need re-anchoring.
    """

    def __init__(self, dim: int, depth: int):
        self.dim = dim
        self.depth = depth
        self.normals: list[np.ndarray] = []
        self.bases: list[float] = []

    def append(self, g: np.ndarray, c: float) -> None:
        self.normals.append(g)
        self.bases.append(c)
        if self.depth >= 0 and len(self.normals) > self.depth:
            del self.normals[0]
            del self.bases[0]

    def materialize(
        self,
        level: float,
        extra: Optional[Tuple[np.ndarray, float]] = None,
        center_halfspace: Optional[Tuple[np.ndarray, float]] = None,
    ) -> Polyhedron:
        """Polyhedron of the stored cuts at ``level``, optionally with one
        fresh cut and the supporting half-space at the last projection."""
        rows: list[np.ndarray] = []
        offs: list[float] = []
        if center_halfspace is not None:
            rows.append(center_halfspace[0])
            offs.append(center_halfspace[1])
        rows.extend(self.normals)
        offs.extend(level - c for c in self.bases)
        if extra is not None:
            rows.append(extra[0])
            offs.append(level - extra[1])
        if not rows:
            return Polyhedron.empty(self.dim)
        return Polyhedron(
            np.vstack(rows), np.array(offs), center_cut=center_halfspace is not None
        )


def gap_reduction_fapl(
    x_hat: np.ndarray,
    lb: float,
    ball: Ball,
    beta: float,
    theta: float,
    oracle: FirstOrderOracle,
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
) -> PhaseResult:
    """One gap-reduction phase for a black-box objective.

    Starting from incumbent ``x_hat`` with valid lower bound ``lb``, either
    proves the level ``beta*lb + (1-beta)*f(x_hat)`` is a lower bound (exit
    when the localizer cannot meet the ball) or returns a point whose value
    cleared the level target. The warm start places the first model point at
    the incumbent; ``seed_cuts`` lets the driver carry the previous phase's
    linearizations over (cut offsets re-anchor to the new level, which keeps
    them valid outer cuts of the level set).

    ``prox`` selects the projection anchor. ``"incumbent"`` (default)
    projects from ``x_hat`` and also cuts at each projection point, which
    keeps every step local and the stored slopes diverse; the level-set
    emptiness test then needs a second projection from the ball center, but
    only when an iterate leaves the ball. ``"center"`` is the fixed-anchor
    variant: it projects from the ball center, maintains the supporting
    half-space there (optionally seeded via ``seed_halfspace`` while the
    level cannot rise), and detects ball exits from a single projection.
    When the incumbent anchor makes no upper-bound progress for
    ``switch_after`` iterations (typical of phases that can only end by
    proving the level), the phase falls back to the center anchor, whose
    outward ratchet guarantees termination.
    """
    if not (0.0 < beta < 1.0 and 0.0 < theta < 1.0):
        raise ValueError("beta and theta must lie in (0, 1)")
    if prox not in ("incumbent", "center"):
        raise ValueError(f"unknown prox anchor {prox!r}")
    x_hat = np.asarray(x_hat, dtype=float)
    xbar, radius = ball.center, ball.radius
    anchored = prox == "incumbent"
    p = x_hat if anchored else xbar
    since_improve = 0

    f0, g0 = oracle.eval(x_hat)
    level = beta * lb + (1.0 - beta) * f0
    target = level + theta * (f0 - level)
    bundle = seed_cuts if seed_cuts is not None else CutBundle(x_hat.size, memory_depth)
    qbar = None if anchored else seed_halfspace
    if f0 <= target:  # degenerate phase: the incumbent already clears the target
        return PhaseResult(x_hat, f0, lb, PhaseExit.GAP_CLOSED, 0, bundle, qbar)

    x_prev = x_hat          # projection point of the previous iteration
    xu, fu = x_hat, f0      # incumbent within the phase
    alphas = alpha_sequence(rule)
    m_cap = memory_depth + 2

    for k in range(1, max_iter + 1):
        a = next(alphas)
        if k == 1:
            # alpha_1 = 1 places the model point exactly at the incumbent,
            # so the entry evaluation doubles as the first cut.
            xl, v, g = x_hat, f0, g0
        else:
            xl = (1.0 - a) * xu + a * x_prev
            v, g = oracle.eval(xl)
        bundle.append(g, v - float(g @ xl))  # cut h(xl, .) <= l reads <g, x> <= l - base
        q_lower = bundle.materialize(level, center_halfspace=qbar)
        out = project(p, q_lower, m_max=m_cap)
        exit_level = not out.feasible
        if not exit_level:
            xk = out.x_star
            if float(np.linalg.norm(xk - xbar)) > radius * (1.0 + 1e-12):
                if not anchored:
                    exit_level = True
                else:
                    # the anchored projection left the ball: decide emptiness
                    # of (localizer ∩ ball) exactly, from the center
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
            return PhaseResult(xu, fu, level, PhaseExit.LEVEL_PROVEN, k, bundle, qbar)
        xt = (1.0 - a) * xu + a * xk
        ft, gt = oracle.eval(xt)
        improved = ft < fu
        if improved:
            xu, fu = xt, ft
        if anchored and k > 1:
            # evaluate the projection point as well: an extra upper-bound
            # candidate and a cut anchored on the prox trajectory, which
            # keeps fresh slope information flowing into the localizer
            # (at k = 1 the blend equals the projection, so it is covered)
            fk, gk = oracle.eval(xk)
            if fk < fu:
                xu, fu = xk, fk
                improved = True
            bundle.append(gk, fk - float(gk @ xk))
        elif anchored:
            bundle.append(gt, ft - float(gt @ xt))
        if trace is not None:
            trace.add_row(phase, k, lb, fu, fu)
        if on_iteration is not None:
            on_iteration(
                dict(phase=phase, k=k, x_level=xl, x_proj=xk, x_upper=xu,
                     level=level, q_lower=q_lower, f_upper=fu)
            )
        if not anchored:
            d = xbar - xk
            if float(np.linalg.norm(d)) > 0.0:
                qbar = (d, float(d @ xk))
        if fu <= target:
            return PhaseResult(xu, fu, lb, PhaseExit.GAP_CLOSED, k, bundle, qbar)
        if anchored:
            since_improve = 0 if improved else since_improve + 1
            if since_improve >= switch_after:
                anchored = False
                p = xbar
        x_prev = xk

    raise IterationLimitError(
        f"phase {phase} exceeded {max_iter} iterations at gap {f0 - lb:.3e}; "
        "check the growth assumptions or the tolerance scale"
    )


def fapl_solve(
    ball: Ball,
    p0: np.ndarray,
    eps: float,
    oracle: FirstOrderOracle,
    *,
    beta: float = 0.5,
    theta: float = 0.5,
    rule: StepsizeRule = POLYNOMIAL,
    memory_depth: int = 10,
    lb_init: Optional[float] = None,
    prox: str = "incumbent",
    max_phase_iter: int = DEFAULT_PHASE_MAX_ITER,
    max_total_iter: Optional[int] = None,
    keep_incumbents: bool = True,
    on_iteration: Optional[Callable[[dict], None]] = None,
) -> SolveResult:
    """Minimize a black-box convex objective over a Euclidean ball to gap ``eps``.

    Initial bounds come from one exact linear-model minimization over the
    ball; an externally known lower bound can be supplied through
    ``lb_init`` and is merged with the model bound. Phases run until
    ``ub - lb <= eps`` (or ``max_total_iter``, reported as status
    ``"budget"``). Retained cuts are threaded from phase to phase with their
    offsets re-anchored to each new level; see ``gap_reduction_fapl`` for
    the ``prox`` anchor modes.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    p0 = np.asarray(p0, dtype=float)
    if not ball.contains(p0):
        raise ValueError("initial point lies outside the ball")

    trace = ConvergenceTrace(counter=lambda: oracle.call_counter)
    v0, g0 = oracle.eval(p0)
    p1, h1 = min_linear_over_ball(v0, g0, p0, ball)
    lb = h1 if lb_init is None else max(float(lb_init), h1)
    v1, _ = oracle.eval(p1)
    if v0 <= v1:
        xhat, ub = p0.copy(), v0
    else:
        xhat, ub = p1, v1

    status = "converged"
    s = 0
    cuts: Optional[CutBundle] = None
    halfspace: Optional[Tuple[np.ndarray, float]] = None
    while ub - lb > eps:
        s += 1
        res = gap_reduction_fapl(
            xhat, lb, ball, beta, theta, oracle,
            rule=rule, memory_depth=memory_depth, max_iter=max_phase_iter,
            prox=prox, seed_cuts=cuts, seed_halfspace=halfspace,
            trace=trace, phase=s, on_iteration=on_iteration,
        )
        trace.add_phase(PhaseRecord(
            phase=s, exit=res.termination, lb_in=lb, ub_in=ub,
            lb_out=res.lb_plus, ub_out=res.f_plus, iterations=res.iterations,
            radius=ball.radius,
            incumbent_in=xhat.copy() if keep_incumbents else None,
        ))
        xhat, ub, lb, cuts = res.x_plus, res.f_plus, res.lb_plus, res.cuts
        # the supporting half-space stays valid only while the level cannot
        # rise; a level-proven exit raises it, so the seed is dropped there
        halfspace = res.halfspace if res.termination is PhaseExit.GAP_CLOSED else None
        if max_total_iter is not None and trace.total_iterations >= max_total_iter and ub - lb > eps:
            status = "budget"
            break
    return SolveResult(x=xhat, lb=lb, ub=ub, trace=trace, status=status)
