"""Exact Euclidean projection onto a small polyhedron.

The primal problem ``min 0.5*|x - p|^2 over {x : <A_i, x> <= b_i}`` is solved
through its nonnegative-QP dual ``max_{lam >= 0} -0.5 lam' M lam + C' lam``
with ``M_ij = <A_i, A_j>`` and ``C_i = <A_i, p> - b_i``. Complementarity
(each i has lam_i = 0 or mu_i = 0) leaves at most ``2^m`` sign cases; with a
small cut budget every case is a tiny square linear solve, so the projection
is computed exactly. The dual is solvable iff the polyhedron is nonempty,
which doubles as the infeasibility test the level solvers rely on.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Optional, Tuple

import numpy as np

DEFAULT_M_MAX = 10


@dataclass
class Polyhedron:
    """Intersection of half-spaces ``<normals[i], x> <= offsets[i]``.

    ``center_cut`` marks row 0 as the supporting half-space anchored at the
    last projection point; the localizer update replaces that row instead of
    rotating it through the cut memory.
    """

    normals: np.ndarray  # (m, n)
    offsets: np.ndarray  # (m,)
    center_cut: bool = False

    def __post_init__(self):
        self.normals = np.atleast_2d(np.asarray(self.normals, dtype=float))
        self.offsets = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if self.normals.shape[0] != self.offsets.shape[0]:
            raise ValueError("normals and offsets must have equal length")

    @classmethod
    def empty(cls, dim: int) -> "Polyhedron":
        return cls(np.zeros((0, dim)), np.zeros(0))

    @property
    def count(self) -> int:
        return self.normals.shape[0]

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    def with_cut(self, normal: np.ndarray, offset: float) -> "Polyhedron":
        normal = np.asarray(normal, dtype=float)
        return Polyhedron(
            np.vstack([self.normals, normal[None, :]]),
            np.append(self.offsets, float(offset)),
            center_cut=self.center_cut,
        )

    def violations(self, x: np.ndarray) -> np.ndarray:
        """Per-cut slack ``<A_i, x> - b_i`` (positive means violated)."""
        return self.normals @ np.asarray(x, float) - self.offsets


@dataclass
class DualSystem:
    """Gram matrix and linear term of the dual nonnegative QP."""

    gram: np.ndarray    # (m, m), symmetric PSD
    linear: np.ndarray  # (m,)


@dataclass
class ProjectionOutcome:
    """Either the exact projection with its multipliers, or infeasibility."""

    feasible: bool
    x_star: Optional[np.ndarray] = None
    lam: Optional[np.ndarray] = None

    @classmethod
    def ok(cls, x_star: np.ndarray, lam: np.ndarray) -> "ProjectionOutcome":
        return cls(True, x_star, lam)

    @classmethod
    def infeasible(cls) -> "ProjectionOutcome":
        return cls(False)


def assemble_dual(poly: Polyhedron, p: np.ndarray) -> DualSystem:
    """Build the dual data ``M_ij = <A_i, A_j>``, ``C_i = <A_i, p> - b_i``."""
    p = np.asarray(p, dtype=float)
    if poly.count and poly.dim != p.size:
        raise ValueError("polyhedron and point dimensions disagree")
    gram = poly.normals @ poly.normals.T
    gram = 0.5 * (gram + gram.T)  # exact symmetry against rounding
    linear = poly.normals @ p - poly.offsets
    return DualSystem(gram=gram, linear=linear)


@lru_cache(maxsize=64)
def _mask_order(m: int) -> Tuple[int, ...]:
    # Increasing popcount, lexicographic within each popcount: deterministic
    # enumeration so reported multipliers are reproducible.
    masks = []
    for size in range(m + 1):
        for combo in combinations(range(m), size):
            masks.append(sum(1 << i for i in combo))
    return tuple(masks)


@lru_cache(maxsize=256)
def _index_sets(m: int, size: int) -> np.ndarray:
    # All active sets of one cardinality, rows in lexicographic order.
    return np.array(list(combinations(range(m), size)), dtype=np.intp)


def solve_kkt_case(sys: DualSystem, active: int) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Solve one complementarity case of the dual stationarity system.

    ``active`` is a bitmask of the multipliers allowed to be nonzero; the
    complement is pinned to zero and picks up the slack variables instead.
    Returns ``(lam, mu)`` when the reduced system is nonsingular, ``None``
    otherwise (the case is simply skipped by the enumeration).
    """
    m = sys.gram.shape[0]
    idx = [i for i in range(m) if (active >> i) & 1]
    lam = np.zeros(m)
    if idx:
        sub = sys.gram[np.ix_(idx, idx)]
        rhs = sys.linear[idx]
        try:
            sol = np.linalg.solve(sub, rhs)
            # one refinement step pushes the residual toward rounding level,
            # which the primal feasibility tolerance downstream relies on
            sol += np.linalg.solve(sub, rhs - sub @ sol)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(sol)):
            return None
        resid = sub @ sol - rhs
        scale = np.abs(rhs).max() + np.abs(sub).max() * np.abs(sol).max()
        if np.abs(resid).max() > 5e-11 * scale:
            return None  # numerically singular: some other case recovers the point
        lam[idx] = sol
    mu = sys.gram @ lam - sys.linear
    mu[idx] = 0.0
    return lam, mu


# Relative feasibility slack: must sit above the residual the refined case
# solves deliver (near rounding level, see solve_kkt_case) plus dot-product
# noise; anything looser becomes the accuracy floor of the level solvers.
_FEAS_EPS = 1e-13


def _feasible_within(poly: Polyhedron, x: np.ndarray, row_norms: np.ndarray) -> bool:
    # Purely relative per-cut test: an absolute floor would swamp problems
    # whose cut data shrinks (deep-accuracy runs), while a relative slack
    # tracks the achievable precision of evaluating each cut.
    slack = poly.violations(x)
    scale = row_norms * (1.0 + float(np.linalg.norm(x))) + np.abs(poly.offsets)
    return bool(np.all(slack <= _FEAS_EPS * scale))


def _fallback_least_squares(
    poly: Polyhedron, p: np.ndarray, sys: DualSystem, row_norms: np.ndarray
) -> Optional[ProjectionOutcome]:
    # Degenerate instances can fail every sign case by rounding; accept a
    # least-squares multiplier if it certifies optimality (feasibility plus
    # complementary slackness; stationarity holds by construction).
    lam = np.linalg.lstsq(sys.gram, sys.linear, rcond=None)[0]
    lam = np.maximum(lam, 0.0)
    x = p - lam @ poly.normals
    if not _feasible_within(poly, x, row_norms):
        return None
    slack = poly.violations(x)
    scale = row_norms * (1.0 + float(np.linalg.norm(x))) + np.abs(poly.offsets)
    if np.any(np.abs(lam * slack) > 1e-9 * scale * (1.0 + np.abs(lam).max())):
        return None
    return ProjectionOutcome.ok(x, lam)


def project(
    p: np.ndarray,
    poly: Polyhedron,
    tol: Optional[float] = None,
    m_max: Optional[int] = None,
) -> ProjectionOutcome:
    """Exact projection of ``p`` onto ``poly`` by exhaustive sign-case search.

    Cases are visited in a fixed order (popcount, then lexicographic) and the
    first one whose multipliers and slacks clear ``-tol`` wins; negative
    components are clamped to zero before recovering
    ``x* = p - sum_i lam_i A_i``. If no case passes and the least-squares
    fallback fails its optimality checks, the polyhedron is empty and
    ``Infeasible`` is returned.

    ``tol`` defaults to ``1e-10 * (1 + |p|)``. ``m_max`` caps the cut count
    (default 10); exceeding it is a hard error asking for bundle truncation.
    """
    p = np.asarray(p, dtype=float)
    m = poly.count
    cap = DEFAULT_M_MAX if m_max is None else int(m_max)
    if m > cap:
        raise ValueError(
            f"polyhedron has {m} cuts but m_max={cap}; truncate the bundle "
            "(reduce memory_depth) before projecting"
        )
    if tol is None:
        tol = 1e-10 * (1.0 + float(np.linalg.norm(p)))
    if m == 0:
        return ProjectionOutcome.ok(p.copy(), np.zeros(0))
    sys = assemble_dual(poly, p)
    row_norms = np.sqrt(np.einsum("ij,ij->i", poly.normals, poly.normals))
    c_abs_max = np.abs(sys.linear).max()
    # Sizes are processed in order; within a size all cases are solved as one
    # stacked system (speculative evaluation with ordered commit, so the
    # accepted case is still the first passing mask in the fixed order).
    for size in range(m + 1):
        if size == 0:
            lam_batch = np.zeros((1, m))
        else:
            idx = _index_sets(m, size)
            sub = sys.gram[idx[:, :, None], idx[:, None, :]]       # (N, s, s)
            rhs = sys.linear[idx]                                  # (N, s)
            try:
                sol = np.linalg.solve(sub, rhs[..., None])[..., 0]
                # one refinement step, matching solve_kkt_case
                sol += np.linalg.solve(sub, (rhs - np.einsum("nij,nj->ni", sub, sol))[..., None])[..., 0]
            except np.linalg.LinAlgError:
                sol = _solve_cases_loop(sub, rhs)
            resid = np.abs(np.einsum("nij,nj->ni", sub, sol) - rhs).max(axis=1)
            scale = np.abs(rhs).max(axis=1) + np.abs(sub).max(axis=(1, 2)) * np.abs(sol).max(axis=1)
            solvable = np.isfinite(sol).all(axis=1) & (resid <= 5e-11 * scale)
            lam_batch = np.zeros((idx.shape[0], m))
            np.put_along_axis(lam_batch, idx, np.where(solvable[:, None], sol, 0.0), axis=1)
        gl = lam_batch @ sys.gram
        mu = gl - sys.linear
        if size:
            np.put_along_axis(mu, idx, 0.0, axis=1)
            lam_min = np.minimum(sol.min(axis=1), 0.0)
            lam_abs = np.abs(sol).max(axis=1)
        else:
            solvable = np.ones(1, dtype=bool)
            lam_min = np.zeros(1)
            lam_abs = np.zeros(1)
        # Sign pre-filter (caller tolerance plus relative slack so data of
        # any magnitude is treated uniformly); candidates are then confirmed
        # primal-feasible, which is what actually certifies a case.
        lam_ok = lam_min >= -(tol + 1e-9 * (1.0 + lam_abs))
        mu_scale = 1.0 + c_abs_max + np.abs(gl).max(axis=1)
        mu_ok = mu.min(axis=1) >= -(tol + 1e-9 * mu_scale)
        for row in np.nonzero(solvable & lam_ok & mu_ok)[0]:
            lam = np.maximum(lam_batch[row], 0.0)
            x = p - lam @ poly.normals
            if _feasible_within(poly, x, row_norms):
                return ProjectionOutcome.ok(x, lam)
    out = _fallback_least_squares(poly, p, sys, row_norms)
    if out is not None:
        return out
    return ProjectionOutcome.infeasible()


def _solve_cases_loop(sub: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    # Per-case fallback when a stacked solve aborts on an exactly singular
    # member; singular cases get NaN and fail the residual guard.
    out = np.full(rhs.shape, np.nan)
    for i in range(sub.shape[0]):
        try:
            s = np.linalg.solve(sub[i], rhs[i])
            s += np.linalg.solve(sub[i], rhs[i] - sub[i] @ s)
            out[i] = s
        except np.linalg.LinAlgError:
            pass
    return out
