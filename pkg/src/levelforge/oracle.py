"""First-order oracles, linear models, and Euclidean balls."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np


class FirstOrderOracle:
    """Black-box convex objective returning the value and one subgradient.

    Parameters
    ----------
    fn : callable
        Maps a point ``x`` in R^n to ``(value, subgradient)``.
    dim : int
        Ambient dimension n.

    The only mutable state is ``call_counter``, which increments by exactly
    one per evaluation; solvers account for calls relative to run start.
    """

    def __init__(self, fn: Callable[[np.ndarray], Tuple[float, np.ndarray]], dim: int):
        if dim <= 0:
            raise ValueError("oracle dimension must be positive")
        self.fn = fn
        self.dim = int(dim)
        self.call_counter = 0

    def eval(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        self.call_counter += 1
        value, grad = self.fn(x)
        return float(value), grad

    __call__ = eval


@dataclass(frozen=True)
class HolderClass:
    """Growth class of the objective: ``f(y) - h(x, y) <= M/(1+rho) * |y-x|^(1+rho)``.

    Consumed only by bound auditors; the solvers themselves never read it.
    """

    M: float
    rho: float

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError("M must be positive")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")


@dataclass
class Ball:
    """Euclidean ball ``{x : |x - center| <= radius}``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.radius = float(self.radius)
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    def contains(self, x: np.ndarray, slack: float = 1e-12) -> bool:
        return float(np.linalg.norm(np.asarray(x, float) - self.center)) <= self.radius * (1.0 + slack)

    def project(self, x: np.ndarray) -> np.ndarray:
        d = np.asarray(x, float) - self.center
        nd = float(np.linalg.norm(d))
        if nd <= self.radius:
            return np.asarray(x, float).copy()
        return self.center + d * (self.radius / nd)


def linear_model(oracle_value: float, subgradient: np.ndarray, z: np.ndarray, x: np.ndarray) -> float:
    """Value of the supporting linearization built at ``z``, evaluated at ``x``.

    For convex objectives this never exceeds the objective value at ``x``.
    """
    z = np.asarray(z, float)
    x = np.asarray(x, float)
    g = np.asarray(subgradient, float)
    if not (z.shape == x.shape == g.shape):
        raise ValueError(f"dimension mismatch: z {z.shape}, x {x.shape}, g {g.shape}")
    return float(oracle_value) + float(g @ (x - z))


def min_linear_over_ball(
    value_at_z: float, g: np.ndarray, z: np.ndarray, ball: Ball
) -> Tuple[np.ndarray, float]:
    """Exact minimizer and minimum of the linearization over a Euclidean ball.

    The minimizer sits on the sphere opposite the slope direction; a zero
    slope makes the model constant, in which case the ball center is
    returned for determinism.
    """
    g = np.asarray(g, float)
    z = np.asarray(z, float)
    if g.shape != z.shape or g.shape != ball.center.shape:
        raise ValueError("dimension mismatch between slope, anchor, and ball")
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        return ball.center.copy(), float(value_at_z)
    minimizer = ball.center - (ball.radius / gn) * g
    return minimizer, float(value_at_z) + float(g @ (minimizer - z))
