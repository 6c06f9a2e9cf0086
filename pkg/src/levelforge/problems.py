"""Benchmark problem builders: ball-constrained least squares and
total-variation reconstruction, with exact evaluators, deterministic
generators, and file interchange helpers.

Instances use a counter-based generator (Philox) and an inverse-CDF normal
transform so the same seed reproduces the same data everywhere. Matrices and
instances serialize to the LVLF container (see ``save_lvlf``), to Matrix
Market text, and images export as ASCII PGM.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np
from scipy.io import mmread, mmwrite
from scipy.special import ndtri

from .fusl import StructuredObjective
from .oracle import FirstOrderOracle

# ---------------------------------------------------------------------------
# deterministic sampling


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator: identical streams across platforms."""
    return np.random.Generator(np.random.Philox(int(seed)))


def _uniform_open(rng: np.random.Generator, size) -> np.ndarray:
    # open-interval uniforms so the normal transform stays finite
    return rng.integers(1, 2 ** 53, size=size).astype(np.float64) / 2 ** 53


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    """N(0,1) samples via inverse CDF of counter-based uniforms."""
    return ndtri(_uniform_open(rng, size))


def sample_unit_ball(rng: np.random.Generator, n: int) -> np.ndarray:
    """A point uniformly distributed in the n-dimensional unit ball."""
    g = standard_normal(rng, n)
    g /= np.linalg.norm(g)
    return g * float(_uniform_open(rng, ())) ** (1.0 / n)


# ---------------------------------------------------------------------------
# spectral norms (audit data; the level solvers never consume these)


def spectral_norm_operator(
    matvec: Callable[[np.ndarray], np.ndarray],
    rmatvec: Callable[[np.ndarray], np.ndarray],
    dim: int,
    iters: int = 100,
    tol: float = 1e-6,
) -> float:
    """Largest singular value by power iteration on the normal operator."""
    rng = make_rng(0xA11CE)
    v = standard_normal(rng, dim)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iters):
        w = rmatvec(matvec(v))
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        sigma_new = float(np.sqrt(nw))
        if sigma > 0 and abs(sigma_new - sigma) <= tol * sigma:
            return sigma_new
        sigma = sigma_new
    return sigma


def spectral_norm(a: np.ndarray, iters: int = 100, tol: float = 1e-6) -> float:
    return spectral_norm_operator(lambda v: a @ v, lambda w: a.T @ w, a.shape[1], iters, tol)


# ---------------------------------------------------------------------------
# least squares over the unit ball


@dataclass
class LeastSquaresInstance:
    """``min |Ax - b|^2`` over the unit ball, built so the optimum is zero."""

    a: np.ndarray
    b: np.ndarray
    x_true: np.ndarray
    lipschitz: float  # 2 * sigma_max(A)^2, audit only
    seed: int
    dist: str

    @property
    def shape(self) -> Tuple[int, int]:
        return self.a.shape


def gen_least_squares(m: int, n: int, dist: str = "uniform", seed: int = 0) -> LeastSquaresInstance:
    """Random instance with ``b = A @ x_true`` and ``x_true`` in the unit ball,
    so zero is both the optimal value and a valid lower bound."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    rng = make_rng(seed)
    if dist == "uniform":
        a = rng.random((m, n))
    elif dist == "gaussian":
        a = standard_normal(rng, (m, n))
    else:
        raise ValueError(f"unknown distribution {dist!r}")
    x_true = sample_unit_ball(rng, n)
    b = a @ x_true
    lipschitz = 2.0 * spectral_norm(a, iters=200, tol=1e-10) ** 2
    return LeastSquaresInstance(a=a, b=b, x_true=x_true, lipschitz=lipschitz, seed=seed, dist=dist)


def ls_oracle(inst: LeastSquaresInstance) -> FirstOrderOracle:
    """Oracle for ``f(x) = |Ax - b|^2`` (one matrix-vector pair per call)."""
    a, b = inst.a, inst.b

    def fn(x: np.ndarray):
        r = a @ x - b
        return float(r @ r), 2.0 * (a.T @ r)

    return FirstOrderOracle(fn, a.shape[1])


# ---------------------------------------------------------------------------
# discrete total variation


def tv_diff(u: np.ndarray, dims: Tuple[int, int]) -> np.ndarray:
    """Forward-difference field of a row-major image, one (horizontal,
    vertical) pair per pixel; last row/column pairs are zeroed (Neumann)."""
    h, w = dims
    img = np.asarray(u, float).reshape(h, w)
    dx = np.zeros((h, w))
    dy = np.zeros((h, w))
    dx[:, :-1] = img[:, 1:] - img[:, :-1]
    dy[:-1, :] = img[1:, :] - img[:-1, :]
    return np.stack([dx, dy], axis=-1).ravel()


def tv_diff_adjoint(p: np.ndarray, dims: Tuple[int, int]) -> np.ndarray:
    """Adjoint of ``tv_diff`` (negative discrete divergence)."""
    h, w = dims
    field = np.asarray(p, float).reshape(h, w, 2)
    px, py = field[..., 0], field[..., 1]
    out = np.zeros((h, w))
    out[:, 1:] += px[:, :-1]
    out[:, :-1] -= px[:, :-1]
    out[1:, :] += py[:-1, :]
    out[:-1, :] -= py[:-1, :]
    return out.ravel()


def tv_norm(u: np.ndarray, dims: Tuple[int, int]) -> float:
    """Isotropic total variation: sum of per-pixel difference-pair norms."""
    h, w = dims
    if np.asarray(u).size != h * w:
        raise ValueError("image vector length does not match dims")
    d = tv_diff(u, dims).reshape(-1, 2)
    return float(np.sqrt((d * d).sum(axis=1)).sum())


def dual_prox_unit_disks(w: np.ndarray, eta: float) -> Tuple[np.ndarray, float]:
    """Maximize ``<w, y> - (eta/2) |y|^2`` over a product of unit disks.

    Per two-dimensional block the maximizer is ``w_i / max(eta, |w_i|)``;
    ``eta = 0`` returns the exact support-function maximizer.
    """
    blocks = np.asarray(w, float).reshape(-1, 2)
    norms = np.sqrt((blocks * blocks).sum(axis=1))
    denom = np.maximum(eta, norms)
    with np.errstate(invalid="ignore", divide="ignore"):
        y = np.where(denom[:, None] > 0.0, blocks / np.where(denom == 0.0, 1.0, denom)[:, None], 0.0)
    value = float((blocks * y).sum() - 0.5 * eta * (y * y).sum())
    return y.ravel(), value


def phantom_image(h: int, w: int) -> np.ndarray:
    """Deterministic piecewise-constant test image in [0, 1]."""
    yy, xx = np.meshgrid(np.linspace(0, 1, h), np.linspace(0, 1, w), indexing="ij")
    img = np.zeros((h, w))
    img[(yy > 0.12) & (yy < 0.88) & (xx > 0.12) & (xx < 0.88)] = 0.4
    img[((yy - 0.42) ** 2 + (xx - 0.38) ** 2) < 0.22 ** 2] = 1.0
    img[(yy > 0.58) & (yy < 0.82) & (xx > 0.55) & (xx < 0.8)] = 0.75
    return img


@dataclass
class TVInstance:
    """TV-regularized reconstruction data ``min 0.5|Au-b|^2 + lam * TV(u)``."""

    a: np.ndarray
    b: np.ndarray
    u_true: np.ndarray
    lambda_tv: float
    dims: Tuple[int, int]
    sigma_noise: float
    seed: int
    dist: str

    @property
    def n_pixels(self) -> int:
        return self.dims[0] * self.dims[1]


def gen_tv_instance(
    h: int,
    w: int,
    m: int,
    dist: str = "gaussian",
    lambda_tv: float = 1e-3,
    sigma: float = 1e-3,
    seed: int = 0,
) -> TVInstance:
    """Sensing matrix per ``dist``, phantom ground truth, noisy measurements."""
    rng = make_rng(seed)
    n = h * w
    if dist == "gaussian":
        a = standard_normal(rng, (m, n))
    elif dist == "uniform":
        a = rng.random((m, n))
    else:
        raise ValueError(f"unknown distribution {dist!r}")
    u_true = phantom_image(h, w).ravel()
    b = a @ u_true + sigma * standard_normal(rng, m)
    return TVInstance(a=a, b=b, u_true=u_true, lambda_tv=lambda_tv, dims=(h, w),
                      sigma_noise=sigma, seed=seed, dist=dist)


def tv_structured_objective(inst: TVInstance) -> StructuredObjective:
    """Saddle formulation of the TV problem.

    Smooth part ``0.5|Au-b|^2``; bilinear operator ``lambda_tv * D`` against
    a product of per-pixel unit disks with the quadratic prox on the dual
    side, whose prox-diameter is half the pixel count. The exact TV norm
    serves as the unsmoothed evaluator.
    """
    a, b, dims, lam = inst.a, inst.b, inst.dims, inst.lambda_tv
    n = inst.n_pixels

    def smooth_fn(u: np.ndarray):
        r = a @ u - b
        return 0.5 * float(r @ r), a.T @ r

    op = lambda u: lam * tv_diff(u, dims)
    adj = lambda p: lam * tv_diff_adjoint(p, dims)
    lipschitz = spectral_norm(a) ** 2
    opnorm = lam * spectral_norm_operator(
        lambda u: tv_diff(u, dims), lambda p: tv_diff_adjoint(p, dims), n
    )
    return StructuredObjective(
        smooth_part=FirstOrderOracle(smooth_fn, n),
        op=op,
        op_adjoint=adj,
        dual_prox=dual_prox_unit_disks,
        sigma_v=1.0,
        lipschitz_smooth=lipschitz,
        operator_norm=opnorm,
        exact_F=lambda u: lam * tv_norm(u, dims),
        dual_diameter=n / 2.0,
    )


# ---------------------------------------------------------------------------
# interchange formats

_LVLF_MAGIC = b"LVLF"
_LVLF_VERSION = 1


def save_lvlf(path, arrays: Dict[str, np.ndarray]) -> None:
    """Binary container: magic ``LVLF``, version u16, entry count u16, then
    per entry a u16 name length, ASCII name, u16 ndim, u64 dims, and the
    row-major float64 payload. All integers and floats are little-endian."""
    with open(path, "wb") as fh:
        fh.write(_LVLF_MAGIC)
        fh.write(struct.pack("<HH", _LVLF_VERSION, len(arrays)))
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
            name_b = name.encode("ascii")
            fh.write(struct.pack("<H", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<H", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes(order="C"))


def load_lvlf(path) -> Dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(4) != _LVLF_MAGIC:
            raise ValueError("not an LVLF container")
        version, count = struct.unpack("<HH", fh.read(4))
        if version != _LVLF_VERSION:
            raise ValueError(f"unsupported LVLF version {version}")
        out: Dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("ascii")
            (ndim,) = struct.unpack("<H", fh.read(2))
            shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim)) if ndim else ()
            n_items = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * n_items), dtype="<f8")
            out[name] = data.reshape(shape).astype(float)
        return out


def save_least_squares(path, inst: LeastSquaresInstance) -> None:
    save_lvlf(path, {
        "a": inst.a, "b": inst.b, "x_true": inst.x_true,
        "lipschitz": np.float64(inst.lipschitz), "seed": np.float64(inst.seed),
        "dist": np.float64(0.0 if inst.dist == "uniform" else 1.0),
    })


def load_least_squares(path) -> LeastSquaresInstance:
    d = load_lvlf(path)
    return LeastSquaresInstance(
        a=d["a"], b=d["b"], x_true=d["x_true"], lipschitz=float(d["lipschitz"]),
        seed=int(d["seed"]), dist="uniform" if float(d["dist"]) == 0.0 else "gaussian",
    )


def save_matrix_market(path, a: np.ndarray) -> None:
    mmwrite(str(path), np.asarray(a))


def load_matrix_market(path) -> np.ndarray:
    return np.asarray(mmread(str(path)), dtype=float)


def write_pgm(path, image: np.ndarray) -> None:
    """ASCII PGM (P2, maxval 255, row-major); values are clamped to [0, 1]."""
    img = np.clip(np.asarray(image, float), 0.0, 1.0)
    if img.ndim != 2:
        raise ValueError("PGM export needs a 2-d image")
    levels = np.rint(img * 255).astype(int)
    h, w = img.shape
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"P2\n{w} {h}\n255\n")
        for row in levels:
            fh.write(" ".join(str(v) for v in row) + "\n")
