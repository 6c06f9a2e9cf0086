"""Benchmark harness: build instances, run solvers, audit invariants.

Subcommands
-----------
``solve``  builds one instance, runs one solver, and writes ``trace.csv``
           (header ``phase,iter,lb,ub,gap,fxu,oracle_calls,ns``),
           ``summary.json``, and for image problems a PGM reconstruction.
           Exit codes: 0 target accuracy reached, 2 budget exhausted,
           1 configuration error.
``audit``  runs the built-in invariant suite and exits 0 when it passes.
``sweep``  grids over (beta, theta) for one problem, optionally in parallel.

The environment variable ``LEVELFORGE_SEED`` overrides the configured seed.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import nest_solve
from .fapl import POLYNOMIAL, RECURSIVE, contraction_factor, fapl_solve
from .fusl import fusl_solve, sandwich_check
from .oracle import Ball, FirstOrderOracle
from .problems import (
    gen_least_squares,
    gen_tv_instance,
    ls_oracle,
    make_rng,
    standard_normal,
    tv_diff,
    tv_diff_adjoint,
    tv_structured_objective,
    write_pgm,
)
from .projection import Polyhedron, project
from .strongly_convex import fapl_sc_solve, trust_radius
from .trace import ConvergenceTrace, SolveResult
from .unconstrained import make_fapl_ball_solver, solve_unconstrained

SOLVERS = ("fapl", "fusl", "fapl-sc", "fusl-sc", "unconstrained-fapl", "nest")
PROBLEMS = ("ls", "tv")


@dataclass
class RunConfig:
    problem: str = "ls"
    dist: str = "uniform"
    m: int = 200
    n: int = 100
    seed: int = 0
    lambda_tv: float = 1e-3
    sigma: float = 1e-3
    solver: str = "fapl"
    beta: float = 0.5
    theta: float = 0.5
    memory_depth: int = 10
    eps: float = 1e-6
    lb_mode: str = "zero"  # "zero" | "minus-infinity" | numeric string
    d1: Optional[float] = None
    mu: Optional[float] = None
    r0: Optional[float] = None
    max_iter: Optional[int] = None
    rule: str = "polynomial"
    out_dir: Optional[str] = None
    deterministic_trace: bool = False

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r} (choose from {PROBLEMS})")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver {self.solver!r} (choose from {SOLVERS})")
        if not (0.0 < self.beta < 1.0 and 0.0 < self.theta < 1.0):
            raise ValueError("beta and theta must lie in (0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.lb_mode not in ("zero", "minus-infinity"):
            try:
                float(self.lb_mode)
            except ValueError:
                raise ValueError("lb must be 'zero', 'minus-infinity', or a number") from None

    @property
    def lb_init(self) -> Optional[float]:
        if self.lb_mode == "zero":
            return 0.0
        if self.lb_mode == "minus-infinity":
            return None  # keep only the model-derived bound
        return float(self.lb_mode)

    @property
    def stepsize_rule(self):
        return POLYNOMIAL if self.rule == "polynomial" else RECURSIVE


def _effective_seed(seed: int) -> int:
    env = os.environ.get("LEVELFORGE_SEED")
    return int(env) if env else seed


def run_benchmark(config: RunConfig) -> int:
    """Execute one configuration; returns the process exit code."""
    try:
        config.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    seed = _effective_seed(config.seed)
    out_dir = Path(config.out_dir) if config.out_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    try:
        result, extras = _dispatch(config, seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    wall = time.perf_counter() - t0

    summary = {
        "problem": config.problem,
        "solver": config.solver,
        "seed": seed,
        "beta": config.beta,
        "theta": config.theta,
        "eps": config.eps,
        "lb": config.lb_mode,
        "iterations": result.trace.total_iterations,
        "phases": len(result.trace.phases),
        "oracle_calls": result.trace.oracle_calls,
        "wall_time_s": wall,
        "final_lb": result.lb,
        "final_ub": result.ub,
        "final_gap": result.gap,
        "status": result.status,
    }
    summary.update(extras)

    if out_dir is not None:
        result.trace.write_csv(out_dir / "trace.csv", deterministic_ns=config.deterministic_trace)
        with open(out_dir / "summary.json", "w", encoding="ascii") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if config.problem == "tv":
            h, w = extras["dims"]
            write_pgm(out_dir / "reconstruction.pgm", result.x.reshape(h, w))
    else:
        json.dump(summary, sys.stdout, indent=2, sort_keys=True)
        print()

    return 0 if result.status == "converged" else 2


def _dispatch(config: RunConfig, seed: int):
    if config.problem == "ls":
        inst = gen_least_squares(config.m, config.n, config.dist, seed)
        oracle = ls_oracle(inst)
        radius = config.r0 if config.r0 else 1.0
        ball = Ball(np.zeros(config.n), radius)
        p0 = np.zeros(config.n)
        extras = {"lipschitz": inst.lipschitz}
        if config.solver == "fapl":
            res = fapl_solve(ball, p0, config.eps, oracle, beta=config.beta, theta=config.theta,
                             rule=config.stepsize_rule, memory_depth=config.memory_depth,
                             lb_init=config.lb_init, max_total_iter=config.max_iter)
        elif config.solver == "nest":
            res = nest_solve(oracle, ball, inst.lipschitz, config.max_iter or 10_000,
                             p0=p0, target=config.eps)
        elif config.solver == "fapl-sc":
            if config.mu is None:
                raise ValueError("fapl-sc requires --mu")
            lb = config.lb_init if config.lb_init is not None else 0.0
            res = fapl_sc_solve(p0, lb, config.mu, config.eps, oracle, beta=config.beta,
                                theta=config.theta, rule=config.stepsize_rule,
                                memory_depth=config.memory_depth)
        elif config.solver == "unconstrained-fapl":
            solver = make_fapl_ball_solver(oracle, beta=config.beta, theta=config.theta,
                                           rule=config.stepsize_rule,
                                           memory_depth=config.memory_depth,
                                           lb_init=config.lb_init)
            ures = solve_unconstrained(solver, oracle, p0, config.r0 or 1.0, config.eps)
            shell = ConvergenceTrace(counter=lambda: oracle.call_counter)
            res = SolveResult(x=ures.x, lb=-math.inf, ub=ures.f, trace=shell,
                              status=ures.status)
            extras["expansions"] = ures.expansion_count
            extras["rounds"] = len(ures.rounds)
        else:
            raise ValueError(f"solver {config.solver!r} does not apply to problem 'ls'")
        extras["final_acc"] = float(np.sum((inst.a @ res.x - inst.b) ** 2))
        return res, extras

    # TV reconstruction
    h = w = config.n
    m = config.m if config.m else (h * w) // 2
    inst = gen_tv_instance(h, w, m, config.dist,
                           lambda_tv=config.lambda_tv, sigma=config.sigma, seed=seed)
    obj = tv_structured_objective(inst)
    n_pix = inst.n_pixels
    radius = config.r0 if config.r0 else 2.0 * float(np.linalg.norm(inst.u_true)) + 1.0
    ball = Ball(np.zeros(n_pix), radius)
    p0 = np.zeros(n_pix)
    d1 = config.d1 if config.d1 else n_pix / 2.0
    extras = {"dims": [h, w], "lambda_tv": inst.lambda_tv, "d1": d1}
    if config.solver == "fusl":
        res = fusl_solve(ball, p0, d1, config.eps, obj, beta=config.beta, theta=config.theta,
                         rule=config.stepsize_rule, memory_depth=config.memory_depth,
                         lb_init=config.lb_init, max_total_iter=config.max_iter)
    elif config.solver == "fusl-sc":
        if config.mu is None:
            raise ValueError("fusl-sc requires --mu")
        from .strongly_convex import fusl_sc_solve

        lb = config.lb_init if config.lb_init is not None else 0.0
        res = fusl_sc_solve(p0, lb, config.mu, d1, config.eps, obj, beta=config.beta,
                            theta=config.theta, rule=config.stepsize_rule,
                            memory_depth=config.memory_depth)
    else:
        raise ValueError(f"solver {config.solver!r} does not apply to problem 'tv'")
    extras["relative_error"] = float(
        np.linalg.norm(res.x - inst.u_true) / max(np.linalg.norm(inst.u_true), 1e-30)
    )
    extras["oracle_calls_by_category"] = obj.call_counts()
    return res, extras


# ---------------------------------------------------------------------------
# invariant audit suite


def _audit_projection(report) -> bool:
    rng = make_rng(7)
    ok = True
    for _ in range(100):
        n = int(rng.integers(2, 9))
        m = int(rng.integers(1, 7))
        interior = standard_normal(rng, n)
        normals = standard_normal(rng, (m, n))
        offsets = normals @ interior + rng.random(m)
        poly = Polyhedron(normals, offsets)
        p = 3.0 * standard_normal(rng, n)
        out = project(p, poly)
        if not out.feasible:
            ok = False
            break
        viol = poly.violations(out.x_star).max()
        if viol > 1e-8 * (1.0 + np.abs(offsets).max()):
            ok = False
            break
        # optimality against feasible perturbations toward the interior point
        for t in (0.1, 0.5, 1.0):
            y = out.x_star + t * (interior - out.x_star)
            if (out.x_star - p) @ (y - out.x_star) < -1e-7 * (1.0 + np.linalg.norm(p)):
                ok = False
    for _ in range(20):
        n = int(rng.integers(2, 6))
        g = standard_normal(rng, n)
        c = float(rng.random())
        normals = np.vstack([g, -g])
        offsets = np.array([c, -c - 0.5])
        if project(standard_normal(rng, n), Polyhedron(normals, offsets)).feasible:
            ok = False
    report("projection feasibility/optimality/infeasibility", ok)
    return ok


def _audit_contraction(report) -> bool:
    inst = gen_least_squares(60, 40, "uniform", seed=3)
    oracle = ls_oracle(inst)
    res = fapl_solve(Ball(np.zeros(40), 1.0), np.zeros(40), 1e-8, oracle, lb_init=0.0)
    q = contraction_factor(0.5, 0.5)
    ok = res.status == "converged"
    for rec in res.trace.phases:
        scale = max(1.0, abs(rec.ub_in), abs(rec.lb_in))
        if rec.gap_out > q * rec.gap_in + 1e-12 * scale:
            ok = False
    report("gap contraction per phase", ok)
    return ok


def _audit_sandwich(report) -> bool:
    inst = gen_tv_instance(8, 8, 32, lambda_tv=1e-2, seed=5)
    obj = tv_structured_objective(inst)
    rng = make_rng(11)
    ok = all(
        sandwich_check(obj, eta, standard_normal(rng, inst.n_pixels), inst.n_pixels / 2.0)
        for eta in (1.0, 0.1, 0.01)
        for _ in range(10)
    )
    report("smoothing sandwich", ok)
    return ok


def _audit_adjoint(report) -> bool:
    rng = make_rng(13)
    ok = True
    for dims in ((4, 5), (8, 8)):
        n = dims[0] * dims[1]
        u = standard_normal(rng, n)
        p = standard_normal(rng, 2 * n)
        lhs = float(tv_diff(u, dims) @ p)
        rhs = float(u @ tv_diff_adjoint(p, dims))
        if abs(lhs - rhs) > 1e-10 * (1.0 + abs(lhs)):
            ok = False
    report("difference-operator adjoint identity", ok)
    return ok


def _audit_trust_radius(report) -> bool:
    rng = make_rng(17)
    n, mu = 12, 2.0
    x_star = standard_normal(rng, n)

    def fn(x):
        d = x - x_star
        return float(mu / 2.0 * d @ d), mu * d

    res = fapl_sc_solve(np.zeros(n), 0.0, mu, 1e-9, FirstOrderOracle(fn, n))
    ok = res.status == "converged"
    for rec in res.trace.phases:
        if np.linalg.norm(rec.incumbent_in - x_star) > trust_radius(rec.gap_in, mu) * (1 + 1e-9):
            ok = False
    report("strong-convexity trust radius", ok)
    return ok


def run_audit(suite: str = "invariants") -> int:
    if suite != "invariants":
        print(f"error: unknown audit suite {suite!r}", file=sys.stderr)
        return 1
    results = []

    def report(name: str, ok: bool) -> None:
        results.append(ok)
        print(f"[{'PASS' if ok else 'FAIL'}] {name}")

    _audit_projection(report)
    _audit_contraction(report)
    _audit_sandwich(report)
    _audit_adjoint(report)
    _audit_trust_radius(report)
    return 0 if all(results) else 1


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 on config errors, not argparse's 2
        raise ValueError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--problem", default="ls", choices=PROBLEMS)
    p.add_argument("--dist", default="uniform", choices=("uniform", "gaussian"))
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda-tv", type=float, default=1e-3, dest="lambda_tv")
    p.add_argument("--sigma", type=float, default=1e-3)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--memory-depth", type=int, default=10, dest="memory_depth")
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--lb", default="zero", dest="lb_mode")
    p.add_argument("--d1", type=float, default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--r0", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None, dest="max_iter")
    p.add_argument("--rule", default="polynomial", choices=("polynomial", "recursive"))
    p.add_argument("--out-dir", default=None, dest="out_dir")
    p.add_argument("--deterministic-trace", action="store_true", dest="deterministic_trace")


def _config_from(args: argparse.Namespace) -> RunConfig:
    fields = RunConfig.__dataclass_fields__
    return RunConfig(**{k: v for k, v in vars(args).items() if k in fields})


def main(argv=None) -> int:
    parser = _Parser(prog="levelforge", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run one solver on one instance")
    _add_common(p_solve)
    p_solve.add_argument("--solver", default="fapl", choices=SOLVERS)

    p_audit = sub.add_parser("audit", help="run the invariant audit suite")
    p_audit.add_argument("--suite", default="invariants")

    p_sweep = sub.add_parser("sweep", help="grid over beta/theta")
    _add_common(p_sweep)
    p_sweep.add_argument("--solver", default="fapl", choices=SOLVERS)
    p_sweep.add_argument("--beta-grid", default="0.3,0.5,0.7", dest="beta_grid")
    p_sweep.add_argument("--theta-grid", default="0.3,0.5,0.7", dest="theta_grid")
    p_sweep.add_argument("--jobs", type=int, default=1)

    try:
        args = parser.parse_args(argv)
        if args.command == "solve":
            config = _config_from(args)
            config.solver = args.solver
            return run_benchmark(config)
        if args.command == "audit":
            return run_audit(args.suite)
        return _run_sweep(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _run_sweep(args: argparse.Namespace) -> int:
    betas = [float(v) for v in args.beta_grid.split(",")]
    thetas = [float(v) for v in args.theta_grid.split(",")]
    base = _config_from(args)
    base.solver = args.solver
    out_dir = Path(args.out_dir) if args.out_dir else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(bt):
        beta, theta = bt
        cfg = RunConfig(**{**base.__dict__, "beta": beta, "theta": theta,
                           "out_dir": str(out_dir / f"run_b{beta}_t{theta}")})
        t0 = time.perf_counter()
        code = run_benchmark(cfg)
        return beta, theta, code, time.perf_counter() - t0

    grid = [(b, t) for b in betas for t in thetas]
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(one, grid))
    else:
        rows = [one(bt) for bt in grid]

    with open(out_dir / "sweep.csv", "w", encoding="ascii") as fh:
        fh.write("beta,theta,exit_code,wall_time_s\n")
        for beta, theta, code, wall in rows:
            fh.write(f"{beta},{theta},{code},{wall!r}\n")
    return 0 if all(row[2] == 0 for row in rows) else 2


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
