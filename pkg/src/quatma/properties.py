"""Seeded invariant suites, shared by the ``properties`` subcommand."""
from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import differential as dops
from . import hyperhermitian as hh
from .grid import Ball, Grid, GridFunction, build_mask
from .regularization import RhsFunction, sup_convolution, sup_convolution_bruteforce
from .solver import BellmanOperator, build_direction_set, problem_mask


@dataclass
class SuiteResult:
    name: str
    ok: bool
    worst: float
    detail: str
    seconds: float = 0.0


def random_quadratic(rng: np.random.Generator, n: int, pd: bool = True) -> dops.QuadraticField:
    d = 4 * n
    M = rng.standard_normal((d, d))
    P = M @ M.T + 0.1 * np.eye(d) if pd else M + M.T
    return dops.QuadraticField(P=P, b=rng.standard_normal(d), c=float(rng.standard_normal()))


def moore_oracle_suite(rng, count: int = 50) -> SuiteResult:
    worst = 0.0
    for n in (1, 2, 3, 4):
        for _ in range(count):
            X = hh.random_hyperhermitian(rng, n)
            a, b = hh.moore_det(X), hh.moore_det_oracle(X)
            worst = max(worst, abs(a - b) / max(1.0, abs(b)))
    return SuiteResult("moore-det eigen vs oracle", worst <= 1e-9, worst, "relative gap")


def superadditivity_suite(rng, count: int = 200) -> SuiteResult:
    worst = 0.0
    for k in range(count):
        n = 1 + k % 3
        A, B = hh.random_psd(rng, n), hh.random_psd(rng, n)
        dA, dB, dAB = hh.moore_det(A), hh.moore_det(B), hh.moore_det(A + B)
        worst = max(worst, (dA + dB - dAB) / max(1.0, dAB))
    return SuiteResult("det(A+B) >= det A + det B", worst <= 1e-9, worst, "largest violation")


def trace_infimum_suite(rng, count: int = 50) -> SuiteResult:
    worst = 0.0
    for k in range(count):
        n = 1 + k % 3
        X = hh.random_pd(rng, n)
        target = hh.moore_det(X) ** (1.0 / n)
        value, amin = hh.inf_trace_value(X)
        worst = max(worst, abs(hh.retrace(amin, X) / n - target) / max(1.0, target))
        for _ in range(4):
            a = hh.random_unit_det(rng, n)
            worst = max(worst, (target - hh.retrace(a, X) / n) / max(1.0, target))
    return SuiteResult("trace infimum", worst <= 1e-8, worst, "minimiser gap / undershoot")


def routes_suite(rng, count: int = 100) -> SuiteResult:
    worst = 0.0
    for k in range(count):
        n = 1 + k % 3
        u = random_quadratic(rng, n, pd=False)
        a = hh.random_psd(rng, n)
        r = dops.delta_a_routes(u, a, np.zeros(4 * n))
        worst = max(worst, abs(r.quaternionic - r.real) / (1.0 + abs(r.real)))
    return SuiteResult("Delta_a two routes", worst <= 1e-8, worst, "relative gap")


def anchor_suite(rng) -> SuiteResult:
    worst = 0.0
    for n in (1, 2, 3):
        u = dops.norm_squared_field(n)
        x = rng.uniform(-1, 1, 4 * n)
        worst = max(worst, abs(dops.ma_det(u, x) / 8.0**n - 1.0))
        fd = dops.ScalarField(u.func, n)
        worst = max(worst, abs(dops.ma_det(fd, x) / 8.0**n - 1.0))
    return SuiteResult("det(|q|^2) = 8^n", worst <= 1e-6, worst, "relative error")


def det_inequality_suite(rng, count: int = 100) -> SuiteResult:
    worst = 0.0
    for k in range(count):
        n = 1 + k % 3
        u = random_quadratic(rng, n)
        lhs, rhs = dops.det_inequality_gap(u, np.zeros(4 * n))
        worst = max(worst, (rhs - lhs) / max(1.0, rhs))
    return SuiteResult("det(u)^(1/n) >= 4 det_R^(1/4n)", worst <= 1e-8, worst, "largest violation")


def sup_convolution_suite(rng) -> SuiteResult:
    dom = Ball((0.0,) * 4, 1.0)
    grid = Grid.cube(1, -1.0, 1.0, 7)
    f = GridFunction.from_function(grid, dom, lambda x: np.sin(3 * x[..., 0]) + rng.uniform(-0.1, 0.1))
    fast = sup_convolution(f, 0.25, 2.5)
    slow = sup_convolution_bruteforce(f, 0.25, 2.5)
    act = fast.active
    worst = float(np.max(np.abs(fast.values[act] - slow.values[act]), initial=0.0))
    ok = worst == 0.0 and np.array_equal(fast.mask, slow.mask)
    return SuiteResult("sup-convolution vs exhaustive scan", ok, worst, "max difference")


def monotonicity_suite(rng, count: int = 30) -> SuiteResult:
    dom = Ball((0.0,) * 4, 1.0)
    grid = Grid.cube(1, -1.0, 1.0, 7)
    dirs = build_direction_set(1, 1)
    mask = problem_mask(grid, dom, dirs)
    op = BellmanOperator(grid, mask, dirs)
    F = RhsFunction.constant(1.0, 1)
    x_int = grid.coords(op.interior)
    u = rng.standard_normal(grid.size)
    base = op.residual(u, F, x_int)
    worst = 0.0
    for _ in range(count):
        k = int(rng.integers(op.interior.size))
        node = op.interior[k]
        stencil = np.unique(np.concatenate([M[k].indices for M in op.matrices]))
        j = int(node) if rng.random() < 0.3 else int(rng.choice(stencil))
        bump = float(rng.uniform(0.01, 1.0))
        v = u.copy()
        v[j] += bump
        diff = op.residual(v, F, x_int)[k] - base[k]
        # center bump must not raise R, neighbour bump must not lower it
        worst = max(worst, diff if j == node else -diff)
    return SuiteResult("scheme monotonicity", worst <= 1e-12, worst, "largest wrong-sign change")


def csv_roundtrip_suite(rng) -> SuiteResult:
    dom = Ball((0.0,) * 4, 1.0)
    grid = Grid.cube(1, -1.0, 1.0, 5)
    f = GridFunction(grid, np.where(build_mask(grid, dom) > 0, rng.standard_normal(grid.shape), np.nan),
                     build_mask(grid, dom))
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "f.csv"
        f.to_csv(path)
        g = GridFunction.from_csv(path)
    ok = g.grid == f.grid and np.array_equal(g.mask, f.mask) and np.array_equal(
        g.values[g.active], f.values[f.active])
    return SuiteResult("CSV round trip", bool(ok), 0.0 if ok else 1.0, "bit-exact")


SUITES: list[Callable[[np.random.Generator], SuiteResult]] = [
    moore_oracle_suite,
    superadditivity_suite,
    trace_infimum_suite,
    routes_suite,
    anchor_suite,
    det_inequality_suite,
    sup_convolution_suite,
    monotonicity_suite,
    csv_roundtrip_suite,
]


def run_all(seed: int) -> list[SuiteResult]:
    out = []
    for k, suite in enumerate(SUITES):
        rng = np.random.default_rng([seed, k])
        t0 = time.perf_counter()
        res = suite(rng)
        res.seconds = time.perf_counter() - t0
        out.append(res)
    return out


def format_table(results: list[SuiteResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'suite':<{width}}  result  {'worst':>10}  measure"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.ok else 'FAIL':<6}  {r.worst:>10.3e}  {r.detail}")
    return "\n".join(lines)
