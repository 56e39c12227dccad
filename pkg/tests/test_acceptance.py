"""Acceptance criteria 1-10.  Each test prints one PASS/FAIL line."""
import time

import numpy as np

from quatma import differential as dops
from quatma import hyperhermitian as hh
from quatma.grid import Ball, Grid, GridFunction
from quatma.properties import random_quadratic
from quatma.regularization import RhsFunction, sup_convolution, sup_convolution_bruteforce
from quatma.solver import DirichletProblem, build_direction_set, solve_dirichlet

BALL = Ball((0.0,) * 4, 1.0)


def normq(x):
    return np.sum(x * x, axis=-1)


def norm_problem(F: RhsFunction) -> DirichletProblem:
    return DirichletProblem(BALL, normq, F, normq)


def test_c01_moore_oracle_equivalence(criterion):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for n in (1, 2, 3, 4):
        for _ in range(500):
            X = hh.random_hyperhermitian(rng, n)
            a, b = hh.moore_det(X), hh.moore_det_oracle(X)
            worst = max(worst, abs(a - b) / abs(b))
    secs = time.perf_counter() - t0
    ok = worst <= 1e-9 and secs < 10
    assert criterion(1, "Moore det eigen path vs Schur oracle", ok,
                     f"max rel diff {worst:.2e} (tol 1e-9), {secs:.2f} s (limit 10 s)")


def test_c02_superadditivity_concavity(criterion):
    rng = np.random.default_rng(102)
    t0 = time.perf_counter()
    sup_v = conc_v = 0.0
    for k in range(1000):
        n = 1 + k % 3
        A, B = hh.random_psd(rng, n), hh.random_psd(rng, n)
        dA, dB = hh.moore_det(A), hh.moore_det(B)
        sup_v = max(sup_v, dA + dB - hh.moore_det(A + B))
        P, Q = hh.random_pd(rng, n), hh.random_pd(rng, n)
        t = rng.uniform()
        mix = hh.moore_det(P * t + Q * (1 - t)) ** (1 / n)
        conc_v = max(conc_v, t * hh.moore_det(P) ** (1 / n) + (1 - t) * hh.moore_det(Q) ** (1 / n) - mix)
    secs = time.perf_counter() - t0
    ok = sup_v <= 1e-9 and conc_v <= 1e-9 and secs < 10
    assert criterion(2, "superadditivity and concavity", ok,
                     f"max violation {max(sup_v, conc_v, 0.0):.2e} (tol 1e-9), {secs:.2f} s (limit 10 s)")


def test_c03_hessian_anchor(criterion):
    rng = np.random.default_rng(103)
    worst_h = worst_d = 0.0
    for n in (1, 2, 3):
        x = rng.uniform(-1, 1, 4 * n)
        analytic = dops.norm_squared_field(n)
        fd = dops.ScalarField(analytic.func, n)
        eight = (hh.HyperhermitianMatrix.identity(n) * 8.0).entries
        for u in (analytic, fd):
            worst_h = max(worst_h, float(np.max(np.abs(dops.quaternionic_hessian(u, x).entries - eight))))
            worst_d = max(worst_d, abs(dops.ma_det(u, x) / 8.0**n - 1))
    ok = worst_h <= 1e-6 and worst_d <= 1e-6
    assert criterion(3, "Hessian of |q|^2 is 8 Id, det = 8^n", ok,
                     f"Hessian err {worst_h:.2e}, det rel err {worst_d:.2e} (tol 1e-6)")


def test_c04_trace_infimum(criterion):
    rng = np.random.default_rng(104)
    attain = under = 0.0
    for k in range(200):
        n = 1 + k % 3
        X = hh.random_pd(rng, n)
        target = hh.moore_det(X) ** (1 / n)
        _, a_star = hh.inf_trace_value(X)
        attain = max(attain, abs(hh.retrace(a_star, X) / n - target))
        for _ in range(200):
            under = max(under, target - hh.retrace(hh.random_unit_det(rng, n), X) / n)
    ok = attain <= 1e-8 and under <= 1e-9
    assert criterion(4, "trace-infimum formula", ok,
                     f"minimiser gap {attain:.2e} (tol 1e-8), max undershoot {max(under, 0.0):.2e} (tol 1e-9)")


def test_c05_det_inequality(criterion):
    rng = np.random.default_rng(105)
    violation = 0.0
    for k in range(500):
        n = 1 + k % 3
        u = random_quadratic(rng, n)
        lhs, rhs = dops.det_inequality_gap(u, rng.standard_normal(4 * n))
        violation = max(violation, rhs - lhs)
    eq = 0.0
    for n in (1, 2, 3):
        for c in (1 / 8, 1.0, 3.0):
            lhs, rhs = dops.det_inequality_gap(dops.norm_squared_field(n, c), rng.standard_normal(4 * n))
            eq = max(eq, abs(lhs - rhs))
    ok = violation <= 0.0 and eq <= 1e-8
    assert criterion(5, "det(Q)^(1/n) >= 4 det_R(D^2 u)^(1/4n)", ok,
                     f"max violation {max(violation, 0.0):.2e} on 500 fields, equality gap {eq:.2e} (tol 1e-8)")


def test_c06_two_route_delta(criterion):
    rng = np.random.default_rng(106)
    worst = 0.0
    for k in range(500):
        n = 1 + k % 3
        u = random_quadratic(rng, n, pd=False)
        a = hh.random_psd(rng, n)
        r = dops.delta_a_routes(u, a, rng.standard_normal(4 * n))
        worst = max(worst, abs(r.quaternionic - r.real) / (1 + abs(r.real)))
    assert criterion(6, "Delta_a quaternionic vs real trace", worst <= 1e-8,
                     f"max rel diff {worst:.2e} (tol 1e-8)")


def test_c07_sup_convolution_suite(criterion):
    rng = np.random.default_rng(107)
    grid = Grid.cube(1, -1.0, 1.0, 9)
    noise = rng.uniform(-0.05, 0.05, grid.size).reshape(grid.shape)
    f = GridFunction.from_function(grid, BALL, lambda x: 0.4 * np.sin(2 * x[..., 0]) * x[..., 1])
    f.values = np.where(f.active, f.values + noise, np.nan)
    A = 1.8
    fast, slow = sup_convolution(f, 0.2, A), sup_convolution_bruteforce(f, 0.2, A)
    exact = bool(np.array_equal(fast.values[fast.active], slow.values[slow.active]))

    small, large = sup_convolution(f, 0.1, A), sup_convolution(f, 0.2, A)
    monotone = bool(np.all(small.values[large.interior] <= large.values[large.interior]))

    worst_d2 = np.inf
    for d in (0.15, 0.2, 0.3):
        out = sup_convolution(f, d, A)
        h = grid.spacing
        for ax in range(4):
            v = out.values
            d2 = (np.take(v, range(2, 9), axis=ax) - 2 * np.take(v, range(1, 8), axis=ax)
                  + np.take(v, range(0, 7), axis=ax)) / h[ax] ** 2
            d2 = d2[np.isfinite(d2)]
            if d2.size:
                worst_d2 = min(worst_d2, float(d2.min()) + 1 / d**2)
    semiconvex = worst_d2 >= -1e-8

    g17 = Grid.cube(1, -1.0, 1.0, 17)
    q = GridFunction.from_function(g17, BALL, normq)
    d = 0.2
    out = sup_convolution(q, d, A)
    x = g17.points()[out.interior]
    cf_err = float(np.max(np.abs(out.values[out.interior] - normq(x) / (1 - 2 * d**2))))
    closed = cf_err <= 10 * g17.spacing[0]

    ok = exact and monotone and semiconvex and closed
    assert criterion(7, "sup-convolution suite", ok,
                     f"exhaustive equal={exact}, monotone={monotone}, "
                     f"min D2 + 1/delta^2 = {worst_d2:.2e} (tol -1e-8), "
                     f"closed-form err {cf_err:.3f} (tol 10h = {10 * g17.spacing[0]:.3f})")


def test_c08_manufactured_solve(criterion):
    t0 = time.perf_counter()
    grid = Grid.cube(1, -1.0, 1.0, 13)
    _, rep = solve_dirichlet(norm_problem(RhsFunction.constant(8.0, 1)), grid, build_direction_set(1, 1),
                             tol=1e-6, init="min-g")
    secs = time.perf_counter() - t0
    b = np.array([0.3, -0.7, 0.2, 0.5])
    affine = lambda x: x @ b + 0.25  # noqa: E731
    _, rep0 = solve_dirichlet(DirichletProblem(BALL, affine, RhsFunction.constant(0.0, 1), affine), grid,
                              build_direction_set(1, 1), tol=1e-6, init="min-g")
    ok = (rep.linf_error <= 0.05 and rep.residual <= 1e-6 and secs <= 300
          and rep0.linf_error <= 1e-6)
    assert criterion(8, "manufactured Dirichlet solve on 13^4", ok,
                     f"|q|^2 err {rep.linf_error:.2e} (tol 0.05), residual {rep.residual:.2e} (tol 1e-6), "
                     f"{secs:.1f} s (limit 300 s); affine err {rep0.linf_error:.2e} (tol 1e-6)")


def test_c09_uniqueness_comparison(criterion):
    grid = Grid.cube(1, -1.0, 1.0, 13)
    dirs = build_direction_set(1, 1)
    eight = RhsFunction.constant(8.0, 1)
    ua, _ = solve_dirichlet(norm_problem(eight), grid, dirs, tol=1e-6, init="g")
    ub, _ = solve_dirichlet(norm_problem(eight), grid, dirs, tol=1e-6, init="min-g")
    gap = float(np.max(np.abs(ua.values[ua.interior] - ub.values[ub.interior])))

    pairs = [
        (RhsFunction.constant(4.0, 1), eight),
        (RhsFunction(lambda x, t: 8.0 * np.exp(t - normq(x)), 1), RhsFunction(lambda x, t: 8.0 * np.exp(t), 1)),
        (RhsFunction.constant(0.0, 1), RhsFunction(lambda x, t: 1.0 + normq(x) + 0 * t, 1)),
    ]
    worst = -np.inf
    for F1, F2 in pairs:
        u1, _ = solve_dirichlet(norm_problem(F1), grid, dirs, tol=1e-10, init="min-g")
        u2, _ = solve_dirichlet(norm_problem(F2), grid, dirs, tol=1e-10, init="min-g")
        worst = max(worst, float(np.max(u2.values[u2.interior] - u1.values[u1.interior])))
    ok = gap <= 1e-6 and worst <= 1e-8
    assert criterion(9, "uniqueness and comparison", ok,
                     f"two-init gap {gap:.2e} (tol 1e-6); max(u2 - u1) over 3 pairs {worst:.2e} (tol 1e-8)")


def test_c10_convergence_trend(criterion):
    errors = []
    for points in (9, 13, 17):
        grid = Grid.cube(1, -1.0, 1.0, points)
        _, rep = solve_dirichlet(norm_problem(RhsFunction.constant(8.0, 1)), grid, build_direction_set(1, 1),
                                 tol=1e-6, init="min-g")
        errors.append(rep.linf_error)
    non_increasing = all(b <= a for a, b in zip(errors, errors[1:]))
    halved = errors[-1] <= 0.5 * errors[0]
    ok = non_increasing and halved
    assert criterion(10, "error trend 9^4 -> 13^4 -> 17^4", ok,
                     "errors " + ", ".join(f"{e:.3e}" for e in errors)
                     + f"; non-increasing={non_increasing}, final <= coarsest/2: {halved}")
