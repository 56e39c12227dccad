"""Monotone wide-stencil solver for -det(u) + F(q, u) = 0.

The equation is solved in the root form

    min_{a in dirs} (2/n) Delta_a u  =  F(q, u)^(1/n),

with ``Delta_a u = Tr(a^R D^2 u) / 2 = sum_m lambda_m D^2_{e_m} u / 2`` where
``(lambda_m, e_m)`` is the spectral decomposition of ``a^R``.  Each
directional second difference uses the stencil endpoints ``x +- s e_m``;
endpoints between grid nodes are multilinearly interpolated, so every
operator is monotone.  The discrete system is iterated with damped Jacobi
sweeps.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import sparse

from .differential import _HESS_WEIGHTS
from .grid import (
    BOUNDARY,
    EXTERIOR,
    INTERIOR,
    Domain,
    Grid,
    GridFunction,
    StencilOutOfBoundsError,
    build_mask,
    shifted_indices,
)
from .hyperhermitian import (
    HyperhermitianMatrix,
    conj_transpose,
    moore_det,
    qmatmul,
    real_embed_matrix,
    real_embed_quaternionic,
)
from .quaternion import UNITS, left_mult_array
from .regularization import RhsFunction

UNSTABLE_SWEEPS = 50


class SolverError(RuntimeError):
    pass


class UnstableIterationError(SolverError):
    pass


class GridMismatchError(ValueError):
    pass


# -- direction sets -------------------------------------------------------------

@dataclass(frozen=True)
class DirectionMember:
    """A positive hyperhermitian ``a`` with ``det a = 1`` and the spectral
    decomposition ``a^R = sum_m weights[m] * outer(directions[m], directions[m])``."""

    matrix: HyperhermitianMatrix
    weights: np.ndarray
    directions: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.n


@dataclass(frozen=True)
class DirectionSet:
    n: int
    members: tuple[DirectionMember, ...]

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, k: int) -> DirectionMember:
        return self.members[k]


def _rotation(n: int, p: int, q: int, w: np.ndarray) -> np.ndarray:
    """Unitary acting on coordinates p, q: [[c, -s conj(w)], [s w, c]]."""
    c = s = math.sqrt(0.5)
    u = np.zeros((n, n, 4))
    u[np.arange(n), np.arange(n), 0] = 1.0
    u[p, p] = [c, 0, 0, 0]
    u[q, q] = [c, 0, 0, 0]
    u[q, p] = s * w
    u[p, q] = -s * (w * np.array([1.0, -1.0, -1.0, -1.0]))
    return u


def _units(richness: int) -> np.ndarray:
    units = [UNITS[k] for k in range(4)]
    if richness >= 2:
        units += [np.array(sig) / 2.0 for sig in itertools.product((1.0, -1.0), repeat=4)]
    return np.array(units)


def make_member(diag: np.ndarray, unitary: Optional[np.ndarray] = None) -> DirectionMember:
    """``a = U* diag U``; the eigen-directions of ``a^R`` are the rows of ``U^R``."""
    n = diag.size
    d = HyperhermitianMatrix.diagonal(diag).entries
    if unitary is None:
        unitary = HyperhermitianMatrix.identity(n).entries
    a = HyperhermitianMatrix(qmatmul(qmatmul(conj_transpose(unitary), d), unitary), symmetrize=True)
    rows = real_embed_quaternionic(unitary)
    return DirectionMember(a, np.repeat(diag, 4), rows)


def build_direction_set(n: int, richness: int = 1) -> DirectionSet:
    """Identity plus determinant-normalised diagonal matrices with
    eigenvalue ratios ``4^m`` (``1 <= m <= richness``) and their conjugates
    by coordinate rotations ``[[c, -s conj(w)], [s w, c]]``, ``c = s = 1/sqrt 2``.
    Rotation units ``w`` are ``1, i, j, k``; from richness 2 on also the
    sixteen ``(+-1 +- i +- j +- k)/2``.
    """
    if richness < 0:
        raise ValueError("richness must be >= 0")
    members = [make_member(np.ones(n))]
    seen = {_key(members[0].matrix)}

    def add(m: DirectionMember):
        k = _key(m.matrix)
        if k not in seen:
            seen.add(k)
            members.append(m)

    diagonals = []
    for level in range(1, richness + 1):
        for j, k in itertools.permutations(range(n), 2):
            d = np.ones(n)
            d[j] = 2.0**level
            d[k] = 2.0**-level
            diagonals.append(d)
            add(make_member(d))
    for d in diagonals:
        for p, q in itertools.combinations(range(n), 2):
            for w in _units(richness):
                add(make_member(d, _rotation(n, p, q, w)))
    dirs = DirectionSet(n, tuple(members))
    for m in dirs:
        det = moore_det(m.matrix)
        if abs(det - 1.0) > 1e-9:
            raise AssertionError(f"direction member with det {det!r}")
        recon = np.einsum("m,mi,mj->ij", m.weights, m.directions, m.directions)
        if not np.allclose(recon, real_embed_matrix(m.matrix), atol=1e-12):
            raise AssertionError("direction member spectral data inconsistent")
    return dirs


def _key(a: HyperhermitianMatrix) -> bytes:
    return np.round(a.entries, 10).tobytes()


# -- stencils -------------------------------------------------------------------

@dataclass(frozen=True)
class _Endpoint:
    offsets: np.ndarray  # (c, d) integer corner offsets
    weights: np.ndarray  # (c,)


def _endpoint(target: np.ndarray) -> _Endpoint:
    r = np.round(target)
    frac_axes = np.flatnonzero(np.abs(target - r) > 1e-9)
    base = np.where(np.abs(target - r) > 1e-9, np.floor(target), r).astype(int)
    if frac_axes.size == 0:
        return _Endpoint(base[None, :], np.ones(1))
    t = target[frac_axes] - base[frac_axes]
    offs, wts = [], []
    for bits in itertools.product((0, 1), repeat=frac_axes.size):
        o = base.copy()
        o[frac_axes] += np.array(bits)
        offs.append(o)
        wts.append(float(np.prod(np.where(np.array(bits) == 1, t, 1.0 - t))))
    return _Endpoint(np.array(offs), np.array(wts))


@dataclass(frozen=True)
class MemberStencil:
    """Linear stencil of ``Delta_a`` on a grid: offsets and coefficients,
    with the centre coefficient separate (it is ``-sum lambda_m / s_m^2``)."""

    offsets: np.ndarray
    coeffs: np.ndarray
    center: float


def member_stencil(member: DirectionMember, spacing: np.ndarray, radius: int = 1) -> MemberStencil:
    offs, coeffs = [], []
    center = 0.0
    for lam, e in zip(member.weights, member.directions):
        p = e / spacing
        p = radius * p / np.max(np.abs(p))
        s2 = float(np.sum((p * spacing) ** 2))
        for sign in (1.0, -1.0):
            ep = _endpoint(sign * p)
            offs.append(ep.offsets)
            coeffs.append(0.5 * lam * ep.weights / s2)
        center -= lam / s2
    offs = np.concatenate(offs)
    coeffs = np.concatenate(coeffs)
    # merge repeated offsets
    uniq, inv = np.unique(offs, axis=0, return_inverse=True)
    merged = np.zeros(len(uniq))
    np.add.at(merged, inv.reshape(-1), coeffs)
    return MemberStencil(uniq, merged, center)


def stencil_offsets(dirs: DirectionSet, spacing: np.ndarray, radius: int = 1) -> np.ndarray:
    allo = np.concatenate([member_stencil(m, spacing, radius).offsets for m in dirs])
    return np.unique(allo, axis=0)


def problem_mask(grid: Grid, domain: Domain, dirs: DirectionSet, radius: int = 1) -> np.ndarray:
    """Mask whose boundary layer contains every node used by an interior stencil."""
    return build_mask(grid, domain, stencil_offsets(dirs, grid.spacing, radius))


class BellmanOperator:
    """Discrete ``Delta_a`` for every member, assembled as sparse rows over
    the interior nodes of a mask."""

    def __init__(self, grid: Grid, mask: np.ndarray, dirs: DirectionSet, radius: int = 1,
                 threads: int = 1):
        if dirs.n != grid.n:
            raise ValueError("direction set and grid dimensions differ")
        self.grid = grid
        self.mask = np.asarray(mask, dtype=np.int8).reshape(grid.shape)
        self.dirs = dirs
        self.radius = int(radius)
        self.threads = max(1, int(threads))
        flat_mask = self.mask.reshape(-1)
        self.interior = np.flatnonzero(flat_mask == INTERIOR)
        self.stencils = [member_stencil(m, grid.spacing, self.radius) for m in dirs]
        self.matrices = [self._assemble(st, flat_mask) for st in self.stencils]
        # centre coefficient of (2/n) Delta_a, per member
        self.center_coefficients = np.array([-(2.0 / grid.n) * st.center for st in self.stencils])

    def _assemble(self, st: MemberStencil, flat_mask: np.ndarray) -> sparse.csr_matrix:
        m = self.interior.size
        cols = shifted_indices(self.grid, self.interior, st.offsets)
        if np.any(cols < 0):
            raise StencilOutOfBoundsError("an interior stencil leaves the bounding box; pad the grid")
        if np.any(flat_mask[cols] == EXTERIOR):
            raise StencilOutOfBoundsError("an interior stencil reaches an exterior node")
        rows = np.repeat(np.arange(m), st.offsets.shape[0])
        vals = np.tile(st.coeffs, m)
        mat = sparse.csr_matrix((vals, (rows, cols.reshape(-1))), shape=(m, self.grid.size))
        mat = mat + sparse.csr_matrix(
            (np.full(m, st.center), (np.arange(m), self.interior)), shape=(m, self.grid.size)
        )
        return mat.tocsr()

    @property
    def tau_max(self) -> float:
        """Largest Jacobi step keeping the sweep monotone in every value."""
        return 1.0 / float(self.center_coefficients.max())

    def deltas(self, u_flat: np.ndarray) -> np.ndarray:
        """``Delta_a u`` at interior nodes for every member; shape (members, interior)."""
        if self.threads > 1 and len(self.matrices) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                return np.stack(list(pool.map(lambda M: M @ u_flat, self.matrices)))
        return np.stack([M @ u_flat for M in self.matrices])

    def bellman(self, u_flat: np.ndarray) -> np.ndarray:
        """``min_a (2/n) Delta_a u`` at interior nodes."""
        return (2.0 / self.grid.n) * self.deltas(u_flat).min(axis=0)

    def residual(self, u_flat: np.ndarray, F: RhsFunction, x_interior: np.ndarray) -> np.ndarray:
        f = F(x_interior, u_flat[self.interior])
        if np.any(f < 0) or not np.all(np.isfinite(f)):
            raise SolverError("F returned a negative or non-finite value")
        return self.bellman(u_flat) - f ** (1.0 / self.grid.n)


def _operator_for(u: GridFunction, dirs: DirectionSet, radius: int) -> BellmanOperator:
    return BellmanOperator(u.grid, u.mask, dirs, radius)


def _flat_node(grid: Grid, node) -> int:
    if np.isscalar(node):
        return int(node)
    return int(np.ravel_multi_index(tuple(int(v) for v in node), grid.shape))


def discrete_delta_a(u: GridFunction, member: DirectionMember, node, radius: int = 1) -> float:
    """``(1/2) sum_m lambda_m D^2_{e_m} u`` at one interior node."""
    flat = _flat_node(u.grid, node)
    if u.mask.reshape(-1)[flat] != INTERIOR:
        raise ValueError("node is not interior")
    single = u.mask.reshape(-1).copy()
    single[single == INTERIOR] = BOUNDARY
    single[flat] = INTERIOR
    op = BellmanOperator(u.grid, single, DirectionSet(u.n, (member,)), radius)
    return float(op.deltas(u.values.reshape(-1))[0, 0])


def bellman_residual(u: GridFunction, node, dirs: DirectionSet, F: RhsFunction, radius: int = 1) -> float:
    """``min_a (2/n) Delta_a u - F(q, u)^(1/n)`` at one interior node."""
    n = u.n
    flat = _flat_node(u.grid, node)
    best = min(discrete_delta_a(u, m, flat, radius) for m in dirs)
    x = u.grid.coords([flat])[0]
    f = float(F(x, u.values.reshape(-1)[flat]))
    return (2.0 / n) * best - f ** (1.0 / n)


def bellman_residuals(u: GridFunction, dirs: DirectionSet, F: RhsFunction, radius: int = 1) -> GridFunction:
    """Residual at every interior node, as a grid function (NaN elsewhere)."""
    op = _operator_for(u, dirs, radius)
    x = u.grid.coords(op.interior)
    r = op.residual(u.values.reshape(-1), F, x)
    out = np.full(u.grid.size, np.nan)
    out[op.interior] = r
    mask = np.where(u.mask == INTERIOR, INTERIOR, EXTERIOR)
    return GridFunction(u.grid, out, mask, u.domain)


# -- Dirichlet problem ---------------------------------------------------------------

@dataclass
class DirichletProblem:
    domain: Domain
    g: Callable[[np.ndarray], np.ndarray]
    F: RhsFunction
    exact: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @property
    def n(self) -> int:
        return self.domain.n


@dataclass
class SolveReport:
    iterations: int
    residual: float
    residual_history: list[float]
    converged: bool
    tau: float
    tau_max: float
    direction_members: int
    direction_gap: Optional[float] = None
    linf_error: Optional[float] = None
    config_echo: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "residual_history": list(self.residual_history),
            "linf_error": self.linf_error,
            "converged": self.converged,
            "tau": self.tau,
            "tau_max": self.tau_max,
            "direction_members": self.direction_members,
            "direction_gap": self.direction_gap,
            "config_echo": self.config_echo,
        }


def initial_guess(kind, grid: Grid, mask: np.ndarray, g_vals: np.ndarray, problem: DirichletProblem) -> np.ndarray:
    """Interior start values: ``'g'`` (extend the boundary expression),
    ``'min-g'`` (constant minimum of the boundary data), or an array."""
    flat_mask = mask.reshape(-1)
    interior = np.flatnonzero(flat_mask == INTERIOR)
    if isinstance(kind, str):
        if kind == "g":
            return np.broadcast_to(problem.g(grid.coords(interior)), interior.shape).astype(float)
        if kind == "min-g":
            return np.full(interior.size, float(g_vals.min()))
        raise ValueError(f"unknown initialisation {kind!r}")
    arr = np.asarray(kind, dtype=float).reshape(-1)
    if arr.size == grid.size:
        return arr[interior].copy()
    if arr.size == interior.size:
        return arr.copy()
    raise ValueError("initial array does not match the grid")


def solve_dirichlet(problem: DirichletProblem, grid: Grid, dirs: Optional[DirectionSet] = None,
                    tol: float = 1e-6, max_iter: int = 20000, tau_factor: float = 0.5,
                    init="g", stencil_radius: int = 1, threads: int = 1,
                    config_echo: Optional[dict] = None) -> tuple[GridFunction, SolveReport]:
    """Solve the discrete Dirichlet problem by damped Jacobi sweeps.

    Boundary nodes hold ``g`` evaluated at the node.  Each sweep updates all
    interior values from the previous iterate, ``u += tau * R(u)``, with
    ``tau = tau_factor * tau_max``.  Stops once ``max |R| <= tol``; after
    ``max_iter`` sweeps the best iterate is returned with
    ``converged=False``.

    Raises
    ------
    UnstableIterationError
        If the residual grows for 50 consecutive sweeps.
    """
    if problem.n != grid.n:
        raise ValueError("problem and grid dimensions differ")
    if tau_factor <= 0:
        raise ValueError("tau_factor must be positive")
    dirs = build_direction_set(problem.n, 1) if dirs is None else dirs
    mask = problem_mask(grid, problem.domain, dirs, stencil_radius)
    op = BellmanOperator(grid, mask, dirs, stencil_radius, threads)
    flat_mask = mask.reshape(-1)
    bnd = np.flatnonzero(flat_mask == BOUNDARY)
    g_vals = np.broadcast_to(problem.g(grid.coords(bnd)), bnd.shape).astype(float)
    if not np.all(np.isfinite(g_vals)):
        raise SolverError("boundary data is not finite")
    u = np.full(grid.size, np.nan)
    u[bnd] = g_vals
    u[op.interior] = initial_guess(init, grid, mask, g_vals, problem)
    x_int = grid.coords(op.interior)

    tau = tau_factor * op.tau_max
    history: list[float] = []
    best_res, best_u = math.inf, u.copy()
    growth = 0
    converged = False
    iterations = 0
    while True:
        R = op.residual(u, problem.F, x_int)
        res = float(np.max(np.abs(R), initial=0.0))
        history.append(res)
        if res < best_res:
            best_res, best_u = res, u.copy()
        if res <= tol:
            converged = True
            break
        if len(history) > 1 and res > history[-2]:
            growth += 1
            if growth >= UNSTABLE_SWEEPS:
                raise UnstableIterationError(
                    f"residual grew for {UNSTABLE_SWEEPS} consecutive sweeps (tau = {tau:.3e}, tau_max = {op.tau_max:.3e})"
                )
        else:
            growth = 0
        if iterations >= max_iter:
            break
        u[op.interior] += tau * R
        iterations += 1

    sol = best_u if not converged else u
    result = GridFunction(grid, sol, mask, problem.domain)
    report = SolveReport(
        iterations=iterations,
        residual=best_res if not converged else res,
        residual_history=history,
        converged=converged,
        tau=tau,
        tau_max=op.tau_max,
        direction_members=len(dirs),
        direction_gap=direction_gap(result, dirs),
        config_echo=dict(config_echo or {}),
    )
    if problem.exact is not None:
        ex = np.broadcast_to(problem.exact(x_int), x_int.shape[:1])
        report.linf_error = float(np.max(np.abs(sol[op.interior] - ex), initial=0.0))
    return result, report


# -- direction-set resolution ------------------------------------------------------------

def discrete_real_hessian(u: GridFunction, nodes: np.ndarray) -> np.ndarray:
    """Central-difference real Hessians at the given flat nodes; NaN where a
    needed neighbour is not an active node.  Shape (m, d, d)."""
    grid = u.grid
    d = grid.dim
    h = grid.spacing
    flat_vals = np.where(u.active, u.values, np.nan).reshape(-1)
    eye = np.eye(d, dtype=int)

    def val(offsets):
        idx = shifted_indices(grid, nodes, offsets)
        out = np.where(idx >= 0, flat_vals[np.maximum(idx, 0)], np.nan)
        return out

    c = flat_vals[nodes]
    plus, minus = val(eye), val(-eye)
    H = np.empty((nodes.size, d, d))
    H[:, np.arange(d), np.arange(d)] = (plus - 2.0 * c[:, None] + minus) / h**2
    for i, j in itertools.combinations(range(d), 2):
        offs = np.array([eye[i] + eye[j], eye[i] - eye[j], -eye[i] + eye[j], -eye[i] - eye[j]])
        v = val(offs)
        mixed = (v[:, 0] - v[:, 1] - v[:, 2] + v[:, 3]) / (4.0 * h[i] * h[j])
        H[:, i, j] = mixed
        H[:, j, i] = mixed
    return H


def direction_gap(u: GridFunction, dirs: DirectionSet) -> Optional[float]:
    """Largest excess of ``min_{a in dirs} (1/n) Tr(a^R D^2 u)`` over the
    exact infimum ``det(Q)^(1/n)`` with ``Q = [d^2 u / dqbar_j dq_k]``, both formed from the same difference
    Hessian, over interior nodes where Q is positive definite."""
    nodes = np.flatnonzero(u.mask.reshape(-1) == INTERIOR)
    if nodes.size == 0:
        return None
    D = discrete_real_hessian(u, nodes)
    ok = np.all(np.isfinite(D), axis=(1, 2))
    if not ok.any():
        return None
    D = D[ok]
    n = u.n
    aR = np.stack([real_embed_matrix(m.matrix) for m in dirs])
    traces = np.einsum("aij,mij->ma", aR, D) / n
    Qm = D.reshape(D.shape[0], n, 4, n, 4)
    # transposed Hessian [d^2 u / dqbar_j dq_k], the matrix paired with a
    H = np.einsum("mkslt,stc->mlkc", Qm, _HESS_WEIGHTS)
    HR = left_mult_array(H).transpose(0, 1, 3, 2, 4).reshape(D.shape[0], 4 * n, 4 * n)
    ev = np.linalg.eigvalsh(HR)
    lam = ev.reshape(ev.shape[0], -1, 4).mean(axis=2)
    pd = lam[:, 0] > 1e-12 * np.maximum(1.0, np.abs(lam[:, -1]))
    if not pd.any():
        return None
    exact = np.exp(np.mean(np.log(lam[pd]), axis=1))
    return float(np.max(traces[pd].min(axis=1) - exact))


# -- comparison ------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonResult:
    ok: bool
    max_excess: float
    worst_node: Optional[tuple[int, ...]] = None
    worst_point: Optional[np.ndarray] = None

    def __bool__(self) -> bool:
        return self.ok


def comparison_check(u: GridFunction, v: GridFunction, dirs: DirectionSet, F: RhsFunction,
                     tol: float = 1e-8, radius: int = 1) -> ComparisonResult:
    """Check ``u <= v + tol`` on interior nodes for a discrete subsolution u
    and supersolution v ordered on the boundary.

    Raises
    ------
    GridMismatchError
        If u and v live on different grids or masks.
    ValueError
        If the sub/supersolution or boundary-order preconditions fail.
    """
    if not u.same_grid(v):
        raise GridMismatchError("u and v must share grid and mask")
    ru = bellman_residuals(u, dirs, F, radius).values[u.interior]
    rv = bellman_residuals(v, dirs, F, radius).values[v.interior]
    if np.any(ru < -tol):
        raise ValueError(f"u is not a discrete subsolution (min residual {ru.min():.3e})")
    if np.any(rv > tol):
        raise ValueError(f"v is not a discrete supersolution (max residual {rv.max():.3e})")
    bnd = u.mask == BOUNDARY
    if np.any(u.values[bnd] > v.values[bnd] + tol):
        raise ValueError("u exceeds v on the boundary")
    diff = np.where(u.interior, u.values - v.values, -np.inf)
    k = int(np.argmax(diff))
    excess = float(diff.reshape(-1)[k])
    if excess <= tol:
        return ComparisonResult(True, excess)
    node = tuple(int(i) for i in np.unravel_index(k, u.grid.shape))
    return ComparisonResult(False, excess, node, u.grid.coords([k])[0])


def grid_errors(u: GridFunction, exact: Callable[[np.ndarray], np.ndarray]) -> float:
    nodes = np.flatnonzero(u.mask.reshape(-1) == INTERIOR)
    x = u.grid.coords(nodes)
    return float(np.max(np.abs(u.values.reshape(-1)[nodes] - exact(x)), initial=0.0))
