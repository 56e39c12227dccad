"""Sup/inf-convolutions on grids and perturbed right-hand sides.

The sup-convolution of a bounded grid function ``f`` is

    f^delta(q) = max_{q'} f(q') - |q - q'|^2 / (2 delta^2)

over grid nodes ``q'`` of the closed domain.  When ``A^2 > 2 osc(f)`` the
maximiser lies within distance ``A delta`` of ``q``, so the scan is
restricted to that ball without changing the result.  Output is defined
on ``{q : dist(q, boundary) > A delta}``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import ndimage, optimize

from .grid import EXTERIOR, INTERIOR, GridFunction


class InvalidRhsError(ValueError):
    pass


@dataclass(frozen=True)
class RhsFunction:
    """Right-hand side F(q, t) >= 0, non-decreasing in t.

    ``func(x, t)`` receives coordinates of shape ``(..., 4n)`` and levels of
    shape ``(...)``.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    n: int

    def __call__(self, x, t) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], t.shape)
        return np.broadcast_to(np.asarray(self.func(x, t), dtype=float), shape)

    @classmethod
    def constant(cls, value: float, n: int) -> "RhsFunction":
        return cls(lambda x, t: np.full(np.broadcast_shapes(x.shape[:-1], np.shape(t)), float(value)), n)

    def validate(self, points: np.ndarray, t_min: float = -1.0, t_max: float = 1.0,
                 pairs: int = 200, rng: Optional[np.random.Generator] = None) -> None:
        """Sample non-negativity on points x [t_min, t_max] and monotonicity
        in t on ``pairs`` random (q, t1 < t2) triples."""
        rng = np.random.default_rng(0) if rng is None else rng
        points = np.asarray(points, dtype=float).reshape(-1, 4 * self.n)
        ts = np.linspace(t_min, t_max, 5)
        vals = self(points[:, None, :], ts[None, :])
        if not np.all(np.isfinite(vals)):
            raise InvalidRhsError("F is not finite on the sampled domain")
        if np.any(vals < 0):
            k = np.unravel_index(np.argmin(vals), vals.shape)
            raise InvalidRhsError(
                f"F must be nonnegative; F(q, t) = {vals[k]:.6g} at q = {points[k[0]].tolist()}, t = {ts[k[1]]:.6g}"
            )
        pick = rng.integers(0, points.shape[0], size=pairs)
        t1 = rng.uniform(t_min, t_max, size=pairs)
        t2 = t1 + rng.uniform(0.0, t_max - t_min, size=pairs)
        f1 = self(points[pick], t1)
        f2 = self(points[pick], t2)
        bad = f2 < f1 - 1e-12 * (1.0 + np.abs(f1))
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise InvalidRhsError(
                f"F must be non-decreasing in t; F(q, {t1[k]:.6g}) = {f1[k]:.6g} > F(q, {t2[k]:.6g}) = {f2[k]:.6g}"
            )


def oscillation(f: GridFunction) -> float:
    vals = f.values[f.active]
    return float(vals.max() - vals.min())


def _inner_mask(f: GridFunction, radius: float) -> np.ndarray:
    """Nodes at distance > radius from the boundary of the domain."""
    grid = f.grid
    if f.domain is not None:
        dist = f.domain.distance_to_boundary(grid.points().reshape(-1, grid.dim)).reshape(grid.shape)
    else:
        # distance to the nearest non-interior node
        dist = ndimage.distance_transform_edt(f.mask == INTERIOR, sampling=grid.spacing)
    return (dist > radius) & (f.mask == INTERIOR)


def search_offsets(spacing: np.ndarray, radius: float) -> np.ndarray:
    """Integer offsets o with |o * spacing| <= radius."""
    reach = [int(np.floor(radius / h)) for h in spacing]
    cand = np.array(list(itertools.product(*[range(-r, r + 1) for r in reach])), dtype=int)
    d2 = np.sum((cand * spacing) ** 2, axis=1)
    return cand[d2 <= radius**2]


def sup_convolution(f: GridFunction, delta: float, A: float) -> GridFunction:
    """Sup-convolution ``f^delta`` on the shrunken domain.

    Raises
    ------
    ValueError
        If ``A^2 <= 2 osc(f)`` or the shrunken domain has no grid node.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    osc = oscillation(f)
    if not A**2 > 2.0 * osc:
        raise ValueError(f"A = {A} too small: need A^2 > 2 osc(f) = {2 * osc:.6g}")
    radius = A * delta
    out_mask = _inner_mask(f, radius)
    if not out_mask.any():
        raise ValueError(f"shrunken domain is empty for A * delta = {radius:.6g}")

    grid = f.grid
    h = grid.spacing
    offsets = search_offsets(h, radius)
    reach = np.abs(offsets).max(axis=0)
    src = np.where(f.active, f.values, -np.inf)
    padded = np.pad(src, [(r, r) for r in reach], constant_values=-np.inf)
    best = np.full(grid.shape, -np.inf)
    for o in offsets:
        window = tuple(slice(r + k, r + k + s) for r, k, s in zip(reach, o, grid.shape))
        pen = np.sum((o * h) ** 2) / (2.0 * delta**2)
        np.maximum(best, padded[window] - pen, out=best)
    values = np.where(out_mask, best, np.nan)
    mask = np.where(out_mask, INTERIOR, EXTERIOR).astype(np.int8)
    return GridFunction(grid, values, mask, f.domain)


def inf_convolution(v: GridFunction, eps: float, A: float) -> GridFunction:
    """Inf-convolution ``v_eps = -((-v)^eps)``."""
    neg = GridFunction(v.grid, -v.values, v.mask, v.domain)
    out = sup_convolution(neg, eps, A)
    out.values = -out.values
    return out


def sup_convolution_bruteforce(f: GridFunction, delta: float, A: float) -> GridFunction:
    """Reference sup-convolution scanning every grid node as candidate."""
    grid = f.grid
    h = grid.spacing
    out_mask = _inner_mask(f, A * delta)
    src = np.flatnonzero(f.active.reshape(-1))
    src_idx = np.stack(np.unravel_index(src, grid.shape), axis=-1)
    src_val = f.values.reshape(-1)[src]
    values = np.full(grid.size, np.nan)
    for node in np.flatnonzero(out_mask.reshape(-1)):
        idx = np.array(np.unravel_index(node, grid.shape))
        d2 = np.sum(((src_idx - idx) * h) ** 2, axis=1)
        values[node] = np.max(src_val - d2 / (2.0 * delta**2))
    mask = np.where(out_mask, INTERIOR, EXTERIOR).astype(np.int8)
    return GridFunction(grid, values, mask, f.domain)


# -- perturbed right-hand sides -----------------------------------------------

def _ball_samples(dim: int, count: int = 64) -> np.ndarray:
    """Fixed sample of the closed unit ball: centre, axis points, and
    quasi-random directions at radii 1 and 1/2."""
    eye = np.eye(dim)
    dirs = np.random.default_rng(12345).standard_normal((count, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return np.concatenate([np.zeros((1, dim)), eye, -eye, dirs, 0.5 * dirs])


def _ball_min(F: RhsFunction, x: np.ndarray, t: float, r: float, samples: np.ndarray,
              refine: bool) -> float:
    cand = x + r * samples
    vals = F(cand, np.full(cand.shape[0], t))
    k = int(np.argmin(vals))
    best = float(vals[k])
    if not refine or r == 0:
        return best
    res = optimize.minimize(
        lambda d: float(F(x + d, t)),
        r * samples[k],
        method="SLSQP",
        constraints=[{"type": "ineq", "fun": lambda d: r**2 - d @ d, "jac": lambda d: -2.0 * d}],
        options={"ftol": 1e-14, "maxiter": 200},
    )
    d = res.x
    norm = float(np.linalg.norm(d))
    if norm > r:
        d = d * (r / norm)  # SLSQP may end marginally outside the ball
    val = float(F(x + d, t))
    if np.isfinite(val):
        best = min(best, val)
    return best


def perturbed_rhs(F: RhsFunction, delta: float, A: float, sign: str = "lower",
                  refine: bool = True) -> RhsFunction:
    """``F_delta(q, t) = inf_{|q'-q| <= A delta} F(q', t)`` (``sign='lower'``)
    or the corresponding sup (``sign='upper'``).

    The extremum over the ball is taken over a fixed sample set and then
    polished with SLSQP; the centre is always a candidate, so
    ``F_delta <= F <= F^delta`` holds exactly.
    """
    if sign not in ("lower", "upper"):
        raise ValueError("sign must be 'lower' or 'upper'")
    r = float(A * delta)
    samples = _ball_samples(4 * F.n)
    target = F if sign == "lower" else RhsFunction(lambda x, t: -F(x, t), F.n)
    flip = 1.0 if sign == "lower" else -1.0

    def func(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], t.shape)
        xb = np.broadcast_to(x, shape + (x.shape[-1],)).reshape(-1, x.shape[-1])
        tb = np.broadcast_to(t, shape).reshape(-1)
        out = np.array([_ball_min(target, xi, ti, r, samples, refine) for xi, ti in zip(xb, tb)])
        return flip * out.reshape(shape)

    return RhsFunction(func, F.n)
