"""Uniform Cartesian grids over boxes in R^(4n), domains and grid functions."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

EXTERIOR, BOUNDARY, INTERIOR = 0, 1, 2
MASK_NAMES = {EXTERIOR: "exterior", BOUNDARY: "boundary", INTERIOR: "interior"}
MASK_CODES = {v: k for k, v in MASK_NAMES.items()}
_CHUNK = 1 << 18


class StencilOutOfBoundsError(ValueError):
    """An interior stencil reaches past the bounding box; pad the grid."""


@dataclass(frozen=True)
class Grid:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    shape: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        sh = tuple(int(v) for v in self.shape)
        if not (len(lo) == len(hi) == len(sh)):
            raise ValueError("lower, upper and shape must have the same length")
        if len(sh) == 0 or len(sh) % 4:
            raise ValueError("grid dimension must be a positive multiple of 4")
        if any(s < 2 for s in sh) or any(b <= a for a, b in zip(lo, hi)):
            raise ValueError("degenerate grid")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "shape", sh)

    @classmethod
    def cube(cls, n: int, lower: float, upper: float, points: int) -> "Grid":
        d = 4 * n
        return cls((lower,) * d, (upper,) * d, (points,) * d)

    @classmethod
    def around(cls, domain: "Domain", points: int, pad_cells: int = 0) -> "Grid":
        """Grid on the domain's bounding box, extended by ``pad_cells`` cells."""
        lo, hi = domain.bounding_box()
        h = (hi - lo) / (points - 1)
        lo = lo - pad_cells * h
        hi = hi + pad_cells * h
        return cls(tuple(lo), tuple(hi), (points + 2 * pad_cells,) * lo.size)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def n(self) -> int:
        return self.dim // 4

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(b - a) / (s - 1) for a, b, s in zip(self.lower, self.upper, self.shape)])

    @property
    def axes(self) -> list[np.ndarray]:
        return [np.linspace(a, b, s) for a, b, s in zip(self.lower, self.upper, self.shape)]

    def coords(self, flat_index) -> np.ndarray:
        """Coordinates of nodes given by flat (C-order) indices; shape (m, dim)."""
        idx = np.unravel_index(np.asarray(flat_index), self.shape)
        return np.stack([ax[i] for ax, i in zip(self.axes, idx)], axis=-1)

    def points(self) -> np.ndarray:
        return self.coords(np.arange(self.size)).reshape(*self.shape, self.dim)


class Domain:
    """Open bounded set in R^(4n)."""

    n: int

    def contains(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def distance_to_boundary(self, x: np.ndarray) -> np.ndarray:
        """Signed distance, positive inside."""
        raise NotImplementedError

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


@dataclass(frozen=True)
class Ball(Domain):
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if len(c) % 4 or not c:
            raise ValueError("ball center must have 4n coordinates")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", c)

    @property
    def n(self) -> int:
        return len(self.center) // 4

    def distance_to_boundary(self, x):
        x = np.asarray(x, dtype=float)
        return self.radius - np.linalg.norm(x - np.asarray(self.center), axis=-1)

    def contains(self, x):
        return self.distance_to_boundary(x) > 0

    def bounding_box(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def to_config(self) -> dict:
        return {"domain": "ball", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Box(Domain):
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or len(lo) % 4 or not lo:
            raise ValueError("box bounds must have 4n coordinates each")
        if any(b <= a for a, b in zip(lo, hi)):
            raise ValueError("empty box")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def n(self) -> int:
        return len(self.lower) // 4

    def distance_to_boundary(self, x):
        x = np.asarray(x, dtype=float)
        return np.minimum(x - np.asarray(self.lower), np.asarray(self.upper) - x).min(axis=-1)

    def contains(self, x):
        return self.distance_to_boundary(x) > 0

    def bounding_box(self):
        return np.asarray(self.lower), np.asarray(self.upper)

    def to_config(self) -> dict:
        return {"domain": "box", "lower": list(self.lower), "upper": list(self.upper)}


def axis_offsets(dim: int) -> np.ndarray:
    eye = np.eye(dim, dtype=int)
    return np.concatenate([eye, -eye])


def shifted_indices(grid: Grid, flat: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Flat indices of ``node + offset`` for every node/offset pair.

    Returns an array of shape (len(flat), len(offsets)); entries whose
    target leaves the box are -1.
    """
    idx = np.stack(np.unravel_index(flat, grid.shape), axis=-1)  # (m, d)
    tgt = idx[:, None, :] + np.asarray(offsets, dtype=int)[None, :, :]
    shape = np.asarray(grid.shape)
    inside = np.all((tgt >= 0) & (tgt < shape), axis=-1)
    strides = np.cumprod((1,) + grid.shape[::-1])[:-1][::-1]
    out = np.where(inside, np.sum(np.where(tgt >= 0, tgt, 0) * strides, axis=-1), -1)
    return out


def build_mask(grid: Grid, domain: Domain, offsets: Optional[np.ndarray] = None) -> np.ndarray:
    """Interior nodes lie in the domain; boundary nodes are the remaining
    nodes reached from an interior node by one of ``offsets`` (default: the
    2 * dim axis neighbours).

    Raises
    ------
    StencilOutOfBoundsError
        If an interior stencil leaves the bounding box.
    """
    if domain.n != grid.n:
        raise ValueError("domain and grid dimensions differ")
    offsets = axis_offsets(grid.dim) if offsets is None else np.asarray(offsets, dtype=int)
    inside = np.concatenate([
        domain.contains(grid.coords(np.arange(start, min(start + _CHUNK, grid.size))))
        for start in range(0, grid.size, _CHUNK)
    ])
    mask = np.full(grid.size, EXTERIOR, dtype=np.int8)
    mask[inside] = INTERIOR
    interior = np.flatnonzero(inside)
    if interior.size == 0:
        raise ValueError("no grid node lies inside the domain")
    nb = shifted_indices(grid, interior, offsets)
    if np.any(nb < 0):
        raise StencilOutOfBoundsError("an interior stencil leaves the bounding box; pad the grid")
    reached = np.unique(nb)
    reached = reached[mask[reached] != INTERIOR]
    mask[reached] = BOUNDARY
    return mask.reshape(grid.shape)


@dataclass
class GridFunction:
    """Values on a grid together with an interior/boundary/exterior mask.

    Exterior values carry no meaning and are stored as NaN.
    """

    grid: Grid
    values: np.ndarray
    mask: np.ndarray
    domain: Optional[Domain] = field(default=None, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        self.mask = np.asarray(self.mask, dtype=np.int8).reshape(self.grid.shape)
        active = self.mask != EXTERIOR
        if not np.all(np.isfinite(self.values[active])):
            raise ValueError("grid function has non-finite values on interior/boundary nodes")

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def interior(self) -> np.ndarray:
        return self.mask == INTERIOR

    @property
    def active(self) -> np.ndarray:
        return self.mask != EXTERIOR

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy(), self.mask.copy(), self.domain)

    def same_grid(self, other: "GridFunction") -> bool:
        return self.grid == other.grid and np.array_equal(self.mask, other.mask)

    @classmethod
    def from_function(cls, grid: Grid, domain: Domain, func: Callable[[np.ndarray], np.ndarray],
                      mask: Optional[np.ndarray] = None) -> "GridFunction":
        mask = build_mask(grid, domain) if mask is None else mask
        flat_mask = np.asarray(mask).reshape(-1)
        values = np.full(grid.size, np.nan)
        act = np.flatnonzero(flat_mask != EXTERIOR)
        values[act] = np.broadcast_to(func(grid.coords(act)), act.shape)
        return cls(grid, values, mask, domain)

    # -- CSV ----------------------------------------------------------------

    def to_csv(self, path) -> None:
        """One row per node: indices, coordinates, value, mask name."""
        d = self.grid.dim
        flat = np.arange(self.grid.size)
        idx = np.stack(np.unravel_index(flat, self.grid.shape), axis=-1)
        xs = self.grid.coords(flat)
        vals = self.values.reshape(-1)
        masks = self.mask.reshape(-1)
        header = [f"index{i}" for i in range(d)] + [f"x{i}" for i in range(d)] + ["value", "mask"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in range(flat.size):
                w.writerow([*idx[r].tolist(), *(repr(float(v)) for v in xs[r]),
                            repr(float(vals[r])), MASK_NAMES[int(masks[r])]])

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        d = sum(1 for h in header if h.startswith("index"))
        if d == 0 or len(header) != 2 * d + 2:
            raise ValueError(f"{path}: unexpected CSV header")
        idx = np.array([[int(v) for v in r[:d]] for r in body])
        xs = np.array([[float(v) for v in r[d:2 * d]] for r in body])
        shape = tuple(int(m) + 1 for m in idx.max(axis=0))
        lower = [xs[idx[:, k] == 0, k][0] for k in range(d)]
        upper = [xs[idx[:, k] == shape[k] - 1, k][0] for k in range(d)]
        grid = Grid(tuple(lower), tuple(upper), shape)
        flat = np.ravel_multi_index(tuple(idx.T), shape)
        values = np.full(grid.size, np.nan)
        mask = np.full(grid.size, EXTERIOR, dtype=np.int8)
        values[flat] = [float(r[2 * d]) for r in body]
        mask[flat] = [MASK_CODES[r[2 * d + 1]] for r in body]
        return cls(grid, values, mask)


def boundary_values(gf: GridFunction) -> np.ndarray:
    return gf.values[gf.mask == BOUNDARY]


def nodes_in(grid: Grid, mask: np.ndarray, which: Iterable[int]) -> np.ndarray:
    which = list(which)
    return np.flatnonzero(np.isin(np.asarray(mask).reshape(-1), which))


def check_dimensions(n: int, values: Sequence[float], what: str) -> tuple[float, ...]:
    vals = tuple(float(v) for v in values)
    if len(vals) != 4 * n:
        raise ValueError(f"{what} needs {4 * n} coordinates, got {len(vals)}")
    return vals
