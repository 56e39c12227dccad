"""Flat JSON run configuration."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from dataclasses import field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np

from .expression import Expression, ExpressionError, parse_expression
from .grid import Ball, Box, Domain, Grid, StencilOutOfBoundsError, check_dimensions
from .regularization import InvalidRhsError, RhsFunction
from .solver import DirichletProblem, build_direction_set, problem_mask

F_SAMPLE_POINTS = 200


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    n: int = 1
    domain: str = "ball"
    center: Optional[list] = None
    radius: float = 1.0
    lower: Optional[list] = None
    upper: Optional[list] = None
    grid: int = 13
    padding: int = 0
    F: str = "8"
    g: str = "normq"
    exact: Optional[str] = None
    tol: float = 1e-6
    max_iter: int = 20000
    tau_factor: float = 0.5
    richness: int = 1
    stencil_radius: int = 1
    init: str = "g"
    threads: int = 1
    seed: int = 0
    t_range: Optional[list] = None
    output_csv: str = "solution.csv"
    output_report: str = "report.json"
    # psh-check / convolve / moore-det
    field: Optional[str] = None
    samples: int = 100
    delta: float = 0.2
    A: float = 2.0
    convolution: str = "sup"
    matrix_file: Optional[str] = None
    base_dir: Optional[str] = dc_field(default=None, repr=False, compare=False)

    @classmethod
    def from_dict(cls, data: dict, base_dir=None) -> "Config":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)} - {"base_dir"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        cfg = cls(**data)
        cfg.base_dir = None if base_dir is None else str(base_dir)
        cfg._normalize()
        return cfg

    @classmethod
    def load(cls, path) -> "Config":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from None
        return cls.from_dict(data, base_dir=path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def _normalize(self) -> None:
        try:
            self.n = _int(self.n, "n", 1)
            self.grid = _int(self.grid, "grid", 3)
            self.padding = _int(self.padding, "padding", 0)
            self.max_iter = _int(self.max_iter, "max_iter", 0)
            self.richness = _int(self.richness, "richness", 0)
            self.stencil_radius = _int(self.stencil_radius, "stencil_radius", 1)
            self.threads = _int(self.threads, "threads", 1)
            self.samples = _int(self.samples, "samples", 1)
            self.seed = _int(self.seed, "seed", 0)
            for name in ("radius", "tol", "tau_factor", "delta", "A"):
                v = float(getattr(self, name))
                if not v > 0:
                    raise ConfigError(f"{name} must be positive")
                setattr(self, name, v)
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from None
        if self.domain not in ("ball", "box"):
            raise ConfigError("domain must be 'ball' or 'box'")
        if self.convolution not in ("sup", "inf"):
            raise ConfigError("convolution must be 'sup' or 'inf'")
        if self.init not in ("g", "min-g"):
            raise ConfigError("init must be 'g' or 'min-g'")
        try:
            d = 4 * self.n
            if self.domain == "ball":
                self.center = list(check_dimensions(self.n, self.center or [0.0] * d, "center"))
            else:
                self.lower = list(check_dimensions(self.n, self.lower or [-1.0] * d, "lower"))
                self.upper = list(check_dimensions(self.n, self.upper or [1.0] * d, "upper"))
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.t_range is not None:
            if len(self.t_range) != 2 or not float(self.t_range[0]) < float(self.t_range[1]):
                raise ConfigError("t_range must be [t_min, t_max] with t_min < t_max")
            self.t_range = [float(v) for v in self.t_range]

    # -- derived objects ----------------------------------------------------

    def make_domain(self) -> Domain:
        try:
            if self.domain == "ball":
                return Ball(tuple(self.center), self.radius)
            return Box(tuple(self.lower), tuple(self.upper))
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def make_grid(self) -> Grid:
        return Grid.around(self.make_domain(), self.grid, self.padding)

    def expression(self, key: str, with_t: bool) -> Expression:
        text = getattr(self, key)
        if text is None:
            raise ConfigError(f"config key {key!r} is required")
        try:
            expr = parse_expression(str(text))
            expr.check(self.n, with_t)
        except ExpressionError as e:
            raise ConfigError(f"{key}: {e}") from None
        return expr

    def sample_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform samples from the domain (rejection from its bounding box)."""
        dom = self.make_domain()
        lo, hi = dom.bounding_box()
        out = []
        have = 0
        while have < count:
            x = rng.uniform(lo, hi, size=(4 * count, lo.size))
            x = x[dom.contains(x)]
            out.append(x)
            have += x.shape[0]
        return np.concatenate(out)[:count]

    def rhs(self) -> RhsFunction:
        """The validated right-hand side."""
        expr = self.expression("F", with_t=True)
        F = RhsFunction(expr.rhs(self.n), self.n)
        t_min, t_max = self.t_range or self._default_t_range()
        pts = self.sample_points(F_SAMPLE_POINTS, np.random.default_rng(self.seed))
        try:
            F.validate(pts, t_min, t_max, pairs=F_SAMPLE_POINTS, rng=np.random.default_rng(self.seed))
        except InvalidRhsError as e:
            raise ConfigError(f"F: {e}") from None
        return F

    def _default_t_range(self) -> tuple[float, float]:
        """Range of the boundary data, widened by 1 on each side."""
        g = self.expression("g", with_t=False)
        pts = self.sample_points(F_SAMPLE_POINTS, np.random.default_rng(self.seed))
        dom = self.make_domain()
        lo, hi = dom.bounding_box()
        vals = np.concatenate([g.evaluate(pts), g.evaluate(np.stack([lo, hi]))])
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            return -1.0, 1.0
        return float(vals.min()) - 1.0, float(vals.max()) + 1.0

    def problem(self) -> DirichletProblem:
        g = self.expression("g", with_t=False)
        exact = None if self.exact is None else self.expression("exact", with_t=False).field(self.n)
        return DirichletProblem(self.make_domain(), g.field(self.n), self.rhs(), exact)

    def directions(self):
        return build_direction_set(self.n, self.richness)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        if not p.is_absolute() and self.base_dir is not None:
            p = Path(self.base_dir) / p
        return p

    def validate(self) -> None:
        """Full lint: expressions, F admissibility and the grid/stencil fit."""
        problem = self.problem()
        if self.field is not None:
            self.expression("field", with_t=False)
        try:
            problem_mask(self.make_grid(), problem.domain, self.directions(), self.stencil_radius)
        except (StencilOutOfBoundsError, ValueError) as e:
            raise ConfigError(f"{e} (increase 'padding' or 'grid')") from None


def _int(v, name: str, minimum: int) -> int:
    if isinstance(v, bool) or not float(v).is_integer():
        raise ConfigError(f"{name} must be an integer")
    v = int(v)
    if v < minimum:
        raise ConfigError(f"{name} must be >= {minimum}")
    return v
