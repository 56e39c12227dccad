"""Quaternion arithmetic and the identification of H^n with R^(4n).

Scalars are stored with component order (1, i, j, k).  Besides the small
immutable :class:`Quaternion` value type, the module exposes vectorised
helpers acting on float arrays whose trailing axis has length 4; the matrix
code builds on those.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# e_a * e_b = sum_c MULT[a, b, c] * e_c
MULT = np.zeros((4, 4, 4))
for (_a, _b), (_c, _s) in {
    (0, 0): (0, 1), (0, 1): (1, 1), (0, 2): (2, 1), (0, 3): (3, 1),
    (1, 0): (1, 1), (1, 1): (0, -1), (1, 2): (3, 1), (1, 3): (2, -1),
    (2, 0): (2, 1), (2, 1): (3, -1), (2, 2): (0, -1), (2, 3): (1, 1),
    (3, 0): (3, 1), (3, 1): (2, 1), (3, 2): (1, -1), (3, 3): (0, -1),
}.items():
    MULT[_a, _b, _c] = _s

_CONJ = np.array([1.0, -1.0, -1.0, -1.0])
UNITS = np.eye(4)


def qmul_array(a, b) -> np.ndarray:
    """Hamilton product of broadcastable arrays of shape (..., 4)."""
    return np.einsum("...a,...b,abc->...c", a, b, MULT)


def qconj_array(a) -> np.ndarray:
    return np.asarray(a, dtype=float) * _CONJ


def qinv_array(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return qconj_array(a) / np.sum(a * a, axis=-1, keepdims=True)


def left_mult_array(a) -> np.ndarray:
    """Matrices L with ``L @ b == a * b`` for a stack of quaternions ``a``."""
    # column t of L(a) is a * e_t
    return np.einsum("...a,atc->...ct", np.asarray(a, dtype=float), MULT)


@dataclass(frozen=True)
class Quaternion:
    """x0 + x1 i + x2 j + x3 k."""

    x0: float = 0.0
    x1: float = 0.0
    x2: float = 0.0
    x3: float = 0.0

    @classmethod
    def from_array(cls, arr: Sequence[float]) -> "Quaternion":
        x0, x1, x2, x3 = (float(v) for v in arr)
        return cls(x0, x1, x2, x3)

    def as_array(self) -> np.ndarray:
        return np.array([self.x0, self.x1, self.x2, self.x3])

    def conj(self) -> "Quaternion":
        return Quaternion(self.x0, -self.x1, -self.x2, -self.x3)

    def norm2(self) -> float:
        return self.x0**2 + self.x1**2 + self.x2**2 + self.x3**2

    def __abs__(self) -> float:
        return float(np.sqrt(self.norm2()))

    def inverse(self) -> "Quaternion":
        n2 = self.norm2()
        if n2 == 0.0:
            raise ZeroDivisionError("zero quaternion has no inverse")
        c = self.conj()
        return Quaternion(c.x0 / n2, c.x1 / n2, c.x2 / n2, c.x3 / n2)

    def __add__(self, other):
        other = _coerce(other)
        return Quaternion.from_array(self.as_array() + other.as_array())

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        return Quaternion.from_array(self.as_array() - other.as_array())

    def __rsub__(self, other):
        return _coerce(other) - self

    def __neg__(self):
        return Quaternion(-self.x0, -self.x1, -self.x2, -self.x3)

    def __mul__(self, other):
        return qmul(self, _coerce(other))

    def __rmul__(self, other):
        return qmul(_coerce(other), self)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return Quaternion.from_array(self.as_array() / other)
        return self * _coerce(other).inverse()

    def isclose(self, other, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.as_array(), _coerce(other).as_array(), rtol=0, atol=tol))


ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0)
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


def _coerce(x) -> Quaternion:
    if isinstance(x, Quaternion):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return Quaternion(float(x))
    return Quaternion.from_array(x)


def qmul(a: Quaternion, b: Quaternion) -> Quaternion:
    return Quaternion.from_array(qmul_array(a.as_array(), b.as_array()))


def left_mult_matrix(a: Quaternion) -> np.ndarray:
    """4x4 real matrix of ``b -> a*b`` in the (1, i, j, k) basis."""
    return left_mult_array(a.as_array())


@dataclass(frozen=True)
class QPoint:
    """A point of H^n."""

    coords: tuple[Quaternion, ...]

    def __init__(self, coords: Iterable[Quaternion]):
        object.__setattr__(self, "coords", tuple(_coerce(c) for c in coords))

    @property
    def n(self) -> int:
        return len(self.coords)

    @classmethod
    def from_real(cls, x: Sequence[float]) -> "QPoint":
        return real_unembed_point(x)

    def as_real(self) -> np.ndarray:
        return real_embed_point(self)


def real_embed_point(q: QPoint) -> np.ndarray:
    """x_{4j+m} is component m of q_j."""
    if not q.coords:
        return np.zeros(0)
    return np.concatenate([c.as_array() for c in q.coords])


def real_unembed_point(x: Sequence[float]) -> QPoint:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size % 4:
        raise ValueError(f"expected a vector of length 4n, got shape {x.shape}")
    return QPoint(Quaternion.from_array(x[4 * j: 4 * j + 4]) for j in range(x.size // 4))
