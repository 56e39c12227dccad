"""Quaternionic Hessians, the operators Delta_a and related inequalities.

With ``dbar_j = d/dx_{4j} + i d/dx_{4j+1} + j d/dx_{4j+2} + k d/dx_{4j+3}``
(units on the left) and ``d_j f = f_{x_{4j}} - f_{x_{4j+1}} i - ...``
(units on the right), the quaternionic Hessian entry is

    H[j, k] = d_j (dbar_k u) = sum_{s,t} e_t conj(e_s) u_{x_{4j+s} x_{4k+t}},

so ``H(|q|^2) = 8 Id``.  The transpose ``[d^2 u / dqbar_j dq_k] = H^T`` is
the matrix paired with ``a`` in ``Delta_a`` and in the real-trace identity
``Re Tr(a H^T) = Tr(a^R D^2 u)``.

For n <= 2 the Moore determinants of H and H^T agree.  From n = 3 on they
differ in general (a transposed hyperhermitian matrix has a different
spectrum), so the Bellman form built from ``Delta_a`` represents
``det(H^T)``; ``ma_det`` keeps ``det(H)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .hyperhermitian import (
    HyperhermitianMatrix,
    is_psd,
    moore_det,
    q_eigenvalues,
    real_embed_matrix,
    retrace,
)
from .quaternion import MULT, QPoint, qconj_array

ROUTE_TOL = 1e-8
SMOOTHNESS_TOL = 1e-6

# _HESS_WEIGHTS[s, t] = components of e_t * conj(e_s)
_HESS_WEIGHTS = np.einsum("tb,sa,bac->stc", np.eye(4), qconj_array(np.eye(4)), MULT)


class InsufficientSmoothnessError(ArithmeticError):
    pass


class RouteMismatchError(ArithmeticError):
    """The quaternionic-trace and real-trace evaluations of Delta_a disagree."""


class NumericalDegeneracyError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ScalarField:
    """Real function on H^n given in the 4n real coordinates.

    ``func`` takes an array of shape ``(..., 4n)`` and returns ``(...)``.
    ``real_hessian``, when given, returns the exact 4n x 4n Hessian at a
    point and is used instead of finite differences.
    """

    func: Callable[[np.ndarray], np.ndarray]
    n: int
    real_hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, x) -> np.ndarray:
        return self.func(np.asarray(x, dtype=float))

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return self.combine(1.0, other, 1.0)

    def scaled(self, alpha: float) -> "ScalarField":
        hess = None
        if self.real_hessian is not None:
            hess = lambda x: alpha * self.real_hessian(x)  # noqa: E731
        return ScalarField(lambda x: alpha * self.func(x), self.n, hess)

    def combine(self, alpha: float, other: "ScalarField", beta: float) -> "ScalarField":
        if other.n != self.n:
            raise ValueError("fields live on different spaces")
        hess = None
        if self.real_hessian is not None and other.real_hessian is not None:
            hess = lambda x: alpha * self.real_hessian(x) + beta * other.real_hessian(x)  # noqa: E731
        return ScalarField(lambda x: alpha * self.func(x) + beta * other.func(x), self.n, hess)


@dataclass(frozen=True)
class QuadraticField(ScalarField):
    """u(x) = x^T P x / 2 + b.x + c with constant real Hessian P."""

    func: Callable = field(init=False, repr=False)
    n: int = field(init=False)
    real_hessian: Callable = field(init=False, repr=False)
    P: np.ndarray = None
    b: np.ndarray = None
    c: float = 0.0

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] % 4:
            raise ValueError("P must be a 4n x 4n matrix")
        P = 0.5 * (P + P.T)
        b = np.zeros(P.shape[0]) if self.b is None else np.asarray(self.b, dtype=float)
        c = float(self.c)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "n", P.shape[0] // 4)
        object.__setattr__(
            self, "func", lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, P, x) + x @ b + c
        )
        object.__setattr__(self, "real_hessian", lambda x: P.copy())


def norm_squared_field(n: int, scale: float = 1.0) -> QuadraticField:
    """``scale * |q|^2``."""
    return QuadraticField(P=2.0 * scale * np.eye(4 * n))


def _as_real(q, n: int) -> np.ndarray:
    x = q.as_real() if isinstance(q, QPoint) else np.asarray(q, dtype=float)
    if x.shape != (4 * n,):
        raise ValueError(f"point has shape {x.shape}, expected ({4 * n},)")
    return x


def default_step(x: np.ndarray) -> float:
    return 1e-4 * (1.0 + float(np.linalg.norm(x)))


def fd_real_hessian(u: ScalarField, x: np.ndarray, h: float | None = None) -> np.ndarray:
    """Central-difference real Hessian (symmetric by construction)."""
    x = np.asarray(x, dtype=float)
    d = x.size
    h = default_step(x) if h is None else float(h)
    eye = np.eye(d) * h
    # all stencil points in one vectorised call
    iu, ju = np.triu_indices(d, 1)
    pts = [x[None, :], x + eye, x - eye]
    pp = x + eye[iu] + eye[ju]
    pm = x + eye[iu] - eye[ju]
    mp = x - eye[iu] + eye[ju]
    mm = x - eye[iu] - eye[ju]
    vals = np.asarray(u(np.concatenate(pts + [pp, pm, mp, mm])), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("field evaluated to a non-finite value near the point")
    f0 = vals[0]
    fp, fm = vals[1:1 + d], vals[1 + d:1 + 2 * d]
    off = 1 + 2 * d
    m = iu.size
    vpp, vpm, vmp, vmm = (vals[off + r * m: off + (r + 1) * m] for r in range(4))
    H = np.empty((d, d))
    H[np.arange(d), np.arange(d)] = (fp - 2.0 * f0 + fm) / h**2
    mixed = (vpp - vpm - vmp + vmm) / (4.0 * h**2)
    H[iu, ju] = mixed
    H[ju, iu] = mixed
    return H


def real_hessian(u: ScalarField, q, h: float | None = None) -> np.ndarray:
    x = _as_real(q, u.n)
    if u.real_hessian is not None and h is None:
        D = np.asarray(u.real_hessian(x), dtype=float)
        if not np.all(np.isfinite(D)):
            raise ValueError("analytic Hessian is not finite")
        return 0.5 * (D + D.T)
    return fd_real_hessian(u, x, h)


def quaternionic_from_real(D: np.ndarray) -> np.ndarray:
    """Raw ``(n, n, 4)`` array of ``[d^2 u / dq_j dqbar_k]`` from the real Hessian."""
    D = np.asarray(D, dtype=float)
    n = D.shape[0] // 4
    return np.einsum("jskt,stc->jkc", D.reshape(n, 4, n, 4), _HESS_WEIGHTS)


def hessian_from_real(D: np.ndarray) -> HyperhermitianMatrix:
    a = quaternionic_from_real(D)
    scale = float(np.max(np.abs(a), initial=0.0))
    sym = HyperhermitianMatrix(a, symmetrize=True)
    defect = float(np.max(np.abs(a - sym.entries), initial=0.0))
    if defect > SMOOTHNESS_TOL * (1.0 + scale):
        raise InsufficientSmoothnessError(f"Hessian asymmetry {defect:.3e}")
    return sym


def quaternionic_hessian(u: ScalarField, q, h: float | None = None) -> HyperhermitianMatrix:
    """The quaternionic Hessian ``[d^2 u / dq_j dqbar_k]`` at ``q``.

    Uses the analytic real Hessian when the field carries one and ``h`` is
    not given; otherwise central differences with step ``h`` (default
    ``1e-4 * (1 + |q|)``).
    """
    return hessian_from_real(real_hessian(u, q, h))


def conjugate_hessian(u: ScalarField, q, h: float | None = None) -> HyperhermitianMatrix:
    """``[d^2 u / dqbar_j dq_k]``, the transpose of :func:`quaternionic_hessian`."""
    return quaternionic_hessian(u, q, h).transpose()


def ma_det(u: ScalarField, q, h: float | None = None) -> float:
    """Quaternionic Monge-Ampere operator det(u) at q."""
    return moore_det(quaternionic_hessian(u, q, h))


@dataclass(frozen=True)
class DeltaRoutes:
    quaternionic: float
    real: float


def delta_a_routes(u: ScalarField, a: HyperhermitianMatrix, q, h: float | None = None) -> DeltaRoutes:
    D = real_hessian(u, q, h)
    Q = hessian_from_real(D).transpose()
    return DeltaRoutes(
        quaternionic=0.5 * retrace(a, Q),
        real=0.5 * float(np.sum(real_embed_matrix(a) * D)),
    )


def delta_a(u: ScalarField, a: HyperhermitianMatrix, q, h: float | None = None) -> float:
    """``Delta_a u(q) = Re Tr(a [d^2u/dqbar_j dq_k]) / 2``.

    Evaluated both as a quaternionic trace and as ``Tr(a^R D^2 u) / 2``; a
    disagreement beyond ``1e-8 * (1 + |value|)`` raises
    :class:`RouteMismatchError`.
    """
    if not is_psd(a):
        raise ValueError("coefficient matrix a must be positive semidefinite")
    r = delta_a_routes(u, a, q, h)
    if abs(r.quaternionic - r.real) > ROUTE_TOL * (1.0 + abs(r.real)):
        raise RouteMismatchError(f"Delta_a routes disagree: {r.quaternionic!r} vs {r.real!r}")
    return r.real


@dataclass(frozen=True)
class PSHResult:
    ok: bool
    witness: Optional[np.ndarray] = None
    min_eigenvalue: float = float("nan")

    def __bool__(self) -> bool:
        return self.ok


def psh_check(u: ScalarField, sample_points: Sequence, tol: float = 1e-6,
              h: float | None = None) -> PSHResult:
    """Check that the quaternionic Hessian is PSD at every sample point.

    On success ``min_eigenvalue`` is the smallest eigenvalue seen; on
    failure ``witness`` is the first offending point.
    """
    lowest = float("inf")
    for q in sample_points:
        x = _as_real(q, u.n)
        lam = float(q_eigenvalues(quaternionic_hessian(u, x, h)).values[0])
        lowest = min(lowest, lam)
        if lam < -tol:
            return PSHResult(False, x.copy(), lam)
    return PSHResult(True, None, lowest)


def det_inequality_gap(u: ScalarField, q, h: float | None = None) -> tuple[float, float]:
    """Return ``(det(Q)^(1/n), 4 * det_R(D^2 u)^(1/(4n)))`` with
    ``Q = [d^2 u / dqbar_j dq_k]``.

    For PSH u the first member dominates the second.  Q is the transpose of
    the quaternionic Hessian; the two share a determinant for n <= 2 only.
    """
    D = real_hessian(u, q, h)
    n = u.n
    md = moore_det(hessian_from_real(D).transpose())
    if md < 0:
        raise NumericalDegeneracyError("Moore determinant is negative; u is not PSH at q")
    sign, logdet = np.linalg.slogdet(D)
    if sign < 0:
        raise NumericalDegeneracyError("real Hessian has negative determinant")
    rhs = 0.0 if sign == 0 else 4.0 * float(np.exp(logdet / (4 * n)))
    return float(md ** (1.0 / n)), rhs
