"""Hyperhermitian matrices and the Moore determinant.

A quaternionic matrix is stored as a float array of shape ``(n, n, 4)``.
The Moore determinant is computed from the spectrum of the real
``4n x 4n`` embedding, whose eigenvalues are the quaternionic eigenvalues
repeated four times each.  :func:`moore_det_oracle` evaluates the same
quantity by Schur-complement recursion and serves as an independent check.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .quaternion import MULT, UNITS, Quaternion, left_mult_array, qconj_array, qmul_array

HERMITIAN_TOL = 1e-10
GROUPING_TOL = 1e-8
PIVOT_TOL = 1e-12
PERTURBATION = 1e-8


class NotHyperhermitianError(ValueError):
    pass


class EigenGroupingError(ArithmeticError):
    """Eigenvalues of the real embedding do not split into quadruples."""


class NotPositiveDefiniteError(ValueError):
    pass


def conj_transpose(a: np.ndarray) -> np.ndarray:
    return qconj_array(np.swapaxes(a, 0, 1))


def qmatmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of quaternionic matrices of shapes (n, m, 4) and (m, p, 4)."""
    return np.einsum("ija,jkb,abc->ikc", a, b, MULT)


def hermitian_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - conj_transpose(a)), initial=0.0))


class HyperhermitianMatrix:
    """n x n quaternionic matrix with ``a[j, k] == conj(a[k, j])``.

    Parameters
    ----------
    entries : array_like, shape (n, n, 4)
    symmetrize : bool
        Replace the input by ``(A + A*) / 2`` before validation.  Used for
        matrices assembled from rounded data (finite differences, inverses).
    """

    __slots__ = ("entries",)

    def __init__(self, entries, symmetrize: bool = False):
        a = np.array(entries, dtype=float)
        if a.ndim != 3 or a.shape[0] != a.shape[1] or a.shape[2] != 4:
            raise ValueError(f"expected shape (n, n, 4), got {a.shape}")
        if symmetrize:
            a = 0.5 * (a + conj_transpose(a))
        scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
        defect = hermitian_defect(a)
        if defect > HERMITIAN_TOL * scale:
            raise NotHyperhermitianError(f"matrix is not hyperhermitian (defect {defect:.3e})")
        # make the structure exact
        a = 0.5 * (a + conj_transpose(a))
        a.setflags(write=False)
        self.entries = a

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, n: int) -> "HyperhermitianMatrix":
        a = np.zeros((n, n, 4))
        a[np.arange(n), np.arange(n), 0] = 1.0
        return cls(a)

    @classmethod
    def diagonal(cls, values) -> "HyperhermitianMatrix":
        values = np.asarray(values, dtype=float)
        a = np.zeros((values.size, values.size, 4))
        a[np.arange(values.size), np.arange(values.size), 0] = values
        return cls(a)

    @classmethod
    def from_quaternions(cls, rows) -> "HyperhermitianMatrix":
        a = np.array([[_as_components(x) for x in row] for row in rows], dtype=float)
        return cls(a)

    def __getitem__(self, idx) -> Quaternion:
        j, k = idx
        return Quaternion.from_array(self.entries[j, k])

    def __add__(self, other: "HyperhermitianMatrix") -> "HyperhermitianMatrix":
        return HyperhermitianMatrix(self.entries + other.entries)

    def __sub__(self, other: "HyperhermitianMatrix") -> "HyperhermitianMatrix":
        return HyperhermitianMatrix(self.entries - other.entries)

    def __mul__(self, c: float) -> "HyperhermitianMatrix":
        return HyperhermitianMatrix(self.entries * float(c))

    __rmul__ = __mul__

    def transpose(self) -> "HyperhermitianMatrix":
        """Plain (non-conjugating) transpose; again hyperhermitian."""
        return HyperhermitianMatrix(np.swapaxes(self.entries, 0, 1))

    def permuted(self, perm) -> "HyperhermitianMatrix":
        perm = np.asarray(perm)
        return HyperhermitianMatrix(self.entries[np.ix_(perm, perm)])

    def scale(self) -> float:
        return float(np.max(np.abs(self.entries), initial=0.0))

    def __repr__(self) -> str:
        return f"HyperhermitianMatrix(n={self.n})"


def _as_components(x) -> np.ndarray:
    if isinstance(x, Quaternion):
        return x.as_array()
    if np.isscalar(x):
        return np.array([float(x), 0.0, 0.0, 0.0])
    return np.asarray(x, dtype=float)


def _entries(X) -> np.ndarray:
    return X.entries if isinstance(X, HyperhermitianMatrix) else HyperhermitianMatrix(X).entries


def real_embed_quaternionic(a: np.ndarray) -> np.ndarray:
    """Real matrix of ``q -> A q`` for any quaternionic matrix array."""
    n, m = a.shape[:2]
    blocks = left_mult_array(a)  # (n, m, 4, 4)
    return blocks.transpose(0, 2, 1, 3).reshape(4 * n, 4 * m)


def real_embed_matrix(X) -> np.ndarray:
    """The real symmetric 4n x 4n matrix with ``(Xq)^R = X^R q^R``."""
    return real_embed_quaternionic(_entries(X))


def real_unembed_matrix(M: np.ndarray) -> np.ndarray:
    """Orthogonal projection of a real 4n x 4n matrix onto embedded
    quaternionic matrices; returns the ``(n, n, 4)`` array."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0] // 4
    blocks = M.reshape(n, 4, n, 4).transpose(0, 2, 1, 3)
    basis = left_mult_array(UNITS)  # L(e_m), pairwise orthogonal, |L(e_m)|_F^2 = 4
    return np.einsum("jkst,mst->jkm", blocks, basis) / 4.0


@dataclass(frozen=True)
class QEigenSpectrum:
    values: np.ndarray  # ascending

    def __len__(self) -> int:
        return self.values.size


def q_eigenvalues(X) -> QEigenSpectrum:
    """Quaternionic eigenvalues via the real embedding.

    The 4n sorted eigenvalues of ``X^R`` are grouped into consecutive
    quadruples; each group must be tight to ``1e-8 * (1 + |X|)``.
    """
    a = _entries(X)
    ev = np.linalg.eigvalsh(real_embed_quaternionic(a))
    groups = ev.reshape(-1, 4)
    scale = float(np.max(np.abs(ev), initial=0.0))
    spread = float(np.max(groups[:, 3] - groups[:, 0], initial=0.0))
    if spread > GROUPING_TOL * (1.0 + scale):
        raise EigenGroupingError(f"eigenvalue quadruple spread {spread:.3e} too large")
    return QEigenSpectrum(groups.mean(axis=1))


def moore_det(X) -> float:
    """Moore determinant as the product of the quaternionic eigenvalues.

    Falls back to :func:`moore_det_oracle` when the spectrum cannot be
    grouped and ``n <= 4``.
    """
    a = _entries(X)
    try:
        return float(np.prod(q_eigenvalues(a).values))
    except EigenGroupingError:
        if a.shape[0] <= 4:
            return moore_det_oracle(a)
        raise


def moore_det_oracle(X) -> float:
    """Moore determinant by Schur-complement recursion.

    ``det A = a11 * det(A22 - A21 a11^{-1} A12)``; valid because the pivot
    ``a11`` is real.  The largest diagonal entry is used as pivot.  When all
    diagonal entries vanish the determinant is extrapolated linearly from
    ``det(A + eps I)`` and ``det(A + 2 eps I)``.
    """
    a = _entries(X)
    if a.shape[0] > 4:
        raise ValueError("the Schur oracle is restricted to n <= 4")
    return _schur_det(a.copy())


def _schur_det(a: np.ndarray) -> float:
    n = a.shape[0]
    if n == 0:
        return 1.0
    diag = a[np.arange(n), np.arange(n), 0]
    p = int(np.argmax(np.abs(diag)))
    if abs(diag[p]) < PIVOT_TOL:
        if not np.any(a):
            return 0.0
        eps = PERTURBATION * float(np.max(np.abs(a)))
        shift = np.zeros_like(a)
        shift[np.arange(n), np.arange(n), 0] = eps
        return 2.0 * _schur_det(a + shift) - _schur_det(a + 2.0 * shift)
    if n == 1:
        return float(a[0, 0, 0])
    order = [p] + [i for i in range(n) if i != p]
    a = a[np.ix_(order, order)]
    pivot = a[0, 0, 0]
    col = a[1:, 0]  # A21
    row = a[0, 1:]  # A12
    update = qmul_array(col[:, None, :], row[None, :, :]) / pivot
    return float(pivot) * _schur_det(a[1:, 1:] - update)


def is_psd(X, tol: float = 1e-10) -> bool:
    return bool(q_eigenvalues(X).values[0] >= -tol)


def retrace(a, b) -> float:
    """Re Tr(a b) for quaternionic matrices."""
    a = _raw(a)
    b = _raw(b)
    return float(np.einsum("jkx,kjy,xy->", a, b, MULT[:, :, 0]))


def _raw(x) -> np.ndarray:
    return x.entries if isinstance(x, HyperhermitianMatrix) else np.asarray(x, dtype=float)


def inverse(X) -> HyperhermitianMatrix:
    """Inverse computed in the real embedding and projected back."""
    a = _entries(X)
    inv = np.linalg.inv(real_embed_quaternionic(a))
    return HyperhermitianMatrix(real_unembed_matrix(inv), symmetrize=True)


def inf_trace_value(X) -> tuple[float, HyperhermitianMatrix]:
    """Minimise (1/n) Re Tr(aX) over positive a with det a >= 1.

    The minimum is ``det(X)^(1/n)``, attained at ``a* = det(X)^(1/n) X^{-1}``.

    Raises
    ------
    NotPositiveDefiniteError
        If X is singular or indefinite.
    """
    a = _entries(X)
    n = a.shape[0]
    lam = q_eigenvalues(a).values
    if lam[0] <= PIVOT_TOL * max(1.0, float(lam[-1])):
        raise NotPositiveDefiniteError(f"matrix is not positive definite (min eigenvalue {lam[0]:.3e})")
    value = float(np.exp(np.mean(np.log(lam))))
    minimizer = inverse(a) * value
    return value, minimizer


# -- random generation (tests, property suites) ---------------------------

def random_quaternionic(rng: np.random.Generator, n: int, m: int | None = None) -> np.ndarray:
    return rng.standard_normal((n, n if m is None else m, 4))


def random_hyperhermitian(rng: np.random.Generator, n: int) -> HyperhermitianMatrix:
    a = random_quaternionic(rng, n)
    return HyperhermitianMatrix(a, symmetrize=True)


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> HyperhermitianMatrix:
    """M* M for a random n x rank quaternionic M (rank defaults to n)."""
    m = random_quaternionic(rng, rank or n, n)
    return HyperhermitianMatrix(qmatmul(conj_transpose(m), m), symmetrize=True)


def random_pd(rng: np.random.Generator, n: int, shift: float = 0.1) -> HyperhermitianMatrix:
    p = random_psd(rng, n)
    return p + HyperhermitianMatrix.identity(n) * shift


def random_unit_det(rng: np.random.Generator, n: int) -> HyperhermitianMatrix:
    a = random_pd(rng, n)
    return a * (moore_det(a) ** (-1.0 / n))


# -- matrix files ------------------------------------------------------------

def read_matrix_file(path) -> HyperhermitianMatrix:
    """Plain text: first line n, then n^2 lines ``row col x0 x1 x2 x3``.

    Indices are 0-based.
    """
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    n = int(lines[0][0])
    if len(lines) - 1 != n * n:
        raise ValueError(f"{path}: expected {n * n} entry lines, found {len(lines) - 1}")
    a = np.full((n, n, 4), np.nan)
    for lineno, parts in enumerate(lines[1:], start=2):
        if len(parts) != 6:
            raise ValueError(f"{path}:{lineno}: expected 'row col x0 x1 x2 x3'")
        r, c = int(parts[0]), int(parts[1])
        if not (0 <= r < n and 0 <= c < n):
            raise ValueError(f"{path}:{lineno}: index ({r}, {c}) out of range")
        a[r, c] = [float(v) for v in parts[2:]]
    if np.isnan(a).any():
        raise ValueError(f"{path}: missing entries")
    return HyperhermitianMatrix(a)


def write_matrix_file(path, X) -> None:
    a = _entries(X)
    n = a.shape[0]
    out = [str(n)]
    for r in range(n):
        for c in range(n):
            out.append(f"{r} {c} " + " ".join(repr(float(v)) for v in a[r, c]))
    Path(path).write_text("\n".join(out) + "\n")
