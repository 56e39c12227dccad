import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from quatma import hyperhermitian as hh
from quatma.hyperhermitian import HyperhermitianMatrix as HM
from quatma.quaternion import I, J, K, ONE, QPoint, Quaternion, real_embed_point

seeds = st.integers(0, 2**32 - 1)


def qmatvec(X: HM, q: QPoint) -> QPoint:
    n = X.n
    return QPoint([sum((X[j, k] * q.coords[k] for k in range(n)), Quaternion()) for j in range(n)])


def test_rejects_non_hyperhermitian():
    with pytest.raises(hh.NotHyperhermitianError):
        HM.from_quaternions([[ONE, I], [I, ONE]])
    with pytest.raises(hh.NotHyperhermitianError):
        HM.from_quaternions([[I]])


def test_embedding_symmetric(rng):
    for n in (1, 2, 3):
        M = hh.real_embed_matrix(hh.random_hyperhermitian(rng, n))
        assert np.array_equal(M, M.T)
    assert np.array_equal(hh.real_embed_matrix(HM.identity(3)), np.eye(12))


def test_embedding_matches_action(rng):
    X = HM.from_quaternions([[0, J], [-J, 0]])
    M = hh.real_embed_matrix(X)
    L = hh.left_mult_array(J.as_array())
    assert np.allclose(M[:4, 4:], L) and np.allclose(M[4:, :4], -L)
    for _ in range(10):
        q = QPoint.from_real(rng.standard_normal(8))
        assert np.allclose(M @ q.as_real(), real_embed_point(qmatvec(X, q)))
    Y = HM.from_quaternions([[0, I], [-I, 0]])
    q = QPoint([ONE, K])
    assert np.allclose(hh.real_embed_matrix(Y) @ q.as_real(), real_embed_point(qmatvec(Y, q)))
    assert np.allclose(real_embed_point(qmatvec(Y, q)), [0, 0, -1, 0, 0, -1, 0, 0])


def test_eigenvalue_examples(rng):
    assert np.allclose(hh.q_eigenvalues(HM.diagonal([3, 2])).values, [2, 3])
    assert np.allclose(hh.q_eigenvalues(HM.from_quaternions([[1, J], [-J, 1]])).values, [0, 2], atol=1e-12)
    for n in (1, 2, 3, 4):
        X = hh.random_hyperhermitian(rng, n)
        assert np.isclose(hh.q_eigenvalues(X).values.sum(), np.trace(X.entries[:, :, 0]))


def test_eigenvalue_quadruples(rng):
    X = hh.random_hyperhermitian(rng, 3)
    ev = np.linalg.eigvalsh(hh.real_embed_matrix(X))
    assert np.allclose(np.repeat(hh.q_eigenvalues(X).values, 4), ev, atol=1e-10)


def test_moore_det_examples():
    assert hh.moore_det(HM.identity(4)) == pytest.approx(1.0, abs=1e-12)
    X = HM.from_quaternions([[2, I], [-I, 3]])
    assert hh.moore_det(X) == pytest.approx(5.0, rel=1e-12)
    assert hh.moore_det_oracle(X) == pytest.approx(5.0, rel=1e-12)
    assert hh.moore_det_oracle(HM.diagonal([-3.0])) == -3.0
    assert hh.moore_det_oracle(HM.from_quaternions([[1, J], [-J, 1]])) == pytest.approx(0.0, abs=1e-14)
    # zero diagonal: oracle goes through the perturbation branch
    Z = HM.from_quaternions([[0, J], [-J, 0]])
    assert hh.moore_det_oracle(Z) == pytest.approx(-1.0, rel=1e-10)
    assert hh.moore_det(Z) == pytest.approx(-1.0, rel=1e-12)
    assert hh.moore_det(HM.identity(2) * -8.0) == pytest.approx(64.0)
    assert hh.moore_det(HM.identity(3) * -8.0) == pytest.approx(-512.0)


@given(seeds, st.integers(1, 4))
def test_oracle_equivalence(seed, n):
    X = hh.random_hyperhermitian(np.random.default_rng(seed), n)
    a, b = hh.moore_det(X), hh.moore_det_oracle(X)
    assert abs(a - b) <= 1e-9 * max(1.0, abs(b))


def test_oracle_limited_to_small_n(rng):
    with pytest.raises(ValueError):
        hh.moore_det_oracle(hh.random_hyperhermitian(rng, 5))


@given(seeds, st.integers(1, 4))
def test_permutation_invariance(seed, n):
    rng = np.random.default_rng(seed)
    X = hh.random_hyperhermitian(rng, n)
    perm = rng.permutation(n)
    assert hh.moore_det(X.permuted(perm)) == pytest.approx(hh.moore_det(X), rel=1e-9, abs=1e-9)


@given(seeds, st.integers(1, 2))
def test_transpose_has_same_det_small_n(seed, n):
    X = hh.random_hyperhermitian(np.random.default_rng(seed), n)
    assert hh.moore_det(X.transpose()) == pytest.approx(hh.moore_det(X), rel=1e-9, abs=1e-9)
    assert hh.moore_det_oracle(X.transpose()) == pytest.approx(hh.moore_det_oracle(X), rel=1e-9, abs=1e-9)


def test_transpose_changes_det_from_n3():
    # both determinant routes agree with each other but not across the transpose
    X = hh.random_hyperhermitian(np.random.default_rng(0), 3)
    T = X.transpose()
    assert hh.moore_det(X) == pytest.approx(hh.moore_det_oracle(X), rel=1e-9)
    assert hh.moore_det(T) == pytest.approx(hh.moore_det_oracle(T), rel=1e-9)
    assert abs(hh.moore_det(X) - hh.moore_det(T)) > 1.0
    # the spectra differ, not just the product
    assert not np.allclose(hh.q_eigenvalues(X).values, hh.q_eigenvalues(T).values, atol=1e-3)


@given(seeds, st.integers(1, 4))
def test_real_det_is_fourth_power(seed, n):
    X = hh.random_pd(np.random.default_rng(seed), n)
    sign, logdet = np.linalg.slogdet(hh.real_embed_matrix(X))
    assert sign > 0
    assert np.exp(logdet) == pytest.approx(hh.moore_det(X) ** 4, rel=1e-8)


@given(seeds, st.integers(1, 3))
def test_superadditive(seed, n):
    rng = np.random.default_rng(seed)
    A, B = hh.random_psd(rng, n), hh.random_psd(rng, n)
    assert hh.moore_det(A + B) >= hh.moore_det(A) + hh.moore_det(B) - 1e-9


@given(seeds, st.integers(1, 3), st.floats(0, 1))
def test_root_concave(seed, n, t):
    rng = np.random.default_rng(seed)
    A, B = hh.random_pd(rng, n), hh.random_pd(rng, n)
    lhs = hh.moore_det(A * t + B * (1 - t)) ** (1 / n)
    rhs = t * hh.moore_det(A) ** (1 / n) + (1 - t) * hh.moore_det(B) ** (1 / n)
    assert lhs >= rhs - 1e-9


def test_psd_examples():
    assert hh.is_psd(HM.identity(3))
    assert not hh.is_psd(HM.diagonal([1, -1]))
    assert hh.is_psd(HM.identity(2) * 8.0)


def test_inverse(rng):
    X = hh.random_pd(rng, 3)
    prod = hh.qmatmul(X.entries, hh.inverse(X).entries)
    eye = np.zeros_like(prod)
    eye[np.arange(3), np.arange(3), 0] = 1
    assert np.allclose(prod, eye, atol=1e-9)


def test_inf_trace_examples():
    for n in (1, 2, 4):
        value, a = hh.inf_trace_value(HM.identity(n))
        assert value == pytest.approx(1.0)
        assert np.allclose(a.entries, HM.identity(n).entries, atol=1e-12)
    X = HM.diagonal([1, 4])
    value, a = hh.inf_trace_value(X)
    assert value == pytest.approx(2.0)
    assert np.allclose(a.entries, HM.diagonal([2, 0.5]).entries, atol=1e-12)
    assert 0.5 * hh.retrace(a, X) == pytest.approx(2.0)


def test_inf_trace_lower_bound(rng):
    for n in (1, 2, 3):
        X = hh.random_pd(rng, n)
        value, a = hh.inf_trace_value(X)
        assert hh.moore_det(a) == pytest.approx(1.0, rel=1e-9)
        assert hh.retrace(a, X) / n == pytest.approx(value, rel=1e-8)
        for _ in range(200):
            b = hh.random_unit_det(rng, n)
            assert hh.retrace(b, X) / n >= value - 1e-9


def test_inf_trace_rejects_singular():
    with pytest.raises(hh.NotPositiveDefiniteError):
        hh.inf_trace_value(HM.diagonal([1, 0]))


def test_retrace_is_quarter_real_trace(rng):
    a, b = hh.random_hyperhermitian(rng, 3), hh.random_hyperhermitian(rng, 3)
    real = np.trace(hh.real_embed_matrix(a) @ hh.real_embed_matrix(b)) / 4
    assert hh.retrace(a, b) == pytest.approx(real, rel=1e-12)


def test_matrix_file_roundtrip(tmp_path, rng):
    X = hh.random_hyperhermitian(rng, 3)
    path = tmp_path / "m.txt"
    hh.write_matrix_file(path, X)
    Y = hh.read_matrix_file(path)
    assert np.array_equal(X.entries, Y.entries)


def test_matrix_file_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("2\n0 0 1 0 0 0\n")
    with pytest.raises(ValueError):
        hh.read_matrix_file(bad)
    bad.write_text("1\n0 0 1 1 0 0\n")
    with pytest.raises(hh.NotHyperhermitianError):
        hh.read_matrix_file(bad)
