import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st
from numpy.polynomial.hermite import hermgauss
from scipy.special import eval_hermite, gammaln

from shubin import errors
from shubin.hermite import (
    BasisSpec,
    derivative_matrix,
    from_tensor,
    gauss_hermite_rule,
    gaussian_coefficients_1d,
    grlex_indices,
    hermite_eval,
    hermite_values,
    monomial_matrix,
    multi_index,
    position_matrix,
    to_tensor,
)

PI_M14 = math.pi ** -0.25


def h_direct(n, x):
    """Textbook formula through scipy's Hermite polynomials (fine for moderate n, |x|)."""
    log_norm = -0.5 * (n * math.log(2.0) + gammaln(n + 1) + 0.5 * math.log(math.pi))
    return eval_hermite(n, x) * np.exp(log_norm - x * x / 2)


def quad_matrix(f, N, q=200):
    """<h_i, f(h)_j> by Gauss-Hermite quadrature; f maps (x, table) -> table."""
    rule = gauss_hermite_rule(q)
    H = hermite_values(N, rule.nodes)
    return H.T @ (rule.scaled_weights[:, None] * f(rule.nodes, H))


# --- hermite_eval ---------------------------------------------------------


def test_h0_at_origin():
    assert hermite_eval(1, 0.0)[0] == pytest.approx(0.751126, abs=1e-6)
    assert hermite_eval(1, 0.0)[0] == pytest.approx(PI_M14, rel=1e-15)


def test_h1_vanishes_at_origin():
    assert hermite_eval(2, 0.0)[1] == 0.0


def test_h2_closed_form():
    x = 1.0
    expected = PI_M14 * (2 * x * x - 1) / math.sqrt(2) * math.exp(-x * x / 2)
    assert hermite_eval(3, x)[2] == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("x", [-7.3, -1.0, 0.0, 0.4, 2.5, 6.0])
def test_matches_scipy_polynomials(x):
    got = hermite_eval(60, x)
    want = np.array([h_direct(n, x) for n in range(60)])
    np.testing.assert_allclose(got, want, rtol=1e-11, atol=1e-300)


def test_large_argument_against_mpmath():
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 40
    x, n = 30.0, 1500

    def ref(n, x):
        X = mpmath.mpf(x)
        h0 = mpmath.pi ** mpmath.mpf(-0.25) * mpmath.e ** (-X * X / 2)
        h1 = mpmath.sqrt(2) * X * h0
        for j in range(1, n):
            h0, h1 = h1, mpmath.sqrt(mpmath.mpf(2) / (j + 1)) * X * h1 - mpmath.sqrt(mpmath.mpf(j) / (j + 1)) * h0
        return float(h1)

    assert hermite_eval(n + 1, x)[n] == pytest.approx(ref(n, x), rel=1e-10)


def test_no_overflow_in_range():
    for x in (-40.0, 40.0, 39.9):
        v = hermite_eval(4096, x)
        assert np.all(np.isfinite(v))


def test_underflow_flushes_to_zero_with_flag():
    v, flushed = hermite_eval(4, 60.0, return_flag=True)
    assert flushed
    assert np.all(v == 0.0)
    v, flushed = hermite_eval(4, 1.0, return_flag=True)
    assert not flushed


def test_no_subnormals():
    v = hermite_values(200, np.linspace(-45, 45, 301))
    tiny = np.finfo(np.float64).tiny
    assert not np.any((v != 0) & (np.abs(v) < tiny))


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_nonfinite_rejected(bad):
    with pytest.raises(errors.DomainError):
        hermite_eval(3, bad)


def test_bad_N():
    with pytest.raises(errors.DomainError):
        hermite_eval(0, 0.0)


@given(st.floats(-30, 30), st.integers(2, 300))
def test_recurrence_consistency(x, N):
    """x h_j = sqrt(j/2) h_{j-1} + sqrt((j+1)/2) h_{j+1}, read off the position matrix."""
    h = hermite_eval(N + 1, x)
    X = position_matrix(N + 1).matrix.toarray()
    lhs = x * h[:N]
    rhs = (X @ h)[:N]
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.abs(h).max())


# --- quadrature -----------------------------------------------------------


def test_one_point_rule():
    r = gauss_hermite_rule(1)
    assert r.nodes.tolist() == [0.0]
    assert r.weights[0] == pytest.approx(math.sqrt(math.pi), rel=1e-15)


def test_two_point_second_moment():
    r = gauss_hermite_rule(2)
    assert abs(np.sum(r.weights * r.nodes ** 2) - math.sqrt(math.pi) / 2) < 1e-14


@pytest.mark.parametrize("q", [1, 2, 3, 7, 20, 101, 400])
def test_odd_moments_vanish(q):
    r = gauss_hermite_rule(q)
    for p in (1, 3, 5):
        assert abs(np.sum(r.weights * r.nodes ** p)) < 1e-14
    np.testing.assert_array_equal(r.nodes, -r.nodes[::-1])


@pytest.mark.parametrize("q", [5, 50, 150])
def test_against_numpy_hermgauss(q):
    x, w = hermgauss(q)
    r = gauss_hermite_rule(q)
    np.testing.assert_allclose(r.nodes, x, atol=1e-12)
    np.testing.assert_allclose(r.weights, w, rtol=1e-9, atol=1e-300)


@pytest.mark.parametrize("q", [1, 10, 200, 2000, 10_000])
def test_weights_sum_to_sqrt_pi(q):
    r = gauss_hermite_rule(q)
    assert np.sum(r.weights) == pytest.approx(math.sqrt(math.pi), rel=1e-12)


def test_exactness_degree():
    q = 6
    r = gauss_hermite_rule(q)
    assert r.degree == 2 * q - 1
    for p in range(0, 2 * q, 2):
        exact = math.gamma((p + 1) / 2)
        assert np.sum(r.weights * r.nodes ** p) == pytest.approx(exact, rel=1e-13)


def test_capability_bound():
    with pytest.raises(errors.CapabilityError):
        gauss_hermite_rule(10_001)
    with pytest.raises(errors.DomainError):
        gauss_hermite_rule(0)


@pytest.mark.parametrize("N", [16, 128, 512])
def test_orthonormality(N):
    G = quad_matrix(lambda x, H: H, N, q=N + 8)
    assert np.abs(G - np.eye(N)).max() < 1e-10


# --- position / derivative matrices -------------------------------------


def test_position_small():
    X = position_matrix(2).matrix.toarray()
    assert X[0, 1] == pytest.approx(1 / math.sqrt(2), rel=1e-15)
    assert X[1, 0] == X[0, 1]


@pytest.mark.parametrize("N", [2, 5, 64])
def test_position_symmetric(N):
    X = position_matrix(N).matrix
    assert (abs(X - X.T)).max() == 0


def test_position_against_quadrature():
    X = position_matrix(64).matrix.toarray()
    Q = quad_matrix(lambda x, H: x[:, None] * H, 64)
    assert X[3, 4] == pytest.approx(math.sqrt(2), rel=1e-15)
    assert abs(Q[3, 4] - math.sqrt(2)) < 1e-12
    assert np.abs(Q[:63, :63] - X[:63, :63]).max() < 1e-12


def test_derivative_entry_sign():
    """<h_0, D h_1> = -i <h_0, h_1'> = -i sqrt(1/2)."""
    D = derivative_matrix(2).matrix.toarray()
    assert D[0, 1] == pytest.approx(-1j / math.sqrt(2), rel=1e-15)
    assert D[1, 0] == pytest.approx(1j / math.sqrt(2), rel=1e-15)


@pytest.mark.parametrize("N", [2, 9, 100])
def test_derivative_hermitian_exact(N):
    D = derivative_matrix(N).matrix
    assert abs(D - D.conj().T).max() == 0


def test_derivative_against_quadrature():
    """D[i, j] = -i <h_i, h_j'>, with h_j' = x h_j - sqrt(2(j+1)) h_{j+1}."""
    N = 40

    def dh(x, H):
        Hp = hermite_values(N + 1, x)
        j = np.arange(N)
        return x[:, None] * H - np.sqrt(2.0 * (j + 1)) * Hp[:, 1:]

    Q = -1j * quad_matrix(dh, N)
    D = derivative_matrix(N).matrix.toarray()
    assert np.abs(Q - D).max() < 1e-12


def test_D_squared_against_quadrature():
    """-h_j'' = ((2j + 1) - x^2) h_j."""
    N = 64
    spec = BasisSpec(1, N, pad=2)
    D2 = monomial_matrix((2,), (0,), spec).matrix.toarray()
    j = np.arange(N)
    Q = quad_matrix(lambda x, H: ((2 * j + 1)[None, :] - x[:, None] ** 2) * H, N)
    assert np.abs(D2 - Q).max() < 1e-10


def test_commutator_identity():
    N = 50
    X = position_matrix(N).matrix
    D = derivative_matrix(N).matrix
    C = (D @ X - X @ D).toarray()[: N - 1, : N - 1]
    assert np.abs(C + 1j * np.eye(N - 1)).max() < 1e-13


# --- monomials --------------------------------------------------------------


def test_x_squared_is_position_squared():
    N = 12
    spec = BasisSpec(1, N, pad=2)
    X = position_matrix(N + 2).matrix
    want = (X @ X).toarray()[:N, :N]
    got = monomial_matrix((0,), (2,), spec).matrix.toarray()
    np.testing.assert_allclose(got, want, atol=1e-15)


def test_D_squared_diagonal():
    N = 20
    D2 = monomial_matrix((2,), (0,), BasisSpec(1, N, pad=2)).matrix.toarray()
    np.testing.assert_allclose(np.diag(D2).real, np.arange(N) + 0.5, rtol=1e-15)


def test_empty_monomial_2d_identity():
    M = monomial_matrix((0, 0), (0, 0), BasisSpec(2, 5))
    assert M.matrix.shape == (25, 25)
    assert abs(M.matrix - sp.identity(25)).max() == 0


def test_truncation_contamination_error():
    with pytest.raises(errors.TruncationError):
        monomial_matrix((2,), (1,), BasisSpec(1, 10, pad=2))


@given(st.integers(0, 3), st.integers(0, 3), st.integers(4, 15))
def test_parity_zeros(a, b, N):
    M = monomial_matrix((a,), (b,), BasisSpec(1, N, pad=a + b)).matrix.toarray()
    i, j = np.indices(M.shape)
    assert np.all(M[(i + j + a + b) % 2 == 1] == 0)


@given(st.integers(0, 3), st.integers(0, 3))
def test_monomial_against_dense_product(a, b):
    """x^b D^a from dense products of large uncropped D and X, then cropped."""
    N, big = 10, 40
    X = position_matrix(big).matrix.toarray()
    D = derivative_matrix(big).matrix.toarray()
    want = (np.linalg.matrix_power(X, b) @ np.linalg.matrix_power(D, a))[:N, :N]
    got = monomial_matrix((a,), (b,), BasisSpec(1, N, pad=a + b)).toarray()
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_two_dimensional_monomial_is_kron():
    N = 6
    spec = BasisSpec(2, N, pad=2)
    M = monomial_matrix((1, 0), (0, 1), spec).toarray()
    D = monomial_matrix((1,), (0,), BasisSpec(1, N, pad=2)).toarray()
    X = monomial_matrix((0,), (1,), BasisSpec(1, N, pad=2)).toarray()
    K = np.kron(D, X)
    idx = grlex_indices(2, N)
    flat = idx[:, 0] * N + idx[:, 1]
    np.testing.assert_allclose(M, K[np.ix_(flat, flat)], atol=1e-15)


def test_three_dimensional_matrix_free():
    spec = BasisSpec(3, 4, pad=2)
    M = monomial_matrix((2, 0, 0), (0, 0, 0), spec)
    assert M.matrix is None
    v = np.zeros(spec.size)
    v[0] = 1.0
    out = M.apply(v)
    assert out[0] == pytest.approx(0.5)


# --- enumeration and closed forms --------------------------------------------


def test_grlex_order():
    idx = grlex_indices(2, 3)
    assert idx[:4].tolist() == [[0, 0], [0, 1], [1, 0], [0, 2]]
    deg = idx.sum(axis=1)
    assert np.all(np.diff(deg) >= 0)


@given(st.integers(1, 3), st.integers(1, 5))
def test_tensor_roundtrip(n, N):
    v = np.arange(N ** n, dtype=float)
    assert np.array_equal(from_tensor(to_tensor(v, n, N), n, N), v)


def test_multi_index_validation():
    assert multi_index([1, 2]) == (1, 2)
    with pytest.raises(errors.DomainError):
        multi_index([-1])
    with pytest.raises(errors.DomainError):
        multi_index([1], n=2)


@pytest.mark.parametrize("width", [0.5, 1.0, math.sqrt(2.0), 3.0])
def test_gaussian_coefficients_against_quadrature(width):
    N = 80
    rule = gauss_hermite_rule(400)
    H = hermite_values(N, rule.nodes)
    q = H.T @ (rule.scaled_weights * np.exp(-rule.nodes ** 2 / width ** 2))
    np.testing.assert_allclose(gaussian_coefficients_1d(N, width), q, rtol=1e-12, atol=1e-13)


def test_gaussian_coefficients_of_h0():
    c = gaussian_coefficients_1d(10, math.sqrt(2.0))
    assert c[0] == pytest.approx(math.pi ** 0.25, rel=1e-15)
    assert np.abs(c[1:]).max() < 1e-15
