import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import logsumexp

from shubin import kernels
from shubin._accel import HAVE_NUMBA

BACKENDS = ["numpy"] + (["numba"] if HAVE_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def test_backends_agree_on_table():
    x = np.linspace(-35, 35, 257)
    a, fa = kernels.hermite_table(300, x, backend="numpy")
    for be in BACKENDS:
        b, fb = kernels.hermite_table(300, x, backend=be)
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-300)
        np.testing.assert_array_equal(fa, fb)


def test_project_matches_table(backend):
    x = np.linspace(-6, 6, 41)
    w = np.cos(x)
    T, _ = kernels.hermite_table(50, x, backend=backend)
    np.testing.assert_allclose(kernels.hermite_project(50, x, w, backend=backend), T.T @ w, atol=1e-14)


def test_project_complex(backend):
    x = np.linspace(-3, 3, 9)
    w = np.exp(1j * x)
    got = kernels.hermite_project(10, x, w, backend=backend)
    T, _ = kernels.hermite_table(10, x, backend=backend)
    np.testing.assert_allclose(got, T.T @ w, atol=1e-14)


def test_synthesize_matches_table(backend, rng):
    x = np.linspace(-8, 8, 33)
    c = rng.standard_normal(70)
    T, _ = kernels.hermite_table(70, x, backend=backend)
    np.testing.assert_allclose(kernels.hermite_synthesize(c, x, backend=backend), T @ c, atol=1e-13)


def test_sumsq_matches_table(backend):
    x = np.linspace(-10, 10, 21)
    T, _ = kernels.hermite_table(120, x, backend=backend)
    np.testing.assert_allclose(kernels.hermite_sumsq(120, x, backend=backend), (T ** 2).sum(1), rtol=1e-13)


@given(st.integers(0, 40), st.integers(1, 30))
def test_log_iterates_against_logsumexp(M_max, size):
    rng = np.random.default_rng(size)
    loglam = np.sort(rng.uniform(0, 6, size))
    logabs = rng.uniform(-30, 0, size)
    want = [0.5 * logsumexp(2 * M * loglam + 2 * logabs) for M in range(M_max + 1)]
    for be in BACKENDS:
        got = kernels.log_iterate_norms(loglam, logabs, M_max, backend=be)
        np.testing.assert_allclose(got, want, rtol=1e-13, atol=1e-13)


def test_log_iterates_no_overflow():
    loglam = np.log(np.array([1.0, 1e3, 1e4]))
    got = kernels.log_iterate_norms(loglam, np.zeros(3), 200)
    assert np.all(np.isfinite(got))
    assert got[-1] == pytest.approx(200 * np.log(1e4), rel=1e-12)
