import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shubin import errors
from shubin.hermite import BasisSpec
from shubin.operators import ShubinOperator, Term, assemble, model_operator, parse_operator
from shubin import spectral as sc

from conftest import converged


def test_weyl_exponent_values():
    assert sc.weyl_exponent(1, 2, 2) == 1
    assert sc.weyl_exponent(1, 2, 4) == pytest.approx(4 / 3)
    assert sc.weyl_exponent(2, 2, 2) == pytest.approx(0.5)


# --- eigendecompose --------------------------------------------------------------


def test_harmonic_eigenpairs():
    P = model_operator(1, 2, 2)
    dec = sc.eigendecompose(assemble(P, BasisSpec(1, 40, pad=2)), 30)
    np.testing.assert_allclose(dec.eigenvalues, 2 * np.arange(30) + 1, rtol=1e-13)
    assert dec.J_trusted == 30
    np.testing.assert_allclose(np.abs(dec.eigenvectors), np.eye(40)[:, :30], atol=1e-12)


def test_orthonormal_trusted_vectors():
    P = model_operator(1, 2, 4)
    dec = sc.eigendecompose(assemble(P, BasisSpec(1, 256, pad=4)), 80)
    V = dec.trusted_eigenvectors
    assert np.abs(V.conj().T @ V - np.eye(V.shape[1])).max() < 1e-10
    assert np.all(dec.residuals[: dec.J_trusted] <= 1e-8 * np.maximum(1, dec.trusted_eigenvalues))
    assert dec.trusted_eigenvalues[-1] >= dec.trusted_eigenvalues[0]


def test_sign_convention_deterministic():
    P = model_operator(1, 2, 4)
    A = assemble(P, BasisSpec(1, 128, pad=4))
    d1, d2 = sc.eigendecompose(A, 20), sc.eigendecompose(A, 20)
    assert np.array_equal(d1.eigenvectors, d2.eigenvectors)
    V = d1.eigenvectors
    top = np.abs(V).argmax(axis=0)
    assert np.all(V[top, np.arange(V.shape[1])].real > 0)


def test_defect_gate():
    P = ShubinOperator(1, 2, 2, (Term((2,), (0,), 1.0), Term((0,), (2,), 1.0), Term((1,), (1,), 1.0)))
    with pytest.raises(errors.HermitianDefectError):
        sc.eigendecompose(assemble(P, BasisSpec(1, 20, pad=2)), 5)


def test_J_too_large():
    A = assemble(model_operator(1, 2, 2), BasisSpec(1, 10, pad=2))
    with pytest.raises(errors.CapabilityError):
        sc.eigendecompose(A, 11)


def test_two_dimensional_degeneracies():
    P = model_operator(2, 2, 2)
    dec = sc.eigendecompose(assemble(P, BasisSpec(2, 12, pad=2)), 21)
    want = np.repeat(2.0 * np.arange(1, 7), np.arange(1, 7))
    np.testing.assert_allclose(dec.eigenvalues, want, rtol=1e-12)


# --- convergence study ------------------------------------------------------------


def test_convergence_study_records_history():
    spec, dec = converged(1, 2, 4, 60, 1e-10)
    Ns = [N for N, _ in dec.history]
    assert Ns == sorted(Ns) and Ns[-1] == spec.N
    assert all(b == 2 * a for a, b in zip(Ns, Ns[1:]))
    assert dec.J_trusted == 60


@pytest.mark.parametrize("n,m,k,J", [(1, 2, 2, 50), (1, 2, 4, 50), (1, 4, 2, 50), (2, 2, 2, 40)])
def test_monotone_under_nesting(n, m, k, J):
    """Min-max: lambda_j(N) does not increase when the Galerkin space grows."""
    P = model_operator(n, m, k)
    prev = None
    for N in ((16, 32, 64) if n == 2 else (64, 128, 256, 512, 1024, 2048)):
        lam = sc.eigendecompose(assemble(P, BasisSpec(n, N, pad=P.axis_order)), J).eigenvalues
        if prev is not None:
            assert np.all(lam <= prev * (1 + 1e-12))
        prev = lam


def test_monotone_under_nesting_sextic():
    """For k = 6 the matrix norm grows like N^3, so the slack is the backward error eps |A|."""
    P = model_operator(1, 2, 6)
    prev = None
    for N in (64, 128, 256, 512, 1024, 2048):
        A = assemble(P, BasisSpec(1, N, pad=6))
        lam = sc.eigendecompose(A, 40).eigenvalues
        slack = 64 * np.finfo(float).eps * abs(A.matrix).max()
        if prev is not None:
            assert np.all(lam <= prev * (1 + 1e-12) + slack)
        prev = lam


def test_nonconvergence_carries_spectra():
    with pytest.raises(errors.NonConvergenceError) as exc:
        sc.convergence_study(model_operator(1, 2, 4), 100, max_N=256)
    assert exc.value.exit_code == 3
    assert len(exc.value.spectra) == 2


def test_not_elliptic_gate():
    P = parse_operator("shubin n=1 m=2 k=2\nterm alpha=2 beta=0 re=1 im=0\nterm alpha=0 beta=2 re=-1 im=0\n")
    with pytest.raises(errors.NotEllipticError) as exc:
        sc.convergence_study(P, 5)
    assert exc.value.exit_code == 2
    assert exc.value.report.verdict == "not elliptic"


# --- Weyl fits ----------------------------------------------------------------------


def test_weyl_default_window(h22_400):
    fit = sc.weyl_fit(h22_400)
    assert fit.window == (50, 300)
    assert fit.exponent_theory == 1
    assert np.isfinite(fit.residual)


@pytest.mark.parametrize("fixture", ["h22_400", "h24_400"])
def test_weyl_window_stability(fixture, request):
    dec = request.getfixturevalue(fixture)
    base = sc.weyl_fit(dec, (50, 300)).exponent_hat
    shift = (300 - 50) // 4
    moved = sc.weyl_fit(dec, (50 + shift, 300 + shift)).exponent_hat
    assert abs(moved - base) < 0.02


def test_weyl_window_bounds(h22_400):
    with pytest.raises(errors.DomainError):
        sc.weyl_fit(h22_400, (0, 100))
    with pytest.raises(errors.DomainError):
        sc.weyl_fit(h22_400, (10, 401))
    with pytest.raises(errors.DomainError):
        sc.weyl_fit(h22_400, (10, 15))


# --- spectral calculus ----------------------------------------------------------


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_power_additivity(r1, r2):
    dec = converged(1, 2, 4, 60, 1e-10)[1]
    u = np.exp(-0.3 * np.arange(60)) * np.cos(np.arange(60))
    lhs = sc.spectral_power(dec, r1, sc.spectral_power(dec, r2, u)).values
    rhs = sc.spectral_power(dec, r1 + r2, u).values
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=0)


def test_power_zero_is_identity(h24_small):
    u = np.linspace(1, 2, 60)
    np.testing.assert_array_equal(sc.spectral_power(h24_small, 0, u).values, u)


def test_power_beyond_trusted(h24_small):
    u = np.zeros(70)
    u[65] = 1
    with pytest.raises(errors.TruncationError):
        sc.spectral_power(h24_small, 1, u)


def test_sobolev_norm_is_power_norm(h24_small):
    u = np.exp(-0.2 * np.arange(60))
    s = 3.0
    want = np.linalg.norm(sc.spectral_power(h24_small, s / 4, u).values)
    assert sc.sobolev_norm(h24_small, u, s) == pytest.approx(want, rel=1e-13)
    assert sc.sobolev_norm(h24_small, np.zeros(60), s) == 0.0


def test_sobolev_norm_huge_orders_do_not_overflow(h22_400):
    u = np.zeros(400)
    u[399] = 1e-300
    assert sc.sobolev_norm(h22_400, u, 500) == np.inf
    assert np.isfinite(sc.sobolev_norm(h22_400, u, 100))


def test_schwartz_test_decaying(h22_400):
    u = np.exp(-np.arange(400) ** 0.5)
    rep = sc.schwartz_test(h22_400, u)
    assert rep.consistent and rep.orders == tuple(range(1, 9))


def test_schwartz_test_power_law(h22_400):
    u = 1.0 / np.arange(1, 401) ** 3
    rep = sc.schwartz_test(h22_400, u)
    assert not rep.consistent
    assert rep.first_failure == 4
    assert rep.decay_order == pytest.approx(3, abs=1e-9)


# --- export ----------------------------------------------------------------------


def test_spectrum_csv(tmp_path, h24_small):
    p = tmp_path / "s.csv"
    sc.write_spectrum_csv(p, h24_small)
    raw = p.read_bytes()
    assert b"\r" not in raw
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["j", "lambda", "residual"]
    assert len(rows) == 61
    assert float(rows[1][1]) == h24_small.eigenvalues[0]


def test_weyl_csv(tmp_path, h22_400):
    p = tmp_path / "w.csv"
    sc.write_weyl_csv(p, sc.weyl_fit(h22_400))
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["exponent_hat", "prefactor_hat", "exponent_theory", "window_lo", "window_hi", "residual"]
    assert rows[1][3:5] == ["50", "300"]
