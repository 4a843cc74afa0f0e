import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shubin import errors
from shubin.hermite import BasisSpec, hermitian_defect
from shubin.operators import (
    ShubinOperator,
    Term,
    assemble,
    ellipticity_check,
    format_operator,
    model_operator,
    parse_operator,
    principal_symbol,
    read_operator,
    term_order,
)

HARMONIC = "shubin n=1 m=2 k=2\nterm alpha=2 beta=0 re=1 im=0\nterm alpha=0 beta=2 re=1 im=0\n"


# --- construction ----------------------------------------------------------


def test_model_operator_terms():
    P = model_operator(2, 2, 4)
    got = {(t.alpha, t.beta): t.coeff.real for t in P.terms}
    assert got == {
        ((2, 0), (0, 0)): 1,
        ((0, 2), (0, 0)): 1,
        ((0, 0), (4, 0)): 1,
        ((0, 0), (2, 2)): 2,
        ((0, 0), (0, 4)): 1,
    }
    assert P.axis_order == 4


@pytest.mark.parametrize("m,k", [(3, 2), (2, 5), (0, 2)])
def test_odd_orders_rejected(m, k):
    with pytest.raises(errors.ValidationError):
        model_operator(1, m, k)


def test_order_constraint():
    with pytest.raises(errors.ValidationError):
        ShubinOperator(1, 2, 2, (Term((2,), (1,), 1.0),))
    assert term_order((1,), (1,), 2, 2) == 1


def test_duplicate_terms_merge():
    P = ShubinOperator(1, 2, 2, (Term((2,), (0,), 1.0), Term((2,), (0,), 2.0)))
    assert len(P.terms) == 1 and P.terms[0].coeff == 3


def test_operator_sum_dimension_mismatch():
    with pytest.raises(errors.ValidationError):
        model_operator(1, 2, 2) + model_operator(1, 2, 4)


# --- text format -----------------------------------------------------------


def test_parse_roundtrip():
    P = model_operator(2, 2, 4)
    assert parse_operator(format_operator(P)) == P


def test_parse_comments_and_whitespace(tmp_path):
    text = "# harmonic\nshubin n=1 m=2 k=2   \n\nterm alpha=2 beta=0 re=1 im=0 # kinetic\nterm alpha=0 beta=2 re=1 im=0\n"
    p = tmp_path / "h.op"
    p.write_text(text)
    assert read_operator(p) == model_operator(1, 2, 2)
    assert parse_operator(HARMONIC).digest() == model_operator(1, 2, 2).digest()


@pytest.mark.parametrize(
    "text,line,field",
    [
        ("term alpha=2 beta=0 re=1 im=0\n", 1, None),
        ("shubin n=1 m=2\n", 1, "k"),
        ("shubin n=1 m=2 k=2\nterm alpha=2 beta=0 re=x im=0\n", 2, "re"),
        ("shubin n=1 m=2 k=2\nterm alpha=2,1 beta=0 re=1 im=0\n", 2, "alpha"),
        ("shubin n=1 m=2 k=2\nterm alpha=2 beta=0 re=1 im=0 z=1\n", 2, "z"),
        ("shubin n=1 m=2 k=2\nterm alpha=-2 beta=0 re=1 im=0\n", 2, "alpha"),
        ("shubin n=1 m=2 k=2\nterm alpha=0 beta=0 re=inf im=0\n", 2, "re"),
        ("shubin n=1 m=2 k=2\nfoo\n", 2, None),
    ],
)
def test_parse_errors_locate(text, line, field):
    with pytest.raises(errors.ParseError) as exc:
        parse_operator(text)
    assert exc.value.line == line
    assert exc.value.field == field


def test_parse_empty():
    with pytest.raises(errors.ParseError):
        parse_operator("# nothing\n")


def test_parse_order_violation():
    with pytest.raises(errors.ValidationError):
        parse_operator("shubin n=1 m=2 k=2\nterm alpha=2 beta=2 re=1 im=0\n")


# --- symbol and ellipticity --------------------------------------------------


def test_principal_symbol_values():
    P = model_operator(1, 2, 4)
    assert principal_symbol(P, 2.0, 3.0) == pytest.approx(9 + 16)


@given(
    st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 50),
    st.sampled_from([(2, 2), (2, 4), (4, 2), (4, 6)]),
)
def test_homogeneity(x, xi, s, mk):
    m, k = mk
    P = model_operator(1, m, k)
    lhs = principal_symbol(P, s ** (1 / k) * x, s ** (1 / m) * xi)
    rhs = s * principal_symbol(P, x, xi)
    assert abs(lhs - rhs) <= 1e-12 * max(abs(rhs), 1e-300) + 1e-300


@pytest.mark.parametrize("n,m,k", [(1, 2, 2), (1, 2, 4), (1, 4, 2), (2, 2, 2)])
def test_model_operators_elliptic(n, m, k):
    rep = ellipticity_check(model_operator(n, m, k), grid=16 if n == 2 else 64)
    assert rep.verdict == "elliptic"
    assert rep.min_modulus == pytest.approx(1.0, rel=1e-6)
    lo, hi = rep.ratio_bounds
    assert 0 < lo <= hi < math.inf


def test_hyperbolic_symbol_not_elliptic():
    P = parse_operator("shubin n=1 m=2 k=2\nterm alpha=2 beta=0 re=1 im=0\nterm alpha=0 beta=2 re=-1 im=0\n")
    rep = ellipticity_check(P)
    assert rep.verdict == "not elliptic"
    assert rep.min_modulus < 1e-9
    assert abs(abs(rep.witness.x[0]) - abs(rep.witness.xi[0])) < 1e-6


def test_weight_ratio_nonnegative():
    rep = ellipticity_check(model_operator(1, 2, 4))
    assert rep.witness.weight_ratio >= 0


# --- assembly --------------------------------------------------------------


@pytest.mark.parametrize("n,m,k,N", [(1, 2, 2, 30), (1, 2, 4, 40), (1, 4, 6, 25), (2, 2, 4, 8)])
def test_model_assembly_real_symmetric(n, m, k, N):
    P = model_operator(n, m, k)
    A = assemble(P, BasisSpec(n, N, pad=P.axis_order))
    assert A.is_real
    assert hermitian_defect(A.matrix) == 0.0
    assert A.hermitian_defect <= 1e-10
    assert A.params == (n, m, k)


def test_harmonic_matrix_diagonal():
    P = model_operator(1, 2, 2)
    A = assemble(P, BasisSpec(1, 16, pad=2)).toarray()
    np.testing.assert_allclose(A, np.diag(2 * np.arange(16) + 1.0), atol=1e-13)


def test_assembly_linearity(rng):
    N = 20
    P = model_operator(1, 2, 4)
    Q = ShubinOperator(1, 2, 4, (Term((1,), (1,), complex(rng.standard_normal(), 0)), Term((0,), (2,), 0.5)))
    spec = BasisSpec(1, N, pad=4)
    lhs = assemble(P + Q, spec).toarray()
    rhs = assemble(P, spec).toarray() + assemble(Q, spec).toarray()
    np.testing.assert_allclose(lhs, rhs, rtol=1e-15, atol=1e-13)


def test_non_self_adjoint_defect_reported():
    P = ShubinOperator(1, 2, 2, (Term((2,), (0,), 1.0), Term((0,), (2,), 1.0), Term((1,), (1,), 1.0)))
    A = assemble(P, BasisSpec(1, 20, pad=2))
    assert A.hermitian_defect > 1e-3
    assert hermitian_defect(A.matrix) == 0.0


def test_dimension_mismatch():
    with pytest.raises(errors.ValidationError):
        assemble(model_operator(1, 2, 2), BasisSpec(2, 5, pad=2))


def test_matrix_free_three_dimensions():
    P = model_operator(3, 2, 2)
    A = assemble(P, BasisSpec(3, 4, pad=2))
    assert A.matrix is None
    v = np.zeros(64)
    v[0] = 1.0
    np.testing.assert_allclose(A.apply(v).real[0], 3.0, atol=1e-14)
