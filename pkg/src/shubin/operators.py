"""Anisotropic Shubin operators: definition, text format, principal symbol,
global-ellipticity sampling and Galerkin assembly.

An operator of type (m, k) on R^n is a finite sum

    P = sum c_ab x^b D^a,   D = -i d/dx,   |a|/m + |b|/k <= 1,

with the D-factors acting first. Terms of anisotropic order exactly one make
up the principal part.
"""

from dataclasses import dataclass
from fractions import Fraction
import hashlib
import itertools
import math
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.optimize import least_squares

from .errors import ParseError, ValidationError
from .hermite import (
    BandedOperatorMatrix,
    BasisSpec,
    hermitian_defect,
    kron_grlex,
    monomial_factors,
    multi_index,
)

ELLIPTIC_THRESHOLD = 1e-6
INCONCLUSIVE_THRESHOLD = 1e-9
SHELL_RADII = (10.0, 20.0, 40.0)


class Term(NamedTuple):
    alpha: tuple
    beta: tuple
    coeff: complex


def term_order(alpha, beta, m, k):
    """Anisotropic order |alpha|/m + |beta|/k as an exact fraction."""
    return Fraction(sum(alpha), m) + Fraction(sum(beta), k)


@dataclass(frozen=True)
class ShubinOperator:
    n: int
    m: int
    k: int
    terms: tuple = ()

    def __post_init__(self):
        for name in ("m", "k"):
            v = getattr(self, name)
            if int(v) != v or v < 2 or v % 2:
                raise ValidationError(f"{name} must be an even integer >= 2, got {v}")
        if self.n < 1:
            raise ValidationError(f"dimension n must be >= 1, got {self.n}")
        merged = {}
        for t in self.terms:
            alpha, beta, coeff = (t.alpha, t.beta, t.coeff) if isinstance(t, Term) else t
            alpha = multi_index(alpha, self.n)
            beta = multi_index(beta, self.n)
            order = term_order(alpha, beta, self.m, self.k)
            if order > 1:
                raise ValidationError(
                    f"term x^{beta} D^{alpha} has anisotropic order {order} > 1 for (m, k) = ({self.m}, {self.k})"
                )
            merged[(alpha, beta)] = merged.get((alpha, beta), 0j) + complex(coeff)
        ordered = sorted(
            merged.items(), key=lambda kv: (-term_order(*kv[0], self.m, self.k), kv[0][0], kv[0][1])
        )
        object.__setattr__(self, "terms", tuple(Term(a, b, c) for (a, b), c in ordered))

    @property
    def principal_terms(self):
        return tuple(t for t in self.terms if term_order(t.alpha, t.beta, self.m, self.k) == 1)

    @property
    def axis_order(self):
        """Largest per-axis |alpha_i| + |beta_i| over all terms (the padding needed)."""
        return max((a + b for t in self.terms for a, b in zip(t.alpha, t.beta)), default=0)

    @property
    def params(self):
        return (self.n, self.m, self.k)

    def __add__(self, other):
        if self.params != other.params:
            raise ValidationError("cannot add operators of different type (n, m, k)")
        return ShubinOperator(self.n, self.m, self.k, self.terms + other.terms)

    def digest(self):
        return hashlib.sha256(format_operator(self).encode()).hexdigest()[:16]


def _multinomial_terms(n, power):
    """Exponent vectors g with |g| = power and their multinomial coefficients."""
    for g in itertools.product(range(power + 1), repeat=n):
        if sum(g) == power:
            coeff = math.factorial(power)
            for gi in g:
                coeff //= math.factorial(gi)
            yield g, coeff


def model_operator(n, m, k):
    """(-Delta)^{m/2} + |x|^k expanded into monomials with integer coefficients."""
    for name, v in (("m", m), ("k", k)):
        if int(v) != v or v < 2 or v % 2:
            raise ValidationError(f"{name} must be an even integer >= 2, got {v}")
    zero = (0,) * n
    terms = []
    for g, c in _multinomial_terms(n, m // 2):
        terms.append(Term(tuple(2 * gi for gi in g), zero, complex(c)))
    for g, c in _multinomial_terms(n, k // 2):
        terms.append(Term(zero, tuple(2 * gi for gi in g), complex(c)))
    return ShubinOperator(n, m, k, tuple(terms))


# ----------------------------------------------------------------------------
# text format


def _fmt_index(idx):
    return ",".join(str(i) for i in idx)


def format_operator(P):
    lines = [f"shubin n={P.n} m={P.m} k={P.k}"]
    for t in P.terms:
        c = complex(t.coeff)
        lines.append(
            f"term alpha={_fmt_index(t.alpha)} beta={_fmt_index(t.beta)} re={c.real!r} im={c.imag!r}"
        )
    return "\n".join(lines) + "\n"


def _fields(parts, lineno, expected):
    out = {}
    for part in parts:
        if "=" not in part:
            raise ParseError(f"expected key=value, got {part!r}", line=lineno)
        key, value = part.split("=", 1)
        if key not in expected:
            raise ParseError(f"unknown field", line=lineno, field=key)
        if key in out:
            raise ParseError("duplicate field", line=lineno, field=key)
        out[key] = value
    missing = [k for k in expected if k not in out]
    if missing:
        raise ParseError("missing field", line=lineno, field=missing[0])
    return out


def _parse_int(value, lineno, key):
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"not an integer: {value!r}", line=lineno, field=key) from None


def _parse_float(value, lineno, key):
    try:
        v = float(value)
    except ValueError:
        raise ParseError(f"not a number: {value!r}", line=lineno, field=key) from None
    if not math.isfinite(v):
        raise ParseError(f"nonfinite number: {value!r}", line=lineno, field=key)
    return v


def _parse_index(value, lineno, key, n):
    parts = value.split(",")
    idx = tuple(_parse_int(p, lineno, key) for p in parts)
    if len(idx) != n:
        raise ParseError(f"expected {n} entries, got {len(idx)}", line=lineno, field=key)
    if any(i < 0 for i in idx):
        raise ParseError("negative multi-index entry", line=lineno, field=key)
    return idx


def parse_operator(text):
    """Parse an operator-spec document.

    Grammar: a header ``shubin n=<int> m=<int> k=<int>``, then one
    ``term alpha=<i1,..,in> beta=<j1,..,jn> re=<float> im=<float>`` per line;
    ``#`` starts a comment, blank lines are ignored.
    """
    header = None
    terms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *parts = line.split()
        if header is None:
            if head != "shubin":
                raise ParseError("document must start with a 'shubin' header", line=lineno)
            f = _fields(parts, lineno, ("n", "m", "k"))
            header = {key: _parse_int(f[key], lineno, key) for key in ("n", "m", "k")}
            if header["n"] < 1:
                raise ParseError("dimension must be >= 1", line=lineno, field="n")
            continue
        if head != "term":
            raise ParseError(f"unknown record {head!r}", line=lineno)
        f = _fields(parts, lineno, ("alpha", "beta", "re", "im"))
        n = header["n"]
        alpha = _parse_index(f["alpha"], lineno, "alpha", n)
        beta = _parse_index(f["beta"], lineno, "beta", n)
        coeff = complex(_parse_float(f["re"], lineno, "re"), _parse_float(f["im"], lineno, "im"))
        order = term_order(alpha, beta, header["m"], header["k"]) if header["m"] and header["k"] else None
        if order is not None and order > 1:
            raise ValidationError(
                f"line {lineno}: term alpha={_fmt_index(alpha)} beta={_fmt_index(beta)} "
                f"has anisotropic order {order} > 1"
            )
        terms.append(Term(alpha, beta, coeff))
    if header is None:
        raise ParseError("empty document: missing 'shubin' header")
    return ShubinOperator(header["n"], header["m"], header["k"], tuple(terms))


def read_operator(path):
    with open(path, encoding="utf-8") as fh:
        return parse_operator(fh.read())


# ----------------------------------------------------------------------------
# symbol and ellipticity


def principal_symbol(P, x, xi):
    """Sum of c x^beta xi^alpha over the order-one terms; vectorized over leading axes."""
    x = np.asarray(x, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    if P.n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
        xi = xi[..., None]
    out = np.zeros(np.broadcast_shapes(x.shape[:-1], xi.shape[:-1]), dtype=np.complex128)
    for t in P.principal_terms:
        mono = np.prod(x ** np.array(t.beta), axis=-1) * np.prod(xi ** np.array(t.alpha), axis=-1)
        out = out + t.coeff * mono
    if out.ndim == 0:
        return complex(out)
    return out


def weight(P, x, xi):
    """Lambda_{m,k}(x, xi) = (1 + |x|^{2k} + |xi|^{2m})^{1/2}."""
    x = np.asarray(x, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    r2x = np.sum(x * x, axis=-1)
    r2xi = np.sum(xi * xi, axis=-1)
    return np.sqrt(1.0 + r2x ** P.k + r2xi ** P.m)


@dataclass(frozen=True)
class SymbolSample:
    x: np.ndarray
    xi: np.ndarray
    value: complex
    weight_ratio: float


@dataclass(frozen=True)
class EllipticityReport:
    verdict: str  # "elliptic" | "inconclusive" | "not elliptic"
    min_modulus: float
    witness: SymbolSample
    ratio_bounds: tuple  # (C_2, C_1) over the sampled shells

    @property
    def elliptic(self):
        return self.verdict == "elliptic"


def _unit_directions(angles, n):
    """Hyperspherical coordinates -> points on S^{n-1}; angles shape (..., n-1)."""
    if n == 1:
        raise ValueError("use signs for S^0")
    out = []
    s = np.ones(angles.shape[:-1])
    for i in range(n - 1):
        out.append(s * np.cos(angles[..., i]))
        s = s * np.sin(angles[..., i])
    out.append(s)
    return np.stack(out, axis=-1)


def _angle_grid(dim, grid):
    """Grid over hyperspherical angles of S^dim: last angle periodic, others on [0, pi]."""
    axes = []
    for i in range(dim):
        if i == dim - 1:
            axes.append(np.arange(grid) * (2.0 * np.pi / grid))
        else:
            axes.append((np.arange(grid) + 0.5) * (np.pi / grid))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def _sphere_points(params, n, m, k):
    """Anisotropic unit sphere |x|^{2k} + |xi|^{2m} = 1 from angle parameters.

    n = 1 uses the closed curve (sgn cos t |cos t|^{1/k}, sgn sin t |sin t|^{1/m});
    n >= 2 uses (cos t^{1/k} w_x, sin t^{1/m} w_xi) with w on S^{n-1}.
    """
    params = np.atleast_2d(params)
    t = params[:, 0]
    c, s = np.cos(t), np.sin(t)
    if n == 1:
        x = np.sign(c) * np.abs(c) ** (1.0 / k)
        xi = np.sign(s) * np.abs(s) ** (1.0 / m)
        return x[:, None], xi[:, None]
    rx = np.abs(c) ** (1.0 / k)
    rxi = np.abs(s) ** (1.0 / m)
    wx = _unit_directions(params[:, 1:n], n)
    wxi = _unit_directions(params[:, n : 2 * n - 1], n)
    return rx[:, None] * wx, rxi[:, None] * wxi


def _sphere_grid(n, grid):
    if n == 1:
        return (np.arange(grid) * (2.0 * np.pi / grid))[:, None]
    t = (np.arange(grid) + 0.5) * (0.5 * np.pi / grid)
    periodic = np.arange(grid) * (2.0 * np.pi / grid)
    polar = (np.arange(grid) + 0.5) * (np.pi / grid)
    side = [polar] * (n - 2) + [periodic]
    mesh = np.meshgrid(t, *side, *side, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def _shell_points(n, grid, radius):
    if n == 1:
        th = np.arange(8 * grid) * (2.0 * np.pi / (8 * grid))
        return radius * np.cos(th)[:, None], radius * np.sin(th)[:, None]
    w = _unit_directions(_angle_grid(2 * n - 1, grid), 2 * n)
    w = radius * w
    return w[:, :n], w[:, n:]


def ellipticity_check(P, grid=64, refine=8):
    """Sample the principal symbol on the anisotropic unit sphere.

    By anisotropic homogeneity (x -> s^{1/k} x, xi -> s^{1/m} xi scales every
    order-one monomial by s) nonvanishing on the sphere is equivalent to
    nonvanishing off the origin. The ``refine`` smallest samples are polished
    by a least-squares solve of Re p = Im p = 0 in the sphere parameters, so a
    true zero shows up as a modulus at rounding level.
    """
    if grid < 8:
        raise ValueError(f"grid must be >= 8, got {grid}")
    n, m, k = P.params
    params = _sphere_grid(n, grid)
    x, xi = _sphere_points(params, n, m, k)
    vals = principal_symbol(P, x, xi)
    mod = np.abs(vals)

    best = int(np.argmin(mod))
    best_params, best_mod = params[best], float(mod[best])
    for start in np.argsort(mod, kind="stable")[:refine]:

        def resid(p):
            xx, ee = _sphere_points(p, n, m, k)
            v = principal_symbol(P, xx, ee)[0]
            return [v.real, v.imag]

        sol = least_squares(resid, params[start], method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
        cand = float(np.hypot(*sol.fun))
        if cand < best_mod:
            best_mod, best_params = cand, sol.x

    wx, wxi = _sphere_points(best_params, n, m, k)
    wval = complex(principal_symbol(P, wx, wxi)[0])
    witness = SymbolSample(wx[0], wxi[0], wval, float(abs(wval) / weight(P, wx[0], wxi[0])))

    ratios = []
    for radius in SHELL_RADII:
        sx, sxi = _shell_points(n, grid, radius)
        ratios.append(np.abs(principal_symbol(P, sx, sxi)) / weight(P, sx, sxi))
    ratios = np.concatenate(ratios)

    if best_mod > ELLIPTIC_THRESHOLD:
        verdict = "elliptic"
    elif best_mod >= INCONCLUSIVE_THRESHOLD:
        verdict = "inconclusive"
    else:
        verdict = "not elliptic"
    return EllipticityReport(verdict, best_mod, witness, (float(ratios.min()), float(ratios.max())))


# ----------------------------------------------------------------------------
# assembly


def assemble(P, spec):
    """Hermitian Galerkin matrix (A + A^H)/2 of P on the truncated basis.

    The defect of the unsymmetrized sum is recorded in ``hermitian_defect``.
    """
    if spec.n != P.n:
        raise ValidationError(f"operator dimension {P.n} does not match basis dimension {spec.n}")
    terms = []
    A = None
    for t in P.terms:
        phase, factors = monomial_factors(t.alpha, t.beta, spec)
        coeff = complex(t.coeff) * phase
        terms.append((coeff, factors))
        if spec.n <= 2:
            K = kron_grlex(factors, spec.N)
            K = K * coeff.real if coeff.imag == 0.0 else sp.csr_array(K * coeff)
            A = K if A is None else A + K
    bandwidth = P.axis_order
    if spec.n > 2:
        adjoint = [(np.conj(c), tuple(F.T.conj().tocsr() for F in fs)) for c, fs in terms]
        sym = tuple((0.5 * c, fs) for c, fs in terms + adjoint)
        return BandedOperatorMatrix(None, spec, bandwidth, _probe_defect(terms, spec), sym, P.params)
    if A is None:
        A = sp.csr_array((spec.size, spec.size), dtype=np.float64)
    A = sp.csr_array(A)
    defect = hermitian_defect(A)
    H = sp.csr_array(0.5 * (A + A.conj().T))
    if np.iscomplexobj(H.data) and not np.any(H.data.imag):
        H = sp.csr_array(H.real)
    H.eliminate_zeros()
    H.sort_indices()
    return BandedOperatorMatrix(H, spec, bandwidth, defect, tuple(terms), P.params)


def _probe_defect(terms, spec):
    """Estimate max|<y, A x> - <A y, x>| on a few fixed random vectors (matrix-free case)."""
    tmp = BandedOperatorMatrix(None, spec, 0, 0.0, tuple(terms))
    rng = np.random.default_rng(0)
    X = rng.standard_normal((spec.size, 4))
    Y = rng.standard_normal((spec.size, 4))
    AX, AY = tmp.apply(X), tmp.apply(Y)
    lhs = Y.T @ AX
    rhs = (AY.conj().T @ X)
    scale = max(1.0, float(np.abs(AX).max()))
    return float(np.abs(lhs - rhs).max()) / scale
