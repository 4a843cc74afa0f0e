"""L2-normalized Hermite functions, Gauss-Hermite quadrature and the banded
position/derivative matrices every monomial operator is built from.

Conventions
-----------
* ``h_n(x) = (2^n n! sqrt(pi))^{-1/2} H_n(x) exp(-x^2/2)``; inner products are
  plain L2(R^n).
* A matrix ``A`` represents an operator through ``A[i, j] = <h_i, A h_j>``,
  so matrix products compose like the operators.
* Multi-indices of the tensor basis ``{h_a : 0 <= a_i < N}`` are enumerated in
  graded lexicographic order (total degree first, then lexicographic); every
  matrix and coefficient vector in the package uses this flattening.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln, roots_hermite

from . import kernels
from .errors import CapabilityError, DomainError, TruncationError

MAX_QUADRATURE_NODES = 10_000


def multi_index(entries, n=None):
    """Validate a multi-index and return it as a tuple of ints."""
    entries = tuple(int(a) for a in np.atleast_1d(entries))
    if any(a < 0 for a in entries):
        raise DomainError(f"multi-index entries must be nonnegative: {entries}")
    if n is not None and len(entries) != n:
        raise DomainError(f"multi-index {entries} has length {len(entries)}, expected {n}")
    return entries


@dataclass(frozen=True)
class BasisSpec:
    """Truncation of the tensor Hermite basis.

    ``N`` functions per axis, ``N**n`` in total; operators are assembled at
    ``N + pad`` per axis and cropped.
    """

    n: int
    N: int
    pad: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"dimension must be >= 1, got {self.n}")
        if self.N < 1:
            raise DomainError(f"truncation N must be >= 1, got {self.N}")
        if self.pad < 0:
            raise DomainError(f"pad must be >= 0, got {self.pad}")

    @property
    def size(self):
        return self.N ** self.n


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Physicists' Gauss-Hermite rule.

    ``weights`` integrate ``p(x) exp(-x^2)``; ``scaled_weights`` equal
    ``weights * exp(nodes^2)`` and integrate plain L2 integrands such as
    products of Hermite functions without underflow at the outer nodes.
    """

    nodes: np.ndarray
    weights: np.ndarray
    degree: int
    scaled_weights: np.ndarray

    def __len__(self):
        return self.nodes.shape[0]


def _check_x(x):
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DomainError("Hermite functions evaluated at a nonfinite point")
    return x


def hermite_eval(N, x, return_flag=False):
    """Values ``[h_0(x), ..., h_{N-1}(x)]`` at a single point.

    Entries whose magnitude would fall below the normal double range come back
    as exact zeros; with ``return_flag=True`` a boolean telling whether that
    happened is returned as well.
    """
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    x = float(_check_x(x))
    values, flushed = kernels.hermite_table(N, [x])
    if return_flag:
        return values[0], bool(flushed[0])
    return values[0]


def hermite_values(N, x):
    """Table of shape ``(len(x), N)`` of ``h_n`` at many points."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    values, _ = kernels.hermite_table(N, _check_x(x))
    return values


@lru_cache(maxsize=32)
def _rule(q):
    nodes, _ = roots_hermite(q)
    nodes = 0.5 * (nodes - nodes[::-1])
    scaled = 1.0 / kernels.hermite_sumsq(q, nodes)
    scaled = 0.5 * (scaled + scaled[::-1])
    weights = scaled * np.exp(-nodes * nodes)
    for a in (nodes, weights, scaled):
        a.setflags(write=False)
    return QuadratureRule(nodes, weights, 2 * q - 1, scaled)


def gauss_hermite_rule(q):
    """Gauss-Hermite rule with ``q`` nodes, exact for ``p(x) exp(-x^2)``, deg p <= 2q-1.

    Nodes come from :func:`scipy.special.roots_hermite`; the weights are
    recomputed through the Christoffel identity ``1/w~_k = sum_{n<q} h_n(x_k)^2``
    so that the scaled weights stay accurate where ``exp(-x_k^2)`` underflows.
    """
    q = int(q)
    if q < 1:
        raise DomainError(f"quadrature needs q >= 1 nodes, got {q}")
    if q > MAX_QUADRATURE_NODES:
        raise CapabilityError(f"q = {q} exceeds the supported {MAX_QUADRATURE_NODES} nodes")
    return _rule(q)


def default_quadrature_nodes(N):
    return 2 * N + 64


# ----------------------------------------------------------------------------
# banded matrices


def _ladder(size):
    return np.sqrt(np.arange(1, size, dtype=np.float64) / 2.0)


def _position_real(size):
    s = _ladder(size)
    return sp.diags_array([s, s], offsets=[-1, 1], shape=(size, size), format="csr")


def _ddx_real(size):
    """Matrix of d/dx: h_j' = sqrt(j/2) h_{j-1} - sqrt((j+1)/2) h_{j+1}."""
    s = _ladder(size)
    return sp.diags_array([-s, s], offsets=[-1, 1], shape=(size, size), format="csr")


@lru_cache(maxsize=256)
def _axis_factor(a, b, size):
    """Real matrix of x^b (d/dx)^a at the given size (uncropped)."""
    out = sp.identity(size, format="csr", dtype=np.float64)
    if a:
        d = _ddx_real(size)
        for _ in range(a):
            out = d @ out
    if b:
        x = _position_real(size)
        for _ in range(b):
            out = x @ out
    out = sp.csr_array(out)
    out.eliminate_zeros()
    return out


def _phase(order):
    """(-i)^order, exact."""
    return (1.0 + 0j, -1j, -1.0 + 0j, 1j)[order % 4]


@lru_cache(maxsize=16)
def grlex_indices(n, N):
    """Multi-indices of the box {0..N-1}^n in graded lexicographic order, shape (N^n, n)."""
    grid = np.indices((N,) * n).reshape(n, -1).T
    order = np.lexsort(tuple(grid[:, i] for i in reversed(range(n))) + (grid.sum(axis=1),))
    out = np.ascontiguousarray(grid[order])
    out.setflags(write=False)
    return out


@lru_cache(maxsize=16)
def grlex_permutation(n, N):
    """Row-major flat position of each grlex-ordered multi-index."""
    idx = grlex_indices(n, N)
    perm = np.ravel_multi_index(tuple(idx.T), (N,) * n)
    perm.setflags(write=False)
    return perm


def to_tensor(v, n, N):
    """Grlex-flat vector(s) -> array of shape (N,)*n (+ trailing batch axis)."""
    v = np.asarray(v)
    if n == 1:
        return v
    perm = grlex_permutation(n, N)
    out = np.zeros((N ** n,) + v.shape[1:], dtype=v.dtype)
    out[perm] = v
    return out.reshape((N,) * n + v.shape[1:])


def from_tensor(T, n, N):
    """Inverse of :func:`to_tensor`."""
    if n == 1:
        return np.asarray(T)
    T = np.asarray(T)
    flat = T.reshape((N ** n,) + T.shape[n:])
    return flat[grlex_permutation(n, N)]


def _apply_axis(F, T, axis):
    moved = np.moveaxis(T, axis, 0)
    shape = moved.shape
    out = F @ moved.reshape(shape[0], -1)
    return np.moveaxis(out.reshape((F.shape[0],) + shape[1:]), 0, axis)


def apply_factors(factors, T):
    """Apply per-axis 1-D matrices to a tensor (axes 0..n-1; extra axes are batch)."""
    for axis, F in enumerate(factors):
        if F is not None:
            T = _apply_axis(F, T, axis)
    return T


@dataclass(frozen=True, eq=False)
class BandedOperatorMatrix:
    """Galerkin matrix of an operator on the truncated Hermite basis.

    ``matrix`` is a scipy sparse array in grlex order (``None`` beyond two
    dimensions, where only the matrix-free :meth:`apply` is offered).
    ``terms`` keeps ``(coefficient, per-axis factors)`` pairs for that apply.
    ``hermitian_defect`` is ``max|A - A^H| / max(1, max|A|)`` measured before
    any symmetrization; the relative form keeps the 1e-10 gate meaningful when
    high-order monomials push entries to 1e7 and beyond.
    """

    matrix: object
    spec: BasisSpec
    bandwidth: int
    hermitian_defect: float = 0.0
    terms: tuple = field(default=(), repr=False)
    params: tuple = None  # (n, m, k) of the assembled operator, when known

    @property
    def size(self):
        return self.spec.size

    @property
    def shape(self):
        return (self.size, self.size)

    def toarray(self):
        if self.matrix is None:
            return self.apply(np.eye(self.size))
        return self.matrix.toarray()

    def apply(self, v):
        v = np.asarray(v)
        if self.matrix is not None:
            return self.matrix @ v
        n, N = self.spec.n, self.spec.N
        T = to_tensor(v, n, N)
        out = None
        for coeff, factors in self.terms:
            y = coeff * apply_factors(factors, T)
            out = y if out is None else out + y
        if out is None:
            return np.zeros_like(v, dtype=np.complex128)
        return from_tensor(out, n, N)

    def banded(self):
        """Upper LAPACK band storage ``ab[b + i - j, j] = A[i, j]`` (1-D only)."""
        if self.spec.n != 1:
            raise CapabilityError("band storage is only defined for one-dimensional bases")
        return band_storage(self.matrix, self.bandwidth)

    @property
    def is_real(self):
        if self.matrix is None:
            return all(np.isreal(c) and all(np.isrealobj(F) for F in fs) for c, fs in self.terms)
        return not np.iscomplexobj(self.matrix.data) or not np.any(self.matrix.data.imag)


def band_storage(A, b):
    A = sp.dia_array(A)
    size = A.shape[0]
    dtype = A.dtype if np.iscomplexobj(A.data) else np.float64
    ab = np.zeros((b + 1, size), dtype=dtype)
    for off in range(0, b + 1):
        diag = A.diagonal(off)
        ab[b - off, off:] = diag
    return ab


def hermitian_defect(A):
    """max|A - A^H| / max(1, max|A|) for a sparse matrix."""
    if A.nnz == 0:
        return 0.0
    diff = A - A.conj().T
    scale = max(1.0, float(np.abs(A.data).max()))
    if diff.nnz == 0:
        return 0.0
    return float(np.abs(diff.data).max()) / scale


def position_matrix(N):
    """Multiplication by x on span{h_0..h_{N-1}}: X[i, i+1] = X[i+1, i] = sqrt((i+1)/2)."""
    if N < 2:
        raise DomainError(f"position_matrix needs N >= 2, got {N}")
    return BandedOperatorMatrix(
        _position_real(N), BasisSpec(1, N), 1, 0.0, ((1.0, (_position_real(N),)),)
    )


def derivative_matrix(N):
    """Matrix of D = -i d/dx on span{h_0..h_{N-1}}; Hermitian by construction."""
    if N < 2:
        raise DomainError(f"derivative_matrix needs N >= 2, got {N}")
    D = sp.csr_array(-1j * _ddx_real(N))
    return BandedOperatorMatrix(D, BasisSpec(1, N), 1, 0.0, ((-1j, (_ddx_real(N),)),))


def monomial_factors(alpha, beta, spec, cropped=True):
    """Per-axis real factors of x^beta (d/dx)^alpha and the phase (-i)^|alpha|."""
    alpha = multi_index(alpha, spec.n)
    beta = multi_index(beta, spec.n)
    for i, (a, b) in enumerate(zip(alpha, beta)):
        if a + b > spec.pad:
            raise TruncationError(
                f"pad = {spec.pad} < {a + b} on axis {i} for x^{beta} D^{alpha}: "
                "cropped entries would be contaminated by truncation"
            )
    size = spec.N + spec.pad
    factors = []
    for a, b in zip(alpha, beta):
        F = _axis_factor(a, b, size)
        if cropped:
            F = F[: spec.N, : spec.N]
        factors.append(F)
    return _phase(sum(alpha)), tuple(factors)


def kron_grlex(factors, N):
    """Sparse Kronecker product of per-axis factors, permuted to grlex order."""
    K = factors[0]
    for F in factors[1:]:
        K = sp.kron(K, F, format="csr")
    K = sp.csr_array(K)
    n = len(factors)
    if n == 1:
        return K
    perm = grlex_permutation(n, N)
    return K[perm][:, perm]


def monomial_matrix(alpha, beta, spec):
    """Matrix of x^beta D^alpha (D-factors act first), exact on the cropped block.

    Built at ``N + pad`` per axis and cropped to ``N``; in more than two
    dimensions only the per-axis factors are kept (matrix-free apply).
    """
    phase, factors = monomial_factors(alpha, beta, spec)
    alpha, beta = multi_index(alpha), multi_index(beta)
    bandwidth = max(a + b for a, b in zip(alpha, beta))
    matrix = None
    if spec.n <= 2:
        matrix = kron_grlex(factors, spec.N)
        if phase.imag == 0.0:
            matrix = matrix * phase.real
        else:
            matrix = sp.csr_array(matrix * phase)
    defect = hermitian_defect(matrix) if matrix is not None else float("nan")
    return BandedOperatorMatrix(matrix, spec, bandwidth, defect, ((phase, factors),))


# ----------------------------------------------------------------------------
# closed-form coefficients


def gaussian_coefficients_1d(N, width=1.0):
    """Hermite coefficients of exp(-x^2 / width^2), exact to relative rounding.

    With a = 2/width^2 and b = (1 + a)/2 the even coefficients are
    c_{2p} = (2^{2p} (2p)! sqrt(pi))^{-1/2} sqrt(pi/b) (2p)!/p! ((1-a)/(1+a))^p,
    evaluated in the log domain; odd coefficients vanish.
    """
    if width <= 0 or not np.isfinite(width):
        raise DomainError(f"Gaussian width must be positive and finite, got {width}")
    a = 2.0 / width ** 2
    ratio = (1.0 - a) / (1.0 + a)
    c = np.zeros(N)
    p = np.arange((N + 1) // 2, dtype=np.float64)
    two_p = 2.0 * p
    log_c = (
        0.5 * math.log(2.0 * math.pi / (1.0 + a))
        - 0.5 * (two_p * math.log(2.0) + gammaln(two_p + 1.0) + 0.5 * math.log(math.pi))
        + gammaln(two_p + 1.0)
        - gammaln(p + 1.0)
    )
    if ratio == 0.0:
        c[0] = math.exp(log_c[0])
        return c
    log_c = log_c + p * math.log(abs(ratio))
    sign = np.where((p % 2 == 1) & (ratio < 0), -1.0, 1.0)
    c[::2] = sign * np.exp(log_c)
    return c


def gaussian_coefficients(spec, width=1.0):
    """Grlex-flat Hermite coordinates of exp(-|x|^2 / width^2) in n dimensions."""
    c1 = gaussian_coefficients_1d(spec.N, width)
    idx = grlex_indices(spec.n, spec.N)
    return np.prod(c1[idx], axis=1)
