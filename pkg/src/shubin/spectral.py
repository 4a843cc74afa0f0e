"""Eigen-decompositions with truncation control, Weyl fits, spectral powers,
spectral Sobolev norms and the Schwartz-class diagnostic.

Eigenvectors are stored in Hermite coordinates (grlex order). Each column's
phase is fixed so that its largest-magnitude coordinate is real and positive,
which makes repeated runs bit-comparable.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import _eigen
from .errors import (
    CapabilityError,
    DomainError,
    HermitianDefectError,
    NonConvergenceError,
    NotEllipticError,
    TruncationError,
)
from .hermite import BasisSpec
from .io import write_csv
from .operators import assemble, ellipticity_check

DEFECT_TOL = 1e-10
RESIDUAL_TOL = 1e-8
START_N = 64
MAX_N = 8192  # the quartic needs 4096 vs 8192 to certify 400 pairs
MAX_N_MULTI = 4096  # per axis, for n >= 2
SCHWARTZ_MIN_TRUSTED = 30
SCHWARTZ_MARGIN = 1.1
NOISE_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Lowest eigenpairs of a Galerkin matrix.

    Attributes
    ----------
    eigenvalues : ndarray
        Ascending real eigenvalues.
    eigenvectors : ndarray
        Orthonormal columns in Hermite coordinates.
    J_trusted : int
        Number of leading pairs certified converged.
    spec : BasisSpec
        Truncation the pairs were computed at.
    params : tuple or None
        ``(n, m, k)`` of the operator.
    residuals : ndarray
        ``|A phi_j - lambda_j phi_j|`` per pair.
    history : tuple
        ``(N, eigenvalues)`` for every truncation visited by a convergence study.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    J_trusted: int
    spec: BasisSpec
    params: tuple = None
    residuals: np.ndarray = None
    history: tuple = field(default=(), repr=False)

    @property
    def trusted_eigenvalues(self):
        return self.eigenvalues[: self.J_trusted]

    @property
    def trusted_eigenvectors(self):
        return self.eigenvectors[:, : self.J_trusted]

    @property
    def order(self):
        """max(m, k), the order that scales spectral Sobolev norms."""
        if self.params is None:
            raise DomainError("decomposition carries no operator parameters (n, m, k)")
        return max(self.params[1], self.params[2])


@dataclass(frozen=True, eq=False)
class ExpansionCoefficients:
    """Coefficients ``u_j = (u, phi_j)`` of a function in an eigenbasis.

    ``tail_mass`` is ``1 - sum |u_j|^2 / |u|^2`` when the L2 norm of the
    function is known, else NaN. ``q`` records the quadrature size used (0 for
    exact or injected coefficients).
    """

    values: np.ndarray
    dec_ref: SpectralDecomposition = field(default=None, repr=False)
    tail_mass: float = float("nan")
    q: int = 0

    def __len__(self):
        return self.values.shape[0]

    def scaled(self, factor):
        return ExpansionCoefficients(self.values * factor, self.dec_ref, self.tail_mass, self.q)


@dataclass(frozen=True)
class WeylFit:
    exponent_hat: float
    prefactor_hat: float
    window: tuple
    residual: float
    exponent_theory: float


def weyl_exponent(n, m, k):
    return m * k / (n * (m + k))


# ----------------------------------------------------------------------------
# eigendecomposition


def _fix_signs(V):
    if V.size == 0:
        return V
    rows = np.argmax(np.abs(V), axis=0)
    pivots = V[rows, np.arange(V.shape[1])]
    phase = np.abs(pivots) / pivots
    if np.isrealobj(V):
        return V * phase.real
    V = V * phase
    # the pivot is now real; drop the rounding residue in its imaginary part
    V[rows, np.arange(V.shape[1])] = V[rows, np.arange(V.shape[1])].real
    return V


def _residuals(A, w, V):
    return np.linalg.norm(A.apply(V) - V * w, axis=0)


def eigendecompose(A, J, tol=RESIDUAL_TOL):
    """Lowest ``J`` eigenpairs of an assembled Galerkin matrix.

    Parameters
    ----------
    A : BandedOperatorMatrix
    J : int
        Number of pairs.
    tol : float
        Residual certificate: pairs with ``|A phi - lambda phi| > tol * max(1, lambda)``
        end the trusted prefix.

    Raises
    ------
    HermitianDefectError
        If the assembled matrix was not Hermitian to 1e-10 (relative).
    CapabilityError
        If ``J`` exceeds the basis size.
    """
    J = int(J)
    if A.hermitian_defect > DEFECT_TOL:
        raise HermitianDefectError(
            f"Galerkin matrix is not Hermitian: relative defect {A.hermitian_defect:.3g} > {DEFECT_TOL:g}"
        )
    if J < 1:
        raise DomainError(f"need J >= 1 eigenpairs, got {J}")
    if J > A.size:
        raise CapabilityError(f"J = {J} exceeds the basis size {A.size}")
    if tol <= 0:
        raise DomainError(f"residual tolerance must be positive, got {tol}")
    if A.matrix is not None:
        w, V = _eigen.lowest_eigenpairs(A.matrix, J, dims=A.spec.n)
    else:
        w, V = _eigen.matrix_free_lowest(A.apply, A.size, J)
    w = np.asarray(w, dtype=np.float64)
    V = _fix_signs(np.asarray(V))
    res = _residuals(A, w, V)
    bad = np.flatnonzero(res > tol * np.maximum(1.0, np.abs(w)))
    trusted = int(bad[0]) if bad.size else J
    return SpectralDecomposition(w, V, trusted, A.spec, A.params, res)


def _basis(P, N):
    return BasisSpec(P.n, N, pad=P.axis_order)


def convergence_study(P, J, tol=1e-10, residual_tol=RESIDUAL_TOL, max_N=None, start_N=START_N,
                      check_ellipticity=True):
    """Double the truncation until the lowest ``J`` eigenvalues settle.

    Starting from ``start_N`` functions per axis, ``N`` doubles until every
    ``lambda_j``, ``j <= J``, moves by at most ``tol`` relative between
    successive truncations. Truncations too small to hold ``J`` pairs are
    skipped without solving.

    Returns
    -------
    (BasisSpec, SpectralDecomposition)
        The final truncation and its decomposition with ``J_trusted = J``.

    Raises
    ------
    NotEllipticError
        If ``P`` fails the ellipticity gate.
    NonConvergenceError
        If the cap is reached; ``spectra`` holds the last two ``(N, eigenvalues)``.
    """
    if tol <= 0:
        raise DomainError(f"convergence tolerance must be positive, got {tol}")
    if check_ellipticity:
        report = ellipticity_check(P, grid=64 if P.n == 1 else 24)
        if not report.elliptic:
            raise NotEllipticError(
                f"operator is not globally elliptic ({report.verdict}); "
                f"min |p|/Lambda = {report.min_modulus:.3g}",
                report,
            )
    if max_N is None:
        max_N = MAX_N if P.n == 1 else MAX_N_MULTI
    history = []
    prev = None
    N = start_N
    while True:
        spec = _basis(P, N)
        if spec.size >= J:
            dec = eigendecompose(assemble(P, spec), J, residual_tol)
            history.append((N, dec.eigenvalues.copy()))
            if dec.J_trusted < J:
                pass
            elif prev is not None:
                lam0 = prev.eigenvalues[:J]
                lam1 = dec.eigenvalues[:J]
                change = np.abs(lam1 - lam0) / np.maximum(np.abs(lam1), 1e-300)
                if np.all(change <= tol):
                    return spec, SpectralDecomposition(
                        dec.eigenvalues, dec.eigenvectors, J, spec, dec.params,
                        dec.residuals, tuple(history),
                    )
            prev = dec if dec.J_trusted >= J else None
        if 2 * N > max_N:
            raise NonConvergenceError(
                f"lowest {J} eigenvalues not settled to {tol:g} by N = {N} per axis",
                spectra=tuple(history[-2:]),
            )
        N *= 2


# ----------------------------------------------------------------------------
# Weyl law


def _window(dec, window, min_len=10):
    J = dec.J_trusted
    if window is None:
        lo, hi = max(1, J // 8), (3 * J) // 4
    else:
        lo, hi = (int(v) for v in window)
    if lo < 1 or hi > J or hi < lo:
        raise DomainError(f"window [{lo}, {hi}] not inside the trusted range [1, {J}]")
    if hi - lo + 1 < min_len:
        raise DomainError(f"window [{lo}, {hi}] holds fewer than {min_len} indices")
    return lo, hi


def weyl_fit(dec, window=None):
    """Ordinary least-squares line through ``(log j, log lambda_j)``.

    ``window`` is a 1-based inclusive index pair, default ``[J/8, 3J/4]`` of the
    trusted range.
    """
    lo, hi = _window(dec, window)
    lam = dec.eigenvalues[lo - 1 : hi]
    if np.any(lam <= 0):
        raise DomainError("Weyl fit needs positive eigenvalues in the window")
    j = np.arange(lo, hi + 1, dtype=np.float64)
    X = np.column_stack([np.ones_like(j), np.log(j)])
    y = np.log(lam)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    theory = weyl_exponent(*dec.params) if dec.params else float("nan")
    return WeylFit(
        float(coef[1]), float(math.exp(coef[0])), (lo, hi),
        float(np.sqrt(np.mean(resid ** 2))), float(theory),
    )


# ----------------------------------------------------------------------------
# spectral calculus


def _checked(dec, u):
    values = np.asarray(u.values if isinstance(u, ExpansionCoefficients) else u)
    J = dec.J_trusted
    if values.shape[0] > J and np.any(values[J:] != 0):
        raise TruncationError(
            f"coefficients are supported beyond the {J} trusted eigenpairs"
        )
    values = values[:J]
    lam = dec.eigenvalues[: values.shape[0]]
    if np.any(lam <= 0):
        raise DomainError("spectral powers need positive eigenvalues")
    return values, lam


def spectral_power(dec, r, u):
    """Coefficients ``lambda_j^r u_j`` of ``P^r u``."""
    values, lam = _checked(dec, u)
    out = values * np.exp(r * np.log(lam)) if r != 0 else values.copy()
    if isinstance(u, ExpansionCoefficients):
        return ExpansionCoefficients(out, u.dec_ref, float("nan"), u.q)
    return ExpansionCoefficients(out, dec)


def sobolev_norm(dec, u, s):
    """Spectral Sobolev norm ``(sum_j lambda_j^{2s/max(m,k)} |u_j|^2)^{1/2}``.

    This is ``|P^{s/max(m,k)} u|``. The weight ``lambda_j^{s/max(m,k)}``
    without the factor two defines the same space with a different norm.
    """
    values, lam = _checked(dec, u)
    mag = np.abs(values)
    keep = mag > 0
    if not np.any(keep):
        return 0.0
    r = s / dec.order
    logs = 2.0 * r * np.log(lam[keep]) + 2.0 * np.log(mag[keep])
    top = logs.max()
    half_log = 0.5 * (top + math.log(np.exp(logs - top).sum()))
    return math.exp(half_log) if half_log < 709.0 else math.inf


@dataclass(frozen=True)
class SchwartzReport:
    """Per-order outcome of the ``sup_j j^s |u_j| < inf`` test.

    ``ratios[s-1]`` is ``max_tail j^s|u_j| / max_head j^s|u_j|``; an order
    passes when the ratio stays below the margin. ``orders`` are the passing
    orders, ``decay_order`` the fitted power-law slope of ``|u_j|`` on the
    window (``inf`` once the coefficients drop under the noise floor).
    """

    orders: tuple
    ratios: tuple
    decay_order: float
    verdict: str
    first_failure: int = None

    @property
    def consistent(self):
        return self.verdict == "consistent"


def schwartz_test(dec, u, s_max=8, margin=SCHWARTZ_MARGIN):
    """Check that ``j^s |u_j|`` stays bounded for ``s = 1..s_max``.

    Coefficients below the noise floor ``1e-14 max|u_j|`` are treated as zero.
    The trusted range is split into a head (first two thirds) and a tail;
    boundedness at order ``s`` means the tail maximum of ``j^s |u_j|`` does not
    exceed ``margin`` times the head maximum.
    """
    if dec.J_trusted < SCHWARTZ_MIN_TRUSTED:
        raise DomainError(
            f"Schwartz test needs >= {SCHWARTZ_MIN_TRUSTED} trusted pairs, got {dec.J_trusted}"
        )
    if s_max < 1:
        raise DomainError(f"s_max must be >= 1, got {s_max}")
    values = np.asarray(u.values if isinstance(u, ExpansionCoefficients) else u)
    mag = np.abs(values[: dec.J_trusted]).astype(np.float64)
    if mag.shape[0] < dec.J_trusted:
        mag = np.concatenate([mag, np.zeros(dec.J_trusted - mag.shape[0])])
    if not np.any(mag > 0):
        raise DomainError("Schwartz test on the zero vector")
    mag[mag < NOISE_FLOOR * mag.max()] = 0.0
    J = mag.shape[0]
    j = np.arange(1, J + 1, dtype=np.float64)
    split = (2 * J) // 3
    ratios, orders = [], []
    first_failure = None
    with np.errstate(divide="ignore"):
        loga = np.log(mag)
        for s in range(1, s_max + 1):
            w = s * np.log(j) + loga
            head, tail = w[:split].max(), w[split:].max()
            ratio = float(np.exp(tail - head)) if np.isfinite(head) else float("inf")
            ratios.append(ratio)
            if ratio <= margin:
                orders.append(s)
            elif first_failure is None:
                first_failure = s
    nz = mag > 0
    if not nz[split:].any() or nz.sum() < 2:
        decay = float("inf")
    else:
        X = np.column_stack([np.ones(nz.sum()), np.log(j[nz])])
        coef, *_ = np.linalg.lstsq(X, np.log(mag[nz]), rcond=None)
        decay = float(-coef[1])
    verdict = "consistent" if first_failure is None else "inconsistent"
    return SchwartzReport(tuple(orders), tuple(ratios), decay, verdict, first_failure)


# ----------------------------------------------------------------------------
# export


def write_spectrum_csv(path, dec, count=None):
    count = dec.J_trusted if count is None else count
    res = dec.residuals if dec.residuals is not None else np.full(count, np.nan)
    rows = ((j + 1, float(dec.eigenvalues[j]), float(res[j])) for j in range(count))
    return write_csv(path, ("j", "lambda", "residual"), rows)


def write_weyl_csv(path, fit):
    header = ("exponent_hat", "prefactor_hat", "exponent_theory", "window_lo", "window_hi", "residual")
    row = (fit.exponent_hat, fit.prefactor_hat, fit.exponent_theory, fit.window[0], fit.window[1], fit.residual)
    return write_csv(path, header, [row])
