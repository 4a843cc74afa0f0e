"""Eigenfunction expansions and the three Gelfand-Shilov regularity routes.

For a positive globally elliptic Shubin operator of anisotropic order (m, k)
with eigenpairs (lambda_j, phi_j), a function u lies in S^mu_nu with
mu = k t/(k+m), nu = m t/(k+m) when any of the following holds:

* iterates: |P^M u| <= R C^M (M!)^{kmt/(k+m)};
* coefficients: |u_j| <= C exp(-eps j^{1/(tn)});
* seminorms: |u|_r <= R C^r r^{kmrt/(k+m)}.

Each route is fitted on finite data here; :func:`classify` combines them.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import itertools
import math

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from . import kernels
from .errors import (
    DomainError,
    FitError,
    InsufficientDataError,
    LevelSetError,
    NotEllipticError,
    TruncationError,
)
from .hermite import (
    MAX_QUADRATURE_NODES,
    BasisSpec,
    default_quadrature_nodes,
    from_tensor,
    gauss_hermite_rule,
    grlex_indices,
    hermite_values,
    to_tensor,
)
from .io import keyvalue_text, write_csv, write_keyvalue
from .operators import ellipticity_check
from .spectral import ExpansionCoefficients, NOISE_FLOOR, SpectralDecomposition

__all__ = [
    "ExpansionCoefficients",
    "SampledFunction",
    "IterateSeries",
    "GevreyFit",
    "DecayFit",
    "SeminormFit",
    "GSClassification",
    "ClassifyConfig",
    "EllipticEstimateReport",
    "expand",
    "expand_hermite",
    "reconstruct",
    "iterate_norms",
    "gevrey_fit",
    "coefficient_decay_fit",
    "level_set",
    "seminorm",
    "seminorm_growth_fit",
    "representable_orders",
    "stable_orders",
    "classify",
    "random_suite",
    "elliptic_estimate_check",
]

EPS = np.finfo(np.float64).eps
DECAY_MIN_USABLE = 20
DECAY_SKIP_HEAD = 10
DECAY_SKIP_TAIL = 5
GEVREY_MIN_M = 10
GEVREY_COND_MAX = 1e10
SEMINORM_MIN_ORDERS = 8
SEMINORM_R_MAX = 12
SEMINORM_ROUNDING = 1e-6
SEMINORM_TRUNCATION = 1e-6
ITERATE_M_CAP = 100
ITERATE_REACH = 0.9
ROUTE_TOL = 0.25
BOUNDARY_MARGIN = 0.1


# ----------------------------------------------------------------------------
# types


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """A function on R^n given by a vectorized evaluator.

    ``evaluator(x_1, ..., x_n)`` receives broadcastable coordinate arrays and
    returns values of the same shape. ``symmetry_hint`` optionally names the
    parity of each axis (``"even"``, ``"odd"`` or ``None``); coefficients of the
    wrong parity are then set to exact zeros.
    """

    evaluator: object
    n: int = 1
    symmetry_hint: tuple = None
    name: str = ""

    def __call__(self, *coords):
        return self.evaluator(*coords)

    @classmethod
    def gaussian(cls, n=1, width=1.0):
        """exp(-|x|^2 / width^2)."""
        inv = 1.0 / (width * width)
        return cls(
            lambda *xs: np.exp(-inv * sum(x * x for x in xs)),
            n,
            ("even",) * n,
            f"gaussian:{width:g}",
        )


@dataclass(frozen=True)
class IterateSeries:
    """log|P^M u| for M = 0..M_max."""

    log_norms: np.ndarray
    M_max: int
    floor: float = 0.0

    @property
    def M(self):
        return np.arange(self.M_max + 1)


@dataclass(frozen=True)
class GevreyFit:
    theta_hat: float
    logC_hat: float
    logR_hat: float
    residual: float
    window: tuple


@dataclass(frozen=True)
class DecayFit:
    """Fit of |u_j| ~ C exp(-eps j^theta); ``t_hat = 1/(n theta)``.

    ``stats`` carries the weighted-sum and weighted-sup statistics built
    from eigenvalues (when a decomposition is attached).
    """

    epsilon_hat: float
    theta_hat: float
    logC_hat: float
    residual: float
    window: tuple
    t_hat: float
    usable: int
    stats: dict = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class SeminormFit:
    theta_hat: float
    t_hat: float
    logR_hat: float
    logC_hat: float
    residual: float
    orders: tuple
    norms: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class ClassifyConfig:
    route_tol: float = ROUTE_TOL
    margin: float = BOUNDARY_MARGIN
    floor: float = NOISE_FLOOR
    M_max: int = None
    M_cap: int = ITERATE_M_CAP
    r_max: float = SEMINORM_R_MAX
    decay_window: tuple = None


@dataclass(frozen=True)
class GSClassification:
    """Combined regularity estimate.

    ``route_estimates`` holds the t value used from each route (clipped at 1,
    ``None`` when the route is missing); ``raw_estimates`` the unclipped fits.
    ``mu_hat / nu_hat == k / m`` by construction.
    """

    t_hat: float
    mu_hat: float
    nu_hat: float
    route_estimates: dict
    raw_estimates: dict
    verdict: str
    space_kind: str
    gaps: dict = field(default_factory=dict)
    below_one: tuple = ()
    details: dict = field(default_factory=dict, repr=False)

    @property
    def kappa(self):
        return self.mu_hat / self.nu_hat


@dataclass(frozen=True)
class EllipticEstimateReport:
    C_empirical: float
    worst_case: int
    ratios: np.ndarray


# ----------------------------------------------------------------------------
# projection and synthesis


def _trusted_vectors(dec):
    return dec.eigenvectors[:, : dec.J_trusted]


def _parity_mask(hint, n, N):
    idx = grlex_indices(n, N)
    mask = np.ones(idx.shape[0], dtype=bool)
    for axis, parity in enumerate(hint):
        if parity == "even":
            mask &= idx[:, axis] % 2 == 0
        elif parity == "odd":
            mask &= idx[:, axis] % 2 == 1
        elif parity is not None:
            raise DomainError(f"unknown parity hint {parity!r}")
    return mask


def project_hermite(u, spec, rule=None):
    """Hermite coordinates of ``u`` by tensor Gauss-Hermite quadrature.

    Returns ``(coefficients, norm_sq)`` where ``norm_sq`` is the quadrature
    value of ``|u|^2``.
    """
    n, N_full = spec.n, spec.N
    if rule is None:
        rule = gauss_hermite_rule(min(default_quadrature_nodes(N_full), MAX_QUADRATURE_NODES))
    # past the node budget only the modes the rule resolves are projected
    N = min(N_full, len(rule) // 2)
    x, w = rule.nodes, rule.scaled_weights
    grids = np.meshgrid(*([x] * n), indexing="ij") if n > 1 else (x,)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        vals = np.asarray(u(*grids))
    if vals.shape != grids[0].shape:
        vals = np.broadcast_to(vals, grids[0].shape)
    if not np.all(np.isfinite(vals)):
        raise DomainError("function is not finite at every quadrature node")
    W = w
    for _ in range(n - 1):
        W = np.multiply.outer(W, w)
    norm_sq = float(np.sum(W * np.abs(vals) ** 2))
    if n == 1:
        c = kernels.hermite_project(N, x, w * vals)
    else:
        H = hermite_values(N, x)
        T = vals * W
        for axis in range(n):
            T = np.moveaxis(np.tensordot(H.T, T, axes=([1], [axis])), 0, axis)
        c = from_tensor(T, n, N)
    if N < N_full:
        full = np.zeros((N_full,) * n, dtype=c.dtype)
        full[(slice(0, N),) * n] = to_tensor(c, n, N)
        c = from_tensor(full, n, N_full)
    hint = getattr(u, "symmetry_hint", None)
    if hint:
        c = np.where(_parity_mask(hint, n, N_full), c, 0.0)
    return c, norm_sq


def expand(u, dec, rule=None, allow_coarse=False):
    """Coefficients ``u_j = (u, phi_j)`` over the trusted eigenpairs.

    ``u`` is first projected onto Hermite coordinates by quadrature (default
    ``2N + 64`` nodes per axis), then the eigenvector matrix is applied
    conjugate-transposed. A rule with fewer than ``2N`` nodes is refused unless
    ``allow_coarse`` is set. The default rule is capped at the quadrature node
    budget; beyond it only the first ``q/2`` Hermite modes are projected.
    """
    N = dec.spec.N
    if rule is not None and len(rule) < 2 * N and not allow_coarse:
        raise DomainError(f"quadrature with {len(rule)} nodes is too coarse for N = {N} (need {2 * N})")
    if rule is None:
        rule = gauss_hermite_rule(min(default_quadrature_nodes(N), MAX_QUADRATURE_NODES))
    c, norm_sq = project_hermite(u, dec.spec, rule)
    q = len(rule)
    return expand_hermite(c, dec, norm_sq=norm_sq, q=q)


def expand_hermite(c, dec, norm_sq=None, q=0):
    """Eigen-coefficients of a function given by its Hermite coordinates."""
    c = np.asarray(c)
    if c.shape[0] != dec.spec.size:
        raise DomainError(f"expected {dec.spec.size} Hermite coordinates, got {c.shape[0]}")
    if not np.all(np.isfinite(c)):
        raise DomainError("Hermite coordinates must be finite")
    V = _trusted_vectors(dec)
    values = V.conj().T @ c
    if not np.iscomplexobj(c) and not np.iscomplexobj(V):
        values = values.astype(np.float64)
    if norm_sq is None:
        norm_sq = float(np.vdot(c, c).real)
    tail = 1.0 - float(np.vdot(values, values).real) / norm_sq if norm_sq > 0 else float("nan")
    return ExpansionCoefficients(values, dec, tail, q)


def hermite_coordinates(c, dec):
    """Hermite coordinates ``sum_j u_j phi_j`` of eigen-coefficients."""
    values = np.asarray(c.values if isinstance(c, ExpansionCoefficients) else c)
    return dec.eigenvectors[:, : values.shape[0]] @ values


def reconstruct(c, dec, x):
    """Evaluate ``sum_j u_j phi_j`` at a point (or rows of points) ``x``.

    For ``n = 1`` any array of abscissae is accepted; otherwise ``x`` has a
    trailing axis of length ``n``.
    """
    h = hermite_coordinates(c, dec)
    n, N = dec.spec.n, dec.spec.N
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DomainError("reconstruction point must be finite")
    if n == 1:
        out = kernels.hermite_synthesize(h, x.ravel())
        return out.reshape(x.shape) if x.ndim else out[0]
    pts = np.atleast_2d(x)
    if pts.shape[-1] != n:
        raise DomainError(f"points must have {n} coordinates")
    idx = grlex_indices(n, N)
    prod = np.ones((pts.shape[0], idx.shape[0]))
    for axis in range(n):
        prod *= hermite_values(N, pts[:, axis])[:, idx[:, axis]]
    out = prod @ h
    return out if x.ndim > 1 else out[0]


# ----------------------------------------------------------------------------
# route 1: iterates


def _usable(c, dec, floor):
    values = np.asarray(c.values if isinstance(c, ExpansionCoefficients) else c)
    J = dec.J_trusted
    if values.shape[0] > J:
        if np.any(values[J:] != 0):
            raise TruncationError(f"coefficients are supported beyond the {J} trusted eigenpairs")
        values = values[:J]
    mag = np.abs(values)
    top = mag.max() if mag.size else 0.0
    if top == 0.0:
        raise DomainError("all coefficients vanish; iterate norms are undefined")
    keep = np.flatnonzero((mag > 0) & (mag >= floor * top))
    return keep, mag


def iterate_norms(dec, c, M_max, floor=0.0):
    """``log |P^M u|`` for ``M = 0..M_max`` through Parseval.

    ``|P^M u|^2 = sum_j lambda_j^{2M} |u_j|^2`` is accumulated as a
    log-sum-exp, so neither the powers nor the sum overflow. Zero
    coefficients (and, with ``floor > 0``, those below ``floor * max|u_j|``)
    are skipped.
    """
    M_max = int(M_max)
    if M_max < 1:
        raise DomainError(f"M_max must be >= 1, got {M_max}")
    keep, mag = _usable(c, dec, floor)
    lam = dec.eigenvalues[keep]
    if np.any(lam <= 0):
        raise DomainError("iterate norms need positive eigenvalues")
    out = kernels.log_iterate_norms(np.log(lam), np.log(mag[keep]), M_max)
    return IterateSeries(out, M_max, floor)


def adaptive_M_max(dec, c, floor=NOISE_FLOOR, cap=ITERATE_M_CAP, reach=ITERATE_REACH):
    """Largest ``M <= cap`` whose dominant Parseval term sits inside the usable range.

    The dominant index of ``lambda_j^M |u_j|`` moves outward with ``M``; once
    it passes ``reach`` times the last usable index the series only sees the
    cut-off and degrades to geometric growth.
    """
    keep, mag = _usable(c, dec, floor)
    ll = np.log(dec.eigenvalues[keep])
    la = np.log(mag[keep])
    limit = reach * (keep[-1] + 1)
    best = 1
    for M in range(1, cap + 1):
        if keep[np.argmax(M * ll + la)] < limit:
            best = M
        else:
            break
    return best


def gevrey_fit(series, window=None):
    """Least squares of ``log|P^M u|`` on ``{1, M, log M!}``.

    The default window is ``M in [M_max/4, M_max]``; ``theta_hat`` is the
    coefficient of ``log M!``, ``logC_hat`` that of ``M``.
    """
    if series.M_max < GEVREY_MIN_M:
        raise FitError(f"Gevrey fit needs M_max >= {GEVREY_MIN_M}, got {series.M_max}")
    lo, hi = window if window is not None else (math.ceil(series.M_max / 4), series.M_max)
    M = np.arange(lo, hi + 1, dtype=np.float64)
    if M.size < 4:
        raise FitError(f"Gevrey window [{lo}, {hi}] is too short")
    X = np.column_stack([np.ones_like(M), M, gammaln(M + 1.0)])
    scale = np.linalg.norm(X, axis=0)
    cond = np.linalg.cond(X / scale)
    if not np.isfinite(cond) or cond > GEVREY_COND_MAX:
        raise FitError(f"Gevrey design is ill-conditioned (cond = {cond:.3g})")
    y = series.log_norms[lo : hi + 1]
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    return GevreyFit(float(coef[2]), float(coef[1]), float(coef[0]),
                     float(np.sqrt(np.mean(resid ** 2))), (int(lo), int(hi)))


# ----------------------------------------------------------------------------
# route 2: coefficient decay


def _decay_rss(j, y, theta):
    X = np.column_stack([np.ones_like(j), -(j ** theta)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    r = y - X @ coef
    return float(r @ r), coef


def coefficient_decay_fit(c, n=1, dec=None, floor=NOISE_FLOOR, window=None, params=None):
    """Fit ``|u_j| ~ C exp(-eps j^theta)`` and report ``t_hat = 1/(n theta)``.

    The window drops the first 10 indices, the last 5 of the trusted range
    and every coefficient below ``floor * max|u_j|``. ``log C`` is located
    by variable projection (``theta`` minimizing the linear residual); stage
    (a) then regresses ``log(log C - log|u_j|)`` on ``log j`` for
    ``theta_hat`` and stage (b) refits ``eps`` and ``log C`` at that power.

    With a decomposition and ``params = (n, m, k)`` available, ``stats``
    holds the partial sums of ``|u_j|^2 exp(eps' lambda_j^{(k+m)/(kmt)})``
    and the corresponding sup, where ``eps'`` is matched to half the fitted
    exponential rate.
    """
    dec = dec if dec is not None else getattr(c, "dec_ref", None)
    values = np.asarray(c.values if isinstance(c, ExpansionCoefficients) else c)
    top_index = values.shape[0]
    if dec is not None:
        top_index = min(top_index, dec.J_trusted)
    mag = np.abs(values[:top_index])
    peak = mag.max() if mag.size else 0.0
    if peak == 0.0:
        raise InsufficientDataError("all coefficients vanish", usable=0)
    j = np.arange(1, top_index + 1, dtype=np.float64)
    lo, hi = DECAY_SKIP_HEAD + 1, top_index - DECAY_SKIP_TAIL
    if window is not None:
        lo, hi = max(lo, int(window[0])), min(hi, int(window[1]))
    sel = (j >= lo) & (j <= hi) & (mag > 0) & (mag >= floor * peak)
    usable = int(sel.sum())
    if usable < DECAY_MIN_USABLE:
        raise InsufficientDataError(
            f"only {usable} coefficients usable for the decay fit (need {DECAY_MIN_USABLE})",
            usable=usable,
        )
    jj, y = j[sel], np.log(mag[sel])
    opt = minimize_scalar(lambda th: _decay_rss(jj, y, th)[0], bounds=(0.02, 4.0),
                          method="bounded", options={"xatol": 1e-12})
    _, coef = _decay_rss(jj, y, opt.x)
    logC0 = coef[0]
    gap = logC0 - y
    ok = gap > 0
    if ok.sum() < 3:
        raise FitError("decay fit could not locate a prefactor above the data")
    A = np.column_stack([np.ones(ok.sum()), np.log(jj[ok])])
    ca, *_ = np.linalg.lstsq(A, np.log(gap[ok]), rcond=None)
    theta = float(ca[1])
    if not theta > 0:
        raise FitError(f"decay power must be positive, fitted {theta:.3g}")
    X = np.column_stack([np.ones_like(jj), -(jj ** theta)])
    cb, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ cb
    t_hat = 1.0 / (n * theta)
    stats = {}
    params = params if params is not None else (dec.params if dec is not None else None)
    if dec is not None and params is not None and cb[1] > 0:
        stats = _weighted_statistics(mag, dec.eigenvalues[:top_index], params, t_hat, cb[1], theta, sel)
    return DecayFit(float(cb[1]), theta, float(cb[0]), float(np.sqrt(np.mean(resid ** 2))),
                    (int(jj[0]), int(jj[-1])), float(t_hat), usable, stats)


def _weighted_statistics(mag, lam, params, t, eps, theta, sel):
    _, m, k = params
    power = (k + m) / (k * m * t)
    j = np.arange(1, mag.shape[0] + 1, dtype=np.float64)
    w = np.where(lam > 0, np.abs(lam) ** power, 0.0)
    ratio = np.median(w[sel] / j[sel] ** theta)
    eps_w = 0.5 * eps / ratio
    terms = mag ** 2 * np.exp(np.minimum(eps_w * w, 700.0))
    partial = np.cumsum(terms)
    return {
        "epsilon": float(eps_w),
        "exponent": float(power),
        "partial_sums": partial,
        "sum": float(partial[-1]),
        "sup": float(terms.max()),
    }


# ----------------------------------------------------------------------------
# route 3: seminorms


def _as_fraction(r):
    if isinstance(r, Fraction):
        return r
    if isinstance(r, int):
        return Fraction(r)
    return Fraction(str(r)).limit_denominator(10_000)


def _compositions(total, parts):
    """All tuples of ``parts`` nonnegative ints summing to ``total``, lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def level_set(m, k, r, n=1):
    """All ``(alpha, beta)`` with ``|alpha|/m + |beta|/k = r``."""
    r = _as_fraction(r)
    if r < 0:
        raise LevelSetError(f"order r must be nonnegative, got {r}")
    out = []
    for A in range(int(math.floor(m * r)) + 1):
        B = k * (r - Fraction(A, m))
        if B < 0 or B.denominator != 1:
            continue
        for alpha in _compositions(A, n):
            for beta in _compositions(int(B), n):
                out.append((alpha, beta))
    if not out:
        raise LevelSetError(f"no (alpha, beta) with |alpha|/{m} + |beta|/{k} = {r}")
    return out


def sublevel_set(m, k, r=1, n=1):
    """All ``(alpha, beta)`` with ``|alpha|/m + |beta|/k <= r``."""
    r = _as_fraction(r)
    out = []
    for A in range(int(math.floor(m * r)) + 1):
        for B in range(int(math.floor(k * (r - Fraction(A, m)))) + 1):
            for alpha in _compositions(A, n):
                for beta in _compositions(B, n):
                    out.append((alpha, beta))
    return out


def representable_orders(m, k, r_min, r_max):
    """Multiples of ``1/lcm(m, k)`` in ``[r_min, r_max]``; all have nonempty level sets."""
    step = Fraction(1, math.lcm(m, k))
    lo = math.ceil(_as_fraction(r_min) / step)
    hi = math.floor(_as_fraction(r_max) / step)
    return [i * step for i in range(lo, hi + 1)]


def _ladder_axis(T, axis, kind):
    """Exact x or d/dx along one axis; the axis grows by one entry."""
    T = np.moveaxis(T, axis, 0)
    L = T.shape[0]
    s = np.sqrt(np.arange(1, L + 1) / 2.0).reshape((L,) + (1,) * (T.ndim - 1))
    out = np.zeros((L + 1,) + T.shape[1:], dtype=T.dtype)
    # x h_j = sqrt(j/2) h_{j-1} + sqrt((j+1)/2) h_{j+1};  h_j' = sqrt(j/2) h_{j-1} - sqrt((j+1)/2) h_{j+1}
    up = s * T
    out[1:] += up if kind == "x" else -up
    out[: L - 1] += s[: L - 1] * T[1:]
    return np.moveaxis(out, 0, axis)


def apply_monomial_exact(T, alpha, beta, absolute=False):
    """``x^beta (d/dx)^alpha`` applied to a coefficient tensor without truncation.

    With ``absolute=True`` every step acts on magnitudes; the result bounds
    the rounding error of the signed computation.
    """
    for axis, (a, b) in enumerate(zip(alpha, beta)):
        for kind, count in (("d", a), ("x", b)):
            for _ in range(count):
                T = _ladder_axis(np.abs(T) if absolute else T, axis, "x" if absolute else kind)
    return T


def _tensor(u_hermite, spec):
    u = np.asarray(u_hermite)
    if u.shape[0] != spec.size:
        raise DomainError(f"expected {spec.size} Hermite coordinates, got {u.shape[0]}")
    return to_tensor(u, spec.n, spec.N)


def _pad_needed(pairs):
    return max((max(a + b for a, b in zip(al, be)) for al, be in pairs), default=0)


def _seminorm_tensor(T, pairs, absolute=False):
    return float(sum(np.linalg.norm(apply_monomial_exact(T, al, be, absolute)) for al, be in pairs))


def seminorm(u_hermite, params, r, spec):
    """``|u|_r = sum over the level set of |x^beta D^alpha u|``.

    Requires ``spec.pad`` to cover the largest per-axis order in the level
    set; the monomials act on the zero-padded coordinates, so every norm is
    exact for the truncated function.
    """
    n, m, k = params
    if spec.n != n:
        raise DomainError(f"basis dimension {spec.n} does not match operator dimension {n}")
    pairs = level_set(m, k, r, n)
    need = _pad_needed(pairs)
    if spec.pad < need:
        raise TruncationError(f"seminorm of order {r} needs pad >= {need}, basis has {spec.pad}")
    return _seminorm_tensor(_tensor(u_hermite, spec), pairs)


def stable_orders(u_hermite, params, spec, r_min=1, r_max=SEMINORM_R_MAX,
                  rounding=SEMINORM_ROUNDING, truncation=SEMINORM_TRUNCATION):
    """Representable orders, cut where the seminorm stops being trustworthy.

    An order is kept while (i) the rounding bound ``eps * |u|_r`` computed on
    magnitudes stays below ``rounding * |u|_r`` and (ii) dropping the upper half of
    the coordinates along every axis changes ``|u|_r`` by at most
    ``truncation`` relative. The first failing order ends the list.
    """
    n, m, k = params
    T = _tensor(u_hermite, spec)
    half = T.copy()
    for axis in range(n):
        sl = [slice(None)] * T.ndim
        sl[axis] = slice(spec.N // 2, None)
        half[tuple(sl)] = 0
    kept = []
    for r in representable_orders(m, k, r_min, r_max):
        pairs = level_set(m, k, r, n)
        value = _seminorm_tensor(T, pairs)
        if value == 0.0:
            break
        bound = EPS * _seminorm_tensor(T, pairs, absolute=True)
        if bound > rounding * value:
            break
        if abs(_seminorm_tensor(half, pairs) - value) > truncation * value:
            break
        kept.append(r)
    return kept


def seminorm_growth_fit(u_hermite, params, r_list, spec, norms=None):
    """Least squares of ``log|u|_r`` on ``{1, r, r log r}``.

    ``theta_hat`` is the ``r log r`` coefficient and ``t_hat = theta_hat (k+m)/(km)``.
    Precomputed ``norms`` may be passed for synthetic checks.
    """
    n, m, k = params
    orders = [_as_fraction(r) for r in r_list]
    if len(orders) < SEMINORM_MIN_ORDERS:
        raise FitError(f"seminorm fit needs >= {SEMINORM_MIN_ORDERS} orders, got {len(orders)}")
    if any(r <= 0 for r in orders):
        raise FitError("seminorm orders must be positive for the r log r regressor")
    if norms is None:
        norms = np.array([seminorm(u_hermite, params, r, spec) for r in orders])
    norms = np.asarray(norms, dtype=np.float64)
    if np.any(norms <= 0):
        raise FitError("seminorms must be positive to be fitted on a log scale")
    r = np.array([float(v) for v in orders])
    X = np.column_stack([np.ones_like(r), r, r * np.log(r)])
    y = np.log(norms)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    theta = float(coef[2])
    return SeminormFit(theta, theta * (k + m) / (k * m), float(coef[0]), float(coef[1]),
                       float(np.sqrt(np.mean(resid ** 2))), tuple(orders), norms)


# ----------------------------------------------------------------------------
# classification


def _space_note(t_hat, lo, hi, margin):
    if not np.isfinite(t_hat):
        return "no route estimate available"
    span = f"route estimates span t in [{lo:.4g}, {hi:.4g}]"
    if abs(t_hat - 1.0) <= margin:
        return f"{span}; boundary case t near 1, inductive vs projective left undecided"
    if t_hat > 1.0 + margin:
        return (f"{span}; t_hat above 1 + {margin:g}: consistent with the inductive space at t_hat "
                "and with projective spaces at any larger t; finite data cannot separate them")
    return f"{span}; estimate below 1 - {margin:g}, reported at the smallest admissible t = 1"


def classify(dec, c, u_hermite, params, config=None, spec=None):
    """Estimate ``t`` by the three routes and combine them.

    Route values below 1 are flagged and raised to 1: every nonzero element of
    a Gelfand-Shilov space already satisfies the bounds at ``t = 1``, so
    smaller fits only say the function is at least that regular. Missing
    routes are recorded in ``gaps``. ``t_hat`` is the median of the available
    routes and the verdict is ``"consistent"`` when they agree pairwise within
    ``route_tol``.

    ``u_hermite`` should be the function's own Hermite coordinates. Passing
    the eigen-truncated reconstruction instead leaves a cut-off tail that the
    high-order seminorms amplify.
    """
    config = config or ClassifyConfig()
    n, m, k = params
    spec = spec or dec.spec
    raw, gaps, details = {}, {}, {}

    try:
        M_max = config.M_max or adaptive_M_max(dec, c, config.floor, config.M_cap)
        series = iterate_norms(dec, c, M_max, floor=config.floor)
        fit = gevrey_fit(series)
        raw["iterates"] = fit.theta_hat * (k + m) / (k * m)
        details["iterates"] = fit
        details["series"] = series
    except (FitError, DomainError, TruncationError) as exc:
        gaps["iterates"] = str(exc)

    try:
        fit = coefficient_decay_fit(c, n, dec, config.floor, config.decay_window, params)
        raw["decay"] = fit.t_hat
        details["decay"] = fit
    except (FitError, InsufficientDataError) as exc:
        gaps["decay"] = str(exc)

    try:
        if u_hermite is None:
            raise FitError("no Hermite coordinates supplied")
        work = BasisSpec(spec.n, spec.N, max(spec.pad, int(math.ceil(max(m, k) * config.r_max))))
        orders = stable_orders(u_hermite, params, work, 1, config.r_max)
        fit = seminorm_growth_fit(u_hermite, params, orders, work)
        raw["seminorms"] = fit.t_hat
        details["seminorms"] = fit
    except (FitError, DomainError, LevelSetError, TruncationError) as exc:
        gaps["seminorms"] = str(exc)

    routes = {name: (max(1.0, raw[name]) if name in raw else None)
              for name in ("iterates", "decay", "seminorms")}
    below = tuple(name for name, v in raw.items() if v < 1.0)
    avail = [v for v in routes.values() if v is not None]
    if avail:
        t_hat = float(np.median(avail))
        spread = max(avail) - min(avail)
        if len(avail) < 2:
            verdict = "partial"
        else:
            verdict = "consistent" if spread <= config.route_tol else "inconsistent"
        note = _space_note(t_hat, min(avail), max(avail), config.margin)
    else:
        t_hat, verdict, note = float("nan"), "partial", _space_note(float("nan"), 0, 0, 0)
    mu = k * t_hat / (k + m)
    nu = m * t_hat / (k + m)
    return GSClassification(t_hat, mu, nu, routes, raw, verdict, note, gaps, below, details)


# ----------------------------------------------------------------------------
# elliptic estimate


def random_suite(n=1, count=20, modes=16, seed=0):
    """Fixed random unit vectors supported on the first ``modes`` functions per axis.

    The vectors are returned as tensors of shape ``(modes,)*n`` so they embed
    identically into any truncation ``N >= modes``.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        T = rng.standard_normal((modes,) * n) + 1j * rng.standard_normal((modes,) * n)
        out.append(T / np.linalg.norm(T))
    return out


def _embed(u, spec):
    u = np.asarray(u)
    if u.ndim == 1 and u.shape[0] == spec.size:
        return to_tensor(u, spec.n, spec.N)
    if u.ndim != spec.n or any(s > spec.N for s in u.shape):
        raise DomainError("suite vector does not fit the truncation")
    T = np.zeros((spec.N,) * spec.n, dtype=u.dtype)
    T[tuple(slice(0, s) for s in u.shape)] = u
    return T


def _add_grown(acc, T):
    if acc is None:
        return T
    shape = tuple(max(a, b) for a, b in zip(acc.shape, T.shape))
    out = np.zeros(shape, dtype=np.result_type(acc.dtype, T.dtype, np.complex128))
    out[tuple(slice(0, s) for s in acc.shape)] += acc
    out[tuple(slice(0, s) for s in T.shape)] += T
    return out


def apply_operator_exact(P, T):
    """``P u`` for a coefficient tensor, without truncation (the result grows)."""
    acc = None
    for t in P.terms:
        phase = (1.0, -1j, -1.0, 1j)[sum(t.alpha) % 4]
        acc = _add_grown(acc, complex(t.coeff) * phase * apply_monomial_exact(T, t.alpha, t.beta))
    return acc


def elliptic_estimate_check(P, suite, spec):
    """Largest ratio ``sum_{|a|/m+|b|/k<=1} |x^b D^a u| / (|Pu| + |u|)`` over a suite.

    Norms are exact for each (truncated) suite vector. ``worst_case`` is the
    index of the maximizing vector.
    """
    if not suite:
        raise DomainError("the elliptic estimate needs a nonempty suite")
    if not P.terms:
        raise NotEllipticError("the zero operator is not elliptic")
    report = ellipticity_check(P, grid=64 if P.n == 1 else 24)
    if not report.elliptic:
        raise NotEllipticError(f"operator is not globally elliptic ({report.verdict})", report)
    pairs = sublevel_set(P.m, P.k, 1, P.n)
    ratios = []
    for u in suite:
        T = _embed(u, spec)
        lhs = _seminorm_tensor(T, pairs)
        rhs = float(np.linalg.norm(apply_operator_exact(P, T))) + float(np.linalg.norm(T))
        if rhs == 0.0:
            raise DomainError("Pu and u both vanish for a suite vector")
        ratios.append(lhs / rhs)
    ratios = np.array(ratios)
    worst = int(np.argmax(ratios))
    return EllipticEstimateReport(float(ratios[worst]), worst, ratios)


# ----------------------------------------------------------------------------
# export


def write_coefficients_csv(path, c):
    values = np.asarray(c.values if isinstance(c, ExpansionCoefficients) else c)
    rows = ((j + 1, float(v.real), float(v.imag), float(abs(v))) for j, v in enumerate(values.astype(complex)))
    return write_csv(path, ("j", "re", "im", "abs"), rows)


def write_iterates_csv(path, series):
    rows = ((M, float(v)) for M, v in enumerate(series.log_norms))
    return write_csv(path, ("M", "log_norm"), rows)


def _route_text(v):
    return "missing" if v is None else v


def classification_pairs(cls):
    return [
        ("t_hat", cls.t_hat),
        ("mu_hat", cls.mu_hat),
        ("nu_hat", cls.nu_hat),
        ("route_iterates", _route_text(cls.route_estimates.get("iterates"))),
        ("route_decay", _route_text(cls.route_estimates.get("decay"))),
        ("route_seminorms", _route_text(cls.route_estimates.get("seminorms"))),
        ("verdict", cls.verdict),
        ("space_kind_note", cls.space_kind),
    ] + [(f"raw_{name}", _route_text(cls.raw_estimates.get(name)))
         for name in ("iterates", "decay", "seminorms")] + [(f"gap_{name}", msg.replace("\n", " ")) for name, msg in sorted(cls.gaps.items())] + (
        [("below_one", ",".join(cls.below_one))] if cls.below_one else []
    )


def classification_text(cls):
    return keyvalue_text(classification_pairs(cls))


def write_classification(path, cls):
    return write_keyvalue(path, classification_pairs(cls))
