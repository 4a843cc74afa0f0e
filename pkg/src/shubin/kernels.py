"""Hot numeric loops, each in a numba and a pure-numpy flavour.

The Hermite kernels run the normalized three-term recurrence

    h_{n+1} = sqrt(2/(n+1)) x h_n - sqrt(n/(n+1)) h_{n-1}

on a mantissa that is rescaled by powers of two whenever it grows large; the
Gaussian factor exp(-x^2/2) is folded into the binary exponent from the start.
This keeps every h_n(x) representable for |x| up to a few hundred and any N,
and values that would land in the subnormal range are returned as exact
zeros.

Public functions dispatch on ``backend`` (``"numba"`` / ``"numpy"``), which
defaults to :data:`shubin._accel.BACKEND`.
"""

import math

import numpy as np

from . import _accel
from ._accel import njit

_HALF_LOG2E = 0.5 / math.log(2.0)
_PI_M14 = math.pi ** -0.25
_RESCALE_EXP = 300
_BIG = 2.0 ** _RESCALE_EXP
_SMALL = 2.0 ** -_RESCALE_EXP
_TINY = np.finfo(np.float64).tiny


def _coefficients(N):
    n = np.arange(N, dtype=np.float64)
    a = np.sqrt(2.0 / (n + 1.0))
    b = np.sqrt(n / (n + 1.0))
    return a, b


# --------------------------------------------------------------------------
# numba kernels


@njit
def _seed_nb(x):
    t = -x * x * _HALF_LOG2E
    e = math.floor(t)
    return _PI_M14 * 2.0 ** (t - e), int(e)


@njit
def _table_nb(x, a, b, out, flushed):
    N = a.shape[0]
    for p in range(x.shape[0]):
        xp = x[p]
        h, e = _seed_nb(xp)
        hm = 0.0
        for n in range(N):
            v = math.ldexp(h, e)
            if abs(v) < _TINY:
                if h != 0.0:
                    flushed[p] = True
                v = 0.0
            out[p, n] = v
            hn = a[n] * xp * h - b[n] * hm
            hm = h
            h = hn
            if abs(h) > _BIG:
                h *= _SMALL
                hm *= _SMALL
                e += _RESCALE_EXP


@njit
def _project_nb(x, w, a, b, out):
    N = a.shape[0]
    for p in range(x.shape[0]):
        xp = x[p]
        wp = w[p]
        h, e = _seed_nb(xp)
        hm = 0.0
        for n in range(N):
            v = math.ldexp(h, e)
            if abs(v) >= _TINY:
                out[n] += wp * v
            hn = a[n] * xp * h - b[n] * hm
            hm = h
            h = hn
            if abs(h) > _BIG:
                h *= _SMALL
                hm *= _SMALL
                e += _RESCALE_EXP


@njit
def _synthesize_nb(x, c, a, b, out):
    N = a.shape[0]
    for p in range(x.shape[0]):
        xp = x[p]
        h, e = _seed_nb(xp)
        hm = 0.0
        acc = 0.0
        for n in range(N):
            v = math.ldexp(h, e)
            if abs(v) >= _TINY:
                acc += c[n] * v
            hn = a[n] * xp * h - b[n] * hm
            hm = h
            h = hn
            if abs(h) > _BIG:
                h *= _SMALL
                hm *= _SMALL
                e += _RESCALE_EXP
        out[p] = acc


@njit
def _sumsq_nb(x, a, b, out):
    N = a.shape[0]
    for p in range(x.shape[0]):
        xp = x[p]
        h, e = _seed_nb(xp)
        hm = 0.0
        acc = 0.0
        for n in range(N):
            v = math.ldexp(h, e)
            acc += v * v
            hn = a[n] * xp * h - b[n] * hm
            hm = h
            h = hn
            if abs(h) > _BIG:
                h *= _SMALL
                hm *= _SMALL
                e += _RESCALE_EXP
        out[p] = acc


@njit
def _log_iterates_nb(loglam, logabs, M_max, out):
    J = loglam.shape[0]
    for M in range(M_max + 1):
        top = -np.inf
        for j in range(J):
            s = 2.0 * M * loglam[j] + 2.0 * logabs[j]
            if s > top:
                top = s
        acc = 0.0
        for j in range(J):
            acc += math.exp(2.0 * M * loglam[j] + 2.0 * logabs[j] - top)
        out[M] = 0.5 * (top + math.log(acc))


# --------------------------------------------------------------------------
# numpy kernels


def _seed_np(x):
    t = -x * x * _HALF_LOG2E
    e = np.floor(t)
    return _PI_M14 * np.exp2(t - e), e.astype(np.int64)


def _recurrence_np(x, a, b):
    """Yield (n, values) for n = 0 .. N-1."""
    h, e = _seed_np(x)
    hm = np.zeros_like(x)
    for n in range(a.shape[0]):
        yield n, np.ldexp(h, e), h
        hn = a[n] * x * h - b[n] * hm
        hm = h
        h = hn
        big = np.abs(h) > _BIG
        if big.any():
            h = np.where(big, h * _SMALL, h)
            hm = np.where(big, hm * _SMALL, hm)
            e = np.where(big, e + _RESCALE_EXP, e)


def _table_np(x, a, b, out, flushed):
    for n, v, h in _recurrence_np(x, a, b):
        tiny = np.abs(v) < _TINY
        flushed |= tiny & (h != 0.0)
        out[:, n] = np.where(tiny, 0.0, v)


def _project_np(x, w, a, b, out):
    for n, v, _ in _recurrence_np(x, a, b):
        v = np.where(np.abs(v) < _TINY, 0.0, v)
        out[n] += np.dot(w, v)


def _synthesize_np(x, c, a, b, out):
    for n, v, _ in _recurrence_np(x, a, b):
        v = np.where(np.abs(v) < _TINY, 0.0, v)
        out += c[n] * v


def _sumsq_np(x, a, b, out):
    for n, v, _ in _recurrence_np(x, a, b):
        out += v * v


def _log_iterates_np(loglam, logabs, M_max, out):
    M = np.arange(M_max + 1, dtype=np.float64)[:, None]
    s = 2.0 * M * loglam[None, :] + 2.0 * logabs[None, :]
    top = s.max(axis=1)
    out[:] = 0.5 * (top + np.log(np.exp(s - top[:, None]).sum(axis=1)))


_IMPL = {
    "numba": dict(
        table=_table_nb,
        project=_project_nb,
        synthesize=_synthesize_nb,
        sumsq=_sumsq_nb,
        log_iterates=_log_iterates_nb,
    ),
    "numpy": dict(
        table=_table_np,
        project=_project_np,
        synthesize=_synthesize_np,
        sumsq=_sumsq_np,
        log_iterates=_log_iterates_np,
    ),
}


def _impl(name, backend):
    backend = backend or _accel.BACKEND
    if backend == "numba" and not _accel.HAVE_NUMBA:
        backend = "numpy"
    return _IMPL[backend][name]


def _points(x):
    return np.ascontiguousarray(np.atleast_1d(np.asarray(x, dtype=np.float64)).ravel())


def hermite_table(N, x, backend=None):
    """Values h_n(x_p) for n < N as an array of shape (len(x), N).

    Returns ``(values, flushed)``; ``flushed[p]`` is True when some entry at
    ``x_p`` was below the normal double range and has been set to zero.
    """
    x = _points(x)
    a, b = _coefficients(N)
    out = np.empty((x.shape[0], N))
    flushed = np.zeros(x.shape[0], dtype=np.bool_)
    _impl("table", backend)(x, a, b, out, flushed)
    return out, flushed


def hermite_project(N, x, w, backend=None):
    """c_n = sum_p w_p h_n(x_p), n < N, without materializing the table."""
    x = _points(x)
    w = np.asarray(w)
    a, b = _coefficients(N)
    if np.iscomplexobj(w):
        return hermite_project(N, x, w.real, backend) + 1j * hermite_project(N, x, w.imag, backend)
    out = np.zeros(N)
    _impl("project", backend)(x, np.ascontiguousarray(w, dtype=np.float64), a, b, out)
    return out


def hermite_synthesize(c, x, backend=None):
    """sum_n c_n h_n(x_p) for every point, streaming over n."""
    x = _points(x)
    c = np.asarray(c)
    if np.iscomplexobj(c):
        return hermite_synthesize(c.real, x, backend) + 1j * hermite_synthesize(c.imag, x, backend)
    a, b = _coefficients(c.shape[0])
    out = np.zeros(x.shape[0])
    _impl("synthesize", backend)(x, np.ascontiguousarray(c, dtype=np.float64), a, b, out)
    return out


def hermite_sumsq(N, x, backend=None):
    """sum_{n<N} h_n(x_p)^2 (the reciprocal Christoffel function in L2 form)."""
    x = _points(x)
    a, b = _coefficients(N)
    out = np.zeros(x.shape[0])
    _impl("sumsq", backend)(x, a, b, out)
    return out


def log_iterate_norms(loglam, logabs, M_max, backend=None):
    """0.5 * logsumexp_j(2 M loglam_j + 2 logabs_j) for M = 0 .. M_max."""
    loglam = np.ascontiguousarray(loglam, dtype=np.float64)
    logabs = np.ascontiguousarray(logabs, dtype=np.float64)
    out = np.empty(M_max + 1)
    _impl("log_iterates", backend)(loglam, logabs, int(M_max), out)
    return out
