"""Backend selection for the compiled kernels.

Set ``SHUBIN_BACKEND=numpy`` to force the pure-numpy path; the default is
``numba`` whenever numba imports cleanly.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

BACKENDS = ("numba", "numpy")


def _requested_backend():
    name = os.environ.get("SHUBIN_BACKEND", "numba").strip().lower()
    if name not in BACKENDS:
        raise ValueError(f"SHUBIN_BACKEND must be one of {BACKENDS}, got {name!r}")
    if name == "numba" and numba is None:
        return "numpy"
    return name


BACKEND = _requested_backend()
HAVE_NUMBA = numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity otherwise."""
    if numba is None:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
