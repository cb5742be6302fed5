"""JIT switch for the numeric kernels.

Kernels are written in scalar, numba-compatible Python. Setting the
environment variable ``SHOCKMETRICS_DISABLE_NUMBA=1`` (or running without
numba installed) leaves them as plain Python/numpy functions.
"""

import os

_DISABLED = os.environ.get("SHOCKMETRICS_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
)

try:
    if _DISABLED:
        raise ImportError
    import numba

    NUMBA_ENABLED = True
except ImportError:
    numba = None
    NUMBA_ENABLED = False


def jit(func=None, **options):
    """``numba.njit`` when acceleration is on, identity otherwise.

    The returned object always exposes ``py_func`` so callers can reach the
    interpreted version (needed when passing ordinary Python callables).
    """

    def wrap(f):
        if NUMBA_ENABLED:
            options.setdefault("cache", True)
            options.setdefault("nogil", True)
            return numba.njit(**options)(f)
        f.py_func = f
        return f

    if func is None:
        return wrap
    return wrap(func)


def backend_name():
    return "numba" if NUMBA_ENABLED else "python"
