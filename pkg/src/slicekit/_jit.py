"""Optional numba acceleration.

All hot loops in this package are written as plain nested-loop kernels over
numpy arrays, so they run unchanged (just slower) when numba is missing or
disabled via the SLICEKIT_NO_JIT environment variable.
"""

import os


def _identity(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(func):
        return func

    return wrap


if os.environ.get("SLICEKIT_NO_JIT"):
    njit = _identity
    HAVE_NUMBA = False
else:
    try:
        from numba import njit  # noqa: F401

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - exercised only without numba
        njit = _identity
        HAVE_NUMBA = False
