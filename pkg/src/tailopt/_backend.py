"""Kernel backend selection.

Hot loops are compiled with numba by default.  Setting the environment
variable ``TAILOPT_PURE_NUMPY=1`` (before import) selects the uncompiled
pure-Python/numpy path instead; both paths run the exact same code and
produce bit-identical results.
"""

import os

_DISABLED = os.environ.get("TAILOPT_PURE_NUMPY", "").strip().lower() in {"1", "true", "yes"}

USE_NUMBA = not _DISABLED
if USE_NUMBA:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False


def maybe_njit(*args, **kwargs):
    """Return ``numba.njit`` or a no-op decorator, per the env flag.

    The no-op path attaches a ``py_func`` attribute so callers (and the
    benchmark) can address the plain-Python function uniformly.
    """
    if USE_NUMBA:
        return _njit(*args, **kwargs)

    def deco(fn):
        fn.py_func = fn
        return fn

    return deco
