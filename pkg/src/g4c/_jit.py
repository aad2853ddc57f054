"""Numba switch.

Hot kernels are written twice: a numba ``@njit`` version and a pure numpy
version.  ``USE_NUMBA`` picks which one the public names bind to.  Set
``G4C_DISABLE_JIT=1`` to force the numpy path (numba missing has the same
effect).
"""
import os

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator


def _flag(name):
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = HAVE_NUMBA and not _flag("G4C_DISABLE_JIT")


def thread_cap(default=1):
    """Worker cap from ``G4C_THREADS`` (at least 1)."""
    raw = os.environ.get("G4C_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return default
    return max(1, n)
