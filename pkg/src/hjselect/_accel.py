"""Optional numba acceleration.

Kernels are written once in numba-compatible Python and compiled with
``njit`` when numba is importable.  Setting ``HJSELECT_DISABLE_NUMBA=1``
selects the pure-numpy implementations instead.
"""

import os

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def numba_enabled():
    flag = os.environ.get("HJSELECT_DISABLE_NUMBA", "").strip().lower()
    return HAVE_NUMBA and flag not in ("1", "true", "yes", "on")


def jit(func):
    """Compile ``func`` with numba if available; otherwise return it unchanged."""
    if HAVE_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func


def worker_count():
    try:
        n = int(os.environ.get("HJSELECT_THREADS", "0"))
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return max(1, n)
