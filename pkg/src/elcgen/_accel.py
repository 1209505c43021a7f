"""Optional numba acceleration.

Hot kernels are written in a numba-compatible subset of numpy and wrapped with
:func:`kernel`.  Setting ``ELCGEN_DISABLE_NUMBA=1`` in the environment (before
import) keeps every kernel as plain Python/numpy, which is handy for debugging
and for the benchmark that compares both paths.
"""

import os

_FLAG = os.environ.get("ELCGEN_DISABLE_NUMBA", "").strip().lower()
NUMBA_ENABLED = _FLAG not in ("1", "true", "yes", "on")

if NUMBA_ENABLED:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False


def kernel(fn):
    """Compile ``fn`` with ``numba.njit`` when enabled, else return it as-is.

    The pure function is always reachable as ``.py_func`` so callers and
    benchmarks can run the fallback path regardless of the flag.
    """
    if NUMBA_ENABLED:
        return numba.njit(cache=True, nogil=True)(fn)
    fn.py_func = fn
    return fn
