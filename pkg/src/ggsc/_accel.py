"""Optional numba acceleration.

Numerical kernels in this package are written as straight-line Python that
numba can compile 1:1.  When numba is importable the decorated functions
are jitted (cached, nogil so thread pools scale); otherwise they run as-is.
Either way the arithmetic is identical IEEE-754 double/int64 operations in
the same order, so results are bit-identical with and without numba.
"""

from __future__ import annotations

try:
    from numba import njit as _njit

    HAVE_NUMBA = True

    def jit(func):
        return _njit(cache=True, nogil=True)(func)

except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def jit(func):
        return func
