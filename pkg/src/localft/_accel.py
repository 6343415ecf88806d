"""Optional numba acceleration for the scalar map kernels.

Set ``LOCALFT_NO_NUMBA=1`` to run the kernels as plain Python/numpy code.
Both paths execute the same function bodies.
"""
import os

_disabled = os.environ.get("LOCALFT_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _disabled:
        raise ImportError
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def jit(fn):
    """Compile ``fn`` in nopython mode when numba is enabled, else return it unchanged."""
    if HAS_NUMBA:
        return _njit(cache=True, nogil=True)(fn)
    return fn


BACKEND = "numba" if HAS_NUMBA else "python"
