"""Kernel backend selection.

The hot pairwise loops exist twice: a numba ``@njit`` version and a pure
numpy version. ``TSNE_DYNAMICS_BACKEND=numpy`` forces the numpy path; the
default is numba whenever it imports.
"""

import os

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is optional
    numba = None
    HAS_NUMBA = False

_requested = os.environ.get("TSNE_DYNAMICS_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(
        f"TSNE_DYNAMICS_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

USE_NUMBA = HAS_NUMBA and _requested == "numba"
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func):
    """Compile ``func`` with numba if available, else return it unchanged."""
    if not HAS_NUMBA:
        return func
    return numba.njit(cache=True, fastmath=False)(func)


def pick(numba_impl, numpy_impl):
    return numba_impl if USE_NUMBA else numpy_impl
