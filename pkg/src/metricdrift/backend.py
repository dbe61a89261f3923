"""Kernel backend selection.

Hot numeric kernels exist in two variants: numba-jitted (default) and pure
numpy. Set METRICDRIFT_BACKEND=numpy to force the fallback path; =numba to
require the jitted path (raises if numba is unavailable). Both variants
expose the same function surface, so `from .backend import kernels` is the
only import site that needs to care.
"""

import os

_ENV_VAR = "METRICDRIFT_BACKEND"


def _select() -> str:
    choice = os.environ.get(_ENV_VAR, "").strip().lower()
    if choice not in ("", "numba", "numpy"):
        raise ValueError(
            f"{_ENV_VAR} must be 'numba' or 'numpy', got {choice!r}"
        )
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise
        return "numpy"
    return "numba"


BACKEND = _select()

if BACKEND == "numba":
    from . import _kernels_numba as kernels
else:
    from . import _kernels_numpy as kernels

__all__ = ["BACKEND", "kernels"]
