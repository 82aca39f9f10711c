"""Kernel backend selection.

The hot numeric loops (training epochs, Kendall pair counting) exist twice:
once as numba @njit kernels and once as vectorized numpy twins. The active
backend is chosen at import time from the ``GDBC_BACKEND`` environment
variable: ``numba`` (default when importable) or ``numpy``.
"""

from __future__ import annotations

import os

_ENV_VAR = "GDBC_BACKEND"
_VALID = ("numba", "numpy")

try:
    import numba  # noqa: F401

    _NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised via GDBC_BACKEND=numpy
    _NUMBA_AVAILABLE = False


def _resolve(requested: str | None) -> str:
    if requested is None or requested == "":
        return "numba" if _NUMBA_AVAILABLE else "numpy"
    requested = requested.strip().lower()
    if requested not in _VALID:
        raise ValueError(
            f"{_ENV_VAR} must be one of {_VALID}, got {requested!r}"
        )
    if requested == "numba" and not _NUMBA_AVAILABLE:
        raise ValueError(f"{_ENV_VAR}=numba requested but numba is not importable")
    return requested


ACTIVE_BACKEND = _resolve(os.environ.get(_ENV_VAR))


def active_backend() -> str:
    """Name of the backend selected at import time."""
    return ACTIVE_BACKEND
