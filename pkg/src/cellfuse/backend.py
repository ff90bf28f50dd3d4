"""Backend selection for the hot kernels.

The compute-heavy inner loops (2-D convolution forward/backward, texture
matrix construction, pairwise edge search) ship with two interchangeable
implementations: a numba ``@njit`` one and a pure-numpy one.  The environment
variable ``CELLFUSE_NUMBA`` forces the choice: ``1``/``true`` requires the
compiled path, ``0``/``false`` forces the numpy path.  When unset, the
compiled path is used whenever numba imports cleanly.

Both backends return identical values up to float rounding, and the compiled
kernels are serial (no threading), so results are bit-stable across runs.
"""

from __future__ import annotations

import logging
import os

_log = logging.getLogger(__name__)

_TRUE = ("1", "true", "on", "yes")
_FALSE = ("0", "false", "off", "no")


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _resolve() -> bool:
    raw = os.environ.get("CELLFUSE_NUMBA", "").strip().lower()
    avail = _numba_available()
    if raw in _TRUE:
        if not avail:
            raise ImportError(
                "CELLFUSE_NUMBA=1 requires numba, which failed to import"
            )
        return True
    if raw in _FALSE:
        return False
    if raw:
        raise ValueError(
            f"CELLFUSE_NUMBA must be one of {_TRUE + _FALSE}, got {raw!r}"
        )
    if not avail:
        _log.warning("numba unavailable; falling back to pure-numpy kernels")
    return avail


USE_NUMBA: bool = _resolve()


def use_numba() -> bool:
    """True when the compiled kernel backend is active for this process."""
    return USE_NUMBA


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
