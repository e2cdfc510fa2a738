"""Hot Monte Carlo kernels with a numba path and a pure-numpy fallback.

Set ``DECUPSIM_DISABLE_NUMBA=1`` (read at import) to force the numpy path.
Both backends consume identical counter-based random streams.
"""
import os

from . import _numpy

_DISABLED = os.environ.get("DECUPSIM_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError("numba disabled by DECUPSIM_DISABLE_NUMBA")
    from . import _numba
except ImportError:
    _numba = None

BACKENDS = {"numpy": _numpy}
if _numba is not None:
    BACKENDS["numba"] = _numba

DEFAULT_BACKEND = "numba" if _numba is not None else "numpy"


def get(backend: str | None = None):
    """Kernel module for ``backend`` (default: numba when available)."""
    name = backend or DEFAULT_BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
