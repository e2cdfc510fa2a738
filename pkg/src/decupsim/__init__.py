"""Dynamical decoupling of qubits: group schedules, Eulerian control, noise engines."""
from importlib.metadata import PackageNotFoundError, version

from .errors import ConvergenceError, ValidationError
from .series import CoherenceSeries, QubitSpec

try:
    __version__ = version("decupsim")
except PackageNotFoundError:  # pragma: no cover - running from a source tree
    __version__ = "0.0.0"

__all__ = ["CoherenceSeries", "ConvergenceError", "QubitSpec", "ValidationError", "__version__"]
