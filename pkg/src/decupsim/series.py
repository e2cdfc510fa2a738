"""Result containers shared by the dephasing engines."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class QubitSpec:
    """Qubit drift ``omega0 sigma_z`` (spin-boson) or ``Omega sigma_z + Delta sigma_x`` (RTN)."""

    omega0: float = 1.0
    delta: float = 0.0


@dataclass(frozen=True, eq=False)
class CoherenceSeries:
    """``|rho_01(t)| / |rho_01(0)|`` sampled at increasing times.

    ``stderr`` is zero for exact methods and a Monte Carlo standard error
    otherwise.
    """

    times: np.ndarray
    coherence: np.ndarray
    stderr: np.ndarray = field(default=None)
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        c = np.asarray(self.coherence, dtype=float)
        e = np.zeros_like(c) if self.stderr is None else np.asarray(self.stderr, dtype=float)
        if t.shape != c.shape or e.shape != c.shape or t.ndim != 1:
            raise ValidationError("times, coherence and stderr must be equal-length 1-d arrays")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValidationError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "coherence", c)
        object.__setattr__(self, "stderr", e)

    @property
    def gamma_c(self) -> np.ndarray:
        """Decoherence functional ``-ln(coherence)``; ``inf`` where coherence is 0."""
        with np.errstate(divide="ignore"):
            return -np.log(self.coherence)

    def at(self, t: float) -> tuple[float, float]:
        """Value and stderr at the first sample time ``>= t``."""
        i = int(np.searchsorted(self.times, t - 1e-9 * max(abs(t), 1.0)))
        if i >= self.times.size:
            raise ValidationError(f"time {t} beyond the end of the series")
        return float(self.coherence[i]), float(self.stderr[i])

    def truncated(self, t_end: float) -> "CoherenceSeries":
        """Samples up to and including the first one at or after ``t_end``."""
        n = min(int(np.searchsorted(self.times, t_end - 1e-9 * max(abs(t_end), 1.0))) + 1, self.times.size)
        err = None if self.stderr is None else self.stderr[:n]
        return CoherenceSeries(self.times[:n], self.coherence[:n], err, self.label, dict(self.meta))

    def first_crossing(self, level: float) -> float | None:
        """Linearly interpolated first time the coherence drops below ``level``."""
        below = np.flatnonzero(self.coherence < level)
        if below.size == 0:
            return None
        i = below[0]
        if i == 0:
            return float(self.times[0])
        t0, t1 = self.times[i - 1], self.times[i]
        c0, c1 = self.coherence[i - 1], self.coherence[i]
        return float(t0 + (c0 - level) / (c0 - c1) * (t1 - t0))
