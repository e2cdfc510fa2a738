"""Small dense complex linear algebra and propagators.

Operators are plain ``numpy`` complex arrays of shape ``(d, d)``. Units have
hbar = 1 throughout, so a Hamiltonian ``H`` applied for a time ``t`` produces
``exp(-i H t)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
import scipy.linalg

from .errors import ValidationError

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": SX, "Y": SY, "Z": SZ}

HERMITIAN_RTOL = 1e-12
UNITARY_ATOL = 1e-10


def as_operator(a) -> np.ndarray:
    """Return ``a`` as a square complex array, raising on bad shapes."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValidationError(f"expected a non-empty square matrix, got shape {m.shape}")
    return m


def is_hermitian(a, rtol: float = HERMITIAN_RTOL) -> bool:
    a = as_operator(a)
    scale = np.linalg.norm(a)
    return np.linalg.norm(a - a.conj().T) <= rtol * max(scale, 1.0)


def is_unitary(u, atol: float = UNITARY_ATOL) -> bool:
    u = as_operator(u)
    return np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) <= atol


def require_hermitian(a, name: str = "operator") -> np.ndarray:
    a = as_operator(a)
    if not is_hermitian(a):
        raise ValidationError(f"{name} is not Hermitian")
    return a


def require_unitary(u, name: str = "operator") -> np.ndarray:
    u = as_operator(u)
    if not is_unitary(u):
        raise ValidationError(f"{name} is not unitary")
    return u


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def expm(h, t: float = 1.0) -> np.ndarray:
    """Return ``exp(-i h t)`` for Hermitian ``h``.

    Uses the eigendecomposition of ``h`` so the result is unitary to machine
    precision for the small dimensions handled here.
    """
    h = require_hermitian(h, "generator")
    # symmetrise away the rounding-level anti-Hermitian part before eigh
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def frobenius_distance(a, b) -> float:
    a, b = as_operator(a), as_operator(b)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def phase_distance(a, b) -> float:
    """Frobenius distance between ``a`` and ``b`` minimised over a global phase.

    The optimal phase is ``arg tr(b^dag a)``; the norm is evaluated directly
    rather than through ``|a|^2 + |b|^2 - 2 |tr(b^dag a)|``, which would lose
    half the significant digits to cancellation.
    """
    a, b = as_operator(a), as_operator(b)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    overlap = np.vdot(b, a)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(a - phase * b))


def equal_up_to_phase(a, b, atol: float = 1e-9) -> bool:
    return phase_distance(a, b) <= atol


def unitary_generator(u) -> tuple[np.ndarray, float]:
    """Split a unitary into a rotation angle and a unit Hamiltonian direction.

    Returns ``(direction, angle)`` with ``direction`` traceless Hermitian of
    spectral norm 1 such that ``exp(-i angle direction)`` equals ``u`` up to
    global phase. The principal branch of the logarithm is used. For the
    identity the angle is 0 and the direction is the zero matrix.
    """
    u = require_unitary(u, "generator element")
    d = u.shape[0]
    t, z = scipy.linalg.schur(u, output="complex")
    phases = np.angle(np.diag(t))
    # u = z diag(e^{i phases}) z^dag = exp(-i h) with h = z diag(-phases) z^dag
    ev = -phases
    ev = ev - ev.mean()
    h = (z * ev) @ z.conj().T
    h = 0.5 * (h + h.conj().T)
    angle = float(np.max(np.abs(ev))) if d > 1 else 0.0
    if angle < 1e-14:
        return np.zeros((d, d), dtype=complex), 0.0
    return h / angle, angle


Generator = Union[np.ndarray, Callable[[float], np.ndarray]]


@dataclass(frozen=True)
class PiecewiseHamiltonian:
    """Time-dependent Hamiltonian made of consecutive segments.

    Each segment is ``(duration, generator)`` where ``generator`` is either a
    constant Hermitian matrix or a callable mapping the local time
    ``s in [0, duration)`` to a Hermitian matrix.
    """

    segments: tuple[tuple[float, Generator], ...]

    def __init__(self, segments: Sequence[tuple[float, Generator]]):
        segs = []
        for duration, gen in segments:
            duration = float(duration)
            if not duration > 0:
                raise ValidationError("segment durations must be strictly positive")
            if not callable(gen):
                gen = require_hermitian(gen, "segment generator")
            segs.append((duration, gen))
        if not segs:
            raise ValidationError("a piecewise Hamiltonian needs at least one segment")
        object.__setattr__(self, "segments", tuple(segs))

    @property
    def total_duration(self) -> float:
        return float(sum(d for d, _ in self.segments))

    @property
    def dim(self) -> int:
        return self.evaluate(0, 0.0).shape[0]

    def evaluate(self, index: int, s: float) -> np.ndarray:
        gen = self.segments[index][1]
        return as_operator(gen(s)) if callable(gen) else gen


def _segment_propagator(gen: Generator, length: float, substeps: int) -> np.ndarray:
    if not callable(gen):
        return expm(gen, length)
    h = length / substeps
    u = None
    for j in range(substeps):
        step = expm(as_operator(gen((j + 0.5) * h)), h)
        u = step if u is None else step @ u
    return u


def _propagate(ham: PiecewiseHamiltonian, t: float, substeps: int) -> np.ndarray:
    u = np.eye(ham.dim, dtype=complex)
    elapsed = 0.0
    for duration, gen in ham.segments:
        if t <= elapsed:
            break
        length = min(duration, t - elapsed)
        u = _segment_propagator(gen, length, substeps) @ u
        elapsed += duration
    return u


def _check_time(ham: PiecewiseHamiltonian, t: float, substeps: int) -> None:
    total = ham.total_duration
    if not 0.0 <= t <= total * (1 + 1e-12):
        raise ValidationError(f"time {t} outside [0, {total}]")
    if substeps < 1:
        raise ValidationError("substeps must be >= 1")


def time_ordered_propagator(ham: PiecewiseHamiltonian, t: float, substeps_per_segment: int = 64) -> np.ndarray:
    """Time-ordered exponential ``T exp(-i int_0^t H(x) dx)``.

    Each segment is split into ``substeps_per_segment`` equal steps and the
    generator is sampled at the step midpoints. Constant segments are
    exponentiated exactly.
    """
    _check_time(ham, t, substeps_per_segment)
    return _propagate(ham, t, substeps_per_segment)


def propagator_with_error(ham: PiecewiseHamiltonian, t: float, substeps_per_segment: int = 64) -> tuple[np.ndarray, float]:
    """Propagator at doubled resolution plus a step-halving error estimate.

    Returns ``(U, err)`` where ``U`` uses ``2 * substeps_per_segment`` steps and
    ``err`` is the Frobenius change relative to ``substeps_per_segment`` steps.
    The midpoint rule is second order, so refining ``U`` once more changes it
    by roughly ``err / 4``.
    """
    _check_time(ham, t, substeps_per_segment)
    coarse = _propagate(ham, t, substeps_per_segment)
    fine = _propagate(ham, t, 2 * substeps_per_segment)
    return fine, float(np.linalg.norm(fine - coarse))
