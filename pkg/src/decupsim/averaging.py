"""Average Hamiltonians of cyclic control schedules.

The toggling-frame Hamiltonian ``U_c(x)^dag H U_c(x)`` is integrated over one
cycle with the midpoint rule on each subinterval; subinterval boundaries are
never straddled because bang-bang frames jump there.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import qmat
from .errors import ValidationError
from .euler import EulerianSchedule
from .protocol import BBSchedule, lift

Schedule = Union[BBSchedule, EulerianSchedule]


@dataclass(frozen=True, eq=False)
class AverageResult:
    h_bar0: np.ndarray
    integration_error: float
    cycle_time: float
    h_bar1: np.ndarray | None = None


def _toggled_nodes(schedule: Schedule, h: np.ndarray, substeps: int) -> tuple[np.ndarray, np.ndarray]:
    """Toggling-frame Hamiltonian at quadrature nodes, with weights.

    Nodes are ordered in time. Bang-bang frames are constant on each
    subinterval so a single node of weight ``dt`` is exact.
    """
    dim = h.shape[0]
    if isinstance(schedule, BBSchedule):
        gs = np.stack([lift(schedule.frame(l), dim) for l in range(1, schedule.n_subintervals + 1)])
        nodes = qmat.dagger(gs) @ h @ gs
        return nodes, np.full(len(nodes), schedule.dt)
    if isinstance(schedule, EulerianSchedule):
        if not schedule.cycle:
            return h[None], np.array([1.0])
        step = schedule.dt / substeps
        us = []
        for l in range(schedule.n_subintervals):
            shape = schedule.shape_for(l)
            b = schedule.boundaries[l]
            for j in range(substeps):
                us.append(shape.propagator((j + 0.5) * step) @ b)
        us = np.stack([lift(u, dim) for u in us])
        nodes = qmat.dagger(us) @ h @ us
        return nodes, np.full(len(nodes), step)
    raise ValidationError(f"unsupported schedule type {type(schedule).__name__}")


def _prepare(schedule: Schedule, h, substeps: int) -> np.ndarray:
    h = qmat.require_hermitian(h, "Hamiltonian")
    if h.shape[0] % schedule.group.dim:
        raise ValidationError(f"Hamiltonian dim {h.shape[0]} incompatible with control dim {schedule.group.dim}")
    if substeps < 2:
        raise ValidationError("substeps must be >= 2")
    return h


def _hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def _zeroth(schedule: Schedule, h: np.ndarray, substeps: int) -> np.ndarray:
    nodes, w = _toggled_nodes(schedule, h, substeps)
    return _hermitize(np.tensordot(w, nodes, axes=1) / w.sum())


def _first(schedule: Schedule, h: np.ndarray, substeps: int) -> np.ndarray:
    nodes, w = _toggled_nodes(schedule, h, substeps)
    # running integral of earlier nodes; a node commutes with itself, so the
    # partial own-cell contribution drops out of the commutator
    weighted = w[:, None, None] * nodes
    before = np.cumsum(weighted, axis=0) - weighted
    comm = nodes @ before - before @ nodes
    total = np.tensordot(w, comm, axes=1)
    return _hermitize(-0.5j * total / w.sum())


def average_hamiltonian(schedule: Schedule, h, substeps: int = 32, first_order: bool = False) -> AverageResult:
    """Lowest-order average Hamiltonian over one control cycle.

    The value returned uses ``2 * substeps`` nodes per subinterval; the
    reported ``integration_error`` is its Frobenius distance to the
    ``substeps`` result. For bang-bang schedules the sum is exact.
    """
    h = _prepare(schedule, h, substeps)
    coarse = _zeroth(schedule, h, substeps)
    fine = _zeroth(schedule, h, 2 * substeps)
    h1 = _first(schedule, h, 2 * substeps) if first_order else None
    return AverageResult(fine, float(np.linalg.norm(fine - coarse)), schedule.cycle_time, h1)


def magnus_first_order(schedule: Schedule, h, substeps: int = 32) -> np.ndarray:
    """Plain first-order Magnus term of the toggling-frame Hamiltonian.

    ``(-i / 2 T_c) int_0^T_c dx int_0^x dy [H(x), H(y)]``.
    """
    h = _prepare(schedule, h, substeps)
    return _first(schedule, h, substeps)


@dataclass(frozen=True, eq=False)
class PropagatorCheck:
    exact: np.ndarray
    effective: np.ndarray
    deviation: float
    cycle_time: float
    n_cycles: int


def cycle_propagator(schedule: Schedule, h, substeps: int = 32) -> np.ndarray:
    """Lab-frame propagator of ``h`` plus the control over one cycle."""
    h = qmat.require_hermitian(h, "Hamiltonian")
    dim = h.shape[0]
    u = np.eye(dim, dtype=complex)
    if isinstance(schedule, BBSchedule):
        step = qmat.expm(h, schedule.dt)
        for p in schedule.pulses:
            u = lift(p, dim) @ step @ u
        return u
    if not schedule.cycle:
        return u
    segs = []
    for l in range(schedule.n_subintervals):
        shape = schedule.shape_for(l)
        segs.append((schedule.dt, lambda s, shape=shape: h + lift(shape.hamiltonian(s), dim)))
    ham = qmat.PiecewiseHamiltonian(segs)
    return qmat.time_ordered_propagator(ham, ham.total_duration, substeps)


def effective_propagator_check(schedule: Schedule, h, n_cycles: int = 1, substeps: int = 64) -> PropagatorCheck:
    """Compare the exact stroboscopic propagator with ``exp(-i h_bar0 N T_c)``.

    The deviation is phase-insensitive, since the cycle propagator of the
    control is the identity only up to a global phase.
    """
    if n_cycles < 1:
        raise ValidationError("n_cycles must be >= 1")
    h = _prepare(schedule, h, max(substeps, 2))
    exact = np.linalg.matrix_power(cycle_propagator(schedule, h, substeps), n_cycles)
    hbar = average_hamiltonian(schedule, h, max(substeps // 2, 2)).h_bar0
    eff = qmat.expm(hbar, n_cycles * schedule.cycle_time)
    return PropagatorCheck(exact, eff, qmat.phase_distance(exact, eff), schedule.cycle_time, n_cycles)
