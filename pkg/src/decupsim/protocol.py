"""Decoupling groups and bang-bang schedules.

Group elements are unitary matrices compared modulo a global phase, so
``i * sigma_x`` and ``sigma_x`` name the same element.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qmat
from .errors import ValidationError

PHASE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DecouplingGroup:
    """Finite group of unitaries, closed modulo global phase.

    ``elements[0]`` is the identity. ``table[i, j]`` is the index of
    ``elements[i] @ elements[j]``. ``generators`` holds the element indices of
    the generating set used to build the group, in the order supplied.
    """

    elements: tuple[np.ndarray, ...]
    table: np.ndarray
    generators: tuple[int, ...] = ()

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def stacked(self) -> np.ndarray:
        return np.stack(self.elements)

    def index_of(self, u, atol: float = PHASE_TOL) -> int:
        """Index of the element equal to ``u`` up to phase; raises if absent."""
        idx = _find(self.elements, qmat.as_operator(u), atol)
        if idx is None:
            raise ValidationError("operator is not an element of the group")
        return idx

    def inverse(self, i: int) -> int:
        return int(np.flatnonzero(self.table[i] == 0)[0])


def _find(elements: Sequence[np.ndarray], u: np.ndarray, atol: float) -> int | None:
    for i, g in enumerate(elements):
        if qmat.phase_distance(g, u) <= atol:
            return i
    return None


def make_group(generators: Sequence, max_order: int = 256, dim: int | None = None) -> DecouplingGroup:
    """Close a set of unitary generators into a finite group (mod phase).

    Elements are discovered breadth-first from the identity by left
    multiplication with each generator in the given order, which fixes the
    element numbering. ``dim`` is needed only when ``generators`` is empty.
    """
    gens = [qmat.require_unitary(g, "generator") for g in generators]
    if gens:
        d = gens[0].shape[0]
        if any(g.shape != (d, d) for g in gens):
            raise ValidationError("generators must share one dimension")
    elif dim is None:
        raise ValidationError("dim is required for an empty generator set")
    else:
        d = int(dim)

    elements = [np.eye(d, dtype=complex)]
    gen_idx = []
    for g in gens:
        idx = _find(elements, g, PHASE_TOL)
        if idx is None:
            elements.append(g)
            idx = len(elements) - 1
        gen_idx.append(idx)
    # BFS from the identity; generator images found above are re-used.
    frontier = 0
    queue = [0]
    seen_in_queue = {0}
    while frontier < len(queue):
        cur = elements[queue[frontier]]
        frontier += 1
        for g in gens:
            new = g @ cur
            idx = _find(elements, new, PHASE_TOL)
            if idx is None:
                elements.append(new)
                idx = len(elements) - 1
                if len(elements) > max_order:
                    raise ValidationError(f"group order exceeds max_order={max_order}")
            if idx not in seen_in_queue:
                seen_in_queue.add(idx)
                queue.append(idx)

    n = len(elements)
    table = np.empty((n, n), dtype=np.int64)
    for i, a in enumerate(elements):
        for j, b in enumerate(elements):
            idx = _find(elements, a @ b, PHASE_TOL)
            if idx is None:
                raise ValidationError("generated set is not closed under multiplication")
            table[i, j] = idx
    return DecouplingGroup(tuple(elements), table, tuple(gen_idx))


def cp_group() -> DecouplingGroup:
    """The two-element group {I, sigma_x} behind Carr-Purcell decoupling."""
    return make_group([qmat.SX])


def pauli_group() -> DecouplingGroup:
    """Single-qubit Pauli group modulo phase, generated by sigma_x and sigma_z."""
    return make_group([qmat.SX, qmat.SZ])


def lift(g: np.ndarray, dim: int) -> np.ndarray:
    """Embed a system operator ``g`` as ``g (x) I`` acting on ``dim`` total states."""
    d = g.shape[-1]
    if dim == d:
        return g
    if dim % d:
        raise ValidationError(f"operator of dim {dim} is not a multiple of group dim {d}")
    return np.kron(g, np.eye(dim // d))


def group_average(group: DecouplingGroup, h) -> np.ndarray:
    """Return ``(1/|G|) sum_g g^dag h g``.

    ``h`` may act on a larger space ``system (x) environment``; group elements
    are then lifted as ``g (x) I``.
    """
    h = qmat.require_hermitian(h, "Hamiltonian")
    gs = np.stack([lift(g, h.shape[0]) for g in group.elements])
    avg = np.einsum("kji,jl,klm->im", gs.conj(), h, gs) / group.order
    return 0.5 * (avg + avg.conj().T)


@dataclass(frozen=True, eq=False)
class BBSchedule:
    """Bang-bang schedule: the control propagator steps through the group.

    During subinterval ``l`` (1-based) of length ``dt`` the propagator equals
    ``group.elements[frames[l-1]]``. ``pulses[l-1]`` is the instantaneous
    pulse ``g_l g_{l-1}^dag`` applied at ``t_l = l dt``; the last one returns
    the frame to the identity.
    """

    group: DecouplingGroup
    dt: float
    frames: tuple[int, ...]
    pulses: tuple[np.ndarray, ...]
    impulsive: bool = field(default=True, init=False)

    @property
    def cycle_time(self) -> float:
        return len(self.frames) * self.dt

    @property
    def n_subintervals(self) -> int:
        return len(self.frames)

    @property
    def max_amplitude(self) -> float:
        """Peak control amplitude; unbounded for instantaneous pulses."""
        return float("inf") if any(not qmat.equal_up_to_phase(p, np.eye(p.shape[0])) for p in self.pulses) else 0.0

    def frame(self, l: int) -> np.ndarray:
        return self.group.elements[self.frames[l - 1]]

    def propagator(self, t: float) -> np.ndarray:
        """Control propagator ``U_c(t)`` for ``0 <= t <= cycle_time``."""
        if not 0 <= t <= self.cycle_time * (1 + 1e-12):
            raise ValidationError(f"time {t} outside [0, {self.cycle_time}]")
        l = int(np.floor(t / self.dt))
        if l >= self.n_subintervals:
            return self.group.elements[self.frames[0]]
        return self.group.elements[self.frames[l]]


def bb_schedule(group: DecouplingGroup, dt: float) -> BBSchedule:
    """Sample the control propagator through every group element once."""
    if not dt > 0:
        raise ValidationError("dt must be positive")
    frames = tuple(range(group.order))
    els = group.elements
    pulses = tuple(els[(l + 1) % group.order] @ els[l].conj().T for l in range(group.order))
    return BBSchedule(group, float(dt), frames, pulses)


def toggled_hamiltonian(schedule: BBSchedule, h, l: int) -> np.ndarray:
    """``g_{l-1}^dag h g_{l-1}`` for the 1-based subinterval ``l``."""
    if not 1 <= l <= schedule.n_subintervals:
        raise ValidationError(f"subinterval index {l} outside 1..{schedule.n_subintervals}")
    h = qmat.require_hermitian(h, "Hamiltonian")
    g = lift(schedule.frame(l), h.shape[0])
    return g.conj().T @ h @ g
