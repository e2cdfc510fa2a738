"""Eulerian (bounded-strength) decoupling.

A schedule walks an Eulerian cycle of the Cayley graph of the decoupling
group. Each edge takes time ``dt`` during which a smooth, bounded pulse
realises the edge's generator, so the control propagator is continuous.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from . import qmat
from .errors import ValidationError
from .protocol import DecouplingGroup


@dataclass(frozen=True)
class Edge:
    source: int
    target: int
    label: int  # position in the generator list


@dataclass(frozen=True)
class CayleyGraph:
    """Directed multigraph; edge ``g -> gamma g`` for each generator ``gamma``."""

    n_vertices: int
    generators: tuple[int, ...]  # group element index of each label
    edges: tuple[Edge, ...]

    def out_edges(self, v: int) -> list[int]:
        return [i for i, e in enumerate(self.edges) if e.source == v]

    def degrees(self) -> tuple[np.ndarray, np.ndarray]:
        din = np.zeros(self.n_vertices, dtype=int)
        dout = np.zeros(self.n_vertices, dtype=int)
        for e in self.edges:
            dout[e.source] += 1
            din[e.target] += 1
        return din, dout


def cayley_graph(group: DecouplingGroup, generator_indices: Sequence[int] | None = None) -> CayleyGraph:
    """Cayley graph of ``group`` for the given generator element indices.

    Defaults to the generating set recorded on the group. Edges are ordered by
    (source vertex, generator position).
    """
    gens = tuple(group.generators if generator_indices is None else (int(i) for i in generator_indices))
    for g in gens:
        if not 0 <= g < group.order:
            raise ValidationError(f"generator index {g} is not a group element")
    edges = tuple(
        Edge(v, int(group.table[g, v]), lab)
        for v in range(group.order)
        for lab, g in enumerate(gens)
    )
    graph = CayleyGraph(group.order, gens, edges)
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for i in graph.out_edges(v):
            w = edges[i].target
            if w not in seen:
                seen.add(w)
                stack.append(w)
    missing = sorted(set(range(group.order)) - seen)
    if missing:
        raise ValidationError(f"generators do not generate the group; unreachable vertices {missing}")
    return graph


def eulerian_cycle(graph: CayleyGraph, start: int = 0) -> list[Edge]:
    """Closed walk from ``start`` using every edge exactly once (Hierholzer).

    Out-edges are consumed in stored order, so the result is deterministic.
    """
    if not graph.edges:
        return []
    din, dout = graph.degrees()
    if np.any(din != dout):
        bad = np.flatnonzero(din != dout).tolist()
        raise ValidationError(f"graph is not Eulerian: in/out degree mismatch at {bad}")
    adj = [graph.out_edges(v) for v in range(graph.n_vertices)]
    if not adj[start]:
        raise ValidationError(f"start vertex {start} has no outgoing edges")
    nxt = [0] * graph.n_vertices
    stack: list[tuple[int, int | None]] = [(start, None)]
    circuit: list[int] = []
    while stack:
        v, via = stack[-1]
        if nxt[v] < len(adj[v]):
            ei = adj[v][nxt[v]]
            nxt[v] += 1
            stack.append((graph.edges[ei].target, ei))
        else:
            stack.pop()
            if via is not None:
                circuit.append(via)
    circuit.reverse()
    if len(circuit) != len(graph.edges):
        raise ValidationError("graph is not connected; no Eulerian cycle covers every edge")
    return [graph.edges[i] for i in circuit]


@dataclass(frozen=True, eq=False)
class PulseShape:
    """Bounded pulse ``f(s) * direction`` realising a generator over ``dt``.

    ``angle_fn(s)`` is the accumulated angle ``int_0^s f``; when omitted it is
    obtained by quadrature of ``profile``. ``exp(-i angle direction)`` equals
    the generator up to global phase.
    """

    profile: Callable[[float], float]
    dt: float
    target_generator: int
    direction: np.ndarray
    angle: float
    angle_fn: Callable[[float], float] | None = None
    kind: str = "custom"
    scale: float = 1.0  # systematic amplitude factor (1 + error)

    def amplitude(self, s: float) -> float:
        return self.scale * self.profile(s)

    def accumulated(self, s: float) -> float:
        if self.angle_fn is not None:
            return self.scale * self.angle_fn(s)
        return self.scale * integrate.quad(self.profile, 0.0, s, epsabs=1e-13, epsrel=1e-13)[0]

    def hamiltonian(self, s: float) -> np.ndarray:
        return self.amplitude(s) * self.direction

    def propagator(self, s: float) -> np.ndarray:
        """``u(s)``; exact because the direction is fixed within a pulse."""
        return qmat.expm(self.direction, self.accumulated(s))

    def max_amplitude(self, n: int = 2001) -> float:
        s = np.linspace(0.0, self.dt, n)
        return float(np.max(np.abs([self.amplitude(x) for x in s])))


def default_shapes(dt: float, kind: str = "constant") -> Callable[[int, np.ndarray], PulseShape]:
    """Factory of standard pulse shapes for subintervals of length ``dt``.

    ``constant``: ``f = angle / dt``. ``sine``: ``f(s) = (pi angle / 2 dt) sin(pi s / dt)``.
    The returned callable maps ``(label, generator_unitary)`` to a PulseShape.
    """
    if not dt > 0:
        raise ValidationError("dt must be positive")
    if kind not in ("constant", "sine"):
        raise ValidationError(f"unknown pulse shape {kind!r}")
    dt = float(dt)

    def make(label: int, unitary: np.ndarray) -> PulseShape:
        direction, theta = qmat.unitary_generator(unitary)
        if kind == "constant":
            return PulseShape(
                profile=lambda s: theta / dt,
                dt=dt,
                target_generator=label,
                direction=direction,
                angle=theta,
                angle_fn=lambda s: theta * s / dt,
                kind=kind,
            )
        return PulseShape(
            profile=lambda s: 0.5 * np.pi * theta / dt * np.sin(np.pi * s / dt),
            dt=dt,
            target_generator=label,
            direction=direction,
            angle=theta,
            angle_fn=lambda s: 0.5 * theta * (1.0 - np.cos(np.pi * s / dt)),
            kind=kind,
        )

    return make


@dataclass(frozen=True, eq=False)
class EulerianSchedule:
    """Control schedule following an Eulerian cycle on a Cayley graph.

    ``boundaries[l]`` is the realised control propagator at ``t = l dt``;
    ``vertices[l]`` the group element it represents.
    """

    group: DecouplingGroup
    graph: CayleyGraph
    cycle: tuple[Edge, ...]
    dt: float
    shapes: tuple[PulseShape, ...]
    boundaries: tuple[np.ndarray, ...]
    amplitude_error: float = 0.0
    impulsive: bool = False

    @property
    def cycle_time(self) -> float:
        return len(self.cycle) * self.dt

    @property
    def n_subintervals(self) -> int:
        return len(self.cycle)

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(e.source for e in self.cycle) + ((self.cycle[0].source,) if self.cycle else (0,))

    @property
    def max_amplitude(self) -> float:
        return max((s.max_amplitude() for s in self.shapes), default=0.0)

    def shape_for(self, l: int) -> PulseShape:
        """Pulse shape used on the 0-based subinterval ``l``."""
        return self.shapes[self.cycle[l].label]

    def locate(self, t: float) -> tuple[int, float]:
        if not 0 <= t <= self.cycle_time * (1 + 1e-12):
            raise ValidationError(f"time {t} outside [0, {self.cycle_time}]")
        l = min(int(np.floor(t / self.dt)), max(self.n_subintervals - 1, 0))
        return l, t - l * self.dt


def eulerian_schedule(
    group: DecouplingGroup,
    dt: float,
    generator_indices: Sequence[int] | None = None,
    kind: str = "constant",
    amplitude_error: float = 0.0,
    shapes: Sequence[PulseShape] | None = None,
) -> EulerianSchedule:
    """Build an Eulerian schedule with one pulse shape per generator.

    ``amplitude_error`` multiplies every pulse amplitude by ``1 + error``
    (systematic control error).
    """
    graph = cayley_graph(group, generator_indices)
    cycle = tuple(eulerian_cycle(graph, 0))
    if shapes is None:
        factory = default_shapes(dt, kind)
        shapes = [factory(lab, group.elements[g]) for lab, g in enumerate(graph.generators)]
    scale = 1.0 + float(amplitude_error)
    shapes = tuple(
        PulseShape(s.profile, s.dt, s.target_generator, s.direction, s.angle, s.angle_fn, s.kind, scale)
        for s in shapes
    )
    u = np.eye(group.dim, dtype=complex)
    bounds = [u]
    for e in cycle:
        u = shapes[e.label].propagator(dt) @ u
        bounds.append(u)
    return EulerianSchedule(group, graph, cycle, float(dt), shapes, tuple(bounds), float(amplitude_error))


def eulerian_propagator(schedule: EulerianSchedule, t: float) -> np.ndarray:
    """Continuous control propagator; on subinterval ``l`` it is ``u(s) U_c(t_l)``."""
    if not schedule.cycle:
        schedule.locate(t)
        return np.eye(schedule.group.dim, dtype=complex)
    l, s = schedule.locate(t)
    return schedule.shape_for(l).propagator(s) @ schedule.boundaries[l]


def schedule_hamiltonian(schedule: EulerianSchedule) -> qmat.PiecewiseHamiltonian:
    """Control Hamiltonian of one cycle as a piecewise Hamiltonian."""
    return qmat.PiecewiseHamiltonian([(schedule.dt, schedule.shape_for(l).hamiltonian) for l in range(schedule.n_subintervals)])
