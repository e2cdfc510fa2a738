"""Semiclassical 1/f dephasing from an ensemble of bistable fluctuators.

Each fluctuator is a symmetric telegraph signal ``+-v_k / 2`` flipping with
rate ``gamma_k / 2`` in each direction, so its autocorrelation decays as
``exp(-gamma_k |t|)``. Rates are log-uniform on ``[gamma_min, gamma_max]``,
which makes the summed spectrum ~ 1/omega between the bounds.

The qubit sees ``H = Omega sz + Delta sx + Xi(t) sz`` plus control. For
``Delta = 0`` and sign-flipping bang-bang control, each trajectory only
accumulates a phase and the Monte Carlo runs on the fast phase kernel;
otherwise the 2x2 propagator is built exactly between switch events.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.fft
import scipy.linalg
from scipy.integrate import solve_ivp

from . import _kernels, qmat
from ._kernels import _rng
from .errors import ConvergenceError, ValidationError
from .euler import EulerianSchedule
from .protocol import BBSchedule
from .series import CoherenceSeries, QubitSpec

MIN_TRAJECTORIES = 100


@dataclass(frozen=True, eq=False)
class FluctuatorEnsemble:
    rates: np.ndarray
    couplings: np.ndarray
    gamma_min: float
    gamma_max: float
    n_d: float
    mean_v: float

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.rates, dtype=float))
        v = np.atleast_1d(np.asarray(self.couplings, dtype=float))
        if r.shape != v.shape or r.ndim != 1:
            raise ValidationError("rates and couplings must be equal-length 1-d arrays")
        if np.any(r < 0):
            raise ValidationError("switching rates must be non-negative")
        object.__setattr__(self, "rates", r)
        object.__setattr__(self, "couplings", v)

    @property
    def n_fluctuators(self) -> int:
        return self.rates.size

    @property
    def log_density_constant(self) -> float:
        """Normalisation of ``P(gamma) = const / gamma`` on the rate range."""
        return 1.0 / math.log(self.gamma_max / self.gamma_min)

    def spectrum(self, omega) -> np.ndarray:
        """Two-sided noise spectrum ``sum_k (v_k^2 / 4) 2 gamma_k / (gamma_k^2 + omega^2)``."""
        w = np.asarray(omega, dtype=float)[..., None]
        g, v = self.rates, self.couplings
        return np.sum(0.25 * v**2 * 2.0 * g / (g**2 + w**2), axis=-1)


def sample_ensemble(
    gamma_min: float,
    gamma_max: float,
    n_d: float = 10.0,
    mean_v: float = 1.0,
    v_distribution: Callable[[np.random.Generator, int], np.ndarray] | None = None,
    seed: int = 0,
    n_fluctuators: int | None = None,
    stratified: bool = True,
) -> FluctuatorEnsemble:
    """Draw ``M = round(n_d log10(gamma_max / gamma_min))`` fluctuators.

    Rates are log-uniform. By default the log-range is cut into ``M`` equal
    slots with one uniform draw per slot, so every rate is still log-uniform
    but each decade holds close to ``n_d`` fluctuators; ``stratified=False``
    draws them independently. Couplings equal ``mean_v`` unless
    ``v_distribution(rng, M)`` is supplied. ``n_fluctuators`` overrides ``M``.
    """
    if not 0 < gamma_min < gamma_max:
        raise ValidationError("need 0 < gamma_min < gamma_max")
    if n_fluctuators is None:
        m = max(1, int(round(n_d * math.log10(gamma_max / gamma_min))))
    else:
        m = int(n_fluctuators)
        if m < 1:
            raise ValidationError("n_fluctuators must be >= 1")
    rng = np.random.default_rng(seed)
    u = rng.random(m)
    if stratified:
        u = (rng.permutation(m) + u) / m
    rates = gamma_min * np.exp(u * math.log(gamma_max / gamma_min))
    if v_distribution is None:
        v = np.full(m, float(mean_v))
    else:
        v = np.asarray(v_distribution(rng, m), dtype=float)
    return FluctuatorEnsemble(rates, v, float(gamma_min), float(gamma_max), float(n_d), float(mean_v))


def single_fluctuator(rate: float, v: float) -> FluctuatorEnsemble:
    return FluctuatorEnsemble(np.array([rate]), np.array([v]), rate, rate, 0.0, v)


@dataclass(frozen=True, eq=False)
class RTNTrajectory:
    """One realisation of every fluctuator on ``[0, t_max]``."""

    switch_times: tuple[np.ndarray, ...]
    initial_signs: np.ndarray
    couplings: np.ndarray
    t_max: float

    def sign(self, k: int, t) -> np.ndarray:
        flips = np.searchsorted(self.switch_times[k], np.asarray(t, dtype=float), side="right")
        return np.where(flips % 2 == 0, self.initial_signs[k], -self.initial_signs[k])

    def xi(self, k: int, t) -> np.ndarray:
        return 0.5 * self.couplings[k] * self.sign(k, t)

    def value(self, t) -> np.ndarray:
        """Total fluctuation ``Xi(t) = sum_k xi_k(t)``."""
        return sum(self.xi(k, t) for k in range(len(self.switch_times)))


def sample_trajectory(ensemble: FluctuatorEnsemble, t_max: float, seed: int = 0, index: int = 0) -> RTNTrajectory:
    """Trajectory ``index`` of the stream family ``seed``.

    Identical to the realisation used by the Monte Carlo kernels for the same
    ``(seed, index)``.
    """
    if not t_max > 0:
        raise ValidationError("t_max must be positive")
    times, signs = [], []
    for k in range(ensemble.n_fluctuators):
        key = _rng.stream_key(seed, index, k)
        signs.append(_rng.initial_sign(key))
        times.append(_rng.switch_times(key, 0.5 * ensemble.rates[k], t_max))
    return RTNTrajectory(tuple(times), np.array(signs), ensemble.couplings.copy(), float(t_max))


# ---------------------------------------------------------------- workers


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("DECUPSIM_WORKERS", "1")))
    except ValueError:
        return 1


def _chunked(fn: Callable[[int, int], np.ndarray], n: int, workers: int | None) -> np.ndarray:
    """Evaluate ``fn(lo, hi)`` over index chunks and concatenate in index order."""
    workers = default_workers() if workers is None else max(1, int(workers))
    n_chunks = min(n, 4 * workers) if workers > 1 else 1
    edges = np.linspace(0, n, n_chunks + 1).astype(int)
    spans = [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    if workers == 1:
        parts = [fn(a, b) for a, b in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ab: fn(*ab), spans))
    return np.concatenate(parts, axis=0)


# ---------------------------------------------------------------- PSD


@dataclass(frozen=True, eq=False)
class PowerSpectrum:
    """Averaged two-sided periodogram ``S(omega)`` at positive angular frequencies."""

    omega: np.ndarray
    power: np.ndarray
    n_realizations: int
    t_max: float
    dt: float

    def binned(self, lo: float, hi: float, n_bins: int = 24) -> tuple[np.ndarray, np.ndarray]:
        """Average the spectrum in logarithmic bins spanning ``[lo, hi]``."""
        edges = np.geomspace(lo, hi, n_bins + 1)
        idx = np.digitize(self.omega, edges) - 1
        centres, values = [], []
        for b in range(n_bins):
            sel = idx == b
            if sel.any():
                centres.append(np.exp(np.mean(np.log(self.omega[sel]))))
                values.append(self.power[sel].mean())
        return np.array(centres), np.array(values)

    def loglog_slope(self, lo: float, hi: float, n_bins: int = 24) -> float:
        w, s = self.binned(lo, hi, n_bins)
        keep = s > 0
        if keep.sum() < 3:
            raise ValidationError("not enough populated bins to fit a slope")
        return float(np.polyfit(np.log(w[keep]), np.log(s[keep]), 1)[0])

    def half_power_point(self, plateau_hi: float, search_hi: float, n_bins: int = 40) -> float:
        """Frequency where the binned spectrum falls to half its low-frequency plateau.

        The plateau is the mean of the raw periodogram below ``plateau_hi``.
        """
        low = (self.omega > 0) & (self.omega <= plateau_hi)
        if not low.any():
            raise ValidationError("no spectral points below plateau_hi")
        plateau = self.power[low].mean()
        w, s = self.binned(self.omega[self.omega > 0].min(), search_hi, n_bins)
        below = np.flatnonzero((s < 0.5 * plateau) & (w > plateau_hi))
        if below.size == 0 or below[0] == 0:
            raise ValidationError("spectrum never falls to half power in range")
        i = below[0]
        x0, x1 = np.log(w[i - 1]), np.log(w[i])
        y0, y1 = np.log(s[i - 1]), np.log(s[i])
        target = np.log(0.5 * plateau)
        return float(np.exp(x0 + (target - y0) / (y1 - y0) * (x1 - x0)))


def estimate_psd(
    ensemble: FluctuatorEnsemble,
    t_max: float,
    n_realizations: int,
    seed: int = 0,
    dt: float | None = None,
    workers: int | None = None,
    backend: str | None = None,
) -> PowerSpectrum:
    """Periodogram of ``Xi(t)`` sampled every ``dt``, averaged over realisations.

    ``S(omega_j) = dt / N |sum_n Xi_n e^{-i omega_j n dt}|^2`` with the
    physical Lorentzian normalisation of ``FluctuatorEnsemble.spectrum``.
    """
    if not t_max > 0 or n_realizations < 1:
        raise ValidationError("t_max must be positive and n_realizations >= 1")
    if dt is None:
        dt = 0.2 / max(ensemble.rates.max(initial=0.0), 1.0 / t_max)
    n = scipy.fft.next_fast_len(int(round(t_max / dt)), real=True)
    if n < 8:
        raise ValidationError("sampling grid too coarse for the requested t_max")
    if t_max * max(ensemble.gamma_min, 1e-300) < 1.0:
        import warnings

        warnings.warn("t_max * gamma_min < 1: the lowest noise decade is under-resolved", stacklevel=2)
    kern = _kernels.get(backend)
    rates, amps = ensemble.rates, ensemble.couplings

    def run(lo: int, hi: int) -> np.ndarray:
        acc = np.zeros(n // 2 + 1)
        for r in range(lo, hi):
            x = kern.sample_grid(rates, amps, seed, r, dt, n)
            acc += np.abs(scipy.fft.rfft(x)) ** 2
        return acc[None, :]

    total = _chunked(run, n_realizations, workers).sum(axis=0)
    omega = 2 * np.pi * scipy.fft.rfftfreq(n, dt)
    power = total * dt / n / n_realizations
    return PowerSpectrum(omega[1:], power[1:], n_realizations, n * dt, dt)


# ---------------------------------------------------------------- control programs


@dataclass(frozen=True)
class _SignProgram:
    dt: float
    signs: np.ndarray  # toggling-frame sign of sz per subinterval


@dataclass(frozen=True, eq=False)
class _QubitProgram:
    kind: int  # 0 free, 1 bang-bang, 2 Eulerian
    h: float
    n_sub: int
    pulses: np.ndarray
    ctrl_dir: np.ndarray
    shape_kind: int
    scale: float


def _pauli_components(a: np.ndarray) -> np.ndarray:
    return np.array([np.trace(a @ p).real / 2 for p in (qmat.SX, qmat.SY, qmat.SZ)])


def _sign_program(schedule) -> _SignProgram | None:
    """Toggling signs for a qubit bang-bang schedule that maps sz to +-sz."""
    if schedule is None:
        return None
    if not isinstance(schedule, BBSchedule) or schedule.group.dim != 2:
        return None
    signs = []
    for l in range(1, schedule.n_subintervals + 1):
        g = schedule.frame(l)
        tz = g.conj().T @ qmat.SZ @ g
        if np.allclose(tz, qmat.SZ, atol=1e-12):
            signs.append(1.0)
        elif np.allclose(tz, -qmat.SZ, atol=1e-12):
            signs.append(-1.0)
        else:
            return None
    return _SignProgram(schedule.dt, np.array(signs))


def _qubit_program(schedule, pulse_error: float, substeps: int) -> _QubitProgram:
    scale = 1.0 + pulse_error
    eye = np.eye(2, dtype=complex)[None]
    zero_dir = np.zeros((1, 3))
    if schedule is None:
        return _QubitProgram(0, 1.0, 1, eye, zero_dir, 0, 1.0)
    if schedule.group.dim != 2:
        raise ValidationError("the 1/f engine drives a single qubit (dim 2)")
    if isinstance(schedule, BBSchedule):
        pulses = []
        for p in schedule.pulses:
            direction, angle = qmat.unitary_generator(p)
            pulses.append(qmat.expm(direction, scale * angle) if angle > 0 else np.eye(2, dtype=complex))
        return _QubitProgram(1, schedule.dt, 1, np.array(pulses), np.zeros((len(pulses), 3)), 0, 1.0)
    if isinstance(schedule, EulerianSchedule):
        if not schedule.cycle:
            return _QubitProgram(0, schedule.dt, 1, eye, zero_dir, 0, 1.0)
        kinds = {s.kind for s in schedule.shapes}
        if not kinds <= {"constant", "sine"} or len(kinds) != 1:
            raise ValidationError("Monte Carlo supports one default pulse shape kind per schedule")
        kind = kinds.pop()
        dirs = np.array([_pauli_components(schedule.shape_for(l).direction) * schedule.shape_for(l).angle for l in range(schedule.n_subintervals)])
        n_sub = 1 if kind == "constant" else int(substeps)
        if n_sub < 1:
            raise ValidationError("substeps must be >= 1")
        total_scale = scale * schedule.shapes[0].scale
        return _QubitProgram(
            2, schedule.dt / n_sub, n_sub, np.repeat(eye, schedule.n_subintervals, axis=0), dirs, 0 if kind == "constant" else 1, total_scale
        )
    raise ValidationError(f"unsupported schedule type {type(schedule).__name__}")


def _summarize(z: np.ndarray, n_batches: int) -> tuple[np.ndarray, np.ndarray]:
    """Coherence ``|<z>|`` and batch-means standard error per record."""
    mean = z.mean(axis=0)
    coh = np.abs(mean)
    unit = np.where(coh > 0, mean / np.where(coh > 0, coh, 1.0), 1.0)
    batches = np.stack([b.mean(axis=0) for b in np.array_split(z, n_batches, axis=0)])
    proj = (batches * np.conj(unit)[None, :]).real
    return coh, proj.std(axis=0, ddof=1) / np.sqrt(n_batches)


def _schedule_times(schedule, n_cycles, times) -> np.ndarray:
    if times is not None:
        t = np.asarray(times, dtype=float)
        if t.ndim != 1 or t.size == 0 or np.any(t < 0) or np.any(np.diff(t) <= 0):
            raise ValidationError("times must be non-negative and strictly increasing")
        return t
    if schedule is None or n_cycles is None:
        raise ValidationError("give either times or (schedule, n_cycles)")
    if n_cycles < 1:
        raise ValidationError("n_cycles must be >= 1")
    return schedule.cycle_time * np.arange(n_cycles + 1)


def dephasing_scan(
    ensemble: FluctuatorEnsemble,
    controls: Sequence[tuple[float, Sequence[float]] | None],
    record_times: Sequence[np.ndarray],
    n_traj: int,
    seed: int,
    workers: int | None = None,
    backend: str | None = None,
    n_batches: int = 20,
    labels: Sequence[str] | None = None,
) -> list[CoherenceSeries]:
    """Pure-dephasing Monte Carlo of several sign-toggling controls on shared trajectories.

    ``controls[c]`` is ``(dt, signs)`` or ``None`` for free evolution.
    """
    if n_traj < MIN_TRAJECTORIES:
        raise ValidationError(f"n_traj must be >= {MIN_TRAJECTORIES}")
    n_c = len(controls)
    lmax = max([len(c[1]) for c in controls if c is not None] + [1])
    ctrl_dt = np.ones(n_c)
    ctrl_signs = np.zeros((n_c, lmax))
    ctrl_len = np.ones(n_c, dtype=np.int64)
    for i, c in enumerate(controls):
        if c is None:
            ctrl_dt[i] = max(float(np.max(record_times[i])), 1.0) * 2.0
            ctrl_signs[i, 0] = 1.0
        else:
            ctrl_dt[i] = float(c[0])
            ctrl_signs[i, : len(c[1])] = c[1]
            ctrl_len[i] = len(c[1])
    rmax = max(len(r) for r in record_times)
    rec = np.zeros((n_c, rmax))
    rec_n = np.zeros(n_c, dtype=np.int64)
    for i, r in enumerate(record_times):
        rec[i, : len(r)] = r
        rec_n[i] = len(r)
    t_max = float(rec.max())
    kern = _kernels.get(backend)
    rates, amps = ensemble.rates, ensemble.couplings
    phases = _chunked(
        lambda lo, hi: kern.dephasing_phases(rates, amps, np.uint64(seed & 0xFFFFFFFFFFFFFFFF), lo, hi, t_max, ctrl_dt, ctrl_signs, ctrl_len, rec, rec_n),
        n_traj,
        workers,
    )
    out = []
    for i in range(n_c):
        z = np.exp(-1j * phases[:, i, : rec_n[i]])
        coh, err = _summarize(z, n_batches)
        lab = labels[i] if labels else ("free" if controls[i] is None else f"dt={controls[i][0]:g}")
        out.append(CoherenceSeries(record_times[i], coh, err, label=lab, meta={"n_traj": n_traj, "seed": seed}))
    return out


def controlled_coherence(
    ensemble: FluctuatorEnsemble,
    schedule: BBSchedule | EulerianSchedule | None = None,
    qubit: QubitSpec = QubitSpec(),
    n_cycles: int | None = None,
    n_traj: int = 1000,
    seed: int = 0,
    times=None,
    workers: int | None = None,
    pulse_error: float = 0.0,
    substeps: int | None = None,
    backend: str | None = None,
    n_batches: int = 20,
) -> CoherenceSeries:
    """Monte Carlo coherence of the RTN-dephased qubit with optional control.

    Samples ``n T_c`` for ``n = 0..n_cycles`` (or the explicit ``times`` for
    free evolution). ``pulse_error`` scales every pulse rotation angle or
    amplitude by ``1 + pulse_error``. With ``Delta = 0`` the drift
    ``Omega sz`` commutes with the noise and is removed by working in its
    rotating frame, where the control is specified.
    """
    if n_traj < MIN_TRAJECTORIES:
        raise ValidationError(f"n_traj must be >= {MIN_TRAJECTORIES}")
    t = _schedule_times(schedule, n_cycles, times)
    signs = _sign_program(schedule)
    pure = qubit.delta == 0.0 and pulse_error == 0.0
    if pure and (schedule is None or signs is not None):
        control = None if schedule is None else (signs.dt, signs.signs)
        return dephasing_scan(ensemble, [control], [t], n_traj, seed, workers, backend, n_batches)[0]

    if qubit.delta != 0.0 and isinstance(schedule, EulerianSchedule) and substeps is None:
        raise ValidationError("Delta != 0 with an Eulerian schedule requires substeps")
    prog = _qubit_program(schedule, pulse_error, substeps or 16)
    if prog.kind == 0:
        h = float(np.min(np.diff(t))) if t.size > 1 else float(t[-1] or 1.0)
        if schedule is not None:
            h = schedule.cycle_time if schedule.cycle_time > 0 else h
    else:
        h = prog.h
    rec_q = np.rint(t / h).astype(np.int64)
    if np.any(np.abs(rec_q * h - t) > 1e-9 * max(1.0, float(t.max()))):
        raise ValidationError("record times must be multiples of the control step")
    drift_z, drift_x = (0.0, 0.0) if qubit.delta == 0.0 else (qubit.omega0, qubit.delta)
    kern = _kernels.get(backend)
    rates, amps = ensemble.rates, ensemble.couplings
    z = _chunked(
        lambda lo, hi: kern.qubit_propagation(
            rates, amps, np.uint64(seed & 0xFFFFFFFFFFFFFFFF), lo, hi, drift_z, drift_x, h, prog.n_sub, prog.kind,
            prog.pulses, prog.ctrl_dir, prog.shape_kind, 1.0, prog.scale, rec_q,
        ),
        n_traj,
        workers,
    )
    coh, err = _summarize(z, n_batches)
    return CoherenceSeries(t, coh, err, label="exact-2x2", meta={"n_traj": n_traj, "seed": seed})


# ---------------------------------------------------------------- deterministic references


def _rtn_generators(rate: np.ndarray, v: np.ndarray, eps: float) -> np.ndarray:
    """Generator of ``(x_+, x_-)`` with ``x_s = E[e^{-i phi}; state s]``, shape (M, 2, 2)."""
    lam = 0.5 * rate
    m = np.empty(rate.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = -1j * eps * v - lam
    m[..., 0, 1] = lam
    m[..., 1, 0] = lam
    m[..., 1, 1] = 1j * eps * v - lam
    return m


def exact_dephasing_coherence(
    ensemble: FluctuatorEnsemble,
    times,
    control: tuple[float, Sequence[float]] | None = None,
) -> CoherenceSeries:
    """Ensemble-exact pure-dephasing coherence for the sampled fluctuators.

    Independent fluctuators factorise, and each one obeys a two-state linear
    equation that is solved by matrix exponentials on every constant-sign
    piece of the control. ``control`` is ``(dt, signs)`` or ``None`` (free).
    """
    t = np.atleast_1d(np.asarray(times, dtype=float))
    rate, v = ensemble.rates, ensemble.couplings
    x0 = np.full(rate.shape + (2,), 0.5, dtype=complex)
    out = np.empty(t.size)
    if control is None:
        gen = _rtn_generators(rate, v, 1.0)
        for i, ti in enumerate(t):
            x = np.einsum("kij,kj->ki", scipy.linalg.expm(gen * ti), x0)
            out[i] = np.abs(np.prod(x.sum(axis=1)))
        return CoherenceSeries(t, out, label="free exact")
    dt, signs = float(control[0]), np.asarray(control[1], dtype=float)
    L = signs.size
    cell = [scipy.linalg.expm(_rtn_generators(rate, v, s) * dt) for s in signs]
    cyc = np.broadcast_to(np.eye(2, dtype=complex), cell[0].shape).copy()
    for c in cell:
        cyc = c @ cyc
    for i, ti in enumerate(t):
        m = int(np.floor(ti / dt + 1e-9))
        q, j = divmod(m, L)
        r = max(ti - m * dt, 0.0)
        prop = np.linalg.matrix_power(cyc, q)
        for c in cell[:j]:
            prop = c @ prop
        if r > 0:
            prop = scipy.linalg.expm(_rtn_generators(rate, v, signs[j % L]) * r) @ prop
        x = np.einsum("kij,kj->ki", prop, x0)
        out[i] = np.abs(np.prod(x.sum(axis=1)))
    return CoherenceSeries(t, out, label=f"dt={dt:g} exact")


def telegraph_ode_coherence(rate: float, v: float, times, rtol: float = 1e-10, atol: float = 1e-12) -> np.ndarray:
    """Free coherence of one fluctuator from the sign-conditioned rate equations.

    Integrates the four real components of ``(x_+, x_-)`` with adaptive
    Runge-Kutta steps.
    """
    lam = 0.5 * rate

    def rhs(_, y):
        xp, xm = y[0] + 1j * y[1], y[2] + 1j * y[3]
        dp = -1j * v * xp - lam * xp + lam * xm
        dm = 1j * v * xm - lam * xm + lam * xp
        return [dp.real, dp.imag, dm.real, dm.imag]

    t = np.asarray(times, dtype=float)
    sol = solve_ivp(rhs, (0.0, float(t.max())), [0.5, 0.0, 0.5, 0.0], method="DOP853", t_eval=t, rtol=rtol, atol=atol)
    if not sol.success:
        raise ConvergenceError(sol.message)
    return np.abs((sol.y[0] + sol.y[2]) + 1j * (sol.y[1] + sol.y[3]))


# ---------------------------------------------------------------- free vs Carr-Purcell 1/f runs

GAMMA_MAX = 100.0
FIG3_CASES = {
    "a": {"gamma_min": 1e-4, "mean_v": 1e-4, "dt_list": (1000.0, 100.0, 10.0)},
    "b": {"gamma_min": 1e-6, "mean_v": 1e-4, "dt_list": (1000.0, 100.0, 10.0)},
    "c": {"gamma_min": 1e-4, "mean_v": 1e-2, "dt_list": (10.0, 1.0, 0.1)},
}
CP_SIGNS = (1.0, -1.0)


@dataclass(frozen=True, eq=False)
class Fig3Result:
    case: str
    ensemble: FluctuatorEnsemble
    free: CoherenceSeries
    controlled: dict[float, CoherenceSeries]
    horizon: float
    crossings: dict[float, float] = field(default_factory=dict)

    @property
    def series(self) -> list[CoherenceSeries]:
        return [self.free] + [self.controlled[d] for d in self.controlled]


def _find_free_horizon(ensemble: FluctuatorEnsemble, level: float) -> float:
    """First time the ensemble-exact free coherence drops below ``level``."""
    t = 1.0 / ensemble.gamma_max
    for _ in range(200):
        if exact_dephasing_coherence(ensemble, [t]).coherence[0] < level:
            return t
        t *= 1.5
    raise ConvergenceError("free coherence never decays below the horizon level")


def fig3_experiment(
    case: str,
    dt_list: Sequence[float] | None = None,
    horizon: float | None = None,
    n_traj: int = 1000,
    seed: int = 0,
    workers: int | None = None,
    n_d: float = 10.0,
    level: float = 0.2,
    n_free_points: int = 400,
    backend: str | None = None,
) -> Fig3Result:
    """Free versus Carr-Purcell controlled 1/f dephasing for one parameter set.

    Without an explicit ``horizon`` the run extends past the ensemble-exact
    crossing of ``level`` and the horizon is then set where the free Monte
    Carlo curve first drops below ``level``. Controlled series are
    stroboscopic and kept up to the first end of the longest cycle at or
    after the horizon, so all of them cover a common time range.
    All series share the same noise trajectories.
    """
    if case not in FIG3_CASES:
        raise ValidationError(f"unknown case {case!r}; choose from {sorted(FIG3_CASES)}")
    spec = FIG3_CASES[case]
    dts = tuple(float(d) for d in (dt_list or spec["dt_list"]))
    if not dts or min(dts) <= 0:
        raise ValidationError("dt_list must hold positive values")
    ens = sample_ensemble(spec["gamma_min"], GAMMA_MAX, n_d=n_d, mean_v=spec["mean_v"], seed=seed)

    t_cycle = 2.0 * max(dts)
    span = horizon if horizon is not None else 1.25 * _find_free_horizon(ens, level)
    t_end = t_cycle * max(1, math.ceil(span / t_cycle - 1e-12))
    grid = np.linspace(0.0, t_end, n_free_points + 1)
    controls = [None] + [(d, CP_SIGNS) for d in dts]
    records = [grid] + [2.0 * d * np.arange(int(round(t_end / (2.0 * d))) + 1) for d in dts]
    labels = ["free"] + [f"dt={d:g}" for d in dts]
    runs = dephasing_scan(ens, controls, records, n_traj, seed, workers, backend, labels=labels)
    free = runs[0]
    if horizon is None:
        horizon = free.first_crossing(level)
        if horizon is None:
            raise ConvergenceError(f"free Monte Carlo coherence never fell below {level}")
    crossings = {lv: c for lv in sorted({0.6, level}) if (c := free.first_crossing(lv)) is not None}
    # every controlled series reaches the first coarse cycle end past the horizon
    t_cut = min(t_end, 2.0 * max(dts) * math.ceil(horizon / (2.0 * max(dts)) - 1e-12))
    controlled = {d: r.truncated(t_cut) for d, r in zip(dts, runs[1:])}
    return Fig3Result(case, ens, free.truncated(horizon), controlled, float(horizon), crossings)
