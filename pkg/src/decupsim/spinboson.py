"""Pure dephasing of a qubit linearly coupled to a discrete boson bath.

Model: ``H = omega0 sz + sum_k omega_k b_k^dag b_k + sz sum_k g_k (b_k^dag + b_k)``.
The coherence decays as ``exp(-sum_k 2 g_k^2 coth(omega_k / 2T) |F_k(t)|^2)``
with ``F_k(t) = int_0^t eps(s) exp(i omega_k s) ds`` and ``eps`` the sign of
sz in the toggling frame (``eps = 1`` for free evolution).
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, ValidationError
from .series import CoherenceSeries

MAX_PATH_PULSES = 10


@dataclass(frozen=True, eq=False)
class BosonBath:
    omega: np.ndarray
    g: np.ndarray
    temperature: float = 0.0

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.omega, dtype=float))
        g = np.atleast_1d(np.asarray(self.g, dtype=float))
        if w.shape != g.shape or w.ndim != 1 or w.size == 0:
            raise ValidationError("omega and g must be equal-length non-empty 1-d arrays")
        if np.any(w <= 0):
            raise ValidationError("mode frequencies must be positive")
        if self.temperature < 0:
            raise ValidationError("temperature must be non-negative")
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "g", g)

    @property
    def n_modes(self) -> int:
        return self.omega.size

    @property
    def omega_max(self) -> float:
        return float(self.omega.max())

    @property
    def tau_c(self) -> float:
        return 1.0 / self.omega_max

    def thermal_factor(self) -> np.ndarray:
        """``coth(omega / 2T)``, equal to 1 at zero temperature."""
        if self.temperature == 0:
            return np.ones_like(self.omega)
        return 1.0 / np.tanh(self.omega / (2.0 * self.temperature))

    def scaled(self, factor: float) -> "BosonBath":
        return BosonBath(self.omega, self.g * factor, self.temperature)


# Calibrated so the free coherence of the default bath at omega_max t = 50
# is about 0.31 while CP control at dt omega_max = 0.01 keeps it above 0.99.
DEFAULT_STRENGTH = 0.1


def ohmic_bath(
    n_modes: int = 20,
    omega_max: float = 1.0,
    omega_cut: float | None = None,
    strength: float = DEFAULT_STRENGTH,
    temperature: float = 0.0,
) -> BosonBath:
    """Sample an ohmic bath ``g_k^2 = strength * omega_k exp(-omega_k/omega_cut) d_omega``.

    Modes sit on the uniform grid ``omega_k = k omega_max / n_modes``.
    ``omega_cut`` defaults to ``omega_max / 2``.
    """
    if n_modes < 1:
        raise ValidationError("n_modes must be >= 1")
    if omega_cut is None:
        omega_cut = 0.5 * omega_max
    dw = omega_max / n_modes
    w = dw * np.arange(1, n_modes + 1)
    g = np.sqrt(strength * w * np.exp(-w / omega_cut) * dw)
    return BosonBath(w, g, temperature)


def _as_times(times) -> np.ndarray:
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.ndim != 1 or np.any(t < 0):
        raise ValidationError("times must be a 1-d array of non-negative values")
    return t


def free_coherence(bath: BosonBath, times) -> CoherenceSeries:
    t = _as_times(times)
    w = bath.omega[:, None]
    one_minus_cos = 2.0 * np.sin(0.5 * w * t[None, :]) ** 2
    gamma = np.sum((4.0 * (bath.g / bath.omega) ** 2 * bath.thermal_factor())[:, None] * one_minus_cos, axis=0)
    return CoherenceSeries(t, np.exp(-gamma), label="free")


def _half_sinc(w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``int_0^x exp(i w s) ds`` evaluated stably."""
    return np.exp(0.5j * w * x) * np.where(w * x == 0, x, 2.0 * np.sin(0.5 * w * x) / np.where(w == 0, 1.0, w))


def cp_filter(omega: np.ndarray, dt: float, times) -> np.ndarray:
    """``F(omega, t) = int_0^t eps(s) e^{i omega s} ds`` for CP toggling.

    ``eps`` flips sign at every multiple of ``dt``. Returns shape ``(modes, times)``.
    """
    t = _as_times(times)
    w = np.asarray(omega, dtype=float)[:, None]
    m = np.floor(t / dt + 1e-12).astype(np.int64)[None, :]
    r = np.clip(t[None, :] - m * dt, 0.0, None)
    # sum_{j<m} (-1)^j e^{i w j dt} = sum_j e^{i j delta}, delta = w dt + pi (Dirichlet kernel)
    delta = np.mod(w * dt + np.pi + np.pi, 2 * np.pi) - np.pi
    half = 0.5 * delta
    sin_half = np.sin(half)
    small = np.abs(sin_half) < 1e-12
    geo = np.where(
        small,
        m.astype(float) * np.exp(1j * (m - 1) * half),
        np.exp(1j * (m - 1) * half) * np.sin(m * half) / np.where(small, 1.0, sin_half),
    )
    whole = geo * _half_sinc(w, np.full_like(w, dt))
    sign = np.where(m % 2 == 0, 1.0, -1.0)
    partial = sign * np.exp(1j * w * m * dt) * _half_sinc(w, r)
    return whole + partial


def _cp_times(dt: float, n_cycles: int, times) -> np.ndarray:
    if not dt > 0:
        raise ValidationError("dt must be positive")
    if times is not None:
        return _as_times(times)
    if n_cycles < 1:
        raise ValidationError("n_cycles must be >= 1")
    return 2.0 * dt * np.arange(n_cycles + 1)


def cp_coherence(
    bath: BosonBath,
    dt: float,
    n_cycles: int = 1,
    pulse_error: float = 0.0,
    times=None,
) -> CoherenceSeries:
    """Coherence under Carr-Purcell bang-bang pi pulses spaced by ``dt``.

    Samples the stroboscopic times ``n T_c`` (``T_c = 2 dt``) unless ``times``
    is given. With ``pulse_error != 0`` every pulse rotates by
    ``pi (1 + pulse_error)`` about x and an exact path sum over the qubit's
    sz histories is used (at most ``MAX_PATH_PULSES`` pulses, stroboscopic
    times only).
    """
    t = _cp_times(dt, n_cycles, times)
    if pulse_error != 0.0:
        if times is not None:
            raise ValidationError("pulse_error requires stroboscopic sampling")
        c = [1.0] + [_path_sum_coherence(bath, dt, 2 * n, np.pi * (1.0 + pulse_error)) for n in range(1, n_cycles + 1)]
        return CoherenceSeries(t, np.array(c), label=f"cp dt={dt:g} err={pulse_error:g}")
    f = cp_filter(bath.omega, dt, t)
    gamma = np.sum((2.0 * bath.g**2 * bath.thermal_factor())[:, None] * np.abs(f) ** 2, axis=0)
    return CoherenceSeries(t, np.exp(-gamma), label=f"cp dt={dt:g}")


def _path_sum_coherence(bath: BosonBath, dt: float, n_pulses: int, angle: float) -> float:
    """Exact coherence after ``n_pulses`` imperfect x rotations spaced by ``dt``.

    The joint propagator is a sum over qubit sz histories; conditioned on a
    history the bath undergoes a displacement ``alpha`` times a c-number phase,
    and thermal traces of displacement operators are Gaussian.
    """
    n = n_pulses
    if n > MAX_PATH_PULSES:
        raise ValidationError(f"path sum limited to {MAX_PATH_PULSES} pulses, got {n}")
    w, g, coth = bath.omega, bath.g, bath.thermal_factor()
    starts = dt * np.arange(n)
    # I[j, k] = int over interval j of exp(i w_k s)
    interval = _half_sinc(w, np.full_like(w, dt))
    I = np.exp(1j * starts[:, None] * w[None, :]) * interval[None, :]
    # phase kernel W[j', j] = sum_k g_k^2 Im(I_j' conj(I_j)), j' > j
    W = np.einsum("k,ak,bk->ab", g**2, I, I.conj()).imag
    W = np.tril(W, -1)

    sig = np.array(list(product((1.0, -1.0), repeat=n)))  # histories x intervals
    alpha = -1j * (sig @ I) * g[None, :]
    phi = np.einsum("ha,ab,hb->h", sig, W, sig)

    c, s = np.cos(angle / 2), -1j * np.sin(angle / 2)
    amp0 = np.full(len(sig), 1 / np.sqrt(2), dtype=complex)
    for j in range(1, n):
        amp0 = amp0 * np.where(sig[:, j] == sig[:, j - 1], c, s)
    last = sig[:, -1]
    amp_up = amp0 * np.where(last == 1.0, c, s)  # final state sz = +1
    amp_dn = amp0 * np.where(last == -1.0, c, s)

    a = amp_up * np.exp(1j * phi)
    b = amp_dn * np.exp(1j * phi)
    expo = np.zeros((len(sig), len(sig)), dtype=complex)
    for k in range(w.size):
        ah = alpha[:, k][:, None]
        ahp = alpha[:, k][None, :]
        d = ah - ahp
        expo += 1j * np.imag(np.conj(ahp) * ah) - 0.5 * coth[k] * np.abs(d) ** 2
    rho01 = np.einsum("h,hp,p->", a, np.exp(expo), b.conj())
    return float(abs(rho01) / 0.5)


def _ladder(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff)), 1).astype(complex)


def _fock_run(bath: BosonBath, cutoff: int, pulse_times: np.ndarray, t: float, angle: float, omega0: float) -> float:
    k = bath.n_modes
    dim = cutoff**k
    eye = np.eye(cutoff)
    hb = np.zeros((dim, dim), dtype=complex)
    x = np.zeros((dim, dim), dtype=complex)
    for m in range(k):
        a = _ladder(cutoff)
        ops = [eye] * k
        ops[m] = a.conj().T @ a
        num = ops[0]
        for o in ops[1:]:
            num = np.kron(num, o)
        ops[m] = a + a.conj().T
        xm = ops[0]
        for o in ops[1:]:
            xm = np.kron(xm, o)
        hb += bath.omega[m] * num
        x += bath.g[m] * xm
    eig = {s: np.linalg.eigh(hb + s * x + s * omega0 * np.eye(dim)) for s in (1, -1)}

    def evolve(psi: np.ndarray, s: int, tau: float) -> np.ndarray:
        e, v = eig[s]
        return v @ (np.exp(-1j * e * tau) * (v.conj().T @ psi))

    # thermal bath as an incoherent mixture of Fock product states
    levels = np.arange(cutoff)
    if bath.temperature > 0:
        pk = [np.exp(-bath.omega[m] * levels / bath.temperature) for m in range(k)]
        pk = [p / p.sum() for p in pk]
    else:
        pk = [(levels == 0).astype(float) for _ in range(k)]
    weights = pk[0]
    for p in pk[1:]:
        weights = np.kron(weights, p)

    c, s_ = np.cos(angle / 2), -1j * np.sin(angle / 2)
    rho01 = 0.0j
    for idx in np.flatnonzero(weights > 1e-14):
        b0 = np.zeros(dim, dtype=complex)
        b0[idx] = 1.0
        up, dn = b0 / np.sqrt(2), b0 / np.sqrt(2)
        now = 0.0
        for tp in pulse_times:
            up, dn = evolve(up, 1, tp - now), evolve(dn, -1, tp - now)
            up, dn = c * up + s_ * dn, s_ * up + c * dn
            now = tp
        up, dn = evolve(up, 1, t - now), evolve(dn, -1, t - now)
        rho01 += weights[idx] * np.vdot(dn, up)
    return float(abs(rho01) / 0.5)


def fock_oracle(
    bath: BosonBath,
    cutoff: int,
    pulse_times: Sequence[float],
    t: float,
    pulse_angle: float = np.pi,
    omega0: float = 0.0,
    tol: float = 1e-8,
) -> float:
    """Brute-force coherence from the truncated qubit (x) Fock-space dynamics.

    Pulses are instantaneous x rotations by ``pulse_angle`` at ``pulse_times``
    (a pulse at exactly ``t`` is applied). The calculation is repeated with
    twice the cutoff and a ConvergenceError is raised if the two differ by
    more than ``tol``; the finer value is returned.
    """
    if bath.n_modes > 3:
        raise ValidationError("fock_oracle supports at most 3 modes")
    if cutoff < 2:
        raise ValidationError("cutoff must be >= 2")
    pts = np.sort(np.asarray(pulse_times, dtype=float))
    if pts.size and (pts[0] < 0 or pts[-1] > t):
        raise ValidationError("pulse times must lie in [0, t]")
    coarse = _fock_run(bath, cutoff, pts, t, pulse_angle, omega0)
    fine = _fock_run(bath, 2 * cutoff, pts, t, pulse_angle, omega0)
    if abs(fine - coarse) > tol:
        raise ConvergenceError(f"Fock cutoff {cutoff} not converged: |{fine} - {coarse}| > {tol}")
    return fine


def cp_pulse_times(dt: float, n_cycles: int) -> np.ndarray:
    return dt * np.arange(1, 2 * n_cycles + 1)
