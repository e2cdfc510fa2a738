"""numba-compiled Monte Carlo kernels.

Loop-level twins of ``_numpy``; additions happen in the same order so the
two backends agree to rounding of the elementary functions.
"""
import math

import numpy as np
from numba import njit

from . import _rng

JIT = dict(nogil=True, cache=True)

_GOLDEN = np.uint64(_rng.GOLDEN)
_MIX1 = np.uint64(_rng.MIX1)
_MIX2 = np.uint64(_rng.MIX2)
_TSALT = np.uint64(_rng.TRAJ_SALT)
_FSALT = np.uint64(_rng.FLUCT_SALT)
_ONE = np.uint64(1)
_S30, _S27, _S31, _S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)


@njit(**JIT)
def _mix(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(**JIT)
def _key(seed, traj, fluct):
    return _mix(_mix(_mix(seed) ^ _mix(np.uint64(traj) + _TSALT)) ^ _mix(np.uint64(fluct) + _FSALT))


@njit(**JIT)
def _uniform(key, i):
    z = _mix(key + (np.uint64(i) + _ONE) * _GOLDEN)
    return np.float64(z >> _S11) * _rng.INV53


@njit(inline="always", **JIT)
def _toggle(t, dt, signs, prefix, total, L):
    m = math.floor(t / dt)
    q = math.floor(m / L)
    j = int(m - q * L)
    return q * total + prefix[j] + signs[j] * (t - m * dt)


@njit(**JIT)
def dephasing_phases(rates, amps, seed, traj_lo, traj_hi, t_max, ctrl_dt, ctrl_signs, ctrl_len, rec_times, rec_n):
    n_ctrl = ctrl_dt.shape[0]
    n_fl = rates.shape[0]
    out = np.zeros((traj_hi - traj_lo, n_ctrl, rec_times.shape[1]))
    useed = np.uint64(seed)
    lmax = ctrl_signs.shape[1]
    prefix = np.zeros((n_ctrl, lmax))
    total = np.zeros(n_ctrl)
    for c in range(n_ctrl):
        acc = 0.0
        for j in range(ctrl_len[c]):
            prefix[c, j] = ctrl_dt[c] * acc
            acc += ctrl_signs[c, j]
        total[c] = ctrl_dt[c] * acc
    # toggle integrals at the record times do not depend on the trajectory
    e_rec = np.zeros(rec_times.shape)
    for c in range(n_ctrl):
        for r in range(rec_n[c]):
            e_rec[c, r] = _toggle(rec_times[c, r], ctrl_dt[c], ctrl_signs[c], prefix[c], total[c], ctrl_len[c])
    F = np.zeros(n_ctrl)
    E_prev = np.zeros(n_ctrl)
    ptr = np.zeros(n_ctrl, np.int64)
    for tr in range(traj_lo, traj_hi):
        for k in range(n_fl):
            a = amps[k]
            if a == 0.0:
                continue
            key = _key(useed, tr, k)
            sign = 1.0 if _uniform(key, 0) < 0.5 else -1.0
            lam = 0.5 * rates[k]
            for c in range(n_ctrl):
                F[c] = 0.0
                E_prev[c] = 0.0
                ptr[c] = 0
            t = 0.0
            i = 1
            while True:
                if lam > 0.0:
                    t_next = t + (-math.log1p(-_uniform(key, i)) / lam)
                    i += 1
                else:
                    t_next = math.inf
                last = t_next >= t_max
                for c in range(n_ctrl):
                    while ptr[c] < rec_n[c] and (last or rec_times[c, ptr[c]] <= t_next):
                        out[tr - traj_lo, c, ptr[c]] += a * (F[c] + sign * (e_rec[c, ptr[c]] - E_prev[c]))
                        ptr[c] += 1
                if last:
                    break
                for c in range(n_ctrl):
                    e = _toggle(t_next, ctrl_dt[c], ctrl_signs[c], prefix[c], total[c], ctrl_len[c])
                    F[c] = F[c] + sign * (e - E_prev[c])
                    E_prev[c] = e
                sign = -sign
                t = t_next
    return out


@njit(**JIT)
def sample_grid(rates, amps, seed, traj, dt, n):
    # jumps are scattered onto the grid and summed once at the end
    jumps = np.zeros(n)
    useed = np.uint64(seed)
    t_max = dt * n
    for k in range(rates.shape[0]):
        key = _key(useed, traj, k)
        sign = 1.0 if _uniform(key, 0) < 0.5 else -1.0
        lam = 0.5 * rates[k]
        half = 0.5 * amps[k]
        jumps[0] += sign * half
        if lam <= 0.0:
            continue
        t = 0.0
        i = 1
        while True:
            t = t + (-math.log1p(-_uniform(key, i)) / lam)
            i += 1
            if t >= t_max:
                break
            # first grid point at or after the switch takes the new sign
            j = int(math.ceil(t / dt))
            while j > 0 and dt * (j - 1) >= t:
                j -= 1
            while dt * j < t:
                j += 1
            if j < n:
                jumps[j] -= 2.0 * sign * half
            sign = -sign
    return np.cumsum(jumps)


@njit(**JIT)
def _gather_events(rates, amps, useed, tr, t_end):
    n_fl = rates.shape[0]
    cap = 64
    ev_t = np.empty(cap)
    ev_d = np.empty(cap)
    n = 0
    xi0 = 0.0
    for k in range(n_fl):
        key = _key(useed, tr, k)
        sign = 1.0 if _uniform(key, 0) < 0.5 else -1.0
        xi0 += sign * 0.5 * amps[k]
        lam = 0.5 * rates[k]
        if lam <= 0.0:
            continue
        t = 0.0
        i = 1
        while True:
            t = t + (-math.log1p(-_uniform(key, i)) / lam)
            i += 1
            if t >= t_end:
                break
            if n == cap:
                cap *= 2
                nt = np.empty(cap)
                nd = np.empty(cap)
                nt[:n] = ev_t[:n]
                nd[:n] = ev_d[:n]
                ev_t, ev_d = nt, nd
            ev_t[n] = t
            ev_d[n] = -sign * amps[k]
            sign = -sign
            n += 1
    order = np.argsort(ev_t[:n], kind="mergesort")
    return xi0, ev_t[:n][order], ev_d[:n][order]


@njit(**JIT)
def _step(u00, u01, u10, u11, hx, hy, hz, tau):
    nrm = math.sqrt(hx * hx + hy * hy + hz * hz)
    c = math.cos(nrm * tau)
    s = math.sin(nrm * tau) / nrm if nrm > 0.0 else tau
    a00 = c - 1j * s * hz
    a01 = -1j * s * (hx - 1j * hy)
    a10 = -1j * s * (hx + 1j * hy)
    a11 = c + 1j * s * hz
    return (
        a00 * u00 + a01 * u10,
        a00 * u01 + a01 * u11,
        a10 * u00 + a11 * u10,
        a10 * u01 + a11 * u11,
    )


@njit(**JIT)
def qubit_propagation(
    rates, amps, seed, traj_lo, traj_hi, drift_z, drift_x, h, n_sub, kind, pulses, ctrl_dir, shape_kind, angle, scale, rec_q
):
    n_rec = rec_q.shape[0]
    L = pulses.shape[0]
    q_end = rec_q[n_rec - 1]
    dt = h * n_sub
    out = np.zeros((traj_hi - traj_lo, n_rec), dtype=np.complex128)
    useed = np.uint64(seed)
    t_end = h * q_end
    for tr in range(traj_lo, traj_hi):
        xi, ev_t, ev_d = _gather_events(rates, amps, useed, tr, t_end)
        n_ev = ev_t.shape[0]
        u00, u01, u10, u11 = 1.0 + 0j, 0j, 0j, 1.0 + 0j
        e = 0
        r = 0
        while r < n_rec and rec_q[r] == 0:
            out[tr - traj_lo, r] = (u00 + u01) * np.conj(u10 + u11)
            r += 1
        q = 0
        t = 0.0
        while q < q_end:
            t_ctrl = h * (q + 1.0)
            cell = (q // n_sub) % L
            if kind == 2:
                sub = q % n_sub
                if shape_kind == 0:
                    f = scale * angle / dt
                else:
                    f = scale * 0.5 * math.pi * angle / dt * math.sin(math.pi * (sub + 0.5) * h / dt)
                cx = f * ctrl_dir[cell, 0]
                cy = f * ctrl_dir[cell, 1]
                cz = f * ctrl_dir[cell, 2]
            else:
                cx = 0.0
                cy = 0.0
                cz = 0.0
            while e < n_ev and ev_t[e] <= t_ctrl:
                u00, u01, u10, u11 = _step(u00, u01, u10, u11, drift_x + cx, cy, drift_z + xi + cz, ev_t[e] - t)
                t = ev_t[e]
                xi = xi + ev_d[e]
                e += 1
            u00, u01, u10, u11 = _step(u00, u01, u10, u11, drift_x + cx, cy, drift_z + xi + cz, t_ctrl - t)
            t = t_ctrl
            q += 1
            if kind == 1 and q % n_sub == 0:
                p = pulses[cell]
                u00, u01, u10, u11 = (
                    p[0, 0] * u00 + p[0, 1] * u10,
                    p[0, 0] * u01 + p[0, 1] * u11,
                    p[1, 0] * u00 + p[1, 1] * u10,
                    p[1, 0] * u01 + p[1, 1] * u11,
                )
            while r < n_rec and rec_q[r] == q:
                out[tr - traj_lo, r] = (u00 + u01) * np.conj(u10 + u11)
                r += 1
    return out
