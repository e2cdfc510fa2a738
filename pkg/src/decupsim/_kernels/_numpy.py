"""Vectorised numpy implementations of the Monte Carlo kernels.

Same signatures and random streams as the numba versions in ``_numba``.
"""
import numpy as np

from . import _rng


def toggle_integral(t, dt, signs, prefix, total):
    """``E(t) = int_0^t eps(s) ds`` for a periodic sign pattern on cells of length ``dt``."""
    L = signs.shape[0]
    m = np.floor(t / dt)
    q = np.floor(m / L)
    j = (m - q * L).astype(np.int64)
    r = t - m * dt
    return q * total + prefix[j] + signs[j] * r


def dephasing_phases(rates, amps, seed, traj_lo, traj_hi, t_max, ctrl_dt, ctrl_signs, ctrl_len, rec_times, rec_n):
    """Accumulated phases ``sum_k v_k int_0^t s_k(x) eps_c(x) dx``.

    Returns an array ``(traj_hi - traj_lo, n_controls, max_records)``.
    """
    n_ctrl = ctrl_dt.shape[0]
    out = np.zeros((traj_hi - traj_lo, n_ctrl, rec_times.shape[1]))
    progs = []
    for c in range(n_ctrl):
        s = ctrl_signs[c, : ctrl_len[c]]
        prefix = ctrl_dt[c] * np.concatenate(([0.0], np.cumsum(s)[:-1]))
        total = ctrl_dt[c] * s.sum()
        rec = rec_times[c, : rec_n[c]]
        progs.append((s, prefix, total, rec, toggle_integral(rec, ctrl_dt[c], s, prefix, total)))
    for tr in range(traj_lo, traj_hi):
        row = out[tr - traj_lo]
        for k in range(rates.shape[0]):
            if amps[k] == 0.0:
                continue
            key = _rng.stream_key(seed, tr, k)
            sign0 = _rng.initial_sign(key)
            times = _rng.switch_times(key, 0.5 * rates[k], t_max)
            n = times.size
            seg_sign = sign0 * np.where(np.arange(n + 1) % 2 == 0, 1.0, -1.0)
            for c in range(n_ctrl):
                s, prefix, total, rec, e_rec = progs[c]
                e_sw = toggle_integral(times, ctrl_dt[c], s, prefix, total)
                e_all = np.concatenate(([0.0], e_sw))
                f_all = np.cumsum(np.concatenate(([0.0], seg_sign[:n] * np.diff(e_all))))
                J = np.searchsorted(times, rec, side="left")
                row[c, : rec.size] += amps[k] * (f_all[J] + seg_sign[J] * (e_rec - e_all[J]))
    return out


def sample_grid(rates, amps, seed, traj, dt, n):
    """Total telegraph signal ``sum_k s_k(t) v_k / 2`` on the grid ``t_j = j dt``."""
    grid = dt * np.arange(n)
    t_max = dt * n
    jumps = np.zeros(n)
    for k in range(rates.shape[0]):
        key = _rng.stream_key(seed, traj, k)
        sign0 = _rng.initial_sign(key)
        half = 0.5 * amps[k]
        jumps[0] += sign0 * half
        times = _rng.switch_times(key, 0.5 * rates[k], t_max)
        j = np.searchsorted(grid, times, side="left")
        before = np.where(np.arange(times.size) % 2 == 0, sign0, -sign0)
        keep = j < n
        # unbuffered so repeated bins accumulate in event order
        np.add.at(jumps, j[keep], -2.0 * before[keep] * half)
    return np.cumsum(jumps)


def _su2_steps(hx, hy, hz, tau):
    """Batched ``exp(-i (hx sx + hy sy + hz sz) tau)``, shape ``(n, 2, 2)``."""
    nrm = np.sqrt(hx * hx + hy * hy + hz * hz)
    c = np.cos(nrm * tau)
    s = np.where(nrm > 0, np.sin(nrm * tau) / np.where(nrm > 0, nrm, 1.0), tau)
    u = np.empty(hx.shape + (2, 2), dtype=complex)
    u[..., 0, 0] = c - 1j * s * hz
    u[..., 0, 1] = -1j * s * (hx - 1j * hy)
    u[..., 1, 0] = -1j * s * (hx + 1j * hy)
    u[..., 1, 1] = c + 1j * s * hz
    return u


def _chain_products(ops, cuts):
    """Products ``ops[cuts[i-1]:cuts[i]]`` (later factors on the left) by pairwise reduction."""
    n_chunks = len(cuts) - 1
    lens = np.diff(cuts)
    width = 1
    while width < max(lens.max(initial=1), 1):
        width *= 2
    buf = np.broadcast_to(np.eye(2, dtype=complex), (n_chunks, width, 2, 2)).copy()
    for i in range(n_chunks):
        buf[i, : lens[i]] = ops[cuts[i] : cuts[i + 1]]
    while buf.shape[1] > 1:
        buf = buf[:, 1::2] @ buf[:, 0::2]
    return buf[:, 0]


def qubit_propagation(
    rates, amps, seed, traj_lo, traj_hi, drift_z, drift_x, h, n_sub, kind, pulses, ctrl_dir, shape_kind, angle, scale, rec_q
):
    """Exact 2x2 propagation under telegraph noise plus control.

    The time axis is cut at every switch event and every control substep of
    length ``h``; ``kind`` is 0 (free), 1 (bang-bang, ``pulses[l]`` applied at
    the end of subinterval ``l``) or 2 (Eulerian pulse ``f(s) ctrl_dir[l]``).
    Records are taken after control step ``rec_q[r]`` and store
    ``rho_01(t) / rho_01(0)`` for the initial state ``(|0> + |1>)/sqrt 2``.
    """
    n_rec = rec_q.shape[0]
    L = pulses.shape[0]
    q_end = int(rec_q[-1])
    dt = h * n_sub
    out = np.zeros((traj_hi - traj_lo, n_rec), dtype=complex)
    tc = h * (np.arange(q_end) + 1.0)
    t_end = tc[-1] if q_end > 0 else 0.0
    q_all = np.arange(q_end)
    cell = (q_all // n_sub) % L
    sub = q_all % n_sub
    if kind == 2:
        smid = (sub + 0.5) * h
        if shape_kind == 0:
            f = np.full(q_end, scale * angle / dt)
        else:
            f = scale * 0.5 * np.pi * angle / dt * np.sin(np.pi * smid / dt)
        cx, cy, cz = f * ctrl_dir[cell, 0], f * ctrl_dir[cell, 1], f * ctrl_dir[cell, 2]
    else:
        cx = cy = cz = np.zeros(q_end)
    is_pulse = (kind == 1) & (((q_all + 1) % n_sub) == 0)
    for tr in range(traj_lo, traj_hi):
        ev_t, ev_d = [], []
        xi0 = 0.0
        for k in range(rates.shape[0]):
            key = _rng.stream_key(seed, tr, k)
            sign0 = _rng.initial_sign(key)
            xi0 += sign0 * 0.5 * amps[k]
            times = _rng.switch_times(key, 0.5 * rates[k], t_end)
            alt = np.where(np.arange(times.size) % 2 == 0, sign0, -sign0)
            ev_t.append(times)
            ev_d.append(-alt * amps[k])
        ev_t = np.concatenate(ev_t) if ev_t else np.empty(0)
        ev_d = np.concatenate(ev_d) if ev_d else np.empty(0)
        order = np.argsort(ev_t, kind="mergesort")
        ev_t, ev_d = ev_t[order], ev_d[order]
        xi_after = xi0 + np.cumsum(ev_d)

        # boundaries: events sort before control steps at equal times
        bt = np.concatenate((ev_t, tc))
        btype = np.concatenate((np.zeros(ev_t.size, np.int64), np.ones(q_end, np.int64)))
        bidx = np.concatenate((np.arange(ev_t.size), q_all))
        o = np.lexsort((btype, bt))
        bt, btype, bidx = bt[o], btype[o], bidx[o]
        start = np.concatenate(([0.0], bt[:-1]))
        tau = bt - start
        n_ev_before = np.cumsum(np.concatenate(([0], (btype == 0)[:-1].astype(np.int64))))
        xi = np.concatenate(([xi0], xi_after))[n_ev_before]
        q_cur = np.cumsum(np.concatenate(([0], (btype == 1)[:-1].astype(np.int64))))
        q_cur = np.minimum(q_cur, q_end - 1)
        ops = _su2_steps(drift_x + cx[q_cur], cy[q_cur], drift_z + xi + cz[q_cur], tau)
        ctrl_pos = np.flatnonzero(btype == 1)
        pulse_pos = ctrl_pos[is_pulse[bidx[ctrl_pos]]]
        if pulse_pos.size:
            ops[pulse_pos] = pulses[cell[bidx[pulse_pos]]] @ ops[pulse_pos]
        # records after control step rec_q[r] (1-based count of completed steps)
        rec_pos = np.where(rec_q > 0, ctrl_pos[np.maximum(rec_q - 1, 0)] + 1, 0)
        cuts = np.concatenate(([0], rec_pos))
        chunks = _chain_products(ops, cuts)
        u = np.eye(2, dtype=complex)
        for r in range(n_rec):
            u = chunks[r] @ u
            out[tr - traj_lo, r] = (u[0, 0] + u[0, 1]) * np.conj(u[1, 0] + u[1, 1])
    return out
