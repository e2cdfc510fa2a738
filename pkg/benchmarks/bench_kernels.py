#!/usr/bin/env python3
"""Compare the numba and numpy Monte Carlo kernels.

Runs each kernel on the same random streams, checks that both backends agree
and reports wall time per call plus the speed-up. Prints a table, or JSON with
``--json``.
"""
import argparse
import json
import time

import numpy as np

from decupsim import _kernels, euler, oneoverf, protocol, qmat

REPEATS = 3


def best_of(fn, repeats=REPEATS):
    fn()  # warm-up (compilation for numba)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(n_traj):
    ens = oneoverf.sample_ensemble(1e-2, 1e2, n_d=10, mean_v=0.05, seed=0)
    r, v = ens.rates, ens.couplings
    seed = np.uint64(1)
    t_max = 20.0
    ctrl_dt = np.array([1e9, 1.0, 0.1])
    signs = np.array([[1.0, 0.0], [1.0, -1.0], [1.0, -1.0]])
    lens = np.array([1, 2, 2])
    rec = np.tile(np.linspace(0.0, t_max, 41), (3, 1))
    es = euler.eulerian_schedule(protocol.pauli_group(), 0.25, kind="sine")
    dirs = np.array(
        [[np.trace(es.shape_for(l).direction @ p).real / 2 * es.shape_for(l).angle for p in (qmat.SX, qmat.SY, qmat.SZ)] for l in range(es.n_subintervals)]
    )
    eye = np.repeat(np.eye(2, dtype=complex)[None], es.n_subintervals, axis=0)
    h = 0.25 / 4
    rec_q = np.arange(0, int(round(t_max / h)) + 1, 32)
    return {
        "dephasing_phases": lambda k: k.dephasing_phases(r, v, seed, 0, n_traj, t_max, ctrl_dt, signs, lens, rec, np.full(3, 41)),
        "sample_grid": lambda k: np.stack([k.sample_grid(r, v, seed, i, 0.002, 100_000) for i in range(max(1, n_traj // 20))]),
        "qubit_propagation": lambda k: k.qubit_propagation(
            r, v, seed, 0, max(1, n_traj // 10), 0.0, 0.0, h, 4, 2, eye, dirs, 1, 1.0, 1.05, rec_q
        ),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-traj", type=int, default=200)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()
    if "numba" not in _kernels.BACKENDS:
        raise SystemExit("numba backend unavailable (DECUPSIM_DISABLE_NUMBA set or numba missing)")
    rows = []
    for name, call in cases(args.n_traj).items():
        t_np, out_np = best_of(lambda: call(_kernels.get("numpy")), repeats=1)
        t_nb, out_nb = best_of(lambda: call(_kernels.get("numba")))
        rows.append(
            {
                "kernel": name,
                "numpy_s": t_np,
                "numba_s": t_nb,
                "speedup": t_np / t_nb,
                "max_abs_diff": float(np.max(np.abs(out_np - out_nb))),
            }
        )
    if args.json:
        print(json.dumps(rows, indent=2))
        return
    print(f"{'kernel':<20}{'numpy [s]':>12}{'numba [s]':>12}{'speed-up':>10}{'max |diff|':>13}")
    for row in rows:
        print(f"{row['kernel']:<20}{row['numpy_s']:>12.4f}{row['numba_s']:>12.4f}{row['speedup']:>10.1f}{row['max_abs_diff']:>13.1e}")


if __name__ == "__main__":
    main()
