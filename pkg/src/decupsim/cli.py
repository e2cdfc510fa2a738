"""Command-line front end.

``decupsim run --config cfg.json`` (or ``--recipe NAME``) validates a JSON
experiment description, runs it and writes ``<name>.csv`` plus
``<name>.manifest.json`` into ``--out``. A manifest is itself a valid config,
so re-running it reproduces the CSV. ``decupsim recipes`` lists the built-in
configurations.

CSV schemas (12 significant digits):

* coherence curves: ``time,series_id,coherence,stderr``
* spectra: ``omega,power``
* matrices: ``row,col,real,imag``
* Eulerian cycles: ``step,from,to,generator``

Exit codes: 0 success, 2 invalid input, 3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import platform
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__, _kernels, averaging, euler, oneoverf, protocol, qmat, spinboson
from .errors import ConvergenceError, ValidationError
from .series import CoherenceSeries, QubitSpec

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 2, 3
TOP_LEVEL = {"kind", "name", "seed", "workers", "params"}
REQUIRED = object()


# ---------------------------------------------------------------- parameter coercion


def _number(kind: type) -> Callable[[str, Any], Any]:
    def coerce(key, value):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"{key}: expected a number, got {value!r}")
        if kind is int:
            if float(value) != int(value):
                raise ValidationError(f"{key}: expected an integer, got {value!r}")
            return int(value)
        return float(value)

    return coerce


def _positive(kind: type):
    base = _number(kind)

    def coerce(key, value):
        v = base(key, value)
        if v <= 0:
            raise ValidationError(f"{key}: must be positive")
        return v

    return coerce


def _optional(inner):
    return lambda key, value: None if value is None else inner(key, value)


def _choice(*options: str):
    def coerce(key, value):
        if value not in options:
            raise ValidationError(f"{key}: expected one of {list(options)}, got {value!r}")
        return value

    return coerce


def _flag(key, value):
    if not isinstance(value, bool):
        raise ValidationError(f"{key}: expected true or false")
    return value


def _float_list(key, value):
    if not isinstance(value, list) or not value:
        raise ValidationError(f"{key}: expected a non-empty list of numbers")
    return [_positive(float)(f"{key}[{i}]", v) for i, v in enumerate(value)]


def _int_list(key, value):
    if not isinstance(value, list) or not value:
        raise ValidationError(f"{key}: expected a non-empty list of integers")
    return [_number(int)(f"{key}[{i}]", v) for i, v in enumerate(value)]


def _pauli_coefficients(key, value):
    if not isinstance(value, dict) or not value:
        raise ValidationError(f"{key}: expected an object with Pauli coefficients i/x/y/z")
    out = {}
    for p, c in value.items():
        if p not in ("i", "x", "y", "z"):
            raise ValidationError(f"{key}: unknown Pauli label {p!r}")
        out[p] = _number(float)(f"{key}.{p}", c)
    return out


GROUP = _choice("cp", "pauli")
SHAPE = _choice("constant", "sine")

SCHEMAS: dict[str, dict[str, tuple[Callable, Any]]] = {
    "group-average": {
        "group": (GROUP, "cp"),
        "hamiltonian": (_pauli_coefficients, REQUIRED),
    },
    "eulerian-cycle": {
        "group": (GROUP, "cp"),
        "generator_indices": (_optional(_int_list), None),
    },
    "avg-ham": {
        "group": (GROUP, "cp"),
        "hamiltonian": (_pauli_coefficients, REQUIRED),
        "schedule": (_choice("bb", "eulerian"), "bb"),
        "dt": (_positive(float), 1.0),
        "shape": (SHAPE, "constant"),
        "first_order": (_flag, False),
        "substeps": (_positive(int), 32),
    },
    "spin-boson": {
        "n_modes": (_positive(int), 20),
        "omega_max": (_positive(float), 1.0),
        "omega_cut": (_optional(_positive(float)), None),
        "strength": (_positive(float), spinboson.DEFAULT_STRENGTH),
        "temperature": (_number(float), 0.0),
        "t_final": (_positive(float), 50.0),
        "dt_list": (_float_list, REQUIRED),
        "n_points": (_positive(int), 200),
        "pulse_error": (_number(float), 0.0),
    },
    "one-over-f": {
        "gamma_min": (_positive(float), REQUIRED),
        "gamma_max": (_positive(float), REQUIRED),
        "n_d": (_positive(float), 10.0),
        "mean_v": (_number(float), REQUIRED),
        "schedule": (_choice("free", "bb", "eulerian"), "free"),
        "group": (GROUP, "cp"),
        "dt": (_optional(_positive(float)), None),
        "shape": (SHAPE, "constant"),
        "n_cycles": (_optional(_positive(int)), None),
        "t_final": (_optional(_positive(float)), None),
        "n_points": (_positive(int), 200),
        "n_traj": (_positive(int), 1000),
        "omega0": (_number(float), 1.0),
        "delta": (_number(float), 0.0),
        "pulse_error": (_number(float), 0.0),
        "substeps": (_optional(_positive(int)), None),
    },
    "psd": {
        "gamma_min": (_positive(float), REQUIRED),
        "gamma_max": (_positive(float), REQUIRED),
        "n_d": (_positive(float), 10.0),
        "mean_v": (_number(float), 1.0),
        "t_max": (_positive(float), REQUIRED),
        "n_realizations": (_positive(int), 200),
        "dt": (_optional(_positive(float)), None),
    },
    "fig3": {
        "case": (_choice(*sorted(oneoverf.FIG3_CASES)), REQUIRED),
        "dt_list": (_optional(_float_list), None),
        "horizon": (_optional(_positive(float)), None),
        "n_traj": (_positive(int), 1000),
        "n_d": (_positive(float), 10.0),
        "level": (_positive(float), 0.2),
        "n_points": (_positive(int), 400),
    },
}


@dataclass
class ExperimentConfig:
    kind: str
    name: str
    seed: int
    workers: int | None
    params: dict

    def resolved(self) -> dict:
        return {"kind": self.kind, "name": self.name, "seed": self.seed, "params": copy.deepcopy(self.params)}


def validate_config(raw: Any) -> ExperimentConfig:
    """Check a raw config object and fill in defaults. Nothing is computed here."""
    if not isinstance(raw, dict):
        raise ValidationError("config must be a JSON object")
    if "config" in raw and "kind" not in raw:
        raw = raw["config"]  # a run manifest
        if not isinstance(raw, dict):
            raise ValidationError("manifest field 'config' must be an object")
    unknown = set(raw) - TOP_LEVEL
    if unknown:
        raise ValidationError(f"unknown top-level keys: {sorted(unknown)}")
    if "kind" not in raw:
        raise ValidationError("missing required field 'kind'")
    kind = raw["kind"]
    if kind not in SCHEMAS:
        raise ValidationError(f"kind: expected one of {sorted(SCHEMAS)}, got {kind!r}")
    name = raw.get("name", kind)
    if not isinstance(name, str) or not name or "/" in name or "\\" in name:
        raise ValidationError("name: expected a plain file stem")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ValidationError("seed: expected an unsigned 64-bit integer")
    workers = raw.get("workers")
    if workers is not None and (isinstance(workers, bool) or not isinstance(workers, int) or workers < 1):
        raise ValidationError("workers: expected a positive integer")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ValidationError("params must be an object")
    schema = SCHEMAS[kind]
    unknown = set(params) - set(schema)
    if unknown:
        raise ValidationError(f"unknown {kind} parameters: {sorted(unknown)}")
    out = {}
    for key, (coerce, default) in schema.items():
        if key in params:
            out[key] = coerce(key, params[key])
        elif default is REQUIRED:
            raise ValidationError(f"missing required field 'params.{key}'")
        else:
            out[key] = copy.deepcopy(default)
    return ExperimentConfig(kind, name, seed, workers, out)


def apply_override(raw: dict, assignment: str) -> None:
    """Apply ``key=value``; bare keys go to ``params`` unless they are top-level."""
    if "=" not in assignment:
        raise ValidationError(f"--set expects key=value, got {assignment!r}")
    key, text = assignment.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    path = key.split(".")
    if path[0] not in TOP_LEVEL:
        path = ["params"] + path
    node = raw
    for part in path[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ValidationError(f"--set {key}: {part} is not an object")
    node[path[-1]] = value


# ---------------------------------------------------------------- experiments


@dataclass
class Output:
    header: list[str]
    rows: list[tuple]
    results: dict


def _group(name: str) -> protocol.DecouplingGroup:
    return protocol.cp_group() if name == "cp" else protocol.pauli_group()


def _hamiltonian(coeffs: dict) -> np.ndarray:
    ops = {"i": qmat.I2, "x": qmat.SX, "y": qmat.SY, "z": qmat.SZ}
    return sum(c * ops[p] for p, c in coeffs.items()) + 0 * qmat.I2


def _matrix_rows(m: np.ndarray) -> list[tuple]:
    return [(i, j, m[i, j].real, m[i, j].imag) for i in range(m.shape[0]) for j in range(m.shape[1])]


def _series_rows(series: list[CoherenceSeries]) -> list[tuple]:
    rows = []
    for s in series:
        err = s.stderr if s.stderr is not None else np.zeros_like(s.coherence)
        rows.extend((t, s.label, c, e) for t, c, e in zip(s.times, s.coherence, err))
    return rows


SERIES_HEADER = ["time", "series_id", "coherence", "stderr"]
MATRIX_HEADER = ["row", "col", "real", "imag"]


def _run_group_average(cfg: ExperimentConfig) -> Output:
    p = cfg.params
    avg = protocol.group_average(_group(p["group"]), _hamiltonian(p["hamiltonian"]))
    return Output(MATRIX_HEADER, _matrix_rows(avg), {"norm": float(np.linalg.norm(avg))})


def _run_eulerian_cycle(cfg: ExperimentConfig) -> Output:
    p = cfg.params
    graph = euler.cayley_graph(_group(p["group"]), p["generator_indices"])
    cycle = euler.eulerian_cycle(graph)
    rows = [(i, e.source, e.target, e.label) for i, e in enumerate(cycle)]
    return Output(["step", "from", "to", "generator"], rows, {"n_edges": len(cycle), "n_vertices": graph.n_vertices})


def _run_avg_ham(cfg: ExperimentConfig) -> Output:
    p = cfg.params
    group = _group(p["group"])
    if p["schedule"] == "bb":
        sched = protocol.bb_schedule(group, p["dt"])
    else:
        sched = euler.eulerian_schedule(group, p["dt"], kind=p["shape"])
    res = averaging.average_hamiltonian(sched, _hamiltonian(p["hamiltonian"]), substeps=p["substeps"], first_order=p["first_order"])
    results = {
        "norm": float(np.linalg.norm(res.h_bar0)),
        "integration_error": res.integration_error,
        "cycle_time": res.cycle_time,
        "max_amplitude": float(sched.max_amplitude),
        "impulsive": bool(sched.impulsive),
    }
    if res.h_bar1 is not None:
        results["first_order_norm"] = float(np.linalg.norm(res.h_bar1))
    return Output(MATRIX_HEADER, _matrix_rows(res.h_bar0), results)


def _run_spin_boson(cfg: ExperimentConfig) -> Output:
    p = cfg.params
    bath = spinboson.ohmic_bath(p["n_modes"], p["omega_max"], p["omega_cut"], p["strength"], p["temperature"])
    grid = np.linspace(0.0, p["t_final"], p["n_points"] + 1)
    series = [spinboson.free_coherence(bath, grid)]
    for dt in p["dt_list"]:
        if p["pulse_error"] == 0.0:
            series.append(spinboson.cp_coherence(bath, dt, times=grid))
        else:
            n = int(p["t_final"] // (2 * dt))
            if n < 1:
                raise ValidationError(f"dt={dt} leaves no complete cycle before t_final")
            series.append(spinboson.cp_coherence(bath, dt, n_cycles=n, pulse_error=p["pulse_error"]))
    final = {s.label: float(s.coherence[-1]) for s in series}
    return Output(SERIES_HEADER, _series_rows(series), {"final_coherence": final})


def _run_one_over_f(cfg: ExperimentConfig) -> Output:
    p = cfg.params
    ens = oneoverf.sample_ensemble(p["gamma_min"], p["gamma_max"], p["n_d"], p["mean_v"], seed=cfg.seed)
    qubit = QubitSpec(omega0=p["omega0"], delta=p["delta"])
    common = dict(n_traj=p["n_traj"], seed=cfg.seed, workers=cfg.workers, pulse_error=p["pulse_error"], substeps=p["substeps"])
    if p["schedule"] == "free":
        if p["t_final"] is None:
            raise ValidationError("free evolution needs params.t_final")
        times = np.linspace(0.0, p["t_final"], p["n_points"] + 1)
        s = oneoverf.controlled_coherence(ens, None, qubit, times=times, **common)
    else:
        if p["dt"] is None or p["n_cycles"] is None:
            raise ValidationError("controlled evolution needs params.dt and params.n_cycles")
        group = _group(p["group"])
        if p["schedule"] == "bb":
            sched = protocol.bb_schedule(group, p["dt"])
        else:
            sched = euler.eulerian_schedule(group, p["dt"], kind=p["shape"])
        s = oneoverf.controlled_coherence(ens, sched, qubit, n_cycles=p["n_cycles"], **common)
    s = CoherenceSeries(s.times, s.coherence, s.stderr, label=p["schedule"], meta=s.meta)
    return Output(SERIES_HEADER, _series_rows([s]), {"n_fluctuators": ens.n_fluctuators, "final_coherence": float(s.coherence[-1])})


def _run_psd(cfg: ExperimentConfig) -> Output:
    p = cfg.params
    ens = oneoverf.sample_ensemble(p["gamma_min"], p["gamma_max"], p["n_d"], p["mean_v"], seed=cfg.seed)
    spec = oneoverf.estimate_psd(ens, p["t_max"], p["n_realizations"], seed=cfg.seed, dt=p["dt"], workers=cfg.workers)
    results = {"n_fluctuators": ens.n_fluctuators}
    lo, hi = 10 * p["gamma_min"], p["gamma_max"] / 10
    if hi > lo:
        try:
            results["slope"] = spec.loglog_slope(lo, hi)
        except ValidationError:
            pass
    return Output(["omega", "power"], list(zip(spec.omega, spec.power)), results)


def _run_fig3(cfg: ExperimentConfig) -> Output:
    p = cfg.params
    res = oneoverf.fig3_experiment(
        p["case"], p["dt_list"], p["horizon"], p["n_traj"], cfg.seed, cfg.workers, p["n_d"], p["level"], p["n_points"]
    )
    results = {
        "horizon": res.horizon,
        "crossings": {str(k): v for k, v in res.crossings.items()},
        "n_fluctuators": res.ensemble.n_fluctuators,
        "final_coherence": {s.label: float(s.coherence[-1]) for s in res.series},
    }
    return Output(SERIES_HEADER, _series_rows(res.series), results)


RUNNERS = {
    "group-average": _run_group_average,
    "eulerian-cycle": _run_eulerian_cycle,
    "avg-ham": _run_avg_ham,
    "spin-boson": _run_spin_boson,
    "one-over-f": _run_one_over_f,
    "psd": _run_psd,
    "fig3": _run_fig3,
}


# ---------------------------------------------------------------- recipes

RECIPES: dict[str, tuple[str, dict]] = {
    "cp-spinboson": (
        "Carr-Purcell control of the default ohmic bath, dt halved six times",
        {"kind": "spin-boson", "name": "cp-spinboson", "params": {"dt_list": [0.64, 0.32, 0.16, 0.08, 0.04, 0.02, 0.01]}},
    ),
    "eulerian-z2": (
        "Eulerian (bounded-strength) decoupling of sz with the two-element group, sine pulses",
        {"kind": "avg-ham", "name": "eulerian-z2", "params": {"group": "cp", "hamiltonian": {"z": 1.0}, "schedule": "eulerian", "shape": "sine"}},
    ),
    "fig3-a": ("1/f dephasing, gamma_min=1e-4, <v>=1e-4, dt in {1000,100,10}", {"kind": "fig3", "name": "fig3-a", "params": {"case": "a"}}),
    "fig3-b": ("1/f dephasing, gamma_min=1e-6, <v>=1e-4, dt in {1000,100,10}", {"kind": "fig3", "name": "fig3-b", "params": {"case": "b"}}),
    "fig3-c": ("1/f dephasing, gamma_min=1e-4, <v>=1e-2, dt in {10,1,0.1}", {"kind": "fig3", "name": "fig3-c", "params": {"case": "c"}}),
    "pauli-universal": (
        "Pauli-group average of a generic qubit Hamiltonian (only the identity part survives)",
        {"kind": "group-average", "name": "pauli-universal", "params": {"group": "pauli", "hamiltonian": {"i": 0.25, "x": 0.7, "y": -0.4, "z": 1.3}}},
    ),
}


def list_recipes() -> str:
    width = max(len(n) for n in RECIPES)
    return "\n".join(f"{n:<{width}}  {desc}" for n, (desc, _) in RECIPES.items())


# ---------------------------------------------------------------- orchestration


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def _versions() -> dict:
    import numba
    import scipy

    return {
        "decupsim": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def execute(cfg: ExperimentConfig, out_dir: Path) -> tuple[Path, Path]:
    """Run a validated config and write its CSV and manifest."""
    output = RUNNERS[cfg.kind](cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{cfg.name}.csv"
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(output.header)
        w.writerows([_fmt(v) for v in row] for row in output.rows)
    manifest = {
        "config": cfg.resolved(),
        "seed": cfg.seed,
        "versions": _versions(),
        "backend": _kernels.DEFAULT_BACKEND,
        "outputs": [csv_path.name],
        "results": output.results,
    }
    man_path = out_dir / f"{cfg.name}.manifest.json"
    man_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return csv_path, man_path


def _load_raw(args) -> dict:
    if args.recipe and args.config:
        raise ValidationError("use either --config or --recipe, not both")
    if args.recipe:
        if args.recipe not in RECIPES:
            raise ValidationError(f"unknown recipe {args.recipe!r}; see `decupsim recipes`")
        return copy.deepcopy(RECIPES[args.recipe][1])
    if not args.config:
        raise ValidationError("missing --config or --recipe")
    try:
        raw = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from None
    if isinstance(raw, dict) and "config" in raw and "kind" not in raw:
        raw = raw["config"]
    return raw


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decupsim", description="Dynamical decoupling simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", help="JSON config or run manifest")
    run.add_argument("--recipe", help="built-in config name")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config entry")
    run.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    run.add_argument("--workers", type=int, help="worker threads (default: $DECUPSIM_WORKERS or 1)")
    run.add_argument("--out", default=".", help="output directory")
    sub.add_parser("recipes", help="list built-in configs")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "recipes":
        print(list_recipes())
        return EXIT_OK
    try:
        raw = _load_raw(args)
        if not isinstance(raw, dict):
            raise ValidationError("config must be a JSON object")
        for assignment in args.set:
            apply_override(raw, assignment)
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.workers is not None:
            raw["workers"] = args.workers
        cfg = validate_config(raw)
        csv_path, man_path = execute(cfg, Path(args.out))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConvergenceError as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    print(f"wrote {csv_path} and {man_path}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
