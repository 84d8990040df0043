"""Command-line front end.

Usage::

    dwelltime analyze    --config job.json --out results/
    dwelltime search     --config job.json --out results/
    dwelltime synthesize --config job.json --out results/
    dwelltime simulate   --config job.json --out results/ --paths 10000 --seed 1
    dwelltime convert    --config job.json --out results/
    dwelltime reproduce  T2 --out results/

Every command writes ``report.json`` (byte-identical across repeated runs)
and ``metadata.json`` (wall-clock time, versions).  Series data goes to CSV.

Exit codes: 0 completed with a stable/feasible verdict, 1 completed with an
unstable/infeasible verdict, 2 usage or schema error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, benchmarks, clockcond, dtsearch, moments, sde_sim, synthesis
from .matalg import LinAlgError
from .model import (
    Constant,
    Minimum,
    Ranged,
    ImpulsiveSystem,
    SampledDataSystem,
    SwitchedSystem,
    ValidationError,
    sampled_data_to_impulsive,
    switched_to_impulsive,
    validate,
)
from .sdp import SolverError

SCHEMA_VERSION = 1
COMMANDS = ("analyze", "search", "synthesize", "simulate", "convert")
TABLES = ("T1", "T2", "T3", "T4", "T5")

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(Exception):
    """Schema violation at a JSON path such as ``system.J``."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


# ---------------------------------------------------------------------------
# config parsing

def _get(block: dict, key: str, path: str, default=..., kind=None):
    if key not in block:
        if default is ...:
            raise ConfigError(f"{path}.{key}", "required field is missing")
        return default
    value = block[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{path}.{key}", f"expected a finite number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}.{key}", f"expected an integer, got {value!r}")
        return value
    if kind is str and not isinstance(value, str):
        raise ConfigError(f"{path}.{key}", f"expected a string, got {value!r}")
    if kind is dict and not isinstance(value, dict):
        raise ConfigError(f"{path}.{key}", "expected an object")
    return value


def parse_matrix(value, path: str) -> np.ndarray:
    """A matrix given as a list of equal-length rows of numbers (or a scalar)."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return np.array([[float(value)]])
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "expected a non-empty list of rows")
    rows = value if isinstance(value[0], list) else [[v] for v in value]
    width = len(rows[0])
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != width:
            raise ConfigError(path, f"row {i} has length {len(row) if isinstance(row, list) else '?'}, expected {width}")
        for v in row:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(path, f"non-numeric entry {v!r} in row {i}")
    return np.array(rows, dtype=float).reshape(len(rows), width)


def _matrix_list(value, path):
    if isinstance(value, list) and value and isinstance(value[0], list) and value[0] and isinstance(value[0][0], list):
        return [parse_matrix(v, f"{path}[{i}]") for i, v in enumerate(value)]
    return [parse_matrix(value, path)]


def _raise_validation(errors, path, rename=None):
    field, message = errors[0]
    if rename:
        head = field.split("[")[0].split(".")[0]
        field = field.replace(head, rename.get(head, head), 1)
    raise ConfigError(f"{path}.{field}", message)


def parse_system(block, path: str = "system"):
    """Return one of ImpulsiveSystem, SwitchedSystem or SampledDataSystem."""
    if not isinstance(block, dict):
        raise ConfigError(path, "expected an object")
    kind = _get(block, "type", path, "impulsive", str)
    if kind == "impulsive":
        n_A = parse_matrix(_get(block, "A", path), f"{path}.A")
        mats = {"A": n_A, "J": parse_matrix(_get(block, "J", path), f"{path}.J")}
        n = n_A.shape[0]
        mats["E_c"] = _matrix_list(block["E_c"], f"{path}.E_c") if "E_c" in block else [np.zeros((n, n))]
        mats["E_d"] = parse_matrix(block["E_d"], f"{path}.E_d") if "E_d" in block else np.zeros((n, n))
        for name in ("B_c1", "B_c2", "B_d1", "B_d2"):
            if name in block:
                mats[name] = parse_matrix(block[name], f"{path}.{name}")
        for pair in (("B_c1", "B_c2"), ("B_d1", "B_d2")):
            present = [p for p in pair if p in mats]
            if len(present) == 1:
                other = pair[1] if present[0] == pair[0] else pair[0]
                mats[other] = np.zeros_like(mats[present[0]])
        for name in ("A", "J", "E_d"):
            if mats[name].shape != (n, n):
                raise ConfigError(f"{path}.{name}", f"expected shape {(n, n)}, got {mats[name].shape}")
        sysobj = ImpulsiveSystem.build(**mats)
        errors = validate(sysobj)
        if errors:
            _raise_validation(errors, path)
        return sysobj
    if kind == "switched":
        modes = _get(block, "modes", path)
        if not isinstance(modes, list):
            raise ConfigError(f"{path}.modes", "expected a list of modes")
        parsed = []
        for i, m in enumerate(modes):
            p = f"{path}.modes[{i}]"
            if not isinstance(m, dict):
                raise ConfigError(p, "expected an object with G and H")
            G = parse_matrix(_get(m, "G", p), f"{p}.G")
            H = parse_matrix(m["H"], f"{p}.H") if "H" in m else np.zeros_like(G)
            parsed.append((G, H))
        sw = SwitchedSystem(tuple(parsed))
        errors = validate(sw)
        if errors:
            _raise_validation(errors, path)
        return sw
    if kind == "sampled_data":
        sd = SampledDataSystem(
            A_sd=parse_matrix(_get(block, "A", path), f"{path}.A"),
            B_sd=parse_matrix(_get(block, "B", path), f"{path}.B"),
            E_sd=parse_matrix(_get(block, "E", path), f"{path}.E"),
            alpha=_get(block, "alpha", path, 0.0, float),
        )
        errors = validate(sd)
        if errors:
            _raise_validation(errors, path, {"A_sd": "A", "B_sd": "B", "E_sd": "E"})
        return sd
    if kind == "benchmark":
        name = _get(block, "name", path, kind=str)
        kappa = _get(block, "kappa", path, 0.0, float)
        delta = _get(block, "delta", path, 0.0, float)
        if name == "constant":
            return benchmarks.example_constant(kappa, delta)
        if name == "ranged":
            return benchmarks.example_ranged(kappa, delta)
        if name == "feedback":
            return benchmarks.example_feedback()
        if name == "sampled_data":
            return benchmarks.example_sampled_data(_get(block, "alpha", path, 0.1, float))
        raise ConfigError(f"{path}.name", f"unknown benchmark {name!r} (constant, ranged, feedback, sampled_data)")
    raise ConfigError(f"{path}.type", f"unknown system type {kind!r} (impulsive, switched, sampled_data, benchmark)")


def parse_dwell(block, path):
    if not isinstance(block, dict):
        raise ConfigError(path, "expected an object")
    kind = _get(block, "kind", path, kind=str)
    try:
        if kind == "constant":
            return Constant(_get(block, "T", path, kind=float))
        if kind == "minimum":
            return Minimum(_get(block, "T", path, kind=float))
        if kind == "ranged":
            return Ranged(_get(block, "T_min", path, kind=float), _get(block, "T_max", path, kind=float))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.kind", f"unknown dwell-time kind {kind!r} (constant, ranged, minimum)")


def _range(block, key, path, default):
    value = block.get(key, default)
    if not (isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value)
            and 0 < value[0] < value[1]):
        raise ConfigError(f"{path}.{key}", "expected [lo, hi] with 0 < lo < hi")
    return (float(value[0]), float(value[1]))


DEFAULT_OPTIONS = {
    "mode": None, "N": None, "grid_n": clockcond.DEFAULT_GRID, "eps": None, "tol": dtsearch.DEFAULT_TOL,
    "seed": 0, "paths": 10_000, "horizon": None, "threads": 1,
}


def merge_options(config_opts: dict, args) -> dict:
    opts = dict(DEFAULT_OPTIONS)
    for key, value in config_opts.items():
        if key not in opts:
            raise ConfigError(f"options.{key}", "unknown option")
        opts[key] = value
    flags = {"mode": args.mode, "N": args.pwl_n, "grid_n": args.grid_n, "eps": args.eps, "tol": args.tol,
             "seed": args.seed, "paths": args.paths, "threads": args.threads}
    for key, value in flags.items():
        if value is not None:
            opts[key] = value
    if opts["mode"] not in (None, "exact", "pwl", "lifted"):
        raise ConfigError("options.mode", "expected exact, pwl or lifted")
    for key in ("N", "grid_n", "seed", "paths", "threads"):
        if opts[key] is not None and (isinstance(opts[key], bool) or not isinstance(opts[key], int) or opts[key] < 0):
            raise ConfigError(f"options.{key}", "expected a nonnegative integer")
    return opts


def load_config(path: Path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("$", f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("$", "top level must be an object")
    version = cfg.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version!r} (expected {SCHEMA_VERSION})")
    unknown = set(cfg) - {"schema_version", "system", "task", "options"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown top-level field")
    if "system" not in cfg:
        raise ConfigError("system", "required block is missing")
    for key in ("task", "options"):
        if key in cfg and not isinstance(cfg[key], dict):
            raise ConfigError(key, "expected an object")
    return cfg


# ---------------------------------------------------------------------------
# tasks; each returns (result dict, verdict bool, csv rows or None)

def _impulsive(sysobj, task, path="task"):
    if isinstance(sysobj, SampledDataSystem):
        K_d = parse_matrix(task["K_d"], f"{path}.K_d") if "K_d" in task else None
        try:
            return sampled_data_to_impulsive(sysobj, K_d)
        except ValidationError as exc:
            raise ConfigError(f"{path}.K_d", exc.errors[0][1]) from None
    if isinstance(sysobj, SwitchedSystem):
        raise ConfigError("system.type", "this task needs an impulsive or sampled-data system")
    return sysobj


def task_analyze(sysobj, task, opts):
    dwell = parse_dwell(_get(task, "dwell", "task"), "task.dwell")
    mode = opts["mode"] or ("lifted" if isinstance(dwell, Ranged) else "exact")
    N = opts["N"]
    if isinstance(sysobj, SwitchedSystem):
        if not isinstance(dwell, Minimum):
            raise ConfigError("task.dwell.kind", "switched systems are analyzed under minimum dwell-time")
        cert = clockcond.switched_min_dt(sysobj, dwell.T, N=N or 10, eps=opts["eps"])
        return {"certificate": cert.to_dict()}, bool(cert), None
    imp = _impulsive(sysobj, task)
    N = N or clockcond.DEFAULT_N
    out = {}
    if isinstance(dwell, Constant):
        spectral = moments.constant_dt_stable(imp, dwell.T)
        out["spectral"] = {"stable": spectral.stable, "rho": spectral.rho}
        if mode == "pwl":
            cert = clockcond.pwl_constant_dt(imp, dwell.T, N=N, eps=opts["eps"])
        elif mode == "exact":
            cert = clockcond.exact_constant_dt(imp, dwell.T, eps=opts["eps"])
        else:
            raise ConfigError("options.mode", "lifted mode applies to ranged dwell-time only")
        out["certificate"] = cert.to_dict()
        verdict = bool(cert) if mode == "pwl" else spectral.stable
    elif isinstance(dwell, Ranged):
        if mode == "lifted":
            cert = clockcond.lifted_quadratic_stability(imp, dwell.T_min, dwell.T_max, grid_n=opts["grid_n"])
        elif mode == "exact":
            cert = clockcond.exact_ranged_dt(imp, dwell.T_min, dwell.T_max, grid_n=opts["grid_n"], eps=opts["eps"])
        else:
            cert = clockcond.pwl_ranged_dt(imp, dwell.T_min, dwell.T_max, N=N, eps=opts["eps"])
        out["certificate"] = cert.to_dict()
        verdict = bool(cert)
    else:
        if mode == "lifted":
            raise ConfigError("options.mode", "lifted mode applies to ranged dwell-time only")
        if mode == "exact":
            cert = clockcond.exact_minimum_dt(imp, dwell.T, eps=opts["eps"])
        else:
            cert = clockcond.pwl_minimum_dt(imp, dwell.T, N=N, eps=opts["eps"])
        out["certificate"] = cert.to_dict()
        verdict = bool(cert)
    return out, verdict, None


SEARCH_TARGETS = ("smallest_constant_dt", "smallest_minimum_dt", "largest_ranged_tmax", "decay_rate")


def _search_one(imp, task, opts):
    target = _get(task, "target", "task", kind=str)
    tol = float(opts["tol"])
    if target == "smallest_constant_dt":
        return dtsearch.smallest_constant_dt(imp, _range(task, "T_range", "task", [0.01, 20.0]), tol,
                                             threads=opts["threads"])
    if target == "smallest_minimum_dt":
        return dtsearch.smallest_minimum_dt(imp, _range(task, "T_range", "task", [0.01, 20.0]), tol,
                                            mode=opts["mode"] or "exact", N=opts["N"] or clockcond.DEFAULT_N,
                                            eps=opts["eps"])
    if target == "largest_ranged_tmax":
        T_min = _get(task, "T_min", "task", kind=float)
        return dtsearch.largest_ranged_tmax(imp, T_min, _range(task, "T_range", "task", [T_min, 10 * max(T_min, 0.1)]),
                                            tol, mode=opts["mode"] or "lifted", N=opts["N"] or clockcond.DEFAULT_N,
                                            grid_n=opts["grid_n"], eps=opts["eps"])
    if target == "decay_rate":
        T = _get(task, "T", "task", kind=float)
        return {"decay_rate": dtsearch.decay_rate(imp, T), "T": T}
    raise ConfigError("task.target", f"unknown target {target!r} ({', '.join(SEARCH_TARGETS)})")


def _search_payload(res):
    if isinstance(res, dict):
        return res, True
    return res.to_dict(), res.threshold is not None


def _guarded(fn):
    try:
        return fn(), None
    except dtsearch.SearchError as exc:
        return None, {"reason": exc.reason, "message": str(exc), **exc.data}


def task_search(sysobj, task, opts, system_block):
    sweep = task.get("sweep")
    if sweep is None:
        imp = _impulsive(sysobj, task)
        res, err = _guarded(lambda: _search_one(imp, task, opts))
        if err is not None:
            return {"error": err}, False, None
        payload, verdict = _search_payload(res)
        rows = None
        if payload.get("scan"):
            rows = (["T", "rho"], payload["scan"])
        return payload, verdict, rows
    if not isinstance(sweep, dict):
        raise ConfigError("task.sweep", "expected an object with kappa and delta lists")
    if system_block.get("type") != "benchmark":
        raise ConfigError("task.sweep", "sweeps need a benchmark system block")
    kappas = [float(k) for k in _get(sweep, "kappa", "task.sweep")]
    deltas = [float(d) for d in _get(sweep, "delta", "task.sweep")]
    cells = [(k, d) for k in kappas for d in deltas]

    def run(cell):
        block = dict(system_block, kappa=cell[0], delta=cell[1])
        imp = parse_system(block)
        res, err = _guarded(lambda: _search_one(imp, task, opts))
        if err is not None:
            return None
        payload, _ = _search_payload(res)
        return payload.get("threshold", payload.get("decay_rate"))

    values = _parallel(run, cells, opts["threads"])
    table = [values[i * len(deltas):(i + 1) * len(deltas)] for i in range(len(kappas))]
    rows = (["kappa", "delta", "value"], [[k, d, v] for (k, d), v in zip(cells, values)])
    return {"kappa": kappas, "delta": deltas, "values": table}, all(v is not None for v in values), rows


def _synthesize(sysobj, task, opts, path="task"):
    dwell = parse_dwell(_get(task, "dwell", path), f"{path}.dwell")
    N = opts["N"]
    if isinstance(sysobj, SampledDataSystem):
        if not isinstance(dwell, Ranged):
            raise ConfigError(f"{path}.dwell.kind", "sampled-data synthesis uses a ranged sampling interval")
        return synthesis.sampled_data_sf(sysobj, dwell.T_min, dwell.T_max, N=N or 20, eps=opts["eps"])
    if isinstance(sysobj, SwitchedSystem):
        raise ConfigError("system.type", "synthesis needs an impulsive or sampled-data system")
    if isinstance(dwell, Ranged):
        return synthesis.ranged_sf(sysobj, dwell.T_min, dwell.T_max, N=N or 20, eps=opts["eps"])
    if isinstance(dwell, Minimum):
        return synthesis.min_dt_sf(sysobj, dwell.T, N=N or 10, eps=opts["eps"])
    return synthesis.ranged_sf(sysobj, dwell.T, dwell.T, N=N or 20, eps=opts["eps"])


def task_synthesize(sysobj, task, opts):
    res = _synthesize(sysobj, task, opts)
    rows = None
    if res.gains is not None and res.gains.m_c > 0:
        g = res.gains
        taus = np.asarray(g.S_tilde.knots)
        rows = (["tau"] + [f"K_c[{i}][{j}]" for i in range(g.m_c) for j in range(g.n)],
                [[float(t)] + g.K_c(t).ravel().tolist() for t in taus])
    return res.to_dict(), bool(res.feasible and res.verified), rows


def _schedule(block, path):
    if not isinstance(block, dict):
        raise ConfigError(path, "expected an object")
    kind = _get(block, "kind", path, kind=str)
    try:
        if kind == "constant":
            return sde_sim.constant(_get(block, "T", path, kind=float))
        if kind == "uniform":
            return sde_sim.uniform(_get(block, "T_min", path, kind=float), _get(block, "T_max", path, kind=float))
        if kind == "min_dt":
            return sde_sim.min_dt(_get(block, "T", path, kind=float), _get(block, "scale", path, 1.0, float))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.kind", f"unknown schedule kind {kind!r} (constant, uniform, min_dt)")


def task_simulate(sysobj, task, opts):
    gains, synth = None, None
    gblock = task.get("gains")
    if isinstance(sysobj, SampledDataSystem):
        if isinstance(gblock, dict) and "synthesize" in gblock:
            synth = _synthesize(sysobj, gblock["synthesize"], opts, "task.gains.synthesize")
            if synth.gains is None:
                return {"synthesis": synth.to_dict()}, False, None
            imp = sampled_data_to_impulsive(sysobj, synth.gains.K_d)
        else:
            imp = _impulsive(sysobj, task)
    else:
        imp = _impulsive(sysobj, task)
        if isinstance(gblock, dict) and "synthesize" in gblock:
            synth = _synthesize(sysobj, gblock["synthesize"], opts, "task.gains.synthesize")
            if synth.gains is None:
                return {"synthesis": synth.to_dict()}, False, None
            gains = synth.gains
        elif isinstance(gblock, dict):
            K_c = parse_matrix(gblock["K_c"], "task.gains.K_c") if "K_c" in gblock else np.zeros((imp.m_c, imp.n))
            K_d = parse_matrix(gblock["K_d"], "task.gains.K_d") if "K_d" in gblock else np.zeros((imp.m_d, imp.n))
            if K_c.shape != (imp.m_c, imp.n):
                raise ConfigError("task.gains.K_c", f"expected shape {(imp.m_c, imp.n)}, got {K_c.shape}")
            if K_d.shape != (imp.m_d, imp.n):
                raise ConfigError("task.gains.K_d", f"expected shape {(imp.m_d, imp.n)}, got {K_d.shape}")
            gains = synthesis.ControllerGains.constant(K_c, K_d)
        elif gblock is not None:
            raise ConfigError("task.gains", "expected an object")
    schedule = _schedule(_get(task, "schedule", "task"), "task.schedule")
    x0 = np.asarray(parse_matrix(_get(task, "x0", "task"), "task.x0"), dtype=float).ravel()
    if x0.size < imp.n and isinstance(sysobj, SampledDataSystem):
        x0 = np.concatenate([x0, np.zeros(imp.n - x0.size)])
    if x0.size != imp.n:
        raise ConfigError("task.x0", f"expected {imp.n} entries, got {x0.size}")
    horizon = task.get("horizon", opts["horizon"])
    if not isinstance(horizon, (int, float)) or isinstance(horizon, bool) or horizon <= 0:
        raise ConfigError("task.horizon", "expected a positive number")
    points = _get(task, "grid_points", "task", 51, int)
    noise = _get(task, "noise", "task", "normal", str)
    if noise not in ("normal", "rademacher"):
        raise ConfigError("task.noise", "expected normal or rademacher")
    h = task.get("h")
    spec = sde_sim.SimSpec(imp, schedule, x0, float(horizon), grid=np.linspace(0.0, float(horizon), points),
                           gains=gains, h=None if h is None else float(h), paths=int(opts["paths"]),
                           seed=int(opts["seed"]), noise=noise, threads=int(opts["threads"]))
    result = sde_sim.simulate(spec)
    report = sde_sim.moment_check(spec, result)
    out = {
        "grid": result.grid, "mean_sq": result.mean_sq, "std_err": result.std_err,
        "exact_mean_sq": report.exact, "z_scores": report.z_scores, "max_abs_z": report.max_abs_z,
        "deterministic_rel_err": report.deterministic_rel_err,
        "jump_times": result.jump_times, "post_jump_mean_sq": result.post_jump_mean_sq,
        "post_jump_exact": report.post_jump_exact, "rho": report.rho,
        "flagged": result.flagged, "paths": result.paths,
        "settings": {"seed": spec.seed, "paths": spec.paths, "h": spec.step(result.schedule), "noise": noise,
                     "horizon": spec.horizon, "grid_points": points, "schedule": vars(schedule)},
    }
    if synth is not None:
        out["synthesis"] = synth.to_dict()
    rows = (["time", "mean_sq", "std_err"], np.column_stack([result.grid, result.mean_sq, result.std_err]).tolist())
    decayed = bool(result.mean_sq[-1] < result.mean_sq[0])
    out["decayed"] = decayed
    return out, decayed, rows


def task_convert(sysobj, task, opts):
    if isinstance(sysobj, SwitchedSystem):
        mj = switched_to_impulsive(sysobj)
        out = {"type": "multi_jump", "A": mj.A, "E_c": list(mj.E_c),
               "jumps": [{"J": J, "E_d": E_d} for J, E_d in mj.jumps]}
    else:
        imp = _impulsive(sysobj, task)
        out = dict(imp.to_dict(), type="impulsive")
    return {"system": out}, True, None


# ---------------------------------------------------------------------------
# table reproduction

TABLE_TOLERANCES = {"T1": 2e-2, "T2": 5e-3, "T3": 2e-2, "T4": 2e-3}


def _parallel(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def reproduce(table: str, opts: dict) -> tuple[dict, bool, tuple]:
    if table == "T5":
        return _reproduce_t5(opts)
    if table in ("T1", "T2", "T3"):
        axes, reference, make = (benchmarks.KAPPA_T1, benchmarks.DELTA_T1), {
            "T1": benchmarks.TABLE1, "T2": benchmarks.TABLE2, "T3": benchmarks.TABLE3}[table], benchmarks.example_constant
    else:
        axes, reference, make = (benchmarks.KAPPA_T4, benchmarks.DELTA_T4), benchmarks.TABLE4, benchmarks.example_ranged
    N = opts["N"] or clockcond.DEFAULT_N
    tol = float(opts["tol"])

    def cell(kd):
        s = make(*kd)
        if table == "T1":
            return dtsearch.smallest_pwl_constant_dt(s, N=N, tol=max(tol, 1e-3), eps=opts["eps"]).threshold
        if table == "T2":
            return dtsearch.smallest_constant_dt(s, tol=tol).threshold
        if table == "T3":
            return dtsearch.smallest_minimum_dt(s, (0.01, 20.0), tol, mode="exact", eps=opts["eps"]).threshold
        return dtsearch.largest_ranged_tmax(s, benchmarks.T_MIN_T4, (benchmarks.T_MIN_T4, 1.0), tol,
                                            mode="lifted", grid_n=opts["grid_n"]).threshold

    cells = [(k, d) for k in axes[0] for d in axes[1]]
    values = _parallel(cell, cells, opts["threads"])
    computed = np.array([np.nan if v is None else v for v in values]).reshape(5, 5)
    dev = computed - reference
    excluded = [[i, j] for i, j in sorted(benchmarks.TABLE4_UNRELIABLE)] if table == "T4" else []
    mask = np.ones_like(dev, dtype=bool)
    for i, j in excluded:
        mask[i, j] = False
    max_dev = float(np.nanmax(np.where(mask, np.abs(dev), 0.0)))
    ok = bool(np.all(np.isfinite(dev[mask])) and max_dev <= TABLE_TOLERANCES[table])
    settings = {"tol": tol}
    if table == "T1":
        settings.update(method="pwl constant dwell-time", N=N, tol=max(tol, 1e-3))
    elif table == "T2":
        settings.update(method="spectral scan + bisection", scan_points=dtsearch.SCAN_POINTS)
    elif table == "T3":
        settings.update(method="exact minimum dwell-time LMI + bisection")
    else:
        settings.update(method="lifted quadratic stability", grid_n=opts["grid_n"], T_min=benchmarks.T_MIN_T4)
    out = {
        "table": table, "kappa": list(axes[0]), "delta": list(axes[1]),
        "reference": reference, "computed": computed, "deviation": dev,
        "max_abs_deviation": max_dev, "tolerance": TABLE_TOLERANCES[table],
        "excluded_cells": excluded, "within_tolerance": ok, "settings": settings,
    }
    rows = (["kappa", "delta", "reference", "computed", "deviation"],
            [[k, d, reference[i, j], computed[i, j], dev[i, j]]
             for i, k in enumerate(axes[0]) for j, d in enumerate(axes[1])])
    return out, ok, rows


def _reproduce_t5(opts):
    sd = benchmarks.example_sampled_data()
    N = opts["N"] or 20

    def row(entry):
        (T_min, T_max), K_ref = entry
        res = synthesis.sampled_data_sf(sd, T_min, T_max, N=N, eps=opts["eps"])
        return {"T_min": T_min, "T_max": T_max, "reference_K_d": np.asarray(K_ref),
                "K_d": None if res.gains is None else res.gains.K_d,
                "feasible": res.feasible, "verified": res.verified, "closed_loop_rho": res.closed_loop_rho}

    rows = _parallel(row, benchmarks.TABLE5, opts["threads"])
    ok = all(r["feasible"] and r["verified"] for r in rows)
    csv = (["T_min", "T_max", "verified", "closed_loop_rho"],
           [[r["T_min"], r["T_max"], int(r["verified"]), r["closed_loop_rho"]] for r in rows])
    return {"table": "T5", "rows": rows, "all_verified": ok, "settings": {"N": N}}, ok, csv


# ---------------------------------------------------------------------------
# output

def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return str(obj)


def write_outputs(out_dir: Path, report: dict, rows, elapsed: float) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps(to_jsonable(report), indent=2, sort_keys=True) + "\n")
    meta = {"elapsed_seconds": round(elapsed, 3), "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "version": __version__, "numpy": np.__version__}
    (out_dir / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    if rows is not None:
        header, data = rows
        lines = [",".join(header)]
        for r in data:
            lines.append(",".join("" if v is None or (isinstance(v, float) and not math.isfinite(v))
                                  else repr(float(v)) for v in r))
        (out_dir / "series.csv").write_text("\n".join(lines) + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dwelltime", description="Mean-square stability under dwell-time constraints.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, type=Path, help="job configuration (JSON)")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--mode", choices=("exact", "pwl", "lifted"))
        sp.add_argument("--pwl-n", type=int, help="piecewise-linear grid size N")
        sp.add_argument("--grid-n", type=int, help="dwell-time grid points for gridded tests")
        sp.add_argument("--eps", type=float)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--paths", type=int)
        sp.add_argument("--threads", type=int)

    for name in COMMANDS:
        common(sub.add_parser(name))
    rp = sub.add_parser("reproduce")
    rp.add_argument("table", choices=TABLES)
    common(rp, config=False)
    return p


TASKS = {"analyze": task_analyze, "synthesize": task_synthesize, "simulate": task_simulate, "convert": task_convert}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        if args.command == "reproduce":
            opts = merge_options({}, args)
            result, verdict, rows = reproduce(args.table, opts)
            report = {"schema_version": SCHEMA_VERSION, "command": "reproduce", "result": result,
                      "verdict": bool(verdict), "options": opts}
        else:
            cfg = load_config(args.config)
            task = cfg.get("task", {})
            ttype = task.get("type", args.command)
            if ttype != args.command:
                raise ConfigError("task.type", f"config describes a {ttype!r} task, command was {args.command!r}")
            opts = merge_options(cfg.get("options", {}), args)
            sysobj = parse_system(cfg["system"])
            if args.command == "search":
                result, verdict, rows = task_search(sysobj, task, opts, cfg["system"])
            else:
                result, verdict, rows = TASKS[args.command](sysobj, task, opts)
            report = {"schema_version": SCHEMA_VERSION, "command": args.command, "config": cfg,
                      "options": opts, "result": result, "verdict": bool(verdict)}
    except ConfigError as exc:
        print(f"error: {exc.path}: {exc.message}", file=sys.stderr)
        return EXIT_USAGE
    except (LinAlgError, SolverError, sde_sim.SimulationError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_outputs(args.out, report, rows, time.perf_counter() - start)
    print(f"{args.command}: {'stable/feasible' if verdict else 'unstable/infeasible'} -> {args.out / 'report.json'}")
    return EXIT_OK if verdict else EXIT_NEGATIVE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
