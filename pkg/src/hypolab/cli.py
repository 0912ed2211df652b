"""Command line: ``hypolab run|validate|sweep <config.json>``.

A config is one flat JSON object with dotted keys.  ``mode`` selects the
pipeline; every other key is checked against the mode's schema before any
computation starts.  ``HYPOLAB_OUT`` overrides ``output.dir``.

Exit status: 0 success, 2 certificate failure (a legitimate negative
result), 1 error.
"""

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import HypolabError

MAX_SWEEP = 10_000
TWO_PI = 2 * math.pi

# key -> (kind, default); a default of REQUIRED means the key must be given
REQUIRED = object()

COMMON = {
    "mode": ("str", REQUIRED),
    "seed": ("int", 0),
    "name": ("str", None),
    "output.dir": ("str", "hypolab_out"),
    "workers": ("int", 4),
}

MODEL = {
    "model.kind": ("str", "quadratic"),
    "model.omega": ("float", 1.0),
    "model.amplitude": ("float", 1.0),
    "model.length": ("float", TWO_PI),
    "model.Nx": ("int", 24),
    "model.Nv": ("int", 24),
}

SCHEMAS = {
    "certify": {
        "certify.task": ("str", "rate"),
        "certify.M": ("float", 1.0),
        "certify.kappa": ("float", 1.0),
        "certify.grid": ("int", 41),
        "certify.samples": ("int", 1000),
        **{k: (kind, None if k == "model.kind" else d) for k, (kind, d) in MODEL.items()},
        "ladder.a": ("float", None),
        "ladder.b": ("float", None),
        "ladder.c": ("float", None),
    },
    "decay": {
        **MODEL,
        "time.end": ("float", 40.0),
        "time.steps": ("int", 400),
        "fit.window": ("pair", [20.0, 40.0]),
    },
    "regularize": {
        "regularize.task": ("str", "exponents"),
        "model.omega": ("float", 1.0),
        "waves.kmin": ("float", 1.0),
        "waves.kmax": ("float", 1e6),
        "waves.per_octave": ("int", 2),
        "fit.window": ("pair", [1e-3, 1e-1]),
        "time.steps": ("int", 41),
        "time.end": ("float", 1.0),
        "herau.a": ("float", 0.1),
        "herau.b": ("float", 0.01),
        "herau.c": ("float", 0.001),
        "herau.dt": ("float", 1e-4),
        "system.a": ("float", 0.1),
        "system.delta": ("float", 1 / 3),
        "system.theta": ("float", 0.25),
        "system.steps": ("int", 301),
        "nash.members": ("int", 7),
        "nash.grid": ("int", 2048),
        "nash.box": ("float", 64.0),
        "nash.exponents": ("floats", [0.0, 1.0, 1.0, 3.0]),
    },
    "entropy": {
        "grid.Nx": ("int", 128),
        "grid.Nv": ("int", 129),
        "grid.length": ("float", TWO_PI),
        "grid.vmax": ("float", 6.0),
        "grid.refine": ("bool", False),
        "potential.amplitude": ("float", 1.0),
        "ladder.delta": ("float", 0.5),
        "time.end": ("float", 5.0),
        "time.every": ("int", 20),
        "fit.window": ("pair", [1.0, 5.0]),
    },
    "oseen": {
        "oseen.alpha": ("floats", [10.0, 31.6, 100.0, 316.0, 1000.0]),
        "oseen.N": ("int", 256),
        "oseen.f": ("str", "inv_quadratic"),
        "oseen.tail": ("float", 0.1),
    },
    "vfp": {
        "grid.Nx": ("int", 64),
        "grid.Nv": ("int", 96),
        "grid.length": ("float", 1.0),
        "grid.vmax": ("float", 6.0),
        "coupling.amplitude": ("float", 0.3),
        "coupling.delta": ("float", 0.38),
        "init.eta": ("float", 0.1),
        "init.drift": ("float", 0.3),
        "schedule.K": ("float", 0.5),
        "schedule.k": ("float", 1.0),
        "schedule.eps": ("float", 0.1),
        "time.end": ("float", 10.0),
        "time.every": ("int", 10),
        "fit.window": ("pair", [2.0, 10.0]),
    },
    "tensor": {
        "tensor.count": ("int", 200),
    },
}

CHOICES = {
    "certify.task": ("rate", "sampling", "ladders"),
    "regularize.task": ("exponents", "diffineq", "nash"),
    "model.kind": ("quadratic", "cosine", "bgk"),
    "oseen.f": ("inv_quadratic",),
}


class ConfigError(Exception):
    """Carries one diagnostic line per failing field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _coerce(key, kind, value, problems):
    bad = lambda what: problems.append(f"{key}: expected {what}, got {value!r}")  # noqa: E731
    if value is None:
        return None
    if kind == "str":
        if not isinstance(value, str):
            return bad("a string")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            return bad("true or false")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            return bad("an integer")
        return int(value)
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            return bad("a finite number")
        return float(value)
    if kind in ("floats", "pair"):
        if isinstance(value, (int, float)) and not isinstance(value, bool) and kind == "floats":
            value = [value]
        if not isinstance(value, list) or not value or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            return bad("a nonempty list of numbers")
        if kind == "pair" and len(value) != 2:
            return bad("a list [lo, hi]")
        return [float(v) for v in value]
    raise AssertionError(kind)


def _ranges(cfg, problems):
    """Module preconditions, checked up front so a run never starts on bad input."""
    def need(key, ok, msg):
        if key in cfg and cfg[key] is not None and not ok(cfg[key]):
            problems.append(f"{key}: {msg}")

    for k in ("model.Nx", "model.Nv", "grid.Nx", "grid.Nv"):
        need(k, lambda v: v >= 4, "must be at least 4")
    for k in ("certify.kappa", "model.omega", "model.length", "grid.length", "grid.vmax",
              "time.end", "herau.dt", "waves.kmin", "nash.box", "schedule.K", "schedule.k",
              "schedule.eps", "system.a", "system.delta"):
        need(k, lambda v: v > 0, "must be positive")
    for k in ("certify.M",):
        need(k, lambda v: v >= 0, "must be nonnegative")
    for k in ("certify.grid", "certify.samples", "time.steps", "time.every", "system.steps",
              "nash.members", "tensor.count", "waves.per_octave", "workers"):
        need(k, lambda v: v >= 1, "must be at least 1")
    for k in ("ladder.a", "ladder.b", "ladder.c"):
        need(k, lambda v: v > 0, "must be positive")
    for k, choices in CHOICES.items():
        need(k, lambda v, c=choices: v in c, f"must be one of {', '.join(choices)}")
    need("fit.window", lambda w: 0 <= w[0] < w[1], "needs 0 <= lo < hi")
    need("oseen.alpha", lambda a: all(x > 0 for x in a), "values must be positive")
    need("oseen.N", lambda v: v >= 32, "must be at least 32")
    need("oseen.tail", lambda v: 0 < v < 1, "must lie in (0, 1)")
    need("ladder.delta", lambda v: 0 < v < 1, "must lie in (0, 1)")
    need("system.theta", lambda v: 0 < v < 1, "must lie in (0, 1)")
    need("coupling.delta", lambda v: v >= 0, "must be nonnegative")
    need("init.eta", lambda v: 0 <= v < 1, "must lie in [0, 1) to keep f positive")
    need("nash.grid", lambda v: v >= 16 and v & (v - 1) == 0, "must be a power of two >= 16")
    if cfg.get("waves.kmin") is not None:
        need("waves.kmax", lambda v: v > cfg["waves.kmin"], "must exceed waves.kmin")
    if cfg.get("time.end") is not None and cfg.get("mode") in ("decay", "entropy", "vfp"):
        need("fit.window", lambda w: w[1] <= cfg["time.end"] * (1 + 1e-12), "must end by time.end")
    if cfg.get("mode") == "certify":
        given = [cfg.get(k) is not None for k in ("ladder.a", "ladder.b", "ladder.c")]
        if any(given) and not all(given):
            problems.append("ladder.a: ladder.a, ladder.b and ladder.c go together")
        if all(given) and cfg["ladder.b"] ** 2 > cfg["ladder.a"] * cfg["ladder.c"]:
            problems.append("ladder.b: b^2 > ac, the twisted norm is not positive")
    if cfg.get("mode") == "regularize" and cfg.get("regularize.task") == "exponents":
        w = cfg.get("fit.window")
        if w and w[0] <= 0:
            problems.append("fit.window: power-law window needs lo > 0")


def validate(raw, allow_sweep=False):
    """Return a complete config dict with defaults, or raise ConfigError."""
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: config must be a JSON object"])
    problems = []
    mode = raw.get("mode")
    if mode is None:
        problems.append("mode: required field missing (one of " + ", ".join(SCHEMAS) + ")")
        raise ConfigError(problems)
    if mode not in SCHEMAS:
        raise ConfigError([f"mode: unknown mode {mode!r} (one of {', '.join(SCHEMAS)})"])
    schema = {**COMMON, **SCHEMAS[mode]}
    cfg = {}
    for key, value in raw.items():
        if key.startswith("sweep."):
            if not allow_sweep:
                problems.append(f"{key}: sweep keys need 'hypolab sweep'")
            continue
        if key not in schema:
            problems.append(f"{key}: unknown field for mode {mode}")
            continue
        cfg[key] = _coerce(key, schema[key][0], value, problems)
    for key, (_, default) in schema.items():
        if key not in cfg:
            if default is REQUIRED:
                problems.append(f"{key}: required field missing")
            cfg[key] = None if default is REQUIRED else default
    _ranges(cfg, problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def sweep_axes(raw):
    """The swept keys and their value lists, validated against the mode schema."""
    mode = raw.get("mode")
    schema = {**COMMON, **SCHEMAS.get(mode, {})}
    axes, problems = {}, []
    for key, values in raw.items():
        if not key.startswith("sweep."):
            continue
        target = key[len("sweep."):]
        if target not in schema:
            problems.append(f"{key}: {target} is not a field of mode {mode}")
        elif not isinstance(values, list) or not values:
            problems.append(f"{key}: expected a nonempty list of values")
        else:
            axes[target] = values
    if not axes and not problems:
        problems.append("sweep.*: no swept parameter given")
    if len(axes) > 2:
        problems.append("sweep.*: at most two swept parameters")
    if axes and math.prod(len(v) for v in axes.values()) > MAX_SWEEP:
        problems.append(f"sweep.*: more than {MAX_SWEEP} runs")
    if problems:
        raise ConfigError(problems)
    return axes


def load(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"<file>: {path} not found"])
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<file>: invalid JSON ({exc})"])


def output_root(cfg):
    return Path(os.environ.get("HYPOLAB_OUT") or cfg["output.dir"])


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else repr(float(x))
    if isinstance(x, Path):
        return str(x)
    return x


PLOT_STYLE = {
    "short_time.csv": "set logscale xy",
    "entropy.csv": "set logscale y",
    "entropy_refined.csv": "set logscale y",
    "vfp.csv": "set logscale y",
    "trajectory.csv": "set logscale y",
    "oseen.csv": "set logscale xy",
    "system.csv": "set logscale xy",
    "nash.csv": "set logscale x",
}


def plot_script(files):
    """gnuplot text plotting every column of each CSV against the first."""
    lines = ["# gnuplot script; run with: gnuplot -p plot.gp",
             "set datafile separator ','", "set key autotitle columnhead"]
    for f in files:
        p = Path(f)
        if p.suffix != ".csv":
            continue
        with open(p) as fh:
            header = next(csv.reader(fh))
        numeric = [i for i, h in enumerate(header) if h not in ("kind", "path")]
        if len(numeric) < 2:
            continue
        lines.append("")
        lines.append("reset; set datafile separator ','; set key autotitle columnhead")
        lines.append(PLOT_STYLE.get(p.name, "unset logscale"))
        lines.append(f"set title '{p.stem}'")
        lines.append(f"set xlabel '{header[numeric[0]]}'")
        parts = [f"'{p.name}' using {numeric[0] + 1}:{i + 1} with linespoints"
                 for i in numeric[1:]]
        lines.append("plot " + ", \\\n     ".join(parts))
    return "\n".join(lines) + "\n"


def execute(cfg, outdir):
    """Run one validated config into ``outdir``; returns the run record dict."""
    from .experiments import run_pipeline

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    head, files, status = run_pipeline(cfg, outdir)
    files = [Path(f) for f in files]
    gp = outdir / "plot.gp"
    gp.write_text(plot_script(files))
    files.append(gp)
    record = {
        "config": cfg,
        "version": __version__,
        "wall_clock_s": time.perf_counter() - t0,
        "files": [f.name for f in files],
        "headline": head,
        "status": "ok" if status == 0 else "certificate-failure",
        "exit_code": status,
    }
    rec = outdir / "run_record.json"
    rec.write_text(json.dumps(_jsonable(record), indent=2, sort_keys=True) + "\n")
    missing = [f.name for f in files if not f.exists() or f.stat().st_size == 0]
    if missing:
        raise HypolabError("io-error", f"empty or missing outputs: {missing}")
    record["record"] = str(rec)
    return record


def _child(args):
    cfg, outdir = args
    try:
        return execute(cfg, outdir)
    except (HypolabError, ConfigError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return {"error": str(exc), "exit_code": 1}


def _scalars(head):
    out = {}
    for k, v in head.items():
        if isinstance(v, (list, tuple)):
            if len(v) == 1:
                out[k] = v[0]
            continue
        out[k] = v
    return out


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    return "" if v is None else str(v)


def run_sweep(raw, root):
    """Expand, run (bounded pool) and aggregate.  Returns (rows, aggregate path, exit code)."""
    axes = sweep_axes(raw)
    names = sorted(axes)
    base = {k: v for k, v in raw.items() if not k.startswith("sweep.")}
    combos = []
    for values in np.array(np.meshgrid(*[np.arange(len(axes[n])) for n in names],
                                       indexing="ij")).reshape(len(names), -1).T:
        point = {n: axes[n][i] for n, i in zip(names, values)}
        combos.append(point)
    combos.sort(key=lambda p: tuple(_sort_key(p[n]) for n in names))
    jobs, problems = [], []
    for i, point in enumerate(combos):
        c = dict(base)
        c.update(point)
        try:
            cfg = validate(c)
        except ConfigError as exc:
            problems.extend(f"run {i} ({_label(point)}): {p}" for p in exc.problems)
            continue
        jobs.append((point, cfg, root / f"run_{i:04d}"))
    if problems:
        raise ConfigError(problems)
    workers = max(1, min(jobs[0][1]["workers"], len(jobs), os.cpu_count() or 1))
    args = [(cfg, out) for _, cfg, out in jobs]
    if workers == 1:
        results = [_child(a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_child, args))
    rows = []
    for (point, _, out), res in zip(jobs, results):
        row = dict(point)
        row["exit_code"] = res["exit_code"]
        row["error"] = res.get("error", "")
        row["run_dir"] = out.name
        row.update(_scalars(res.get("headline", {})))
        rows.append(row)
    extra = sorted({k for r in rows for k in r} - set(names) - {"exit_code", "error", "run_dir"})
    header = names + ["exit_code", "error", "run_dir"] + extra
    agg = root / "aggregate.csv"
    with open(agg, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(r.get(h)) for h in header])
        fit = _aggregate_fit(raw.get("mode"), names, rows)
        if fit is not None:
            w.writerow(["loglog_exponent", _cell(fit)] + [""] * (len(header) - 2))
    codes = [r["exit_code"] for r in rows]
    code = 1 if 1 in codes else 2 if 2 in codes else 0
    return rows, agg, code


def _aggregate_fit(mode, names, rows):
    """Oseen sweeps over alpha: slope of log(min Re) against log(alpha)."""
    if mode != "oseen" or names != ["oseen.alpha"]:
        return None
    pts = [(_first(r["oseen.alpha"]), r.get("min_re")) for r in rows if r["exit_code"] != 1]
    pts = [(a, v) for a, v in pts if v is not None and v > 0]
    if len(pts) < 2:
        return None
    a, v = np.array(pts).T
    return float(np.polyfit(np.log(a), np.log(v), 1)[0])


def _first(v):
    return v[0] if isinstance(v, list) else v


def _sort_key(v):
    if isinstance(v, list):
        return tuple(v)
    return (v,) if not isinstance(v, str) else (float("inf"), v)


def _label(point):
    return ", ".join(f"{k}={v}" for k, v in point.items())


def main(argv=None):
    parser = argparse.ArgumentParser(prog="hypolab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=("run", "validate", "sweep"))
    parser.add_argument("config", help="flat JSON config with dotted keys")
    args = parser.parse_args(argv)
    stem = Path(args.config).stem
    try:
        raw = load(args.config)
        if args.command == "validate":
            if any(k.startswith("sweep.") for k in raw):
                sweep_axes(raw)
                validate(raw, allow_sweep=True)
            else:
                validate(raw)
            print(f"{args.config}: ok")
            return 0
        if args.command == "run":
            cfg = validate(raw)
            name = cfg["name"] or stem
            record = execute(cfg, output_root(cfg) / name)
            print(json.dumps(_jsonable(record["headline"]), sort_keys=True))
            print(f"record: {record['record']}")
            return record["exit_code"]
        cfg = validate(raw, allow_sweep=True)
        root = output_root(cfg) / (cfg["name"] or stem)
        root.mkdir(parents=True, exist_ok=True)
        rows, agg, code = run_sweep(raw, root)
        print(f"{len(rows)} runs, aggregate: {agg}")
        for r in rows:
            if r["error"]:
                print(f"  {r['run_dir']}: error {r['error']}", file=sys.stderr)
        return code
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return 1
    except HypolabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
