"""Command-line front end.

Every subcommand reads an optional JSON config, applies flag overrides, validates
the result and either prints it (``--dry-run``) or runs.  Reports are written to
``<out>/report.json`` with wall-clock data confined to the ``metadata`` field.

Exit codes: 0 success, 1 invalid input, 2 numerical failure (non-finite values,
blow-up, non-convergence, failed check).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (
    Evolution2DConfig,
    Evolution3DConfig,
    NumericalFailure,
    evolve_2d,
    evolve_3d,
    minimize_energy,
)
from .io import write_field_binary, write_series_csv
from .potentials import (
    PotentialSpec,
    coupling_constant_g0,
    mixed_norm_inf1,
    reference_bump,
    scaled_to_threshold,
)
from .spectral_core import ComplexField2D, ComplexField3D, SlabGrid, TorusGrid

SUBCOMMANDS = ("g0", "cgn", "evolve2d", "evolve3d", "minimize", "reduce", "check")

_POTENTIAL = {"potential": None, "potential_fraction": None, "cgn": None}

DEFAULTS = {
    "g0": {"potential": None, "quad_level": 4},
    "cgn": {"modes": 32, "restarts": 6, "tol": 1e-8, "max_iter": 4000},
    "evolve2d": {
        "g0": None, **_POTENTIAL, "dt": 0.001, "t_final": 1.0, "n": 32,
        "record_every": 10, "initial": "reference", "save_fields": True,
    },
    "evolve3d": {
        **_POTENTIAL, "beta": 0.25, "c": 0.9, "L": 0.25, "dt": 0.005, "t_final": 1.0, "n": 32,
        "nz": 8, "record_every": 10, "gauge": "renormalized", "initial": "reference", "save_fields": True,
    },
    "minimize": {
        **_POTENTIAL, "beta": 0.25, "c": 0.9, "L": 0.25, "n": 16, "nz": 8, "iterations": 3000,
        "tol": 1e-12,
    },
    "reduce": {
        "potential": None, "potential_fraction": 0.5, "beta": 0.25, "c": 0.9,
        "L_values": [0.5, 0.25, 0.125, 0.0625], "t_final": 1.0, "dt": 0.005, "n": 32, "nz": 8,
        "retained_modes": [16, 16], "z_modes": 8, "checkpoints": 20, "alpha": 0.99,
        "compare_factor": 2.0, "cgn": None, "initial": "reference",
    },
    "check": {"suite": "all", "samples": None, "cgn": None},
}

COMMON = {"seed": 0, "out": "dimred_out"}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _coerce(key, value, default):
    if value is None or default is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{key} must be an integer")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{key} must be a list")
        return value
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{key} must be a string")
    return value


def resolve_config(sub: str, file_cfg: dict | None, overrides: dict) -> dict:
    """Merge defaults, file values and flag overrides; reject unknown keys."""
    allowed = {**COMMON, **DEFAULTS[sub]}
    cfg = dict(allowed)
    for source in (file_cfg or {}, overrides):
        unknown = sorted(set(source) - set(allowed))
        if unknown:
            raise ConfigError(f"unknown config keys for {sub}: {unknown}")
        for k, v in source.items():
            cfg[k] = _coerce(k, v, allowed[k])
    _validate(sub, cfg)
    return cfg


def _positive(cfg, *keys):
    for k in keys:
        if cfg.get(k) is not None and not cfg[k] > 0:
            raise ConfigError(f"{k} must be positive")


def _validate(sub, cfg):
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a nonnegative integer")
    _positive(cfg, "dt", "t_final", "n", "nz", "modes", "restarts", "tol", "max_iter", "L", "c", "beta")
    if sub in ("evolve2d", "evolve3d", "reduce"):
        steps = cfg["t_final"] / cfg["dt"]
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise ConfigError("t_final must be a multiple of dt")
    if cfg.get("potential_fraction") is not None and not 0 < cfg["potential_fraction"] < 1:
        raise ConfigError("potential_fraction must lie in (0, 1)")
    if sub in ("evolve3d", "minimize") and cfg["c"] > 1:
        raise ConfigError("c = L (N/L)^beta must not exceed 1")
    if sub == "cgn" and cfg["modes"] < 8:
        raise ConfigError("modes must be >= 8")
    if sub == "check":
        from .inequalities import SUITES

        if cfg["suite"] != "all" and cfg["suite"] not in SUITES:
            raise ConfigError(f"unknown suite {cfg['suite']!r}; choose from {sorted(SUITES)} or 'all'")
    if cfg.get("initial") is not None and cfg["initial"] not in ("reference", "random"):
        raise ConfigError("initial must be 'reference' or 'random'")
    if cfg.get("potential") is not None:
        _load_potential(cfg["potential"])


def _load_potential(value) -> PotentialSpec:
    if isinstance(value, dict):
        return PotentialSpec.from_dict(value)
    if isinstance(value, str):
        path = Path(value)
        if not path.is_file():
            raise ConfigError(f"potential file {value!r} not found")
        return PotentialSpec.from_json(path.read_text())
    raise ConfigError("potential must be a JSON object or a file path")


def _threads(flag) -> int:
    if flag is not None:
        n = flag
    elif os.environ.get("DIMRED_NLS_THREADS"):
        try:
            n = int(os.environ["DIMRED_NLS_THREADS"])
        except ValueError as exc:
            raise ConfigError("DIMRED_NLS_THREADS must be an integer") from exc
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise ConfigError("thread bound must be >= 1")
    return n


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _cgn(cfg) -> float:
    if cfg.get("cgn") is not None:
        return float(cfg["cgn"])
    from .gn_constant import measured_cgn

    return measured_cgn()


def _potential(cfg, default_amplitude=-1.0) -> PotentialSpec:
    spec = _load_potential(cfg["potential"]) if cfg.get("potential") is not None else reference_bump(default_amplitude)
    if cfg.get("potential_fraction") is not None:
        spec = scaled_to_threshold(spec, _cgn(cfg), cfg["potential_fraction"])
    return spec


def _initial_2d(grid: TorusGrid, kind: str, seed: int) -> ComplexField2D:
    X1, X2 = grid.mesh()
    if kind == "reference":
        vals = 1 + 0.6 * np.cos(X1) + 0.4 * np.sin(X2 + 0.3) + 0.3j * np.cos(X1 - X2)
        return ComplexField2D(grid, values=vals).normalized()
    rng = np.random.default_rng(seed)
    k2 = grid.k_squared()
    coef = (rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)) * np.exp(-k2 / 4.0)
    return ComplexField2D.from_coefficients(grid, coef).normalized()


def _regime(cfg):
    from .reduction import ScalingRegime

    return ScalingRegime(cfg["beta"], cfg["c"], cfg["L"])


def _metadata(started) -> dict:
    return {
        "elapsed_seconds": time.time() - started,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "version": __version__,
    }


def _json_default(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_report(out: Path, body: dict, metadata: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    doc = dict(body)
    doc["metadata"] = metadata
    path = out / "report.json"
    path.write_text(json.dumps(doc, sort_keys=True, indent=2, allow_nan=False, default=_json_default) + "\n")
    return path


def _trajectory_outputs(out: Path, traj, cfg, extra_meta) -> dict:
    write_series_csv(out / "series.csv", {"step": np.round(traj.times / cfg["dt"]).astype(int), **traj.series()})
    files = []
    if cfg.get("save_fields"):
        for name, f in (("initial", traj.snapshots[0]), ("final", traj.final)):
            p, _ = write_field_binary(out / "fields" / f"{name}.bin", f.values, {"t": float(traj.times[0 if name == "initial" else -1]), **extra_meta})
            files.append(str(p.relative_to(out)))
    return {"fields": files}


class _Failure(Exception):
    """Numerical failure discovered after the report was written."""


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _run_g0(cfg, threads):
    spec = _load_potential(cfg["potential"]) if cfg["potential"] is not None else reference_bump()
    est = coupling_constant_g0(spec, quad_level=cfg["quad_level"])
    print(repr(float(est.value)))
    return {"g0": est.value, "error": est.error, "potential": spec.to_dict()}, True


def _run_cgn(cfg, threads):
    from .gn_constant import estimate_cgn

    est = estimate_cgn(cfg["modes"], cfg["restarts"], cfg["tol"], cfg["seed"], cfg["max_iter"], workers=threads)
    print(repr(est.cgn))
    return est.to_dict(), est.converged


def _run_evolve2d(cfg, threads):
    out = Path(cfg["out"])
    grid = TorusGrid(cfg["n"], cfg["n"])
    if cfg["g0"] is not None:
        g0 = float(cfg["g0"])
        spec = None
    else:
        spec = _potential(cfg)
        g0 = coupling_constant_g0(spec).value
    ecfg = Evolution2DConfig(g0, cfg["dt"], cfg["t_final"], grid, cfg["record_every"])
    traj = evolve_2d(_initial_2d(grid, cfg["initial"], cfg["seed"]), ecfg)
    files = _trajectory_outputs(out, traj, cfg, {"grid": [cfg["n"], cfg["n"]]})
    body = {
        "g0": g0, "potential": spec.to_dict() if spec else None, "steps": traj.steps,
        "blew_up": traj.blew_up, "mass_drift": traj.mass_drift(), "energy_drift": traj.energy_drift(),
        "final_mass": float(traj.mass[-1]), "final_energy": float(traj.energy[-1]), **files,
    }
    return body, not traj.blew_up


def _run_evolve3d(cfg, threads):
    out = Path(cfg["out"])
    spec = _potential(cfg)
    regime = _regime(cfg)
    grid = SlabGrid(TorusGrid(cfg["n"], cfg["n"]), cfg["nz"])
    ecfg = Evolution3DConfig(regime.params, spec, cfg["dt"], cfg["t_final"], grid, cfg["gauge"], cfg["record_every"])
    u = _initial_2d(grid.torus, cfg["initial"], cfg["seed"])
    traj = evolve_3d(ComplexField3D.product(grid, u, [1.0]), ecfg)
    files = _trajectory_outputs(out, traj, cfg, {"grid": list(grid.shape), "frame": "rescaled"})
    body = {
        "regime": regime.to_dict(), "potential": spec.to_dict(), "steps": traj.steps,
        "blew_up": traj.blew_up, "mass_drift": traj.mass_drift(), "energy_drift": traj.energy_drift(),
        "final_mass": float(traj.mass[-1]), "final_energy": float(traj.energy[-1]), **files,
    }
    return body, not traj.blew_up


def _run_minimize(cfg, threads):
    cgn = _cgn(cfg)
    spec = _potential(cfg)
    regime = _regime(cfg)
    grid = SlabGrid(TorusGrid(cfg["n"], cfg["n"]), cfg["nz"])
    ecfg = Evolution3DConfig(regime.params, spec, 0.01, 0.01, grid)
    res = minimize_energy(ecfg, cfg["iterations"], cfg["tol"])
    upper = 1.0 + cgn**4 * mixed_norm_inf1(spec) / 2
    inside = bool(-1e-6 <= res.energy <= upper + 1e-6)
    print(repr(res.energy))
    body = {
        "energy": res.energy, "window": [0.0, upper], "inside_window": inside, "cgn": cgn,
        "converged": res.converged, "iterations": res.iterations, "descent_ok": res.descent_ok,
        "regime": regime.to_dict(), "potential": spec.to_dict(),
    }
    return body, res.converged and res.descent_ok


def _run_reduce(cfg, threads):
    from .reduction import run_convergence_study, scaling_ladder

    out = Path(cfg["out"])
    cgn = _cgn(cfg)
    spec = _potential(cfg)
    ladder = scaling_ladder(cfg["beta"], cfg["c"], cfg["L_values"])
    grid = TorusGrid(cfg["n"], cfg["n"])
    rep = run_convergence_study(
        ladder, _initial_2d(grid, cfg["initial"], cfg["seed"]), spec, cfg["t_final"], cfg["dt"], cfg["nz"],
        tuple(cfg["retained_modes"]), cfg["z_modes"], cfg["checkpoints"], cgn, cfg["alpha"],
        cfg["compare_factor"], workers=threads,
    )
    rep.write_csv(out / "series.csv")
    body = rep.to_dict()
    meta = body.pop("metadata")
    print(json.dumps(body["verdict"], sort_keys=True))
    return (body, meta), rep.valid


def _run_check(cfg, threads):
    from .inequalities import format_table, run_suite

    checks = run_suite(cfg["suite"], cfg["seed"], cfg["samples"], cfg["cgn"])
    print(format_table(checks))
    passed = all(c.passed for c in checks)
    body = {
        "suite": cfg["suite"], "passed": passed, "count": len(checks),
        "pass_fraction": float(np.mean([c.passed for c in checks])),
        "checks": [c.to_dict() for c in checks],
    }
    return body, passed


RUNNERS = {
    "g0": _run_g0,
    "cgn": _run_cgn,
    "evolve2d": _run_evolve2d,
    "evolve3d": _run_evolve3d,
    "minimize": _run_minimize,
    "reduce": _run_reduce,
    "check": _run_check,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dimred-nls", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    for name in SUBCOMMANDS:
        p = subs.add_parser(name)
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--dry-run", action="store_true", help="print the resolved configuration and exit")
        p.add_argument("--threads", type=int, default=None, help="worker bound (default: $DIMRED_NLS_THREADS or all cores)")
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
        p.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
        for key in DEFAULTS[name]:
            p.add_argument("--" + key.replace("_", "-"), dest=key, type=_parse_value, default=argparse.SUPPRESS)
    return parser


def _fail(code: int, kind: str, message: str) -> int:
    line = json.dumps({"error": kind, "message": " ".join(str(message).split()), "exit_code": code})
    print(line, file=sys.stderr)
    return code


def main(argv=None) -> int:
    started = time.time()
    try:
        args = build_parser().parse_args(argv)
        if args.subcommand is None:
            raise ConfigError(f"a subcommand is required: {', '.join(SUBCOMMANDS)}")
        ns = vars(args)
        sub = ns.pop("subcommand")
        file_cfg = None
        config_path = ns.pop("config")
        if config_path:
            try:
                file_cfg = json.loads(Path(config_path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {config_path!r}: {exc}") from exc
            if not isinstance(file_cfg, dict):
                raise ConfigError("config file must hold a JSON object")
        dry = ns.pop("dry_run")
        threads = _threads(ns.pop("threads"))
        cfg = resolve_config(sub, file_cfg, ns)
        if dry:
            print(json.dumps({"subcommand": sub, "threads": threads, **cfg}, sort_keys=True, indent=2))
            return 0
        body, ok = RUNNERS[sub](cfg, threads)
        meta = _metadata(started)
        if isinstance(body, tuple):
            body, extra = body
            meta.update(extra)
        meta["threads"] = threads
        body = {"subcommand": sub, "config": cfg, "ok": bool(ok), **body}
        write_report(Path(cfg["out"]), body, meta)
        if not ok:
            return _fail(2, "NumericalFailure", f"{sub} finished without success; see {cfg['out']}/report.json")
        return 0
    except NumericalFailure as exc:
        return _fail(2, "NumericalFailure", exc)
    except (ArithmeticError, FloatingPointError) as exc:
        return _fail(2, type(exc).__name__, exc)
    except (ValueError, KeyError, TypeError) as exc:
        return _fail(1, type(exc).__name__, exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
