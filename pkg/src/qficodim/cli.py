"""Command-line front end.

    qficodim [--config run.json] [--out DIR] [--threads N] COMMAND [options]

Commands: ``sweep``, ``fit``, ``rg-check``, ``invariants``, ``figure1``,
``models``.  A JSON config supplies any field; command-line flags override it.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 request at criticality (m = 0).
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import AtCriticalityError, ConvergenceError, InsufficientDataError, NoiseFloorError
from .integrate import ContinuumSource, QuadratureConfig, SweepError, SweepResult, geometric_grid, sweep
from .models import MODEL_DOCS, chern_model, model_from_id, ssh_model
from .qgt import chern_number, winding_number
from .scaling import classify_singularity, rg_check

OUTPUT_ENV = "QFICODIM_OUTPUT_DIR"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CRITICAL = 0, 1, 2, 3

COMMANDS = ["sweep", "fit", "rg-check", "invariants", "figure1", "models"]

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "command": {"enum": COMMANDS},
        "model": {"type": "string"},
        "params": {"type": "object"},
        "m_min": {"type": "number", "exclusiveMinimum": 0},
        "m_max": {"type": "number", "exclusiveMinimum": 0},
        "points_per_decade": {"type": "integer", "minimum": 4},
        "quadrature": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rel_tol": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-2},
                "max_refinements": {"type": "integer", "minimum": 1},
                "lattice_method": {"enum": ["adaptive", "grid"]},
                "lattice_grid_start": {"type": "integer", "minimum": 2},
                "lattice_max_grid": {"type": "array", "items": {"type": "integer"}, "minItems": 3, "maxItems": 3},
            },
        },
        "output_dir": {"type": "string"},
        "input": {"type": "string"},
        "seed": {"type": "integer"},
        "threads": {"type": "integer", "minimum": 1},
        "b": {"type": "number", "exclusiveMinimum": 1},
        "m": {"type": "array", "items": {"type": "number"}},
        "p": {"type": "array", "items": {"type": "integer", "minimum": 1, "maximum": 3}},
        "cutoff": {"type": "number", "exclusiveMinimum": 0},
    },
}

DEFAULTS = {
    "model": "linearized:p=2",
    "params": {},
    "m_min": 1e-4,
    "m_max": 1e-2,
    "points_per_decade": 16,
    "quadrature": {},
    "seed": 0,
    "threads": 1,
    "b": 2.0,
    "p": [1, 2, 3],
    "cutoff": 1.0,
}


class ConfigError(ValueError):
    pass


def load_config(path):
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    validate_config(data, str(path))
    return data


def validate_config(data, where="config"):
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.path))
    if errors:
        lines = []
        for err in errors:
            field = "/".join(str(x) for x in err.path) or "<root>"
            lines.append(f"{where}: field '{field}': {err.message}")
        raise ConfigError("\n".join(lines))


def _parse_param(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise ConfigError(f"--param expects key=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def build_parser():
    parser = argparse.ArgumentParser(prog="qficodim", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--out", dest="output_dir", help=f"output directory (env {OUTPUT_ENV})")
    parser.add_argument("--threads", type=int, help="worker threads for sweeps")
    sub = parser.add_subparsers(dest="command")

    def common(p, grid=True):
        p.add_argument("--model", help="model id, e.g. ssh, chern, weyl, linearized:p=2")
        p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                       help="model parameter (JSON value), repeatable")
        if grid:
            p.add_argument("--m-min", type=float, dest="m_min")
            p.add_argument("--m-max", type=float, dest="m_max")
            p.add_argument("--points-per-decade", type=int, dest="points_per_decade")
        p.add_argument("--rel-tol", type=float, dest="rel_tol")
        p.add_argument("--max-refinements", type=int, dest="max_refinements")
        p.add_argument("--lattice-method", choices=["adaptive", "grid"], dest="lattice_method")
        p.add_argument("--seed", type=int)

    common(sub.add_parser("sweep", help="integrate QFI over a geometric m grid"))
    fit = sub.add_parser("fit", help="classify the singularity of a sweep")
    common(fit)
    fit.add_argument("--input", help="sweep CSV written by 'sweep' (otherwise run inline)")
    rg = sub.add_parser("rg-check", help="singular-part ratios under m -> b m")
    rg.add_argument("--p", type=int, action="append", help="codimension (repeatable)")
    rg.add_argument("--m", type=float, action="append", help="mass value (repeatable)")
    rg.add_argument("--b", type=float)
    rg.add_argument("--cutoff", type=float)
    rg.add_argument("--rel-tol", type=float, dest="rel_tol")
    inv = sub.add_parser("invariants", help="winding and Chern numbers across m")
    inv.add_argument("--m", type=float, action="append", help="mass value (repeatable)")
    fig = sub.add_parser("figure1", help="QFI(m) curves for p = 1, 2, 3")
    fig.add_argument("--m-min", type=float, dest="m_min")
    fig.add_argument("--m-max", type=float, dest="m_max")
    fig.add_argument("--points-per-decade", type=int, dest="points_per_decade")
    fig.add_argument("--rel-tol", type=float, dest="rel_tol")
    sub.add_parser("models", help="list available models")
    return parser


COMMAND_DEFAULTS = {"figure1": {"m_max": 1.0}}


def resolve_config(args):
    """Merge defaults < config file < flags into one validated dict."""
    explicit = load_config(args.config) if args.config else {}
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "param")}
    for key in ("rel_tol", "max_refinements", "lattice_method"):
        if key in flags:
            explicit["quadrature"] = dict(explicit.get("quadrature", {}), **{key: flags.pop(key)})
    if getattr(args, "param", None):
        explicit["params"] = dict(explicit.get("params", {}), **dict(_parse_param(t) for t in args.param))
    explicit.update(flags)
    command = explicit.get("command")
    if not command:
        raise ConfigError("no command given (on the command line or in the config)")
    cfg = json.loads(json.dumps(DEFAULTS))
    cfg.update(COMMAND_DEFAULTS.get(command, {}))
    cfg.update(explicit)
    validate_config(cfg, "effective configuration")
    if cfg["m_max"] <= cfg["m_min"]:
        raise ConfigError("field 'm_max': must exceed m_min")
    return cfg


def _quadrature(cfg):
    q = dict(cfg.get("quadrature", {}))
    if "lattice_max_grid" in q:
        q["lattice_max_grid"] = tuple(q["lattice_max_grid"])
    try:
        return QuadratureConfig(**q)
    except ValueError as exc:
        raise ConfigError(f"field 'quadrature': {exc}") from exc


def source_from_config(cfg):
    """Plain ``linearized:p=N`` uses the closed-form density; everything else a matrix model."""
    model_id = cfg["model"]
    params = dict(cfg.get("params", {}))
    match = re.match(r"^linearized:p=(\d+)$", model_id)
    try:
        if match and not params.get("extra_bands") and not params.get("correction"):
            p = int(match.group(1))
            return ContinuumSource(p, params.get("velocities"), params.get("cutoff", 1.0))
        return model_from_id(model_id, params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"field 'model'/'params': {exc}") from exc


def _output_dir(cfg):
    out = Path(cfg.get("output_dir") or os.environ.get(OUTPUT_ENV) or "qficodim-output")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _stem(name):
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_")


def _run_sweep(cfg):
    source = source_from_config(cfg)
    grid = geometric_grid(cfg["m_min"], cfg["m_max"], cfg["points_per_decade"])
    result = sweep(source, grid, _quadrature(cfg), threads=cfg["threads"])
    result.config["seed"] = cfg["seed"]
    return result


def cmd_sweep(cfg, out):
    result = _run_sweep(cfg)
    stem = _stem(cfg["model"]) + "_sweep"
    (out / f"{stem}.csv").write_text(result.to_csv(), encoding="utf-8")
    (out / f"{stem}.json").write_text(result.to_json() + "\n", encoding="utf-8")
    print(f"wrote {out / (stem + '.csv')} ({len(result.m_values)} points)")


def cmd_fit(cfg, out):
    if cfg.get("input"):
        path = Path(cfg["input"])
        meta = path.with_suffix(".json")
        source = json.loads(meta.read_text())["source"] if meta.exists() else {"file": str(path)}
        result = SweepResult.from_csv(path.read_text(encoding="utf-8"), source=source)
        stem = path.stem + "_fit"
    else:
        result = _run_sweep(cfg)
        stem = _stem(cfg["model"]) + "_fit"
    label = result.source.get("model", cfg.get("model", ""))
    report = classify_singularity(result, label=label)
    (out / f"{stem}.json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.summary())


def cmd_rg_check(cfg, out):
    ms = cfg.get("m") or [1e-2, 1e-3, 1e-4]
    q = _quadrature(cfg)
    rows = ["p,m,b,ratio_m_over_bm,predicted_m_over_bm,ratio_bm_over_m,predicted_bm_over_m,deviation,noise"]
    for p in cfg["p"]:
        for m in ms:
            r = rg_check(p, m, cfg["b"], cfg["cutoff"], cfg=q)
            rows.append(",".join(repr(float(x)) if isinstance(x, float) else str(x) for x in (
                r.p, r.m, float(r.b), r.ratio_m_over_bm, float(r.predicted_m_over_bm),
                r.ratio_bm_over_m, float(r.predicted_bm_over_m), r.deviation, r.noise)))
            print(f"p={p} m={m:g} b={r.b:g}: QFI_sing(m)/QFI_sing(bm) = {r.ratio_m_over_bm:.6f} "
                  f"(predicted {r.predicted_m_over_bm:.6f}, deviation {r.deviation:.2e})")
    (out / "rg_check.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")


def cmd_invariants(cfg, out):
    ms = cfg.get("m") or [x for x in np.round(np.linspace(-1.5, 1.5, 13), 10) if x != 0]
    rows = ["m,winding_ssh,chern_qwz"]
    for m in ms:
        if m == 0:
            raise AtCriticalityError("invariants requested at m = 0")
        w = winding_number(ssh_model(), m, grid_n=1024)
        c = chern_number(chern_model(), m, grid_n=64)
        rows.append(f"{float(m)!r},{w},{c}")
        print(f"m={m:+.4g}  winding(SSH)={w:d}  Chern(QWZ)={c:d}")
    (out / "invariants.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")


def cmd_figure1(cfg, out):
    grid = geometric_grid(cfg["m_min"], cfg["m_max"], cfg["points_per_decade"])
    q = _quadrature(cfg)
    long_rows = ["p,m,qfi,err_estimate"]
    for p in (1, 2, 3):
        res = sweep(ContinuumSource(p, cutoff=1.0), grid, q, threads=cfg["threads"])
        (out / f"figure1_p{p}.csv").write_text(res.to_csv(), encoding="utf-8")
        for row in zip(res.m_values, res.qfi_values, res.errors):
            long_rows.append(f"{p}," + ",".join(repr(float(x)) for x in row))
        print(f"p={p}: QFI from {res.qfi_values[0]:.6g} (m={grid[0]:g}) to {res.qfi_values[-1]:.6g} (m={grid[-1]:g})")
    (out / "figure1_long.csv").write_text("\n".join(long_rows) + "\n", encoding="utf-8")


def cmd_models(cfg, out):
    for name, doc in MODEL_DOCS.items():
        print(f"{name:16s} {doc}")


HANDLERS = {
    "sweep": cmd_sweep, "fit": cmd_fit, "rg-check": cmd_rg_check,
    "invariants": cmd_invariants, "figure1": cmd_figure1, "models": cmd_models,
}


def run(cfg):
    """Execute a resolved configuration; returns an exit code."""
    try:
        out = None if cfg["command"] == "models" else _output_dir(cfg)
        HANDLERS[cfg["command"]](cfg, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AtCriticalityError as exc:
        print(f"at criticality: {exc}", file=sys.stderr)
        return EXIT_CRITICAL
    except (ConvergenceError, SweepError, NoiseFloorError, InsufficientDataError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
