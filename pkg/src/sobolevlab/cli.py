"""Command-line entry point: run suites, inspect and export stored objects."""
from __future__ import annotations

import argparse
import concurrent.futures as cf
import hashlib
import inspect
import json
import os
import platform
import re
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import NotFoundError
from .experiments import OPERATIONS
from .report import DecayCurve, ExperimentReport, _clean

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NOT_FOUND = 0, 1, 2, 3
DEFAULT_OUT = "sobolevlab-out"
SUITE_ALIASES = {"lemma21-flat": "regularity-flat"}
CONFIG_KEYS = {"suite", "description", "seed", "tolerance_scale", "output", "operations"}
OP_KEYS = {"op", "id", "params"}


class SchemaError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def validate_config(cfg) -> dict:
    """Check a parsed config against the schema and fill defaults."""
    if not isinstance(cfg, dict):
        raise SchemaError("config must be a JSON object")
    extra = set(cfg) - CONFIG_KEYS
    if extra:
        raise SchemaError(f"unknown config keys: {sorted(extra)}")
    ops = cfg.get("operations")
    if not isinstance(ops, list):
        raise SchemaError("'operations' must be a list")
    if not isinstance(cfg.get("suite", "custom"), str):
        raise SchemaError("'suite' must be a string")
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise SchemaError("'seed' must be an integer")
    scale = cfg.get("tolerance_scale", 1.0)
    if not isinstance(scale, (int, float)) or isinstance(scale, bool) or scale <= 0:
        raise SchemaError("'tolerance_scale' must be a positive number")
    seen, out_ops = set(), []
    for i, op in enumerate(ops):
        if not isinstance(op, dict) or "op" not in op:
            raise SchemaError(f"operation {i} must be an object with an 'op' key")
        if set(op) - OP_KEYS:
            raise SchemaError(f"operation {i}: unknown keys {sorted(set(op) - OP_KEYS)}")
        name = op["op"]
        if name not in OPERATIONS:
            raise SchemaError(f"operation {i}: unknown op {name!r}")
        params = op.get("params", {})
        if not isinstance(params, dict):
            raise SchemaError(f"operation {i}: 'params' must be an object")
        sig = inspect.signature(OPERATIONS[name])
        has_kwargs = any(p.kind is p.VAR_KEYWORD for p in sig.parameters.values())
        bad = [k for k in params if k not in sig.parameters and not has_kwargs]
        if bad:
            raise SchemaError(f"operation {i} ({name}): unknown parameters {bad}")
        oid = str(op.get("id", name))
        if not re.fullmatch(r"[A-Za-z0-9_.-]+", oid) or oid in seen:
            raise SchemaError(f"operation {i}: id {oid!r} is invalid or repeated")
        seen.add(oid)
        out_ops.append({"op": name, "id": oid, "params": params})
    return {"suite": cfg.get("suite", "custom"), "description": cfg.get("description", ""),
            "seed": seed, "tolerance_scale": float(scale), "output": cfg.get("output"),
            "operations": out_ops}


def suite_names() -> list:
    files = resources.files("sobolevlab").joinpath("suites")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def load_config(ref: str) -> dict:
    """Read a config from a path or a bundled suite name."""
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    else:
        name = SUITE_ALIASES.get(ref, ref)
        res = resources.files("sobolevlab").joinpath("suites", f"{name}.json")
        if not res.is_file():
            raise NotFoundError(f"no config file or bundled suite named {ref!r}")
        text = res.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"config is not valid JSON: {exc}") from exc
    return validate_config(cfg)


def _hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------------------
# running


def _run_op(name: str, oid: str, params: dict):
    t0 = time.perf_counter()
    try:
        rep, objects = OPERATIONS[name](**params)
    except Exception as exc:  # recorded; the suite continues
        rep, objects = ExperimentReport(name, error=f"{type(exc).__name__}: {exc}"), {}
    rep.name = oid
    return rep, objects, time.perf_counter() - t0


def _resolve_params(op: dict, seed: int) -> dict:
    params = dict(op["params"])
    if "seed" in inspect.signature(OPERATIONS[op["op"]]).parameters:
        params.setdefault("seed", seed)
    return params


def _scale_tolerances(rep: ExperimentReport, scale: float) -> None:
    if scale == 1.0:
        return
    for c in rep.checks:
        c.tolerance = (1.0 + c.tolerance) * scale - 1.0


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def _write_object(store: Path, oid: str, kind: str, data) -> None:
    store.mkdir(parents=True, exist_ok=True)
    with open(store / f"{_safe(oid)}.json", "w") as fh:
        json.dump(_clean({"id": oid, "type": kind, "data": data}), fh, indent=2, sort_keys=True)


def _write_outputs(out: Path, rep: ExperimentReport, objects: dict) -> None:
    from .plotting import plot_checks, plot_curves

    rep.write_csv(out / f"{_safe(rep.name)}.csv")
    store = out / "objects"
    _write_object(store, rep.name, "report", rep.to_dict())
    for cv in rep.curves:
        cid = f"{rep.name}.{cv.name}"
        cv.write_csv(out / f"{_safe(cid)}.csv")
        _write_object(store, cid, "decay_curve", cv.to_dict())
    for oid, obj in objects.items():
        _write_object(store, oid, obj["type"], obj["data"])
    figs = out / "figures"
    figs.mkdir(exist_ok=True)
    if rep.checks:
        plot_checks(rep.checks, figs / f"{_safe(rep.name)}_checks.png", rep.name)
    if rep.curves:
        plot_curves(rep.curves, figs / f"{_safe(rep.name)}_curves.png", rep.name)


def environment_stamp() -> dict:
    return {"python": platform.python_version(), "platform": platform.platform(),
            "numpy": np.__version__, "scipy": scipy.__version__, "sobolevlab": __version__}


def run(config: dict, out: Path, jobs: int = 1, seed=None, tolerance_scale=None) -> tuple:
    """Execute a validated config; return (report dict, exit code)."""
    seed = config["seed"] if seed is None else seed
    scale = config["tolerance_scale"] if tolerance_scale is None else tolerance_scale
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(op["op"], op["id"], _resolve_params(op, seed)) for op in config["operations"]]
    t0 = time.perf_counter()
    if jobs > 1 and len(tasks) > 1:
        with cf.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_op, *zip(*tasks)))
    else:
        results = [_run_op(*t) for t in tasks]
    reports, timings = [], {}
    for rep, objects, dt in results:
        _scale_tolerances(rep, scale)
        _write_outputs(out, rep, objects)
        reports.append(rep.to_dict())
        timings[rep.name] = dt
    checks = [c for r in reports for c in r["checks"]]
    enforced = [c for c in checks if c["enforce"]]
    failed = [f"{r['name']}:{c['name']}" for r in reports for c in r["checks"] if c["enforce"] and not c["passed"]]
    errors = {r["name"]: r["error"] for r in reports if r["error"]}
    effective = dict(config, seed=seed, tolerance_scale=scale)
    summary = {"checks": len(checks), "enforced": len(enforced), "passed": len(enforced) - len(failed),
               "failed": failed, "errors": errors, "all_passed": not failed and not errors}
    doc = {
        "suite": config["suite"],
        "config_hash": _hash(effective),
        "results_hash": _hash(reports),
        "config": effective,
        "summary": summary,
        "operations": reports,
        "environment": environment_stamp(),
        "wall_clock": {"total": time.perf_counter() - t0, "per_operation": timings},
    }
    with open(out / "report.json", "w") as fh:
        json.dump(_clean(doc), fh, indent=2)
    return doc, EXIT_OK if summary["all_passed"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# stored objects


def _out_dir(arg, config=None) -> Path:
    if arg:
        return Path(arg)
    if os.environ.get("SOBOLEVLAB_OUT"):
        return Path(os.environ["SOBOLEVLAB_OUT"])
    if config and config.get("output"):
        return Path(config["output"])
    return Path(DEFAULT_OUT)


def load_object(out: Path, oid: str) -> dict:
    path = out / "objects" / f"{_safe(oid)}.json"
    if not path.is_file():
        raise NotFoundError(f"no stored object {oid!r} under {out}")
    return json.loads(path.read_text())


def describe(obj: dict) -> str:
    kind, d = obj["type"], obj["data"]
    lines = [f"{obj['id']}: {kind}"]
    if kind == "spike_profile":
        eta = sum(b["eta"] for b in d["bumps"])
        lines += [f"  bumps: {len(d['bumps'])}", f"  total eta: {eta:.6g}",
                  f"  annulus: {d['annulus'][0]:.6g} .. {d['annulus'][1]:.6g}"]
    elif kind == "decay_curve":
        lines += [f"  points: {len(d['grid'])}", f"  trend: {d['trend']:.3g}",
                  f"  first/last: {d['values'][0]:.6g} / {d['values'][-1]:.6g}"]
    elif kind == "report":
        n_fail = sum(1 for c in d["checks"] if c["enforce"] and not c["passed"])
        lines += [f"  rows: {len(d['rows'])}", f"  checks: {len(d['checks'])} ({n_fail} enforced failing)",
                  f"  curves: {len(d['curves'])}", f"  error: {d['error']}"]
    elif kind == "cutoff_family":
        lines += [f"  K: {d['lambda'].get('K')}", f"  t0: {d['lambda'].get('t0')}",
                  f"  eta order: {d['eta_order']}"]
    else:
        lines.append("  " + json.dumps(d)[:200])
    return "\n".join(lines)


def export(obj: dict, fmt: str, dest: Path) -> dict:
    kind, d = obj["type"], obj["data"]
    info = {"path": str(dest)}
    if fmt == "json":
        dest.write_text(json.dumps(d, indent=2, sort_keys=True))
    elif fmt == "csv":
        if kind == "decay_curve":
            DecayCurve(d["name"], d["grid"], d["values"], d["meta"]).write_csv(dest)
        elif kind == "report":
            rep = ExperimentReport(d["name"], d["rows"])
            if not rep.rows:
                rep.rows = [{k: c[k] for k in ("name", "lhs", "rhs", "ratio", "tolerance", "passed")}
                            for c in d["checks"]]
            rep.write_csv(dest)
        elif kind == "spike_profile":
            from .spikes import SpikeProfile, write_height_csv
            info["rows"] = write_height_csv(SpikeProfile.from_dict(d), dest)
        else:
            raise ValueError(f"CSV export is not available for {kind}")
    elif fmt == "obj":
        if kind != "spike_profile":
            raise ValueError("OBJ export needs a surface (spike_profile)")
        from .spikes import SpikeProfile, write_obj
        info["mesh"] = write_obj(SpikeProfile.from_dict(d), dest)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return info


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sobolevlab", description="Sobolev density experiment lab")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a config file or bundled suite")
    r.add_argument("suite", nargs="?", help="bundled suite name or config path")
    r.add_argument("--config", help="config path (alternative to the positional argument)")
    r.add_argument("--out", help="output directory (default: $SOBOLEVLAB_OUT or ./sobolevlab-out)")
    r.add_argument("--jobs", type=int, default=1, help="worker processes")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--tolerance-scale", type=float, help="multiply every pass threshold 1+tol")
    d = sub.add_parser("describe", help="summarize a stored object")
    d.add_argument("id")
    d.add_argument("--out")
    e = sub.add_parser("export", help="export a stored object")
    e.add_argument("id")
    e.add_argument("--format", choices=["json", "csv", "obj"], default="json")
    e.add_argument("--dest", help="output file (default: <out>/exports/<id>.<format>)")
    e.add_argument("--out")
    sub.add_parser("list-suites", help="list bundled suites")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == "list-suites":
            for name in suite_names():
                cfg = load_config(name)
                print(f"{name:20s} {len(cfg['operations']):2d} ops  {cfg['description']}")
            return EXIT_OK
        if args.command == "run":
            ref = args.config or args.suite
            if not ref:
                raise SchemaError("run needs a suite name or --config")
            if args.jobs < 1:
                raise SchemaError("--jobs must be positive")
            if args.tolerance_scale is not None and args.tolerance_scale <= 0:
                raise SchemaError("--tolerance-scale must be positive")
            cfg = load_config(ref)
            out = _out_dir(args.out, cfg)
            doc, code = run(cfg, out, args.jobs, args.seed, args.tolerance_scale)
            s = doc["summary"]
            print(f"{doc['suite']}: {s['passed']}/{s['enforced']} enforced checks passed, "
                  f"{len(s['errors'])} errors -> {out / 'report.json'}")
            for name in s["failed"]:
                print(f"  FAIL {name}")
            for name, err in s["errors"].items():
                print(f"  ERROR {name}: {err}")
            return code
        out = _out_dir(args.out)
        obj = load_object(out, args.id)
        if args.command == "describe":
            print(describe(obj))
            return EXIT_OK
        dest = Path(args.dest) if args.dest else out / "exports" / f"{_safe(args.id)}.{args.format}"
        dest.parent.mkdir(parents=True, exist_ok=True)
        info = export(obj, args.format, dest)
        print(json.dumps(_clean(info)))
        return EXIT_OK
    except SchemaError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NotFoundError as exc:
        print(f"not found: {exc.args[0]}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
