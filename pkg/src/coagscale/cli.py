"""Command line front-end.

    coagscale <solve|validate|uniqueness|baseline|simulate|report>
              [--manifest PATH] [--alpha F] [--w F] [--rho F]
              [--x-min F] [--x-max F] [--cells N] [--out DIR] [profile]

Parameters come from a JSON manifest merged over built-in defaults; flags
win over the manifest.  Every JSON output embeds the resolved manifest.
Errors are printed to stderr as JSON, files written by the failed command
are removed and the exit status is 1.
"""
from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import (
    analytic_transform,
    bernstein_ode_residual,
    bernstein_transform,
    default_xi,
    explicit_profile,
)
from .dynamics import SimConfig, SimState, mass_normalized, run
from .errors import AlphaZero, CoagScaleError, ManifestError
from .grid import build_grid
from .io import dumps, load_profile, read_csv, read_json, save_profile, write_csv, write_json
from .kernel import KernelSpec
from .profile import (
    b99_gap,
    l1_distance,
    moment_identity_gap,
    residual_norms,
    truncation_report,
)
from .solver import INITS, SolverConfig, initial_values, solve, uniqueness_experiment

COMMANDS = ("solve", "validate", "uniqueness", "baseline", "simulate", "report")

DEFAULTS = {
    "spec": {"alpha": 0.0, "w": 1.0, "rho": 1.0},
    "grid": {"x_min": 1e-6, "x_max": 1e3, "n_cells": 600},
    "solver": {
        "tol": 1e-10,
        "max_iter": 10000,
        "damping": 1.0,
        "init": "bump",
        "normalization": "prescribed-mass",
    },
    "uniqueness": {
        "inits": ["bump", "exponential-capped", "shifted-bump"],
        "threshold": 1e-6,
    },
    "baseline": {"xi_min": 1e-2, "xi_max": 1e3, "xi_points": 200},
    "simulation": {
        "t_end": 100.0,
        "cfl_safety": 0.5,
        "output_times": [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
        "dt_max": None,
        "init": "bump",
        "grid": {"x_min": 1e-4, "x_max": 1e5, "n_cells": 400},
    },
    "validate": {"profile": None},
    "out": "out",
    "seed": 0,
}


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if key not in base:
            raise ManifestError(f"unknown manifest key {where}{key!r}")
        if isinstance(base[key], dict) and key != "validate":
            if not isinstance(val, dict):
                raise ManifestError(f"manifest key {where}{key!r} must be an object")
            out[key] = _merge(base[key], val, f"{where}{key}.")
        else:
            out[key] = val
    return out


def resolve_manifest(args: argparse.Namespace) -> dict:
    """Defaults, then the manifest file, then flags."""
    manifest = copy.deepcopy(DEFAULTS)
    if args.manifest:
        raw = read_json(args.manifest)
        if not isinstance(raw, dict):
            raise ManifestError("manifest must be a JSON object")
        raw = dict(raw)
        cmd = raw.pop("command", None)
        if cmd is not None and cmd != args.command:
            raise ManifestError(f"manifest is for {cmd!r}, not {args.command!r}")
        manifest = _merge(manifest, raw)
    for flag, (section, key) in {
        "alpha": ("spec", "alpha"),
        "w": ("spec", "w"),
        "rho": ("spec", "rho"),
        "x_min": ("grid", "x_min"),
        "x_max": ("grid", "x_max"),
        "cells": ("grid", "n_cells"),
    }.items():
        val = getattr(args, flag)
        if val is not None:
            manifest[section][key] = val
    if args.out is not None:
        manifest["out"] = args.out
    if getattr(args, "profile", None):
        manifest["validate"]["profile"] = args.profile
    manifest["command"] = args.command
    return manifest


def _spec(m: dict) -> KernelSpec:
    s = m["spec"]
    return KernelSpec(float(s["alpha"]), float(s["w"]), float(s["rho"]))


def _grid(g: dict):
    return build_grid(float(g["x_min"]), float(g["x_max"]), g["n_cells"])


def _solver_config(m: dict) -> SolverConfig:
    s = m["solver"]
    return SolverConfig(tol=float(s["tol"]), max_iter=s["max_iter"], damping=float(s["damping"]),
                        init=s["init"], normalization=s["normalization"])


class _Outputs:
    """Tracks files written by one command so they can be removed on failure."""

    def __init__(self, out_dir: Path):
        self.dir = out_dir
        self.files: list[Path] = []

    def add(self, *paths):
        for p in paths:
            if isinstance(p, (list, tuple)):
                self.files.extend(Path(q) for q in p)
            else:
                self.files.append(Path(p))

    def path(self, name: str) -> Path:
        return self.dir / name

    def cleanup(self):
        for f in self.files:
            try:
                f.unlink()
            except FileNotFoundError:
                pass


# ------------------------------------------------------------------ commands


def cmd_solve(m: dict, out: _Outputs) -> dict:
    spec, grid, cfg = _spec(m), _grid(m["grid"]), _solver_config(m)
    prof, report = solve(spec, cfg, grid)
    out.add(save_profile(out.path("profile.csv"), prof))
    summary = {"manifest": m, "report": report.to_dict(),
               "truncation": truncation_report(prof)}
    if spec.alpha == 0:
        ref = explicit_profile(spec.w, spec.rho, prof.grid)
        summary["baseline_l1_x_distance"] = l1_distance(prof, ref, weight="x")
    out.add(write_json(out.path("solve_report.json"), summary))
    return {"converged": report.converged, "iterations": report.iterations,
            "final_gap": report.final_gap}


def cmd_validate(m: dict, out: _Outputs) -> dict:
    path = m["validate"]["profile"]
    if not path:
        raise ManifestError("validate needs a profile CSV (argument or validate.profile)")
    prof = load_profile(path)
    result = {
        "residual_norms": residual_norms(prof),
        "moment_identity_gap": moment_identity_gap(prof),
        "moments": dict(prof.moments),
        "truncation": truncation_report(prof),
    }
    try:
        result["b99_gap"] = b99_gap(prof)
    except AlphaZero as exc:
        result["b99_gap"] = None
        result["b99_note"] = str(exc)
    out.add(write_json(out.path("validation.json"), {"manifest": m, "validation": result}))
    return {"b99_gap": result["b99_gap"], "moment_identity_gap": result["moment_identity_gap"]}


def cmd_uniqueness(m: dict, out: _Outputs) -> dict:
    spec, grid, cfg = _spec(m), _grid(m["grid"]), _solver_config(m)
    u = m["uniqueness"]
    inits = list(u["inits"])
    for i in inits:
        if i not in INITS or i == "custom-profile":
            raise ManifestError(f"unknown initialisation {i!r}")
    res = uniqueness_experiment(spec, cfg, grid, inits, threshold=float(u["threshold"]))
    out.add(write_csv(out.path("uniqueness.csv"), res.labels, res.distances.T))
    payload = {
        "manifest": m,
        "labels": res.labels,
        "status": res.status,
        "distances": res.distances,
        "max_off_diagonal": res.max_off_diagonal,
        "threshold": res.threshold,
        "verdict": res.verdict,
        "reports": [r.to_dict() if r is not None else None for r in res.reports],
    }
    out.add(write_json(out.path("uniqueness.json"), payload))
    print(f"verdict: {res.verdict} (max off-diagonal {res.max_off_diagonal:.3e})")
    return {"verdict": res.verdict, "max_off_diagonal": res.max_off_diagonal}


def cmd_baseline(m: dict, out: _Outputs) -> dict:
    spec, grid = _spec(m), _grid(m["grid"])
    b = m["baseline"]
    prof = explicit_profile(spec.w, spec.rho, grid)
    xi = default_xi(int(b["xi_points"]), float(b["xi_min"]), float(b["xi_max"]))
    samples = bernstein_transform(prof, xi)
    res = bernstein_ode_residual(samples, spec.w)
    out.add(save_profile(out.path("baseline_profile.csv"), prof))
    out.add(write_csv(out.path("bernstein.csv"), ["xi", "B"], [xi, samples.values]))
    out.add(write_csv(out.path("bernstein_residual.csv"), ["xi", "residual"], [xi, res]))
    exact = analytic_transform(spec.w, spec.rho, xi)
    summary = {
        "manifest": m,
        "max_abs_residual_interior": float(np.max(np.abs(res[1:-1]))),
        "max_transform_error": float(np.max(np.abs(samples.values - exact))),
        "residual_norms": residual_norms(prof),
    }
    out.add(write_json(out.path("baseline.json"), summary))
    return {"max_abs_residual_interior": summary["max_abs_residual_interior"]}


def cmd_simulate(m: dict, out: _Outputs) -> dict:
    spec = _spec(m)
    sim = m["simulation"]
    grid = _grid(sim["grid"])
    init = sim["init"]
    if init not in INITS or init == "custom-profile":
        raise ManifestError(f"unknown initialisation {init!r}")
    f0 = mass_normalized(grid, initial_values(init, grid, spec.alpha), spec.rho)
    ref_grid = _grid(m["grid"])
    if spec.alpha == 0:
        reference = explicit_profile(spec.w, spec.rho, ref_grid)
    else:
        reference, _ = solve(spec, _solver_config(m), ref_grid)
    cfg = SimConfig(t_end=float(sim["t_end"]), spec=spec, cfl_safety=float(sim["cfl_safety"]),
                    output_times=tuple(float(t) for t in sim["output_times"]),
                    dt_max=None if sim["dt_max"] is None else float(sim["dt_max"]))
    res = run(SimState(grid, f0), cfg, reference)
    out.add(write_csv(out.path("timeseries.csv"), ["t", "mass", "distance"],
                      [res.times, res.mass, res.distance]))
    for k, s in enumerate(res.snapshots):
        path = out.path(f"snapshot_{k:03d}.csv")
        out.add(write_csv(path, ["x", "f"], [s.grid.nodes, s.f_values]))
    d = [v for v in res.distance if np.isfinite(v)]
    summary = {
        "manifest": m,
        "steps": res.steps,
        "mass_drift": res.mass_drift,
        "times": res.times,
        "distance": res.distance,
        "small_size_fraction": res.small_size_fraction,
        "final_distance": d[-1] if d else None,
    }
    out.add(write_json(out.path("simulate.json"), summary))
    return {"mass_drift": res.mass_drift, "final_distance": summary["final_distance"]}


REPORT_SOURCES = ("solve_report.json", "validation.json", "uniqueness.json",
                  "baseline.json", "simulate.json")


def cmd_report(m: dict, out: _Outputs) -> dict:
    merged = {}
    lines = ["coagscale report", ""]
    for name in REPORT_SOURCES:
        p = out.path(name)
        if not p.exists():
            continue
        data = read_json(p)
        data.pop("manifest", None)
        merged[name[:-5]] = data
        lines.append(f"[{name[:-5]}]")
        lines.extend(_summary_lines(name, data))
        lines.append("")
    if not merged:
        raise ManifestError(f"no prior outputs found in {out.dir}")
    ts = out.path("timeseries.csv")
    if ts.exists():
        header, cols = read_csv(ts)
        merged["timeseries"] = {h: c for h, c in zip(header, cols)}
    out.add(write_json(out.path("report.json"), {"manifest": m, "sections": merged}))
    txt = out.path("report.txt")
    txt.write_text("\n".join(lines).rstrip() + "\n", encoding="utf-8")
    out.add(txt)
    return {"sections": sorted(merged)}


def _summary_lines(name: str, data: dict) -> list:
    if name == "solve_report.json":
        r = data["report"]
        out = [f"converged: {r['converged']}  iterations: {r['iterations']}  "
               f"final gap: {r['final_gap']}"]
        out += [f"residual {k}: {v}" for k, v in sorted(r["residual_norms"].items())]
        out += [f"moment {k}: {v}" for k, v in sorted(r["moment_summary"].items())]
        if "baseline_l1_x_distance" in data:
            out.append(f"distance to exact profile: {data['baseline_l1_x_distance']}")
        return out
    if name == "validation.json":
        v = data["validation"]
        out = [f"residual {k}: {x}" for k, x in sorted(v["residual_norms"].items())]
        return out + [f"moment identity gap: {v['moment_identity_gap']}",
                      f"b99 gap: {v['b99_gap']}"]
    if name == "uniqueness.json":
        return [f"verdict: {data['verdict']}", f"max off-diagonal: {data['max_off_diagonal']}",
                f"status: {', '.join(data['status'])}"]
    if name == "baseline.json":
        return [f"max ODE residual (interior): {data['max_abs_residual_interior']}",
                f"max transform error: {data['max_transform_error']}"]
    if name == "simulate.json":
        return [f"steps: {data['steps']}  mass drift: {data['mass_drift']}",
                f"final distance: {data['final_distance']}"]
    return []


HANDLERS = {
    "solve": cmd_solve,
    "validate": cmd_validate,
    "uniqueness": cmd_uniqueness,
    "baseline": cmd_baseline,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="coagscale",
        description="Self-similar coagulation profiles: solve, validate and simulate.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("profile", nargs="?", default=None,
                    help="profile CSV (validate only)")
    ap.add_argument("--manifest", default=None, help="JSON manifest")
    ap.add_argument("--alpha", type=float, default=None)
    ap.add_argument("--w", type=float, default=None)
    ap.add_argument("--rho", type=float, default=None)
    ap.add_argument("--x-min", dest="x_min", type=float, default=None)
    ap.add_argument("--x-max", dest="x_max", type=float, default=None)
    ap.add_argument("--cells", type=int, default=None)
    ap.add_argument("--out", default=None, help="output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = None
    try:
        manifest = resolve_manifest(args)
        out_dir = Path(manifest["out"])
        out_dir.mkdir(parents=True, exist_ok=True)
        out = _Outputs(out_dir)
        summary = HANDLERS[args.command](manifest, out)
    except CoagScaleError as exc:
        if out is not None:
            out.cleanup()
        sys.stderr.write(json.dumps(exc.to_dict(), sort_keys=True) + "\n")
        return 1
    except (KeyError, TypeError, ValueError) as exc:
        if out is not None:
            out.cleanup()
        err = {"error": "invalid-manifest", "message": f"{type(exc).__name__}: {exc}"}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return 1
    sys.stdout.write(dumps({"command": args.command, **summary}))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
