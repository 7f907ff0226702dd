"""CSV and JSON reading and writing with deterministic formatting."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import ManifestError
from .grid import SizeGrid
from .kernel import KernelSpec
from .profile import Profile


def fmt(v: float) -> str:
    """Round-trip decimal representation of a float."""
    return format(float(v), ".17g")


def to_jsonable(obj):
    """Convert numpy values, tuples and non-finite floats for strict JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read JSON from {path}: {exc}") from exc


def write_csv(path, header, columns) -> Path:
    """Write equally long numeric columns under a mandatory header row."""
    path = Path(path)
    cols = [np.asarray(c, dtype=float) for c in columns]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """Header and float columns of a CSV file."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ManifestError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise ManifestError(f"non-numeric entry in {path}: {exc}") from exc
    data = data.reshape(len(body), len(header))
    return header, [data[:, k] for k in range(len(header))]


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def profile_metadata(p: Profile) -> dict:
    return {
        "alpha": p.spec.alpha,
        "w": p.spec.w,
        "rho": p.spec.rho,
        "x_min": p.grid.x_min,
        "x_max": p.grid.x_max,
        "n_cells": p.grid.n_cells,
        "moments": dict(p.moments),
    }


def save_profile(path, p: Profile) -> list:
    """``x,phi`` CSV plus the JSON sidecar; returns both paths."""
    path = Path(path)
    write_csv(path, ["x", "phi"], [p.grid.nodes, p.values])
    side = write_json(sidecar_path(path), profile_metadata(p))
    return [path, side]


def grid_from_nodes(nodes, x_min: float, x_max: float) -> SizeGrid:
    """Rebuild a geometric grid from its nodes and end points."""
    nodes = np.asarray(nodes, dtype=float)
    inner = np.sqrt(nodes[1:] * nodes[:-1])
    edges = np.concatenate(([x_min], inner, [x_max]))
    return SizeGrid(edges=edges, nodes=nodes)


def load_profile(path) -> Profile:
    """Read a profile written by :func:`save_profile`."""
    header, cols = read_csv(path)
    if header != ["x", "phi"]:
        raise ManifestError(f"{path}: expected header x,phi, got {header}")
    meta = read_json(sidecar_path(path))
    try:
        spec = KernelSpec(float(meta["alpha"]), float(meta["w"]), float(meta["rho"]))
        grid = grid_from_nodes(cols[0], float(meta["x_min"]), float(meta["x_max"]))
    except KeyError as exc:
        raise ManifestError(f"sidecar of {path} lacks {exc}") from exc
    return Profile(grid, cols[1], spec)
