"""Disk formats for configurations, fields, measures, balls and sweep reports."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from filaments.domain_grid import CylinderSpec, DomainSpec, Grid2D, build_grid
from filaments.error_handling import FieldIOError, LabError
from filaments.gamma_experiments import CSV_COLUMNS, ExpansionReport
from filaments.gl_fields import ComplexField2D, ComplexField3D
from filaments.reduced_model import FilamentConfiguration
from filaments.renormalized_energy import GreenData
from filaments.run_logger import _to_primitive, diag
from filaments.vortex_analysis import AtomicMeasure, BallResult

PathLike = Union[str, Path]


def ensure_dir(path: PathLike) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def manifest_path(csv_path: PathLike) -> Path:
    """field.csv -> field.json"""
    return Path(csv_path).with_suffix(".json")


# ---- Generic writers --------------------------------------------------------------------


def write_json(path: PathLike, payload: Any) -> Path:
    """Sorted keys and repr floats, so identical inputs give identical bytes."""
    p = Path(path)
    ensure_dir(p.parent)
    with p.open("w", encoding="utf-8") as f:
        json.dump(_to_primitive(payload), f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    diag("file_store", f"wrote {p}")
    return p


def read_json(path: PathLike) -> Dict[str, Any]:
    p = Path(path)
    try:
        with p.open("r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError as exc:
        raise FieldIOError(f"file not found: {p}", details={"path": str(p)}) from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise FieldIOError(f"could not read JSON: {p}", details={"path": str(p), "reason": str(exc)}) from exc
    if not isinstance(data, dict):
        raise FieldIOError(f"expected a JSON object in {p}", details={"path": str(p)})
    return data


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    p = Path(path)
    ensure_dir(p.parent)
    with p.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    diag("file_store", f"wrote {p}")
    return p


def read_csv(path: PathLike, required: Sequence[str] = ()) -> List[Dict[str, str]]:
    p = Path(path)
    try:
        with p.open("r", encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            header = reader.fieldnames or []
            rows = list(reader)
    except FileNotFoundError as exc:
        raise FieldIOError(f"file not found: {p}", details={"path": str(p)}) from exc
    except (OSError, csv.Error, UnicodeDecodeError) as exc:
        raise FieldIOError(f"could not read CSV: {p}", details={"path": str(p), "reason": str(exc)}) from exc
    missing = [c for c in required if c not in header]
    if missing:
        raise FieldIOError(f"CSV {p} lacks columns {missing}", details={"path": str(p), "header": header})
    return rows


def _floats(rows: List[Dict[str, str]], column: str, path: PathLike) -> np.ndarray:
    try:
        return np.array([float(r[column]) for r in rows], dtype=float)
    except (TypeError, ValueError) as exc:
        raise FieldIOError(f"non-numeric value in column {column!r} of {path}", details={"path": str(path)}) from exc


# ---- Filament configurations ---------------------------------------------------------------


def save_configuration(path: PathLike, f: FilamentConfiguration) -> Path:
    header = ["z"] + [f"f{i + 1}_{c}" for i in range(f.n) for c in ("x", "y")]
    rows = []
    for k, z in enumerate(f.z):
        rows.append([float(z)] + [float(v) for i in range(f.n) for v in f.positions[i, k]])
    return write_csv(path, header, rows)


def load_configuration(path: PathLike) -> FilamentConfiguration:
    rows = read_csv(path, required=["z"])
    if len(rows) < 3:
        raise FieldIOError(f"configuration {path} needs at least three z-rows", details={"rows": len(rows)})
    z = _floats(rows, "z", path)
    n = 0
    while f"f{n + 1}_x" in rows[0] and f"f{n + 1}_y" in rows[0]:
        n += 1
    if n == 0:
        raise FieldIOError(f"configuration {path} has no filament columns")
    if abs(z[0]) > 1e-12 or np.any(np.diff(z) <= 0):
        raise FieldIOError(f"z column of {path} must start at 0 and increase", details={"path": str(path)})
    steps = np.diff(z)
    if np.max(np.abs(steps - steps.mean())) > 1e-9 * max(1.0, z[-1]):
        raise FieldIOError(f"z column of {path} is not uniform", details={"path": str(path)})
    pos = np.stack(
        [np.column_stack([_floats(rows, f"f{i + 1}_x", path), _floats(rows, f"f{i + 1}_y", path)]) for i in range(n)]
    )
    try:
        return FilamentConfiguration(pos, float(z[-1]))
    except LabError as exc:
        raise FieldIOError(f"invalid configuration in {path}: {exc}", details={"path": str(path)}) from exc


# ---- Fields ----------------------------------------------------------------------------------


FIELD_COLUMNS = ["i", "j", "x", "y", "re", "im"]


def _field_rows(grid: Grid2D, values: np.ndarray) -> List[List[Any]]:
    idx = np.argwhere(grid.mask)
    return [
        [int(i), int(j), float(grid.x[i]), float(grid.y[j]), float(values[i, j].real), float(values[i, j].imag)]
        for i, j in idx
    ]


def _grid_manifest(grid: Grid2D, eps: float) -> Dict[str, Any]:
    return {
        "epsilon": eps,
        "spacing": grid.spacing,
        "domain": grid.domain.to_dict(),
        "shape": list(grid.shape),
    }


def save_field_2d(path: PathLike, w: ComplexField2D, meta: Optional[Dict[str, Any]] = None) -> Path:
    p = write_csv(path, FIELD_COLUMNS, _field_rows(w.grid, w.values))
    manifest = _grid_manifest(w.grid, w.eps)
    manifest["meta"] = meta or {}
    write_json(manifest_path(p), manifest)
    return p


def _grid_from_manifest(manifest: Dict[str, Any], path: PathLike) -> Grid2D:
    try:
        domain = DomainSpec.from_dict(manifest["domain"])
        grid = build_grid(domain, float(manifest["spacing"]), min_nodes_across=2)
    except (KeyError, TypeError, ValueError, LabError) as exc:
        raise FieldIOError(f"malformed field manifest for {path}: {exc}", details={"path": str(path)}) from exc
    if list(grid.shape) != list(manifest.get("shape", grid.shape)):
        raise FieldIOError(f"manifest shape does not match the rebuilt grid for {path}")
    return grid


def _values_from_rows(rows: List[Dict[str, str]], grid: Grid2D, path: PathLike) -> np.ndarray:
    values = np.ones(grid.shape, dtype=complex)
    seen = np.zeros(grid.shape, dtype=bool)
    try:
        for r in rows:
            i, j = int(r["i"]), int(r["j"])
            values[i, j] = complex(float(r["re"]), float(r["im"]))
            seen[i, j] = True
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise FieldIOError(f"malformed field row in {path}", details={"path": str(path), "reason": str(exc)}) from exc
    if not np.array_equal(seen, grid.mask):
        raise FieldIOError(f"field {path} does not cover exactly the interior nodes", details={"path": str(path)})
    if not np.all(np.isfinite(values[grid.mask])):
        raise FieldIOError(f"field {path} has non-finite values")
    return values


def load_field_2d(path: PathLike) -> ComplexField2D:
    manifest = read_json(manifest_path(path))
    grid = _grid_from_manifest(manifest, path)
    rows = read_csv(path, required=FIELD_COLUMNS)
    values = _values_from_rows(rows, grid, path)
    try:
        return ComplexField2D(grid, values, float(manifest["epsilon"]))
    except (KeyError, LabError) as exc:
        raise FieldIOError(f"invalid field in {path}: {exc}", details={"path": str(path)}) from exc


def save_field_3d(directory: PathLike, u: ComplexField3D) -> Path:
    """One CSV per z-sample plus manifest.json in the directory."""
    d = ensure_dir(directory)
    manifest = _grid_manifest(u.grid, u.eps)
    manifest.update({"height": u.cylinder.height, "z": u.z.tolist(), "meta": u.meta})
    for k in range(u.values.shape[0]):
        write_csv(d / f"slice_{k:04d}.csv", FIELD_COLUMNS, _field_rows(u.grid, u.values[k]))
    write_json(d / "manifest.json", manifest)
    return d


def load_field_3d(directory: PathLike) -> ComplexField3D:
    d = Path(directory)
    manifest = read_json(d / "manifest.json")
    grid = _grid_from_manifest(manifest, d)
    zs = manifest.get("z") or []
    try:
        cylinder = CylinderSpec(grid.domain, float(manifest["height"]), len(zs))
    except (KeyError, LabError) as exc:
        raise FieldIOError(f"malformed 3D manifest in {d}: {exc}") from exc
    slices = [
        _values_from_rows(read_csv(d / f"slice_{k:04d}.csv", required=FIELD_COLUMNS), grid, d)
        for k in range(len(zs))
    ]
    try:
        return ComplexField3D(cylinder, grid, np.stack(slices), float(manifest["epsilon"]), manifest.get("meta") or {})
    except (KeyError, TypeError, ValueError, LabError) as exc:
        raise FieldIOError(f"invalid 3D field in {d}: {exc}", details={"path": str(d)}) from exc


GREEN_COLUMNS = ["i", "j", "x", "y", "H"]


def save_green(path: PathLike, green: GreenData) -> Path:
    """Interior values of H_ω(·,y) plus a manifest; exterior nodes are rebuilt from −log|x−y| on load."""
    grid = green.grid
    idx = np.argwhere(grid.mask)
    rows = [[int(i), int(j), float(grid.x[i]), float(grid.y[j]), float(green.values[i, j])] for i, j in idx]
    p = write_csv(path, GREEN_COLUMNS, rows)
    manifest = {
        "spacing": grid.spacing,
        "domain": grid.domain.to_dict(),
        "shape": list(grid.shape),
        "source": list(green.y),
        "residual": green.residual,
        "method": green.method,
    }
    write_json(manifest_path(p), manifest)
    return p


def load_green(path: PathLike) -> GreenData:
    manifest = read_json(manifest_path(path))
    grid = _grid_from_manifest(manifest, path)
    try:
        y = (float(manifest["source"][0]), float(manifest["source"][1]))
        residual = float(manifest["residual"])
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise FieldIOError(f"malformed Green manifest for {path}: {exc}", details={"path": str(path)}) from exc
    values = -np.log(np.maximum(np.hypot(grid.X - y[0], grid.Y - y[1]), 1e-300))
    seen = np.zeros(grid.shape, dtype=bool)
    try:
        for r in read_csv(path, required=GREEN_COLUMNS):
            i, j = int(r["i"]), int(r["j"])
            values[i, j] = float(r["H"])
            seen[i, j] = True
    except (TypeError, ValueError, IndexError) as exc:
        raise FieldIOError(f"malformed Green row in {path}", details={"path": str(path), "reason": str(exc)}) from exc
    if not np.array_equal(seen, grid.mask):
        raise FieldIOError(f"Green dump {path} does not cover exactly the interior nodes", details={"path": str(path)})
    return GreenData(y=y, grid=grid, values=values, residual=residual, method=str(manifest.get("method", "")))


# ---- Measures and balls ----------------------------------------------------------------------------


def save_measure(path: PathLike, mu: AtomicMeasure) -> Path:
    rows = [[float(p[0]), float(p[1]), float(w)] for p, w in zip(mu.points, mu.weights)]
    return write_csv(path, ["x", "y", "weight"], rows)


def load_measure(path: PathLike) -> AtomicMeasure:
    rows = read_csv(path, required=["x", "y", "weight"])
    if not rows:
        return AtomicMeasure.empty()
    pts = np.column_stack([_floats(rows, "x", path), _floats(rows, "y", path)])
    try:
        return AtomicMeasure(pts, _floats(rows, "weight", path))
    except LabError as exc:
        raise FieldIOError(f"invalid measure in {path}: {exc}") from exc


def ball_payload(result: BallResult, target_total_radius: float) -> Dict[str, Any]:
    balls = result.balls
    return {
        "balls": [
            {"center": c.tolist(), "radius": float(r), "degree": int(d), "unreliable": bool(u)}
            for c, r, d, u in zip(balls.centers, balls.radii, balls.degrees, balls.unreliable)
        ],
        "certificate": {
            "sigma": balls.sigma,
            "total_radius": balls.total_radius,
            "target_total_radius": target_total_radius,
            "lower_bound": result.lower_bound,
            "covered_energy": result.covered_energy,
            "c_modulus": result.c_modulus,
            "c0_cap": result.c0_cap,
        },
        "total_degree": balls.total_degree,
        "radius_history": result.radius_history,
    }


def save_balls(path: PathLike, result: BallResult, target_total_radius: float) -> Path:
    return write_json(path, ball_payload(result, target_total_radius))


# ---- Sweep reports ------------------------------------------------------------------------------


def save_report(directory: PathLike, report: ExpansionReport) -> Dict[str, Path]:
    """ExpansionReport -> report.json + report.csv (one row per ε)."""
    d = ensure_dir(directory)
    json_path = write_json(d / "report.json", report.to_dict())
    rows = [[row[c] for c in CSV_COLUMNS] for row in report.rows()]
    csv_path = write_csv(d / "report.csv", CSV_COLUMNS, rows)
    return {"json": json_path, "csv": csv_path}
