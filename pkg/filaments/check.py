from __future__ import annotations

import sys
from typing import Any, Dict, List

from filaments.config_loader import load_config, load_env


def _err(msg: str) -> None:
    print(f"[FAIL] {msg}")


def _ok(msg: str) -> None:
    print(f"[OK] {msg}")


def _is_pos_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool) and v > 0


def _is_pos_num(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0


def _eps_list_ok(values: Any) -> bool:
    if not isinstance(values, list) or len(values) < 2:
        return False
    if not all(_is_pos_num(e) and e < 1 for e in values):
        return False
    return all(b < a for a, b in zip(values, values[1:]))


def _validate_config(cfg: Dict[str, Any]) -> List[str]:
    errors: List[str] = []

    grid = cfg.get("grid") or {}
    if not _is_pos_int(grid.get("min_nodes_across")):
        errors.append("grid.min_nodes_across: must be a positive integer")
    if not _is_pos_num(grid.get("points_per_eps")):
        errors.append("grid.points_per_eps: must be positive")
    if not _is_pos_int(grid.get("max_nodes_per_side")):
        errors.append("grid.max_nodes_per_side: must be a positive integer")

    solver = cfg.get("solver") or {}
    for key in ("laplace_residual", "g0_tolerance", "armijo"):
        if not _is_pos_num(solver.get(key)):
            errors.append(f"solver.{key}: must be positive")
    if not _is_pos_int(solver.get("g0_max_iters")):
        errors.append("solver.g0_max_iters: must be a positive integer")
    if solver.get("g0_method") not in ("newton", "descent"):
        errors.append("solver.g0_method: must be one of newton|descent")
    bt = solver.get("backtrack_factor")
    if not (_is_pos_num(bt) and bt < 1):
        errors.append("solver.backtrack_factor: must lie in (0, 1)")

    radial = cfg.get("radial") or {}
    if not _is_pos_int(radial.get("nodes_per_eps")):
        errors.append("radial.nodes_per_eps: must be a positive integer")

    gamma = cfg.get("gamma") or {}
    if not _eps_list_ok(gamma.get("epsilons")) or len(gamma.get("epsilons") or []) < 3:
        errors.append("gamma.epsilons: need at least three decreasing values in (0, 1)")

    sweep = cfg.get("sweep") or {}
    if not _eps_list_ok(sweep.get("epsilons")):
        errors.append("sweep.epsilons: need decreasing values in (0, 1)")
    z = sweep.get("z_samples")
    if not (_is_pos_int(z) and z >= 3):
        errors.append("sweep.z_samples: must be an integer >= 3")

    fields = cfg.get("fields") or {}
    if fields.get("phase_mode") not in ("auto", "closed_form", "grid"):
        errors.append("fields.phase_mode: must be one of auto|closed_form|grid")

    vortex = cfg.get("vortex") or {}
    if not _is_pos_int(vortex.get("sn_radii")):
        errors.append("vortex.sn_radii: must be a positive integer")
    for key in ("c_modulus", "c0_cap", "seed_threshold"):
        if not _is_pos_num(vortex.get(key)):
            errors.append(f"vortex.{key}: must be positive")

    return errors


def main() -> int:
    print("Filament lab sanity check\n-------------------------")

    try:
        applied = load_env()
        if applied:
            _ok(f".env: {', '.join(sorted(applied))}")
    except Exception as e:
        _err(f"Could not load .env: {e}")
        return 1

    try:
        cfg = load_config()
        _ok("config/lab_config.yaml loaded")
    except Exception as e:
        _err(f"Failed to load config: {e}")
        return 1

    errors = _validate_config(cfg)
    if errors:
        for e in errors:
            _err(e)
        return 1

    sweep = cfg.get("sweep", {})
    print("\nSummary:")
    print(f"- grid.points_per_eps: {cfg.get('grid', {}).get('points_per_eps')}")
    print(f"- solver.g0_method: {cfg.get('solver', {}).get('g0_method')}")
    print(f"- gamma.epsilons: {cfg.get('gamma', {}).get('epsilons')}")
    print(f"- sweep.epsilons: {sweep.get('epsilons')} (z_samples={sweep.get('z_samples')})")
    print(f"- logging.run_log_path: {cfg.get('logging', {}).get('run_log_path')}")
    print("\nAll checks passed.")
    return 0


if __name__ == "__main__":
    sys.exit(main())
