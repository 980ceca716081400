from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import dotenv_values

from filaments.error_handling import ConfigurationError

try:
    import yaml  # type: ignore
except Exception as exc:  # pragma: no cover
    raise RuntimeError(
        "PyYAML is required to load config/lab_config.yaml. "
        "Install with: pip install pyyaml"
    ) from exc


DEFAULT_YAML_PATH = "config/lab_config.yaml"
PROJECT_ROOT = Path(__file__).resolve().parent.parent
ENV_PREFIX = "FILAMENT_"

# Environment keys that fill ExperimentConfig fields; CLI flags still win
EXPERIMENT_ENV_KEYS = {
    "FILAMENT_OUTPUT_DIR": "output_dir",
    "FILAMENT_SEED": "seed",
}


def _env_file(env_path: Optional[str]) -> Optional[Path]:
    explicit = (env_path or os.getenv("FILAMENT_ENV_PATH", "")).strip()
    candidates = [Path(explicit)] if explicit else [Path(".env"), PROJECT_ROOT / ".env"]
    return next((p for p in candidates if p.is_file()), None)


def load_env(env_path: Optional[str] = None) -> Dict[str, str]:
    """
    Copy the FILAMENT_* entries of the first .env found into os.environ.

    Existing variables win unless FILAMENT_ENV_FORCE=1. Returns what was applied.
    """
    path = _env_file(env_path)
    if path is None:
        return {}
    force = os.getenv("FILAMENT_ENV_FORCE", "").strip() == "1"
    applied: Dict[str, str] = {}
    for key, value in dotenv_values(path).items():
        if not key.startswith(ENV_PREFIX) or value is None:
            continue
        if force or key not in os.environ:
            os.environ[key] = value
            applied[key] = value
    return applied


def experiment_env_overrides() -> Dict[str, Any]:
    """ExperimentConfig fields set through FILAMENT_OUTPUT_DIR / FILAMENT_SEED."""
    out: Dict[str, Any] = {}
    for key, name in EXPERIMENT_ENV_KEYS.items():
        value = os.getenv(key, "").strip()
        if value:
            out[name] = value
    return out


def _default_yaml_path() -> str:
    return str(PROJECT_ROOT / DEFAULT_YAML_PATH)


def load_yaml_config(path: Optional[str] = None) -> Dict[str, Any]:
    path = path or os.getenv("FILAMENT_CONFIG_PATH", "").strip() or _default_yaml_path()
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def load_config(env_path: Optional[str] = None, yaml_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Loads .env and YAML config and returns a dict.
    """
    load_env(env_path)
    return load_yaml_config(yaml_path)


def section(cfg: Dict[str, Any], name: str) -> Dict[str, Any]:
    return cfg.get(name, {}) or {}


def is_verbose(cfg: Optional[Dict[str, Any]] = None) -> bool:
    if os.getenv("FILAMENT_VERBOSE", "").strip() == "1":
        return True
    return bool(section(cfg or {}, "logging").get("verbose", False))


# ---- Experiment config (JSON) ------------------------------------------------


@dataclass
class ExperimentConfig:
    """En körning: domän, filament, eps-lista, lösarparametrar och utkatalog."""

    domain: Dict[str, Any]
    n: int = 1
    height: float = 1.0
    z_nodes: int = 64
    bottom: List[List[float]] = field(default_factory=list)
    top: List[List[float]] = field(default_factory=list)
    initial_guess: Optional[str] = None
    filament_file: Optional[str] = None
    epsilons: List[float] = field(default_factory=list)
    gamma_epsilons: List[float] = field(default_factory=list)
    spacing: Optional[float] = None
    points_per_eps: float = 4.0
    z_samples: int = 17
    tolerance: float = 1e-6
    max_iters: int = 500
    convention: str = "gradient"
    boundary_matched: bool = False
    field_file: Optional[str] = None
    target_total_radius: Optional[float] = None
    vortices: List[List[float]] = field(default_factory=list)
    epsilon: Optional[float] = None
    output_dir: str = "out"
    seed: int = 0
    raw: Dict[str, Any] = field(default_factory=dict)


def _positive(value: Any) -> bool:
    try:
        v = float(value)
    except (TypeError, ValueError):
        return False
    return math.isfinite(v) and v > 0


def _validate_experiment(exp: ExperimentConfig) -> List[str]:
    errors: List[str] = []

    shape = exp.domain.get("shape")
    if shape == "disk":
        if not _positive(exp.domain.get("radius")):
            errors.append("domain.radius: must be a positive number")
    elif shape == "rectangle":
        hw = exp.domain.get("half_widths")
        if not isinstance(hw, (list, tuple)) or len(hw) != 2 or not all(_positive(v) for v in hw):
            errors.append("domain.half_widths: must be two positive numbers")
    else:
        errors.append("domain.shape: must be one of disk|rectangle")

    if not isinstance(exp.n, int) or exp.n < 0:
        errors.append("n: must be a non-negative integer")
    if not _positive(exp.height):
        errors.append("height: must be positive")
    if not isinstance(exp.z_nodes, int) or exp.z_nodes < 3:
        errors.append("z_nodes: must be an integer >= 3")
    if not isinstance(exp.z_samples, int) or exp.z_samples < 3:
        errors.append("z_samples: must be an integer >= 3")
    for key in ("tolerance", "points_per_eps"):
        if not _positive(getattr(exp, key)):
            errors.append(f"{key}: must be positive")
    if not isinstance(exp.max_iters, int) or exp.max_iters <= 0:
        errors.append("max_iters: must be a positive integer")
    if exp.spacing is not None and not _positive(exp.spacing):
        errors.append("spacing: must be positive")
    if exp.convention not in ("gradient", "unordered"):
        errors.append("convention: must be one of gradient|unordered")
    for key in ("epsilons", "gamma_epsilons"):
        for eps in getattr(exp, key):
            if not _positive(eps) or float(eps) >= 1.0:
                errors.append(f"{key}: every entry must lie in (0, 1)")
                break
    if exp.epsilon is not None and (not _positive(exp.epsilon) or exp.epsilon >= 1.0):
        errors.append("epsilon: must lie in (0, 1)")
    if exp.target_total_radius is not None and not _positive(exp.target_total_radius):
        errors.append("target_total_radius: must be positive")
    for key in ("bottom", "top"):
        pts = getattr(exp, key)
        if pts and len(pts) != exp.n:
            errors.append(f"{key}: expected {exp.n} points, got {len(pts)}")
    if not isinstance(exp.seed, int) or exp.seed < 0:
        errors.append("seed: must be a non-negative integer")
    return errors


def load_experiment_config(
    path: Optional[str],
    defaults: Optional[Dict[str, Any]] = None,
    *,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """
    Läser en JSON-experimentkonfig och fyller i standardvärden från YAML.
    Prioritet: overrides (CLI) > FILAMENT_OUTPUT_DIR/FILAMENT_SEED > JSON > YAML.

    Alla valideringsfel samlas och rapporteras i ett ConfigurationError.
    """
    defaults = defaults or {}
    raw: Dict[str, Any] = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as f:
                raw = json.load(f) or {}
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(
                f"Could not read experiment config {path}: {exc}",
                details={"path": path},
            ) from exc
    raw.update(experiment_env_overrides())
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})

    solver = section(defaults, "solver")
    sweep = section(defaults, "sweep")
    gamma = section(defaults, "gamma")
    output = section(defaults, "output")

    try:
        exp = ExperimentConfig(
            domain=dict(raw.get("domain") or {"shape": "disk", "radius": 1.0}),
            n=int(raw.get("n", len(raw.get("bottom") or []) or 1)),
            height=float(raw.get("height", 1.0)),
            z_nodes=int(raw.get("z_nodes", 64)),
            bottom=[list(map(float, p)) for p in raw.get("bottom") or []],
            top=[list(map(float, p)) for p in raw.get("top") or []],
            initial_guess=raw.get("initial_guess"),
            filament_file=raw.get("filament_file"),
            epsilons=[float(e) for e in raw.get("epsilons") or sweep.get("epsilons") or [5e-2, 2.5e-2, 1.25e-2]],
            gamma_epsilons=[float(e) for e in raw.get("gamma_epsilons") or gamma.get("epsilons") or [1e-2, 5e-3, 2.5e-3]],
            spacing=float(raw["spacing"]) if raw.get("spacing") is not None else None,
            points_per_eps=float(raw.get("points_per_eps", sweep.get("points_per_eps", 4))),
            z_samples=int(raw.get("z_samples", sweep.get("z_samples", 17))),
            tolerance=float(raw.get("tolerance", solver.get("g0_tolerance", 1e-6))),
            max_iters=int(raw.get("max_iters", solver.get("g0_max_iters", 500))),
            convention=str(raw.get("convention", "gradient")),
            boundary_matched=bool(raw.get("boundary_matched", False)),
            field_file=raw.get("field_file"),
            target_total_radius=float(raw["target_total_radius"]) if raw.get("target_total_radius") is not None else None,
            vortices=[list(map(float, p)) for p in raw.get("vortices") or []],
            epsilon=float(raw["epsilon"]) if raw.get("epsilon") is not None else None,
            output_dir=str(raw.get("output_dir") or output.get("directory") or "out"),
            seed=int(raw.get("seed", 0)),
            raw=raw,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"Malformed experiment config: {exc}") from exc

    errors = _validate_experiment(exp)
    if errors:
        raise ConfigurationError(
            "Invalid experiment config: " + "; ".join(errors),
            details={"errors": errors},
        )
    return exp
