"""Critical-point ODE of the reduced model, integrated in z with Störmer-Verlet."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict

import numpy as np

from filaments.error_handling import CollisionError, ValidationError
from filaments.reduced_model import _coupling, _interaction_field

# Pair distances below this abort the integration
COLLISION_DISTANCE = 1e-12


@dataclass
class Trajectory:
    z: np.ndarray           # (steps+1,)
    positions: np.ndarray   # (steps+1, n, 2)
    velocities: np.ndarray  # (steps+1, n, 2)
    convention: str = "gradient"


def potential(positions: np.ndarray, convention: str = "gradient") -> float:
    """V = c Σ_{i<j} log|f_i − f_j|, so that f_i″ = −∇_{f_i}V reproduces the EL system."""
    c = _coupling(convention)
    total = 0.0
    for i, j in itertools.combinations(range(positions.shape[0]), 2):
        total += math.log(float(np.linalg.norm(positions[i] - positions[j])))
    return c * total


def acceleration(positions: np.ndarray, convention: str = "gradient") -> np.ndarray:
    c = _coupling(convention)
    if positions.shape[0] < 2:
        return np.zeros_like(positions)
    return -c * _interaction_field(positions[:, None, :])[:, 0, :]


def _min_distance(positions: np.ndarray) -> float:
    n = positions.shape[0]
    if n < 2:
        return math.inf
    iu, ju = np.triu_indices(n, k=1)
    d = positions[iu] - positions[ju]
    return float(np.min(np.hypot(d[:, 0], d[:, 1])))


def integrate_ode(
    initial_positions: np.ndarray,
    initial_velocities: np.ndarray,
    step: float,
    z_max: float,
    convention: str = "gradient",
) -> Trajectory:
    q = np.array(initial_positions, dtype=float).reshape(-1, 2)
    v = np.array(initial_velocities, dtype=float).reshape(-1, 2)
    if q.shape != v.shape:
        raise ValidationError("positions and velocities differ in shape")
    if not step > 0:
        raise ValidationError("step must be positive", details={"step": step})
    _coupling(convention)
    if _min_distance(q) < COLLISION_DISTANCE:
        raise CollisionError("initial positions collide", height=0.0)

    steps = int(round(z_max / step))
    zs = step * np.arange(steps + 1)
    qs = np.empty((steps + 1,) + q.shape)
    vs = np.empty_like(qs)
    qs[0], vs[0] = q, v

    a = acceleration(q, convention)
    for k in range(1, steps + 1):
        v_half = v + 0.5 * step * a
        q = q + step * v_half
        if _min_distance(q) < COLLISION_DISTANCE:
            raise CollisionError("filaments collide during integration", height=float(zs[k]))
        a = acceleration(q, convention)
        v = v_half + 0.5 * step * a
        qs[k], vs[k] = q, v

    return Trajectory(z=zs, positions=qs, velocities=vs, convention=convention)


def conserved_quantities(
    positions: np.ndarray,
    velocities: np.ndarray,
    convention: str = "gradient",
) -> Dict[str, object]:
    q = np.asarray(positions, dtype=float).reshape(-1, 2)
    v = np.asarray(velocities, dtype=float).reshape(-1, 2)
    energy = 0.5 * float(np.sum(v * v)) + potential(q, convention)
    momentum = v.sum(axis=0)
    angular = float(np.sum(q[:, 0] * v[:, 1] - q[:, 1] * v[:, 0]))
    return {"energy": energy, "momentum": momentum, "angular_momentum": angular}


def drift(trajectory: Trajectory) -> Dict[str, float]:
    """Peak deviation of each first integral from its initial value."""
    first = conserved_quantities(trajectory.positions[0], trajectory.velocities[0], trajectory.convention)
    peak = {"energy": 0.0, "momentum": 0.0, "angular_momentum": 0.0}
    for q, v in zip(trajectory.positions, trajectory.velocities):
        now = conserved_quantities(q, v, trajectory.convention)
        peak["energy"] = max(peak["energy"], abs(now["energy"] - first["energy"]))
        peak["momentum"] = max(
            peak["momentum"], float(np.max(np.abs(np.asarray(now["momentum"]) - np.asarray(first["momentum"]))))
        )
        peak["angular_momentum"] = max(
            peak["angular_momentum"], abs(now["angular_momentum"] - first["angular_momentum"])
        )
    return peak
