"""
Acceptance gates for the filament lab.

Each gate prints [PASS]/[FAIL] with the measured value and its threshold.
Fails the build (exit 1) if any selected gate fails.

Usage:
    python -m evaluation.acceptance_eval [--only 1,4,8] [--out out/acceptance.json] [--threads 4]
"""
from __future__ import annotations

import argparse
import itertools
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from filaments.config_loader import load_config, section
from filaments.domain_grid import DomainSpec, build_grid, r_star
from filaments.error_handling import LabError, TrendError
from filaments.file_store import write_json
from filaments.filament_ode import drift, integrate_ode
from filaments.gamma_experiments import SweepPolicy, check_trends, gamma_sweep, trend_columns
from filaments.gl_fields import ComplexField2D, energy_2d, jacobian_plaquette, trial_slice, vorticity_in_disk
from filaments.reduced_model import (
    FilamentConfiguration,
    LabeledPointSet,
    dx_brute_force,
    dx_distance,
    el_residual,
    endpoint_constraint_from,
    fdelta_separation_bound,
    g0_energy,
    g0_gradient,
    minimize_g0,
    regularize_fdelta,
    shooting_oracle,
)
from filaments.renormalized_energy import (
    default_gamma,
    difference_slope,
    gamma_trace,
    h_omega_closed_form,
    solve_h_omega,
    w_omega,
)
from filaments.vortex_analysis import (
    AtomicMeasure,
    _merge_touching,
    ball_construction,
    flat_norm_0,
    flat_norm_dual,
    sn_criterion,
)

DEFAULT_OUT = Path("out/acceptance.json")
UNIT_DISK = DomainSpec.disk(1.0)

# n=2 recovery fields shared by gates 6 and 7
PAIR_POINTS = [[0.25, 0.0], [-0.25, 0.0]]
PAIR_EPSILONS = (5e-2, 2.5e-2, 1.25e-2)


# --------- Datamodeller --------- #

@dataclass
class GateResult:
    gate: int
    name: str
    passed: bool
    value: Any
    threshold: str
    elapsed_s: float = 0.0
    details: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None


GateOutcome = Tuple[bool, Any, str, Dict[str, Any]]


# --------- Shared fixtures --------- #

@lru_cache(maxsize=None)
def symmetric_minimizer(M: int = 200, a: float = 0.5, height: float = 1.0):
    pos = np.zeros((2, M + 1, 2))
    pos[0, :, 0] = a
    pos[1, :, 0] = -a
    f0 = FilamentConfiguration(pos, height)
    return minimize_g0(f0, endpoint_constraint_from(f0), tolerance=1e-7 * math.pi * f0.dz)


def core_separation() -> float:
    return float(section(load_config(), "fields").get("core_separation_factor", 4.0))


@lru_cache(maxsize=None)
def pair_field(eps: float) -> ComplexField2D:
    grid = build_grid(UNIT_DISK, eps / 4.0)
    return trial_slice(UNIT_DISK, grid, PAIR_POINTS, eps, separation_factor=core_separation())


def random_configuration(rng: np.random.Generator, n: int, M: int) -> FilamentConfiguration:
    angles = 2.0 * math.pi * np.arange(n) / n
    base = 0.5 * np.column_stack([np.cos(angles), np.sin(angles)])
    return FilamentConfiguration(base[:, None, :] + 0.05 * rng.standard_normal((n, M + 1, 2)), 1.0)


# --------- Gates --------- #

def gate_gamma_stability(threads: int) -> GateOutcome:
    trace = gamma_trace([1e-2, 5e-3, 2.5e-3])
    slope = difference_slope(trace)
    return abs(slope - 2.0) <= 0.4, slope, "|slope - 2| <= 0.4", {"trace": trace}


def gate_green_function(threads: int) -> GateOutcome:
    grid = build_grid(UNIT_DISK, 1.0 / 128)
    pts = grid.interior_points()
    errors = {}
    for y in [(0.0, 0.0), (0.4, 0.0), (0.3, -0.45), (-0.6, 0.0)]:
        data = solve_h_omega(UNIT_DISK, grid, y)
        exact = h_omega_closed_form(1.0, pts, y)
        errors[str(y)] = float(np.max(np.abs(data.values[grid.mask] - exact)))
    worst = max(errors.values())
    return worst <= 1e-3, worst, "max error <= 1e-3", {"per_source": errors}


def gate_w_spot_value(threads: int) -> GateOutcome:
    value = w_omega(UNIT_DISK, [[0.5, 0.0], [-0.5, 0.0]])
    expected = 2.0 * math.pi * math.log(15.0 / 16.0)
    err = abs(value - expected)
    return err <= 1e-3, value, f"within 1e-3 of {expected:.8f}", {"error": err}


def gate_reduced_bvp(threads: int) -> GateOutcome:
    result = symmetric_minimizer()
    f = result.configuration
    x = shooting_oracle(0.5, f.height, f.M)
    sup = float(max(np.max(np.abs(f.positions[0, :, 0] - x)), np.max(np.abs(f.positions[1, :, 0] + x))))
    residual = float(np.max(np.abs(el_residual(f, "gradient"))))

    rng = np.random.default_rng(7)
    worst_fd = 0.0
    h = 1e-6
    for _ in range(20):
        g_cfg = random_configuration(rng, int(rng.integers(1, 4)), 6)
        g = g0_gradient(g_cfg)
        fd = np.zeros_like(g)
        for i, k, c in itertools.product(range(g_cfg.n), range(1, g_cfg.M), range(2)):
            up = g_cfg.positions.copy()
            dn = g_cfg.positions.copy()
            up[i, k, c] += h
            dn[i, k, c] -= h
            fd[i, k, c] = (g0_energy(g_cfg.with_positions(up)) - g0_energy(g_cfg.with_positions(dn))) / (2 * h)
        worst_fd = max(worst_fd, float(np.linalg.norm(g - fd) / max(1.0, np.linalg.norm(fd))))

    passed = sup <= 1e-4 and residual <= 1e-6 and worst_fd <= 1e-6
    return passed, sup, "sup <= 1e-4, EL <= 1e-6, FD <= 1e-6", {
        "el_residual": residual,
        "fd_relative_error": worst_fd,
        "iterations": result.iterations,
    }


def _ode_cases() -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    pair_q = np.array([[1.0, 0.0], [-1.0, 0.0]])
    pair_v = np.array([[0.0, 0.8], [0.0, -0.8]])
    angles = 2.0 * math.pi * np.arange(3) / 3.0
    tri_q = np.column_stack([np.cos(angles), np.sin(angles)])
    # 0.8 of the rigid-rotation speed sqrt(2)
    tri_v = 0.8 * math.sqrt(2.0) * np.column_stack([-np.sin(angles), np.cos(angles)])
    return {"n=2": (pair_q, pair_v), "n=3": (tri_q, tri_v)}


def gate_ode_conservation(threads: int) -> GateOutcome:
    details: Dict[str, Any] = {}
    worst = 0.0
    ratios_ok = True
    for name, (q0, v0) in _ode_cases().items():
        fine = drift(integrate_ode(q0, v0, 1e-3, 10.0))
        coarse = drift(integrate_ode(q0, v0, 2e-3, 10.0))
        worst = max(worst, *fine.values())
        ratio = coarse["energy"] / fine["energy"] if fine["energy"] > 0 else math.inf
        ratios_ok = ratios_ok and 3.0 <= ratio <= 5.0
        details[name] = {"drift": fine, "energy_ratio": ratio}
    return worst <= 1e-6 and ratios_ok, worst, "drift <= 1e-6, halving ratio in [3, 5]", details


def gate_recovery_energy(threads: int) -> GateOutcome:
    gamma = default_gamma()
    W = w_omega(UNIT_DISK, PAIR_POINTS)
    gaps = []
    for eps in PAIR_EPSILONS:
        predicted = 2.0 * (math.pi * abs(math.log(eps)) + gamma) + W
        gaps.append(abs(energy_2d(pair_field(eps)) - predicted))
    monotone = all(b < a for a, b in zip(gaps, gaps[1:]))
    return monotone and gaps[-1] <= 0.1, gaps[-1], "decreasing, final <= 0.1", {"discrepancies": gaps}


def gate_jacobian_quantization(threads: int) -> GateOutcome:
    rs = r_star(UNIT_DISK)
    radii = np.linspace(0.5 * rs, rs, 12)[1:-1]
    worst = 0.0
    all_good = True
    for eps in PAIR_EPSILONS:
        w = pair_field(eps)
        pq = jacobian_plaquette(w)
        for s in radii:
            worst = max(worst, abs(vorticity_in_disk(w, float(s), plaquettes=pq) - 2.0 * math.pi))
        all_good = all_good and sn_criterion(w, 2, plaquettes=pq).is_good
    return worst <= 1e-2 and all_good, worst, "|vorticity - 2π| <= 1e-2 and is_good", {"sn_good": all_good}


def gate_flat_norm(threads: int) -> GateOutcome:
    examples = [
        (AtomicMeasure([[0.1, 0.2]], [math.pi]), AtomicMeasure([[0.1, 0.2]], [math.pi]), 0.0),
        (AtomicMeasure([[0.0, 0.0]], [math.pi]), AtomicMeasure([[0.1, 0.0]], [math.pi]), 0.1 * math.pi),
        (AtomicMeasure([[0.0, 0.0]], [1.0]), AtomicMeasure.empty(), 1.0),
    ]
    example_err = max(abs(flat_norm_0(mu, nu) - want) for mu, nu, want in examples)

    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        a = int(rng.integers(1, 4))
        b = int(rng.integers(0, 4))
        mu = AtomicMeasure(rng.integers(-8, 9, size=(a, 2)) / 4.0, rng.choice([-2.0, -1.0, 1.0, 2.0], size=a))
        nu = (
            AtomicMeasure(rng.integers(-8, 9, size=(b, 2)) / 4.0, rng.choice([-2.0, -1.0, 1.0, 2.0], size=b))
            if b
            else AtomicMeasure.empty()
        )
        worst = max(worst, abs(flat_norm_0(mu, nu) - flat_norm_dual(mu, nu)))
    return worst <= 1e-7 and example_err <= 1e-7, worst, "LP mismatch and example error <= 1e-7", {
        "example_error": example_err,
    }


def gate_gamma_sweep(threads: int) -> GateOutcome:
    cfg = load_config()
    sweep = section(cfg, "sweep")
    f = symmetric_minimizer(M=64).configuration
    policy = SweepPolicy(
        z_samples=int(sweep.get("z_samples", 17)),
        points_per_eps=float(sweep.get("points_per_eps", 4)),
        separation_factor=core_separation(),
    )
    report = gamma_sweep(f, sweep.get("epsilons") or [5e-2, 2.5e-2, 1.25e-2], UNIT_DISK, policy, threads=threads)
    residual = max(r.identity_residual for r in report.succeeded) if report.succeeded else math.inf
    try:
        trends = check_trends(report, trend_columns(report))
        trend_ok = True
    except TrendError as exc:
        trends = exc.details
        trend_ok = False
    details = {"gaps": [r.gap for r in report.records], "flat": [r.sliced_flat_norm for r in report.records], "trends": trends}
    return trend_ok and not report.failed and residual <= 1e-8, residual, "trends decrease, identity <= 1e-8", details


def gate_vortex_balls(threads: int) -> GateOutcome:
    checks = []
    for pts, eps, spacing, target, degree in [
        ([[0.055, 0.03]], 0.05, 0.0125, 0.25, 1),
        ([[0.15, 0.02], [-0.15, -0.02]], 0.01, 1.0 / 128, 0.5, 2),
    ]:
        w = trial_slice(UNIT_DISK, build_grid(UNIT_DISK, spacing), pts, eps, separation_factor=core_separation())
        res = ball_construction(w, target)
        checks.append({
            "degree": res.balls.total_degree,
            "expected_degree": degree,
            "lower_bound": res.lower_bound,
            "covered_energy": res.covered_energy,
        })
    certificate_ok = all(c["degree"] == c["expected_degree"] and c["lower_bound"] <= 1.02 * c["covered_energy"] for c in checks)

    rng = np.random.default_rng(9)
    merge_ok = True
    for _ in range(30):
        centers = [rng.uniform(-1, 1, 2) for _ in range(6)]
        radii = [float(r) for r in rng.uniform(0.05, 0.5, 6)]
        degrees = [int(d) for d in rng.integers(-1, 2, 6)]
        before = sum(radii)
        _merge_touching(centers, radii, degrees, [False] * 6, None)
        merge_ok = merge_ok and sum(radii) <= before + 1e-12
    return certificate_ok and merge_ok, checks, "degrees exact, certificate <= 1.02·energy, Σr never grows", {
        "merge_ok": merge_ok,
    }


def _random_paths(rng: np.random.Generator, colliding: bool) -> FilamentConfiguration:
    n, M = 3, 60
    z = np.linspace(0.0, 1.0, M + 1)
    pos = np.zeros((n, M + 1, 2))
    for i in range(n):
        start = rng.uniform(-0.5, 0.5, 2)
        end = rng.uniform(-0.5, 0.5, 2)
        pos[i] = start[None, :] + (end - start)[None, :] * z[:, None]
    if colliding:
        pos[1, 0] = pos[0, 0]
    return FilamentConfiguration(pos, 1.0)


def gate_fdelta(threads: int) -> GateOutcome:
    delta = 1e-4
    rng = np.random.default_rng(42)
    violations: List[str] = []
    for trial in range(20):
        f = _random_paths(rng, colliding=trial % 2 == 1)
        g = regularize_fdelta(f, delta, rng=rng)
        if not np.array_equal(g.positions[:, [0, -1]], f.positions[:, [0, -1]]):
            violations.append(f"{trial}: endpoints moved")
        mid = (f.z >= math.sqrt(delta)) & (f.z <= f.height - math.sqrt(delta))
        shift = g.positions[:, mid] - f.positions[:, mid]
        if np.any(np.hypot(shift[..., 0], shift[..., 1]) > delta ** (1 / 3) + 1e-15):
            violations.append(f"{trial}: interior shift")
        if np.max(np.hypot(*(g.positions - f.positions).transpose(2, 0, 1))) > delta ** 0.25:
            violations.append(f"{trial}: sup shift")
        bound = fdelta_separation_bound(f.z[1:-1], f.height, delta)
        for i, j in itertools.combinations(range(f.n), 2):
            d = np.hypot(*(g.positions[i, 1:-1] - g.positions[j, 1:-1]).T)
            if np.any(d < bound * (1 - 1e-12)):
                violations.append(f"{trial}: separation {i},{j}")

    M = 200
    z = np.linspace(0.0, 1.0, M + 1)
    pos = np.zeros((2, M + 1, 2))
    pos[0, :, 0] = 0.5 + 20.0 * z
    pos[1, :, 0] = -0.5 - 20.0 * z
    f = FilamentConfiguration(pos, 1.0)
    rel = abs(g0_energy(regularize_fdelta(f, delta, seed=0)) - g0_energy(f)) / abs(g0_energy(f))
    return not violations and rel <= 0.01, rel, "four properties hold, energy within 1%", {"violations": violations}


def gate_dx_distance(threads: int) -> GateOutcome:
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 7))
        p = LabeledPointSet(rng.integers(-8, 9, size=(n, 2)) / 4.0)
        q = LabeledPointSet(rng.integers(-8, 9, size=(n, 2)) / 4.0)
        worst = max(worst, abs(dx_distance(p, q) - dx_brute_force(p, q)))
    return worst <= 1e-12, worst, "|assignment - brute force| <= 1e-12", {}


GATES: Dict[int, Tuple[str, Callable[[int], GateOutcome]]] = {
    1: ("gamma-constant stability", gate_gamma_stability),
    2: ("disk Green's function", gate_green_function),
    3: ("W spot value", gate_w_spot_value),
    4: ("reduced BVP", gate_reduced_bvp),
    5: ("ODE conservation", gate_ode_conservation),
    6: ("2D recovery energy", gate_recovery_energy),
    7: ("Jacobian quantization", gate_jacobian_quantization),
    8: ("flat norm oracle", gate_flat_norm),
    9: ("gamma-sweep trend", gate_gamma_sweep),
    10: ("vortex balls", gate_vortex_balls),
    11: ("f-delta regularization", gate_fdelta),
    12: ("quotient distance", gate_dx_distance),
}


def run_gate(number: int, threads: int) -> GateResult:
    name, fn = GATES[number]
    started = time.perf_counter()
    try:
        passed, value, threshold, details = fn(threads)
        error = None
    except LabError as exc:
        passed, value, threshold, details = False, None, "-", dict(exc.details)
        error = f"{exc.error_code}: {exc}"
    return GateResult(
        gate=number,
        name=name,
        passed=bool(passed),
        value=value,
        threshold=threshold,
        elapsed_s=time.perf_counter() - started,
        details=details,
        error=error,
    )


def _parse_only(raw: Optional[str]) -> List[int]:
    if not raw:
        return sorted(GATES)
    chosen = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        number = int(part)
        if number not in GATES:
            raise SystemExit(f"unknown gate {number}; choose from {sorted(GATES)}")
        chosen.append(number)
    return sorted(set(chosen))


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Run the filament lab acceptance gates.")
    parser.add_argument("--only", type=str, default=None, help="Comma-separated gate numbers (default: all)")
    parser.add_argument("--out", type=str, default=str(DEFAULT_OUT), help=f"JSON summary (default: {DEFAULT_OUT})")
    parser.add_argument("--threads", type=int, default=1, help="Threads for per-slice work")
    args = parser.parse_args(argv)

    results = []
    for number in _parse_only(args.only):
        res = run_gate(number, args.threads)
        results.append(res)
        tag = "[PASS]" if res.passed else "[FAIL]"
        shown = f"{res.value:.6g}" if isinstance(res.value, float) else res.value
        print(f"{tag} {res.gate:>2} {res.name}: {shown} (threshold: {res.threshold}, {res.elapsed_s:.1f}s)")
        if res.error:
            print(f"       {res.error}")

    failed = [r.gate for r in results if not r.passed]
    write_json(args.out, {"passed": not failed, "failed": failed, "gates": [asdict(r) for r in results]})
    print(f"\n[acceptance] {len(results) - len(failed)}/{len(results)} gates passed, summary in {args.out}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
