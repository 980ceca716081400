"""
Lab CLI - kör filamentexperimenten från en JSON-konfig.

    python -m cli.lab_cli --config exp.json --out out/ minimize
    python -m cli.lab_cli --config exp.json gamma-sweep --threads 4
    python -m cli.lab_cli --config exp.json constants
    python -m cli.lab_cli --config exp.json detect --field out/field.csv
    python -m cli.lab_cli --config exp.json plant

Exit codes: 0 ok, 1 config/validation, 2 solver, 3 resolution, 4 trend, 5 I/O.
"""
from __future__ import annotations

import argparse
import math
import sys
import time
import uuid
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from filaments.config_loader import ExperimentConfig, is_verbose, load_config, load_experiment_config, section
from filaments.domain_grid import DomainSpec, build_grid, r_star
from filaments.error_handling import (
    ConvergenceError,
    ResolutionError,
    ValidationError,
    run_cli_command,
)
from filaments.file_store import (
    load_configuration,
    load_field_2d,
    save_balls,
    save_configuration,
    save_field_2d,
    save_field_3d,
    save_green,
    save_measure,
    save_report,
    write_json,
)
from filaments.gamma_experiments import (
    SweepPolicy,
    check_trends,
    fit_gap_rate,
    gamma_sweep,
    h00_for,
    h00_grid,
    kappa_from,
    trend_columns,
)
from filaments.gl_fields import ComplexField3D, boundary_data, energy_2d, jacobian_plaquette, required_spacing, trial_slice
from filaments.reduced_model import (
    EndpointConstraint,
    FilamentConfiguration,
    el_residual,
    endpoint_constraint_from,
    local_min_diagnostic,
    minimize_g0,
    minimizer_window,
)
from filaments.renormalized_energy import _use_closed_form, difference_slope, gamma_constant, gamma_trace, solve_h_omega
from filaments.run_logger import diag, log_run, log_warning, set_verbose
from filaments.vortex_analysis import ball_construction, detect_vortices, sn_criterion


# Run-log extras: optional "solver" stats and "meta"
CommandResult = Dict[str, Any]


def _domain(exp: ExperimentConfig) -> DomainSpec:
    return DomainSpec.from_dict(exp.domain)


def _straight_guess(exp: ExperimentConfig) -> FilamentConfiguration:
    bottom = np.asarray(exp.bottom, dtype=float).reshape(-1, 2)
    top = np.asarray(exp.top or exp.bottom, dtype=float).reshape(-1, 2)
    t = np.linspace(0.0, 1.0, exp.z_nodes)
    pos = bottom[:, None, :] + (top - bottom)[:, None, :] * t[None, :, None]
    return FilamentConfiguration(pos, exp.height)


def _filament(exp: ExperimentConfig) -> FilamentConfiguration:
    """Minimizer file, inline positions or the straight interpolation of the endpoints."""
    if exp.filament_file:
        return load_configuration(exp.filament_file)
    inline = exp.raw.get("positions")
    if inline is not None:
        return FilamentConfiguration(np.asarray(inline, dtype=float), exp.height)
    if exp.bottom:
        return _straight_guess(exp)
    raise ValidationError("config needs filament_file, positions or bottom/top endpoints")


# ---- Commands -----------------------------------------------------------------------


def cmd_minimize(exp: ExperimentConfig, cfg: Dict[str, Any], out: Path, threads: int) -> CommandResult:
    solver = section(cfg, "solver")
    domain = _domain(exp)

    if exp.initial_guess:
        f0 = load_configuration(exp.initial_guess)
    elif exp.bottom:
        f0 = _straight_guess(exp)
    else:
        raise ValidationError("minimize needs bottom/top endpoints or an initial_guess file")
    constraint = (
        EndpointConstraint(np.asarray(exp.bottom, dtype=float), np.asarray(exp.top or exp.bottom, dtype=float))
        if exp.bottom
        else endpoint_constraint_from(f0)
    )

    window = minimizer_window(domain, f0.height, f0.n)
    if not window["satisfied"]:
        log_warning("lab_cli", "height exceeds twice the axis-to-boundary distance", **window)

    try:
        result = minimize_g0(
            f0,
            constraint,
            tolerance=exp.tolerance,
            max_iters=exp.max_iters,
            method=str(solver.get("g0_method", "newton")),
            armijo=float(solver.get("armijo", 1e-4)),
            backtrack=float(solver.get("backtrack_factor", 0.5)),
            seed=exp.seed,
        )
    except ConvergenceError as exc:
        if isinstance(exc.last_iterate, FilamentConfiguration):
            save_configuration(out / "minimizer_last.csv", exc.last_iterate)
        write_json(out / "diagnostics.json", {"message": str(exc), "details": exc.details})
        raise

    f = result.configuration
    save_configuration(out / "minimizer.csv", f)
    residual = el_residual(f, exp.convention)
    payload: Dict[str, Any] = {
        "G0": result.energy,
        "grad_norm": result.grad_norm,
        "iterations": result.iterations,
        "method": result.method,
        "convention": exp.convention,
        "el_residual_max": float(np.max(np.abs(residual))) if residual.size else 0.0,
        "min_interior_separation": f.min_interior_separation(),
        "window": window,
        "seed": exp.seed,
    }
    if f.n * (f.M - 1) * 2 <= 4000:
        payload["local_min"] = local_min_diagnostic(f)
    write_json(out / "energy.json", payload)
    print(f"[lab_cli] minimize: G0={result.energy:.10g} after {result.iterations} iterations")
    return {
        "solver": {"method": result.method, "iterations": result.iterations, "residual": result.grad_norm, "energy": result.energy},
        "meta": {"n": f.n, "M": f.M},
    }


def _policy(exp: ExperimentConfig, cfg: Dict[str, Any]) -> SweepPolicy:
    fields = section(cfg, "fields")
    grid = section(cfg, "grid")
    vortex = section(cfg, "vortex")
    return SweepPolicy(
        z_samples=exp.z_samples,
        points_per_eps=exp.points_per_eps,
        spacing=exp.spacing,
        core_mode=str(exp.raw.get("core_mode", "core_min")),
        phase_mode=str(fields.get("phase_mode", "auto")),
        separation_factor=float(fields.get("core_separation_factor", 4.0)),
        max_nodes_per_side=int(grid.get("max_nodes_per_side", 2048)),
        n_radii=int(vortex.get("sn_radii", 256)),
    )


def _gamma(exp: ExperimentConfig, cfg: Dict[str, Any]) -> Dict[str, Any]:
    radial = section(cfg, "radial")
    radius = float(section(cfg, "gamma").get("radius", 1.0))
    nodes = int(radial.get("nodes_per_eps", 32))
    trace = gamma_trace(exp.gamma_epsilons, radius=radius, nodes_per_eps=nodes)
    value = gamma_constant(exp.gamma_epsilons, radius=radius, nodes_per_eps=nodes, trace=trace)
    return {"gamma_estimate": value, "trace": trace, "difference_slope": difference_slope(trace)}


def cmd_gamma_sweep(
    exp: ExperimentConfig,
    cfg: Dict[str, Any],
    out: Path,
    threads: int,
    dump_fields: bool = False,
) -> CommandResult:
    f = _filament(exp)
    domain = _domain(exp)
    gamma = _gamma(exp, cfg)["gamma_estimate"]
    dumped: List[str] = []

    def dump(eps: float, u: ComplexField3D) -> None:
        dumped.append(str(save_field_3d(out / "fields" / f"eps_{eps:.6g}", u)))

    report = gamma_sweep(
        f,
        exp.epsilons,
        domain,
        _policy(exp, cfg),
        gamma=gamma,
        boundary_matched=exp.boundary_matched,
        seed=exp.seed,
        threads=threads,
        field_sink=dump if dump_fields else None,
    )
    report.meta["gap_rate"] = fit_gap_rate(report)
    save_report(out, report)
    meta = {
        "epsilons": report.epsilons,
        "elapsed_s": [r.elapsed_s for r in report.records],
        "failed": [r.epsilon for r in report.failed],
        "fields": dumped,
    }
    for r in report.records:
        state = "FAILED " + str(r.failure) if r.failure else f"gap={r.gap:.6f} flat={r.sliced_flat_norm:.4e}"
        print(f"[lab_cli] eps={r.epsilon:g}: {state}")
    if report.failed:
        raise ResolutionError(
            f"{len(report.failed)} epsilon(s) could not be resolved",
            details={"failed": [r.epsilon for r in report.failed]},
        )
    check_trends(report, trend_columns(report))
    return {"meta": meta}


def cmd_constants(exp: ExperimentConfig, cfg: Dict[str, Any], out: Path, threads: int) -> CommandResult:
    domain = _domain(exp)
    g = _gamma(exp, cfg)
    phase_mode = str(section(cfg, "fields").get("phase_mode", "auto"))
    H00 = h00_for(domain, phase_mode)
    green_file: Optional[str] = None
    if not _use_closed_form(domain, phase_mode):
        green_file = str(save_green(out / "green_h00.csv", solve_h_omega(domain, h00_grid(domain), (0.0, 0.0))))
    payload = {
        "gamma_estimate": g["gamma_estimate"],
        "H00": H00,
        "kappa_n": kappa_from(exp.n, exp.height, g["gamma_estimate"], H00),
        "n": exp.n,
        "height": exp.height,
        "domain": domain.to_dict(),
        "trace": g["trace"],
        "difference_slope": g["difference_slope"],
        "green_file": green_file,
    }
    write_json(out / "constants.json", payload)
    print(f"[lab_cli] constants: gamma={g['gamma_estimate']:.8f} H00={H00:.3e} kappa_n={payload['kappa_n']:.8f}")
    return {"meta": {"gamma": g["gamma_estimate"], "H00": H00}}


def cmd_detect(
    exp: ExperimentConfig,
    cfg: Dict[str, Any],
    out: Path,
    threads: int,
    field_path: Optional[str] = None,
) -> CommandResult:
    path = field_path or exp.field_file
    if not path:
        raise ValidationError("detect needs --field or field_file in the config")
    w = load_field_2d(path)
    vortex = section(cfg, "vortex")
    pq = jacobian_plaquette(w)
    atoms = detect_vortices(w, plaquettes=pq)
    target = exp.target_total_radius or 0.25 * r_star(w.grid.domain)
    balls = ball_construction(
        w,
        target,
        c=float(vortex.get("c_modulus", 4.0)),
        c0=float(vortex.get("c0_cap", 0.25)),
        threshold=float(vortex.get("seed_threshold", 0.5)),
        plaquettes=pq,
    )
    sn = sn_criterion(w, exp.n, n_radii=int(vortex.get("sn_radii", 256)), plaquettes=pq)
    save_measure(out / "atoms.csv", atoms)
    save_balls(out / "balls.json", balls, target)
    write_json(
        out / "detect_summary.json",
        {
            "atoms": len(atoms),
            "total_weight": atoms.total_mass,
            "energy_2d": energy_2d(w),
            "sn_measure": sn.measure,
            "sn_is_good": sn.is_good,
            "n": exp.n,
        },
    )
    print(f"[lab_cli] detect: {len(atoms)} atoms, certificate {balls.lower_bound:.6g} <= {balls.covered_energy:.6g}")
    return {"meta": {"atoms": len(atoms), "balls": len(balls.balls)}}


def cmd_plant(exp: ExperimentConfig, cfg: Dict[str, Any], out: Path, threads: int) -> CommandResult:
    if exp.epsilon is None:
        raise ValidationError("plant needs epsilon in the config")
    domain = _domain(exp)
    pts = np.asarray(exp.vortices, dtype=float).reshape(-1, 2)
    grid_cfg = section(cfg, "grid")
    fields = section(cfg, "fields")
    sep = math.inf
    if pts.shape[0] > 1:
        d = np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
        d[np.diag_indices(pts.shape[0])] = math.inf
        sep = float(d.min())
    spacing = exp.spacing or required_spacing(sep if sep > 0 else math.inf, exp.epsilon, exp.points_per_eps)
    grid = build_grid(domain, spacing, min_nodes_across=int(grid_cfg.get("min_nodes_across", 8)))
    core_mode = str(exp.raw.get("core_mode", "core_min"))
    phase_mode = str(fields.get("phase_mode", "auto"))
    if core_mode == "zeta":
        w = boundary_data(domain, grid, pts, exp.epsilon, phase_mode=phase_mode)
    else:
        w = trial_slice(
            domain, grid, pts, exp.epsilon, core_mode,
            phase_mode=phase_mode, separation_factor=float(fields.get("core_separation_factor", 4.0)),
        )
    save_field_2d(out / "field.csv", w, meta={"vortices": pts.tolist(), "core_mode": core_mode})
    print(f"[lab_cli] plant: {pts.shape[0]} vortices on a {grid.shape[0]}x{grid.shape[1]} grid")
    return {"meta": {"vortices": pts.shape[0], "spacing": grid.spacing}}


COMMANDS: Dict[str, Callable[..., CommandResult]] = {
    "minimize": cmd_minimize,
    "gamma-sweep": cmd_gamma_sweep,
    "constants": cmd_constants,
    "detect": cmd_detect,
    "plant": cmd_plant,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Filament lab - reducerad modell, Γ-svep och virvelanalys")
    parser.add_argument("--config", default=None, help="Experimentkonfig (JSON)")
    parser.add_argument("--out", default=None, help="Utkatalog (default: output_dir i konfigen)")
    parser.add_argument("--threads", type=int, default=1, help="Antal trådar för per-skiva-arbete")
    parser.add_argument("--seed", type=int, default=None, help="Frö för all slump (överstyr konfigen)")
    parser.add_argument("--verbose", action="store_true", help="Visa diagnostik")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("minimize", help="Minimera G0 med fixa ändpunkter")
    sweep = sub.add_parser("gamma-sweep", help="Γ-svep över eps-listan")
    sweep.add_argument("--dump-fields", action="store_true", help="Spara varje återhämtningsfält under <out>/fields/")
    sub.add_parser("constants", help="γ, H00 och kappa_n")
    detect = sub.add_parser("detect", help="Virveldetektion och virvelbollar")
    detect.add_argument("--field", default=None, help="Fält-CSV (manifest bredvid)")
    sub.add_parser("plant", help="Skriv ett fält med planterade virvlar")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    run_id = uuid.uuid4().hex[:12]
    cfg = load_config()
    set_verbose(args.verbose or is_verbose(cfg))
    if args.threads < 1:
        print("[lab_cli] --threads must be >= 1", file=sys.stderr)
        return 1

    state: Dict[str, Any] = {"out": args.out, "exp": None, "extras": {}}

    def body() -> int:
        exp = load_experiment_config(args.config, cfg, overrides={"seed": args.seed, "output_dir": args.out})
        state["exp"] = exp
        out = Path(exp.output_dir)
        state["out"] = str(out)
        out.mkdir(parents=True, exist_ok=True)
        diag("lab_cli", f"{args.command} run_id={run_id} out={out} threads={args.threads}")
        fn = COMMANDS[args.command]
        if args.command == "detect":
            state["extras"] = fn(exp, cfg, out, args.threads, field_path=args.field)
        elif args.command == "gamma-sweep":
            state["extras"] = fn(exp, cfg, out, args.threads, dump_fields=args.dump_fields)
        else:
            state["extras"] = fn(exp, cfg, out, args.threads)
        return 0

    started = time.perf_counter()
    failure: Dict[str, BaseException] = {}
    code = run_cli_command(
        body,
        run_id=run_id,
        out_dir=state["out"] or str(section(cfg, "output").get("directory", "out")),
        on_error=lambda exc: failure.setdefault("exc", exc),
    )
    extras = state["extras"] or {}
    exp = state["exp"]
    log_run(
        command=args.command,
        run_id=run_id,
        seed=exp.seed if exp is not None else args.seed,
        threads=args.threads,
        latency_ms=(time.perf_counter() - started) * 1000.0,
        success=code == 0,
        error=failure.get("exc"),
        solver_stats=extras.get("solver"),
        meta=extras.get("meta"),
    )
    return code


if __name__ == "__main__":
    sys.exit(main())
