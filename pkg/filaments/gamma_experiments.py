"""
ε-sweeps of the renormalized 3D energy against the reduced energy.

G_ε = F_ε − [nπL|log ε| + πn(n−1)L|log h_ε| + κ_n], the per-slice excess ξ_ε
and the ExpansionReport that gamma-sweep writes.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from filaments.domain_grid import CylinderSpec, DomainSpec, Grid2D, build_grid
from filaments.error_handling import ResolutionError, TrendError, ValidationError
from filaments.gl_fields import (
    ComplexField3D,
    Energy3D,
    energy_3d,
    h_eps,
    recovery_field,
    recovery_field_with_boundary,
)
from filaments.reduced_model import FilamentConfiguration, g0_energy
from filaments.renormalized_energy import _use_closed_form, default_gamma, h00
from filaments.run_logger import diag
from filaments.vortex_analysis import detect_slices, good_height_fraction, sliced_flat_norm

__all__ = [
    "ExpansionReport",
    "SweepPolicy",
    "SweepRecord",
    "check_trends",
    "fit_gap_rate",
    "g_eps",
    "gamma_sweep",
    "h00_for",
    "h00_grid",
    "kappa_from",
    "h_eps",
    "trend_columns",
    "xi_eps_profile",
]


def h00_grid(domain: DomainSpec) -> Grid2D:
    """Grid used for H_ω(0,0) off the disk: spacing min half-width/128."""
    hx, hy = domain.half_extent
    return build_grid(domain, min(hx, hy) / 128.0)


def h00_for(domain: DomainSpec, mode: str = "auto") -> float:
    """H_ω(0,0), closed form on disks and a grid solve elsewhere."""
    if _use_closed_form(domain, mode):
        return h00(domain, mode=mode)
    return h00(domain, grid=h00_grid(domain), mode="grid")


def kappa_from(n: int, height: float, gamma: float, H00: float) -> float:
    """κ_n from precomputed γ and H_ω(0,0)."""
    return -math.pi * n * n * height * H00 + n * height * gamma


def divergent_terms(n: int, eps: float, height: float) -> Dict[str, float]:
    return {
        "log_eps": n * math.pi * height * abs(math.log(eps)),
        "log_h": math.pi * n * (n - 1) * height * abs(math.log(h_eps(eps))),
    }


def g_eps(
    u: ComplexField3D,
    n: int,
    *,
    gamma: Optional[float] = None,
    H00: Optional[float] = None,
    energy: Optional[Energy3D] = None,
    threads: int = 1,
) -> float:
    """F_ε(u) minus the divergent part and κ_n."""
    L = u.cylinder.height
    en = energy if energy is not None else energy_3d(u, threads=threads)
    if n == 0:
        return en.total
    gamma = default_gamma() if gamma is None else gamma
    H00 = h00_for(u.cylinder.domain) if H00 is None else H00
    div = divergent_terms(n, u.eps, L)
    return en.total - (div["log_eps"] + div["log_h"] + kappa_from(n, L, gamma, H00))


def xi_eps_profile(
    u: ComplexField3D,
    n: int,
    *,
    gamma: Optional[float] = None,
    H00: Optional[float] = None,
    energy: Optional[Energy3D] = None,
    threads: int = 1,
) -> np.ndarray:
    """ξ_ε(z) = ∫_ω e_ε^{2d}(·,z) − [n(π|log ε| + γ) + n(n−1)π|log h_ε| − n²πH_ω(0,0)]."""
    en = energy if energy is not None else energy_3d(u, threads=threads)
    if n == 0:
        return en.slice_energy.copy()
    gamma = default_gamma() if gamma is None else gamma
    H00 = h00_for(u.cylinder.domain) if H00 is None else H00
    eps = u.eps
    per_slice = (
        n * (math.pi * abs(math.log(eps)) + gamma)
        + n * (n - 1) * math.pi * abs(math.log(h_eps(eps)))
        - n * n * math.pi * H00
    )
    return en.slice_energy - per_slice


# ---- Sweep -----------------------------------------------------------------------------------


@dataclass
class SweepPolicy:
    z_samples: int = 17
    points_per_eps: float = 4.0
    spacing: Optional[float] = None
    core_mode: str = "core_min"
    phase_mode: str = "auto"
    separation_factor: float = 4.0
    max_nodes_per_side: int = 2048
    n_radii: int = 256


@dataclass
class SweepRecord:
    epsilon: float
    h_eps: float
    spacing: Optional[float] = None
    F: Optional[float] = None
    G: Optional[float] = None
    divergent_log_eps: Optional[float] = None
    divergent_log_h: Optional[float] = None
    kappa_n: Optional[float] = None
    g0: Optional[float] = None
    gap: Optional[float] = None
    abs_gap: Optional[float] = None
    sliced_flat_norm: Optional[float] = None
    z_kinetic: Optional[float] = None
    xi_integral: Optional[float] = None
    identity_residual: Optional[float] = None
    good_height_fraction: Optional[float] = None
    elapsed_s: Optional[float] = None
    failure: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.failure is None


CSV_COLUMNS = [
    "epsilon",
    "h_eps",
    "spacing",
    "F",
    "G",
    "divergent_log_eps",
    "divergent_log_h",
    "kappa_n",
    "g0",
    "gap",
    "abs_gap",
    "sliced_flat_norm",
    "z_kinetic",
    "xi_integral",
    "identity_residual",
    "good_height_fraction",
    "failure",
]

# Wall-clock fields go to the run log only, so reruns write identical files
_VOLATILE = ("elapsed_s",)


@dataclass
class ExpansionReport:
    n: int
    height: float
    domain: Dict[str, Any]
    gamma: float
    H00: float
    records: List[SweepRecord] = field(default_factory=list)
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def epsilons(self) -> List[float]:
        return [r.epsilon for r in self.records]

    @property
    def succeeded(self) -> List[SweepRecord]:
        return [r for r in self.records if r.ok]

    @property
    def failed(self) -> List[SweepRecord]:
        return [r for r in self.records if not r.ok]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "height": self.height,
            "domain": self.domain,
            "gamma": self.gamma,
            "H00": self.H00,
            "epsilons": self.epsilons,
            "records": [
                {k: v for k, v in asdict(r).items() if k not in _VOLATILE} for r in self.records
            ],
            "meta": self.meta,
        }

    def rows(self) -> List[Dict[str, Any]]:
        return [{c: getattr(r, c) for c in CSV_COLUMNS} for r in self.records]


def _sweep_one(
    f: FilamentConfiguration,
    eps: float,
    domain: DomainSpec,
    policy: SweepPolicy,
    *,
    gamma: float,
    H00: float,
    g0: float,
    boundary_matched: bool,
    seed: int,
    threads: int,
    field_sink: Optional[Callable[[float, ComplexField3D], None]] = None,
) -> SweepRecord:
    started = time.perf_counter()
    record = SweepRecord(epsilon=eps, h_eps=h_eps(eps))
    cylinder = CylinderSpec(domain, f.height, policy.z_samples)
    try:
        if boundary_matched:
            u = recovery_field_with_boundary(
                f, eps, cylinder,
                seed=seed, spacing=policy.spacing, points_per_eps=policy.points_per_eps,
                phase_mode=policy.phase_mode, max_nodes_per_side=policy.max_nodes_per_side, threads=threads,
            )
        else:
            u = recovery_field(
                f, eps, cylinder,
                spacing=policy.spacing, points_per_eps=policy.points_per_eps, core_mode=policy.core_mode,
                phase_mode=policy.phase_mode, separation_factor=policy.separation_factor,
                max_nodes_per_side=policy.max_nodes_per_side, threads=threads,
            )
    except ResolutionError as exc:
        record.failure = f"{exc.error_code}: {exc}"
        record.elapsed_s = time.perf_counter() - started
        diag("gamma_experiments", f"eps={eps:g} failed: {exc}")
        return record

    if field_sink is not None:
        field_sink(eps, u)

    n = f.n
    en = energy_3d(u, threads=threads)
    div = divergent_terms(n, eps, f.height)
    kappa = kappa_from(n, f.height, gamma, H00)
    G = g_eps(u, n, gamma=gamma, H00=H00, energy=en)
    xi = xi_eps_profile(u, n, gamma=gamma, H00=H00, energy=en)
    xi_int = float(trapezoid(xi, u.z))
    slices = detect_slices(u, threads=threads)

    record.spacing = u.grid.spacing
    record.F = en.total
    record.G = G
    record.divergent_log_eps = div["log_eps"]
    record.divergent_log_h = div["log_h"]
    record.kappa_n = kappa
    record.g0 = g0
    record.gap = G - g0
    record.abs_gap = abs(record.gap)
    record.sliced_flat_norm = sliced_flat_norm(slices, f, z=u.z, scale=record.h_eps)
    record.z_kinetic = en.z_kinetic
    record.xi_integral = xi_int
    record.identity_residual = abs(G - (xi_int + en.z_kinetic)) / max(1.0, abs(G))
    record.good_height_fraction = good_height_fraction(u, n, n_radii=policy.n_radii, threads=threads)
    record.elapsed_s = time.perf_counter() - started
    diag("gamma_experiments", f"eps={eps:g} G={G:.6f} gap={record.gap:.6f} flat={record.sliced_flat_norm:.4e}")
    return record


def gamma_sweep(
    f: FilamentConfiguration,
    epsilons: Sequence[float],
    domain: DomainSpec,
    policy: Optional[SweepPolicy] = None,
    *,
    gamma: Optional[float] = None,
    boundary_matched: bool = False,
    seed: int = 0,
    threads: int = 1,
    field_sink: Optional[Callable[[float, ComplexField3D], None]] = None,
) -> ExpansionReport:
    """
    Recovery fields for each ε (largest first), their G_ε and the gap to G₀(f).
    A ResolutionError at one ε becomes a failure marker on that record.
    field_sink, when given, receives (ε, field) for every resolved ε.
    """
    if not f.is_collision_free():
        raise ValidationError("gamma_sweep needs a collision-free configuration")
    eps_list = sorted({float(e) for e in epsilons}, reverse=True)
    if not eps_list:
        raise ValidationError("empty epsilon list")
    policy = policy or SweepPolicy()
    gamma = default_gamma() if gamma is None else float(gamma)
    H00 = h00_for(domain, policy.phase_mode)
    g0 = g0_energy(f)

    report = ExpansionReport(
        n=f.n,
        height=f.height,
        domain=domain.to_dict(),
        gamma=gamma,
        H00=H00,
        meta={"policy": asdict(policy), "boundary_matched": boundary_matched, "seed": seed},
    )
    for eps in eps_list:
        report.records.append(
            _sweep_one(
                f, eps, domain, policy,
                gamma=gamma, H00=H00, g0=g0, boundary_matched=boundary_matched, seed=seed, threads=threads,
                field_sink=field_sink,
            )
        )
    return report


def fit_gap_rate(report: ExpansionReport) -> float:
    """Least-squares slope of log|gap| against log h_ε; nan with fewer than two usable records."""
    recs = [r for r in report.succeeded if r.gap not in (None, 0.0)]
    if len(recs) < 2:
        return math.nan
    x = np.log([r.h_eps for r in recs])
    y = np.log([abs(r.gap) for r in recs])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def check_trends(report: ExpansionReport, columns: Sequence[str] = ("gap", "sliced_flat_norm")) -> Dict[str, bool]:
    """
    Each column must decrease along the (decreasing) ε list, judged on signed values.
    Pass "abs_gap" instead of "gap" for a single straight filament, where G₀ = 0.
    Raises TrendError naming every column that does not.
    """
    recs = report.succeeded
    if len(recs) < 2:
        raise TrendError("need at least two successful records to judge a trend", details={"succeeded": len(recs)})
    result: Dict[str, bool] = {}
    for col in columns:
        values = [float(getattr(r, col)) for r in recs]
        result[col] = all(b < a or max(abs(a), abs(b)) <= 1e-12 for a, b in zip(values, values[1:]))
    failing = [c for c, ok in result.items() if not ok]
    if failing:
        raise TrendError(
            "trend check failed: " + ", ".join(failing),
            details={c: [getattr(r, c) for r in recs] for c in columns},
        )
    return result


def trend_columns(report: ExpansionReport) -> Tuple[str, str]:
    """Columns judged by check_trends: |gap| for a straight single filament (G₀ = 0), else the signed gap."""
    straight = report.n == 1 and all(r.g0 == 0.0 for r in report.succeeded)
    return ("abs_gap" if straight else "gap", "sliced_flat_norm")
