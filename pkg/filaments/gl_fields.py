"""
Ginzburg-Landau fields on masked grids.

Energies, momentum and plaquette vorticity of sampled fields, the harmonic
conjugate phase β, radial vortex profiles and the trial / recovery fields
built from them.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy.integrate import trapezoid

from filaments.domain_grid import (
    CylinderSpec,
    DomainSpec,
    Grid2D,
    build_grid,
    contains,
    distance_to_boundary,
    quadrature_2d,
)
from filaments.error_handling import GeometryError, ResolutionError, ValidationError
from filaments.reduced_model import FilamentConfiguration, regularize_fdelta
from filaments.renormalized_energy import (
    _use_closed_form,
    beta_closed_form,
    core_profile,
    solve_h_omega,
)
from filaments.run_logger import diag


# Corner moduli below this make a plaquette "core"
CORE_MODULUS = 1e-12
TWO_PI = 2.0 * math.pi


# ---- Types ---------------------------------------------------------------------------


@dataclass(eq=False)
class ComplexField2D:
    grid: Grid2D
    values: np.ndarray  # complex, full grid shape
    eps: float

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise ValidationError(
                "field values do not match the grid",
                details={"values": list(self.values.shape), "grid": list(self.grid.shape)},
            )
        if not self.eps > 0:
            raise ValidationError("eps must be positive", details={"eps": self.eps})
        if not np.all(np.isfinite(self.values[self.grid.mask])):
            raise ValidationError("field values must be finite on interior nodes")


@dataclass(eq=False)
class ComplexField3D:
    cylinder: CylinderSpec
    grid: Grid2D
    values: np.ndarray  # (z_samples, nx, ny)
    eps: float
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=complex)
        expected = (self.cylinder.z_samples,) + self.grid.shape
        if self.values.shape != expected:
            raise ValidationError(
                "3D field values do not match cylinder and grid",
                details={"values": list(self.values.shape), "expected": list(expected)},
            )

    @property
    def z(self) -> np.ndarray:
        return self.cylinder.z_nodes()

    def slice(self, k: int) -> ComplexField2D:
        return ComplexField2D(self.grid, self.values[k], self.eps)


@dataclass(eq=False)
class PhaseData:
    y: Tuple[float, float]
    grid: Grid2D
    values: np.ndarray  # real, full grid
    method: str = "closed_form"


@dataclass(eq=False)
class PlaquetteData:
    winding: np.ndarray   # (nx-1, ny-1), exact multiples of 2π
    density: np.ndarray   # Jacobian density per cell
    core: np.ndarray      # corner modulus below CORE_MODULUS
    valid: np.ndarray     # all four corners interior
    centers_x: np.ndarray
    centers_y: np.ndarray

    def total_winding(self) -> float:
        return float(np.sum(self.winding))


@dataclass
class Energy3D:
    total: float
    slice_energy: np.ndarray    # ∫_ω e_ε^{2d}(·, z)
    slice_dz_energy: np.ndarray  # ∫_ω |∂_z u|²(·, z)
    z_kinetic: float            # ½ ∫∫ |∂_z u|²


# ---- Energies and currents --------------------------------------------------------------


def energy_density_2d(w: ComplexField2D) -> np.ndarray:
    """
    Per-node density whose cell-sum equals energy_2d: each interior edge's ½|Δu|²
    is split between its endpoints, plus the potential at the node.
    """
    grid = w.grid
    u = w.values
    mask = grid.mask
    h2 = grid.cell_area
    dens = np.zeros(grid.shape)
    ex = mask[1:, :] & mask[:-1, :]
    ey = mask[:, 1:] & mask[:, :-1]
    ax = np.where(ex, 0.5 * np.abs(np.diff(u, axis=0)) ** 2, 0.0)
    ay = np.where(ey, 0.5 * np.abs(np.diff(u, axis=1)) ** 2, 0.0)
    dens[1:, :] += 0.5 * ax
    dens[:-1, :] += 0.5 * ax
    dens[:, 1:] += 0.5 * ay
    dens[:, :-1] += 0.5 * ay
    dens /= h2
    dens += (1.0 - np.abs(u) ** 2) ** 2 / (4.0 * w.eps ** 2)
    dens[~mask] = 0.0
    return dens


def energy_2d(w: ComplexField2D) -> float:
    return quadrature_2d(energy_density_2d(w), w.grid)


def momentum(w: ComplexField2D) -> np.ndarray:
    """j(u) = Im(ū∇u) with central differences, shape (2, nx, ny); zero outside ω."""
    h = w.grid.spacing
    ux, uy = np.gradient(w.values, h, h)
    ubar = np.conj(w.values)
    j = np.stack([np.imag(ubar * ux), np.imag(ubar * uy)])
    j[:, ~w.grid.mask] = 0.0
    return j


def _increment(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal-branch phase increment from a to b."""
    return np.angle(b * np.conj(a))


def _loop_winding(u: np.ndarray, i0: int, j0: int, i1: int, j1: int) -> float:
    """Winding of u around the node rectangle [i0, i1] × [j0, j1], counterclockwise."""
    path = (
        [(i, j0) for i in range(i0, i1 + 1)]
        + [(i1, j) for j in range(j0 + 1, j1 + 1)]
        + [(i, j1) for i in range(i1 - 1, i0 - 1, -1)]
        + [(i0, j) for j in range(j1 - 1, j0 - 1, -1)]
    )
    vals = np.array([u[p] for p in path])
    return float(np.sum(_increment(vals, np.roll(vals, -1))))


def _quantize(total: np.ndarray) -> np.ndarray:
    return TWO_PI * np.rint(total / TWO_PI)


def jacobian_plaquette(w: ComplexField2D) -> PlaquetteData:
    """
    Plaquette windings (principal-branch increments, counterclockwise) and the
    cell Jacobian density Im(conj(∂₁u)∂₂u).

    Core plaquettes (a corner with |u| < CORE_MODULUS) are resolved together:
    the winding around the smallest clean node rectangle enclosing a core cluster,
    minus the regular windings inside it, is placed on the core plaquette closest
    to the cluster centre.
    """
    grid = w.grid
    u = w.values
    mask = grid.mask
    a = u[:-1, :-1]
    b = u[1:, :-1]
    c = u[1:, 1:]
    d = u[:-1, 1:]
    valid = mask[:-1, :-1] & mask[1:, :-1] & mask[1:, 1:] & mask[:-1, 1:]
    mod = np.abs(u)
    small = mod < CORE_MODULUS
    core = valid & (small[:-1, :-1] | small[1:, :-1] | small[1:, 1:] | small[:-1, 1:])

    total = _increment(a, b) + _increment(b, c) + _increment(c, d) + _increment(d, a)
    winding = np.where(valid & ~core, _quantize(total), 0.0)

    h = grid.spacing
    du1 = ((b - a) + (c - d)) / (2.0 * h)
    du2 = ((d - a) + (c - b)) / (2.0 * h)
    density = np.where(valid, np.imag(np.conj(du1) * du2), 0.0)

    cx = 0.5 * (grid.x[:-1] + grid.x[1:])
    cy = 0.5 * (grid.y[:-1] + grid.y[1:])

    if np.any(core):
        handled = np.zeros_like(core)
        labels, count = ndimage.label(core, structure=np.ones((3, 3)))
        for lab in range(1, count + 1):
            cells = np.argwhere((labels == lab) & ~handled)
            if cells.size == 0:
                continue
            i0, j0 = cells.min(axis=0)
            i1, j1 = cells.max(axis=0) + 1
            resolved = False
            for _ in range(8):
                ring_ok = (
                    i0 >= 0 and j0 >= 0 and i1 < u.shape[0] and j1 < u.shape[1]
                    and np.all(mask[i0:i1 + 1, [j0, j1]]) and np.all(mask[[i0, i1], j0:j1 + 1])
                    and not np.any(small[i0:i1 + 1, [j0, j1]]) and not np.any(small[[i0, i1], j0:j1 + 1])
                )
                if ring_ok:
                    resolved = True
                    break
                i0, j0, i1, j1 = i0 - 1, j0 - 1, i1 + 1, j1 + 1
            if not resolved:
                continue
            box = (slice(i0, i1), slice(j0, j1))
            box_core = core[box]
            loop = _loop_winding(u, i0, j0, i1, j1)
            regular = float(np.sum(winding[box]))
            k = float(_quantize(np.array(loop - regular)))
            idx = np.argwhere(box_core) + np.array([i0, j0])
            centre = idx.mean(axis=0)
            pick = idx[int(np.argmin(np.sum((idx - centre) ** 2, axis=1)))]
            winding[tuple(pick)] += k
            handled[box] |= box_core

    return PlaquetteData(
        winding=winding,
        density=density,
        core=core,
        valid=valid,
        centers_x=cx,
        centers_y=cy,
    )


def vorticity_in_disk(
    w: ComplexField2D,
    s: float,
    *,
    center: Sequence[float] = (0.0, 0.0),
    variant: str = "winding",
    plaquettes: Optional[PlaquetteData] = None,
) -> float:
    """∫_{B(s)} J_x w: half the enclosed windings, or the cell-summed density."""
    pq = plaquettes if plaquettes is not None else jacobian_plaquette(w)
    inside = (
        (pq.centers_x[:, None] - center[0]) ** 2 + (pq.centers_y[None, :] - center[1]) ** 2
    ) < s * s
    if variant == "winding":
        return 0.5 * float(np.sum(pq.winding[inside]))
    if variant == "density":
        return float(np.sum(pq.density[inside])) * w.grid.cell_area
    raise ValidationError(f"unknown variant {variant!r}", details={"allowed": ["winding", "density"]})


# ---- Phases and profiles --------------------------------------------------------------------


def _path_integrate(gx: np.ndarray, gy: np.ndarray, h: float, i0: int, j0: int) -> np.ndarray:
    """Trapezoid path integral of (gx, gy) from node (i0, j0): along its row, then up/down columns."""
    nx, ny = gx.shape
    out = np.zeros((nx, ny))
    row = np.zeros(nx)
    seg = 0.5 * h * (gx[1:, j0] + gx[:-1, j0])
    row[i0 + 1:] = np.cumsum(seg[i0:])
    row[:i0] = -np.cumsum(seg[:i0][::-1])[::-1]
    out[:, j0] = row
    col = 0.5 * h * (gy[:, 1:] + gy[:, :-1])
    out[:, j0 + 1:] = row[:, None] + np.cumsum(col[:, j0:], axis=1)
    out[:, :j0] = row[:, None] - np.cumsum(col[:, :j0][:, ::-1], axis=1)[:, ::-1]
    return out


def canonical_phase(
    domain: DomainSpec,
    grid: Grid2D,
    y: Sequence[float],
    *,
    mode: str = "auto",
) -> PhaseData:
    """
    β(·,y) with ∇β = ∇^⊥H_ω(·,y) = (−∂₂H, ∂₁H), normalized to zero grid mean.

    Disks use the closed-form conjugate in "auto" mode; "grid" integrates the
    rotated gradient of the discrete H along rows and columns.
    """
    yv = (float(y[0]), float(y[1]))
    if not contains(domain, yv[0], yv[1]):
        raise GeometryError("phase source outside the domain", details={"y": list(yv)})
    pts = np.stack([grid.X, grid.Y], axis=-1)
    if _use_closed_form(domain, mode):
        beta = beta_closed_form(float(domain.radius), pts, yv)
        method = "closed_form"
    else:
        green = solve_h_omega(domain, grid, yv)
        h = grid.spacing
        hx, hy = np.gradient(green.values, h, h)
        i0, j0 = grid.node_of((0.0, 0.0))
        beta = _path_integrate(-hy, hx, h, i0, j0)
        method = "path_integration"
    beta = beta - float(np.mean(beta[grid.mask]))
    return PhaseData(y=yv, grid=grid, values=beta, method=method)


def _unit_phase(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    r = np.abs(z)
    safe = np.where(r > 0.0, r, 1.0)
    return r, np.where(r > 0.0, z / safe, 0.0)


def zeta_profile(s: Any, eps: float) -> np.ndarray:
    return np.minimum(1.0, np.asarray(s, dtype=float) / eps)


def radial_factor(x: Any, eps: float, mode: str = "core_min") -> np.ndarray:
    """
    ρ(|x|)e^{iθ}: core_min uses the I(√ε, ε) minimizer glued to 1 outside B(√ε),
    zeta uses min(1, |x|/ε).
    """
    x = np.asarray(x, dtype=float)
    z = x[..., 0] + 1j * x[..., 1]
    r, phase = _unit_phase(z)
    if mode == "core_min":
        rho = core_profile(float(eps))(r)
    elif mode == "zeta":
        rho = zeta_profile(r, eps)
    else:
        raise ValidationError(f"unknown core mode {mode!r}", details={"allowed": ["core_min", "zeta"]})
    return rho * phase


def boundary_matched_profile(x: Any, z: float, eps: float, height: float = math.inf) -> np.ndarray:
    """
    ζ_ε at z ∈ {0, L}, Û_ε in the bulk, blended linearly over strips of width ε^{1/6}.
    """
    if z < 0.0 or z > height:
        raise ValidationError("z outside [0, L]", details={"z": z, "L": height})
    width = eps ** (1.0 / 6.0)
    t = min(1.0, min(z, height - z) / width)
    if t >= 1.0:
        return radial_factor(x, eps, "core_min")
    zeta = radial_factor(x, eps, "zeta")
    if t <= 0.0:
        return zeta
    return zeta + t * (radial_factor(x, eps, "core_min") - zeta)


def _assemble(
    domain: DomainSpec,
    grid: Grid2D,
    points: np.ndarray,
    profile: Callable[[np.ndarray], np.ndarray],
    phase_mode: str,
) -> np.ndarray:
    X, Y = grid.X, grid.Y
    values = np.ones(grid.shape, dtype=complex)
    for p in points:
        beta = canonical_phase(domain, grid, p, mode=phase_mode).values
        rel = np.stack([X - p[0], Y - p[1]], axis=-1)
        values *= np.exp(1j * beta) * profile(rel)
    return values


def _check_points(domain: DomainSpec, points: np.ndarray) -> None:
    for p in points:
        if not contains(domain, p[0], p[1]):
            raise GeometryError("vortex point outside the domain", details={"point": p.tolist()})


def _min_separation(points: np.ndarray) -> float:
    if points.shape[0] < 2:
        return math.inf
    d = points[:, None, :] - points[None, :, :]
    dist = np.hypot(d[..., 0], d[..., 1])
    dist[np.diag_indices(points.shape[0])] = math.inf
    return float(dist.min())


def trial_slice(
    domain: DomainSpec,
    grid: Grid2D,
    points: Any,
    eps: float,
    core_mode: str = "core_min",
    *,
    phase_mode: str = "auto",
    separation_factor: float = 4.0,
) -> ComplexField2D:
    """Π_j e^{iβ(x,p_j)} · (radial factor at x − p_j)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    _check_points(domain, pts)
    if core_mode == "core_min":
        sep = _min_separation(pts)
        need = separation_factor * math.sqrt(eps)
        if sep < need:
            raise GeometryError(
                "vortices closer than the core construction allows",
                details={"separation": sep, "required": need},
            )
    values = _assemble(domain, grid, pts, lambda rel: radial_factor(rel, eps, core_mode), phase_mode)
    return ComplexField2D(grid, values, eps)


def boundary_data(
    domain: DomainSpec,
    grid: Grid2D,
    points: Any,
    eps: float,
    *,
    phase_mode: str = "auto",
) -> ComplexField2D:
    """Π_j e^{iβ(x,p_j)} ζ_ε(x − p_j); coincident points are allowed."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    _check_points(domain, pts)
    values = _assemble(domain, grid, pts, lambda rel: radial_factor(rel, eps, "zeta"), phase_mode)
    return ComplexField2D(grid, values, eps)


# ---- Recovery fields ----------------------------------------------------------------------------


def h_eps(eps: float) -> float:
    """Separation scale |log ε|^{-1/2}."""
    if not 0.0 < eps < 1.0:
        raise ValidationError("h_eps needs 0 < eps < 1", details={"eps": eps})
    return 1.0 / math.sqrt(abs(math.log(eps)))


def required_spacing(min_separation: float, eps: float, points_per_eps: float = 4.0) -> float:
    return min(eps / points_per_eps, min_separation / 4.0)


def _recovery_grid(
    domain: DomainSpec,
    eps: float,
    min_sep: float,
    spacing: Optional[float],
    points_per_eps: float,
    max_nodes_per_side: int,
) -> Grid2D:
    need = required_spacing(min_sep, eps, points_per_eps)
    s = need if spacing is None else float(spacing)
    if s > need * (1.0 + 1e-9):
        raise ResolutionError(
            "grid spacing does not resolve the vortex cores and separations",
            details={"spacing": s, "required": need, "eps": eps},
        )
    hx, hy = domain.half_extent
    per_side = int(math.ceil(2.0 * max(hx, hy) / s)) + 3
    if per_side > max_nodes_per_side:
        raise ResolutionError(
            "grid for this eps exceeds the node cap",
            details={"nodes_per_side": per_side, "cap": max_nodes_per_side, "eps": eps},
        )
    return build_grid(domain, s)


def _map_slices(fn: Callable[[int], np.ndarray], count: int, threads: int) -> List[np.ndarray]:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(count)))
    return [fn(k) for k in range(count)]


def recovery_field(
    f: FilamentConfiguration,
    eps: float,
    cylinder: CylinderSpec,
    *,
    spacing: Optional[float] = None,
    points_per_eps: float = 4.0,
    core_mode: str = "core_min",
    phase_mode: str = "auto",
    separation_factor: float = 4.0,
    max_nodes_per_side: int = 2048,
    threads: int = 1,
) -> ComplexField3D:
    """Slices trial_slice(h_ε f(z)) at the cylinder's z-samples."""
    if abs(cylinder.height - f.height) > 1e-12 * max(1.0, f.height):
        raise ValidationError("cylinder height differs from the configuration height")
    if not f.is_collision_free():
        raise ValidationError("recovery field needs a collision-free configuration")
    h = h_eps(eps)
    zs = cylinder.z_nodes()
    points = np.array([h * f.at(z) for z in zs])
    min_sep = min(_min_separation(p) for p in points)
    if not math.isfinite(min_sep):
        min_sep = 4.0 * eps
    for p in points:
        _check_points(cylinder.domain, p)
    grid = _recovery_grid(cylinder.domain, eps, min_sep, spacing, points_per_eps, max_nodes_per_side)
    closed = _use_closed_form(cylinder.domain, phase_mode)
    if not closed and float(np.min(distance_to_boundary(cylinder.domain, points[..., 0], points[..., 1]))) < 2.0 * grid.spacing:
        raise ResolutionError("vortex within two grid cells of the boundary")
    diag("gl_fields", f"recovery eps={eps:g} h={h:.4f} spacing={grid.spacing:.3e} nodes={grid.shape}")

    def build(k: int) -> np.ndarray:
        return trial_slice(
            cylinder.domain, grid, points[k], eps, core_mode,
            phase_mode=phase_mode, separation_factor=separation_factor,
        ).values

    values = np.stack(_map_slices(build, zs.size, threads))
    meta = {"epsilon": eps, "h_eps": h, "spacing": grid.spacing, "points": points.tolist(), "core_mode": core_mode}
    return ComplexField3D(cylinder, grid, values, eps, meta)


def recovery_field_with_boundary(
    f: FilamentConfiguration,
    eps: float,
    cylinder: CylinderSpec,
    *,
    seed: int = 0,
    spacing: Optional[float] = None,
    points_per_eps: float = 4.0,
    phase_mode: str = "auto",
    max_nodes_per_side: int = 2048,
    threads: int = 1,
) -> ComplexField3D:
    """
    Recovery field that meets boundary_data exactly at z = 0 and z = L:
    positions h_ε f^{δ_ε} with δ_ε = ε^{1/3}, core profile blended from ζ_ε at
    the ends to Û_ε in the bulk.
    """
    delta = eps ** (1.0 / 3.0)
    f_reg = regularize_fdelta(f, delta, seed=seed)
    h = h_eps(eps)
    zs = cylinder.z_nodes()
    points = np.array([h * f_reg.at(z) for z in zs])
    for p in points:
        _check_points(cylinder.domain, p)
    width = eps ** (1.0 / 6.0)
    bulk = [k for k, z in enumerate(zs) if width <= z <= cylinder.height - width]
    seps = [_min_separation(points[k]) for k in (bulk or range(zs.size))]
    min_sep = min(seps) if seps else math.inf
    if not math.isfinite(min_sep) or min_sep == 0.0:
        min_sep = 4.0 * eps
    grid = _recovery_grid(cylinder.domain, eps, min_sep, spacing, points_per_eps, max_nodes_per_side)

    def build(k: int) -> np.ndarray:
        z = float(zs[k])
        return _assemble(
            cylinder.domain, grid, points[k],
            lambda rel: boundary_matched_profile(rel, z, eps, cylinder.height), phase_mode,
        )

    values = np.stack(_map_slices(build, zs.size, threads))
    meta = {
        "epsilon": eps,
        "h_eps": h,
        "spacing": grid.spacing,
        "points": points.tolist(),
        "core_mode": "boundary_matched",
        "delta": delta,
    }
    return ComplexField3D(cylinder, grid, values, eps, meta)


# ---- 3D energy ----------------------------------------------------------------------------------


def energy_3d(u: ComplexField3D, *, threads: int = 1) -> Energy3D:
    """
    F_ε = ∫₀ᴸ ∫_ω e^{2d} dz + ½ ∫₀ᴸ ∫_ω |∂_z u|², trapezoid in z,
    ∂_z u by central differences (second-order one-sided at the ends).
    """
    zs = u.z
    if zs.size < 3:
        raise ValidationError("energy_3d needs at least three z-samples")
    dz = u.cylinder.dz
    du = np.gradient(u.values, dz, axis=0, edge_order=2)

    def slice_pair(k: int) -> np.ndarray:
        e2d = energy_2d(u.slice(k))
        ez = quadrature_2d(np.abs(du[k]) ** 2, u.grid)
        return np.array([e2d, ez])

    pairs = np.array(_map_slices(slice_pair, zs.size, threads))
    slice_energy = pairs[:, 0]
    slice_dz = pairs[:, 1]
    z_kinetic = 0.5 * float(trapezoid(slice_dz, zs))
    total = float(trapezoid(slice_energy, zs)) + z_kinetic
    return Energy3D(total=total, slice_energy=slice_energy, slice_dz_energy=slice_dz, z_kinetic=z_kinetic)
