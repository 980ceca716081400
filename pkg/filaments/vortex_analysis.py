"""Vortex detection, flat norms of atomic measures and the good-height criterion."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Iterable, List, Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.integrate import quad, trapezoid
from scipy.optimize import linprog

from filaments.domain_grid import r_star
from filaments.error_handling import ConvergenceError, ValidationError
from filaments.gl_fields import (
    ComplexField2D,
    ComplexField3D,
    PlaquetteData,
    energy_density_2d,
    jacobian_plaquette,
)
from filaments.reduced_model import FilamentConfiguration
from filaments.run_logger import diag, log_warning


@dataclass
class AtomicMeasure:
    points: np.ndarray   # (k, 2)
    weights: np.ndarray  # (k,)

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.points.shape[0] != self.weights.size:
            raise ValidationError(
                "atom points and weights differ in length",
                details={"points": self.points.shape[0], "weights": self.weights.size},
            )
        if np.any(self.weights == 0.0):
            raise ValidationError("atom weights must be nonzero")

    @classmethod
    def empty(cls) -> "AtomicMeasure":
        return cls(np.zeros((0, 2)), np.zeros(0))

    def __len__(self) -> int:
        return self.weights.size

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))


def measure_from_configuration(points: Any, weight: float = math.pi) -> AtomicMeasure:
    """δ_[p] scaled by weight: one atom per point."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return AtomicMeasure(pts, np.full(pts.shape[0], weight))


# ---- Flat norm --------------------------------------------------------------------------


def _signed_parts(mu: AtomicMeasure, nu: AtomicMeasure):
    pts = np.vstack([mu.points, nu.points])
    w = np.concatenate([mu.weights, -nu.weights])
    pos = w > 0
    return pts[pos], w[pos], pts[~pos], -w[~pos]


def flat_norm_0(mu: AtomicMeasure, nu: AtomicMeasure) -> float:
    """
    sup{∫φ d(μ−ν) : |φ| ≤ 1, Lip φ ≤ 1} via its transport dual: ship mass between the
    positive and negative parts at cost min(|x−y|, 2), dispose of the rest at cost 1.
    """
    P, p, N, q = _signed_parts(mu, nu)
    if p.size == 0 or q.size == 0:
        return float(np.sum(p) + np.sum(q))
    a, b = p.size, q.size
    dist = np.hypot(P[:, None, 0] - N[None, :, 0], P[:, None, 1] - N[None, :, 1])
    cost = np.concatenate([np.minimum(dist, 2.0).ravel(), np.ones(a), np.ones(b)])

    n_pi = a * b
    A_eq = np.zeros((a + b, n_pi + a + b))
    for i in range(a):
        A_eq[i, i * b:(i + 1) * b] = 1.0
        A_eq[i, n_pi + i] = 1.0
    for j in range(b):
        A_eq[a + j, j:n_pi:b] = 1.0
        A_eq[a + j, n_pi + a + j] = 1.0
    b_eq = np.concatenate([p, q])
    res = linprog(cost, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise ConvergenceError("flat norm transport LP failed", details={"status": res.status, "message": res.message})
    return float(res.fun)


def flat_norm_dual(mu: AtomicMeasure, nu: AtomicMeasure) -> float:
    """The defining LP over test values at the support: |φ| ≤ 1, |φ_k − φ_l| ≤ |x_k − x_l|."""
    pts = np.vstack([mu.points, nu.points])
    w = np.concatenate([mu.weights, -nu.weights])
    if w.size == 0:
        return 0.0
    # merge coincident support points
    uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
    sigma = np.zeros(uniq.shape[0])
    np.add.at(sigma, np.asarray(inverse).reshape(-1), w)
    k = uniq.shape[0]
    rows = []
    rhs = []
    for s in range(k):
        for t in range(k):
            if s != t:
                row = np.zeros(k)
                row[s], row[t] = 1.0, -1.0
                rows.append(row)
                rhs.append(float(np.hypot(*(uniq[s] - uniq[t]))))
    res = linprog(
        -sigma,
        A_ub=np.array(rows) if rows else None,
        b_ub=np.array(rhs) if rhs else None,
        bounds=(-1.0, 1.0),
        method="highs",
    )
    if not res.success:
        raise ConvergenceError("flat norm dual LP failed", details={"status": res.status, "message": res.message})
    return float(-res.fun)


# ---- Detection and the good-height criterion -------------------------------------------


def detect_vortices(w: ComplexField2D, *, plaquettes: Optional[PlaquetteData] = None) -> AtomicMeasure:
    """
    One atom per 8-connected cluster of nonzero-winding plaquettes, at the
    |winding|-weighted centroid, with weight π·(total winding)/2π.
    """
    pq = plaquettes if plaquettes is not None else jacobian_plaquette(w)
    nonzero = pq.winding != 0.0
    if not np.any(nonzero):
        return AtomicMeasure.empty()
    labels, count = ndimage.label(nonzero, structure=np.ones((3, 3)))
    pts: List[List[float]] = []
    weights: List[float] = []
    for lab in range(1, count + 1):
        cells = np.argwhere(labels == lab)
        wind = pq.winding[cells[:, 0], cells[:, 1]]
        total = float(np.sum(wind))
        if total == 0.0:
            continue
        mass = np.abs(wind)
        cx = pq.centers_x[cells[:, 0]]
        cy = pq.centers_y[cells[:, 1]]
        pts.append([float(np.sum(mass * cx) / mass.sum()), float(np.sum(mass * cy) / mass.sum())])
        weights.append(0.5 * total)
    if not weights:
        return AtomicMeasure.empty()
    return AtomicMeasure(np.array(pts), np.array(weights))


@dataclass
class SnResult:
    measure: float
    is_good: bool
    radii: np.ndarray
    vorticity: np.ndarray
    r_star: float


def sn_criterion(
    w: ComplexField2D,
    n: int,
    *,
    n_radii: int = 256,
    variant: str = "winding",
    plaquettes: Optional[PlaquetteData] = None,
) -> SnResult:
    """
    Measure of {s ∈ (r*/2, r*) : |∫_{B(s)} J_x w − nπ| ≤ 1}, midpoint rule on n_radii radii;
    good iff the measure is at least r*/4.
    """
    rs = r_star(w.grid.domain)
    pq = plaquettes if plaquettes is not None else jacobian_plaquette(w)
    ds = 0.5 * rs / n_radii
    radii = 0.5 * rs + (np.arange(n_radii) + 0.5) * ds

    cr = np.hypot(pq.centers_x[:, None], pq.centers_y[None, :]).ravel()
    if variant == "winding":
        contrib = 0.5 * pq.winding.ravel()
    elif variant == "density":
        contrib = pq.density.ravel() * w.grid.cell_area
    else:
        raise ValidationError(f"unknown variant {variant!r}", details={"allowed": ["winding", "density"]})
    order = np.argsort(cr)
    cum = np.concatenate([[0.0], np.cumsum(contrib[order])])
    counts = np.searchsorted(cr[order], radii, side="left")
    vort = cum[counts]

    good = np.abs(vort - n * math.pi) <= 1.0
    measure = float(np.count_nonzero(good)) * ds
    return SnResult(measure=measure, is_good=measure >= 0.25 * rs, radii=radii, vorticity=vort, r_star=rs)


def good_height_fraction(u: ComplexField3D, n: int, *, n_radii: int = 256, threads: int = 1) -> float:
    """Fraction of z-samples whose slice passes sn_criterion."""

    def good(k: int) -> bool:
        return sn_criterion(u.slice(k), n, n_radii=n_radii).is_good

    count = u.values.shape[0]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            flags = list(pool.map(good, range(count)))
    else:
        flags = [good(k) for k in range(count)]
    return float(np.mean(flags)) if flags else 0.0


def detect_slices(u: ComplexField3D, *, threads: int = 1) -> List[AtomicMeasure]:
    def detect(k: int) -> AtomicMeasure:
        return detect_vortices(u.slice(k))

    count = u.values.shape[0]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(detect, range(count)))
    return [detect(k) for k in range(count)]


# ---- Sliced flat norm ---------------------------------------------------------------------


def sliced_flat_norm(
    slices: Sequence[AtomicMeasure],
    reference: FilamentConfiguration,
    *,
    z: Optional[Iterable[float]] = None,
    scale: float = 1.0,
) -> float:
    """∫₀ᴸ F(slice_z − π δ_[scale·f(z)]) dz by the trapezoid rule."""
    if z is None:
        if len(slices) != reference.M + 1:
            raise ValidationError(
                "slices and reference do not share z-samples",
                details={"slices": len(slices), "nodes": reference.M + 1},
            )
        zs = reference.z
        refs = [scale * reference.positions[:, k] for k in range(reference.M + 1)]
    else:
        zs = np.asarray(list(z), dtype=float)
        if zs.size != len(slices):
            raise ValidationError("z and slices differ in length")
        refs = [scale * reference.at(zk) for zk in zs]
    values = np.array(
        [flat_norm_0(s, measure_from_configuration(r)) for s, r in zip(slices, refs)]
    )
    return float(trapezoid(values, zs))


# ---- Vortex balls ---------------------------------------------------------------------------

# Constant of the modulus estimate ∫ e_ε(|w|) ≥ (c/ε)‖1 − |w|‖²
C_MODULUS = 4.0
C0_CAP = 0.25


def lambda_lower_bound(r: float, d: int, eps: float, c: float = C_MODULUS) -> float:
    """min_{m∈[0,1]} m²d²π/r + (1−m)²/(cε), closed form AB/(A+B)."""
    if not (r > 0 and eps > 0):
        raise ValidationError("lambda_lower_bound needs r > 0 and eps > 0", details={"r": r, "eps": eps})
    a = d * d * math.pi / r
    b = 1.0 / (c * eps)
    if a == 0.0:
        return 0.0
    return a * b / (a + b)


def Lambda_eps(sigma: float, eps: float, c: float = C_MODULUS, c0: float = C0_CAP) -> float:
    """∫₀^σ min(λ_ε(r,1), c₀/ε) dr."""
    if sigma <= 0:
        return 0.0
    # λ_ε(r,1) = π/(r + πcε) is decreasing, so the cap only binds near r = 0
    if c0 * c >= 1.0:
        return math.pi * math.log1p(sigma / (math.pi * c * eps))
    cap = c0 / eps

    def integrand(r: float) -> float:
        return cap if r <= 0 else min(lambda_lower_bound(r, 1, eps, c), cap)

    value, _err = quad(integrand, 0.0, sigma, limit=200)
    return float(value)


@dataclass
class BallCollection:
    centers: np.ndarray     # (k, 2)
    radii: np.ndarray       # (k,)
    degrees: np.ndarray     # (k,) int
    unreliable: np.ndarray  # (k,) bool, component touched ∂ω
    sigma: float

    def __len__(self) -> int:
        return self.radii.size

    @property
    def total_radius(self) -> float:
        return float(np.sum(self.radii))

    @property
    def total_degree(self) -> int:
        return int(np.sum(self.degrees))


@dataclass
class BallResult:
    balls: BallCollection
    lower_bound: float
    covered_energy: float
    radius_history: List[float]
    c_modulus: float = C_MODULUS
    c0_cap: float = C0_CAP


def _enclose(c1: np.ndarray, r1: float, c2: np.ndarray, r2: float):
    d = float(np.hypot(*(c2 - c1)))
    if d + r2 <= r1:
        return c1.copy(), r1
    if d + r1 <= r2:
        return c2.copy(), r2
    r = 0.5 * (d + r1 + r2)
    center = c1 + (r - r1) / d * (c2 - c1)
    return center, r


def _merge_touching(
    centers: List[np.ndarray],
    radii: List[float],
    degrees: List[int],
    flags: List[bool],
    sigma: Optional[float],
) -> None:
    """Enclose intersecting pairs until the balls are pairwise disjoint; Σr never grows."""
    merged = True
    while merged:
        merged = False
        for a in range(len(radii)):
            for b in range(a + 1, len(radii)):
                gap = float(np.hypot(*(centers[a] - centers[b]))) - radii[a] - radii[b]
                if gap > 1e-12 * max(radii[a], radii[b]):
                    continue
                c, r = _enclose(centers[a], radii[a], centers[b], radii[b])
                deg = degrees[a] + degrees[b]
                if sigma is not None:
                    # keep r ≥ σ|d|; σ|d| ≤ r_a + r_b
                    r = max(r, min(sigma * abs(deg), radii[a] + radii[b]))
                centers[a], radii[a], degrees[a] = c, r, deg
                flags[a] = flags[a] or flags[b]
                del centers[b], radii[b], degrees[b], flags[b]
                merged = True
                break
            if merged:
                break


def _seed_balls(w: ComplexField2D, threshold: float, pq: PlaquetteData):
    grid = w.grid
    small = grid.mask & (np.abs(w.values) <= threshold)
    labels, count = ndimage.label(small, structure=np.ones((3, 3)))
    X, Y = grid.X, grid.Y
    boundary = np.zeros(grid.shape, dtype=bool)
    boundary[grid.boundary_nodes[:, 0], grid.boundary_nodes[:, 1]] = True
    pcx, pcy = np.meshgrid(pq.centers_x, pq.centers_y, indexing="ij")
    centers, radii, degrees, flags = [], [], [], []
    for lab in range(1, count + 1):
        comp = labels == lab
        px, py = X[comp], Y[comp]
        c = np.array([px.mean(), py.mean()])
        r = float(np.max(np.hypot(px - c[0], py - c[1]))) + grid.spacing
        touches = bool(np.any(comp & boundary))
        inside = np.hypot(pcx - c[0], pcy - c[1]) <= r
        deg = 0 if touches else int(round(float(np.sum(pq.winding[inside])) / (2.0 * math.pi)))
        centers.append(c)
        radii.append(r)
        degrees.append(deg)
        flags.append(touches)
    return centers, radii, degrees, flags


def ball_construction(
    w: ComplexField2D,
    target_total_radius: float,
    *,
    c: float = C_MODULUS,
    c0: float = C0_CAP,
    threshold: float = 0.5,
    plaquettes: Optional[PlaquetteData] = None,
) -> BallResult:
    """
    Seed balls on {|w| ≤ threshold}, then grow all radii by a common factor until
    the first contact or the target Σr, merging touching balls, and repeat.
    The certificate is Σ_{d_k≠0} (r_k/σ)·Λ_ε(σ).
    """
    if not target_total_radius > 0:
        raise ValidationError("target_total_radius must be positive", details={"target": target_total_radius})
    pq = plaquettes if plaquettes is not None else jacobian_plaquette(w)
    centers, radii, degrees, flags = _seed_balls(w, threshold, pq)
    if any(flags):
        log_warning("vortex_analysis", "vortex set touches the boundary; degrees marked unreliable", count=int(sum(flags)))
    _merge_touching(centers, radii, degrees, flags, None)

    history: List[float] = [float(sum(radii))]
    charged = [r / abs(d) for r, d in zip(radii, degrees) if d != 0]
    sigma = min(charged) if charged else 0.0

    while radii and sum(radii) < target_total_radius * (1.0 - 1e-12):
        total = sum(radii)
        t = target_total_radius / total
        for a in range(len(radii)):
            for b in range(a + 1, len(radii)):
                dist = float(np.hypot(*(centers[a] - centers[b])))
                t = min(t, dist / (radii[a] + radii[b]))
        radii = [t * r for r in radii]
        sigma *= t
        _merge_touching(centers, radii, degrees, flags, sigma if charged else None)
        now = float(sum(radii))
        history.append(now)
        diag("vortex_analysis", f"balls={len(radii)} sum_r={now:.4e} sigma={sigma:.4e}")

    balls = BallCollection(
        centers=np.array(centers).reshape(-1, 2),
        radii=np.array(radii, dtype=float),
        degrees=np.array(degrees, dtype=int),
        unreliable=np.array(flags, dtype=bool),
        sigma=float(sigma),
    )
    lower = 0.0
    if sigma > 0:
        lam = Lambda_eps(sigma, w.eps, c, c0)
        lower = float(sum((r / sigma) * lam for r, d in zip(radii, degrees) if d != 0))

    covered = np.zeros(w.grid.shape, dtype=bool)
    X, Y = w.grid.X, w.grid.Y
    for cc, r in zip(centers, radii):
        covered |= np.hypot(X - cc[0], Y - cc[1]) <= r
    dens = energy_density_2d(w)
    covered_energy = float(w.grid.cell_area * np.sum(dens[covered & w.grid.mask]))

    return BallResult(balls=balls, lower_bound=lower, covered_energy=covered_energy, radius_history=history, c_modulus=c, c0_cap=c0)
