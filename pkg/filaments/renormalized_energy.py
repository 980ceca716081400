"""
Regular part of the Green's function H_ω, renormalized energy W_ω, κ_n(Ω)
and the core constant γ from the radial minimization I(R, ε).
"""
from __future__ import annotations

import functools
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import solve_banded
from scipy.sparse.linalg import splu

from filaments.domain_grid import DomainSpec, Grid2D, boundary_crossing, contains, distance_to_boundary
from filaments.error_handling import ConvergenceError, GeometryError, ValidationError
from filaments.run_logger import diag, log_warning


# Smallest boundary fraction kept in the Shortley-Weller stencil
_THETA_MIN = 1e-8


# ---- Closed forms on the disk ------------------------------------------------------


def _reflect(R: float, y: np.ndarray) -> np.ndarray:
    return (R * R) * y / float(y @ y)


def h_omega_closed_form(R: float, x: Any, y: Sequence[float]) -> np.ndarray:
    """H(x,y) = −log(|y|/R · |x − R²y/|y|²|); −log R for y = 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ny = float(np.hypot(*y))
    if ny == 0.0:
        return np.full(x.shape[:-1], -math.log(R))
    ys = _reflect(R, y)
    d = np.hypot(x[..., 0] - ys[0], x[..., 1] - ys[1])
    return -np.log(ny / R * d)


def beta_closed_form(R: float, x: Any, y: Sequence[float]) -> np.ndarray:
    """Harmonic conjugate of H(·,y) on the disk: −arg(x − y*), angle measured from −y*."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if float(np.hypot(*y)) == 0.0:
        return np.zeros(x.shape[:-1])
    ys = _reflect(R, y)
    rel = (x[..., 0] - ys[0]) + 1j * (x[..., 1] - ys[1])
    ref = complex(-ys[0], -ys[1])
    return -np.angle(rel * np.conj(ref))


# ---- Grid Laplace solve ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _LaplaceSystem:
    matrix: sparse.csr_matrix
    lu: Any
    # boundary contributions: (row, coefficient, bx, by)
    b_rows: np.ndarray
    b_coef: np.ndarray
    b_points: np.ndarray


@functools.lru_cache(maxsize=8)
def _laplace_system(grid: Grid2D) -> _LaplaceSystem:
    """
    5-point Laplacian on interior nodes, Shortley-Weller weights next to ∂ω.

    Row scaled by h²/2 and negated: diagonal Σ_axes 1/(θ₊θ₋), neighbours −1/(θ_s(θ₊+θ₋)).
    """
    h = grid.spacing
    index = grid.interior_index()
    I, J = np.nonzero(grid.mask)
    rows_k = index[I, J]
    px = grid.x[I]
    py = grid.y[J]

    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []
    b_rows: List[np.ndarray] = []
    b_coef: List[np.ndarray] = []
    b_pts: List[np.ndarray] = []
    diag_total = np.zeros(rows_k.size)

    for axis in (0, 1):
        thetas = {}
        nbr_interior = {}
        for sign in (1, -1):
            ni = I + sign * (axis == 0)
            nj = J + sign * (axis == 1)
            inside = grid.mask[ni, nj]
            theta = np.ones(rows_k.size)
            cross = boundary_crossing(grid.domain, px[~inside], py[~inside], axis, sign) / h
            theta[~inside] = np.clip(cross, _THETA_MIN, 1.0)
            thetas[sign] = theta
            nbr_interior[sign] = (inside, index[ni, nj])
        tp, tm = thetas[1], thetas[-1]
        diag_total += 1.0 / (tp * tm)
        for sign, t_s in ((1, tp), (-1, tm)):
            coef = 1.0 / (t_s * (tp + tm))
            inside, nb_index = nbr_interior[sign]
            rows.append(rows_k[inside])
            cols.append(nb_index[inside])
            vals.append(-coef[inside])
            out = ~inside
            bx = px[out] + (sign * h * t_s[out] if axis == 0 else 0.0)
            by = py[out] + (sign * h * t_s[out] if axis == 1 else 0.0)
            b_rows.append(rows_k[out])
            b_coef.append(coef[out])
            b_pts.append(np.column_stack([bx, by]))

    rows.append(rows_k)
    cols.append(rows_k)
    vals.append(diag_total)
    n = grid.n_interior
    A = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    lu = splu(A.tocsc())
    diag("renormalized_energy", f"factorized Laplacian with {n} unknowns")
    return _LaplaceSystem(
        matrix=A,
        lu=lu,
        b_rows=np.concatenate(b_rows),
        b_coef=np.concatenate(b_coef),
        b_points=np.vstack(b_pts),
    )


@dataclass(frozen=True, eq=False)
class GreenData:
    y: Tuple[float, float]
    grid: Grid2D
    values: np.ndarray  # full grid; exterior nodes carry −log|x−y|
    residual: float
    method: str = "shortley-weller/splu"

    def at(self, points: Any) -> np.ndarray:
        """Bilinear interpolation of H(·,y) at arbitrary points."""
        interp = RegularGridInterpolator((self.grid.x, self.grid.y), self.values, method="linear")
        return interp(np.asarray(points, dtype=float).reshape(-1, 2))


def _check_source(domain: DomainSpec, grid: Optional[Grid2D], y: Sequence[float]) -> None:
    dist = float(distance_to_boundary(domain, y[0], y[1]))
    margin = 2.0 * grid.spacing if grid is not None else 0.0
    if not contains(domain, y[0], y[1]) or dist < margin:
        raise GeometryError(
            "source point outside the domain or too close to its boundary",
            details={"y": list(map(float, y)), "distance": dist, "required": margin},
        )


@functools.lru_cache(maxsize=64)
def _solve_cached(grid: Grid2D, y: Tuple[float, float], tol: float) -> GreenData:
    system = _laplace_system(grid)
    yv = np.asarray(y, dtype=float)
    g = -np.log(np.hypot(system.b_points[:, 0] - yv[0], system.b_points[:, 1] - yv[1]))
    rhs = np.zeros(grid.n_interior)
    np.add.at(rhs, system.b_rows, system.b_coef * g)

    u = system.lu.solve(rhs)
    scale = max(1.0, float(np.max(np.abs(rhs))))
    residual = float(np.max(np.abs(system.matrix @ u - rhs))) / scale
    refinements = 0
    while residual > tol and refinements < 3:
        u = u + system.lu.solve(rhs - system.matrix @ u)
        residual = float(np.max(np.abs(system.matrix @ u - rhs))) / scale
        refinements += 1
    if residual > tol:
        raise ConvergenceError(
            "Laplace solve did not reach the residual tolerance",
            details={"residual": residual, "tolerance": tol, "y": list(y)},
        )

    values = -np.log(np.maximum(np.hypot(grid.X - yv[0], grid.Y - yv[1]), 1e-300))
    values = np.array(values)
    values[grid.mask] = u
    return GreenData(y=y, grid=grid, values=values, residual=residual)


def solve_h_omega(domain: DomainSpec, grid: Grid2D, y: Sequence[float], *, tol: float = 1e-10) -> GreenData:
    """H_ω(·,y): discrete harmonic in ω with boundary data −log|x−y|."""
    _check_source(domain, grid, y)
    return _solve_cached(grid, (float(y[0]), float(y[1])), float(tol))


def _use_closed_form(domain: DomainSpec, mode: str) -> bool:
    if mode == "closed_form":
        if domain.shape != "disk":
            raise ValidationError("closed-form mode is only available on disks")
        return True
    if mode == "grid":
        return False
    if mode == "auto":
        return domain.shape == "disk"
    raise ValidationError(f"unknown mode {mode!r}", details={"allowed": ["auto", "closed_form", "grid"]})


def h_omega_at(
    domain: DomainSpec,
    x: Sequence[float],
    y: Sequence[float],
    *,
    grid: Optional[Grid2D] = None,
    mode: str = "auto",
) -> float:
    if _use_closed_form(domain, mode):
        return float(h_omega_closed_form(float(domain.radius), np.asarray(x, dtype=float), y))
    if grid is None:
        raise ValidationError("grid mode needs a grid")
    return float(solve_h_omega(domain, grid, y).at(x)[0])


def h00(domain: DomainSpec, *, grid: Optional[Grid2D] = None, mode: str = "auto") -> float:
    return h_omega_at(domain, (0.0, 0.0), (0.0, 0.0), grid=grid, mode=mode)


# ---- W_ω and κ_n ------------------------------------------------------------------------


def w_omega(
    domain: DomainSpec,
    points: Any,
    *,
    grid: Optional[Grid2D] = None,
    mode: str = "auto",
    threads: int = 1,
) -> float:
    """−π(Σ_{i≠j} log|p_i−p_j| + Σ_{i,j} H_ω(p_i,p_j))."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = pts.shape[0]
    for i, j in itertools.combinations(range(n), 2):
        if float(np.hypot(*(pts[i] - pts[j]))) == 0.0:
            raise ValidationError("W is undefined for coincident points", details={"i": i, "j": j})
    closed = _use_closed_form(domain, mode)
    for p in pts:
        _check_source(domain, None if closed else grid, p)

    if closed:
        R = float(domain.radius)
        H = np.array([h_omega_closed_form(R, pts, pts[j]) for j in range(n)]).T
    else:
        if grid is None:
            raise ValidationError("grid mode needs a grid")

        def column(j: int) -> np.ndarray:
            return solve_h_omega(domain, grid, pts[j]).at(pts)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                cols = list(pool.map(column, range(n)))
        else:
            cols = [column(j) for j in range(n)]
        H = np.array(cols).T if n else np.zeros((0, 0))

    log_sum = 0.0
    for i, j in itertools.combinations(range(n), 2):
        log_sum += 2.0 * math.log(float(np.hypot(*(pts[i] - pts[j]))))
    return float(-math.pi * (log_sum + np.sum(H)))


def w_omega_gradient(domain: DomainSpec, points: Any, *, step: float = 1e-6, **kwargs: Any) -> np.ndarray:
    """Central-difference gradient of W_ω with respect to each point."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    grad = np.zeros_like(pts)
    for i in range(pts.shape[0]):
        for c in range(2):
            up = pts.copy()
            dn = pts.copy()
            up[i, c] += step
            dn[i, c] -= step
            grad[i, c] = (w_omega(domain, up, **kwargs) - w_omega(domain, dn, **kwargs)) / (2.0 * step)
    return grad


def kappa_n(
    domain: DomainSpec,
    n: int,
    height: float,
    gamma: float,
    *,
    grid: Optional[Grid2D] = None,
    mode: str = "auto",
) -> float:
    """κ_n(Ω) = −π n² L H_ω(0,0) + n L γ."""
    if n == 0:
        return 0.0
    return -math.pi * n * n * height * h00(domain, grid=grid, mode=mode) + n * height * gamma


# ---- Radial core and γ ------------------------------------------------------------------


@dataclass
class RadialProfile:
    r: np.ndarray
    rho: np.ndarray
    eps: float
    radius: float
    energy: float
    iterations: int = 0

    def __call__(self, s: Any) -> np.ndarray:
        """ρ at radii s, glued to 1 beyond the outer radius."""
        s = np.asarray(s, dtype=float)
        return np.where(s >= self.radius, 1.0, np.interp(s, self.r, self.rho))


def _radial_energy(rho: np.ndarray, r: np.ndarray, dr: float, eps: float) -> float:
    r_mid = r[:-1] + 0.5 * dr
    kinetic = np.sum(math.pi * r_mid * np.diff(rho) ** 2) / dr
    w = np.full(r.size, dr)
    w[-1] = 0.5 * dr
    rk, pk, wk = r[1:], rho[1:], w[1:]
    node = np.sum(wk * math.pi * (pk * pk / rk + rk * (1.0 - pk * pk) ** 2 / (2.0 * eps * eps)))
    return float(kinetic + node)


def _radial_gradient_hessian(
    rho: np.ndarray, r: np.ndarray, dr: float, eps: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient and banded Hessian with respect to the free nodes 1..N-1."""
    r_mid = r[:-1] + 0.5 * dr
    rk = r[1:-1]
    pk = rho[1:-1]
    left = r_mid[:-1]
    right = r_mid[1:]
    grad = (2.0 * math.pi / dr) * (left * (pk - rho[:-2]) - right * (rho[2:] - pk))
    grad += dr * math.pi * (2.0 * pk / rk - 2.0 * rk * pk * (1.0 - pk * pk) / (eps * eps))

    diag_main = (2.0 * math.pi / dr) * (left + right)
    diag_main += dr * math.pi * (2.0 / rk - 2.0 * rk * (1.0 - 3.0 * pk * pk) / (eps * eps))
    off = -(2.0 * math.pi / dr) * right[:-1]
    ab = np.zeros((3, pk.size))
    ab[0, 1:] = off
    ab[1] = diag_main
    ab[2, :-1] = off
    return grad, ab


def radial_core(
    radius: float,
    eps: float,
    *,
    nodes_per_eps: int = 32,
    normalization: str = "gradient",
    tol: float = 1e-11,
    max_iters: int = 100,
) -> RadialProfile:
    """
    Minimize ∫₀ᴿ [½(ρ′² + ρ²/r²) + (1−ρ²)²/(4ε²)] 2πr dr with ρ(0) = 0, ρ(R) = 1.

    Damped Newton on the discrete Euler-Lagrange system (tridiagonal Hessian).
    normalization="printed" halves the reported energy.
    """
    if not (0.0 < eps < radius / 4.0):
        raise ValidationError("need 0 < eps < R/4", details={"eps": eps, "R": radius})
    if nodes_per_eps < 16:
        raise ValidationError("radial grid must resolve eps with at least 16 nodes", details={"nodes_per_eps": nodes_per_eps})
    if normalization not in ("gradient", "printed"):
        raise ValidationError(f"unknown normalization {normalization!r}")

    N = int(math.ceil(nodes_per_eps * radius / eps - 1e-9))
    r = np.linspace(0.0, radius, N + 1)
    dr = radius / N
    rho = r / np.sqrt(r * r + eps * eps)
    rho = rho / rho[-1]
    rho[0], rho[-1] = 0.0, 1.0

    energy = _radial_energy(rho, r, dr, eps)
    step_norm = math.inf
    for it in range(1, max_iters + 1):
        grad, ab = _radial_gradient_hessian(rho, r, dr, eps)
        shift = 0.0
        while True:
            ab_s = ab.copy()
            ab_s[1] += shift
            step = -solve_banded((1, 1), ab_s, grad)
            if np.all(np.isfinite(step)) and float(grad @ step) < 0.0:
                break
            shift = 1.0 if shift == 0.0 else shift * 10.0
            if shift > 1e12:
                raise ConvergenceError("radial Newton: no descent direction", details={"iteration": it})

        t = 1.0
        while True:
            trial = rho.copy()
            trial[1:-1] += t * step
            e_new = _radial_energy(trial, r, dr, eps)
            if e_new <= energy + 1e-4 * t * float(grad @ step) or t < 1e-10:
                break
            t *= 0.5
        rho, energy = trial, e_new
        step_norm = float(np.max(np.abs(t * step)))
        if step_norm < tol:
            diag("renormalized_energy", f"radial core eps={eps:g} R={radius:g} converged in {it} steps")
            out = energy / 2.0 if normalization == "printed" else energy
            return RadialProfile(r=r, rho=rho, eps=eps, radius=radius, energy=out, iterations=it)

    raise ConvergenceError(
        "radial Newton did not converge",
        details={"eps": eps, "R": radius, "step_norm": step_norm, "max_iters": max_iters},
    )


def radial_energy_I(radius: float, eps: float, **kwargs: Any) -> float:
    return radial_core(radius, eps, **kwargs).energy


@functools.lru_cache(maxsize=32)
def core_profile(eps: float, nodes_per_eps: int = 32) -> RadialProfile:
    """Minimizer of I(√ε, ε), cached per ε."""
    return radial_core(math.sqrt(eps), eps, nodes_per_eps=nodes_per_eps)


def gamma_trace(
    epsilons: Sequence[float],
    *,
    radius: float = 1.0,
    nodes_per_eps: int = 32,
) -> List[Dict[str, float]]:
    """One record {epsilon, I, gamma_estimate} per ε with γ_ε = I(R,ε) − π log(R/ε)."""
    records = []
    for eps in epsilons:
        I = radial_core(radius, float(eps), nodes_per_eps=nodes_per_eps).energy
        records.append(
            {"epsilon": float(eps), "I": I, "gamma_estimate": I - math.pi * math.log(radius / eps)}
        )
    return records


def difference_slope(trace: Sequence[Dict[str, float]]) -> float:
    """Log-log slope of |γ_{k+1} − γ_k| against ε_k."""
    eps = np.array([t["epsilon"] for t in trace])
    g = np.array([t["gamma_estimate"] for t in trace])
    diffs = np.abs(np.diff(g))
    if diffs.size < 2 or np.any(diffs == 0.0):
        return math.nan
    slope, _ = np.polyfit(np.log(eps[:-1]), np.log(diffs), 1)
    return float(slope)


def gamma_constant(
    epsilons: Sequence[float],
    *,
    radius: float = 1.0,
    nodes_per_eps: int = 32,
    trace: Optional[List[Dict[str, float]]] = None,
) -> float:
    """Richardson limit (error ∝ ε²) of I(R,ε) − π log(R/ε) over a decreasing ε-sequence."""
    eps = [float(e) for e in epsilons]
    if len(eps) < 3 or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValidationError("need a strictly decreasing sequence of at least 3 epsilons", details={"epsilons": eps})
    records = trace if trace is not None else gamma_trace(eps, radius=radius, nodes_per_eps=nodes_per_eps)
    g = [rec["gamma_estimate"] for rec in records]
    diffs = np.diff(g)
    if not (np.all(diffs > 0) or np.all(diffs < 0)):
        log_warning("renormalized_energy", "gamma estimates are not monotone; returning the last value", estimates=g)
        return float(g[-1])
    q2 = (eps[-2] / eps[-1]) ** 2
    return float((q2 * g[-1] - g[-2]) / (q2 - 1.0))


@functools.lru_cache(maxsize=4)
def default_gamma(epsilons: Tuple[float, ...] = (1e-2, 5e-3, 2.5e-3), nodes_per_eps: int = 32) -> float:
    """γ from the lab's own radial solves, computed once per process."""
    return gamma_constant(list(epsilons), nodes_per_eps=nodes_per_eps)
