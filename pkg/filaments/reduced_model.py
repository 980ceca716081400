"""
Reduced filament model.

Discrete G₀ on a uniform z-grid, its exact gradient and Hessian, constrained
minimization, Euler-Lagrange residuals, the permutation quotient distance and
the separation regularizer f^δ.

Discretization:
  - kinetic term: exact energy of the piecewise-linear path, π/2 Σ |Δf|²/Δz
  - log term: trapezoid rule over z-nodes, ordered double sum over i≠j
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, linear_sum_assignment
from scipy.sparse.linalg import eigsh, spsolve

from filaments.domain_grid import DomainSpec, distance_to_boundary
from filaments.error_handling import (
    CollisionError,
    ConvergenceError,
    SamplingError,
    ValidationError,
)
from filaments.run_logger import diag


# Endpoint separations below this count as coincident boundary vortices
_COINCIDENT = 1e-14

CONVENTIONS = ("gradient", "unordered")


# ---- Types -------------------------------------------------------------------


@dataclass
class FilamentConfiguration:
    """n planar paths sampled at M+1 uniform heights in [0, L]."""

    positions: np.ndarray  # (n, M+1, 2)
    height: float

    def __post_init__(self) -> None:
        self.positions = np.array(self.positions, dtype=float)
        if self.positions.ndim != 3 or self.positions.shape[2] != 2:
            raise ValidationError(
                "positions must have shape (n, M+1, 2)",
                details={"shape": list(self.positions.shape)},
            )
        if self.positions.shape[1] < 3:
            raise ValidationError("need M >= 2 (at least three z-nodes)", details={"nodes": self.positions.shape[1]})
        if not self.height > 0:
            raise ValidationError("height must be positive", details={"height": self.height})
        if not np.all(np.isfinite(self.positions)):
            raise ValidationError("positions must be finite")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def M(self) -> int:
        return self.positions.shape[1] - 1

    @property
    def dz(self) -> float:
        return self.height / self.M

    @property
    def z(self) -> np.ndarray:
        return np.linspace(0.0, self.height, self.M + 1)

    def copy(self) -> "FilamentConfiguration":
        return FilamentConfiguration(self.positions.copy(), self.height)

    def with_positions(self, positions: np.ndarray) -> "FilamentConfiguration":
        return FilamentConfiguration(positions, self.height)

    def at(self, z: float) -> np.ndarray:
        """Piecewise-linear interpolation of all filaments at height z, shape (n, 2)."""
        zs = self.z
        pos = self.positions
        return np.array(
            [[np.interp(z, zs, pos[i, :, 0]), np.interp(z, zs, pos[i, :, 1])] for i in range(self.n)]
        )

    def min_interior_separation(self) -> float:
        if self.n < 2:
            return math.inf
        d = _pair_distances(self.positions[:, 1:-1, :])
        return float(d.min()) if d.size else math.inf

    def is_collision_free(self) -> bool:
        return self.min_interior_separation() > 0.0


@dataclass
class EndpointConstraint:
    bottom: np.ndarray  # (n, 2) multiset
    top: np.ndarray

    def __post_init__(self) -> None:
        self.bottom = np.array(self.bottom, dtype=float).reshape(-1, 2)
        self.top = np.array(self.top, dtype=float).reshape(-1, 2)
        if self.bottom.shape != self.top.shape:
            raise ValidationError(
                "bottom and top multisets must have the same size",
                details={"bottom": len(self.bottom), "top": len(self.top)},
            )

    @property
    def n(self) -> int:
        return self.bottom.shape[0]

    def has_repeats(self) -> bool:
        return _has_repeats(self.bottom) or _has_repeats(self.top)


@dataclass
class LabeledPointSet:
    points: np.ndarray  # (n, 2), row k carries label k+1

    def __post_init__(self) -> None:
        self.points = np.array(self.points, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(self.points)):
            raise ValidationError("points must be finite")

    @property
    def n(self) -> int:
        return self.points.shape[0]


@dataclass
class MinimizeResult:
    configuration: FilamentConfiguration
    energy: float
    grad_norm: float
    iterations: int
    history: List[float] = field(default_factory=list)
    method: str = "newton"


def _has_repeats(points: np.ndarray) -> bool:
    for a, b in itertools.combinations(range(len(points)), 2):
        if np.linalg.norm(points[a] - points[b]) <= _COINCIDENT:
            return True
    return False


def _pair_distances(positions: np.ndarray) -> np.ndarray:
    """|f_i − f_j| for i<j, shape (pairs, nodes)."""
    n = positions.shape[0]
    if n < 2:
        return np.zeros((0, positions.shape[1]))
    iu, ju = np.triu_indices(n, k=1)
    diff = positions[iu] - positions[ju]
    return np.hypot(diff[..., 0], diff[..., 1])


def _trapezoid_weights(M: int, dz: float) -> np.ndarray:
    w = np.full(M + 1, dz)
    w[0] = w[-1] = 0.5 * dz
    return w


# ---- Energy, gradient, Hessian -------------------------------------------------


def g0_energy(f: FilamentConfiguration) -> float:
    """
    π Σ_seg ½Σ|Δf_i|²/Δz − π Σ_k w_k Σ_{i≠j} log|f_i−f_j|, +inf on interior collisions.

    An end half-cell whose endpoint pair coincides is integrated exactly for the
    affine separation of that half-cell, so colliding boundary vortices stay finite.
    """
    pos = f.positions
    dz = f.dz
    kinetic = 0.5 * np.sum(np.diff(pos, axis=1) ** 2) / dz
    if f.n < 2:
        return float(math.pi * kinetic)

    dist = _pair_distances(pos)
    if np.any(dist[:, 1:-1] <= 0.0):
        return math.inf

    w = _trapezoid_weights(f.M, dz)
    log_sum = 0.0
    for k, nb in ((0, 1), (f.M, f.M - 1)):
        d_end = dist[:, k]
        regular = d_end > _COINCIDENT
        log_sum += w[k] * np.sum(np.log(d_end[regular]))
        # ∫_0^{Δz/2} log(t|d_nb|/Δz) dt for the coincident pairs
        d_nb = dist[~regular, nb]
        log_sum += np.sum(0.5 * dz * (np.log(0.5 * d_nb) - 1.0))
    log_sum += np.sum(w[1:-1] * np.log(dist[:, 1:-1]))

    # ordered pairs: factor 2 on the i<j sum
    return float(math.pi * (kinetic - 2.0 * log_sum))


def _interaction_field(positions: np.ndarray) -> np.ndarray:
    """Σ_{j≠i} (f_i−f_j)/|f_i−f_j|² per filament and node."""
    n = positions.shape[0]
    out = np.zeros_like(positions)
    for i, j in itertools.combinations(range(n), 2):
        d = positions[i] - positions[j]
        r2 = np.sum(d * d, axis=-1, keepdims=True)
        term = d / r2
        out[i] += term
        out[j] -= term
    return out


def _require_collision_free(f: FilamentConfiguration) -> None:
    sep = f.min_interior_separation()
    if not sep > 0.0:
        dist = _pair_distances(f.positions[:, 1:-1, :])
        k = int(np.argmin(dist.min(axis=0))) + 1
        raise CollisionError("filaments collide at an interior node", height=float(f.z[k]))


def _end_corrections(f: FilamentConfiguration) -> List[Tuple[int, int, int]]:
    """(i, j, neighbour node) for endpoint pairs that coincide."""
    out: List[Tuple[int, int, int]] = []
    pos = f.positions
    for i, j in itertools.combinations(range(f.n), 2):
        for k, nb in ((0, 1), (f.M, f.M - 1)):
            if np.linalg.norm(pos[i, k] - pos[j, k]) <= _COINCIDENT:
                out.append((i, j, nb))
    return out


def g0_gradient(f: FilamentConfiguration) -> np.ndarray:
    """Exact gradient of g0_energy with respect to interior nodes; endpoints get zero."""
    _require_collision_free(f)
    pos = f.positions
    dz = f.dz
    grad = np.zeros_like(pos)
    grad[:, 1:-1] = math.pi * (2.0 * pos[:, 1:-1] - pos[:, :-2] - pos[:, 2:]) / dz
    if f.n >= 2:
        inter = _interaction_field(pos[:, 1:-1])
        grad[:, 1:-1] -= 2.0 * math.pi * dz * inter
        for i, j, nb in _end_corrections(f):
            d = pos[i, nb] - pos[j, nb]
            term = math.pi * dz * d / float(d @ d)
            grad[i, nb] -= term
            grad[j, nb] += term
    return grad


def _log_hessian_block(d: np.ndarray) -> np.ndarray:
    """Hessian of −log|d| in d: (2ddᵀ − |d|²I)/|d|⁴, vectorized over leading axes."""
    r2 = np.sum(d * d, axis=-1)
    outer = d[..., :, None] * d[..., None, :]
    eye = np.eye(2)
    return (2.0 * outer - r2[..., None, None] * eye) / (r2 ** 2)[..., None, None]


def g0_hessian(f: FilamentConfiguration) -> sparse.csr_matrix:
    """
    Sparse Hessian of the discrete G₀ over interior-node coordinates.

    Variable order: filament i, interior node k = 1..M-1, coordinate c.
    """
    _require_collision_free(f)
    n, M, dz = f.n, f.M, f.dz
    m = M - 1
    size = n * m * 2

    def idx(i: int, k: np.ndarray, c: int) -> np.ndarray:
        return (i * m + (k - 1)) * 2 + c

    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []
    ks = np.arange(1, M)
    for i in range(n):
        for c in range(2):
            rows.append(idx(i, ks, c))
            cols.append(idx(i, ks, c))
            vals.append(np.full(m, 2.0 * math.pi / dz))
            if m > 1:
                k0 = ks[:-1]
                rows += [idx(i, k0, c), idx(i, k0 + 1, c)]
                cols += [idx(i, k0 + 1, c), idx(i, k0, c)]
                vals += [np.full(m - 1, -math.pi / dz)] * 2

    def add_pair(i: int, j: int, k: np.ndarray, coef: np.ndarray, blocks: np.ndarray) -> None:
        for a in range(2):
            for b in range(2):
                v = coef * blocks[:, a, b]
                for (p, q, s) in ((i, i, 1.0), (j, j, 1.0), (i, j, -1.0), (j, i, -1.0)):
                    rows.append(idx(p, k, a))
                    cols.append(idx(q, k, b))
                    vals.append(s * v)

    pos = f.positions
    for i, j in itertools.combinations(range(n), 2):
        blocks = _log_hessian_block(pos[i, 1:-1] - pos[j, 1:-1])
        add_pair(i, j, ks, np.full(m, 2.0 * math.pi * dz), blocks)
    for i, j, nb in _end_corrections(f):
        blocks = _log_hessian_block((pos[i, nb] - pos[j, nb])[None, :])
        add_pair(i, j, np.array([nb]), np.array([math.pi * dz]), blocks)

    H = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    )
    return H.tocsr()


def _flatten_interior(arr: np.ndarray) -> np.ndarray:
    return arr[:, 1:-1, :].reshape(-1)


def local_min_diagnostic(f: FilamentConfiguration) -> Dict[str, Any]:
    """Smallest Hessian eigenvalue; positive means strict local minimum of the discrete problem."""
    H = g0_hessian(f)
    if H.shape[0] <= 1500:
        lam = float(np.linalg.eigvalsh(H.toarray())[0])
    else:
        lam = float(eigsh(H, k=1, which="SA", return_eigenvectors=False)[0])
    return {"min_eigenvalue": lam, "is_strict_local_min": lam > 0.0, "size": int(H.shape[0])}


# ---- Euler-Lagrange residual -------------------------------------------------


def _coupling(convention: str) -> float:
    if convention == "gradient":
        return 2.0
    if convention == "unordered":
        return 1.0
    raise ValidationError(f"unknown convention {convention!r}", details={"allowed": list(CONVENTIONS)})


def el_residual(f: FilamentConfiguration, convention: str = "gradient") -> np.ndarray:
    """
    −f_i″ − c Σ_{j≠i}(f_i−f_j)/|f_i−f_j|² at interior nodes (c = 2 gradient, 1 unordered).
    Endpoint rows are zero.
    """
    c = _coupling(convention)
    _require_collision_free(f)
    pos = f.positions
    res = np.zeros_like(pos)
    res[:, 1:-1] = -(pos[:, 2:] - 2.0 * pos[:, 1:-1] + pos[:, :-2]) / f.dz ** 2
    if f.n >= 2:
        res[:, 1:-1] -= c * _interaction_field(pos[:, 1:-1])
    return res


# ---- Endpoint handling ---------------------------------------------------------


def endpoint_constraint_from(f: FilamentConfiguration) -> EndpointConstraint:
    return EndpointConstraint(f.positions[:, 0].copy(), f.positions[:, -1].copy())


def align_to_constraint(f0: FilamentConfiguration, constraint: EndpointConstraint) -> FilamentConfiguration:
    """Relabel the constraint points onto f0's ends by optimal assignment and pin them exactly."""
    if constraint.n != f0.n:
        raise ValidationError(
            "constraint size differs from filament count",
            details={"constraint": constraint.n, "filaments": f0.n},
        )
    pos = f0.positions.copy()
    for k, target in ((0, constraint.bottom), (-1, constraint.top)):
        _, perm = dx_assignment(LabeledPointSet(pos[:, k]), LabeledPointSet(target))
        pos[:, k] = target[list(perm)]
    return f0.with_positions(pos)


# ---- Minimization ------------------------------------------------------------------


def _newton_direction(f: FilamentConfiguration, g: np.ndarray) -> np.ndarray:
    H = g0_hessian(f)
    shift = 0.0
    scale = 2.0 * math.pi / f.dz
    eye = sparse.identity(H.shape[0], format="csr")
    for _ in range(12):
        A = H if shift == 0.0 else H + shift * eye
        p = spsolve(A.tocsc(), -g)
        if np.all(np.isfinite(p)) and float(g @ p) < -1e-14 * np.linalg.norm(g) * np.linalg.norm(p):
            return p
        shift = scale * 1e-6 if shift == 0.0 else shift * 10.0
    return -g / scale


def minimize_g0(
    f0: FilamentConfiguration,
    constraint: Optional[EndpointConstraint] = None,
    tolerance: float = 1e-6,
    max_iters: int = 500,
    *,
    method: str = "newton",
    armijo: float = 1e-4,
    backtrack: float = 0.5,
    seed: int = 0,
    delta: float = 1e-4,
) -> MinimizeResult:
    """
    Minimize the discrete G₀ with endpoints fixed.

    Newton steps on the sparse Hessian (shifted when indefinite) or plain gradient
    steps, both globalized by Armijo backtracking, so the energy never increases.
    Colliding endpoint multisets are first separated in the interior by
    regularize_fdelta applied to the initial guess.
    """
    if method not in ("newton", "descent"):
        raise ValidationError(f"unknown method {method!r}", details={"allowed": ["newton", "descent"]})
    f = align_to_constraint(f0, constraint) if constraint is not None else f0.copy()
    if constraint is not None and constraint.has_repeats() or not f.is_collision_free():
        f = regularize_fdelta(f, delta, seed=seed)
        diag("reduced_model", f"initial guess regularized with delta={delta}")

    energy = g0_energy(f)
    if not math.isfinite(energy):
        raise CollisionError("initial guess has infinite energy")
    g = g0_gradient(f)
    history = [energy]
    eps_e = 4.0 * np.finfo(float).eps

    for it in range(max_iters + 1):
        grad_norm = float(np.max(np.abs(g))) if g.size else 0.0
        if grad_norm <= tolerance:
            diag("reduced_model", f"converged after {it} iterations, |grad|={grad_norm:.3e}")
            return MinimizeResult(f, energy, grad_norm, it, history, method)
        if it == max_iters:
            break

        gv = _flatten_interior(g)
        if method == "newton":
            p = _newton_direction(f, gv)
        else:
            p = -gv * f.dz / (4.0 * math.pi)
        slope = float(gv @ p)

        t = 1.0
        accepted = False
        while t > 1e-14:
            trial_pos = f.positions.copy()
            trial_pos[:, 1:-1, :] += t * p.reshape(f.n, f.M - 1, 2)
            trial = f.with_positions(trial_pos)
            e_new = g0_energy(trial)
            if math.isfinite(e_new):
                if e_new <= energy + armijo * t * slope:
                    accepted = True
                elif e_new <= energy + eps_e * max(1.0, abs(energy)) and e_new <= energy:
                    # decrease below round-off; accept only if the gradient shrinks
                    g_try = g0_gradient(trial)
                    accepted = float(np.max(np.abs(g_try))) < grad_norm
            if accepted:
                break
            t *= backtrack
        if not accepted:
            raise ConvergenceError(
                "line search failed to decrease G0",
                last_iterate=f,
                details={"iterations": it, "grad_norm": grad_norm, "energy": energy},
            )
        f, energy = trial, e_new
        g = g0_gradient(f)
        history.append(energy)

    raise ConvergenceError(
        f"minimize_g0 did not converge in {max_iters} iterations",
        last_iterate=f,
        details={"iterations": max_iters, "grad_norm": float(np.max(np.abs(g))), "energy": energy},
    )


# ---- Quotient distance ---------------------------------------------------------------


def dx_assignment(p: LabeledPointSet, q: LabeledPointSet) -> Tuple[float, Tuple[int, ...]]:
    """
    Optimal matching i -> σ(i) for Σ|p_i − q_σ(i)|²; lexicographically smallest σ
    among the optimal ones for n ≤ 8.
    """
    if p.n != q.n:
        raise ValidationError("point sets differ in size", details={"p": p.n, "q": q.n})
    n = p.n
    if n == 0:
        return 0.0, ()
    cost = np.sum((p.points[:, None, :] - q.points[None, :, :]) ** 2, axis=-1)
    rows, cols = linear_sum_assignment(cost)
    best = float(cost[rows, cols].sum())
    perm = tuple(int(c) for c in cols)
    if n <= 8:
        tol = 1e-12 * max(1.0, best)
        for cand in itertools.permutations(range(n)):
            if float(cost[np.arange(n), cand].sum()) <= best + tol:
                perm = tuple(cand)
                break
    return math.sqrt(max(best, 0.0)), perm


def dx_distance(p: LabeledPointSet, q: LabeledPointSet) -> float:
    return dx_assignment(p, q)[0]


def dx_brute_force(p: LabeledPointSet, q: LabeledPointSet) -> float:
    if p.n != q.n:
        raise ValidationError("point sets differ in size", details={"p": p.n, "q": q.n})
    best = math.inf
    for perm in itertools.permutations(range(p.n)):
        best = min(best, float(np.sum((p.points - q.points[list(perm)]) ** 2)))
    return math.sqrt(best) if p.n else 0.0


# ---- f^δ regularization -----------------------------------------------------------------


def _distance_to_polyline(point: np.ndarray, path: np.ndarray) -> float:
    a = path[:-1]
    b = path[1:]
    ab = b - a
    len2 = np.sum(ab * ab, axis=1)
    t = np.where(len2 > 0, np.sum((point - a) * ab, axis=1) / np.where(len2 > 0, len2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return float(np.min(np.hypot(*(proj - point).T)))


def _apply_shift(f: FilamentConfiguration, delta: float, shift: np.ndarray) -> np.ndarray:
    s = math.sqrt(delta)
    L = f.height
    z = f.z
    f_s = f.at(s)
    f_ls = f.at(L - s)
    out = np.empty_like(f.positions)
    for k, zk in enumerate(z):
        if zk <= s:
            t = zk / s
            out[:, k] = (1.0 - t) * f.positions[:, 0] + t * (f_s + shift)
        elif zk >= L - s:
            t = (L - zk) / s
            out[:, k] = (1.0 - t) * f.positions[:, -1] + t * (f_ls + shift)
        else:
            out[:, k] = f.positions[:, k] + shift
    out[:, 0] = f.positions[:, 0]
    out[:, -1] = f.positions[:, -1]
    return out


def fdelta_separation_bound(z: np.ndarray, height: float, delta: float) -> np.ndarray:
    s = math.sqrt(delta)
    return s * np.minimum(np.minimum(z, height - z), s)


def _separation_ok(positions: np.ndarray, z: np.ndarray, height: float, delta: float) -> bool:
    if positions.shape[0] < 2:
        return True
    dist = _pair_distances(positions)[:, 1:-1]
    bound = fdelta_separation_bound(z[1:-1], height, delta)
    return bool(np.all(dist >= bound * (1.0 - 1e-12)))


def _check_delta(f: FilamentConfiguration, delta: float) -> None:
    if not (0.0 < delta and math.sqrt(delta) < 0.5 * f.height):
        raise ValidationError("need 0 < delta and sqrt(delta) < L/2", details={"delta": delta, "L": f.height})


def sample_fdelta_shift(
    f: FilamentConfiguration,
    delta: float,
    rng: np.random.Generator,
    *,
    max_draws: int = 10000,
) -> np.ndarray:
    """Rejection-sample a^δ with |a_i| ≤ δ^{1/3} avoiding the δ-neighbourhoods of Image(f_i − f_j)."""
    _check_delta(f, delta)
    radius = delta ** (1.0 / 3.0)
    n = f.n
    images = {
        (i, j): f.positions[i] - f.positions[j] for i, j in itertools.permutations(range(n), 2)
    }
    for _ in range(max_draws):
        a = rng.uniform(-radius, radius, size=(n, 2))
        if np.any(np.hypot(a[:, 0], a[:, 1]) > radius):
            continue
        near = False
        for (i, j), path in images.items():
            for target in (a[i] - a[j], a[j] - a[i]):
                if _distance_to_polyline(target, path) < delta:
                    near = True
                    break
            if near:
                break
        if near:
            continue
        if not _separation_ok(_apply_shift(f, delta, a), f.z, f.height, delta):
            continue
        return a
    raise SamplingError(
        f"no admissible shift found in {max_draws} draws",
        details={"delta": delta, "max_draws": max_draws},
    )


def regularize_fdelta(
    f: FilamentConfiguration,
    delta: float,
    *,
    rng: Optional[np.random.Generator] = None,
    seed: int = 0,
    max_draws: int = 10000,
    shift: Optional[np.ndarray] = None,
) -> FilamentConfiguration:
    """
    f^δ: f at z ∈ {0, L}, f + a^δ on [√δ, L − √δ], affine on the two end strips.
    """
    _check_delta(f, delta)
    if shift is None:
        rng = rng if rng is not None else np.random.default_rng(seed)
        return f.with_positions(_apply_shift(f, delta, sample_fdelta_shift(f, delta, rng, max_draws=max_draws)))
    a = np.asarray(shift, dtype=float)
    if a.shape != (f.n, 2):
        raise ValidationError("shift must have one planar vector per filament", details={"shape": list(a.shape), "n": f.n})
    if np.any(np.hypot(a[:, 0], a[:, 1]) > delta ** (1.0 / 3.0) * (1.0 + 1e-12)):
        raise ValidationError("shift exceeds delta^(1/3)", details={"delta": delta})
    return f.with_positions(_apply_shift(f, delta, a))


# ---- Oracles and diagnostics ---------------------------------------------------------------


def shooting_oracle(a: float, height: float, M: int, convention: str = "gradient") -> np.ndarray:
    """
    Symmetric pair f₁ = −f₂ = (x(z), 0) with x(0) = x(L) = a solves x″ = −c/(2x).

    Returns x at the M+1 uniform z-nodes.
    """
    c = _coupling(convention)
    half = 0.5 * height

    def rhs(_z: float, y: np.ndarray) -> List[float]:
        return [y[1], -0.5 * c / y[0]]

    def slope_at_half(s: float) -> float:
        sol = solve_ivp(rhs, (0.0, half), [a, s], rtol=1e-12, atol=1e-14)
        return float(sol.y[1, -1])

    hi = 1.0
    while slope_at_half(hi) <= 0.0:
        hi *= 2.0
    s_star = brentq(slope_at_half, 0.0, hi, xtol=1e-15, rtol=1e-15)
    z = np.linspace(0.0, height, M + 1)
    zs = np.minimum(z, height - z)
    sol = solve_ivp(rhs, (0.0, half), [a, s_star], rtol=1e-12, atol=1e-14, dense_output=True)
    return sol.sol(zs)[0]


def minimizer_window(domain: DomainSpec, height: float, n: int) -> Dict[str, Any]:
    """
    Minimizers are expected near the axis only when L < 2·dist(0, ∂ω): otherwise
    filaments escaping to the lateral boundary are cheaper at leading order.
    """
    dist = float(distance_to_boundary(domain, 0.0, 0.0))
    return {
        "dist": dist,
        "height": height,
        "satisfied": bool(height < 2.0 * dist),
        "straight_rate": n * math.pi * height,
        "escape_rate": 2.0 * n * math.pi * dist,
    }
