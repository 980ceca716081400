"""Cross-section domains, their uniform grids and z-cylinders."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from filaments.error_handling import ConfigurationError, ValidationError


# Relative slack for the strict "inside" test, so lattice nodes exactly on ∂ω are exterior
_INSIDE_TOL = 1e-12


@dataclass(frozen=True)
class DomainSpec:
    """Disk or axis-aligned rectangle centred at the origin."""

    shape: str
    radius: Optional[float] = None
    half_widths: Optional[Tuple[float, float]] = None

    def __post_init__(self) -> None:
        if self.shape == "disk":
            if self.radius is None or not self.radius > 0:
                raise ConfigurationError("disk domain needs radius > 0", details={"radius": self.radius})
        elif self.shape == "rectangle":
            hw = self.half_widths
            if hw is None or len(hw) != 2 or not (hw[0] > 0 and hw[1] > 0):
                raise ConfigurationError("rectangle domain needs two positive half widths", details={"half_widths": hw})
            object.__setattr__(self, "half_widths", (float(hw[0]), float(hw[1])))
        else:
            raise ConfigurationError(f"unknown domain shape {self.shape!r}", details={"shape": self.shape})

    @classmethod
    def disk(cls, radius: float) -> "DomainSpec":
        return cls(shape="disk", radius=float(radius))

    @classmethod
    def rectangle(cls, half_widths: Tuple[float, float]) -> "DomainSpec":
        return cls(shape="rectangle", half_widths=(float(half_widths[0]), float(half_widths[1])))

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "DomainSpec":
        shape = raw.get("shape")
        if shape == "disk":
            return cls.disk(float(raw.get("radius", 0.0)))
        if shape == "rectangle":
            hw = raw.get("half_widths") or (0.0, 0.0)
            return cls.rectangle((float(hw[0]), float(hw[1])))
        raise ConfigurationError(f"unknown domain shape {shape!r}", details={"shape": shape})

    def to_dict(self) -> Dict[str, Any]:
        if self.shape == "disk":
            return {"shape": "disk", "radius": self.radius}
        return {"shape": "rectangle", "half_widths": list(self.half_widths or ())}

    @property
    def half_extent(self) -> Tuple[float, float]:
        if self.shape == "disk":
            return (float(self.radius), float(self.radius))
        return self.half_widths  # type: ignore[return-value]

    @property
    def area(self) -> float:
        if self.shape == "disk":
            return math.pi * float(self.radius) ** 2
        a, b = self.half_widths  # type: ignore[misc]
        return 4.0 * a * b

    @property
    def perimeter(self) -> float:
        if self.shape == "disk":
            return 2.0 * math.pi * float(self.radius)
        a, b = self.half_widths  # type: ignore[misc]
        return 4.0 * (a + b)


def distance_to_boundary(domain: DomainSpec, x: Any, y: Any) -> np.ndarray:
    """Signed distance to ∂ω, positive inside."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if domain.shape == "disk":
        return float(domain.radius) - np.hypot(x, y)
    a, b = domain.half_widths  # type: ignore[misc]
    return np.minimum(a - np.abs(x), b - np.abs(y))


def contains(domain: DomainSpec, x: Any, y: Any) -> np.ndarray:
    scale = max(domain.half_extent)
    return distance_to_boundary(domain, x, y) > _INSIDE_TOL * scale


def r_star(domain: DomainSpec) -> float:
    return min(1.0, float(distance_to_boundary(domain, 0.0, 0.0)))


def boundary_crossing(domain: DomainSpec, x: Any, y: Any, axis: int, sign: int) -> np.ndarray:
    """
    Distance from interior points to ∂ω along +/- the given lattice axis.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    along, across = (x, y) if axis == 0 else (y, x)
    if domain.shape == "disk":
        R = float(domain.radius)
        return np.sqrt(np.maximum(R * R - across * across, 0.0)) - sign * along
    half = domain.half_widths[axis]  # type: ignore[index]
    return half - sign * along


@dataclass(frozen=True, eq=False)
class Grid2D:
    domain: DomainSpec
    spacing: float
    x: np.ndarray
    y: np.ndarray
    mask: np.ndarray
    boundary_nodes: np.ndarray
    _index: np.ndarray = field(repr=False, compare=False, default=None)  # type: ignore[assignment]

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.x.size, self.y.size)

    @property
    def X(self) -> np.ndarray:
        return np.broadcast_to(self.x[:, None], self.shape)

    @property
    def Y(self) -> np.ndarray:
        return np.broadcast_to(self.y[None, :], self.shape)

    @property
    def n_interior(self) -> int:
        return int(self.mask.sum())

    @property
    def cell_area(self) -> float:
        return self.spacing * self.spacing

    def interior_points(self) -> np.ndarray:
        """(N, 2) coordinates of interior nodes in row-major order."""
        return np.column_stack([self.X[self.mask], self.Y[self.mask]])

    def interior_index(self) -> np.ndarray:
        """Node -> running interior index (-1 outside)."""
        return self._index

    def node_of(self, point: Tuple[float, float]) -> Tuple[int, int]:
        """Nearest lattice node to a point."""
        i = int(np.clip(np.rint((point[0] - self.x[0]) / self.spacing), 0, self.x.size - 1))
        j = int(np.clip(np.rint((point[1] - self.y[0]) / self.spacing), 0, self.y.size - 1))
        return i, j

    def is_interior(self, point: Tuple[float, float]) -> bool:
        i, j = self.node_of(point)
        on_node = abs(self.x[i] - point[0]) < 1e-12 and abs(self.y[j] - point[1]) < 1e-12
        if on_node:
            return bool(self.mask[i, j])
        return bool(contains(self.domain, point[0], point[1]))


def build_grid(domain: DomainSpec, spacing: float, *, min_nodes_across: int = 8) -> Grid2D:
    """
    Uniform node-aligned lattice (origin is a node) covering the bounding box of ω.

    A node is interior iff it lies strictly inside ω; one exterior layer pads every side.
    """
    if not spacing > 0:
        raise ConfigurationError("spacing must be positive", details={"spacing": spacing})

    hx, hy = domain.half_extent
    nodes_across = int(math.floor(2.0 * min(hx, hy) / spacing + 1e-9)) + 1
    if nodes_across < min_nodes_across:
        raise ConfigurationError(
            f"spacing {spacing} too coarse: {nodes_across} nodes across, need {min_nodes_across}",
            details={"spacing": spacing, "nodes_across": nodes_across, "required": min_nodes_across},
        )

    kx = int(math.ceil(hx / spacing - 1e-9)) + 1
    ky = int(math.ceil(hy / spacing - 1e-9)) + 1
    x = spacing * np.arange(-kx, kx + 1, dtype=float)
    y = spacing * np.arange(-ky, ky + 1, dtype=float)
    X, Y = np.meshgrid(x, y, indexing="ij")
    mask = contains(domain, X, Y)

    # interior nodes with at least one exterior 4-neighbour
    inner = np.zeros_like(mask)
    inner[1:-1, 1:-1] = (
        mask[1:-1, 1:-1] & mask[2:, 1:-1] & mask[:-2, 1:-1] & mask[1:-1, 2:] & mask[1:-1, :-2]
    )
    boundary_nodes = np.argwhere(mask & ~inner)

    index = np.full(mask.shape, -1, dtype=np.int64)
    index[mask] = np.arange(int(mask.sum()), dtype=np.int64)

    return Grid2D(
        domain=domain,
        spacing=float(spacing),
        x=x,
        y=y,
        mask=mask,
        boundary_nodes=boundary_nodes,
        _index=index,
    )


def quadrature_2d(values: Any, grid: Grid2D) -> float:
    """Cell-sum rule over interior nodes; accepts full-grid arrays or interior vectors."""
    arr = np.asarray(values)
    if arr.shape == grid.shape:
        data = arr[grid.mask]
    elif arr.ndim == 1 and arr.size == grid.n_interior:
        data = arr
    else:
        raise ValidationError(
            "values do not match the grid",
            details={"values_shape": list(arr.shape), "grid_shape": list(grid.shape)},
        )
    total = grid.cell_area * np.sum(data)
    if np.iscomplexobj(total):
        return complex(total)  # type: ignore[return-value]
    return float(total)


@dataclass(frozen=True)
class CylinderSpec:
    domain: DomainSpec
    height: float
    z_samples: int

    def __post_init__(self) -> None:
        if not self.height > 0:
            raise ConfigurationError("cylinder height must be positive", details={"height": self.height})
        if self.z_samples < 2:
            raise ConfigurationError("need at least two z-samples", details={"z_samples": self.z_samples})

    def z_nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.height, self.z_samples)

    @property
    def dz(self) -> float:
        return self.height / (self.z_samples - 1)
