"""Gridded seafloor depth field, collision and line-of-sight queries.

The seafloor is a rectangular grid of depths (negative below the surface)
with bilinear interpolation between nodes. Line-of-sight tests sample the
segment at a fixed resolution and require strict clearance over the floor;
the pointwise collision predicate is the closed version of the same bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from .errors import OutOfBoundsError, ParameterError

FloatArray = npt.NDArray[np.float64]

#: Default vertical clearance over the floor (m).
DEFAULT_CLEARANCE = 5.0
#: Default line-of-sight sampling resolution (m).
DEFAULT_LOS_RESOLUTION = 10.0


@dataclass(frozen=True)
class SeafloorMap:
    """Depth grid Z[iy, ix] at x = x0 + ix*dx, y = y0 + iy*dy."""

    origin: tuple[float, float]
    cell: tuple[float, float]
    Z: FloatArray
    clearance: float = DEFAULT_CLEARANCE

    def __post_init__(self):
        z = np.asarray(self.Z, dtype=float)
        if z.ndim != 2 or z.shape[0] < 2 or z.shape[1] < 2:
            raise ParameterError(f"depth grid must be at least 2x2, got {z.shape}")
        if not np.all(np.isfinite(z)):
            raise ParameterError("depth grid contains non-finite values")
        if np.any(z >= 0):
            raise ParameterError("seafloor must be strictly below the surface")
        if self.cell[0] <= 0 or self.cell[1] <= 0:
            raise ParameterError(f"cell sizes must be positive, got {self.cell}")
        if self.clearance <= 0:
            raise ParameterError(f"clearance must be positive, got {self.clearance}")
        z = z.copy()
        z.flags.writeable = False
        object.__setattr__(self, "Z", z)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "cell", (float(self.cell[0]), float(self.cell[1])))

    @property
    def shape(self) -> tuple[int, int]:
        return self.Z.shape

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(x_min, x_max, y_min, y_max) covered by the grid."""
        ny, nx = self.Z.shape
        x0, y0 = self.origin
        return (x0, x0 + (nx - 1) * self.cell[0],
                y0, y0 + (ny - 1) * self.cell[1])


@dataclass(frozen=True)
class LosSample:
    """Evenly spaced points along a segment, endpoints included."""

    points: FloatArray
    resolution: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ParameterError(f"sample points must be (m, 3), got {pts.shape}")
        object.__setattr__(self, "points", pts)


def depth_at(sm: SeafloorMap, x, y):
    """Bilinear floor depth at (x, y); accepts scalars or arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x_min, x_max, y_min, y_max = sm.extent
    if np.any(x < x_min) or np.any(x > x_max) or np.any(y < y_min) or np.any(y > y_max):
        raise OutOfBoundsError(
            f"query outside grid extents x[{x_min}, {x_max}] y[{y_min}, {y_max}]")
    ny, nx = sm.Z.shape
    fx = (x - sm.origin[0]) / sm.cell[0]
    fy = (y - sm.origin[1]) / sm.cell[1]
    ix = np.clip(np.floor(fx).astype(int), 0, nx - 2)
    iy = np.clip(np.floor(fy).astype(int), 0, ny - 2)
    u = fx - ix
    v = fy - iy
    z00 = sm.Z[iy, ix]
    z01 = sm.Z[iy, ix + 1]
    z10 = sm.Z[iy + 1, ix]
    z11 = sm.Z[iy + 1, ix + 1]
    out = (z00 * (1 - u) * (1 - v) + z01 * u * (1 - v)
           + z10 * (1 - u) * v + z11 * u * v)
    return float(out) if out.ndim == 0 else out


def interpolate_line(xi, xj, r: float) -> LosSample:
    """Sample the segment xi -> xj every at-most-r meters, endpoints included."""
    if r <= 0:
        raise ParameterError(f"resolution must be positive, got {r}")
    xi = np.asarray(xi, dtype=float).reshape(3)
    xj = np.asarray(xj, dtype=float).reshape(3)
    dist = float(np.linalg.norm(xj - xi))
    m = math.ceil(dist / r)
    if m == 0:
        return LosSample(xi[None, :].copy(), r)
    t = np.linspace(0.0, 1.0, m + 1)
    return LosSample(xi[None, :] + t[:, None] * (xj - xi)[None, :], r)


def los_clear(sm: SeafloorMap, xi, xj, r: float = DEFAULT_LOS_RESOLUTION) -> bool:
    """True when every segment sample clears the floor strictly by epsilon."""
    sample = interpolate_line(xi, xj, r)
    pts = sample.points
    floor = depth_at(sm, pts[:, 0], pts[:, 1])
    return bool(np.all(pts[:, 2] > np.asarray(floor) + sm.clearance))


def collision_free(sm: SeafloorMap, p) -> bool:
    """True when the point sits on or above floor + clearance (closed bound)."""
    p = np.asarray(p, dtype=float).reshape(3)
    return bool(p[2] >= depth_at(sm, p[0], p[1]) + sm.clearance)


def synth_terrain(extent, cell, seed: int, n_seamounts: int = 0,
                  n_valleys: int = 0, base_depth: float = -500.0,
                  amplitude: float = 0.0,
                  clearance: float = DEFAULT_CLEARANCE) -> SeafloorMap:
    """Deterministic synthetic seafloor: Gaussian bumps and dips on a flat base.

    extent is (x_min, x_max, y_min, y_max) and cell the (dx, dy) node spacing.
    Seamounts rise by exactly `amplitude` at their (node-snapped) centers,
    valleys dip by the same amount; widths and placements come from the seed.
    """
    if base_depth >= 0:
        raise ParameterError(f"base depth must be negative, got {base_depth}")
    if (n_seamounts or n_valleys) and not 0 < amplitude < abs(base_depth):
        raise ParameterError(
            f"amplitude must lie in (0, {abs(base_depth)}), got {amplitude}")
    x_min, x_max, y_min, y_max = (float(v) for v in extent)
    dx, dy = (float(cell), float(cell)) if np.isscalar(cell) else (float(cell[0]), float(cell[1]))
    if x_max <= x_min or y_max <= y_min:
        raise ParameterError(f"empty extent {extent}")
    nx = int(math.floor((x_max - x_min) / dx)) + 1
    ny = int(math.floor((y_max - y_min) / dy)) + 1
    if nx < 2 or ny < 2:
        raise ParameterError("extent too small for the cell size")

    xs = x_min + dx * np.arange(nx)
    ys = y_min + dy * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys)
    z = np.full((ny, nx), float(base_depth))

    rng = np.random.default_rng(seed)
    span = min(x_max - x_min, y_max - y_min)
    for sign, count in ((+1.0, n_seamounts), (-1.0, n_valleys)):
        for _ in range(count):
            cx = xs[rng.integers(0, nx)]
            cy = ys[rng.integers(0, ny)]
            sigma = rng.uniform(span / 25.0, span / 8.0)
            bump = np.exp(-((gx - cx) ** 2 + (gy - cy) ** 2) / (2.0 * sigma ** 2))
            z = z + sign * amplitude * bump

    if np.any(z >= 0):
        raise ParameterError("generated surface breaches z = 0; "
                             "reduce amplitude or deepen base_depth")
    return SeafloorMap((x_min, y_min), (dx, dy), z, clearance)


def save_terrain(sm: SeafloorMap, path: str) -> None:
    """Write the map in the plain-text grid format (bit-exact round trip)."""
    lines = [
        "seafloor-grid 1",
        f"origin {sm.origin[0]!r} {sm.origin[1]!r}",
        f"cell {sm.cell[0]!r} {sm.cell[1]!r}",
        f"shape {sm.Z.shape[0]} {sm.Z.shape[1]}",
        f"clearance {sm.clearance!r}",
    ]
    for row in sm.Z:
        lines.append(",".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_terrain(path: str) -> SeafloorMap:
    """Read a map written by save_terrain."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith("seafloor-grid"):
        raise ParameterError(f"{path}: not a seafloor grid file")

    header: dict[str, list[str]] = {}
    idx = 1
    while idx < len(lines) and not lines[idx].split(" ", 1)[0] in header and \
            lines[idx].split(" ", 1)[0] in ("origin", "cell", "shape", "clearance"):
        key, rest = lines[idx].split(" ", 1)
        header[key] = rest.split()
        idx += 1
    missing = {"origin", "cell", "shape", "clearance"} - set(header)
    if missing:
        raise ParameterError(f"{path}: missing header fields {sorted(missing)}")
    ny, nx = int(header["shape"][0]), int(header["shape"][1])
    rows = []
    for ln in lines[idx:]:
        if not ln:
            continue
        rows.append([float(v) for v in ln.split(",")])
    z = np.array(rows, dtype=float)
    if z.shape != (ny, nx):
        raise ParameterError(f"{path}: expected {ny}x{nx} grid, got {z.shape}")
    return SeafloorMap(
        (float(header["origin"][0]), float(header["origin"][1])),
        (float(header["cell"][0]), float(header["cell"][1])),
        z,
        float(header["clearance"][0]),
    )
