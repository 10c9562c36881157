"""Terrain, piston-tip geometry, payload plane fit and the IMU model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .kinematics import Pose2D
from .leveling import MountLayout, Orientation

DEFAULT_ARENA = (-100.0, 100.0, -100.0, 100.0)


class TerrainBoundsError(ValueError):
    """Raised for an elevation query outside the arena."""


class UnderdeterminedPlaneError(ValueError):
    """Fewer than three supports, or all supports on one line."""


def _check_arena(bounds, x: float, y: float) -> None:
    xmin, xmax, ymin, ymax = bounds
    if not (xmin <= x <= xmax and ymin <= y <= ymax):
        raise TerrainBoundsError(f"point ({x:.4f}, {y:.4f}) is outside the arena {bounds}")


@dataclass(frozen=True)
class Flat:
    bounds: tuple[float, float, float, float] = DEFAULT_ARENA

    def height(self, x: float, y: float) -> float:
        return 0.0


@dataclass(frozen=True)
class InclinedPlane:
    """A plank rising along +x (pitch) and/or +y (roll).

    With ``start`` set the pitch slope only applies for ``x >= start``; the
    surface is flat before it, so elevation stays continuous at the edge.
    """

    pitch: float = 0.0
    roll: float = 0.0
    start: float | None = None
    bounds: tuple[float, float, float, float] = DEFAULT_ARENA

    def height(self, x: float, y: float) -> float:
        u = x if self.start is None else max(0.0, x - self.start)
        return math.tan(self.pitch) * u + math.tan(self.roll) * y


@dataclass(frozen=True)
class Corridor:
    """Assigns ``plane`` to the band ``y_min <= y < y_max``."""

    plane: InclinedPlane
    y_min: float
    y_max: float

    def contains(self, y: float) -> bool:
        return self.y_min <= y < self.y_max


@dataclass(frozen=True)
class MultiPlane:
    """Side-by-side planks; points outside every corridor are flat ground."""

    corridors: tuple[Corridor, ...]
    bounds: tuple[float, float, float, float] = DEFAULT_ARENA

    def height(self, x: float, y: float) -> float:
        for corridor in self.corridors:
            if corridor.contains(y):
                return corridor.plane.height(x, y)
        return 0.0


@dataclass(frozen=True, eq=False)
class Heightmap:
    """Elevation grid sampled with bilinear interpolation.

    ``grid[i, j]`` is the elevation at ``(origin_x + j * cell_size,
    origin_y + i * cell_size)``.
    """

    grid: np.ndarray
    cell_size: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 2 or min(grid.shape) < 2:
            raise ValueError(f"heightmap grid must be 2-D with at least 2x2 nodes, got {grid.shape}")
        if not np.all(np.isfinite(grid)):
            raise ValueError("heightmap contains non-finite elevations")
        if not self.cell_size > 0:
            raise ValueError("cell_size must be > 0")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        rows, cols = self.grid.shape
        x0, y0 = self.origin
        return (x0, x0 + (cols - 1) * self.cell_size, y0, y0 + (rows - 1) * self.cell_size)

    def height(self, x: float, y: float) -> float:
        rows, cols = self.grid.shape
        fx = (x - self.origin[0]) / self.cell_size
        fy = (y - self.origin[1]) / self.cell_size
        j = min(int(math.floor(fx)), cols - 2)
        i = min(int(math.floor(fy)), rows - 2)
        tx, ty = fx - j, fy - i
        g = self.grid
        bottom = g[i, j] * (1 - tx) + g[i, j + 1] * tx
        top = g[i + 1, j] * (1 - tx) + g[i + 1, j + 1] * tx
        return float(bottom * (1 - ty) + top * ty)


Terrain = Union[Flat, InclinedPlane, MultiPlane, Heightmap]


def elevation(terrain: Terrain, x: float, y: float) -> float:
    _check_arena(terrain.bounds, x, y)
    return terrain.height(x, y)


def procedural_heightmap(
    seed: int = 3,
    extent: tuple[float, float, float, float] = (-4.0, 14.0, -5.0, 5.0),
    cell_size: float = 0.1,
    amplitude: float = 0.03,
    wavelength: float = 3.0,
    n_waves: int = 4,
) -> Heightmap:
    """Smooth rolling terrain made of a few random plane waves.

    The steepest possible gradient is ``n_waves * amplitude * 2 pi / wavelength``.
    """
    rng = np.random.default_rng(seed)
    xmin, xmax, ymin, ymax = extent
    cols = int(round((xmax - xmin) / cell_size)) + 1
    rows = int(round((ymax - ymin) / cell_size)) + 1
    xs = xmin + cell_size * np.arange(cols)
    ys = ymin + cell_size * np.arange(rows)
    X, Y = np.meshgrid(xs, ys)
    Z = np.zeros_like(X)
    for _ in range(n_waves):
        direction = rng.uniform(0.0, 2.0 * math.pi)
        lam = wavelength * rng.uniform(1.0, 2.0)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        amp = amplitude * rng.uniform(0.5, 1.0)
        k = 2.0 * math.pi / lam
        Z += amp * np.sin(k * (X * math.cos(direction) + Y * math.sin(direction)) + phase)
    return Heightmap(Z, cell_size, (xmin, ymin))


def read_heightmap(path: str | Path) -> Heightmap:
    """Read the plain-text grid format written by :func:`write_heightmap`.

    Header lines ``rows R``, ``cols C``, ``cell_size S`` and ``origin X Y``
    come first (``#`` starts a comment), then R lines of C elevations each,
    row-major, starting at the ``origin`` row.
    """
    header: dict[str, list[str]] = {}
    values: list[list[float]] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        if head in ("rows", "cols", "cell_size", "origin"):
            if values:
                raise ValueError(f"{path}:{lineno}: header key {head!r} after grid data")
            header[head] = rest
            continue
        try:
            values.append([float(v) for v in line.split()])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: cannot parse grid row {raw!r}") from None
    missing = {"rows", "cols", "cell_size"} - header.keys()
    if missing:
        raise ValueError(f"{path}: missing header keys {sorted(missing)}")
    rows, cols = int(header["rows"][0]), int(header["cols"][0])
    grid = np.array(values, dtype=float)
    if grid.shape != (rows, cols):
        raise ValueError(f"{path}: header says {rows}x{cols} but grid is {grid.shape}")
    origin = tuple(float(v) for v in header.get("origin", ["0", "0"]))
    return Heightmap(grid, float(header["cell_size"][0]), origin)


def write_heightmap(path: str | Path, heightmap: Heightmap) -> None:
    rows, cols = heightmap.grid.shape
    lines = [
        f"rows {rows}",
        f"cols {cols}",
        f"cell_size {heightmap.cell_size!r}",
        f"origin {heightmap.origin[0]!r} {heightmap.origin[1]!r}",
    ]
    lines += [" ".join(repr(float(v)) for v in row) for row in heightmap.grid]
    Path(path).write_text("\n".join(lines) + "\n")


def piston_tip(
    robot: Pose2D, terrain: Terrain, piston_length: float, chassis_height: float
) -> np.ndarray:
    """Top of the piston rod, with the rod taken as world-vertical."""
    ground = elevation(terrain, robot.x, robot.y)
    return np.array([robot.x, robot.y, ground + chassis_height + piston_length])


@dataclass(frozen=True)
class PayloadSupport:
    tips: np.ndarray

    def __post_init__(self) -> None:
        tips = np.asarray(self.tips, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(tips)):
            raise ValueError("piston tips must be finite")
        object.__setattr__(self, "tips", tips)


class PlaneFit(RegressorMixin, BaseEstimator):
    """Least-squares plane ``z = z0 + g_x x + g_y y`` through support points.

    Exact for three non-collinear points. ``coef_`` holds ``(g_x, g_y)`` and
    ``orientation_`` the matching roll/pitch.
    """

    def __init__(self, collinear_tol: float = 1e-9):
        self.collinear_tol = collinear_tol

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if X.shape[1] != 2:
            raise ValueError(f"expected planar (x, y) mounts, got {X.shape[1]} columns")
        if X.shape[0] < 3:
            raise UnderdeterminedPlaneError(f"need at least 3 supports, got {X.shape[0]}")
        center = X.mean(axis=0)
        A = X - center
        if np.linalg.matrix_rank(A, tol=self.collinear_tol) < 2:
            raise UnderdeterminedPlaneError("supports are collinear; plane is undetermined")
        # centered columns are orthogonal to constants, so any offset works;
        # y[0] makes equal heights give exactly zero slope
        coef, *_ = np.linalg.lstsq(A, y - y[0], rcond=None)
        z_mean = y.mean()
        self.coef_ = coef
        self.intercept_ = float(z_mean - coef @ center)
        self.orientation_ = Orientation(math.atan(coef[1]), math.atan(coef[0]))
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return self.intercept_ + X @ self.coef_


def payload_orientation(support: PayloadSupport, layout: MountLayout) -> Orientation:
    """Roll and pitch of the payload resting on the piston tips.

    The plane is fitted over payload-frame mount coordinates against tip
    heights, so the result is expressed in the payload frame.
    """
    if len(support.tips) != len(layout):
        raise ValueError(f"{len(support.tips)} tips for {len(layout)} mounts")
    return PlaneFit().fit(layout.array, support.tips[:, 2]).orientation_


@dataclass(frozen=True)
class ImuModel:
    rate: float = 50.0
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.rate > 0:
            raise ValueError("IMU rate must be > 0")
        if self.noise_std < 0:
            raise ValueError("IMU noise_std must be >= 0")


@dataclass
class ImuSampler:
    """Rate-limited, optionally noisy orientation sampler.

    Feed it the true orientation at non-decreasing times; it returns a
    measurement when a new ``1 / rate`` boundary has been reached and ``None``
    otherwise. ``last`` keeps the most recent measurement.
    """

    model: ImuModel = field(default_factory=ImuModel)
    last: Orientation | None = None
    _next_index: int = 0
    _t_prev: float = -math.inf
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._rng = np.random.default_rng(self.model.seed)

    def sample(self, truth: Orientation, t: float) -> Orientation | None:
        if t < self._t_prev:
            raise ValueError(f"IMU queried backwards in time ({t} < {self._t_prev})")
        self._t_prev = t
        # integer boundary index avoids float drift over long runs
        position = t * self.model.rate
        if position + 1e-9 < self._next_index:
            return None
        self._next_index = math.floor(position + 1e-9) + 1
        if self.model.noise_std > 0:
            nx, ny = self._rng.normal(0.0, self.model.noise_std, size=2)
            measured = Orientation(truth.theta_x + nx, truth.theta_y + ny)
        else:
            measured = truth
        self.last = measured
        return measured


def imu_sample(truth: Orientation, t: float, sampler: ImuSampler) -> Orientation | None:
    return sampler.sample(truth, t)


def support_from_plane(
    layout: MountLayout, theta: Orientation, z0: float = 0.0
) -> PayloadSupport:
    """Tips lying on ``z = z0 + tan(theta_x) y + tan(theta_y) x`` over the mounts."""
    pts = layout.array
    z = z0 + math.tan(theta.theta_x) * pts[:, 1] + math.tan(theta.theta_y) * pts[:, 0]
    return PayloadSupport(np.column_stack([pts, z]))


def tips_for(
    poses: Sequence[Pose2D], lengths: Sequence[float], terrain: Terrain, chassis_height: float
) -> PayloadSupport:
    return PayloadSupport(
        np.array([piston_tip(p, terrain, l, chassis_height) for p, l in zip(poses, lengths)])
    )
