"""Payload leveling law.

Small payload rotations map linearly to piston height changes: a roll
``theta_x`` moves a mount at ``(x_i, y_i)`` by ``theta_x * y_i`` and a pitch
``theta_y`` by ``theta_y * x_i``. Stacking the mounts gives the n x 2 geometry
matrix ``B`` with rows ``[y_i, x_i]``. To cancel a measured tilt each piston is
moved by ``B @ (-theta)``.

Sign convention used throughout the package: the payload height field is
``z(x, y) = z0 + theta_x * y + theta_y * x`` in the payload frame.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

SMALL_ANGLE_LIMIT = math.pi / 6
DEFAULT_STEP_CLAMP = 0.02


class DegenerateLayoutError(ValueError):
    """The mount layout cannot actuate one of the rotation axes."""


class SmallAngleWarning(UserWarning):
    """Tilt outside the range where the arc-length linearisation is trusted."""


@dataclass(frozen=True)
class MountLayout:
    """Piston mount points ``(x_i, y_i)`` in the payload frame."""

    positions: tuple[tuple[float, float], ...]

    def __init__(self, positions):
        pts = np.asarray(positions, dtype=float).reshape(-1, 2)
        if pts.shape[0] < 1:
            raise ValueError("a layout needs at least one mount")
        if not np.all(np.isfinite(pts)):
            raise ValueError("mount positions must be finite")
        object.__setattr__(self, "positions", tuple((float(x), float(y)) for x, y in pts))

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.positions, dtype=float)


@dataclass(frozen=True)
class Orientation:
    theta_x: float = 0.0  # roll
    theta_y: float = 0.0  # pitch

    def as_array(self) -> np.ndarray:
        return np.array([self.theta_x, self.theta_y], dtype=float)

    @property
    def magnitude(self) -> float:
        return math.hypot(self.theta_x, self.theta_y)


@dataclass
class PistonHeights:
    lengths: np.ndarray
    l_total: float
    saturated: np.ndarray = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.lengths = np.asarray(self.lengths, dtype=float).copy()
        if self.saturated is None:
            self.saturated = np.zeros(self.lengths.shape, dtype=bool)

    @property
    def l_mean(self) -> float:
        return mean_height(self.l_total)

    @classmethod
    def at_mean(cls, n: int, l_total: float) -> "PistonHeights":
        return cls(np.full(n, mean_height(l_total)), l_total)


@dataclass(frozen=True)
class AngleBounds:
    theta_x_min: float
    theta_x_max: float
    theta_y_min: float
    theta_y_max: float

    def contains(self, theta: Orientation) -> bool:
        return (
            self.theta_x_min <= theta.theta_x <= self.theta_x_max
            and self.theta_y_min <= theta.theta_y <= self.theta_y_max
        )


@dataclass(frozen=True)
class Controllability:
    controllable: bool
    rank: int
    roll_actuated: bool
    pitch_actuated: bool
    collinear: bool
    message: str


def mean_height(l_total: float) -> float:
    if not (math.isfinite(l_total) and l_total > 0):
        raise ValueError(f"piston stroke l_total must be > 0, got {l_total!r}")
    return l_total / 2.0


def geometry_matrix(layout: MountLayout) -> np.ndarray:
    pts = layout.array
    return np.column_stack([pts[:, 1], pts[:, 0]])


def _check_small_angle(theta: np.ndarray) -> None:
    if np.any(np.abs(theta) >= SMALL_ANGLE_LIMIT):
        warnings.warn(
            f"tilt {np.degrees(theta).round(2).tolist()} deg is outside the small-angle model",
            SmallAngleWarning,
            stacklevel=3,
        )


def delta_lengths(layout: MountLayout, theta: Orientation) -> np.ndarray:
    """Height change at each mount produced by rotating the payload by ``theta``."""
    vec = theta.as_array()
    _check_small_angle(vec)
    return geometry_matrix(layout) @ vec


def update_heights(
    prev: PistonHeights,
    measured: Orientation,
    layout: MountLayout,
    step_clamp: float = DEFAULT_STEP_CLAMP,
) -> PistonHeights:
    """One iteration of the leveling loop.

    The measured tilt is fed back negated, the per-step change is limited to
    ``step_clamp`` and the result is held inside ``[0, l_total]``. With
    ``step_clamp=math.inf`` this is the plain accumulate-and-clamp update.
    """
    delta = delta_lengths(layout, Orientation(-measured.theta_x, -measured.theta_y))
    if len(delta) != len(prev.lengths):
        raise ValueError(f"layout has {len(delta)} mounts but {len(prev.lengths)} pistons")
    clipped = np.clip(delta, -step_clamp, step_clamp)
    raw = prev.lengths + clipped
    lengths = np.clip(raw, 0.0, prev.l_total)
    saturated = (clipped != delta) | (lengths != raw)
    return PistonHeights(lengths, prev.l_total, saturated)


def achievable_angle_bounds(layout: MountLayout, l_total: float) -> AngleBounds:
    """Largest single-axis tilts the stroke can produce on flat ground."""
    pts = layout.array
    x_spread = float(np.ptp(pts[:, 0]))
    y_spread = float(np.ptp(pts[:, 1]))
    if x_spread <= 0:
        raise DegenerateLayoutError("pitch (theta_y) is not actuatable: all mounts share one x")
    if y_spread <= 0:
        raise DegenerateLayoutError("roll (theta_x) is not actuatable: all mounts share one y")
    ty = l_total / x_spread
    tx = l_total / y_spread
    return AngleBounds(-tx, tx, -ty, ty)


def controllability_check(layout: MountLayout, tol: float = 1e-9) -> Controllability:
    pts = layout.array
    B = geometry_matrix(layout)
    rank = int(np.linalg.matrix_rank(B, tol=tol)) if len(pts) else 0
    roll = bool(np.any(np.abs(B[:, 0]) > tol))
    pitch = bool(np.any(np.abs(B[:, 1]) > tol))
    centered = pts - pts.mean(axis=0)
    collinear = len(pts) < 3 or int(np.linalg.matrix_rank(centered, tol=tol)) < 2

    problems = []
    if not roll:
        problems.append("roll uncontrollable (no mount has a y lever arm)")
    if not pitch:
        problems.append("pitch uncontrollable (no mount has an x lever arm)")
    if roll and pitch and rank < 2:
        problems.append("roll and pitch columns are dependent (rank 1)")
    if collinear:
        problems.append("mounts are collinear or fewer than three; payload plane is undetermined")
    ok = rank == 2 and not collinear
    return Controllability(ok, rank, roll, pitch, collinear, "; ".join(problems) or "controllable")


class PistonLeveler(TransformerMixin, BaseEstimator):
    """Leveling law as a transformer.

    ``fit`` takes the mount layout (n x 2) and ``transform`` maps measured
    orientations (m x 2, columns roll and pitch) to corrective piston changes
    (m x n).

    Parameters
    ----------
    l_total : float
        Piston stroke in meters.
    step_clamp : float
        Largest per-update change of any piston, in meters.
    """

    def __init__(self, l_total: float = 0.25, step_clamp: float = DEFAULT_STEP_CLAMP):
        self.l_total = l_total
        self.step_clamp = step_clamp

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=1)
        if X.shape[1] != 2:
            raise ValueError(f"mount layout must have 2 columns, got {X.shape[1]}")
        mean_height(self.l_total)
        self.layout_ = MountLayout(X)
        self.geometry_matrix_ = geometry_matrix(self.layout_)
        self.controllability_ = controllability_check(self.layout_)
        if not self.controllability_.controllable:
            raise DegenerateLayoutError(self.controllability_.message)
        self.bounds_ = achievable_angle_bounds(self.layout_, self.l_total)
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        check_is_fitted(self, "geometry_matrix_")
        X = check_array(X)
        if X.shape[1] != 2:
            raise ValueError(f"orientations must have 2 columns, got {X.shape[1]}")
        _check_small_angle(X)
        return -X @ self.geometry_matrix_.T

    def update(self, prev: PistonHeights, measured: Orientation) -> PistonHeights:
        check_is_fitted(self, "geometry_matrix_")
        return update_heights(prev, measured, self.layout_, self.step_clamp)

    def initial_heights(self) -> PistonHeights:
        check_is_fitted(self, "geometry_matrix_")
        return PistonHeights.at_mean(len(self.layout_), self.l_total)
