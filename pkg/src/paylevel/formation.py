"""Leader-follower formation control.

Each follower holds a desired distance ``rho_d`` and bearing ``psi_d`` (measured
in the leader's body frame) to the leader, and derives its command from the
leader's pose and command plus its own body-frame tracking errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .kinematics import (
    DEFAULT_OMEGA_MAX,
    DEFAULT_V_MAX,
    Pose2D,
    VelocityCommand,
    saturate,
    wrap_angle,
)


@dataclass(frozen=True)
class FormationGains:
    k1: float = 1.0
    k2: float = 2.0
    k3: float = 0.002
    d: float = 0.1
    v_max: float = DEFAULT_V_MAX
    omega_max: float = DEFAULT_OMEGA_MAX

    def __post_init__(self) -> None:
        if min(self.k1, self.k2, self.k3) <= 0:
            raise ValueError("formation gains k1, k2, k3 must be > 0")
        if self.d <= 0:
            raise ValueError("offset length d must be > 0")
        if self.v_max <= 0 or self.omega_max <= 0:
            raise ValueError("velocity caps must be > 0")


@dataclass(frozen=True)
class FollowerSpec:
    rho_d: float
    psi_d: float

    def __post_init__(self) -> None:
        if not self.rho_d > 0:
            raise ValueError(f"rho_d must be > 0, got {self.rho_d}")

    @classmethod
    def from_mounts(cls, leader_mount: tuple[float, float], mount: tuple[float, float]) -> "FollowerSpec":
        """Spec that keeps ``mount`` at its place relative to ``leader_mount``.

        Both mounts are given in the payload frame, whose x-axis is the
        leader's heading.
        """
        dx = mount[0] - leader_mount[0]
        dy = mount[1] - leader_mount[1]
        return cls(math.hypot(dx, dy), math.atan2(dy, dx))


@dataclass(frozen=True)
class TrackingError:
    alpha: float
    beta: float
    x_je: float
    y_je: float
    theta_je: float


def desired_follower_pose(leader: Pose2D, spec: FollowerSpec) -> Pose2D:
    bearing = leader.theta + spec.psi_d
    return Pose2D(
        leader.x + spec.rho_d * math.cos(bearing),
        leader.y + spec.rho_d * math.sin(bearing),
        leader.theta,
    )


def compute_tracking_errors(leader: Pose2D, follower: Pose2D, spec: FollowerSpec) -> TrackingError:
    target = desired_follower_pose(leader, spec)
    dx = target.x - follower.x
    dy = target.y - follower.y
    c, s = math.cos(follower.theta), math.sin(follower.theta)
    # world offset rotated into the follower body frame
    x_je = c * dx + s * dy
    y_je = -s * dx + c * dy
    theta_je = wrap_angle(leader.theta - follower.theta)
    return TrackingError(alpha=x_je, beta=y_je, x_je=x_je, y_je=y_je, theta_je=theta_je)


def follower_law(
    leader: Pose2D,
    leader_cmd: VelocityCommand,
    follower: Pose2D,
    spec: FollowerSpec,
    gains: FormationGains,
) -> VelocityCommand:
    """Unsaturated follower command.

    The relative heading ``theta_ij`` is taken to be the heading error
    ``theta_je``. The mixed ``sin(psi - theta)`` / ``cos(psi + theta)`` terms are
    kept exactly as in the original control law.
    """
    err = compute_tracking_errors(leader, follower, spec)
    th = err.theta_je
    v_i, w_i = leader_cmd.v, leader_cmd.omega
    v = gains.k1 * err.alpha + v_i * math.cos(th) - spec.rho_d * w_i * math.sin(spec.psi_d - th)
    omega = (
        v_i * math.sin(th)
        + spec.rho_d * w_i * math.cos(spec.psi_d + th)
        + gains.k2 * err.beta
        + gains.k3 * th
    ) / gains.d
    return VelocityCommand(v, omega)


def follower_command(
    leader: Pose2D,
    leader_cmd: VelocityCommand,
    follower: Pose2D,
    spec: FollowerSpec,
    gains: FormationGains,
) -> tuple[VelocityCommand, bool]:
    """Saturated follower command plus a flag telling whether the caps bit."""
    raw = follower_law(leader, leader_cmd, follower, spec, gains)
    return saturate(raw, gains.v_max, gains.omega_max)


def follower_control(
    leader: Pose2D,
    leader_cmd: VelocityCommand,
    follower: Pose2D,
    spec: FollowerSpec,
    gains: FormationGains | None = None,
) -> VelocityCommand:
    return follower_command(leader, leader_cmd, follower, spec, gains or FormationGains())[0]
