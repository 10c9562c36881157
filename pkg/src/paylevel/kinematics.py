"""Discrete-time skid-steer kinematics.

A skid-steer robot whose left and right wheel pairs each turn at a common
speed behaves like a unicycle, so the state is ``(x, y, theta)`` and the input
is ``(v, omega)``. States are advanced with one explicit Euler step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

DEFAULT_DT = 0.02
DEFAULT_V_MAX = 1.0
DEFAULT_OMEGA_MAX = 2.0


class StateValidityError(ValueError):
    """Raised when a pose, command or timestep is not finite or not usable."""


def wrap_angle(theta: float) -> float:
    """Wrap an angle into the half-open interval (-pi, pi]."""
    if not math.isfinite(theta):
        raise StateValidityError(f"angle must be finite, got {theta!r}")
    wrapped = math.fmod(theta + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    theta: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "theta"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise StateValidityError(f"Pose2D.{name} must be finite, got {value!r}")

    @classmethod
    def wrapped(cls, x: float, y: float, theta: float) -> "Pose2D":
        return cls(float(x), float(y), wrap_angle(float(theta)))


@dataclass(frozen=True)
class VelocityCommand:
    v: float = 0.0
    omega: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.v) and math.isfinite(self.omega)):
            raise StateValidityError(f"non-finite velocity command ({self.v!r}, {self.omega!r})")


def saturate(
    u: VelocityCommand, v_max: float = DEFAULT_V_MAX, omega_max: float = DEFAULT_OMEGA_MAX
) -> tuple[VelocityCommand, bool]:
    """Clamp a command to the velocity caps.

    Returns the clamped command and whether any component was clipped.
    """
    v = min(max(u.v, -v_max), v_max)
    omega = min(max(u.omega, -omega_max), omega_max)
    return VelocityCommand(v, omega), (v != u.v or omega != u.omega)


def step_unicycle(q: Pose2D, u: VelocityCommand, dt: float = DEFAULT_DT) -> Pose2D:
    """Advance a pose by one Euler step of the unicycle model.

    ``x += cos(theta) v dt``, ``y += sin(theta) v dt``, ``theta += omega dt``.
    The heading is wrapped into (-pi, pi].
    """
    if not (math.isfinite(dt) and dt > 0.0):
        raise StateValidityError(f"dt must be positive and finite, got {dt!r}")
    x = q.x + math.cos(q.theta) * u.v * dt
    y = q.y + math.sin(q.theta) * u.v * dt
    theta = q.theta + u.omega * dt
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(theta)):
        raise StateValidityError(f"step produced a non-finite state from {q} with {u}")
    return Pose2D(x, y, wrap_angle(theta))
