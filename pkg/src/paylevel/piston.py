"""PID tracking of piston rod length.

The PID output is a rod velocity. :func:`actuate` integrates it after a slew
limit and clamps the result to the stroke.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class PIDGains:
    kp: float = 8.0
    ki: float = 2.0
    kd: float = 0.1

    def __post_init__(self) -> None:
        if min(self.kp, self.ki, self.kd) < 0:
            raise ValueError("PID gains must be >= 0")
        if self.kp == self.ki == self.kd == 0:
            raise ValueError("at least one PID gain must be non-zero")

    def integral_cap(self, l_total: float) -> float:
        return l_total / self.ki if self.ki > 0 else math.inf


@dataclass(frozen=True)
class PistonState:
    length: float = 0.0
    target: float = 0.0
    integral: float = 0.0
    prev_error: float = 0.0
    l_total: float = 0.25
    slew_limit: float = 0.05

    def __post_init__(self) -> None:
        if self.l_total <= 0:
            raise ValueError("l_total must be > 0")
        if self.slew_limit <= 0:
            raise ValueError("slew_limit must be > 0")
        if not 0.0 <= self.length <= self.l_total:
            raise ValueError(f"length {self.length} outside stroke [0, {self.l_total}]")

    @property
    def error(self) -> float:
        return self.target - self.length


def pid_step(state: PistonState, gains: PIDGains, dt: float) -> tuple[float, PistonState]:
    """Evaluate the PID law once.

    Returns the commanded rod velocity and the state with updated integral and
    previous error. The integral is clamped to ``l_total / ki`` and is frozen
    while the output is pinned at the slew limit, or the rod at an end of its
    stroke, in the direction of the error.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    e = state.target - state.length
    cap = gains.integral_cap(state.l_total)
    integral = min(max(state.integral + e * dt, -cap), cap)
    derivative = (e - state.prev_error) / dt
    u = gains.kp * e + gains.ki * integral + gains.kd * derivative

    pushing_out = e > 0 and (u > state.slew_limit or state.length >= state.l_total)
    pushing_in = e < 0 and (u < -state.slew_limit or state.length <= 0.0)
    if pushing_out or pushing_in:
        integral = state.integral
        u = gains.kp * e + gains.ki * integral + gains.kd * derivative
    return u, replace(state, integral=integral, prev_error=e)


def actuate(state: PistonState, u: float, dt: float) -> tuple[PistonState, bool, bool]:
    """Move the rod for one tick at velocity ``u``.

    Returns the new state and two flags: slew limit hit, stroke limit hit.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    rate = min(max(u, -state.slew_limit), state.slew_limit)
    raw = state.length + rate * dt
    length = min(max(raw, 0.0), state.l_total)
    return replace(state, length=length), rate != u, length != raw


def settle(state: PistonState, gains: PIDGains, dt: float, steps: int) -> PistonState:
    for _ in range(steps):
        u, state = pid_step(state, gains, dt)
        state, _, _ = actuate(state, u, dt)
    return state
