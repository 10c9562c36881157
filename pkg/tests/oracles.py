"""Independent reference computations used to freeze expected values.

None of these call into the code paths they check.
"""

import math

import numpy as np


def unicycle_arc(v, omega, t):
    """Exact pose after driving at constant (v, omega) from the origin, heading 0."""
    if omega == 0:
        return v * t, 0.0, 0.0
    return (v / omega) * math.sin(omega * t), (v / omega) * (1 - math.cos(omega * t)), omega * t


def grid_search_plane(xy, z, levels=45, points=21):
    """Minimise sum of squared residuals of z0 + gx x + gy y by zooming grid search."""
    xy = np.asarray(xy, float)
    z = np.asarray(z, float)
    center = np.array([z.mean(), 0.0, 0.0])
    half = np.array([np.ptp(z) + 1.0, 1.0, 1.0])
    axis = np.linspace(-1.0, 1.0, points)
    for _ in range(levels):
        c0 = center[0] + half[0] * axis
        c1 = center[1] + half[1] * axis
        c2 = center[2] + half[2] * axis
        Z0, GX, GY = np.meshgrid(c0, c1, c2, indexing="ij")
        pred = Z0[..., None] + GX[..., None] * xy[:, 0] + GY[..., None] * xy[:, 1]
        sse = ((pred - z) ** 2).sum(axis=-1)
        i, j, k = np.unravel_index(np.argmin(sse), sse.shape)
        center = np.array([c0[i], c1[j], c2[k]])
        half = half * 0.5
    return center  # z0, gx, gy


def brute_force_single_axis_limits(mounts, l_total, step=0.001):
    """Largest pure roll and pure pitch gradients over a discretised piston grid.

    Every piston length runs over ``0, step, ..., l_total`` on flat ground. A
    configuration counts as pure pitch when its roll gradient is within half
    of the largest single-step jump the grid can make, and vice versa.
    Returns ``(max_roll, max_pitch)`` as plane gradients.
    """
    mounts = np.asarray(mounts, float)
    M = np.column_stack([np.ones(3), mounts[:, 0], mounts[:, 1]])
    inv = np.linalg.inv(M)
    grid = np.arange(0, int(round(l_total / step)) + 1) * step
    z2, z3 = np.meshgrid(grid, grid, indexing="ij")
    z2, z3 = z2.ravel(), z3.ravel()
    tol_x = 0.5 * step * np.abs(inv[1]).max()
    tol_y = 0.5 * step * np.abs(inv[2]).max()
    best_pitch = best_roll = 0.0
    for z1 in grid:
        gx = inv[1, 0] * z1 + inv[1, 1] * z2 + inv[1, 2] * z3
        gy = inv[2, 0] * z1 + inv[2, 1] * z2 + inv[2, 2] * z3
        pure_pitch = np.abs(gy) <= tol_y
        if pure_pitch.any():
            best_pitch = max(best_pitch, float(np.abs(gx[pure_pitch]).max()))
        pure_roll = np.abs(gx) <= tol_x
        if pure_roll.any():
            best_roll = max(best_roll, float(np.abs(gy[pure_roll]).max()))
    return best_roll, best_pitch


def well_spread_triangle(rng, half_width=1.5, min_spread=1.0, min_det=1.0):
    while True:
        m = rng.uniform(-half_width, half_width, (3, 2))
        det = abs(np.linalg.det(np.column_stack([np.ones(3), m])))
        if np.ptp(m[:, 0]) > min_spread and np.ptp(m[:, 1]) > min_spread and det > min_det:
            return m


def closed_loop_pid(target, kp, ki, kd, slew, l_total, dt, steps, length=0.0):
    """Hand-rolled PID + rate-limited integrator loop; returns the length history."""
    integral = 0.0
    prev = 0.0
    cap = l_total / ki if ki else math.inf
    out = []
    for _ in range(steps):
        e = target - length
        trial = min(max(integral + e * dt, -cap), cap)
        d = (e - prev) / dt
        u = kp * e + ki * trial + kd * d
        frozen = (e > 0 and (u > slew or length >= l_total)) or (e < 0 and (u < -slew or length <= 0))
        if not frozen:
            integral = trial
        else:
            u = kp * e + ki * integral + kd * d
        prev = e
        length = min(max(length + min(max(u, -slew), slew) * dt, 0.0), l_total)
        out.append(length)
    return np.array(out)
