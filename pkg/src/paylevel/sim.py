"""Fixed-timestep closed-loop simulation.

Each tick runs, in order: leader command, follower commands, pose update,
payload plane fit over the piston tips, IMU sample and leveling update, PID
piston update, and one log record. Robots are always processed in index
order, so a run is fully determined by its scenario.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .formation import FollowerSpec, FormationGains, follower_command
from .kinematics import Pose2D, VelocityCommand, saturate, step_unicycle, wrap_angle
from .leveling import (
    DEFAULT_STEP_CLAMP,
    MountLayout,
    Orientation,
    PistonHeights,
    controllability_check,
    mean_height,
    update_heights,
)
from .piston import PIDGains, PistonState, actuate, pid_step
from .world import (
    Flat,
    ImuModel,
    ImuSampler,
    Terrain,
    TerrainBoundsError,
    payload_orientation,
    tips_for,
)

STARTUP_TOLERANCE = 1e-3
SETTLE_THRESHOLD = math.radians(0.5)


class ScenarioError(ValueError):
    """The scenario violates one of its invariants."""


class SimulationError(RuntimeError):
    """A run aborted; the message names the tick and robot."""


@dataclass(frozen=True)
class RobotConfig:
    mount: tuple[float, float]
    leader: bool = False
    pose: Pose2D | None = None
    spec: FollowerSpec | None = None


@dataclass(frozen=True)
class PistonConfig:
    l_total: float = 0.25
    slew_limit: float = 0.05
    chassis_height: float = 0.1
    step_clamp: float = DEFAULT_STEP_CLAMP


@dataclass(frozen=True)
class Trajectory:
    waypoints: tuple[tuple[float, float], ...] = ()
    cruise_speed: float = 0.15
    capture_radius: float = 0.05
    heading_gain: float = 1.5


@dataclass(frozen=True)
class Metadata:
    payload_mass: float = 5.0
    robot_mass: float = 5.0
    robot_dims: tuple[float, float] = (0.30, 0.20)


TRIANGLE_LAYOUT = ((-0.5, 1.0), (-0.5, -1.0), (0.5, 0.5))


def _default_robots() -> tuple[RobotConfig, ...]:
    return (
        RobotConfig(TRIANGLE_LAYOUT[0]),
        RobotConfig(TRIANGLE_LAYOUT[1]),
        RobotConfig(TRIANGLE_LAYOUT[2], leader=True),
    )


@dataclass(frozen=True)
class Scenario:
    name: str = "flat-smoke"
    terrain: Terrain = field(default_factory=Flat)
    robots: tuple[RobotConfig, ...] = field(default_factory=_default_robots)
    payload_pose: Pose2D = Pose2D(0.0, 0.0, 0.0)
    formation: FormationGains = field(default_factory=FormationGains)
    pid: PIDGains = field(default_factory=PIDGains)
    piston: PistonConfig = field(default_factory=PistonConfig)
    imu: ImuModel = field(default_factory=ImuModel)
    trajectory: Trajectory = field(default_factory=Trajectory)
    duration: float = 10.0
    dt: float = 0.02
    leveling: bool = True
    leveling_base: str = "target"
    metadata: Metadata = field(default_factory=Metadata)

    @property
    def layout(self) -> MountLayout:
        return MountLayout([r.mount for r in self.robots])

    @property
    def leader_index(self) -> int:
        return next(i for i, r in enumerate(self.robots) if r.leader)

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def validate(self) -> "Scenario":
        leaders = sum(r.leader for r in self.robots)
        if leaders != 1:
            raise ScenarioError(f"exactly one leader required, found {leaders}")
        if not self.dt > 0:
            raise ScenarioError(f"dt must be > 0, got {self.dt}")
        if not self.duration >= self.dt:
            raise ScenarioError(f"duration {self.duration} is shorter than dt {self.dt}")
        ticks_per_sample = 1.0 / (self.imu.rate * self.dt)
        if ticks_per_sample < 1 - 1e-9 or abs(ticks_per_sample - round(ticks_per_sample)) > 1e-9:
            raise ScenarioError(
                f"IMU period 1/{self.imu.rate} s must be a whole number of {self.dt} s ticks"
            )
        if self.leveling_base not in ("actual", "target"):
            raise ScenarioError(f"leveling_base must be 'actual' or 'target', got {self.leveling_base!r}")
        diag = controllability_check(self.layout)
        if not diag.controllable:
            raise ScenarioError(f"mount layout: {diag.message}")
        try:
            mean_height(self.piston.l_total)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
        if self.piston.slew_limit <= 0 or self.piston.step_clamp <= 0:
            raise ScenarioError("piston slew_limit and step_clamp must be > 0")
        if self.trajectory.cruise_speed < 0 or self.trajectory.capture_radius <= 0:
            raise ScenarioError("cruise_speed must be >= 0 and capture_radius > 0")
        return self

    def initial_poses(self) -> list[Pose2D]:
        p = self.payload_pose
        c, s = math.cos(p.theta), math.sin(p.theta)
        poses = []
        for r in self.robots:
            if r.pose is not None:
                poses.append(r.pose)
            else:
                mx, my = r.mount
                poses.append(Pose2D(p.x + c * mx - s * my, p.y + s * mx + c * my, p.theta))
        return poses

    def follower_specs(self) -> list[FollowerSpec | None]:
        lead = self.robots[self.leader_index].mount
        return [
            None if r.leader else (r.spec or FollowerSpec.from_mounts(lead, r.mount))
            for r in self.robots
        ]


class LeaderTrajectory:
    """Pure-pursuit waypoint tracker for the leader.

    Steers toward the active waypoint, drives at cruise speed scaled by how
    well it faces it, and switches waypoint inside the capture radius. After
    the last waypoint the command is zero.
    """

    def __init__(
        self,
        waypoints: Sequence[tuple[float, float]],
        cruise_speed: float,
        capture_radius: float = 0.05,
        heading_gain: float = 1.5,
    ):
        self.waypoints = [tuple(map(float, w)) for w in waypoints]
        self.cruise_speed = cruise_speed
        self.capture_radius = capture_radius
        self.heading_gain = heading_gain
        self.index = 0

    @property
    def finished(self) -> bool:
        return self.index >= len(self.waypoints)

    def __call__(self, pose: Pose2D) -> VelocityCommand:
        while not self.finished:
            wx, wy = self.waypoints[self.index]
            if math.hypot(wx - pose.x, wy - pose.y) > self.capture_radius:
                break
            self.index += 1
        if self.finished:
            return VelocityCommand(0.0, 0.0)
        wx, wy = self.waypoints[self.index]
        heading_error = wrap_angle(math.atan2(wy - pose.y, wx - pose.x) - pose.theta)
        v = self.cruise_speed * max(0.0, math.cos(heading_error))
        return VelocityCommand(v, self.heading_gain * heading_error)


def leader_trajectory(
    waypoints: Sequence[tuple[float, float]],
    cruise_speed: float,
    pose: Pose2D,
    capture_radius: float = 0.05,
) -> VelocityCommand:
    """Single-shot leader command toward the first uncaptured waypoint."""
    return LeaderTrajectory(waypoints, cruise_speed, capture_radius)(pose)


@dataclass(frozen=True)
class RobotRecord:
    x: float
    y: float
    theta: float
    v: float
    omega: float
    length: float
    target: float
    formation_error: float = 0.0
    cmd_sat: bool = False
    level_sat: bool = False
    slew_sat: bool = False
    stroke_sat: bool = False


@dataclass(frozen=True)
class LogRecord:
    t: float
    roll: float
    pitch: float
    imu_roll: float = math.nan
    imu_pitch: float = math.nan
    engaged: bool = True
    robots: tuple[RobotRecord, ...] = ()


_ROBOT_FIELDS = (
    "x", "y", "theta", "v", "omega", "length", "target", "formation_error",
    "cmd_sat", "level_sat", "slew_sat", "stroke_sat",
)
_HEAD_FIELDS = ("t", "roll", "pitch", "imu_roll", "imu_pitch", "engaged")


def log_columns(n_robots: int) -> list[str]:
    cols = list(_HEAD_FIELDS)
    for i in range(1, n_robots + 1):
        cols += [f"r{i}_{name}" for name in _ROBOT_FIELDS]
    return cols


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    return repr(float(value))


def write_log_csv(log: Sequence[LogRecord], dest) -> None:
    """Write records as CSV; ``dest`` is a path or a text stream."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            write_log_csv(log, fh)
        return
    n = len(log[0].robots) if log else 0
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(log_columns(n))
    for rec in log:
        row = [_fmt(getattr(rec, name)) for name in _HEAD_FIELDS]
        for r in rec.robots:
            row += [_fmt(getattr(r, name)) for name in _ROBOT_FIELDS]
        writer.writerow(row)


def log_to_csv(log: Sequence[LogRecord]) -> str:
    buf = io.StringIO()
    write_log_csv(log, buf)
    return buf.getvalue()


def read_log_csv(path) -> list[LogRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n = (len(header) - len(_HEAD_FIELDS)) // len(_ROBOT_FIELDS)
        if header != log_columns(n):
            raise ValueError(f"{path}: unexpected log header")
        records = []
        for row in reader:
            head = dict(zip(_HEAD_FIELDS, row))
            robots = []
            for i in range(n):
                chunk = row[len(_HEAD_FIELDS) + i * len(_ROBOT_FIELDS):][: len(_ROBOT_FIELDS)]
                vals = dict(zip(_ROBOT_FIELDS, chunk))
                robots.append(
                    RobotRecord(
                        **{k: float(vals[k]) for k in _ROBOT_FIELDS[:8]},
                        **{k: vals[k] == "1" for k in _ROBOT_FIELDS[8:]},
                    )
                )
            records.append(
                LogRecord(
                    t=float(head["t"]),
                    roll=float(head["roll"]),
                    pitch=float(head["pitch"]),
                    imu_roll=float(head["imu_roll"]),
                    imu_pitch=float(head["imu_pitch"]),
                    engaged=head["engaged"] == "1",
                    robots=tuple(robots),
                )
            )
    return records


class _Executor:
    """Ordered map over robots, optionally on a thread pool."""

    def __init__(self, workers: int | None):
        self.pool = ThreadPoolExecutor(workers) if workers and workers > 1 else None

    def map(self, fn, items: Iterable):
        if self.pool is None:
            return [fn(item) for item in items]
        return list(self.pool.map(fn, items))

    def close(self) -> None:
        if self.pool is not None:
            self.pool.shutdown()


def run(scenario: Scenario, workers: int | None = None) -> list[LogRecord]:
    """Simulate ``scenario`` and return one record per tick.

    ``workers > 1`` evaluates follower commands and piston controllers on a
    thread pool; results are merged in robot order, so the log is identical to
    a sequential run.
    """
    sc = scenario.validate()
    n = len(sc.robots)
    dt = sc.dt
    lead = sc.leader_index
    layout = sc.layout
    specs = sc.follower_specs()
    pc = sc.piston
    l_mean = mean_height(pc.l_total)

    poses = sc.initial_poses()
    pistons = [
        PistonState(length=0.0, target=l_mean, l_total=pc.l_total, slew_limit=pc.slew_limit)
        for _ in range(n)
    ]
    tracker = LeaderTrajectory(
        sc.trajectory.waypoints,
        sc.trajectory.cruise_speed,
        sc.trajectory.capture_radius,
        sc.trajectory.heading_gain,
    )
    sampler = ImuSampler(sc.imu)
    engaged = False
    level_sat = [False] * n
    targets = PistonHeights.at_mean(n, pc.l_total)
    executor = _Executor(workers)

    def orientation_at(k: int) -> Orientation:
        try:
            support = tips_for(poses, [p.length for p in pistons], sc.terrain, pc.chassis_height)
        except TerrainBoundsError:
            for i, pose in enumerate(poses):
                try:
                    tips_for([pose], [0.0], sc.terrain, 0.0)
                except TerrainBoundsError as exc:
                    raise SimulationError(f"tick {k} (t={k * dt:.2f} s) robot {i + 1}: {exc}") from exc
            raise
        return payload_orientation(support, layout)

    log: list[LogRecord] = []
    try:
        orientation_at(0)
        for k in range(1, sc.n_steps + 1):
            t = k * dt
            # 1. leader
            raw = tracker(poses[lead]) if engaged else VelocityCommand(0.0, 0.0)
            leader_cmd, leader_sat = saturate(raw, sc.formation.v_max, sc.formation.omega_max)

            # 2. followers
            def command(i: int) -> tuple[VelocityCommand, bool]:
                if i == lead:
                    return leader_cmd, leader_sat
                return follower_command(poses[lead], leader_cmd, poses[i], specs[i], sc.formation)

            cmds = executor.map(command, range(n))

            # 3. poses
            poses = [step_unicycle(q, u, dt) for q, (u, _) in zip(poses, cmds)]

            # 4. payload truth
            truth = orientation_at(k)

            # 5. IMU and leveling
            if not engaged and all(abs(p.length - l_mean) <= STARTUP_TOLERANCE for p in pistons):
                engaged = True
            measured = sampler.sample(truth, t)
            if measured is not None and engaged and sc.leveling:
                if sc.leveling_base == "actual":
                    base = PistonHeights([p.length for p in pistons], pc.l_total)
                else:
                    base = targets
                targets = update_heights(base, measured, layout, pc.step_clamp)
                level_sat = [bool(s) for s in targets.saturated]
                pistons = [replace(p, target=float(l)) for p, l in zip(pistons, targets.lengths)]

            # 6. pistons
            def drive(i: int):
                u, state = pid_step(pistons[i], sc.pid, dt)
                return actuate(state, u, dt)

            stepped = executor.map(drive, range(n))
            pistons = [s for s, _, _ in stepped]

            # 7. record
            truth = orientation_at(k)
            last = sampler.last
            rows = []
            for i in range(n):
                err = 0.0
                if specs[i] is not None:
                    goal = _desired_position(poses[lead], specs[i])
                    err = math.hypot(goal[0] - poses[i].x, goal[1] - poses[i].y)
                u, sat = cmds[i]
                rows.append(
                    RobotRecord(
                        x=poses[i].x,
                        y=poses[i].y,
                        theta=poses[i].theta,
                        v=u.v,
                        omega=u.omega,
                        length=pistons[i].length,
                        target=pistons[i].target,
                        formation_error=err,
                        cmd_sat=sat,
                        level_sat=level_sat[i],
                        slew_sat=stepped[i][1],
                        stroke_sat=stepped[i][2],
                    )
                )
            log.append(
                LogRecord(
                    t=t,
                    roll=truth.theta_x,
                    pitch=truth.theta_y,
                    imu_roll=last.theta_x if last else math.nan,
                    imu_pitch=last.theta_y if last else math.nan,
                    engaged=engaged,
                    robots=tuple(rows),
                )
            )
    finally:
        executor.close()
    return log


def _desired_position(leader: Pose2D, spec: FollowerSpec) -> tuple[float, float]:
    bearing = leader.theta + spec.psi_d
    return leader.x + spec.rho_d * math.cos(bearing), leader.y + spec.rho_d * math.sin(bearing)


def summarize(log: Sequence[LogRecord], settle_threshold: float = SETTLE_THRESHOLD) -> dict:
    """Metrics over the part of the run after the pistons first reach l_mean."""
    if not log:
        raise ValueError("cannot summarize an empty log")
    start = next((i for i, r in enumerate(log) if r.engaged), None)
    if start is None:
        # run ended during the startup ramp: empty window
        nan = math.nan
        return {
            "window_start": nan,
            "records": 0,
            "max_abs_roll": nan,
            "max_abs_pitch": nan,
            "rms_tilt": nan,
            "tilt_settling_time": math.inf,
            "mean_formation_error": nan,
            "cmd_saturations": 0,
            "level_saturations": 0,
            "slew_saturations": 0,
            "stroke_saturations": 0,
        }
    window = log[start:]
    t = np.array([r.t for r in window])
    roll = np.array([r.roll for r in window])
    pitch = np.array([r.pitch for r in window])
    tilt = np.hypot(roll, pitch)

    above = np.nonzero(tilt > settle_threshold)[0]
    if above.size == 0:
        settling = 0.0
    elif above[-1] + 1 < len(window):
        settling = float(t[above[-1] + 1] - t[0])
    else:
        settling = math.inf

    # the leader's own formation error is logged as zero
    n_followers = max(len(window[0].robots) - 1, 1)
    total_error = sum(r.formation_error for rec in window for r in rec.robots)
    return {
        "window_start": float(t[0]),
        "records": len(window),
        "max_abs_roll": float(np.max(np.abs(roll))),
        "max_abs_pitch": float(np.max(np.abs(pitch))),
        "rms_tilt": float(np.sqrt(np.mean(tilt**2))),
        "tilt_settling_time": settling,
        "mean_formation_error": float(total_error / (len(window) * n_followers)),
        "cmd_saturations": sum(r.cmd_sat for rec in window for r in rec.robots),
        "level_saturations": sum(r.level_sat for rec in window for r in rec.robots),
        "slew_saturations": sum(r.slew_sat for rec in window for r in rec.robots),
        "stroke_saturations": sum(r.stroke_sat for rec in window for r in rec.robots),
    }


def format_metrics(metrics: dict) -> str:
    lines = []
    for key, value in metrics.items():
        if isinstance(value, float):
            value = repr(value)
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def parse_metrics(text: str) -> dict:
    out: dict = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        for cast in (int, float):
            try:
                out[key] = cast(value)
                break
            except ValueError:
                continue
        else:
            out[key] = value
    return out
