"""Scenario files.

Scenarios are TOML documents. Every key is optional; anything left out takes
the default of the corresponding dataclass, so an empty file is the flat
ground smoke case. Unknown keys are rejected. Angles are given in degrees.

Example::

    name = "ramp"
    duration = 20.0
    dt = 0.02
    seed = 7

    [terrain]
    kind = "inclined"      # flat | inclined | multiplane | heightmap
    pitch_deg = 5.0
    start = 0.0

    [piston]
    l_mean = 0.125         # or l_total = 0.25

    [trajectory]
    waypoints = [[3.0, 0.5]]
    cruise_speed = 0.2

    [[robots]]
    mount = [0.5, 0.5]
    leader = true

    [[robots]]
    mount = [-0.5, 1.0]
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .formation import FollowerSpec, FormationGains
from .kinematics import Pose2D
from .piston import PIDGains
from .sim import (
    Metadata,
    PistonConfig,
    RobotConfig,
    Scenario,
    ScenarioError,
    Trajectory,
)
from .world import (
    DEFAULT_ARENA,
    Corridor,
    Flat,
    ImuModel,
    InclinedPlane,
    MultiPlane,
    procedural_heightmap,
    read_heightmap,
)


class ScenarioFileError(ScenarioError):
    """Base class for problems found while reading a scenario file."""


class ScenarioNotFoundError(ScenarioFileError):
    pass


class ScenarioSyntaxError(ScenarioFileError):
    pass


class UnknownKeyError(ScenarioFileError):
    pass


class InvalidValueError(ScenarioFileError):
    pass


_HEADER_ARRAY = re.compile(r"^\[\[\s*([^\]]+?)\s*\]\]")
_HEADER = re.compile(r"^\[\s*([^\]]+?)\s*\]")
_KEY = re.compile(r"^([A-Za-z0-9_\-]+)\s*=")


def _key_lines(text: str) -> dict[tuple, int]:
    """Map ``(table..., key)`` paths to the line where they first appear."""
    lines: dict[tuple, int] = {}
    table: tuple = ()
    counts: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if m := _HEADER_ARRAY.match(s):
            name = m.group(1)
            counts[name] = counts.get(name, -1) + 1
            table = (name, counts[name])
        elif m := _HEADER.match(s):
            table = (m.group(1),)
        elif m := _KEY.match(s):
            lines.setdefault(table + (m.group(1),), lineno)
            continue
        else:
            continue
        lines.setdefault(table, lineno)
    return lines


class _Section:
    """Typed, strict access to one table of the document."""

    def __init__(self, doc: dict, path: tuple, source: str, lines: dict):
        self.path = path
        self.source = source
        self.lines = lines
        if not isinstance(doc, dict):
            raise InvalidValueError(self.where() + "expected a table")
        self.doc = dict(doc)

    def where(self, key: str | None = None) -> str:
        path = self.path + ((key,) if key else ())
        probe = path
        line = self.lines.get(probe)
        while line is None and probe:
            probe = probe[:-1]
            line = self.lines.get(probe)
        dotted = ".".join(str(p) for p in path) or "<top>"
        return f"{self.source}:{line or 1}: {dotted}: "

    def error(self, key: str, message: str) -> InvalidValueError:
        return InvalidValueError(self.where(key) + message)

    def has(self, key: str) -> bool:
        return key in self.doc

    def number(self, key: str, default: float, *, positive=False, nonneg=False) -> float:
        if key not in self.doc:
            return default
        value = self.doc.pop(key)
        if isinstance(value, str) and value.lower() in ("inf", "infinity"):
            value = math.inf
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(key, f"expected a number, got {value!r}")
        value = float(value)
        if math.isnan(value):
            raise self.error(key, "must not be NaN")
        if positive and not value > 0:
            raise self.error(key, f"must be > 0, got {value}")
        if nonneg and value < 0:
            raise self.error(key, f"must be >= 0, got {value}")
        return value

    def integer(self, key: str, default: int) -> int:
        if key not in self.doc:
            return default
        value = self.doc.pop(key)
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error(key, f"expected an integer, got {value!r}")
        return value

    def boolean(self, key: str, default: bool) -> bool:
        if key not in self.doc:
            return default
        value = self.doc.pop(key)
        if not isinstance(value, bool):
            raise self.error(key, f"expected true or false, got {value!r}")
        return value

    def string(self, key: str, default: str | None, choices: tuple[str, ...] | None = None):
        if key not in self.doc:
            return default
        value = self.doc.pop(key)
        if not isinstance(value, str):
            raise self.error(key, f"expected a string, got {value!r}")
        if choices and value not in choices:
            raise self.error(key, f"must be one of {', '.join(choices)}; got {value!r}")
        return value

    def vector(self, key: str, default, length: int):
        if key not in self.doc:
            return default
        value = self.doc.pop(key)
        if (
            not isinstance(value, list)
            or len(value) != length
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
        ):
            raise self.error(key, f"expected a list of {length} numbers, got {value!r}")
        return tuple(float(v) for v in value)

    def points(self, key: str, default):
        if key not in self.doc:
            return default
        value = self.doc.pop(key)
        ok = isinstance(value, list) and all(
            isinstance(p, list) and len(p) == 2 and all(isinstance(c, (int, float)) for c in p)
            for p in value
        )
        if not ok:
            raise self.error(key, f"expected a list of [x, y] pairs, got {value!r}")
        return tuple((float(a), float(b)) for a, b in value)

    def table(self, key: str) -> "_Section":
        return _Section(self.doc.pop(key, {}), self.path + (key,), self.source, self.lines)

    def tables(self, key: str) -> list["_Section"]:
        value = self.doc.pop(key, [])
        if not isinstance(value, list):
            raise self.error(key, "expected an array of tables ([[...]])")
        name = ".".join(self.path + (key,))
        return [
            _Section(item, (name, i), self.source, self.lines) for i, item in enumerate(value)
        ]

    def finish(self) -> None:
        if self.doc:
            key = sorted(self.doc)[0]
            raise UnknownKeyError(self.where(key) + f"unknown key {key!r}")


def _terrain(sec: _Section, base_dir: Path):
    kind = sec.string("kind", "flat", ("flat", "inclined", "multiplane", "heightmap"))
    arena = sec.vector("arena", DEFAULT_ARENA, 4)
    if kind == "flat":
        terrain = Flat(arena)
    elif kind == "inclined":
        terrain = _plane(sec, arena)
    elif kind == "multiplane":
        corridors = []
        for sub in sec.tables("corridors"):
            lo = sub.number("y_min", -math.inf)
            hi = sub.number("y_max", math.inf)
            if not lo < hi:
                raise sub.error("y_max", f"y_max ({hi}) must exceed y_min ({lo})")
            corridors.append(Corridor(_plane(sub, arena), lo, hi))
            sub.finish()
        if not corridors:
            raise sec.error("corridors", "multiplane terrain needs at least one [[terrain.corridors]]")
        terrain = MultiPlane(tuple(corridors), arena)
    else:
        file = sec.string("file", None)
        if file is not None:
            try:
                terrain = read_heightmap(base_dir / file)
            except (OSError, ValueError) as exc:
                raise sec.error("file", str(exc)) from None
        else:
            terrain = procedural_heightmap(
                seed=sec.integer("seed", 3),
                extent=sec.vector("extent", (-4.0, 14.0, -5.0, 5.0), 4),
                cell_size=sec.number("cell_size", 0.1, positive=True),
                amplitude=sec.number("amplitude", 0.03, nonneg=True),
                wavelength=sec.number("wavelength", 3.0, positive=True),
                n_waves=sec.integer("n_waves", 4),
            )
    sec.finish()
    return terrain


def _plane(sec: _Section, arena) -> InclinedPlane:
    pitch = sec.number("pitch_deg", 0.0)
    roll = sec.number("roll_deg", 0.0)
    for key, value in (("pitch_deg", pitch), ("roll_deg", roll)):
        if abs(value) >= 90:
            raise sec.error(key, f"slope must be within (-90, 90) degrees, got {value}")
    start = sec.number("start", None) if sec.has("start") else None
    return InclinedPlane(math.radians(pitch), math.radians(roll), start, arena)


def _robots(secs: list[_Section]) -> tuple[RobotConfig, ...]:
    robots = []
    for sec in secs:
        mount = sec.vector("mount", None, 2)
        if mount is None:
            raise sec.error("mount", "every robot needs a mount = [x, y]")
        leader = sec.boolean("leader", False)
        pose = sec.vector("pose", None, 3)
        spec = None
        if sec.has("rho_d") or sec.has("psi_deg"):
            rho = sec.number("rho_d", None, positive=True) if sec.has("rho_d") else None
            psi = sec.number("psi_deg", None) if sec.has("psi_deg") else None
            if rho is None or psi is None:
                raise sec.error("rho_d", "rho_d and psi_deg must be given together")
            spec = FollowerSpec(rho, math.radians(psi))
        sec.finish()
        robots.append(
            RobotConfig(
                mount=mount,
                leader=leader,
                pose=Pose2D.wrapped(pose[0], pose[1], math.radians(pose[2])) if pose else None,
                spec=spec,
            )
        )
    return tuple(robots)


def scenario_from_text(text: str, source: str = "<string>", base_dir: Path | None = None) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioSyntaxError(f"{source}: malformed scenario: {exc}") from None
    lines = _key_lines(text)
    base_dir = base_dir or Path.cwd()
    top = _Section(doc, (), source, lines)
    d = Scenario()

    name = top.string("name", d.name)
    duration = top.number("duration", d.duration, positive=True)
    dt = top.number("dt", d.dt, positive=True)
    seed = top.integer("seed", d.imu.seed)
    leveling = top.boolean("leveling", d.leveling)
    leveling_base = top.string("leveling_base", d.leveling_base, ("target", "actual"))

    payload = top.table("payload")
    payload_pose = Pose2D.wrapped(
        payload.number("x", 0.0), payload.number("y", 0.0), math.radians(payload.number("heading_deg", 0.0))
    )
    payload.finish()

    terrain = _terrain(top.table("terrain"), base_dir)

    pis = top.table("piston")
    l_mean = pis.number("l_mean", None, positive=True) if pis.has("l_mean") else None
    l_total = pis.number("l_total", None, positive=True) if pis.has("l_total") else None
    if l_total is None:
        l_total = 2.0 * l_mean if l_mean is not None else d.piston.l_total
    elif l_mean is not None and not math.isclose(l_total, 2.0 * l_mean):
        raise pis.error("l_mean", f"l_mean {l_mean} contradicts l_total {l_total} (l_mean = l_total / 2)")
    piston = PistonConfig(
        l_total=l_total,
        slew_limit=pis.number("slew_limit", d.piston.slew_limit, positive=True),
        chassis_height=pis.number("chassis_height", d.piston.chassis_height, nonneg=True),
        step_clamp=pis.number("step_clamp", d.piston.step_clamp, positive=True),
    )
    pis.finish()

    sec = top.table("pid")
    try:
        pid = PIDGains(
            kp=sec.number("kp", d.pid.kp, nonneg=True),
            ki=sec.number("ki", d.pid.ki, nonneg=True),
            kd=sec.number("kd", d.pid.kd, nonneg=True),
        )
    except ValueError as exc:
        if isinstance(exc, ScenarioFileError):
            raise
        raise InvalidValueError(sec.where() + str(exc)) from None
    sec.finish()

    sec = top.table("formation")
    values = {f.name: sec.number(f.name, getattr(d.formation, f.name), positive=True) for f in fields(FormationGains)}
    formation = FormationGains(**values)
    sec.finish()

    sec = top.table("imu")
    imu = ImuModel(
        rate=sec.number("rate", d.imu.rate, positive=True),
        noise_std=sec.number("noise_std", d.imu.noise_std, nonneg=True),
        seed=sec.integer("seed", seed),
    )
    sec.finish()

    sec = top.table("trajectory")
    trajectory = Trajectory(
        waypoints=sec.points("waypoints", d.trajectory.waypoints),
        cruise_speed=sec.number("cruise_speed", d.trajectory.cruise_speed, nonneg=True),
        capture_radius=sec.number("capture_radius", d.trajectory.capture_radius, positive=True),
        heading_gain=sec.number("heading_gain", d.trajectory.heading_gain, positive=True),
    )
    sec.finish()

    sec = top.table("metadata")
    metadata = Metadata(
        payload_mass=sec.number("payload_mass", d.metadata.payload_mass, positive=True),
        robot_mass=sec.number("robot_mass", d.metadata.robot_mass, positive=True),
        robot_dims=sec.vector("robot_dims", d.metadata.robot_dims, 2),
    )
    sec.finish()

    robot_secs = top.tables("robots")
    robots = _robots(robot_secs) if robot_secs else d.robots
    top.finish()

    scenario = Scenario(
        name=name,
        terrain=terrain,
        robots=robots,
        payload_pose=payload_pose,
        formation=formation,
        pid=pid,
        piston=piston,
        imu=imu,
        trajectory=trajectory,
        duration=duration,
        dt=dt,
        leveling=leveling,
        leveling_base=leveling_base,
        metadata=metadata,
    )
    try:
        return scenario.validate()
    except ScenarioError as exc:
        raise ScenarioError(f"{source}: {exc}") from None


def parse_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ScenarioNotFoundError(f"{path}: scenario file not found") from None
    except OSError as exc:
        raise ScenarioNotFoundError(f"{path}: cannot read scenario file: {exc}") from None
    return scenario_from_text(text, str(path), path.parent)


def with_overrides(scenario: Scenario, *, seed: int | None = None, duration: float | None = None) -> Scenario:
    if seed is not None:
        scenario = replace(scenario, imu=replace(scenario.imu, seed=seed))
    if duration is not None:
        scenario = replace(scenario, duration=duration)
    return scenario.validate()
