"""Built-in scenarios.

``plank4``
    Four robots carry a rectangular payload up a single 5 degree plank.
``triplank3``
    Three robots in a triangle, each climbing its own plank (3, 5 and 7 deg).
``heightmap3``
    Three robots in a triangle crossing procedurally generated rolling terrain.
"""

from __future__ import annotations

import math

from .kinematics import Pose2D
from .sim import TRIANGLE_LAYOUT, RobotConfig, Scenario, Trajectory
from .world import Corridor, InclinedPlane, MultiPlane, procedural_heightmap


def plank4() -> Scenario:
    mounts = [(0.5, 0.5), (0.5, -0.5), (-0.5, 0.5), (-0.5, -0.5)]
    robots = tuple(RobotConfig(m, leader=(i == 0)) for i, m in enumerate(mounts))
    return Scenario(
        name="plank4",
        terrain=InclinedPlane(pitch=math.radians(5.0), start=0.0),
        robots=robots,
        payload_pose=Pose2D(-1.5, 0.0, 0.0),
        trajectory=Trajectory(waypoints=((3.5, 0.5),), cruise_speed=0.2),
        duration=30.0,
    )


TRIPLANK_SLOPES_DEG = (3.0, 5.0, 7.0)


def triplank3(slopes_deg: tuple[float, float, float] = TRIPLANK_SLOPES_DEG) -> Scenario:
    """Each robot of the standard triangle gets a plank along its own y-band.

    ``slopes_deg`` are ordered like the robots: rear-left, rear-right, front.
    """
    bands = [(0.75, 3.0), (-3.0, -0.25), (-0.25, 0.75)]
    corridors = tuple(
        Corridor(InclinedPlane(pitch=math.radians(s), start=0.0), lo, hi)
        for s, (lo, hi) in zip(slopes_deg, bands)
    )
    robots = (
        RobotConfig(TRIANGLE_LAYOUT[0]),
        RobotConfig(TRIANGLE_LAYOUT[1]),
        RobotConfig(TRIANGLE_LAYOUT[2], leader=True),
    )
    return Scenario(
        name="triplank3",
        terrain=MultiPlane(corridors),
        robots=robots,
        payload_pose=Pose2D(-1.0, 0.0, 0.0),
        trajectory=Trajectory(waypoints=((2.2, 0.5),), cruise_speed=0.15),
        duration=25.0,
    )


HEIGHTMAP_SEED = 3


def heightmap3(seed: int = HEIGHTMAP_SEED) -> Scenario:
    robots = (
        RobotConfig(TRIANGLE_LAYOUT[0]),
        RobotConfig(TRIANGLE_LAYOUT[1]),
        RobotConfig(TRIANGLE_LAYOUT[2], leader=True),
    )
    return Scenario(
        name="heightmap3",
        terrain=procedural_heightmap(seed=seed),
        robots=robots,
        payload_pose=Pose2D(0.0, 0.0, 0.0),
        trajectory=Trajectory(waypoints=((7.5, 0.5),), cruise_speed=0.2),
        duration=40.0,
    )


BUILTIN = {
    "plank4": plank4,
    "triplank3": triplank3,
    "heightmap3": heightmap3,
}


def builtin(name: str) -> Scenario:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise KeyError(f"unknown built-in scenario {name!r}; choose from {sorted(BUILTIN)}") from None
