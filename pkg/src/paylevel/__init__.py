"""Multi-robot payload leveling on uneven terrain."""

from .formation import (
    FollowerSpec,
    FormationGains,
    TrackingError,
    compute_tracking_errors,
    desired_follower_pose,
    follower_control,
)
from .kinematics import Pose2D, StateValidityError, VelocityCommand, step_unicycle, wrap_angle
from .leveling import (
    AngleBounds,
    DegenerateLayoutError,
    MountLayout,
    Orientation,
    PistonHeights,
    PistonLeveler,
    achievable_angle_bounds,
    controllability_check,
    delta_lengths,
    geometry_matrix,
    mean_height,
    update_heights,
)
from .piston import PIDGains, PistonState, actuate, pid_step
from .sim import LogRecord, Scenario, run, summarize
from .world import (
    Flat,
    Heightmap,
    ImuModel,
    ImuSampler,
    InclinedPlane,
    MultiPlane,
    PayloadSupport,
    PlaneFit,
    elevation,
    payload_orientation,
    piston_tip,
)

__version__ = "0.1.0"
