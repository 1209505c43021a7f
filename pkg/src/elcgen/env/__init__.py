"""Fixed-step highway simulator: bicycle kinematics, TTC, collisions, episodes."""

from .episode import (EpisodeLog, LaneKeepPolicy, ScenarioConfig, VehicleSpec, lane_keep_command,
                      load_episode, run_episode, waypoint_chase)
from .observe import NEIGHBORS, OBS_DIM, SCALES, SENTINEL, denormalize, observe
from .safety import CollisionEvent, check_collision, pairwise_ttc, rect_overlap_depth, ttc, ttc_kernel
from .scenarios import analytic_trigger_step, closing_scenario, standard_scenario, standard_scenarios
from .world import (WHEELBASE, ActuatorLimits, VehicleState, WorldState, background_command, bicycle_step,
                    step)

__all__ = [
    "ActuatorLimits", "CollisionEvent", "EpisodeLog", "LaneKeepPolicy", "NEIGHBORS", "OBS_DIM", "SCALES",
    "SENTINEL", "ScenarioConfig", "VehicleSpec", "VehicleState", "WHEELBASE", "WorldState",
    "analytic_trigger_step", "background_command", "bicycle_step", "check_collision", "closing_scenario",
    "denormalize", "lane_keep_command", "load_episode", "observe", "pairwise_ttc", "rect_overlap_depth", "run_episode",
    "standard_scenario", "standard_scenarios", "step", "ttc", "ttc_kernel", "waypoint_chase",
]
