"""PID controllers tuned by deep deterministic policy gradient.

The PID law acts as a linear actor on the features ``(e_y, I_y, D, I_u)``
with back-calculation anti-windup; an MLP critic drives the gain updates.
"""

from .actor import ActuatorLimits, ControllerParams, FopdtModel, half_rule, simc_pi
from .analysis import boundary_lobe, is_stable, stability_boundary, step_metrics
from .config import bundled_config, load_config
from .env import EpisodeConfig, PidEnv, RewardConfig, Segment, SetpointSchedule
from .plant import PlantModel, build_discrete_plant
from .rl import TrainConfig, Trainer, evaluate, train

__all__ = [
    "ActuatorLimits",
    "ControllerParams",
    "FopdtModel",
    "half_rule",
    "simc_pi",
    "boundary_lobe",
    "is_stable",
    "stability_boundary",
    "step_metrics",
    "bundled_config",
    "load_config",
    "EpisodeConfig",
    "PidEnv",
    "RewardConfig",
    "Segment",
    "SetpointSchedule",
    "PlantModel",
    "build_discrete_plant",
    "TrainConfig",
    "Trainer",
    "evaluate",
    "train",
]
__version__ = "0.1.0"
