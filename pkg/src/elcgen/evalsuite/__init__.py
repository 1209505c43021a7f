"""Metrics, baselines and attribution over episode logs."""

from .baselines import KINDS, ConstantAction, RandomAction, ScriptedCutIn, grid_actions, run_baseline
from .distribution import CHANNELS, channel_samples, distribution_compare, kappa, self_split_distance
from .shapley import (MAX_FEATURES, AttributionReport, coalition_weights, reward_attribution, reward_value_fn,
                      shapley, shapley_from_table, shapley_kernel, value_table)
from .summary import RunSummary, collision_rate, rate_interval
from .ttcfield import GridSpec, TtcField, ego_samples, ttc_field

__all__ = [
    "AttributionReport", "CHANNELS", "ConstantAction", "GridSpec", "KINDS", "MAX_FEATURES", "RandomAction",
    "RunSummary", "ScriptedCutIn", "TtcField", "channel_samples", "coalition_weights", "collision_rate",
    "distribution_compare", "ego_samples", "grid_actions", "kappa", "rate_interval", "reward_attribution",
    "reward_value_fn", "run_baseline", "self_split_distance", "shapley", "shapley_from_table", "shapley_kernel",
    "ttc_field", "value_table",
]
