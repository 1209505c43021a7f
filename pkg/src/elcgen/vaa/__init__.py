"""Recurrent PPO attack policy with behavioral guidance."""

from .agent import AttackAgent, CorpusSource, GeneratorSource, executed_xv, trigger_frame
from .buffer import BufferUnderfullError, RolloutBuffer, compute_advantages, minibatches, normalize, pack_segments
from .policy import LOG_STD_MAX, LOG_STD_MIN, Minibatch, PolicyConfig, PolicyModel, ppo_loss
from .ppo import PpoHyper, ToyReach, make_optimizer, train_toy, update
from .reward import TERMS, RewardWeights, cos_sim, reward, window_cos_sim
from .track import ActionScale, ReferenceTrack, emit_waypoints
from .train import PolicyTrainer, TrainConfig, evaluate, load_policy, make_controller, rollout

__all__ = [
    "ActionScale", "AttackAgent", "BufferUnderfullError", "CorpusSource", "GeneratorSource", "LOG_STD_MAX",
    "LOG_STD_MIN", "Minibatch", "PolicyConfig", "PolicyModel", "PolicyTrainer", "PpoHyper", "ReferenceTrack",
    "RewardWeights", "RolloutBuffer", "TERMS", "ToyReach", "TrainConfig", "compute_advantages", "cos_sim",
    "emit_waypoints", "evaluate", "executed_xv", "load_policy", "make_controller", "make_optimizer", "minibatches",
    "normalize", "pack_segments", "ppo_loss", "reward", "rollout", "train_toy", "trigger_frame", "update",
    "window_cos_sim",
]
