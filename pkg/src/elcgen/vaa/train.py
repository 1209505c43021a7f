"""Policy training and evaluation inside the simulator with the MPC in the loop."""

import json
import time
from dataclasses import dataclass, field

import numpy as np

from ..env.episode import run_episode
from ..env.scenarios import standard_scenario
from ..mpc import ControllerConfig, MpcController
from ..nn import AdamState, load_checkpoint, save_checkpoint
from ..rng import get_state, set_state, substream
from .agent import AttackAgent
from .buffer import RolloutBuffer
from .policy import PolicyConfig, PolicyModel
from .ppo import PpoHyper, update
from .reward import RewardWeights


@dataclass
class TrainConfig:
    updates: int = 30
    hyper: PpoHyper = field(default_factory=PpoHyper)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    weights: RewardWeights = field(default_factory=RewardWeights)
    guidance: bool = True
    window: int = 10


def make_controller(config=None, use_mpc=True):
    return MpcController(config or ControllerConfig()) if use_mpc else None


def rollout(agent, controller, scenario, rng):
    world = scenario.to_world()
    bounds = controller.bounds if controller is not None else None
    return run_episode(world, agent, controller, rng, trigger_ttc=scenario.trigger_ttc_s,
                       max_duration=scenario.max_duration_s, lane_bounds=bounds)


class PolicyTrainer:
    """Owns the policy, optimizer and RNG streams; resumable through :meth:`save`/:meth:`load`."""

    def __init__(self, cfg, source, seed, controller_cfg=None):
        self.cfg, self.source, self.seed = cfg, source, seed
        self.policy = PolicyModel(cfg.policy, substream(seed, "policy", "init"))
        self.opt = AdamState(lr=cfg.hyper.lr)
        self.controller = make_controller(controller_cfg)
        self.rng = substream(seed, "policy", "train")
        self.scen_rng = substream(seed, "policy", "scenarios")
        self.rows = []

    def collect(self):
        buf = RolloutBuffer()
        agent = AttackAgent(self.policy, self.source, self.cfg.weights, self.cfg.guidance,
                            window=self.cfg.window, buffer=buf)
        rewards, collisions, episodes = [], 0, 0
        while len(buf) < self.cfg.hyper.steps_per_update:
            log = rollout(agent, self.controller, standard_scenario(self.scen_rng), self.rng)
            terms = log.reward_terms()
            if not terms:
                continue
            episodes += 1
            collisions += int(log.collided)
            rewards.append(sum(t["total"] for t in terms))
        return buf, float(np.mean(rewards)), collisions / max(episodes, 1)

    def step(self):
        buf, mean_reward, rate = self.collect()
        hist = update(self.policy, buf, self.cfg.hyper, self.opt, self.rng)
        last = hist[-1]
        row = {"update": len(self.rows), "mean_reward": mean_reward, "clip_fraction": last["clip_fraction"],
               "approx_kl": last["approx_kl"], "entropy": last["entropy"], "collision_rate": rate}
        self.rows.append(row)
        return row

    def train(self, updates=None, log_path=None, checkpoint_dir=None, checkpoint_every=5):
        timings = []
        target = self.cfg.updates if updates is None else updates
        while len(self.rows) < target:
            t0 = time.perf_counter()
            row = self.step()
            timings.append(time.perf_counter() - t0)
            if log_path is not None:
                with open(log_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(row, sort_keys=True) + "\n")
            if checkpoint_dir is not None and (len(self.rows) % checkpoint_every == 0 or len(self.rows) == target):
                self.save(checkpoint_dir)
        return timings

    def save(self, directory):
        import os
        os.makedirs(directory, exist_ok=True)
        save_checkpoint(os.path.join(directory, "policy.json"), self.policy.store,
                        extra={"hidden": self.cfg.policy.hidden, "obs_dim": self.cfg.policy.obs_dim})
        state = {"rows": self.rows, "opt": self.opt.to_dict(), "rng": get_state(self.rng),
                 "scen_rng": get_state(self.scen_rng)}
        with open(os.path.join(directory, "trainer_state.json"), "w", encoding="utf-8") as fh:
            json.dump(state, fh)

    def load(self, directory):
        import os
        load_checkpoint(os.path.join(directory, "policy.json"), self.policy.store)
        with open(os.path.join(directory, "trainer_state.json"), encoding="utf-8") as fh:
            state = json.load(fh)
        self.rows = state["rows"]
        self.opt = AdamState.from_dict(state["opt"], self.policy.store)
        set_state(self.rng, state["rng"])
        set_state(self.scen_rng, state["scen_rng"])
        return self


def load_policy(path):
    """Policy from a checkpoint written by :meth:`PolicyTrainer.save`."""
    with open(path, encoding="utf-8") as fh:
        extra = json.load(fh).get("extra") or {}
    policy = PolicyModel(PolicyConfig(obs_dim=extra.get("obs_dim", 17), hidden=extra.get("hidden", 32)))
    load_checkpoint(path, policy.store)
    return policy


def evaluate(policy, source, scenarios, seed, guidance=True, use_mpc=True, deterministic=True,
             controller_cfg=None, weights=None):
    """Run one episode per scenario; returns the logs."""
    agent = AttackAgent(policy, source, weights, guidance, deterministic=deterministic)
    controller = make_controller(controller_cfg, use_mpc)
    logs = []
    for i, sc in enumerate(scenarios):
        log = rollout(agent, controller, sc, substream(seed, "episode", i))
        log.meta["episode"] = i
        logs.append(log)
    return logs
