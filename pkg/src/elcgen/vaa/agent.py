"""The attacking agent: observation → policy → waypoints, plus reward bookkeeping."""

import math

import numpy as np

from ..env.observe import observe
from ..trajdata import Trajectory, dequantize
from .reward import RewardWeights, reward, window_cos_sim
from .track import ActionScale, ReferenceTrack, emit_waypoints


class GeneratorSource:
    """Reference lane changes sampled from a trained sequence generator."""

    def __init__(self, generator, grid, dt, length=40):
        self.generator, self.grid, self.dt, self.length = generator, grid, dt, length

    def __call__(self, rng):
        tokens = self.generator.sample(1, self.length, rng)[0]
        return dequantize(tokens, self.grid, self.dt, source_id="blm")


class CorpusSource:
    """Reference lane changes drawn uniformly from a trajectory list."""

    def __init__(self, trajs):
        if not trajs:
            raise ValueError("empty reference corpus")
        self.trajs = list(trajs)

    def __call__(self, rng):
        return self.trajs[int(rng.integers(len(self.trajs)))]


def trigger_frame(world):
    """Anchor pose (x, y, ψ, v) of the ego and the side (+1 left, −1 right) the target is on."""
    e, t = world.ego, world.target
    rel_y = -math.sin(e.psi) * (t.x - e.x) + math.cos(e.psi) * (t.y - e.y)
    return (e.x, e.y, e.psi, e.v), (1.0 if rel_y >= 0 else -1.0)


def executed_xv(ego, anchor, side):
    """(X, V) of the ego relative to the anchor pose, X positive toward the target side."""
    x0, y0, psi0, v0 = anchor
    rel_y = -math.sin(psi0) * (ego.x - x0) + math.cos(psi0) * (ego.y - y0)
    return side * rel_y, ego.v - v0


class AttackAgent:
    """Implements the episode-policy protocol (reset / begin_attack / act / feedback / end_episode).

    With ``guidance`` the waypoints follow a generated reference lane change
    and the deviation and cos_sim reward terms are active; without it the
    reference is a straight continuation of the trigger pose.  A generated
    reference is sampled in both modes so the executed path can always be
    scored against it (``meta['cos_sim_blm']``).
    """

    def __init__(self, policy, source=None, weights=None, guidance=True, deterministic=False, scale=None,
                 horizon=5, period=0.1, window=10, buffer=None):
        self.policy = policy
        self.source = source
        self.weights = weights or RewardWeights()
        self.guidance = guidance and source is not None
        self.deterministic = deterministic
        self.scale = scale or ActionScale()
        self.horizon, self.period, self.window = horizon, period, window
        self.buffer = buffer

    def reset(self, world, rng):
        self.rng = rng
        self.h = self.policy.initial_state()
        self.track = self.blm_track = None
        self.exec_xv = []
        self.last_world = None
        self.in_episode = False

    def begin_attack(self, world):
        self.anchor, self.side = trigger_frame(world)
        ref = self.source(self.rng) if self.source is not None else None
        self.blm_track = ReferenceTrack.from_trajectory(ref, self.anchor, self.side) if ref is not None else None
        self.ref_duration = ref.duration if ref is not None else 0.0
        if self.guidance:
            self.track = self.blm_track
        else:
            self.track = ReferenceTrack.straight(self.anchor, self.side, dt=world.dt)
        self.prev_a = world.ego.a
        self.dt = world.dt
        self.h = self.policy.initial_state()
        if self.buffer is not None:
            self.buffer.begin_episode()
            self.in_episode = True

    def act(self, world):
        obs = observe(world)
        h_prev = self.h
        self.h, a, logp, value = self.policy.act(self.h, obs, self.rng, self.deterministic)
        if self.buffer is not None:
            self.buffer.add(obs, a, logp, value, h_prev)
        phys = self.scale.to_physical(a)
        wp = emit_waypoints(phys, world.ego, self.track, self.horizon, self.period)
        return wp, {"action": phys, "value": value}

    def _ref_xv(self, n):
        if self.blm_track is None:
            return np.zeros((n, 2))
        return self.blm_track.xv_at(np.arange(1, n + 1) * self.dt)

    def feedback(self, world, collided):
        e = world.ego
        self.exec_xv.append(executed_xv(e, self.anchor, self.side))
        n = len(self.exec_xv)
        sim = window_cos_sim(np.array(self.exec_xv), self._ref_xv(n), self.window)
        deviation = self.track.project(e.x, e.y)[1]
        total, terms = reward(deviation, not world.on_road(e.y), e.a - self.prev_a, sim, collided, self.weights,
                              self.guidance)
        self.prev_a = e.a
        self.last_world = world
        if self.buffer is not None and self.in_episode:
            self.buffer.set_reward(total)
        return terms

    def guidance_similarity(self):
        """cos_sim between the executed post-trigger (X, V) path and the generated reference.

        Uses the samples within the reference's own duration (at least 2).
        """
        if not self.exec_xv or self.blm_track is None:
            return None
        n = max(2, int(round(self.ref_duration / self.dt)))
        n = min(n, len(self.exec_xv))
        return window_cos_sim(np.array(self.exec_xv[:n]), self._ref_xv(n), window=n)

    def end_episode(self, log):
        sim = self.guidance_similarity()
        log.meta["cos_sim_blm"] = sim
        log.meta["guidance"] = self.guidance
        if self.buffer is not None and self.in_episode:
            terminal = log.terminal != "timeout"
            last_v = 0.0
            if not terminal and self.last_world is not None:
                _, _, v = self.policy.step(self.h, observe(self.last_world))
                last_v = float(v[0])
            self.buffer.end_episode(last_v, terminal)
            self.in_episode = False
