"""Grid, random and scripted attack baselines run through the same env + controller stack."""

import math
import time

import numpy as np

from ..rng import substream
from ..vaa.agent import trigger_frame
from ..vaa.track import ActionScale, ReferenceTrack, emit_waypoints
from .summary import collision_rate

KINDS = ("grid", "random", "scripted")


class _TrackPolicy:
    """Waypoints as offsets from a straight continuation of the trigger pose."""

    def __init__(self, horizon=5, period=0.1, scale=None):
        self.horizon, self.period = horizon, period
        self.scale = scale or ActionScale()

    def reset(self, world, rng):
        self.rng = rng
        self.track = None

    def begin_attack(self, world):
        self.anchor, self.side = trigger_frame(world)
        self.track = ReferenceTrack.straight(self.anchor, self.side, dt=world.dt)
        t = world.target
        x0, y0, psi0, _ = self.anchor
        self.target_offset = abs(-math.sin(psi0) * (t.x - x0) + math.cos(psi0) * (t.y - y0))

    def action(self, world):
        raise NotImplementedError

    def act(self, world):
        a = self.action(world)
        return emit_waypoints(a, world.ego, self.track, self.horizon, self.period), {"action": a}

    def feedback(self, world, collided):
        return None

    def end_episode(self, log):
        pass


class ConstantAction(_TrackPolicy):
    def __init__(self, speed_delta, lateral, **kw):
        super().__init__(**kw)
        self.a = np.array([speed_delta, lateral], dtype=np.float64)

    def action(self, world):
        return self.a


class RandomAction(_TrackPolicy):
    """A fresh uniform action in the full physical action box at every decision step."""

    def action(self, world):
        s = self.scale
        return np.array([self.rng.uniform(-s.speed_max, s.speed_max), self.rng.uniform(-s.lateral_max, s.lateral_max)])


class ScriptedCutIn(_TrackPolicy):
    """Move over by the target's lateral offset at the trigger and add a fixed speed surplus."""

    def __init__(self, speed_delta=2.0, **kw):
        super().__init__(**kw)
        self.speed_delta = speed_delta

    def action(self, world):
        return np.array([self.speed_delta, self.target_offset])


def grid_actions(k, scale=None):
    s = scale or ActionScale()
    dv = np.linspace(-s.speed_max, s.speed_max, k)
    lat = np.linspace(-s.lateral_max, s.lateral_max, k)
    return [(a, b) for a in dv for b in lat]


def run_baseline(kind, scenarios, budget, seed, controller_cfg=None, use_mpc=True):
    """Evaluate a baseline; returns (RunSummary, logs).

    grid: ``budget`` must be a perfect square k²; each of the k×k constant
    actions is run once.  random/scripted: ``budget`` episodes.  Scenarios
    are cycled in order.
    """
    from ..vaa.train import make_controller, rollout
    if kind not in KINDS:
        raise ValueError(f"unknown baseline {kind!r}; choose from {KINDS}")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not scenarios:
        raise ValueError("no scenarios")
    controller = make_controller(controller_cfg, use_mpc)
    if kind == "grid":
        k = math.isqrt(budget)
        if k * k != budget:
            raise ValueError("grid budget must be a perfect square (lattice size k×k)")
        policies = [ConstantAction(a, b) for a, b in grid_actions(k)]
    elif kind == "random":
        policies = [RandomAction()] * budget
    else:
        policies = [ScriptedCutIn()] * budget
    t0 = time.perf_counter()
    logs = []
    for i, pol in enumerate(policies):
        log = rollout(pol, controller, scenarios[i % len(scenarios)], substream(seed, "baseline", kind, i))
        log.meta["episode"] = i
        log.meta["baseline"] = kind
        logs.append(log)
    wall = time.perf_counter() - t0
    return collision_rate(logs, wallclock_s=wall), logs
