"""Scenario configuration, episode loop with attack triggering, episode logs."""

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .safety import check_collision, pairwise_ttc
from .world import ActuatorLimits, VehicleState, WorldState, step

VEHICLE_COLUMNS = ("step", "time", "vid", "role", "x", "y", "psi", "v", "a", "delta", "ttc", "triggered")


class VehicleSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    role: Literal["ego", "target", "background"]
    x: float
    y: float
    v: float = Field(ge=0)
    psi: float = 0.0
    length: float = Field(4.5, gt=0)
    width: float = Field(1.8, gt=0)


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    lanes: int = Field(3, ge=1)
    lane_width_m: float = Field(3.5, gt=0)
    dt_s: float = Field(0.05, gt=0)
    vehicles: list[VehicleSpec]
    trigger_ttc_s: float = Field(2.5, gt=0)
    max_duration_s: float = Field(10.0, gt=0)

    def to_world(self):
        vehicles = [VehicleState(x=s.x, y=s.y, v=s.v, psi=s.psi, length=s.length, width=s.width,
                                 role=s.role, vid=i) for i, s in enumerate(self.vehicles)]
        return WorldState(dt=self.dt_s, vehicles=vehicles, lanes=self.lanes, lane_width=self.lane_width_m)

    @property
    def max_steps(self):
        return int(round(self.max_duration_s / self.dt_s))


@dataclass
class EpisodeLog:
    dt: float
    records: list = field(default_factory=list)
    terminal: str = "timeout"
    trigger_step: Optional[int] = None
    collision: Optional[dict] = None
    aborted: Optional[str] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    @property
    def collided(self):
        return self.terminal == "collision"

    @property
    def trigger_time(self):
        return None if self.trigger_step is None else self.trigger_step * self.dt

    def ego_ttc(self):
        return np.array([r["ttc"] for r in self.records])

    def reward_terms(self):
        """Per-step reward breakdown rows (post-trigger steps only)."""
        return [r["reward"] for r in self.records if r.get("reward")]

    def summary(self):
        ttcs = self.ego_ttc()
        finite = ttcs[np.isfinite(ttcs)] if len(ttcs) else ttcs
        rewards = self.reward_terms()
        return {
            "dt": self.dt,
            "steps": len(self.records),
            "terminal": self.terminal,
            "collision": self.collision,
            "trigger_step": self.trigger_step,
            "trigger_time": self.trigger_time,
            "min_ttc": float(finite.min()) if len(finite) else None,
            "total_reward": float(sum(r["total"] for r in rewards)) if rewards else 0.0,
            "aborted": self.aborted,
            "meta": self.meta,
        }

    def write(self, directory):
        """Persist as ``vehicles.csv``, ``rewards.csv`` and ``summary.json`` in ``directory``."""
        import os
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "vehicles.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(VEHICLE_COLUMNS)
            for r in self.records:
                for v in r["vehicles"]:
                    w.writerow([r["step"], _fmt(r["time"]), v[0], v[1], *(_fmt(q) for q in v[2:]),
                                _fmt(r["ttc"]), int(r["triggered"])])
        rewards = [(r["step"], r["time"], r["reward"]) for r in self.records if r.get("reward")]
        keys = list(rewards[0][2]) if rewards else []
        with open(os.path.join(directory, "rewards.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "time", *keys])
            for s, t, terms in rewards:
                w.writerow([s, _fmt(t), *(_fmt(terms[k]) for k in keys)])
        with open(os.path.join(directory, "controls.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "time", "a_cmd", "delta_cmd", "source", "status"])
            for r in self.records:
                w.writerow([r["step"], _fmt(r["time"]), _fmt(r["control"][0]), _fmt(r["control"][1]),
                            r["control_source"], r.get("status", "")])
        with open(os.path.join(directory, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=1, sort_keys=True)


def load_episode(directory):
    """Rebuild an :class:`EpisodeLog` from the files written by :meth:`EpisodeLog.write`."""
    import os
    with open(os.path.join(directory, "summary.json"), encoding="utf-8") as fh:
        summ = json.load(fh)
    log = EpisodeLog(dt=summ["dt"], terminal=summ["terminal"], trigger_step=summ["trigger_step"],
                     collision=summ["collision"], aborted=summ["aborted"], meta=summ["meta"])
    by_step = {}
    with open(os.path.join(directory, "vehicles.csv"), newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            k = int(row["step"])
            rec = by_step.get(k)
            if rec is None:
                rec = by_step[k] = {"step": k, "time": float(row["time"]), "ttc": float(row["ttc"]),
                                    "triggered": row["triggered"] == "1", "vehicles": [], "reward": None}
            rec["vehicles"].append((int(row["vid"]), row["role"], *(float(row[c]) for c in VEHICLE_COLUMNS[4:10])))
    with open(os.path.join(directory, "controls.csv"), newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rec = by_step[int(row["step"])]
            rec["control"] = (float(row["a_cmd"]), float(row["delta_cmd"]))
            rec["control_source"] = row["source"]
            rec["status"] = row["status"]
    with open(os.path.join(directory, "rewards.csv"), newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            k = int(row.pop("step"))
            row.pop("time")
            by_step[k]["reward"] = {key: float(v) for key, v in row.items()}
    log.records = [by_step[k] for k in sorted(by_step)]
    return log


def _fmt(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def lane_keep_command(world, bounds=None, k_y=0.08, k_psi=0.8):
    """Pre-trigger ego control: hold speed, steer toward the current lane center.

    With ``bounds`` (an object exposing u_min/u_max/du_min/du_max over (a, δ))
    the command is clamped to the same box and rate limits the controller uses.
    """
    e = world.ego
    yc = world.lane_center(world.lane_of(e.y))
    u = np.array([0.0, -(k_y * (e.y - yc) + k_psi * e.psi)])
    if bounds is not None:
        prev = np.array([e.a, e.delta])
        lo = np.maximum(bounds.u_min, prev + bounds.du_min)
        hi = np.minimum(bounds.u_max, prev + bounds.du_max)
        u = np.minimum(np.maximum(u, lo), hi)
    return float(u[0]), float(u[1])


def waypoint_chase(ego, waypoints, dt, lookahead=None):
    """Controller-free tracking: pure pursuit on the first waypoint, speed error over one step."""
    wp = np.asarray(waypoints)[0]
    dx, dy = wp[0] - ego.x, wp[1] - ego.y
    ld = max(math.hypot(dx, dy), 1e-6)
    alpha = math.atan2(dy, dx) - ego.psi
    delta = math.atan2(2.0 * 2.7 * math.sin(alpha), ld)
    a = (wp[2] - ego.v) / (lookahead or dt)
    return a, delta


def run_episode(world, policy, controller, rng, trigger_ttc=2.5, max_duration=10.0, lane_bounds=None,
                record_vehicles=True):
    """Simulate one episode.

    Before the trigger the ego keeps its lane.  At the first state whose
    minimum TTC is below ``trigger_ttc`` the world is flagged as triggered
    (never reset), ``policy.begin_attack`` is called and from then on the
    policy's waypoints are tracked by ``controller`` (or by
    :func:`waypoint_chase` when ``controller`` is None).  The episode ends at
    the first ego collision or after ``max_duration`` seconds.
    """
    dt = world.dt
    n_max = int(round(max_duration / dt))
    log = EpisodeLog(dt=dt)
    policy.reset(world, rng)
    if controller is not None:
        controller.reset()
    world = world.copy()
    ttc_now = min(pairwise_ttc(world).values())
    if ttc_now < trigger_ttc:
        world.triggered = True
        log.trigger_step = 0
        policy.begin_attack(world)
    ego_id = world.ego.vid
    for k in range(1, n_max + 1):
        status = ""
        if world.triggered:
            waypoints, info = policy.act(world)
            if controller is not None:
                u = controller.control_step(world.ego, waypoints)
                status = controller.last_status
                source = "mpc"
            else:
                u = waypoint_chase(world.ego, waypoints, dt)
                source = "chase"
        else:
            u = lane_keep_command(world, lane_bounds)
            source = "lane_keep"
        try:
            world = step(world, {ego_id: u})
        except FloatingPointError as exc:
            log.aborted = str(exc)
            log.terminal = "aborted"
            break
        hit = check_collision(world)
        ttc_now = min(pairwise_ttc(world).values())
        reward = policy.feedback(world, hit is not None) if world.triggered else None
        rec = {"step": k, "time": world.time, "ttc": ttc_now, "triggered": world.triggered,
               "control": (world.ego.a, world.ego.delta), "control_source": source, "status": status,
               "reward": reward}
        if record_vehicles:
            rec["vehicles"] = [(v.vid, v.role, v.x, v.y, v.psi, v.v, v.a, v.delta) for v in world.vehicles]
        else:
            e = world.ego
            rec["vehicles"] = [(e.vid, e.role, e.x, e.y, e.psi, e.v, e.a, e.delta)]
        log.records.append(rec)
        if hit is not None:
            log.terminal = "collision"
            log.collision = {"other_id": hit.other_id, "time": hit.time, "step": k}
            break
        if not world.triggered and ttc_now < trigger_ttc:
            world.triggered = True
            log.trigger_step = k
            policy.begin_attack(world)
    policy.end_episode(log)
    return log


class LaneKeepPolicy:
    """Attack policy that never attacks: holds the lane after the trigger too."""

    def __init__(self, horizon=5):
        self.horizon = horizon

    def reset(self, world, rng):
        pass

    def begin_attack(self, world):
        pass

    def act(self, world):
        e = world.ego
        yc = world.lane_center(world.lane_of(e.y))
        k = np.arange(1, self.horizon + 1)
        wp = np.column_stack([e.x + e.v * world.dt * k, np.full(self.horizon, yc), np.full(self.horizon, e.v)])
        return wp, {}

    def feedback(self, world, collided):
        return None

    def end_episode(self, log):
        pass
