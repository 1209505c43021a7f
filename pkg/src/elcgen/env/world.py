"""Vehicle and world state, kinematic bicycle stepping, background traffic."""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .._accel import kernel

WHEELBASE = 2.7
ROLES = ("ego", "target", "background")


@dataclass
class ActuatorLimits:
    a_min: float = -8.0
    a_max: float = 5.0
    delta_max: float = 0.6


@dataclass
class VehicleState:
    x: float
    y: float
    v: float
    psi: float = 0.0
    a: float = 0.0
    delta: float = 0.0
    length: float = 4.5
    width: float = 1.8
    role: str = "background"
    vid: int = 0
    v_des: float = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.v < 0:
            raise ValueError("speed must be nonnegative")
        if self.length <= 0 or self.width <= 0:
            raise ValueError("vehicle dimensions must be positive")
        if self.v_des is None:
            self.v_des = self.v


@dataclass
class WorldState:
    dt: float
    vehicles: list
    lanes: int = 3
    lane_width: float = 3.5
    time: float = 0.0
    step_index: int = 0
    triggered: bool = False
    clamp_count: int = 0
    limits: ActuatorLimits = field(default_factory=ActuatorLimits)

    def __post_init__(self):
        roles = [v.role for v in self.vehicles]
        if roles.count("ego") != 1 or roles.count("target") != 1:
            raise ValueError("world needs exactly one ego and one target vehicle")
        ids = [v.vid for v in self.vehicles]
        if len(set(ids)) != len(ids):
            raise ValueError("vehicle ids must be unique")

    @property
    def ego(self):
        return next(v for v in self.vehicles if v.role == "ego")

    @property
    def target(self):
        return next(v for v in self.vehicles if v.role == "target")

    def others(self, vid):
        return [v for v in self.vehicles if v.vid != vid]

    def lane_center(self, lane):
        return (lane + 0.5) * self.lane_width

    def lane_of(self, y):
        return int(min(self.lanes - 1, max(0, math.floor(y / self.lane_width))))

    def on_road(self, y):
        return 0.0 <= y <= self.lanes * self.lane_width

    def copy(self):
        return replace(self, vehicles=[replace(v) for v in self.vehicles])

    def pack(self):
        """(n, 8) array of x, y, psi, v, a, delta, length, width."""
        return np.array([[v.x, v.y, v.psi, v.v, v.a, v.delta, v.length, v.width] for v in self.vehicles],
                        dtype=np.float64).reshape(-1, 8)


@kernel
def bicycle_step(state, accel, steer, dt, wheelbase):
    """Explicit-Euler kinematic bicycle for every row of ``state`` (x, y, psi, v).

    x += v cosψ dt; y += v sinψ dt; ψ += v/L tanδ dt; v = max(0, v + a dt).
    """
    out = np.empty_like(state)
    for i in range(state.shape[0]):
        x, y, psi, v = state[i, 0], state[i, 1], state[i, 2], state[i, 3]
        out[i, 0] = x + v * math.cos(psi) * dt
        out[i, 1] = y + v * math.sin(psi) * dt
        out[i, 2] = psi + v / wheelbase * math.tan(steer[i]) * dt
        out[i, 3] = max(0.0, v + accel[i] * dt)
    return out


def background_command(world, veh, headway=1.0, brake=-3.0, accel=1.0, k_y=0.08, k_psi=0.8):
    """Constant-speed lane keeping with a gap-based decelerate-if-close rule."""
    lane = world.lane_of(veh.y)
    yc = world.lane_center(lane)
    half = 0.5 * world.lane_width
    gap = math.inf
    for o in world.vehicles:
        if o.vid == veh.vid or abs(o.y - veh.y) >= half:
            continue
        dx = o.x - veh.x
        if dx > 0:
            gap = min(gap, dx - 0.5 * (o.length + veh.length))
    if gap < veh.v * headway:
        a = brake
    elif veh.v < veh.v_des:
        a = min(accel, (veh.v_des - veh.v) / world.dt)
    else:
        a = 0.0
    delta = -(k_y * (veh.y - yc) + k_psi * veh.psi)
    return a, delta


def step(world, controls, dt=None):
    """Advance every vehicle one step and return the new world.

    ``controls`` maps vehicle id to ``(a_cmd, delta_cmd)``; vehicles without an
    entry follow :func:`background_command`.  Commands outside the actuator
    limits are clamped and counted in ``clamp_count``.
    """
    dt = world.dt if dt is None else dt
    if not dt > 0:
        raise ValueError("dt must be positive")
    lim = world.limits
    n = len(world.vehicles)
    acc = np.empty(n)
    steer = np.empty(n)
    clamps = 0
    for i, veh in enumerate(world.vehicles):
        a, d = controls[veh.vid] if veh.vid in controls else background_command(world, veh)
        a_c = min(lim.a_max, max(lim.a_min, a))
        d_c = min(lim.delta_max, max(-lim.delta_max, d))
        if a_c != a or d_c != d:
            clamps += 1
        acc[i], steer[i] = a_c, d_c
    state = np.array([[v.x, v.y, v.psi, v.v] for v in world.vehicles], dtype=np.float64).reshape(-1, 4)
    nxt = bicycle_step(state, acc, steer, dt, WHEELBASE)
    if not np.all(np.isfinite(nxt)):
        raise FloatingPointError(f"non-finite vehicle state at t={world.time + dt:.3f}")
    vehicles = [
        replace(v, x=float(nxt[i, 0]), y=float(nxt[i, 1]), psi=float(nxt[i, 2]), v=float(nxt[i, 3]),
                a=float(acc[i]), delta=float(steer[i]))
        for i, v in enumerate(world.vehicles)
    ]
    k = world.step_index + 1
    return replace(world, vehicles=vehicles, step_index=k, time=k * dt,
                   clamp_count=world.clamp_count + clamps)
