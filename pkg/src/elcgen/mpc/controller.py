"""Receding-horizon waypoint tracker: linearize, build the QP, solve, apply u₀."""

import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..env.world import WHEELBASE
from .model import linearize_along, state_vector
from .qp import CostWeights, InputBounds, build_qp, solve_qp

log = logging.getLogger(__name__)

_INF = float("inf")


class ControllerConfig(BaseModel):
    """Controller block of a scenario config."""
    model_config = ConfigDict(extra="forbid")
    N: int = Field(5, ge=1)
    # prediction step of the internal model; the QP is re-solved every simulation step
    dt_s: float = Field(0.1, gt=0)
    V_diag: list[float] = [1.0, 10.0, 5.0, 1.0]
    W_diag: list[float] = [0.5, 20.0]
    u_min: list[float] = [-6.0, -0.5]
    u_max: list[float] = [3.0, 0.5]
    du_min: list[float] = [-1.5, -0.1]
    du_max: list[float] = [1.5, 0.1]
    s_min: list[float] = [-_INF] * 4
    s_max: list[float] = [_INF] * 4
    tol: float = Field(1e-6, gt=0)
    max_iter: int = Field(2000, ge=1)

    @model_validator(mode="after")
    def _check(self):
        sizes = {"V_diag": 4, "W_diag": 2, "u_min": 2, "u_max": 2, "du_min": 2, "du_max": 2, "s_min": 4, "s_max": 4}
        for name, size in sizes.items():
            if len(getattr(self, name)) != size:
                raise ValueError(f"{name} must have {size} entries")
        if any(w < 0 for w in self.V_diag) or any(w <= 0 for w in self.W_diag):
            raise ValueError("V_diag must be >= 0 and W_diag > 0")
        self.bounds()
        return self

    def weights(self):
        return CostWeights(np.diag(self.V_diag), np.diag(self.W_diag))

    def bounds(self):
        return InputBounds(np.array(self.u_min), np.array(self.u_max), np.array(self.du_min), np.array(self.du_max),
                           np.array(self.s_min), np.array(self.s_max))


def state_references(waypoints, ego_psi):
    """(x, y, v) waypoints → (x, y, ψ, v) references; ψ from the chord between consecutive points.

    The first heading uses the chord from waypoint 0 to waypoint 1; headings are
    unwrapped to lie within π of the ego heading.
    """
    wp = np.asarray(waypoints, dtype=np.float64)
    if wp.ndim != 2 or wp.shape[1] != 3:
        raise ValueError("waypoints must be an (N, 3) array of x, y, v")
    n = len(wp)
    psi = np.full(n, ego_psi)
    if n >= 2:
        dx = np.diff(wp[:, 0])
        dy = np.diff(wp[:, 1])
        moving = np.hypot(dx, dy) > 1e-9
        chord = np.where(moving, np.arctan2(dy, dx), ego_psi)
        psi[1:] = chord
        psi[0] = chord[0]
    psi = ego_psi + (psi - ego_psi + math.pi) % (2 * math.pi) - math.pi
    return np.column_stack([wp[:, 0], wp[:, 1], psi, wp[:, 2]])


class MpcController:
    """Stateful only through its warm start (the previous horizon plan)."""

    def __init__(self, config=None, dt=None, wheelbase=WHEELBASE):
        self.config = config or ControllerConfig()
        self.dt = self.config.dt_s if dt is None else dt
        self.wheelbase = wheelbase
        self._weights = self.config.weights()
        self._bounds = self.config.bounds()
        self.reset()

    @property
    def bounds(self):
        return self._bounds

    def reset(self):
        self._plan = None
        self.last_status = ""
        self.last_solution = None
        self.failures = 0

    def _nominal_inputs(self, u_prev):
        N = self.config.N
        if self._plan is None:
            return np.tile(u_prev, (N, 1))
        return np.vstack([self._plan[1:], self._plan[-1:]])

    def control_step(self, ego, waypoints):
        """Return the first optimal input (a, δ), always inside the box and rate bounds."""
        N = self.config.N
        s0 = state_vector(ego)
        u_prev = np.array([ego.a, ego.delta])
        lo, hi = self._bounds.first_step_interval(u_prev)
        refs = state_references(waypoints, ego.psi)
        sol = None
        try:
            models, _ = linearize_along(s0, self._nominal_inputs(u_prev), self.dt, self.wheelbase)
            problem = build_qp(refs, s0, models, self._weights, self._bounds, N, u_prev)
            sol = solve_qp(problem, self.config.tol, self.config.max_iter)
        except (ValueError, np.linalg.LinAlgError) as exc:
            log.warning("MPC assembly failed: %s", exc)
        self.last_solution = sol
        if sol is not None and sol.optimal:
            self.last_status = "optimal"
            self._plan = sol.u.copy()
            u0 = sol.u[0]
        else:
            # hold the previous input; that point satisfies both rate and box bounds
            self.last_status = "fallback:" + (sol.status if sol is not None else "assembly")
            self.failures += 1
            self._plan = None
            u0 = u_prev
        u0 = np.minimum(np.maximum(u0, lo), hi)
        return float(u0[0]), float(u0[1])
