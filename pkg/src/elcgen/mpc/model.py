"""Discrete kinematic bicycle and its exact linearization."""

import math
from dataclasses import dataclass

import numpy as np

from ..env.world import WHEELBASE

STATE_DIM = 4  # x, y, psi, v
INPUT_DIM = 2  # a, delta


@dataclass(frozen=True)
class LtvModel:
    """s_{k+1} ≈ A s_k + B u_k + c, exact at the expansion point."""
    A: np.ndarray
    B: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        if self.A.shape != (4, 4) or self.B.shape != (4, 2) or self.c.shape != (4,):
            raise ValueError("LtvModel expects A 4x4, B 4x2, c 4")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.B)) and np.all(np.isfinite(self.c))):
            raise ValueError("LtvModel entries must be finite")

    def predict(self, s, u):
        return self.A @ s + self.B @ u + self.c


def state_vector(vehicle):
    return np.array([vehicle.x, vehicle.y, vehicle.psi, vehicle.v], dtype=np.float64)


def f_discrete(s, u, dt, wheelbase=WHEELBASE):
    """One explicit-Euler bicycle step without the v ≥ 0 floor (smooth model used by the controller)."""
    x, y, psi, v = s
    a, delta = u
    return np.array([
        x + v * math.cos(psi) * dt,
        y + v * math.sin(psi) * dt,
        psi + v / wheelbase * math.tan(delta) * dt,
        v + a * dt,
    ])


def linearize(s, u_op, dt, wheelbase=WHEELBASE):
    """Jacobians of :func:`f_discrete` at (s, u_op) plus the offset that makes the model exact there.

    ``s`` may be a state vector (x, y, ψ, v) or any object with those attributes.
    """
    if not isinstance(s, np.ndarray):
        s = state_vector(s)
    s = np.asarray(s, dtype=np.float64)
    u_op = np.asarray(u_op, dtype=np.float64)
    if s[3] < 0:
        raise ValueError("linearize requires v >= 0")
    _, _, psi, v = s
    delta = u_op[1]
    A = np.eye(4)
    A[0, 2] = -v * math.sin(psi) * dt
    A[0, 3] = math.cos(psi) * dt
    A[1, 2] = v * math.cos(psi) * dt
    A[1, 3] = math.sin(psi) * dt
    A[2, 3] = math.tan(delta) / wheelbase * dt
    B = np.zeros((4, 2))
    B[2, 1] = v / (wheelbase * math.cos(delta) ** 2) * dt
    B[3, 0] = dt
    c = f_discrete(s, u_op, dt, wheelbase) - A @ s - B @ u_op
    return LtvModel(A, B, c)


def linearize_along(s0, u_seq, dt, wheelbase=WHEELBASE):
    """LTV models along the nominal trajectory obtained by rolling ``u_seq`` out from ``s0``.

    Returns (models, nominal_states) with len(models) == len(u_seq).
    """
    s = np.asarray(s0, dtype=np.float64)
    models, states = [], [s]
    for u in np.asarray(u_seq, dtype=np.float64):
        s_lin = s.copy()
        s_lin[3] = max(s_lin[3], 0.0)
        models.append(linearize(s_lin, u, dt, wheelbase))
        s = f_discrete(s, u, dt, wheelbase)
        states.append(s)
    return models, np.array(states)
