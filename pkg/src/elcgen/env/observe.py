"""Normalized observation vector for the attacking vehicle."""

import math

import numpy as np

NEIGHBORS = 4

# divisor applied to each raw quantity
SCALES = {
    "x": 200.0, "y": 10.0, "v": 30.0, "a": 5.0, "psi": 0.5,
    "dx": 50.0, "dy": 10.0, "dv": 10.0,
}
EGO_FIELDS = ("x", "y", "v", "a", "psi")
NEIGHBOR_FIELDS = ("dx", "dy", "dv")
OBS_DIM = len(EGO_FIELDS) + NEIGHBORS * len(NEIGHBOR_FIELDS)

# absent-neighbor slot after normalization: far away, no relative speed
SENTINEL = (1.0, 1.0, 0.0)


def observe(world, ego=None):
    """Ego (x, y, v, a, ψ) followed by (Δx, Δy, Δv) of the 4 nearest vehicles.

    Neighbors are ordered by Euclidean distance, ties broken by vehicle id.
    """
    ego = ego or world.ego
    obs = np.empty(OBS_DIM)
    for k, f in enumerate(EGO_FIELDS):
        obs[k] = getattr(ego, f) / SCALES[f]
    others = sorted(world.others(ego.vid), key=lambda o: (math.hypot(o.x - ego.x, o.y - ego.y), o.vid))
    base = len(EGO_FIELDS)
    for slot in range(NEIGHBORS):
        i = base + 3 * slot
        if slot < len(others):
            o = others[slot]
            obs[i] = (o.x - ego.x) / SCALES["dx"]
            obs[i + 1] = (o.y - ego.y) / SCALES["dy"]
            obs[i + 2] = (o.v - ego.v) / SCALES["dv"]
        else:
            obs[i:i + 3] = SENTINEL
    return obs


def denormalize(obs):
    """Inverse of :func:`observe`: raw ego fields and a list of neighbor tuples.

    Sentinel slots come back as ``None``.
    """
    obs = np.asarray(obs, dtype=np.float64)
    ego = {f: obs[k] * SCALES[f] for k, f in enumerate(EGO_FIELDS)}
    neighbors = []
    base = len(EGO_FIELDS)
    for slot in range(NEIGHBORS):
        i = base + 3 * slot
        chunk = obs[i:i + 3]
        if tuple(chunk) == SENTINEL:
            neighbors.append(None)
        else:
            neighbors.append(tuple(chunk[j] * SCALES[f] for j, f in enumerate(NEIGHBOR_FIELDS)))
    return ego, neighbors
