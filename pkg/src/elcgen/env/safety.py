"""Time-to-collision and oriented-rectangle collision checks."""

import math
from dataclasses import dataclass

import numpy as np

from .._accel import kernel


@kernel
def ttc_kernel(ego_x, ego_y, ego_psi, ego_vx, ego_vy, xs, ys, vxs, vys):
    """Per-vehicle TTC from the ego; returns an array (inf where not closing).

    d = |p_j − p_E|, bearing = atan2(Δy, Δx), closing speed ∇v is the relative
    velocity component along the line of centers (positive when closing), and
    TTC_j = d / (∇v·cos(bearing − ψ_E)) when ∇v > 0 and the cosine is
    positive (above 1e-12); otherwise ∞.
    """
    n = xs.shape[0]
    out = np.full(n, np.inf)
    for j in range(n):
        dx = xs[j] - ego_x
        dy = ys[j] - ego_y
        d = math.sqrt(dx * dx + dy * dy)
        if d == 0.0:
            out[j] = 0.0
            continue
        closing = -((vxs[j] - ego_vx) * dx + (vys[j] - ego_vy) * dy) / d
        if closing <= 0.0:
            continue
        cosb = math.cos(math.atan2(dy, dx) - ego_psi)
        # a bearing of exactly ±90° leaves cos at ~6e-17 in floating point; treat it as zero
        if cosb > 1e-12:
            out[j] = d / (closing * cosb)
    return out


def pairwise_ttc(world, ego=None):
    """TTC from the ego to every other vehicle, as {vid: seconds}."""
    ego = ego or world.ego
    others = world.others(ego.vid)
    if not others:
        raise ValueError("TTC needs at least one non-ego vehicle")
    xs = np.array([o.x for o in others])
    ys = np.array([o.y for o in others])
    vxs = np.array([o.v * math.cos(o.psi) for o in others])
    vys = np.array([o.v * math.sin(o.psi) for o in others])
    vals = ttc_kernel(ego.x, ego.y, ego.psi, ego.v * math.cos(ego.psi), ego.v * math.sin(ego.psi),
                      xs, ys, vxs, vys)
    return {o.vid: float(t) for o, t in zip(others, vals)}


def ttc(world, ego=None):
    """Minimum TTC over all non-ego vehicles (seconds, possibly inf)."""
    return min(pairwise_ttc(world, ego).values())


@kernel
def rect_overlap_depth(ax, ay, apsi, alen, awid, bx, by, bpsi, blen, bwid):
    """Separating-axis test for two oriented rectangles.

    Returns the smallest interval overlap over the four candidate axes:
    positive means the rectangles intersect (penetration depth along the
    weakest axis); zero or negative means a separating axis exists.
    """
    ca, sa = math.cos(apsi), math.sin(apsi)
    cb, sb = math.cos(bpsi), math.sin(bpsi)
    axes = np.array([[ca, sa], [-sa, ca], [cb, sb], [-sb, cb]])
    ha, wa = 0.5 * alen, 0.5 * awid
    hb, wb = 0.5 * blen, 0.5 * bwid
    depth = np.inf
    for k in range(4):
        ux, uy = axes[k, 0], axes[k, 1]
        # projection radius of each rectangle onto the axis
        ra = ha * abs(ca * ux + sa * uy) + wa * abs(-sa * ux + ca * uy)
        rb = hb * abs(cb * ux + sb * uy) + wb * abs(-sb * ux + cb * uy)
        dist = abs((bx - ax) * ux + (by - ay) * uy)
        overlap = ra + rb - dist
        if overlap < depth:
            depth = overlap
    return depth


@dataclass(frozen=True)
class CollisionEvent:
    ego_id: int
    other_id: int
    time: float
    depth: float


def check_collision(world):
    """First vehicle (by id) whose footprint overlaps the ego, or None."""
    e = world.ego
    hits = []
    for o in world.others(e.vid):
        depth = rect_overlap_depth(e.x, e.y, e.psi, e.length, e.width, o.x, o.y, o.psi, o.length, o.width)
        if depth > 0.0:
            hits.append(CollisionEvent(e.vid, o.vid, world.time, float(depth)))
    if not hits:
        return None
    return min(hits, key=lambda h: h.other_id)
