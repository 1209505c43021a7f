"""Reference tracks anchored at the trigger pose, and waypoint emission for the controller."""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ActionScale:
    """Maps the raw Gaussian action to (speed delta m/s, lateral offset m), then clips."""
    speed: float = 4.0
    lateral: float = 2.0
    speed_max: float = 10.0
    lateral_max: float = 4.0

    def to_physical(self, raw):
        raw = np.asarray(raw, dtype=np.float64)
        return np.array([np.clip(self.speed * raw[0], -self.speed_max, self.speed_max),
                         np.clip(self.lateral * raw[1], -self.lateral_max, self.lateral_max)])


@dataclass
class ReferenceTrack:
    """Time-parameterized path: ``times`` (n,), ``points`` (n, 2), ``speeds`` (n,).

    ``lateral`` and ``dspeed`` are the (X, V) deltas from the anchor pose used
    for cos_sim; X is positive toward the target side.  ``side`` is +1 when
    the target lies to the left of the anchor heading.
    """
    times: np.ndarray
    points: np.ndarray
    speeds: np.ndarray
    lateral: np.ndarray
    dspeed: np.ndarray
    anchor: tuple
    side: float = 1.0
    guided: bool = True

    @property
    def duration(self):
        return float(self.times[-1])

    @classmethod
    def from_profile(cls, lateral, dspeed, dt, anchor, side=1.0, extend_s=10.0, guided=True):
        """Build from (X, V) samples at spacing ``dt``; the tail is extended at constant heading and speed."""
        lat = np.asarray(lateral, dtype=np.float64)
        dv = np.asarray(dspeed, dtype=np.float64)
        if len(lat) != len(dv) or len(lat) < 1:
            raise ValueError("lateral and speed profiles must be nonempty and equally long")
        x0, y0, psi0, v0 = anchor
        n_ext = int(math.ceil(extend_s / dt))
        if n_ext > 0:
            lat = np.concatenate([lat, np.full(n_ext, lat[-1])])
            dv = np.concatenate([dv, np.full(n_ext, dv[-1])])
        speeds = np.maximum(v0 + dv, 0.0)
        s = np.concatenate([[0.0], np.cumsum(0.5 * (speeds[1:] + speeds[:-1]) * dt)])
        c, sn = math.cos(psi0), math.sin(psi0)
        py = side * lat
        points = np.column_stack([x0 + c * s - sn * py, y0 + sn * s + c * py])
        times = np.arange(len(lat)) * dt
        return cls(times, points, speeds, lat, dv, tuple(anchor), float(side), guided)

    @classmethod
    def from_trajectory(cls, traj, anchor, side=1.0, extend_s=10.0):
        """Anchor a generated lane-change trajectory; its lateral sign is flipped to point at the target."""
        lat = traj.x - traj.x[0]
        sign = 1.0 if lat[-1] >= 0 else -1.0
        return cls.from_profile(sign * lat, traj.v - traj.v[0], traj.dt, anchor, side, extend_s)

    @classmethod
    def straight(cls, anchor, side=1.0, duration=10.0, dt=0.05):
        """Null track: hold the anchor heading and speed (used when guidance is off)."""
        return cls.from_profile(np.zeros(1), np.zeros(1), dt, anchor, side, duration, guided=False)

    def headings(self):
        d = np.diff(self.points, axis=0)
        h = np.arctan2(d[:, 1], d[:, 0])
        if len(h) == 0:
            return np.array([self.anchor[2]])
        return np.concatenate([h, h[-1:]])

    def sample(self, tau):
        """Interpolated (x, y, v, heading) at times ``tau`` (clamped to the track)."""
        tau = np.clip(np.asarray(tau, dtype=np.float64), 0.0, self.times[-1])
        x = np.interp(tau, self.times, self.points[:, 0])
        y = np.interp(tau, self.times, self.points[:, 1])
        v = np.interp(tau, self.times, self.speeds)
        hs = self.headings()
        idx = np.clip(np.searchsorted(self.times, tau, side="right") - 1, 0, len(hs) - 1)
        return x, y, v, hs[idx]

    def xv_at(self, tau):
        """(X, V) reference deltas at times ``tau``, shape (n, 2)."""
        tau = np.clip(np.asarray(tau, dtype=np.float64), 0.0, self.times[-1])
        return np.column_stack([np.interp(tau, self.times, self.lateral), np.interp(tau, self.times, self.dspeed)])

    def project(self, px, py):
        """Time parameter of the closest point on the polyline to (px, py), and that distance."""
        P = self.points
        if len(P) == 1:
            return 0.0, float(math.hypot(px - P[0, 0], py - P[0, 1]))
        a = P[:-1]
        d = P[1:] - a
        L2 = np.einsum("ij,ij->i", d, d)
        q = np.array([px, py]) - a
        u = np.where(L2 > 0, np.einsum("ij,ij->i", q, d) / np.where(L2 > 0, L2, 1.0), 0.0)
        u = np.clip(u, 0.0, 1.0)
        closest = a + u[:, None] * d
        dist = np.hypot(closest[:, 0] - px, closest[:, 1] - py)
        i = int(np.argmin(dist))
        tau = self.times[i] + u[i] * (self.times[i + 1] - self.times[i])
        return float(tau), float(dist[i])


def emit_waypoints(action, ego, track, N=5, period=0.1):
    """N waypoints (x, y, v) ahead of the ego's projection onto ``track``.

    ``action`` is physical (speed delta m/s, lateral offset m); the lateral
    offset moves every point along the track normal toward the target side.
    """
    dv, lat = float(action[0]), float(action[1])
    tau0, _ = track.project(ego.x, ego.y)
    taus = tau0 + period * np.arange(1, N + 1)
    x, y, v, h = track.sample(taus)
    nx, ny = -np.sin(h) * track.side, np.cos(h) * track.side
    return np.column_stack([x + lat * nx, y + lat * ny, np.maximum(v + dv, 0.0)])
