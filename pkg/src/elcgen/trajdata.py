"""Trajectory data: loading, filtering, normalization, quantization, synthesis.

A trajectory is a uniformly sampled sequence of (x, v) pairs, where ``x`` is
the lateral displacement from the start (m) and ``v`` the longitudinal speed
change from the start (m/s).
"""

import csv
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

CSV_HEADER = ("id", "t", "x", "v")


class TrajectoryFormatError(ValueError):
    """Malformed trajectory file or trajectory value."""


@dataclass
class Trajectory:
    dt: float
    samples: np.ndarray
    source_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1, 2)
        if not self.dt > 0:
            raise TrajectoryFormatError(f"dt must be positive, got {self.dt}")
        if len(self.samples) < 2:
            raise TrajectoryFormatError(f"trajectory {self.source_id!r} has fewer than 2 samples")
        if not np.all(np.isfinite(self.samples)):
            raise TrajectoryFormatError(f"trajectory {self.source_id!r} has non-finite samples")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self):
        return (len(self.samples) - 1) * self.dt

    @property
    def x(self):
        return self.samples[:, 0]

    @property
    def v(self):
        return self.samples[:, 1]

    @property
    def times(self):
        return np.arange(len(self.samples)) * self.dt


def load_trajectories(path, dt=None):
    """Read trajectories from an ``id,t,x,v`` CSV file.

    Rows of one id must be contiguous with strictly increasing ``t``.  If
    ``dt`` is not given it is taken from the mean timestamp spacing of each
    trajectory.  Unknown columns are ignored.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    groups = {}
    order = []
    closed = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.lstrip().startswith("#"))
        header = next(reader, None)
        if header is None:
            return []
        header = [h.strip() for h in header]
        missing = [c for c in CSV_HEADER if c not in header]
        if missing:
            raise TrajectoryFormatError(f"{path}: missing columns {missing}")
        col = {name: header.index(name) for name in CSV_HEADER}
        current = None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            tid = row[col["id"]].strip()
            try:
                t, x, v = (float(row[col[c]]) for c in ("t", "x", "v"))
            except (ValueError, IndexError) as exc:
                raise TrajectoryFormatError(f"{path}:{lineno}: non-numeric field ({exc})") from None
            if not all(math.isfinite(val) for val in (t, x, v)):
                raise TrajectoryFormatError(f"{path}:{lineno}: non-finite field")
            if tid != current:
                if tid in closed or tid in groups:
                    raise TrajectoryFormatError(f"{path}:{lineno}: rows of id {tid!r} are not contiguous")
                if current is not None:
                    closed.add(current)
                groups[tid] = []
                order.append(tid)
                current = tid
            rows = groups[tid]
            if rows and t <= rows[-1][0]:
                raise TrajectoryFormatError(
                    f"{path}:{lineno}: timestamps of id {tid!r} are not increasing"
                )
            rows.append((t, x, v))
    out = []
    for tid in order:
        rows = np.array(groups[tid])
        if len(rows) < 2:
            log.warning("skipping id %r with a single row", tid)
            continue
        step = dt if dt is not None else float((rows[-1, 0] - rows[0, 0]) / (len(rows) - 1))
        spacing = np.diff(rows[:, 0])
        if dt is not None and np.max(np.abs(spacing - dt)) > 1e-6 + 1e-3 * dt:
            log.warning("id %r: timestamp spacing disagrees with dt=%g", tid, dt)
        out.append(Trajectory(step, rows[:, 1:], source_id=tid))
    return out


def write_trajectories(path, trajs):
    """Write trajectories in the ``id,t,x,v`` schema (17 significant digits)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for k, tr in enumerate(trajs):
            tid = tr.source_id or f"traj{k:05d}"
            for t, (x, v) in zip(tr.times, tr.samples):
                w.writerow((tid, repr(float(t)), repr(float(x)), repr(float(v))))


def filter_emergency(trajs, max_duration=2.0):
    """Keep trajectories whose duration is strictly below ``max_duration``."""
    if not max_duration > 0:
        raise ValueError("max_duration must be positive")
    # (len-1)*dt picks up rounding, e.g. 80*0.025; treat values within 1e-9 as equal
    limit = max_duration - 1e-9 * max(1.0, max_duration)
    return [tr for tr in trajs if tr.duration < limit]


def normalize(traj):
    """Shift both channels so the first sample is exactly (0, 0)."""
    if len(traj.samples) < 2:
        raise TrajectoryFormatError("normalize needs at least 2 samples")
    s = traj.samples - traj.samples[0]
    s[0] = 0.0
    return Trajectory(traj.dt, s, traj.source_id)


def resample(traj, length=40):
    """Linearly resample to ``length`` points spanning the same duration."""
    if length < 2:
        raise ValueError("length must be >= 2")
    t_old = traj.times
    t_new = np.linspace(0.0, traj.duration, length)
    s = np.column_stack([np.interp(t_new, t_old, traj.samples[:, c]) for c in range(2)])
    return Trajectory(traj.duration / (length - 1), s, traj.source_id)


def quintic(tau):
    """Minimum-jerk blend 10τ³ − 15τ⁴ + 6τ⁵ on [0, 1]."""
    tau = np.clip(tau, 0.0, 1.0)
    return tau**3 * (10.0 - 15.0 * tau + 6.0 * tau**2)


def speed_change_profile(tau, duration, decel, brake_fraction=0.6):
    """Speed change: smooth braking to ``-decel * brake_fraction * T`` then half recovery."""
    tau = np.asarray(tau, dtype=np.float64)
    peak = decel * brake_fraction * duration
    rise = quintic(tau / brake_fraction)
    fall = quintic((tau - brake_fraction) / (1.0 - brake_fraction))
    return np.where(tau <= brake_fraction, -peak * rise, -peak * (1.0 - 0.5 * fall))


@dataclass
class LaneChangeParams:
    lane_offset: float
    duration: float
    decel: float
    noise_scale: float = 0.0


def synth_lane_change(params, rng, dt=0.04, source_id=""):
    """One synthetic emergency lane change (normalized).

    The lateral channel follows the quintic blend from 0 to ``lane_offset``
    over ``duration``; the speed channel brakes then partially recovers.
    Gaussian noise of scale ``noise_scale`` is added to both channels.
    """
    D, T = float(params.lane_offset), float(params.duration)
    if not 0.8 <= T < 2.0:
        raise ValueError(f"duration {T} outside [0.8, 2.0)")
    if abs(D) > 4.0:
        raise ValueError(f"|lane_offset| {abs(D)} > 4.0")
    if params.noise_scale < 0:
        raise ValueError("noise_scale must be >= 0")
    n = max(2, int(round(T / dt))) + 1
    tau = np.linspace(0.0, 1.0, n)
    x = D * quintic(tau)
    v = speed_change_profile(tau, T, params.decel)
    if params.noise_scale > 0:
        x = x + rng.normal(0.0, params.noise_scale, n)
        v = v + rng.normal(0.0, params.noise_scale, n)
    return normalize(Trajectory(T / (n - 1), np.column_stack([x, v]), source_id))


def synth_corpus(n, rng, dt=0.04, noise_scale=0.03):
    """``n`` synthetic lane changes with randomized offset, duration and braking."""
    out = []
    for k in range(n):
        sign = 1.0 if rng.random() < 0.5 else -1.0
        p = LaneChangeParams(
            lane_offset=sign * rng.uniform(2.8, 3.9),
            duration=rng.uniform(1.0, 1.95),
            decel=rng.uniform(0.5, 4.0),
            noise_scale=noise_scale,
        )
        out.append(synth_lane_change(p, rng, dt=dt, source_id=f"synth{k:05d}"))
    return out


@dataclass(frozen=True)
class QuantizerGrid:
    x_min: float = -4.5
    x_max: float = 4.5
    v_min: float = -10.0
    v_max: float = 10.0
    x_bins: int = 16
    v_bins: int = 16

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.v_min < self.v_max):
            raise ValueError("grid bounds must satisfy min < max")
        if self.x_bins < 1 or self.v_bins < 1:
            raise ValueError("bin counts must be positive")

    @property
    def vocab_size(self):
        return self.x_bins * self.v_bins

    @property
    def x_width(self):
        return (self.x_max - self.x_min) / self.x_bins

    @property
    def v_width(self):
        return (self.v_max - self.v_min) / self.v_bins

    def clamp(self, samples):
        s = np.array(samples, dtype=np.float64)
        s[..., 0] = np.clip(s[..., 0], self.x_min, self.x_max)
        s[..., 1] = np.clip(s[..., 1], self.v_min, self.v_max)
        return s


@dataclass
class TokenSequence:
    tokens: np.ndarray
    clamped: int = field(default=0)

    def __len__(self):
        return len(self.tokens)

    @property
    def length(self):
        return len(self.tokens)


def _bin(values, lo, width, bins):
    idx = np.floor((values - lo) / width).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def quantize(traj, grid):
    """Map each (x, v) sample to token ``x_bin * v_bins + v_bin``.

    Values outside the grid go to the edge bin; the number of clamped samples
    is recorded on the result and logged.
    """
    s = traj.samples
    out_x = (s[:, 0] < grid.x_min) | (s[:, 0] > grid.x_max)
    out_v = (s[:, 1] < grid.v_min) | (s[:, 1] > grid.v_max)
    clamped = int(np.count_nonzero(out_x | out_v))
    if clamped:
        log.warning("quantize: %d sample(s) of %r outside the grid were clamped", clamped, traj.source_id)
    xb = _bin(s[:, 0], grid.x_min, grid.x_width, grid.x_bins)
    vb = _bin(s[:, 1], grid.v_min, grid.v_width, grid.v_bins)
    return TokenSequence(xb * grid.v_bins + vb, clamped)


def dequantize(tokens, grid, dt=1.0, source_id=""):
    """Bin centers for a token sequence (``TokenSequence`` or int array)."""
    tok = np.asarray(getattr(tokens, "tokens", tokens), dtype=np.int64)
    if np.any((tok < 0) | (tok >= grid.vocab_size)):
        raise ValueError("token outside vocabulary")
    xb, vb = np.divmod(tok, grid.v_bins)
    x = grid.x_min + (xb + 0.5) * grid.x_width
    v = grid.v_min + (vb + 0.5) * grid.v_width
    return Trajectory(dt, np.column_stack([x, v]), source_id)


def mirror_to_positive(traj):
    """Flip the lateral channel so the lane change ends at a nonnegative offset."""
    if traj.x[-1] >= traj.x[0]:
        return traj
    s = traj.samples.copy()
    s[:, 0] = 2.0 * s[0, 0] - s[:, 0]
    return Trajectory(traj.dt, s, traj.source_id)


def tokenize_corpus(trajs, grid, length=40, mirror=False):
    """Normalize, resample to ``length`` and quantize; returns an (N, length) int array.

    With ``mirror`` every lane change is first flipped to end on the positive side.
    """
    prep = mirror_to_positive if mirror else (lambda tr: tr)
    rows = [quantize(resample(prep(normalize(tr)), length), grid).tokens for tr in trajs]
    if not rows:
        return np.zeros((0, length), dtype=np.int64)
    return np.stack(rows)
