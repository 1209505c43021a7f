"""Spatial aggregation of ego TTC samples."""

import csv
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    dx: float = 5.0
    dy: float = 1.0
    extent: tuple = None  # (x_min, x_max, y_min, y_max); derived from the samples when None

    def __post_init__(self):
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("grid resolution must be positive")


@dataclass
class TtcField:
    x_edges: np.ndarray
    y_edges: np.ndarray
    count: np.ndarray     # samples per cell
    min_ttc: np.ndarray   # inf when every sample in the cell was inf, nan when empty
    mean_ttc: np.ndarray  # mean of finite samples, nan when none

    @property
    def empty(self):
        return self.count == 0

    def rows(self):
        out = []
        for i in range(self.count.shape[0]):
            for j in range(self.count.shape[1]):
                if self.count[i, j] == 0:
                    continue
                xc = 0.5 * (self.x_edges[i] + self.x_edges[i + 1])
                yc = 0.5 * (self.y_edges[j] + self.y_edges[j + 1])
                out.append((i, j, xc, yc, int(self.count[i, j]), self.min_ttc[i, j], self.mean_ttc[i, j]))
        return out

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ix", "iy", "x", "y", "count", "min_ttc", "mean_ttc"])
            for r in self.rows():
                w.writerow([r[0], r[1], repr(float(r[2])), repr(float(r[3])), r[4], _num(r[5]), _num(r[6])])

    def write_svg(self, path, title="TTC over ego position"):
        from .plots import heatmap
        heatmap(path, self.min_ttc, self.x_edges, self.y_edges, title)


def _num(x):
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf"
    return repr(float(x))


def ego_samples(logs):
    """(x, y, ttc) of the ego at every logged step."""
    pts = []
    for lg in logs:
        for r in lg.records:
            ego = next(v for v in r["vehicles"] if v[1] == "ego")
            pts.append((ego[2], ego[3], r["ttc"]))
    return np.array(pts, dtype=np.float64).reshape(-1, 3)


def ttc_field(logs, spec=None):
    spec = spec or GridSpec()
    pts = ego_samples(logs)
    if spec.extent is not None:
        x0, x1, y0, y1 = spec.extent
    elif len(pts):
        x0, x1 = pts[:, 0].min(), pts[:, 0].max()
        y0, y1 = pts[:, 1].min(), pts[:, 1].max()
    else:
        return TtcField(np.zeros(1), np.zeros(1), np.zeros((0, 0), int), np.zeros((0, 0)), np.zeros((0, 0)))
    nx = max(1, int(math.ceil((x1 - x0) / spec.dx + 1e-9)))
    ny = max(1, int(math.ceil((y1 - y0) / spec.dy + 1e-9)))
    if x0 + nx * spec.dx <= x1:
        nx += 1
    if y0 + ny * spec.dy <= y1:
        ny += 1
    x_edges = x0 + spec.dx * np.arange(nx + 1)
    y_edges = y0 + spec.dy * np.arange(ny + 1)
    count = np.zeros((nx, ny), dtype=np.int64)
    mn = np.full((nx, ny), np.nan)
    total = np.zeros((nx, ny))
    nfin = np.zeros((nx, ny), dtype=np.int64)
    ix = np.floor((pts[:, 0] - x0) / spec.dx).astype(np.int64)
    iy = np.floor((pts[:, 1] - y0) / spec.dy).astype(np.int64)
    inside = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
    for i, j, t in zip(ix[inside], iy[inside], pts[inside, 2]):
        count[i, j] += 1
        mn[i, j] = t if math.isnan(mn[i, j]) else min(mn[i, j], t)
        if math.isfinite(t):
            total[i, j] += t
            nfin[i, j] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(nfin > 0, total / np.maximum(nfin, 1), np.nan)
    return TtcField(x_edges, y_edges, count, mn, mean)
