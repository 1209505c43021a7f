"""Deterministic SVG figures (no timestamps, fixed hash salt)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "elcgen"
_META = {"Date": None, "Creator": None}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def heatmap(path, values, x_edges, y_edges, title, label="min TTC [s]"):
    fig, ax = plt.subplots(figsize=(7, 3))
    data = np.ma.masked_invalid(values.T)
    mesh = ax.pcolormesh(x_edges, y_edges, data, cmap="viridis_r", shading="flat")
    fig.colorbar(mesh, ax=ax, label=label)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(title)
    _save(fig, path)


def histograms(path, edges, hists, labels, title):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    centers = 0.5 * (edges[1:] + edges[:-1])
    width = edges[1] - edges[0] if len(edges) > 1 else 1.0
    for h, lab in zip(hists, labels):
        ax.step(centers, h, where="mid", label=lab)
    ax.set_title(title)
    ax.set_ylabel("probability")
    ax.legend()
    ax.set_xlim(edges[0] - 0.5 * width, edges[-1] + 0.5 * width)
    _save(fig, path)


def curves(path, series, xlabel, ylabel, title):
    """``series``: {label: (x, y)}."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for lab, (x, y) in series.items():
        ax.plot(x, y, label=lab)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    if series:
        ax.legend()
    _save(fig, path)


def bars(path, labels, values, errors=None, ylabel="", title=""):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    x = np.arange(len(labels))
    if errors is not None:
        ax.bar(x, values, yerr=np.asarray(errors).T, capsize=4)
    else:
        ax.bar(x, values)
    ax.set_xticks(x, labels)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    _save(fig, path)
