"""Figure rendering for the CLI's --plot flag.

Kept out of the library core so importing the package never drags in a
matplotlib backend; the CLI imports this module lazily.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.collections import PolyCollection  # noqa: E402


def plot_regions(region_set, path: str, points=None) -> None:
    """Render a discretization as a colored polygon map (PNG).

    ``points`` is an optional iterable of (lon, lat) event locations drawn
    on top of the cells.
    """
    verts, ids = [], []
    for reg in region_set.regions:
        for poly in reg.shape:
            verts.append([(x, y) for x, y in poly.outer])
            ids.append(reg.id)
    fig, ax = plt.subplots(figsize=(8, 8))
    coll = PolyCollection(verts, array=ids, cmap="viridis",
                          edgecolors="black", linewidths=0.3, alpha=0.85)
    ax.add_collection(coll)
    for poly in region_set.border.shape:
        xs = [p[0] for p in poly.outer] + [poly.outer[0][0]]
        ys = [p[1] for p in poly.outer] + [poly.outer[0][1]]
        ax.plot(xs, ys, color="black", linewidth=1.0)
    if points:
        ax.scatter([p[0] for p in points], [p[1] for p in points],
                   s=4, color="crimson", zorder=3, label="events")
        ax.legend(loc="upper right")
    lon0, lat0, lon1, lat1 = region_set.border.bbox
    ax.set_xlim(lon0, lon1)
    ax.set_ylim(lat0, lat1)
    mid = math.radians((lat0 + lat1) / 2.0)
    ax.set_aspect(1.0 / max(math.cos(mid), 1e-6))
    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    ax.set_title(f"{region_set.kind} discretization, {len(region_set)} regions")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def plot_convergence(trace, path: str) -> None:
    """Objective value per accepted iteration (PNG)."""
    ks = [rec.k for rec in trace]
    fs = [rec.f for rec in trace]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(ks, fs, marker="o", markersize=3)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.set_title("projected-gradient convergence")
    ax.grid(True, alpha=0.3)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def plot_cv_losses(weights, losses, best, path: str) -> None:
    """Mean validation loss per candidate weight (PNG)."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(weights, losses, marker="o")
    ax.axvline(best, color="crimson", linestyle="--",
               label=f"selected {best:g}")
    if min(weights) > 0:
        ax.set_xscale("log")
    ax.set_xlabel("smoothing weight")
    ax.set_ylabel("mean validation loss")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
