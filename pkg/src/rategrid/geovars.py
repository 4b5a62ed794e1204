"""Cross-discretization area algebra.

Given two partitions of the same border, compute the matrix of pairwise
intersection areas, redistribute region totals (population-style counts)
from one partition onto the other under a uniform-density assumption, and
sum areas by land-use class.
"""

from __future__ import annotations

import numpy as np
from shapely.strtree import STRtree

from .geometry import to_shapely_xy
from .spatial import RegionSet


def intersection_matrix(d1: RegionSet, d2: RegionSet) -> np.ndarray:
    """(len(d1), len(d2)) array of pairwise intersection areas in km2.

    Areas are measured in the projected plane of d1's border (both region
    sets are expected to share it).
    """
    ctx = d1.ctx
    g1 = [to_shapely_xy(r.shape, ctx) for r in d1.regions]
    g2 = [to_shapely_xy(r.shape, ctx) for r in d2.regions]
    out = np.zeros((len(g1), len(g2)))
    tree = STRtree(g2)
    for i, gi in enumerate(g1):
        for j in sorted(tree.query(gi)):
            j = int(j)
            inter = gi.intersection(g2[j])
            if not inter.is_empty:
                out[i, j] = inter.area
    return out


def disaggregate_feature(d1: RegionSet, d2: RegionSet, totals,
                         name: str | None = None,
                         source_areas=None) -> np.ndarray:
    """Redistribute per-d2-region totals onto d1 by intersection area.

    value_i = sum_j totals_j * A(i,j) / A(j), i.e. each d2 region's total is
    spread uniformly over the region and re-collected over d1.  A(j) defaults
    to the d2 region areas as stored (clipped to the border at construction);
    pass ``source_areas`` to use the regions' original unclipped areas
    instead, in which case any mass falling outside the border is lost.

    When ``name`` is given the result is stored on each d1 region as
    attribute ``name``.
    """
    totals = np.asarray(totals, dtype=float)
    if totals.shape != (len(d2.regions),):
        raise ValueError("totals must have one entry per d2 region")
    if np.any(totals < 0):
        raise ValueError("totals must be non-negative")
    if source_areas is None:
        areas = np.array([r.area_km2 for r in d2.regions])
    else:
        areas = np.asarray(source_areas, dtype=float)
        if areas.shape != totals.shape:
            raise ValueError("source_areas must have one entry per d2 region")
    bad = (areas <= 0) & (totals > 0)
    if np.any(bad):
        j = int(np.nonzero(bad)[0][0])
        raise ValueError(f"d2 region {j} has zero area but a positive total")
    density = np.zeros_like(totals)
    pos = areas > 0
    density[pos] = totals[pos] / areas[pos]
    inter = intersection_matrix(d1, d2)
    values = inter @ density
    if name is not None:
        for r, v in zip(d1.regions, values):
            r.attributes[name] = float(v)
    return values


def area_by_class(d1: RegionSet, d2: RegionSet, class_of,
                  prefix: str | None = "area_km2_") -> dict:
    """Per-d1-region area of each d2 class, in km2.

    ``class_of`` maps a d2 region to its class label (callable, or a
    sequence indexed by region id).  Returns {label: array over d1 regions};
    when ``prefix`` is given each class is also stored on the d1 regions as
    attribute ``prefix + str(label)``.
    """
    if callable(class_of):
        labels = [class_of(r) for r in d2.regions]
    else:
        labels = [class_of[r.id] for r in d2.regions]
    inter = intersection_matrix(d1, d2)
    out: dict = {}
    for label in sorted(set(labels), key=str):
        cols = [j for j, lab in enumerate(labels) if lab == label]
        out[label] = inter[:, cols].sum(axis=1)
    if prefix is not None:
        for label, vals in out.items():
            key = f"{prefix}{label}"
            for r, v in zip(d1.regions, vals):
                r.attributes[key] = float(v)
    return out
