#!/usr/bin/env python3
"""Generate the bundled Rio-like demo datasets.

Produces three GeoJSON files under src/rategrid/data/:

* rio_border.geojson    -- city outline (multipolygon, ~1200 km2)
* rio_districts.geojson -- 160 district polygons with a population attribute
* rio_bases.geojson     -- 34 station locations (points)

The border is a union of cells of a 300x300 subgrid of the bounding box,
drawn from a hand-sketched silhouette and then repaired until it hits the
documented statistics exactly:

* 76 of the 10x10 grid blocks intersect it,
* 4916 of the 100x100 grid cells intersect it,
* area 1200 km2 (within half a subcell),
* it touches all four sides of the bounding box.

The bbox spans are chosen so that the 300-, 100- and 10-level grid edges
coincide bitwise where they overlap (see `edge_lon`); grid cells that share
no subcell with the border then intersect it with exactly zero area, making
the counts above stable under re-discretization.

Deterministic: rerunning reproduces the checked-in files.
"""

from __future__ import annotations

import math
import os
import sys

import numpy as np
import shapely
from shapely.geometry import box as sh_box
from shapely.ops import unary_union

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from rategrid import geometry, geojson, spatial  # noqa: E402

OUT_DIR = os.path.join(os.path.dirname(__file__), os.pardir,
                       "src", "rategrid", "data")

L0 = -43.795
B0 = -23.083
# spans within 2e-15 of (0.696, 0.337), picked so that
#   (L0 + W) - L0 == W,  (W*k)/10 == (W*10k)/100  for all k, etc.
W = 0.695999999999998
H = 0.33699999999999974
NSUB = 300

N_BLOCKS = 76
N_CELLS = 4916
AREA_KM2 = 1200.0
N_DISTRICTS = 160
N_BASES = 34

rng = np.random.default_rng(20260818)


def _check_spans():
    for lo, span in ((L0, W), (B0, H)):
        assert (lo + span) - lo == span
        for n in (10, 100, 300):
            assert (span * n) / n == span
        for k in range(11):
            assert lo + (span * (10 * k)) / 100 == lo + (span * k) / 10


def edge_lon(i: int) -> float:
    if i % 30 == 0:
        return L0 + (W * (i // 30)) / 10
    if i % 3 == 0:
        return L0 + (W * (i // 3)) / 100
    return L0 + (W * i) / NSUB


def edge_lat(j: int) -> float:
    if j % 30 == 0:
        return B0 + (H * (j // 30)) / 10
    if j % 3 == 0:
        return B0 + (H * (j // 3)) / 100
    return B0 + (H * j) / NSUB


# ------------------------------------------------------------------
# silhouette (normalized [0,1]^2 coordinates, v=0 at the south)
# ------------------------------------------------------------------

MAINLAND = [
    (0.00, 0.25), (0.06, 0.18), (0.15, 0.16), (0.22, 0.10), (0.30, 0.00),
    (0.42, 0.00), (0.50, 0.08), (0.56, 0.05), (0.63, 0.12), (0.70, 0.08),
    (0.78, 0.14), (0.86, 0.10), (0.93, 0.18), (1.00, 0.50), (1.00, 0.68),
    (0.93, 0.75), (0.88, 0.82), (0.82, 0.93), (0.76, 1.00), (0.64, 1.00),
    (0.55, 0.92), (0.48, 0.80), (0.40, 0.72), (0.30, 0.62), (0.20, 0.55),
    (0.10, 0.50), (0.00, 0.45),
]
ISLANDS = [
    [(0.08, 0.05), (0.17, 0.03), (0.20, 0.09), (0.13, 0.13), (0.07, 0.10)],
    [(0.93, 0.28), (0.97, 0.26), (0.98, 0.33), (0.94, 0.35)],
]


def rasterize() -> np.ndarray:
    polys = [shapely.Polygon(MAINLAND)] + [shapely.Polygon(p) for p in ISLANDS]
    silhouette = unary_union(polys)
    ii, jj = np.meshgrid(np.arange(NSUB), np.arange(NSUB), indexing="ij")
    u = (ii + 0.5) / NSUB
    v = (jj + 0.5) / NSUB
    return shapely.contains_xy(silhouette, u, v)


# ------------------------------------------------------------------
# grid statistics and repair
# ------------------------------------------------------------------

def cell_counts(sel: np.ndarray) -> np.ndarray:
    """per 100-cell selected-subcell count, shape (100, 100)."""
    return sel.reshape(100, 3, 100, 3).sum(axis=(1, 3))


def block_counts(occ100: np.ndarray) -> np.ndarray:
    """per 10-block occupied-cell count, shape (10, 10)."""
    return occ100.reshape(10, 10, 10, 10).sum(axis=(1, 3))


def pick_pins(sel: np.ndarray) -> set:
    """One selected subcell per bbox side, kept untouched by the repair."""
    pins = set()
    for line, is_col, idx in ((sel[0, :], True, 0), (sel[-1, :], True, NSUB - 1),
                              (sel[:, 0], False, 0), (sel[:, -1], False, NSUB - 1)):
        hit = np.flatnonzero(line)
        assert hit.size, "silhouette must touch every bbox side"
        k = int(hit[hit.size // 2])
        pins.add((idx, k) if is_col else (k, idx))
    return pins


def _cell_of(pin):
    return (pin[0] // 3, pin[1] // 3)


def repair_blocks(sel, pins):
    pinned_blocks = {(i // 30, j // 30) for i, j in pins}
    while True:
        occ100 = cell_counts(sel) > 0
        occ10 = block_counts(occ100) > 0
        nb = int(occ10.sum())
        if nb == N_BLOCKS:
            return
        if nb > N_BLOCKS:
            bc = block_counts(occ100)
            order = sorted((int(bc[bi, bj]), bi, bj)
                           for bi, bj in zip(*np.nonzero(occ10)))
            for _cnt, bi, bj in order:
                if (bi, bj) in pinned_blocks:
                    continue
                sel[30 * bi:30 * bi + 30, 30 * bj:30 * bj + 30] = False
                break
            else:
                raise RuntimeError("no removable block")
        else:
            padded = np.pad(occ10, 1)
            nbr = (padded[:-2, 1:-1] | padded[2:, 1:-1]
                   | padded[1:-1, :-2] | padded[1:-1, 2:])
            cand = sorted((bi, bj) for bi, bj in zip(*np.nonzero(~occ10 & nbr)))
            if not cand:
                raise RuntimeError("no attachable block")
            bi, bj = cand[0]
            ci, cj = 10 * bi + 4, 10 * bj + 4
            sel[3 * ci:3 * ci + 3, 3 * cj:3 * cj + 3] = True


def repair_cells(sel, pins):
    pinned_cells = {_cell_of(p) for p in pins}
    while True:
        cnt = cell_counts(sel)
        occ100 = cnt > 0
        n = int(occ100.sum())
        if n == N_CELLS:
            return
        bc = block_counts(occ100).astype(int)
        padded = np.pad(occ100, 1)
        nnb = (padded[:-2, 1:-1].astype(int) + padded[2:, 1:-1]
               + padded[1:-1, :-2] + padded[1:-1, 2:])
        if n > N_CELLS:
            # erode: boundary cells first (few occupied neighbors, few
            # subcells), never emptying a block or touching a pin
            cand = sorted((int(nnb[I, J]), int(cnt[I, J]), I, J)
                          for I, J in zip(*np.nonzero(occ100)))
            removed = 0
            for _nb, _ct, I, J in cand:
                if removed >= n - N_CELLS:
                    break
                if (I, J) in pinned_cells:
                    continue
                b = (I // 10, J // 10)
                if bc[b] <= 1:
                    continue
                sel[3 * I:3 * I + 3, 3 * J:3 * J + 3] = False
                bc[b] -= 1
                removed += 1
        else:
            # dilate into occupied blocks, filling the most surrounded
            # empty cells first
            occ_block_cell = np.repeat(np.repeat(bc > 0, 10, 0), 10, 1)
            cand = sorted((-int(nnb[I, J]), I, J)
                          for I, J in zip(*np.nonzero(~occ100 & occ_block_cell
                                                      & (nnb > 0))))
            added = 0
            for _negnb, I, J in cand:
                if added >= N_CELLS - n:
                    break
                sel[3 * I:3 * I + 3, 3 * J:3 * J + 3] = True
                added += 1
            if not added:
                raise RuntimeError("no attachable cell")


def repair_area(sel, pins, s_target: int):
    cnt = cell_counts(sel)
    assert int((cnt > 0).sum()) == N_CELLS
    s = int(sel.sum())
    if s < s_target:
        # fill partial cells, fullest first, scanning their empty subcells
        order = sorted((-int(cnt[I, J]), I, J)
                       for I, J in zip(*np.nonzero((cnt > 0) & (cnt < 9))))
        need = s_target - s
        for _negct, I, J in order:
            if need == 0:
                break
            block = sel[3 * I:3 * I + 3, 3 * J:3 * J + 3]
            for a in range(3):
                for b in range(3):
                    if need and not block[a, b]:
                        block[a, b] = True
                        need -= 1
        assert need == 0, "not enough partial-cell capacity"
    elif s > s_target:
        order = sorted((int(cnt[I, J]), I, J)
                       for I, J in zip(*np.nonzero(cnt > 1)))
        need = s - s_target
        for _ct, I, J in order:
            if need == 0:
                break
            block = sel[3 * I:3 * I + 3, 3 * J:3 * J + 3]
            for a in range(3):
                for b in range(3):
                    if (need and block[a, b] and int(block.sum()) > 1
                            and (3 * I + a, 3 * J + b) not in pins):
                        block[a, b] = False
                        need -= 1
        assert need == 0


# ------------------------------------------------------------------
# geometry construction
# ------------------------------------------------------------------

def union_border(sel: np.ndarray):
    rects = []
    for i in range(NSUB):
        col = sel[i]
        j = 0
        while j < NSUB:
            if col[j]:
                j0 = j
                while j < NSUB and col[j]:
                    j += 1
                rects.append(sh_box(edge_lon(i), edge_lat(j0),
                                    edge_lon(i + 1), edge_lat(j)))
            else:
                j += 1
    geom = unary_union(rects)
    return spatial.border_from_shape(geometry.from_shapely(geom))


def measured_subcell_area(ctx) -> float:
    poly = geometry.Polygon([(edge_lon(150), edge_lat(150)),
                             (edge_lon(151), edge_lat(150)),
                             (edge_lon(151), edge_lat(151)),
                             (edge_lon(150), edge_lat(151))])
    return geometry.shape_area_km2([poly], ctx)


def farthest_point_sample(points_xy: np.ndarray, k: int, start: int) -> list:
    """Greedy max-min sampling; returns row indices into points_xy."""
    chosen = [start]
    d = np.linalg.norm(points_xy - points_xy[start], axis=1)
    for _ in range(k - 1):
        nxt = int(np.argmax(d))
        chosen.append(nxt)
        d = np.minimum(d, np.linalg.norm(points_xy - points_xy[nxt], axis=1))
    return chosen


def interior_cell_centers(sel: np.ndarray):
    """(lon, lat) centers of cells whose central subcell is selected."""
    out = []
    for I, J in zip(*np.nonzero(sel[1::3, 1::3])):
        i, j = 3 * int(I) + 1, 3 * int(J) + 1
        out.append(((edge_lon(i) + edge_lon(i + 1)) / 2.0,
                    (edge_lat(j) + edge_lat(j + 1)) / 2.0))
    return out


def main() -> None:
    _check_spans()
    os.makedirs(OUT_DIR, exist_ok=True)

    sel = rasterize()
    pins = pick_pins(sel)
    print(f"rasterized: {int(sel.sum())} subcells, "
          f"{int((cell_counts(sel) > 0).sum())} cells, "
          f"{int((block_counts(cell_counts(sel) > 0) > 0).sum())} blocks")

    repair_blocks(sel, pins)
    repair_cells(sel, pins)
    # the repairs above may interact; iterate to a joint fixed point
    for _ in range(10):
        occ = cell_counts(sel) > 0
        if (int((block_counts(occ) > 0).sum()) == N_BLOCKS
                and int(occ.sum()) == N_CELLS):
            break
        repair_blocks(sel, pins)
        repair_cells(sel, pins)
    else:
        raise RuntimeError("block/cell repair did not converge")

    ctx = geometry.context_for_bbox(edge_lon(0), edge_lat(0),
                                    edge_lon(NSUB), edge_lat(NSUB))
    a_sub = measured_subcell_area(ctx)
    s_target = round(AREA_KM2 / a_sub)
    repair_area(sel, pins, s_target)
    for line in (sel[0, :], sel[-1, :], sel[:, 0], sel[:, -1]):
        assert line.any()

    border = union_border(sel)
    assert border.bbox == (edge_lon(0), edge_lat(0),
                           edge_lon(NSUB), edge_lat(NSUB))
    area = border.area_km2
    print(f"border: {int(sel.sum())} subcells, area {area:.3f} km2")
    assert abs(area - AREA_KM2) < 1.0

    rs10 = spatial.discretize_rect(border, 10, 10)
    rs100 = spatial.discretize_rect(border, 100, 100)
    print(f"grid checks: 10x10 -> {len(rs10)}, 100x100 -> {len(rs100)}")
    assert len(rs10) == N_BLOCKS and len(rs100) == N_CELLS

    geojson.write_polygon_features(
        os.path.join(OUT_DIR, "rio_border.geojson"),
        [(border.shape, {"name": "rio-demo-border"})])

    centers = interior_cell_centers(sel)
    xy = np.array([( (c[0] - L0) * math.cos(math.radians(B0 + H / 2)),
                     c[1] - B0) for c in centers])
    mid = np.array([xy[:, 0].mean(), xy[:, 1].mean()])
    start = int(np.argmin(np.linalg.norm(xy - mid, axis=1)))

    district_idx = farthest_point_sample(xy, N_DISTRICTS, start)
    seeds = [centers[i] for i in district_idx]
    rs_d = spatial.discretize_voronoi(border, seeds)
    assert len(rs_d) == N_DISTRICTS
    densities = rng.uniform(1200.0, 16000.0, size=N_DISTRICTS)
    feats = []
    for reg, dens in zip(rs_d.regions, densities):
        feats.append((reg.shape,
                      {"id": reg.id,
                       "population": int(round(reg.area_km2 * dens))}))
    geojson.write_polygon_features(
        os.path.join(OUT_DIR, "rio_districts.geojson"), feats)
    print(f"districts: {len(feats)} polygons, "
          f"population {sum(p['population'] for _s, p in feats):,}")

    base_idx = farthest_point_sample(xy, N_BASES, start)
    bases = [centers[i] for i in base_idx]
    rs_b = spatial.discretize_voronoi(border, bases)
    assert len(rs_b) == N_BASES
    geojson.write_point_features(
        os.path.join(OUT_DIR, "rio_bases.geojson"),
        [(pt, {"id": k}) for k, pt in enumerate(bases)])
    print(f"bases: {len(bases)} points")


if __name__ == "__main__":
    main()
