"""Spatial discretization: borders and region partitions.

A Border wraps a multipolygon plus the projection context centred on its
bounding box.  Four partition builders produce RegionSets:

* rectangular grid over the bounding box (cells clipped to the border),
* pointy-top hexagon tiling with a dyadic scale parameter,
* custom cells from user polygons (e.g. administrative districts),
* Voronoi cells of seed points, by per-seed half-plane intersection.

Regions carry 0-based contiguous ids, clipped geometry, centroid, rook
adjacency (shared boundary segment of positive length, corner touches do
not count) and an attribute map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from shapely.geometry import box as _sh_box
from shapely.strtree import STRtree

from . import geojson as gj
from .geometry import (
    Polygon,
    ProjectionContext,
    Shape,
    context_for_bbox,
    convex_hull,
    default_context,
    from_shapely,
    from_shapely_xy,
    project,
    rect_shape,
    shape_area_km2,
    shape_bbox,
    shape_centroid,
    to_shapely,
    to_shapely_xy,
)

#: areas below this are treated as empty (km^2)
EMPTY_AREA_KM2 = 1e-12

#: two boundaries are adjacent when they share more than this length (km)
ADJACENCY_MIN_SHARED_KM = 1e-6

#: half-width of the tolerance band used when matching boundaries (km)
_BOUNDARY_BAND_KM = 1e-7

#: refuse to build hexagon tilings bigger than this
MAX_CELLS = 10 ** 6


# ============================================================
# Border
# ============================================================

@dataclass(frozen=True)
class Border:
    """City outline plus the projection context centred on its bbox."""

    shape: Shape
    ctx: ProjectionContext

    @property
    def area_km2(self) -> float:
        return shape_area_km2(self.shape, self.ctx)

    @property
    def bbox(self):
        return shape_bbox(self.shape)


def border_from_shape(shape: Shape) -> Border:
    """Wrap an existing multipolygon as a Border."""
    if not shape:
        raise ValueError("border geometry is empty")
    ctx = default_context(shape)
    b = Border(shape, ctx)
    if b.area_km2 <= EMPTY_AREA_KM2:
        raise ValueError("border has zero area")
    return b


def border_from_map(path: str) -> Border:
    """Border from the first polygonal feature(s) of a GeoJSON file."""
    feats = gj.read_polygon_features(path)
    if not feats:
        raise ValueError(f"no polygon features in {path}")
    shape: Shape = []
    for s, _props in feats:
        shape.extend(s)
    return border_from_shape(shape)


def border_rectangle(points) -> Border:
    """Axis-aligned bounding box of event locations."""
    pts = list(points)
    if not pts:
        raise ValueError("no points to build a border from")
    lons = [p[0] for p in pts]
    lats = [p[1] for p in pts]
    if min(lons) == max(lons) or min(lats) == max(lats):
        raise ValueError("degenerate (zero-area) bounding rectangle")
    return border_from_shape(rect_shape(min(lons), min(lats), max(lons), max(lats)))


def border_convex(points) -> Border:
    """Convex hull of event locations."""
    hull = convex_hull(points)
    return border_from_shape([Polygon(list(hull))])


# ============================================================
# Regions
# ============================================================

@dataclass
class Region:
    id: int
    shape: Shape
    centroid: tuple
    area_km2: float
    neighbors: list = field(default_factory=list)
    attributes: dict = field(default_factory=dict)


class RegionSet:
    """Indexed partition of a border."""

    def __init__(self, border: Border, regions: list, kind: str):
        self.border = border
        self.regions = regions
        self.kind = kind
        self._tree = None
        self._geoms = None

    def __len__(self):
        return len(self.regions)

    def __repr__(self):
        return f"RegionSet({self.kind!r}, {len(self.regions)} regions)"

    @property
    def ctx(self) -> ProjectionContext:
        return self.border.ctx

    # --- point assignment ------------------------------------
    def _ensure_tree(self):
        if self._tree is None:
            self._geoms = [to_shapely(r.shape) for r in self.regions]
            self._tree = STRtree(self._geoms)

    def assign_region(self, lon: float, lat: float):
        """Region id containing the point, or None.

        Points on a shared boundary go to the smaller id (deterministic
        tie-break); boundary of the border counts as inside.
        """
        self._ensure_tree()
        from shapely.geometry import Point as _ShPoint

        p = _ShPoint(lon, lat)
        cand = sorted(self._tree.query(p))
        for i in cand:
            if self._geoms[i].covers(p):
                return int(i)
        return None


def _keep_clipped(geom, ctx: ProjectionContext):
    """shapely geometry (lon/lat) -> (shape, area_km2) or None if empty."""
    if geom.is_empty:
        return None
    shape = from_shapely(geom)
    if not shape:
        return None
    area = shape_area_km2(shape, ctx)
    if area <= EMPTY_AREA_KM2:
        return None
    return shape, area


def _finalize(border: Border, rows, kind: str) -> RegionSet:
    """rows: [(shape, area, attributes)] in generation order -> RegionSet."""
    regions = []
    for i, (shape, area, attrs) in enumerate(rows):
        c = shape_centroid(shape, border.ctx)
        regions.append(Region(id=i, shape=shape, centroid=c, area_km2=area,
                              neighbors=[], attributes=attrs))
    rs = RegionSet(border, regions, kind)
    compute_adjacency(rs)
    return rs


# ------------------------------------------------------------
# rectangular grid
# ------------------------------------------------------------

def discretize_rect(border: Border, nx: int, ny: int) -> RegionSet:
    """nx-by-ny grid over the border's bbox, clipped; empty cells dropped.

    Kept cells are re-indexed row-major with x fastest; the pre-drop grid
    index is retained as attribute "grid_index".
    """
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be >= 1")
    lon0, lat0, lon1, lat1 = border.bbox
    # shared edge coordinates: cell (i) and (i+1) use the identical float
    xs = [lon0 + (lon1 - lon0) * i / nx for i in range(nx + 1)]
    ys = [lat0 + (lat1 - lat0) * j / ny for j in range(ny + 1)]
    bgeom = to_shapely(border.shape)
    rows = []
    # two-level clipping: border -> column strip -> cell keeps the 100x100
    # case fast even for borders with tens of thousands of vertices
    strip_geoms = []
    pad = (lat1 - lat0) * 1e-9 + 1e-12
    for ix in range(nx):
        strip = _sh_box(xs[ix], lat0 - pad, xs[ix + 1], lat1 + pad)
        strip_geoms.append(bgeom.intersection(strip))
    for iy in range(ny):
        for ix in range(nx):
            cell = _sh_box(xs[ix], ys[iy], xs[ix + 1], ys[iy + 1])
            clipped = strip_geoms[ix].intersection(cell)
            kept = _keep_clipped(clipped, border.ctx)
            if kept is None:
                continue
            shape, area = kept
            rows.append((shape, area, {"grid_index": iy * nx + ix}))
    return _finalize(border, rows, "rect")


# ------------------------------------------------------------
# hexagon tiling
# ------------------------------------------------------------

def discretize_hex(border: Border, r: int) -> RegionSet:
    """Pointy-top hexagon tiling with circumradius Lmax * 2^-r.

    Lmax is the longer bbox side in km; r ranges 1..16 (smaller = coarser).
    Hexagon vertices are generated on an integer lattice scaled by
    (sqrt(3)/2 * rho, rho/2) so neighbouring cells share bitwise-identical
    vertices and the tiling is an exact partition.
    """
    if not (1 <= r <= 16):
        raise ValueError("hex scale must be between 1 and 16")
    ctx = border.ctx
    lon0, lat0, lon1, lat1 = border.bbox
    x0, y0 = project(ctx, lon0, lat0)
    x1, y1 = project(ctx, lon1, lat1)
    lmax = max(x1 - x0, y1 - y0)
    rho = lmax * 2.0 ** (-r)
    sx = math.sqrt(3.0) * rho / 2.0
    sy = rho / 2.0

    # lattice: hexagon at (col, row) has centre (m*sx, n*sy) with
    # m = 2*col + (row & 1), n = 3*row; vertices (m, n+-2), (m+-1, n+-1)
    col_min = int(math.floor((x0 - sx) / (2 * sx))) - 1
    col_max = int(math.ceil((x1 + sx) / (2 * sx))) + 1
    row_min = int(math.floor((y0 - 2 * sy) / (3 * sy))) - 1
    row_max = int(math.ceil((y1 + 2 * sy) / (3 * sy))) + 1
    n_cells = (col_max - col_min + 1) * (row_max - row_min + 1)
    if n_cells > MAX_CELLS:
        raise ValueError(
            f"hex scale {r} would produce about {n_cells} cells (over the "
            f"{MAX_CELLS} guard); choose a smaller r")

    bgeom_xy = to_shapely_xy(border.shape, ctx)
    rows = []
    gi = 0
    from shapely.geometry import Polygon as _ShPolygon

    for row in range(row_min, row_max + 1):
        n = 3 * row
        for col in range(col_min, col_max + 1):
            m = 2 * col + (row & 1)
            verts_mn = [(m, n + 2), (m - 1, n + 1), (m - 1, n - 1),
                        (m, n - 2), (m + 1, n - 1), (m + 1, n + 1)]
            verts = [(mm * sx, nn * sy) for mm, nn in verts_mn]
            gi += 1
            hexagon = _ShPolygon(verts)
            if not hexagon.intersects(bgeom_xy):
                continue
            clipped_xy = bgeom_xy.intersection(hexagon)
            if clipped_xy.is_empty:
                continue
            shape = from_shapely_xy(clipped_xy, ctx)
            if not shape:
                continue
            area = shape_area_km2(shape, ctx)
            if area <= EMPTY_AREA_KM2:
                continue
            rows.append((shape, area, {"grid_index": gi - 1}))
    return _finalize(border, rows, "hex")


# ------------------------------------------------------------
# custom cells
# ------------------------------------------------------------

def discretize_custom(border: Border, cells, attributes=None) -> RegionSet:
    """Partition from user polygons, clipped to the border.

    ``cells``: list of Shapes; ``attributes``: optional per-cell dicts.
    Input cells overlapping by more than 1e-6 of the smaller area are
    rejected.  Zero-area (after clipping) cells are dropped; the rest keep
    input order.
    """
    cells = list(cells)
    if attributes is None:
        attributes = [{} for _ in cells]
    if len(attributes) != len(cells):
        raise ValueError("attributes list must match cells")
    ctx = border.ctx
    geoms = [to_shapely(c) for c in cells]
    areas = [shape_area_km2(c, ctx) for c in cells]
    tree = STRtree(geoms)
    for i in range(len(cells)):
        for j in sorted(tree.query(geoms[i])):
            if j <= i:
                continue
            inter = geoms[i].intersection(geoms[int(j)])
            if inter.is_empty:
                continue
            kept = _keep_clipped(inter, ctx)
            if kept is None:
                continue
            if kept[1] > 1e-6 * min(areas[i], areas[int(j)]):
                raise ValueError(f"input cells {i} and {int(j)} overlap")
    bgeom = to_shapely(border.shape)
    rows = []
    for i, g in enumerate(geoms):
        kept = _keep_clipped(bgeom.intersection(g), ctx)
        if kept is None:
            continue
        shape, area = kept
        attrs = dict(attributes[i])
        attrs.setdefault("source_index", i)
        rows.append((shape, area, attrs))
    return _finalize(border, rows, "custom")


def discretize_custom_file(border: Border, path: str) -> RegionSet:
    """Custom partition from a GeoJSON FeatureCollection."""
    feats = gj.read_polygon_features(path)
    if not feats:
        raise ValueError(f"no polygon features in {path}")
    cells = [s for s, _ in feats]
    attrs = [p for _, p in feats]
    return discretize_custom(border, cells, attrs)


# ------------------------------------------------------------
# Voronoi cells
# ------------------------------------------------------------

def _halfplane_clip(poly_xy, a, b, c):
    """Sutherland-Hodgman clip of a convex polygon by a*x + b*y <= c."""
    out = []
    n = len(poly_xy)
    for i in range(n):
        px, py = poly_xy[i]
        qx, qy = poly_xy[(i + 1) % n]
        pin = a * px + b * py <= c
        qin = a * qx + b * qy <= c
        if pin:
            out.append((px, py))
        if pin != qin:
            denom = a * (qx - px) + b * (qy - py)
            t = (c - a * px - b * py) / denom
            out.append((px + t * (qx - px), py + t * (qy - py)))
    return out


def discretize_voronoi(border: Border, seeds, attributes=None) -> RegionSet:
    """Voronoi partition of the border induced by seed points.

    Each cell is built as the intersection of the perpendicular-bisector
    half-planes against every other seed (in the projected plane), clipped
    to the border.  Seeds whose cell misses the border are dropped.
    """
    seeds = [(float(lon), float(lat)) for lon, lat in seeds]
    if not seeds:
        raise ValueError("no seeds given")
    for i in range(len(seeds)):
        for j in range(i + 1, len(seeds)):
            if (abs(seeds[i][0] - seeds[j][0]) <= 1e-9
                    and abs(seeds[i][1] - seeds[j][1]) <= 1e-9):
                raise ValueError(f"duplicate seeds {i} and {j}")
    if attributes is None:
        attributes = [{} for _ in seeds]
    ctx = border.ctx
    lon0, lat0, lon1, lat1 = border.bbox
    x0, y0 = project(ctx, lon0, lat0)
    x1, y1 = project(ctx, lon1, lat1)
    margin = 2.0 * (abs(x1 - x0) + abs(y1 - y0)) + 1.0
    start = [(x0 - margin, y0 - margin), (x1 + margin, y0 - margin),
             (x1 + margin, y1 + margin), (x0 - margin, y1 + margin)]
    seeds_xy = [project(ctx, lon, lat) for lon, lat in seeds]
    bgeom_xy = to_shapely_xy(border.shape, ctx)

    from shapely.geometry import Polygon as _ShPolygon

    rows = []
    for i, (sx, sy) in enumerate(seeds_xy):
        poly = list(start)
        for j, (tx, ty) in enumerate(seeds_xy):
            if j == i:
                continue
            # keep points with |p - s_i|^2 <= |p - s_j|^2:
            # 2(t-s).p <= |t|^2 - |s|^2
            a = 2.0 * (tx - sx)
            b = 2.0 * (ty - sy)
            c = tx * tx + ty * ty - sx * sx - sy * sy
            poly = _halfplane_clip(poly, a, b, c)
            if len(poly) < 3:
                poly = []
                break
        if not poly:
            continue
        cell_xy = _ShPolygon(poly)
        clipped = bgeom_xy.intersection(cell_xy)
        if clipped.is_empty:
            continue
        shape = from_shapely_xy(clipped, ctx)
        if not shape:
            continue
        area = shape_area_km2(shape, ctx)
        if area <= EMPTY_AREA_KM2:
            continue
        attrs = dict(attributes[i])
        attrs.setdefault("seed_index", i)
        attrs.setdefault("seed_lon", seeds[i][0])
        attrs.setdefault("seed_lat", seeds[i][1])
        rows.append((shape, area, attrs))
    return _finalize(border, rows, "voronoi")


def discretize_voronoi_file(border: Border, path: str) -> RegionSet:
    """Voronoi partition from a GeoJSON FeatureCollection of Points."""
    feats = gj.read_point_features(path)
    if not feats:
        raise ValueError(f"no point features in {path}")
    seeds = [pt for pt, _ in feats]
    attrs = [p for _, p in feats]
    return discretize_voronoi(border, seeds, attrs)


# ------------------------------------------------------------
# adjacency
# ------------------------------------------------------------

def compute_adjacency(rs: RegionSet) -> RegionSet:
    """Rook adjacency: boundaries sharing > 1e-6 km of length.

    Measured in the projected plane.  Each boundary is dilated by a 1e-7 km
    band before intersecting the other boundary, which tolerates the last-bit
    coordinate noise of independently clipped cells while still rejecting
    corner touches (a corner contributes only ~1e-7 km of overlap).
    """
    ctx = rs.ctx
    bounds = [to_shapely_xy(r.shape, ctx).boundary for r in rs.regions]
    bands = [g.buffer(_BOUNDARY_BAND_KM) for g in bounds]
    tree = STRtree(bounds)
    nbrs: list[set] = [set() for _ in rs.regions]
    for i, band in enumerate(bands):
        for j in sorted(tree.query(band)):
            j = int(j)
            if j <= i:
                continue
            shared = band.intersection(bounds[j]).length
            if shared > ADJACENCY_MIN_SHARED_KM:
                nbrs[i].add(j)
                nbrs[j].add(i)
    for r, ns in zip(rs.regions, nbrs):
        r.neighbors = sorted(ns)
    return rs


# ------------------------------------------------------------
# serialization
# ------------------------------------------------------------

def region_set_to_geojson(rs: RegionSet, path: str) -> None:
    """One Feature per region with id, neighbors, area and attributes."""
    feats = []
    for r in rs.regions:
        props = {
            "id": r.id,
            "neighbors": list(r.neighbors),
            "area_km2": r.area_km2,
            "centroid_lon": r.centroid[0],
            "centroid_lat": r.centroid[1],
        }
        props.update(r.attributes)
        feats.append((r.shape, props))
    gj.write_polygon_features(path, feats)
