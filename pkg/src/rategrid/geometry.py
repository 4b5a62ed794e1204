"""Planar geometry over geographic coordinates.

Coordinates are (lon, lat) in degrees, WGS84-ish sphere.  All metric
computations (areas, distances, clipping) happen in a local equirectangular
projection: kilometres east/north of a reference point, with the east scale
frozen at the reference latitude.  At city scale the distortion of this
projection is far below the tolerances used anywhere in the package.

Polygon boolean operations are delegated to shapely (GEOS); areas, centroids,
hulls and the projection itself are computed here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import (
    MultiPolygon as _ShMultiPolygon,
    Point as _ShPoint,
    Polygon as _ShPolygon,
)
from shapely.ops import unary_union

# ============================================================
# Constants
# ============================================================

#: Mean Earth radius (IUGG), km — used by great-circle distances.
EARTH_RADIUS_KM = 6371.0088

#: km per degree of latitude (and of longitude at the equator), used by the
#: local projection.  Frozen literal so projected areas are bit-reproducible;
#: differs from EARTH_RADIUS_KM*pi/180 in the 7th significant digit.
KM_PER_DEG = 111.19493


# ============================================================
# Projection
# ============================================================

@dataclass(frozen=True)
class ProjectionContext:
    """Reference point of the local equirectangular projection."""

    lon0: float
    lat0: float

    @property
    def kx(self) -> float:
        """km per degree of longitude at the reference latitude."""
        return KM_PER_DEG * math.cos(math.radians(self.lat0))

    @property
    def ky(self) -> float:
        """km per degree of latitude."""
        return KM_PER_DEG


def context_for_bbox(lon_min: float, lat_min: float, lon_max: float, lat_max: float) -> ProjectionContext:
    """Projection context centred on a bounding box."""
    return ProjectionContext(0.5 * (lon_min + lon_max), 0.5 * (lat_min + lat_max))


def project(ctx: ProjectionContext, lon: float, lat: float) -> tuple[float, float]:
    """(lon, lat) degrees -> (x, y) km east/north of the reference point."""
    return ((lon - ctx.lon0) * ctx.kx, (lat - ctx.lat0) * ctx.ky)


def unproject(ctx: ProjectionContext, x: float, y: float) -> tuple[float, float]:
    """Inverse of :func:`project`."""
    return (ctx.lon0 + x / ctx.kx, ctx.lat0 + y / ctx.ky)


def haversine_km(lon1: float, lat1: float, lon2: float, lat2: float) -> float:
    """Great-circle distance in km on the mean-radius sphere."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


# ============================================================
# Polygons
# ============================================================

Point = tuple[float, float]
Ring = list  # list[Point]


@dataclass
class Polygon:
    """Simple polygon with optional holes, coordinates in (lon, lat) degrees.

    Rings need not be closed (first point repeated) and may have either
    orientation; functions here normalise as needed.
    """

    outer: list
    holes: list = field(default_factory=list)


#: A shape is a list of Polygons (a multipolygon).
Shape = list


def _open_ring(ring) -> list:
    """Drop a repeated last point if the ring is explicitly closed."""
    if len(ring) > 1 and ring[0] == ring[-1]:
        return list(ring[:-1])
    return list(ring)


def shape_bbox(shape: Shape) -> tuple[float, float, float, float]:
    """(lon_min, lat_min, lon_max, lat_max) over all outer rings."""
    lons: list[float] = []
    lats: list[float] = []
    for poly in shape:
        for lon, lat in poly.outer:
            lons.append(lon)
            lats.append(lat)
    if not lons:
        raise ValueError("empty shape has no bounding box")
    return (min(lons), min(lats), max(lons), max(lats))


def default_context(shape: Shape) -> ProjectionContext:
    """Bbox-centred projection context of a shape."""
    return context_for_bbox(*shape_bbox(shape))


# ------------------------------------------------------------
# Shoelace area / centroid (own implementation)
# ------------------------------------------------------------

def ring_area_signed(xy) -> float:
    """Signed shoelace area of a ring given in planar coordinates.

    Positive for counter-clockwise orientation.  Uses fsum to keep the
    cancellation error of large-coordinate rings below 1e-12 relative.
    """
    pts = _open_ring(xy)
    n = len(pts)
    if n < 3:
        return 0.0
    terms = []
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        terms.append(x1 * y2 - x2 * y1)
    return 0.5 * math.fsum(terms)


def _project_ring(ctx: ProjectionContext, ring) -> list:
    return [project(ctx, lon, lat) for lon, lat in ring]


def polygon_area_km2(poly: Polygon, ctx: ProjectionContext | None = None) -> float:
    """Area in km2: |outer| minus the sum of |hole| areas."""
    for ring in [poly.outer] + list(poly.holes):
        if len(set(map(tuple, _open_ring(ring)))) < 3:
            raise ValueError("degenerate ring: fewer than 3 distinct vertices")
    if ctx is None:
        ctx = default_context([poly])
    area = abs(ring_area_signed(_project_ring(ctx, poly.outer)))
    for hole in poly.holes:
        area -= abs(ring_area_signed(_project_ring(ctx, hole)))
    return area


def shape_area_km2(shape: Shape, ctx: ProjectionContext | None = None) -> float:
    """Total area of a multipolygon in km2."""
    if not shape:
        return 0.0
    if ctx is None:
        ctx = default_context(shape)
    return math.fsum(polygon_area_km2(p, ctx) for p in shape)


def _ring_centroid_terms(xy) -> tuple[float, float, float]:
    """(signed area, Cx*A, Cy*A) of one planar ring."""
    pts = _open_ring(xy)
    n = len(pts)
    if n < 3:
        return 0.0, 0.0, 0.0
    a_terms, cx_terms, cy_terms = [], [], []
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        cross = x1 * y2 - x2 * y1
        a_terms.append(cross)
        cx_terms.append((x1 + x2) * cross)
        cy_terms.append((y1 + y2) * cross)
    a = 0.5 * math.fsum(a_terms)
    return a, math.fsum(cx_terms) / 6.0, math.fsum(cy_terms) / 6.0


def shape_centroid(shape: Shape, ctx: ProjectionContext | None = None) -> Point:
    """Area-weighted centroid of a multipolygon, returned in (lon, lat).

    Holes subtract.  The computation runs in the shape's own bbox-centred
    projection; because the projection is affine, the result does not depend
    on that choice.
    """
    if ctx is None:
        ctx = default_context(shape)
    # Signed orientation per ring: outers count positive, holes negative,
    # regardless of the stored winding.
    a_total, cx_total, cy_total = [], [], []
    for poly in shape:
        a, cx, cy = _ring_centroid_terms(_project_ring(ctx, poly.outer))
        s = 1.0 if a >= 0 else -1.0
        a_total.append(s * a)
        cx_total.append(s * cx)
        cy_total.append(s * cy)
        for hole in poly.holes:
            a, cx, cy = _ring_centroid_terms(_project_ring(ctx, hole))
            s = 1.0 if a >= 0 else -1.0
            a_total.append(-s * a)
            cx_total.append(-s * cx)
            cy_total.append(-s * cy)
    area = math.fsum(a_total)
    if area <= 0.0:
        raise ValueError("centroid of a zero-area shape is undefined")
    x = math.fsum(cx_total) / area
    y = math.fsum(cy_total) / area
    return unproject(ctx, x, y)


# ------------------------------------------------------------
# Convex hull (monotone chain)
# ------------------------------------------------------------

def convex_hull(points) -> list:
    """Convex hull of 2-D points via the monotone chain, CCW order.

    Returned vertices are a subset of the input points (no new coordinates
    are invented).  Collinear points on the hull boundary are dropped.
    """
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) < 3:
        raise ValueError("convex hull needs at least 3 distinct points")

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise ValueError("convex hull is degenerate (collinear points)")
    return hull


# ------------------------------------------------------------
# Point membership (closed semantics)
# ------------------------------------------------------------

def shape_contains(shape: Shape, lon: float, lat: float) -> bool:
    """True if the point lies in the shape, boundary included."""
    return to_shapely(shape).covers(_ShPoint(lon, lat))


# ============================================================
# shapely bridge
# ============================================================

def to_shapely(shape: Shape):
    """Multipolygon -> shapely geometry (same lon/lat coordinates)."""
    polys = []
    for p in shape:
        outer = _open_ring(p.outer)
        holes = [_open_ring(h) for h in p.holes]
        polys.append(_ShPolygon(outer, holes))
    if len(polys) == 1:
        geom = polys[0]
    else:
        geom = _ShMultiPolygon(polys)
    if not geom.is_valid:
        geom = geom.buffer(0)
    return geom


def to_shapely_xy(shape: Shape, ctx: ProjectionContext):
    """Multipolygon -> shapely geometry in projected km coordinates."""
    polys = []
    for p in shape:
        outer = _project_ring(ctx, _open_ring(p.outer))
        holes = [_project_ring(ctx, _open_ring(h)) for h in p.holes]
        polys.append(_ShPolygon(outer, holes))
    geom = polys[0] if len(polys) == 1 else _ShMultiPolygon(polys)
    if not geom.is_valid:
        geom = geom.buffer(0)
    return geom


def from_shapely(geom) -> Shape:
    """shapely geometry -> list of Polygons; non-areal parts are dropped."""
    out: Shape = []
    if geom.is_empty:
        return out
    if geom.geom_type == "Polygon":
        parts = [geom]
    elif geom.geom_type == "MultiPolygon":
        parts = list(geom.geoms)
    elif geom.geom_type == "GeometryCollection":
        parts = [g for g in geom.geoms if g.geom_type in ("Polygon", "MultiPolygon")]
        flat = []
        for g in parts:
            flat.extend(g.geoms if g.geom_type == "MultiPolygon" else [g])
        parts = flat
    else:
        return out
    for part in parts:
        outer = [(x, y) for x, y in part.exterior.coords[:-1]]
        holes = [[(x, y) for x, y in ring.coords[:-1]] for ring in part.interiors]
        # clipping can emit zero-area spike rings whose vertices collapse to
        # fewer than 3 distinct points; they carry no area, so drop them
        if len(set(outer)) < 3:
            continue
        holes = [h for h in holes if len(set(h)) >= 3]
        out.append(Polygon(outer, holes))
    return out


def from_shapely_xy(geom, ctx: ProjectionContext) -> Shape:
    """shapely geometry in projected km -> lon/lat Polygons."""
    shape = from_shapely(geom)
    out: Shape = []
    for p in shape:
        outer = [unproject(ctx, x, y) for x, y in p.outer]
        holes = [[unproject(ctx, x, y) for x, y in h] for h in p.holes]
        # unprojection can merge near-identical km coordinates into the
        # same lon/lat double, re-collapsing a sliver ring; filter again
        if len(set(outer)) < 3:
            continue
        holes = [h for h in holes if len(set(h)) >= 3]
        out.append(Polygon(outer, holes))
    return out


def shapes_union(shapes) -> Shape:
    """Union of several shapes."""
    geoms = [to_shapely(s) for s in shapes if s]
    if not geoms:
        return []
    return from_shapely(unary_union(geoms))


def shape_intersection(a: Shape, b: Shape) -> Shape:
    """Boolean intersection of two shapes (lon/lat plane)."""
    if not a or not b:
        return []
    return from_shapely(to_shapely(a).intersection(to_shapely(b)))


def rect_shape(lon_min: float, lat_min: float, lon_max: float, lat_max: float) -> Shape:
    """Axis-aligned rectangle as a one-polygon shape."""
    return [Polygon([(lon_min, lat_min), (lon_max, lat_min),
                     (lon_max, lat_max), (lon_min, lat_max)])]
