"""Minimal GeoJSON reader/writer for polygonal feature collections.

Only what the package needs: FeatureCollections of Polygon/MultiPolygon
features plus Point features (used for station/seed tables).  Properties are
passed through untouched.
"""

from __future__ import annotations

import json

from .geometry import Polygon, Shape


def _shape_from_geometry(geom: dict) -> Shape:
    gtype = geom.get("type")
    if gtype == "Polygon":
        rings = geom["coordinates"]
        return [Polygon([tuple(pt) for pt in rings[0]],
                        [[tuple(pt) for pt in r] for r in rings[1:]])]
    if gtype == "MultiPolygon":
        shape: Shape = []
        for rings in geom["coordinates"]:
            shape.append(Polygon([tuple(pt) for pt in rings[0]],
                                 [[tuple(pt) for pt in r] for r in rings[1:]]))
        return shape
    raise ValueError(f"unsupported geometry type for polygons: {gtype!r}")


def _geometry_from_shape(shape: Shape) -> dict:
    def close(ring):
        pts = [list(p) for p in ring]
        if pts[0] != pts[-1]:
            pts.append(list(pts[0]))
        return pts

    if len(shape) == 1:
        p = shape[0]
        return {"type": "Polygon",
                "coordinates": [close(p.outer)] + [close(h) for h in p.holes]}
    return {"type": "MultiPolygon",
            "coordinates": [[close(p.outer)] + [close(h) for h in p.holes]
                            for p in shape]}


def read_polygon_features(path: str) -> list[tuple[Shape, dict]]:
    """Read a FeatureCollection of Polygon/MultiPolygon features.

    Returns [(shape, properties), ...] in file order.  A bare geometry or a
    single Feature is accepted too.
    """
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("type") == "FeatureCollection":
        feats = data["features"]
    elif data.get("type") == "Feature":
        feats = [data]
    else:
        feats = [{"type": "Feature", "geometry": data, "properties": {}}]
    out = []
    for feat in feats:
        geom = feat.get("geometry")
        if geom is None:
            continue
        out.append((_shape_from_geometry(geom), dict(feat.get("properties") or {})))
    return out


def read_point_features(path: str) -> list[tuple[tuple[float, float], dict]]:
    """Read a FeatureCollection of Point features -> [((lon, lat), props)]."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    feats = data["features"] if data.get("type") == "FeatureCollection" else [data]
    out = []
    for feat in feats:
        geom = feat.get("geometry", feat)
        if geom.get("type") != "Point":
            raise ValueError(f"expected Point features, got {geom.get('type')!r}")
        lon, lat = geom["coordinates"][:2]
        out.append(((float(lon), float(lat)), dict(feat.get("properties") or {})))
    return out


def write_polygon_features(path: str, features) -> None:
    """Write [(shape, properties), ...] as a FeatureCollection."""
    fc = {
        "type": "FeatureCollection",
        "features": [
            {"type": "Feature",
             "geometry": _geometry_from_shape(shape),
             "properties": props}
            for shape, props in features
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(fc, fh)
        fh.write("\n")


def write_point_features(path: str, points) -> None:
    """Write [((lon, lat), properties), ...] as a FeatureCollection."""
    fc = {
        "type": "FeatureCollection",
        "features": [
            {"type": "Feature",
             "geometry": {"type": "Point", "coordinates": [lon, lat]},
             "properties": props}
            for (lon, lat), props in points
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(fc, fh)
        fh.write("\n")
