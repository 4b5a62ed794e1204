"""Paths to the bundled demo datasets (a Rio-de-Janeiro-like city).

The files are synthetic: scripts/make_rio_data.py draws a city silhouette
with the documented grid statistics (76 occupied 10x10 blocks, 4916
occupied 100x100 cells, 1200 km2), carves 160 districts with population
figures, and places 34 station points.
"""

from importlib.resources import files


def _path(name: str) -> str:
    return str(files("rategrid").joinpath("data", name))


def rio_border_path() -> str:
    """GeoJSON multipolygon: the city outline."""
    return _path("rio_border.geojson")


def rio_districts_path() -> str:
    """GeoJSON FeatureCollection: 160 district polygons with population."""
    return _path("rio_districts.geojson")


def rio_bases_path() -> str:
    """GeoJSON FeatureCollection: 34 station points."""
    return _path("rio_bases.geojson")
