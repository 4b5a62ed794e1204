"""Event ingestion and spatio-temporal aggregation.

Reads point events (timestamp, longitude, latitude, optional categorical
features) from delimited text, counts them into the cross product of one or
more time discretizations, a spatial discretization, and the feature values,
and writes the aggregated counts in the calibration text formats.

Every cell keeps one count per *occurrence* of its time combination inside
the observed horizon (e.g. one slot per Monday for a weekday scheme), so
empty occurrences are explicit zeros rather than missing data.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field

from .geometry import haversine_km
from .spatial import RegionSet
from .temporal import (Anchor, UniformPeriodic, horizon_tables,
                       parse_timestamp)
from . import formats


# ============================================================
# loading
# ============================================================

@dataclass
class EventRecord:
    ts: dt.datetime
    lon: float
    lat: float
    features: tuple  # dense 0-based codes, one per feature column


@dataclass
class EventTable:
    records: list
    feature_names: list
    feature_legends: list  # legend[k][code] = original label for column k
    # Filled by aggregate(): per-record time indices (one tuple entry per
    # attached discretization) and region id (None = outside the border).
    tdiscr: list | None = None
    gdiscr: list | None = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def feature_cardinalities(self) -> tuple:
        return tuple(len(leg) for leg in self.feature_legends)


def _detect_delimiter(sample: str) -> str:
    # Semicolon wins when present in the header; comma otherwise.
    header = sample.splitlines()[0] if sample else ""
    return ";" if header.count(";") >= header.count(",") and ";" in header else ","


def load_events(path: str, datetime_col: str, lat_col: str, lon_col: str,
                feature_cols=(), datetime_format: str | None = None) -> EventTable:
    """Read events from a ``;``- or ``,``-delimited file with a header row.

    Feature columns are recoded to dense 0-based integer codes in order of
    first appearance; the original labels are kept as legends.  Rows that
    fail to parse raise with the offending row number.
    """
    feature_cols = list(feature_cols)
    with open(path, "r", encoding="utf-8-sig", newline="") as fh:
        sample = fh.read(4096)
        fh.seek(0)
        delim = _detect_delimiter(sample)
        reader = csv.DictReader(fh, delimiter=delim)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file")
        cols = [c.strip() for c in reader.fieldnames]
        for need in [datetime_col, lon_col, lat_col] + feature_cols:
            if need not in cols:
                raise ValueError(f"{path}: missing column {need!r} (found {cols})")
        records = []
        legends = [[] for _ in feature_cols]
        codes = [{} for _ in feature_cols]
        for rownum, row in enumerate(reader, start=2):
            row = {(k.strip() if k else k): (v.strip() if v else v)
                   for k, v in row.items()}
            try:
                ts = parse_timestamp(row[datetime_col], datetime_format)
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{path}: row {rownum}: bad timestamp "
                                 f"{row.get(datetime_col)!r}: {exc}") from exc
            try:
                lon = float(row[lon_col])
                lat = float(row[lat_col])
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{path}: row {rownum}: bad coordinate: {exc}") from exc
            feats = []
            for k, colname in enumerate(feature_cols):
                label = row[colname]
                if label is None or label == "":
                    raise ValueError(f"{path}: row {rownum}: empty value in "
                                     f"feature column {colname!r}")
                if label not in codes[k]:
                    codes[k][label] = len(legends[k])
                    legends[k].append(label)
                feats.append(codes[k][label])
            records.append(EventRecord(ts, lon, lat, tuple(feats)))
    return EventTable(records, feature_cols, legends)


# ============================================================
# aggregation
# ============================================================

@dataclass
class AggregatedCounts:
    """Sparse event counts over (time combo) x zone x feature values.

    ``cells[key]`` maps a full index tuple ``(t_1, ..., t_S, r, f_1, ...)``
    to a list of counts, one per occurrence of that time combination in the
    horizon, in chronological order.  ``occurrences[combo]`` lists the
    occurrence keys backing those positions.
    """

    schemes: list
    region_set: RegionSet
    feature_cardinalities: tuple
    anchor: Anchor
    first_day: dt.date
    last_day: dt.date
    occurrences: dict
    cells: dict = field(default_factory=dict)
    dropped_outside: int = 0

    @property
    def dims(self) -> tuple:
        return (tuple(s.index_range for s in self.schemes)
                + (len(self.region_set.regions),)
                + self.feature_cardinalities)

    def counts(self, key) -> list:
        """Count list for a cell (explicit zeros when no events landed there)."""
        key = tuple(key)
        combo = key[:len(self.schemes)]
        if combo not in self.occurrences:
            raise KeyError(f"time combination {combo} never occurs in the horizon")
        got = self.cells.get(key)
        if got is not None:
            return list(got)
        return [0] * len(self.occurrences[combo])

    def total_count(self) -> int:
        return sum(sum(v) for v in self.cells.values())


def aggregate(table: EventTable, schemes, region_set: RegionSet) -> AggregatedCounts:
    """Count events into time x zone x feature cells over the event horizon.

    The horizon runs from the date of the earliest event to the date of the
    latest one; every occurrence of every time combination inside it gets a
    slot, so the result does not depend on the order of the input rows.
    Events outside the spatial border are dropped (and counted).
    """
    if not table.records:
        raise ValueError("cannot aggregate an empty event table")
    schemes = list(schemes)
    if not schemes:
        raise ValueError("at least one time discretization is required")
    anchor = Anchor.from_timestamps(r.ts for r in table.records)
    first_day = min(r.ts.date() for r in table.records)
    last_day = max(r.ts.date() for r in table.records)
    day_tables = horizon_tables(schemes, first_day, last_day, anchor)

    # Occurrence ledger: for every combination of per-scheme indices, the
    # chronological list of combined occurrence keys, built by overlaying the
    # per-scheme segmentations of each day.
    occurrences = {}
    positions = {}
    for day in _days(first_day, last_day):
        for combo, key in _overlay(day_tables[day]):
            slot = positions.setdefault(combo, {})
            if key not in slot:
                slot[key] = len(slot)
    for combo, slot in positions.items():
        keys = [None] * len(slot)
        for key, pos in slot.items():
            keys[pos] = key
        occurrences[combo] = keys

    agg = AggregatedCounts(schemes, region_set, table.feature_cardinalities,
                           anchor, first_day, last_day, occurrences)
    tdiscr = []
    gdiscr = []
    for rec in table.records:
        day = rec.ts.date()
        sec = (rec.ts - dt.datetime.combine(day, dt.time())).total_seconds()
        combo = []
        key = []
        for segs in day_tables[day]:
            idx, okey = _locate(segs, sec)
            combo.append(idx)
            key.append(okey)
        combo = tuple(combo)
        key = tuple(key)
        region = region_set.assign_region(rec.lon, rec.lat)
        tdiscr.append(combo)
        gdiscr.append(region)
        if region is None:
            agg.dropped_outside += 1
            continue
        cell = combo + (region,) + rec.features
        counts = agg.cells.get(cell)
        if counts is None:
            counts = [0] * len(occurrences[combo])
            agg.cells[cell] = counts
        counts[positions[combo][key]] += 1
    table.tdiscr = tdiscr
    table.gdiscr = gdiscr
    return agg


def _days(d0: dt.date, d1: dt.date):
    day = d0
    while day <= d1:
        yield day
        day += dt.timedelta(days=1)


def _locate(segments, sec: float):
    """(index, occurrence key) of the day segment containing second ``sec``."""
    for start, end, idx, key in segments:
        if start <= sec < end:
            return idx, key
    # sec == 86400 cannot happen (datetimes stay within their date).
    return segments[-1][2], segments[-1][3]


def _overlay(per_scheme):
    """Cross-scheme pieces of one day: (index combo, combined key) pairs.

    Splits the day at the union of all schemes' segment boundaries so each
    piece lies in exactly one segment per scheme.
    """
    bounds = sorted({b for segs in per_scheme for s in segs for b in (s[0], s[1])})
    out = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        mid = (a + b) / 2.0
        combo = []
        key = []
        for segs in per_scheme:
            idx, okey = _locate(segs, mid)
            combo.append(idx)
            key.append(okey)
        pair = (tuple(combo), tuple(key))
        if not out or out[-1] != pair:
            out.append(pair)
    return out


# ============================================================
# writers
# ============================================================

def _split_arrival_schemes(agg: AggregatedCounts):
    """(sub-day scheme or None, weekday scheme position) for arrivals output.

    The arrivals format needs the time axes to be exactly [periods-per-day,
    day-of-week] or [day-of-week] alone; anything else is rejected.
    """
    def is_weekday(s):
        return (isinstance(s, UniformPeriodic) and s.unit == "D"
                and s.width == 1 and s.period == 7)

    schemes = agg.schemes
    if len(schemes) == 1 and is_weekday(schemes[0]):
        return None
    if (len(schemes) == 2 and is_weekday(schemes[1])
            and getattr(schemes[0], "unit", None) in ("H", "m", "S")):
        return schemes[0]
    raise ValueError(
        "arrivals output needs time axes [sub-day periods, day of week] "
        "or [day of week] alone")


def aggregated_info(agg: AggregatedCounts,
                    n_regressors: int = 0) -> formats.CalibrationInfo:
    sub = _split_arrival_schemes(agg)
    T = sub.index_range if sub is not None else 1
    R = len(agg.region_set.regions)
    if len(agg.feature_cardinalities) > 1:
        raise ValueError("arrivals output supports at most one feature column")
    C = agg.feature_cardinalities[0] if agg.feature_cardinalities else 1
    J = n_regressors
    n_days = []
    for g in range(7):
        combo = (g,) if sub is None else (0, g)
        occ = agg.occurrences.get(combo)
        if occ is None:
            n_days.append(0)
            continue
        n = len(occ)
        for t in range(T):
            c2 = (g,) if sub is None else (t, g)
            if len(agg.occurrences[c2]) != n:
                raise ValueError("uneven occurrence counts within a day class")
        n_days.append(n)
    return formats.CalibrationInfo(T, 7, R, C, J, 0, n_days)


def write_arrivals(agg: AggregatedCounts, path: str,
                   info: formats.CalibrationInfo | None = None) -> None:
    """Write aggregated counts as arrivals lines ``t g r c j count 0``.

    Emits every (t, g, r, c, j) combination, zeros included, in
    lexicographic order.
    """
    if info is None:
        info = aggregated_info(agg)
    sub = _split_arrival_schemes(agg)
    has_feature = bool(agg.feature_cardinalities)
    entries = []
    for t in range(info.T):
        for g in range(7):
            combo = (g,) if sub is None else (t, g)
            if combo not in agg.occurrences:
                continue
            for r in range(info.R):
                for c in range(info.C):
                    cell = combo + (r,) + ((c,) if has_feature else ())
                    counts = agg.counts(cell)
                    for j, count in enumerate(counts):
                        entries.append(formats.ArrivalEntry(t, g, r, c, j, count, 0))
    formats.write_arrivals_file(entries, path)


def write_info(agg: AggregatedCounts, path: str,
               n_regressors: int = 0) -> None:
    formats.write_info(aggregated_info(agg, n_regressors), path)


def write_regions(region_set: RegionSet, path: str, regressor_names=()) -> None:
    """Write the zone table: id, centroid, type, regressors, neighbor pairs.

    Neighbor distances are great-circle kilometres between zone centroids.
    ``type`` comes from a region's ``type`` attribute when present (0
    otherwise); regressor columns are pulled from region attributes by name.
    """
    regressor_names = list(regressor_names)
    zones = []
    regions = region_set.regions
    for reg in regions:
        regs = []
        for name in regressor_names:
            if name not in reg.attributes:
                raise ValueError(f"region {reg.id} lacks attribute {name!r}")
            regs.append(float(reg.attributes[name]))
        nbrs = []
        for nid in reg.neighbors:
            other = regions[nid]
            d = haversine_km(reg.centroid[0], reg.centroid[1],
                             other.centroid[0], other.centroid[1])
            nbrs.append((nid, d))
        zones.append(formats.ZoneRow(reg.id, reg.centroid[1], reg.centroid[0],
                                     int(reg.attributes.get("type", 0)),
                                     regs, nbrs))
    formats.write_neighbors(zones, path)
