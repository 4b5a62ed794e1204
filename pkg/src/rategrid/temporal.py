"""Time discretization schemes.

Three scheme families map a timestamp to a small integer index:

* :class:`UniformPeriodic` — equal windows of ``width`` units repeating with
  period ``period`` (e.g. 30-minute windows over the day, days over the week).
* :class:`NonUniformPeriodic` — consecutive windows of unequal durations
  repeating with a period (e.g. month blocks 3+4+2+1+2 over 12 months).
* :class:`CustomIntervals` — explicit dated intervals (holidays, events);
  anything unmatched gets index 0.

Periodic phase conventions (documented decisions): weeks start on Monday and
the day/week counters are anchored on the Monday on or before January 1 of
the anchor year; month/year counters are anchored on January of the anchor
year (the year of the earliest event).  Timestamps are naive local time.

Every scheme can also expand a calendar day into (second-of-day) segments
carrying the index plus an *occurrence key* identifying the concrete window
instance (e.g. which particular Monday).  Aggregation uses these tables as
the single source of truth for both event indexing and observation counting.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta

SECONDS_PER_DAY = 86400

#: seconds per sub-day unit
_UNIT_SECONDS = {"H": 3600.0, "m": 60.0, "S": 1.0}

SUB_DAY_UNITS = ("H", "m", "S")
DAY_UNITS = ("D", "W", "M", "Y")
VALID_UNITS = SUB_DAY_UNITS + DAY_UNITS


# ============================================================
# Anchor
# ============================================================

@dataclass(frozen=True)
class Anchor:
    """Phase origin for periodic counters.

    ``anchor_year`` is the year of the earliest event in the dataset.  Day
    and week counts start at the Monday on or before January 1 of that year;
    month and year counts start at January of that year.
    """

    anchor_year: int

    @property
    def anchor_monday(self) -> date:
        jan1 = date(self.anchor_year, 1, 1)
        return jan1 - timedelta(days=jan1.weekday())

    @classmethod
    def from_timestamps(cls, timestamps) -> "Anchor":
        ts_min = min(timestamps)
        return cls(ts_min.year)


def elapsed_units(unit: str, ts: datetime, anchor: Anchor | None):
    """Elapsed count of ``unit`` at ``ts`` per the scheme conventions.

    Sub-day units count (fractionally) from local midnight; 'D'/'W' count
    whole days/ISO weeks from the anchor Monday; 'M'/'Y' count calendar
    months/years from January of the anchor year.
    """
    if unit in _UNIT_SECONDS:
        sec = (ts - ts.replace(hour=0, minute=0, second=0, microsecond=0)).total_seconds()
        return sec / _UNIT_SECONDS[unit]
    if anchor is None:
        raise ValueError(f"unit {unit!r} requires an anchor")
    if unit == "D":
        return (ts.date() - anchor.anchor_monday).days
    if unit == "W":
        return (ts.date() - anchor.anchor_monday).days // 7
    if unit == "M":
        return (ts.year - anchor.anchor_year) * 12 + (ts.month - 1)
    if unit == "Y":
        return ts.year - anchor.anchor_year
    raise ValueError(f"unknown time unit {unit!r}")


# ============================================================
# Periodic schemes
# ============================================================

class UniformPeriodic:
    """Equal windows of ``width`` units repeating every ``period`` units."""

    def __init__(self, unit: str, width, period):
        if unit not in VALID_UNITS:
            raise ValueError(f"unknown time unit {unit!r}")
        if width < 1:
            raise ValueError("width must be >= 1 unit")
        if period <= 0:
            raise ValueError("period must be positive")
        ratio = period / width
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("period must be a multiple of width")
        self.unit = unit
        self.width = width
        self.period = period

    def __repr__(self):
        return f"UniformPeriodic({self.unit!r}, {self.width}, {self.period})"

    @property
    def index_range(self) -> int:
        return int(round(self.period / self.width))

    def index_of(self, ts: datetime, anchor: Anchor | None = None) -> int:
        e = elapsed_units(self.unit, ts, anchor)
        return int((e % self.period) // self.width)

    # --- within-period window boundaries, in units -------------------
    def _period_boundaries(self):
        bounds = []
        b = 0.0
        while b < self.period - 1e-9:
            bounds.append(b)
            b += self.width
        bounds.append(float(self.period))
        return bounds

    def _index_at(self, c) -> int:
        return int(c // self.width)

    def day_table(self, day: date, anchor: Anchor | None):
        """[(start_sec, end_sec, index, occurrence_key)] covering the day."""
        return _day_table_periodic(self, day, anchor)


class NonUniformPeriodic:
    """Windows of unequal ``durations`` repeating every ``period`` units."""

    def __init__(self, unit: str, durations, period):
        if unit not in VALID_UNITS:
            raise ValueError(f"unknown time unit {unit!r}")
        durations = list(durations)
        if not durations or any(d <= 0 for d in durations):
            raise ValueError("durations must be a nonempty list of positive numbers")
        if period <= 0:
            raise ValueError("period must be positive")
        self.unit = unit
        self.durations = durations
        self.period = period
        self._cum = []
        acc = 0.0
        for d in durations:
            acc += d
            self._cum.append(acc)
        self._sum = acc
        ratio = period / acc
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("period must be a multiple of sum(durations)")

    def __repr__(self):
        return f"NonUniformPeriodic({self.unit!r}, {self.durations}, {self.period})"

    @property
    def index_range(self) -> int:
        return int(round(self.period / self._sum)) * len(self.durations)

    def index_of(self, ts: datetime, anchor: Anchor | None = None) -> int:
        e = elapsed_units(self.unit, ts, anchor)
        c = e % self.period
        return self._index_at(c)

    def _index_at(self, c) -> int:
        slot = int(c // self._sum)
        cb = c - slot * self._sum
        b = bisect.bisect_right(self._cum, cb)
        if b >= len(self.durations):  # float edge: cb == sum
            b = len(self.durations) - 1
        return slot * len(self.durations) + b

    def _period_boundaries(self):
        bounds = [0.0]
        base = 0.0
        while base < self.period - 1e-9:
            for c in self._cum:
                v = base + c
                if v < self.period - 1e-9:
                    bounds.append(v)
                else:
                    break
            base += self._sum
        bounds.append(float(self.period))
        return sorted(set(bounds))

    def day_table(self, day: date, anchor: Anchor | None):
        return _day_table_periodic(self, day, anchor)


def _day_table_periodic(scheme, day: date, anchor: Anchor | None):
    """Expand one calendar day into (start_sec, end_sec, index, key) rows.

    The occurrence key identifies the concrete cycle instance: sub-day
    schemes restart their elapsed counter at midnight, so the key includes
    the day ordinal; day-granularity schemes use the absolute cycle number.
    """
    unit = scheme.unit
    if unit in _UNIT_SECONDS:
        us = _UNIT_SECONDS[unit]
        day_units = SECONDS_PER_DAY / us
        period = scheme.period
        pb = scheme._period_boundaries()
        rows = []
        n = 0
        while n * period < day_units - 1e-9:
            for i in range(len(pb) - 1):
                s = n * period + pb[i]
                e = n * period + pb[i + 1]
                if s >= day_units - 1e-9:
                    break
                e = min(e, day_units)
                idx = scheme._index_at(pb[i])
                key = (day.toordinal(), n)
                rows.append((s * us, e * us, idx, key))
            n += 1
        return rows
    # day-granularity: the whole day carries one index
    noon = datetime(day.year, day.month, day.day, 12)
    e = elapsed_units(unit, noon, anchor)
    idx = scheme._index_at(e % scheme.period)
    key = int(e // scheme.period)
    return [(0.0, float(SECONDS_PER_DAY), idx, key)]


# ============================================================
# Custom dated intervals
# ============================================================

@dataclass(frozen=True)
class IntervalRow:
    start: date
    end: date
    t: int
    yearly: bool

    def matches(self, day: date) -> bool:
        if self.yearly:
            md = (day.month, day.day)
            return (self.start.month, self.start.day) <= md <= (self.end.month, self.end.day)
        return self.start <= day <= self.end


class CustomIntervals:
    """Explicit dated intervals; unmatched days get index 0.

    Rows are matched in file order (first match wins), at whole-day
    granularity, both endpoints inclusive.  Yearly rows match their
    month-day window in any year and must start and end within one calendar
    year.  Two rows with *different* indices covering the same day are
    rejected at construction.
    """

    def __init__(self, rows):
        self.rows = []
        for k, row in enumerate(rows):
            start, end, t, yearly = row
            if t < 1:
                raise ValueError(f"row {k}: interval index must be >= 1 (0 means 'no interval')")
            if yearly and start.year != end.year:
                raise ValueError(f"row {k}: yearly interval must start and end in the same year")
            if start > end:
                raise ValueError(f"row {k}: start {start} after end {end}")
            self.rows.append(IntervalRow(start, end, int(t), bool(yearly)))
        self._check_overlaps()

    def _check_overlaps(self):
        for a in range(len(self.rows)):
            for b in range(a + 1, len(self.rows)):
                ra, rb = self.rows[a], self.rows[b]
                if ra.t == rb.t:
                    continue
                if self._rows_overlap(ra, rb):
                    raise ValueError(
                        f"intervals {a} and {b} overlap but carry different indices "
                        f"({ra.t} vs {rb.t})")

    @staticmethod
    def _rows_overlap(ra: IntervalRow, rb: IntervalRow) -> bool:
        if ra.yearly and rb.yearly:
            a0 = (ra.start.month, ra.start.day)
            a1 = (ra.end.month, ra.end.day)
            b0 = (rb.start.month, rb.start.day)
            b1 = (rb.end.month, rb.end.day)
            return a0 <= b1 and b0 <= a1
        if not ra.yearly and not rb.yearly:
            return ra.start <= rb.end and rb.start <= ra.end
        yearly, plain = (ra, rb) if ra.yearly else (rb, ra)
        if (plain.end - plain.start).days >= 365:
            return True
        day = plain.start
        while day <= plain.end:
            if yearly.matches(day):
                return True
            day += timedelta(days=1)
        return False

    def __repr__(self):
        return f"CustomIntervals({len(self.rows)} rows)"

    @property
    def index_range(self) -> int:
        return (max(r.t for r in self.rows) + 1) if self.rows else 1

    def index_of(self, ts: datetime, anchor: Anchor | None = None) -> int:
        day = ts.date()
        for row in self.rows:
            if row.matches(day):
                return row.t
        return 0

    def day_index_and_key(self, day: date):
        """(index, occurrence key) for a day; key is None for gap days.

        Gap days (index 0) get run keys only in a horizon scan; see
        :func:`horizon_tables`.
        """
        for k, row in enumerate(self.rows):
            if row.matches(day):
                key = ("y", k, day.year) if row.yearly else ("p", k)
                return row.t, key
        return 0, None

    def day_table(self, day: date, anchor: Anchor | None = None):
        idx, key = self.day_index_and_key(day)
        return [(0.0, float(SECONDS_PER_DAY), idx, key)]


# ============================================================
# Horizon tables
# ============================================================

def horizon_tables(schemes, d0: date, d1: date, anchor: Anchor | None):
    """Per-scheme day tables over [d0, d1] inclusive.

    Returns {day: [table_scheme0, table_scheme1, ...]} where each table is a
    list of (start_sec, end_sec, index, occurrence_key) rows.  For custom
    schemes, gap days (index 0, no matching interval) receive run keys
    ("g", run_number): consecutive gap days share one run.
    """
    out: dict[date, list] = {}
    day = d0
    while day <= d1:
        out[day] = [s.day_table(day, anchor) for s in schemes]
        day += timedelta(days=1)
    # second pass: assign run keys to custom-scheme gap days
    for si, scheme in enumerate(schemes):
        if not isinstance(scheme, CustomIntervals):
            continue
        run = -1
        in_gap = False
        day = d0
        while day <= d1:
            rows = out[day][si]
            (s, e, idx, key) = rows[0]
            if key is None:
                if not in_gap:
                    run += 1
                    in_gap = True
                out[day][si] = [(s, e, idx, ("g", run))]
            else:
                in_gap = False
            day += timedelta(days=1)
    return out


# ============================================================
# Parsing
# ============================================================

def parse_timestamp(text: str, fmt: str | None = None) -> datetime:
    """Parse a timestamp: explicit format, ISO-8601, or dd/mm/YYYY HH:MM."""
    text = text.strip()
    if fmt:
        return datetime.strptime(text, fmt)
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        pass
    for f in ("%d/%m/%Y %H:%M:%S", "%d/%m/%Y %H:%M", "%d/%m/%Y"):
        try:
            return datetime.strptime(text, f)
        except ValueError:
            continue
    raise ValueError(f"unparsable timestamp: {text!r}")


def parse_day(text: str) -> date:
    return parse_timestamp(text).date()


def read_custom_intervals(path: str) -> CustomIntervals:
    """Read dated intervals from a CSV with header start,end,t,repetition."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"start", "end", "t"}
        fields = set(reader.fieldnames or [])
        missing = required - fields
        if missing:
            raise ValueError(f"custom intervals file missing columns: {sorted(missing)}")
        for ln, rec in enumerate(reader, start=2):
            rep = (rec.get("repetition") or "").strip().lower()
            if rep in ("yearly",):
                yearly = True
            elif rep in ("", "none", "no"):
                yearly = False
            else:
                raise ValueError(f"line {ln}: unknown repetition {rec.get('repetition')!r}")
            try:
                start = parse_day(rec["start"])
                end = parse_day(rec["end"])
                t = int(rec["t"])
            except (ValueError, TypeError) as exc:
                raise ValueError(f"line {ln}: {exc}") from exc
            rows.append((start, end, t, yearly))
    return CustomIntervals(rows)


def scheme_from_text(spec_text: str):
    """Parse a compact scheme descriptor.

    Forms: ``UNIT:WIDTH:PERIOD`` (uniform), ``UNIT:D1,D2,...:PERIOD``
    (non-uniform), ``custom:PATH`` (dated intervals from a CSV).
    """
    parts = spec_text.split(":")
    if parts[0].lower() == "custom":
        if len(parts) < 2 or not parts[1]:
            raise ValueError("custom scheme needs a file path: custom:PATH")
        return read_custom_intervals(":".join(parts[1:]))
    if len(parts) != 3:
        raise ValueError(f"bad time scheme {spec_text!r}; expected UNIT:WIDTH:PERIOD")
    unit, width_s, period_s = parts
    period = float(period_s)
    if period == int(period):
        period = int(period)
    if "," in width_s:
        durations = []
        for tok in width_s.split(","):
            v = float(tok)
            durations.append(int(v) if v == int(v) else v)
        return NonUniformPeriodic(unit, durations, period)
    w = float(width_s)
    if w == int(w):
        w = int(w)
    return UniformPeriodic(unit, w, period)
