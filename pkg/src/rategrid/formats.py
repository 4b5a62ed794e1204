"""Text formats for the calibration pipeline.

Seven whitespace-separated formats: the info header, arrival samples,
zone/neighbor tables, the neighbor-weight matrix, time groups, candidate
cross-validation weights, and the calibrated output (intensities or
regression coefficients).  Floats are written with 17 significant digits so
write -> read round-trips are bit-exact.

Day classes: ``g`` in [0, G) are regular weekdays (Monday = 0) and
``g`` in [G, G+H) are holiday classes; an arrivals line's trailing flag is 1
exactly when its day index is a holiday class.  ``D = G + H`` is the total
day-class count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def fmt_float(x) -> str:
    """17-significant-digit decimal form (lossless for doubles)."""
    return np.format_float_positional(float(x), precision=17, unique=False,
                                      fractional=False)


def _tokens(path: str):
    """All whitespace-separated tokens of a file, with line numbers."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            for tok in line.split():
                out.append((tok, ln))
    return out


def _lines(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return [(ln, line.split()) for ln, line in enumerate(fh, start=1)
                if line.strip()]


# ============================================================
# info file
# ============================================================

@dataclass
class CalibrationInfo:
    """Problem dimensions plus per-day-class observation counts.

    T: time periods per day; G: weekday classes (7); R: zones; C: arrival
    types; J: regressors; H: holiday classes.  ``n_days[g]`` is the number
    of observed days of class g, for g in [0, G+H).
    """

    T: int
    G: int
    R: int
    C: int
    J: int
    H: int
    n_days: list

    @property
    def D(self) -> int:
        return self.G + self.H

    def __post_init__(self):
        if len(self.n_days) != self.D:
            raise ValueError(
                f"info needs {self.D} day-class observation counts, got {len(self.n_days)}")
        if min([self.T, self.G, self.R, self.C, self.J] + list(self.n_days)) < 0:
            raise ValueError("info values must be non-negative")


def read_info(path: str) -> CalibrationInfo:
    lines = _lines(path)
    if len(lines) < 2:
        raise ValueError(f"{path}: info file must contain two lines")
    ln1, head = lines[0]
    if len(head) != 6:
        raise ValueError(f"{path}:{ln1}: expected 6 values (T G R C J H), got {len(head)}")
    try:
        T, G, R, C, J, H = (int(v) for v in head)
    except ValueError as exc:
        raise ValueError(f"{path}:{ln1}: {exc}") from exc
    ln2, counts = lines[1]
    try:
        n_days = [int(v) for v in counts]
    except ValueError as exc:
        raise ValueError(f"{path}:{ln2}: {exc}") from exc
    if len(n_days) != G + H:
        raise ValueError(
            f"{path}:{ln2}: expected {G + H} day-class counts, got {len(n_days)}")
    return CalibrationInfo(T, G, R, C, J, H, n_days)


def write_info(info: CalibrationInfo, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{info.T} {info.G} {info.R} {info.C} {info.J} {info.H}\n")
        fh.write(" ".join(str(n) for n in info.n_days) + "\n")


# ============================================================
# arrivals file
# ============================================================

@dataclass
class ArrivalEntry:
    t: int
    g: int  # day class, holiday classes included
    r: int
    c: int
    j: int  # observation index within the day class
    count: int
    holiday: int


def read_arrivals(path: str, info: CalibrationInfo) -> list:
    out = []
    for ln, toks in _lines(path):
        if len(toks) != 7:
            raise ValueError(f"{path}:{ln}: expected 7 values, got {len(toks)}")
        try:
            t, g, r, c, j, count, flag = (int(v) for v in toks)
        except ValueError as exc:
            raise ValueError(f"{path}:{ln}: {exc}") from exc
        if not 0 <= t < info.T:
            raise ValueError(f"{path}:{ln}: time period {t} out of range [0, {info.T})")
        if not 0 <= g < info.D:
            raise ValueError(f"{path}:{ln}: day class {g} out of range [0, {info.D})")
        if not 0 <= r < info.R:
            raise ValueError(f"{path}:{ln}: zone {r} out of range [0, {info.R})")
        if not 0 <= c < info.C:
            raise ValueError(f"{path}:{ln}: arrival type {c} out of range [0, {info.C})")
        if not 0 <= j < info.n_days[g]:
            raise ValueError(
                f"{path}:{ln}: observation {j} out of range [0, {info.n_days[g]}) for day class {g}")
        if count < 0:
            raise ValueError(f"{path}:{ln}: negative count")
        if flag not in (0, 1):
            raise ValueError(f"{path}:{ln}: holiday flag must be 0 or 1")
        if flag != (1 if g >= info.G else 0):
            raise ValueError(
                f"{path}:{ln}: holiday flag {flag} inconsistent with day class {g}")
        out.append(ArrivalEntry(t, g, r, c, j, count, flag))
    return out


def write_arrivals_file(entries, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(f"{e.t} {e.g} {e.r} {e.c} {e.j} {e.count} {e.holiday}\n")


def arrivals_to_noreg_arrays(entries, info: CalibrationInfo):
    """(N, M) over (C, R, D*T) with day-major time index tau = g*T + t."""
    C, R, D, T = info.C, info.R, info.D, info.T
    M = np.zeros((C, R, D * T))
    N = np.zeros((C, R, D * T))
    for g in range(D):
        for t in range(T):
            N[:, :, g * T + t] = info.n_days[g]
    for e in entries:
        M[e.c, e.r, e.g * info.T + e.t] += e.count
    return N, M


def arrivals_to_sample(entries, info: CalibrationInfo):
    """Per-observation counts sample[c][r][tau][j], day-major tau = g*T + t.

    Slot tau keeps one entry per observed occurrence of its weekday
    (length N_g), which is what likelihood cross-validation folds over.
    """
    C, R, D, T = info.C, info.R, info.D, info.T
    sample = [[[[0] * info.n_days[tau // T] for tau in range(D * T)]
               for _r in range(R)] for _c in range(C)]
    for e in entries:
        sample[e.c][e.r][e.g * T + e.t][e.j] += e.count
    return sample


def arrivals_to_cov_arrays(entries, info: CalibrationInfo):
    """(N, M) over (C, D, T, R) for the covariates model."""
    C, R, D, T = info.C, info.R, info.D, info.T
    M = np.zeros((C, D, T, R))
    N = np.zeros((C, D, T, R))
    for g in range(D):
        N[:, g, :, :] = info.n_days[g]
    for e in entries:
        M[e.c, e.g, e.t, e.r] += e.count
    return N, M


# ============================================================
# neighbors (zone) file
# ============================================================

@dataclass
class ZoneRow:
    id: int
    lat: float
    lon: float
    type: int
    regressors: list   # length J
    neighbors: list    # [(id, distance_km)]


def read_neighbors(path: str, info: CalibrationInfo) -> list:
    rows = {}
    for ln, toks in _lines(path):
        if len(toks) < 4 + info.J:
            raise ValueError(
                f"{path}:{ln}: expected at least {4 + info.J} values, got {len(toks)}")
        rest = toks[4 + info.J:]
        if len(rest) % 2 != 0:
            raise ValueError(f"{path}:{ln}: neighbor list must be (id, distance) pairs")
        try:
            rid = int(toks[0])
            lat = float(toks[1])
            lon = float(toks[2])
            rtype = int(toks[3])
            regs = [float(v) for v in toks[4:4 + info.J]]
            nbrs = [(int(rest[k]), float(rest[k + 1])) for k in range(0, len(rest), 2)]
        except ValueError as exc:
            raise ValueError(f"{path}:{ln}: {exc}") from exc
        if not 0 <= rid < info.R:
            raise ValueError(f"{path}:{ln}: zone id {rid} out of range [0, {info.R})")
        for nid, nd in nbrs:
            if not 0 <= nid < info.R:
                raise ValueError(f"{path}:{ln}: neighbor id {nid} out of range")
            if nd < 0:
                raise ValueError(f"{path}:{ln}: negative neighbor distance")
        if rid in rows:
            raise ValueError(f"{path}:{ln}: duplicate zone id {rid}")
        rows[rid] = ZoneRow(rid, lat, lon, rtype, regs, nbrs)
    if len(rows) != info.R:
        raise ValueError(f"{path}: expected {info.R} zone lines, found {len(rows)}")
    return [rows[i] for i in range(info.R)]


def write_neighbors(zones, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for z in zones:
            parts = [str(z.id), fmt_float(z.lat), fmt_float(z.lon), str(z.type)]
            parts += [fmt_float(v) for v in z.regressors]
            for nid, nd in z.neighbors:
                parts.append(str(nid))
                parts.append(fmt_float(nd))
            fh.write(" ".join(parts) + "\n")


def zones_to_arrays(zones, info: CalibrationInfo):
    """(regressors (J,R), distance matrix (R,R), neighbor lists, types)."""
    J, R = info.J, info.R
    x = np.zeros((J, R))
    dist = np.zeros((R, R))
    nbrs = []
    types = []
    for z in zones:
        for j in range(J):
            x[j, z.id] = z.regressors[j]
        ids = []
        for nid, nd in z.neighbors:
            dist[z.id, nid] = nd
            ids.append(nid)
        nbrs.append(sorted(ids))
        types.append(z.type)
    return x, dist, nbrs, types


# ============================================================
# alpha (neighbor weight) matrix
# ============================================================

def read_alpha(path: str, R: int) -> np.ndarray:
    lines = _lines(path)
    if len(lines) != R:
        raise ValueError(f"{path}: expected {R} rows, found {len(lines)}")
    m = np.zeros((R, R))
    for i, (ln, toks) in enumerate(lines):
        if len(toks) != R:
            raise ValueError(f"{path}:{ln}: expected {R} values, got {len(toks)}")
        try:
            m[i] = [float(v) for v in toks]
        except ValueError as exc:
            raise ValueError(f"{path}:{ln}: {exc}") from exc
    if np.any(m < 0):
        raise ValueError(f"{path}: weights must be non-negative")
    if not np.array_equal(m, m.T):
        raise ValueError(f"{path}: weight matrix must be symmetric")
    return m


def write_alpha(m, path: str) -> None:
    m = np.asarray(m)
    with open(path, "w", encoding="utf-8") as fh:
        for row in m:
            fh.write(" ".join(fmt_float(v) for v in row) + "\n")


# ============================================================
# time groups
# ============================================================

@dataclass
class TimeGroups:
    n_groups: int
    which_group: list  # length D*T, day-major time index
    weights: list      # length n_groups, or None when skipped

    @property
    def groups(self) -> list:
        out = [[] for _ in range(self.n_groups)]
        for tau, g in enumerate(self.which_group):
            out[g].append(tau)
        return out


def read_time_groups(path: str, n_periods: int, skip_weights: bool = False) -> TimeGroups:
    toks = _tokens(path)
    if not toks:
        raise ValueError(f"{path}: empty time-groups file")
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(toks):
            raise ValueError(f"{path}: unexpected end of file while reading {what}")
        tok, ln = toks[pos]
        pos += 1
        return tok, ln

    tok, ln = take("the group count")
    try:
        n_groups = int(tok)
    except ValueError as exc:
        raise ValueError(f"{path}:{ln}: {exc}") from exc
    if n_groups < 1:
        raise ValueError(f"{path}:{ln}: group count must be positive")
    which = []
    for k in range(n_periods):
        tok, ln = take(f"group index {k}")
        try:
            gi = int(tok)
        except ValueError as exc:
            raise ValueError(f"{path}:{ln}: {exc}") from exc
        if not 0 <= gi < n_groups:
            raise ValueError(f"{path}:{ln}: group index {gi} out of range [0, {n_groups})")
        which.append(gi)
    weights = None
    if skip_weights:
        # weight reading is skipped: tolerate the weight block (same file
        # serves both methods), but anything else trailing is junk
        if pos != len(toks) and len(toks) - pos != n_groups:
            raise ValueError(
                f"{path}: {len(toks) - pos} unexpected trailing values")
        return TimeGroups(n_groups, which, None)
    weights = []
    for k in range(n_groups):
        tok, ln = take(f"group weight {k}")
        try:
            w = float(tok)
        except ValueError as exc:
            raise ValueError(f"{path}:{ln}: {exc}") from exc
        if w < 0:
            raise ValueError(f"{path}:{ln}: group weights must be non-negative")
        weights.append(w)
    if pos != len(toks):
        raise ValueError(f"{path}: {len(toks) - pos} unexpected trailing values")
    return TimeGroups(n_groups, which, weights)


def write_time_groups(tg: TimeGroups, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{tg.n_groups}\n")
        fh.write(" ".join(str(g) for g in tg.which_group) + "\n")
        if tg.weights is not None:
            fh.write(" ".join(fmt_float(w) for w in tg.weights) + "\n")


# ============================================================
# cross-validation weights
# ============================================================

def read_cv_weights(path: str) -> list:
    out = []
    for tok, ln in _tokens(path):
        try:
            w = float(tok)
        except ValueError as exc:
            raise ValueError(f"{path}:{ln}: {exc}") from exc
        if w < 0:
            raise ValueError("Each weight must non negative")
        out.append(w)
    if not out:
        raise ValueError(f"{path}: no weights found")
    return out


def write_cv_weights(weights, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(" ".join(fmt_float(w) for w in weights) + "\n")


# ============================================================
# calibrated output
# ============================================================

def write_output_noreg(lam, path: str) -> None:
    """One line ``c r t lambda`` per cell; t is day-major over D*T periods."""
    lam = np.asarray(lam)
    C, R, TT = lam.shape
    with open(path, "w", encoding="utf-8") as fh:
        for c in range(C):
            for r in range(R):
                for t in range(TT):
                    fh.write(f"{c} {r} {t} {fmt_float(lam[c, r, t])}\n")


def read_output_noreg(path: str) -> np.ndarray:
    entries = []
    cmax = rmax = tmax = -1
    for ln, toks in _lines(path):
        if len(toks) != 4:
            raise ValueError(f"{path}:{ln}: expected 4 values, got {len(toks)}")
        c, r, t = int(toks[0]), int(toks[1]), int(toks[2])
        v = float(toks[3])
        entries.append((c, r, t, v))
        cmax, rmax, tmax = max(cmax, c), max(rmax, r), max(tmax, t)
    lam = np.zeros((cmax + 1, rmax + 1, tmax + 1))
    for c, r, t, v in entries:
        lam[c, r, t] = v
    return lam


def write_output_reg(beta, path: str) -> None:
    """One line ``c d t j beta`` per coefficient."""
    beta = np.asarray(beta)
    C, D, T, J = beta.shape
    with open(path, "w", encoding="utf-8") as fh:
        for c in range(C):
            for d in range(D):
                for t in range(T):
                    for j in range(J):
                        fh.write(f"{c} {d} {t} {j} {fmt_float(beta[c, d, t, j])}\n")


def read_output_reg(path: str) -> np.ndarray:
    entries = []
    dims = [-1, -1, -1, -1]
    for ln, toks in _lines(path):
        if len(toks) != 5:
            raise ValueError(f"{path}:{ln}: expected 5 values, got {len(toks)}")
        idx = [int(v) for v in toks[:4]]
        v = float(toks[4])
        entries.append((idx, v))
        dims = [max(a, b) for a, b in zip(dims, idx)]
    beta = np.zeros(tuple(d + 1 for d in dims))
    for idx, v in entries:
        beta[tuple(idx)] = v
    return beta


# ============================================================
# bundle
# ============================================================

@dataclass
class CalibrationBundle:
    info: CalibrationInfo
    arrivals: list
    zones: list
    alpha: np.ndarray | None = None
    time_groups: TimeGroups | None = None
    cv_weights: list | None = None


def read_calibration_inputs(info_path: str, arrivals_path: str, neighbors_path: str,
                            model_type: str, method: str = "calibration",
                            alpha_path: str | None = None,
                            time_groups_path: str | None = None,
                            cv_weights_path: str | None = None) -> CalibrationBundle:
    """Read the input files a model/method combination requires.

    ``reg`` needs info+arrivals+neighbors.  ``no_reg`` additionally needs the
    weight matrix and time groups; with ``cross_validation`` the group
    weights inside the time-groups file are skipped and a candidate-weights
    file is required instead.
    """
    if model_type not in ("no_reg", "reg"):
        raise ValueError(f"unknown model_type {model_type!r}")
    if method not in ("calibration", "cross_validation"):
        raise ValueError(f"unknown method {method!r}")
    info = read_info(info_path)
    arrivals = read_arrivals(arrivals_path, info)
    zones = read_neighbors(neighbors_path, info)
    bundle = CalibrationBundle(info, arrivals, zones)
    if model_type == "no_reg":
        if alpha_path is None:
            raise ValueError("model no_reg requires the neighbor-weight matrix file")
        if time_groups_path is None:
            raise ValueError("model no_reg requires the time-groups file")
        bundle.alpha = read_alpha(alpha_path, info.R)
        skip = method == "cross_validation"
        bundle.time_groups = read_time_groups(time_groups_path, info.D * info.T,
                                              skip_weights=skip)
        if skip:
            if cv_weights_path is None:
                raise ValueError("cross validation requires the candidate-weights file")
            bundle.cv_weights = read_cv_weights(cv_weights_path)
    return bundle
