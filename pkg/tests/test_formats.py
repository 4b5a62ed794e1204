"""Tests for the calibration text formats: parsing, validation, round-trips."""

from __future__ import annotations

import numpy as np
import pytest

from rategrid import formats
from rategrid.formats import (ArrivalEntry, CalibrationInfo, TimeGroups,
                              ZoneRow)


# ------------------------------------------------------------------
# helpers
# ------------------------------------------------------------------

def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def _minimal_info(tmp_path):
    return _write(tmp_path / "info.txt", "1 7 1 1 1 0\n1 1 1 1 1 1 1\n")


# ------------------------------------------------------------------
# float formatting
# ------------------------------------------------------------------

def test_fmt_float_17_significant_digits():
    assert formats.fmt_float(2.0) == "2.0000000000000000"
    assert formats.fmt_float(1.0 / 3.0) == "0.33333333333333331"


def test_fmt_float_round_trips_doubles():
    rng = np.random.default_rng(7)
    for x in rng.standard_normal(200) * 10.0 ** rng.integers(-8, 8, 200):
        assert float(formats.fmt_float(x)) == x


# ------------------------------------------------------------------
# info
# ------------------------------------------------------------------

def test_read_info_minimal(tmp_path):
    info = formats.read_info(_minimal_info(tmp_path))
    assert (info.T, info.G, info.R, info.C, info.J, info.H) == (1, 7, 1, 1, 1, 0)
    assert info.n_days == [1] * 7
    assert info.D == 7


def test_read_info_with_holidays(tmp_path):
    p = _write(tmp_path / "info.txt", "4 7 2 1 0 2\n5 5 5 5 5 4 4 1 1\n")
    info = formats.read_info(p)
    assert info.H == 2 and info.D == 9
    assert info.n_days == [5, 5, 5, 5, 5, 4, 4, 1, 1]


def test_read_info_wrong_day_count(tmp_path):
    p = _write(tmp_path / "info.txt", "1 7 1 1 1 0\n1 1 1\n")
    with pytest.raises(ValueError, match="7 day-class"):
        formats.read_info(p)


def test_read_info_bad_header(tmp_path):
    p = _write(tmp_path / "info.txt", "1 7 1\n1 1 1 1 1 1 1\n")
    with pytest.raises(ValueError, match="expected 6"):
        formats.read_info(p)


def test_info_round_trip(tmp_path):
    info = CalibrationInfo(48, 7, 10, 3, 2, 1, [52, 52, 52, 52, 52, 53, 53, 8])
    p = tmp_path / "info.txt"
    formats.write_info(info, str(p))
    again = formats.read_info(str(p))
    assert again == info


# ------------------------------------------------------------------
# arrivals
# ------------------------------------------------------------------

def test_read_arrivals_basic(tmp_path):
    info = formats.read_info(_minimal_info(tmp_path))
    p = _write(tmp_path / "arr.txt", "0 0 0 0 0 3 0\n0 6 0 0 0 1 0\n")
    entries = formats.read_arrivals(p, info)
    assert len(entries) == 2
    assert entries[0] == ArrivalEntry(0, 0, 0, 0, 0, 3, 0)


@pytest.mark.parametrize("line,msg", [
    ("1 0 0 0 0 1 0", "time period"),
    ("0 7 0 0 0 1 0", "day class"),
    ("0 0 1 0 0 1 0", "zone"),
    ("0 0 0 1 0 1 0", "arrival type"),
    ("0 0 0 0 1 1 0", "observation"),
    ("0 0 0 0 0 -1 0", "negative count"),
    ("0 0 0 0 0 1 2", "holiday flag"),
    ("0 0 0 0 0 1", "expected 7"),
])
def test_read_arrivals_range_errors(tmp_path, line, msg):
    info = formats.read_info(_minimal_info(tmp_path))
    p = _write(tmp_path / "arr.txt", line + "\n")
    with pytest.raises(ValueError, match=msg):
        formats.read_arrivals(p, info)


def test_arrivals_holiday_flag_consistency(tmp_path):
    p = _write(tmp_path / "info.txt", "1 7 1 1 0 1\n1 1 1 1 1 1 1 1\n")
    info = formats.read_info(p)
    # day class 7 is the holiday class: flag must be 1 there and 0 below
    arr = _write(tmp_path / "a1.txt", "0 7 0 0 0 2 1\n")
    entries = formats.read_arrivals(arr, info)
    assert entries[0].holiday == 1
    bad1 = _write(tmp_path / "a2.txt", "0 7 0 0 0 2 0\n")
    with pytest.raises(ValueError, match="inconsistent"):
        formats.read_arrivals(bad1, info)
    bad2 = _write(tmp_path / "a3.txt", "0 3 0 0 0 2 1\n")
    with pytest.raises(ValueError, match="inconsistent"):
        formats.read_arrivals(bad2, info)


def test_arrivals_round_trip_bit_exact(tmp_path):
    info = CalibrationInfo(2, 7, 2, 1, 0, 0, [3] * 7)
    rng = np.random.default_rng(3)
    entries = [ArrivalEntry(t, g, r, 0, j, int(rng.integers(0, 9)), 0)
               for t in range(2) for g in range(7) for r in range(2)
               for j in range(3)]
    p1, p2 = tmp_path / "a1.txt", tmp_path / "a2.txt"
    formats.write_arrivals_file(entries, str(p1))
    again = formats.read_arrivals(str(p1), info)
    formats.write_arrivals_file(again, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_arrivals_to_noreg_arrays(tmp_path):
    info = CalibrationInfo(2, 7, 1, 1, 0, 0, [2, 2, 2, 2, 2, 1, 1])
    entries = [ArrivalEntry(1, 3, 0, 0, 0, 5, 0), ArrivalEntry(1, 3, 0, 0, 1, 2, 0)]
    N, M = formats.arrivals_to_noreg_arrays(entries, info)
    assert N.shape == M.shape == (1, 1, 14)
    # day-major time index: g*T + t
    assert M[0, 0, 3 * 2 + 1] == 7
    assert M.sum() == 7
    assert N[0, 0, 3 * 2 + 1] == 2
    assert N[0, 0, 5 * 2] == 1  # Saturday has one observed day


def test_arrivals_to_sample():
    info = CalibrationInfo(2, 7, 1, 1, 0, 0, [2, 2, 2, 2, 2, 1, 1])
    entries = [ArrivalEntry(1, 3, 0, 0, 0, 5, 0), ArrivalEntry(1, 3, 0, 0, 1, 2, 0)]
    sample = formats.arrivals_to_sample(entries, info)
    assert len(sample) == 1 and len(sample[0]) == 1 and len(sample[0][0]) == 14
    assert sample[0][0][3 * 2 + 1] == [5, 2]
    assert sample[0][0][3 * 2] == [0, 0]
    assert sample[0][0][5 * 2] == [0]  # Saturday observed once
    # totals agree with the dense builder
    _, M = formats.arrivals_to_noreg_arrays(entries, info)
    assert sum(sum(s) for s in sample[0][0]) == M.sum()


def test_arrivals_to_cov_arrays():
    info = CalibrationInfo(3, 7, 2, 2, 1, 0, [4] * 7)
    entries = [ArrivalEntry(2, 6, 1, 1, 3, 9, 0)]
    N, M = formats.arrivals_to_cov_arrays(entries, info)
    assert N.shape == M.shape == (2, 7, 3, 2)
    assert M[1, 6, 2, 1] == 9
    assert np.all(N == 4)


# ------------------------------------------------------------------
# neighbors
# ------------------------------------------------------------------

def test_read_neighbors(tmp_path):
    p = _write(tmp_path / "info.txt", "1 7 2 1 1 0\n1 1 1 1 1 1 1\n")
    info = formats.read_info(p)
    nb = _write(tmp_path / "nb.txt",
                "0 -22.9 -43.2 0 10.5 1 3.25\n"
                "1 -22.8 -43.1 1 7.0 0 3.25\n")
    zones = formats.read_neighbors(nb, info)
    assert [z.id for z in zones] == [0, 1]
    assert zones[0].regressors == [10.5]
    assert zones[0].neighbors == [(1, 3.25)]
    assert zones[1].type == 1


def test_read_neighbors_errors(tmp_path):
    p = _write(tmp_path / "info.txt", "1 7 2 1 0 0\n1 1 1 1 1 1 1\n")
    info = formats.read_info(p)
    with pytest.raises(ValueError, match="expected 2 zone lines"):
        formats.read_neighbors(_write(tmp_path / "n1.txt", "0 0.0 0.0 0\n"), info)
    with pytest.raises(ValueError, match="duplicate zone id"):
        formats.read_neighbors(
            _write(tmp_path / "n2.txt", "0 0.0 0.0 0\n0 1.0 1.0 0\n"), info)
    with pytest.raises(ValueError, match="pairs"):
        formats.read_neighbors(
            _write(tmp_path / "n3.txt", "0 0.0 0.0 0 1\n1 0.0 0.0 0\n"), info)
    with pytest.raises(ValueError, match="out of range"):
        formats.read_neighbors(
            _write(tmp_path / "n4.txt", "0 0.0 0.0 0 5 1.0\n1 0.0 0.0 0\n"), info)


def test_neighbors_round_trip_bit_exact(tmp_path):
    info = CalibrationInfo(1, 7, 3, 1, 2, 0, [1] * 7)
    zones = [
        ZoneRow(0, -22.9, -43.2, 0, [1.25, 0.5], [(1, 2.5), (2, 3.75)]),
        ZoneRow(1, -22.85, -43.15, 0, [2.0, 1.0], [(0, 2.5)]),
        ZoneRow(2, -22.8, -43.1, 1, [0.0, 3.5], [(0, 3.75)]),
    ]
    p1, p2 = tmp_path / "z1.txt", tmp_path / "z2.txt"
    formats.write_neighbors(zones, str(p1))
    again = formats.read_neighbors(str(p1), info)
    formats.write_neighbors(again, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_zones_to_arrays():
    info = CalibrationInfo(1, 7, 2, 1, 1, 0, [1] * 7)
    zones = [ZoneRow(0, 0.0, 0.0, 0, [4.0], [(1, 9.0)]),
             ZoneRow(1, 0.0, 1.0, 2, [5.0], [(0, 9.0)])]
    x, dist, nbrs, types = formats.zones_to_arrays(zones, info)
    assert x.shape == (1, 2) and x[0, 1] == 5.0
    assert dist[0, 1] == dist[1, 0] == 9.0
    assert nbrs == [[1], [0]]
    assert types == [0, 2]


# ------------------------------------------------------------------
# alpha
# ------------------------------------------------------------------

def test_read_alpha(tmp_path):
    p = _write(tmp_path / "al.txt", "0 1\n1 0\n")
    m = formats.read_alpha(p, 2)
    assert np.array_equal(m, np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_read_alpha_errors(tmp_path):
    with pytest.raises(ValueError, match="expected 2 rows"):
        formats.read_alpha(_write(tmp_path / "a1.txt", "0 1\n"), 2)
    with pytest.raises(ValueError, match="symmetric"):
        formats.read_alpha(_write(tmp_path / "a2.txt", "0 1\n2 0\n"), 2)
    with pytest.raises(ValueError, match="non-negative"):
        formats.read_alpha(_write(tmp_path / "a3.txt", "0 -1\n-1 0\n"), 2)


def test_alpha_round_trip(tmp_path):
    m = np.array([[0.0, 0.5, 0.0], [0.5, 0.0, 2.0], [0.0, 2.0, 0.0]])
    p = tmp_path / "al.txt"
    formats.write_alpha(m, str(p))
    assert np.array_equal(formats.read_alpha(str(p), 3), m)


# ------------------------------------------------------------------
# time groups
# ------------------------------------------------------------------

def test_read_time_groups_with_weights(tmp_path):
    p = _write(tmp_path / "tg.txt", "2\n0 0 1 1\n0.5 1.5\n")
    tg = formats.read_time_groups(p, 4)
    assert tg.n_groups == 2
    assert tg.which_group == [0, 0, 1, 1]
    assert tg.weights == [0.5, 1.5]
    assert tg.groups == [[0, 1], [2, 3]]


def test_read_time_groups_skip_weights(tmp_path):
    p = _write(tmp_path / "tg.txt", "2\n0 0 1 1\n")
    tg = formats.read_time_groups(p, 4, skip_weights=True)
    assert tg.weights is None
    # a file WITH a weight block also works (the block is ignored): the same
    # file serves both methods
    p2 = _write(tmp_path / "tg2.txt", "2\n0 0 1 1\n0.5 1.5\n")
    tg2 = formats.read_time_groups(p2, 4, skip_weights=True)
    assert tg2.weights is None and tg2.which_group == [0, 0, 1, 1]
    # but anything that is neither absent nor a full weight block is junk
    p3 = _write(tmp_path / "tg3.txt", "2\n0 0 1 1\n0.5\n")
    with pytest.raises(ValueError, match="trailing"):
        formats.read_time_groups(p3, 4, skip_weights=True)


def test_read_time_groups_errors(tmp_path):
    with pytest.raises(ValueError, match="out of range"):
        formats.read_time_groups(_write(tmp_path / "t1.txt", "2\n0 5 1 1\n0 0\n"), 4)
    with pytest.raises(ValueError, match="unexpected end"):
        formats.read_time_groups(_write(tmp_path / "t2.txt", "2\n0 0\n"), 4)
    with pytest.raises(ValueError, match="non-negative"):
        formats.read_time_groups(_write(tmp_path / "t3.txt", "1\n0 0 0 0\n-1\n"), 4)


def test_time_groups_round_trip(tmp_path):
    tg = TimeGroups(3, [0, 1, 2, 1, 0, 2], [0.0, 10.0, 0.25])
    p1, p2 = tmp_path / "g1.txt", tmp_path / "g2.txt"
    formats.write_time_groups(tg, str(p1))
    again = formats.read_time_groups(str(p1), 6)
    formats.write_time_groups(again, str(p2))
    assert p1.read_bytes() == p2.read_bytes()


# ------------------------------------------------------------------
# cross-validation weights
# ------------------------------------------------------------------

def test_read_cv_weights(tmp_path):
    p = _write(tmp_path / "w.txt", "0 0.1 1 10 100\n")
    assert formats.read_cv_weights(p) == [0.0, 0.1, 1.0, 10.0, 100.0]


def test_read_cv_weights_negative(tmp_path):
    p = _write(tmp_path / "w.txt", "0.1 -2\n")
    with pytest.raises(ValueError, match="Each weight must non negative"):
        formats.read_cv_weights(p)


# ------------------------------------------------------------------
# outputs
# ------------------------------------------------------------------

def test_output_noreg_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    lam = rng.uniform(0.01, 5.0, size=(2, 3, 4))
    p = tmp_path / "out.txt"
    formats.write_output_noreg(lam, str(p))
    first = p.read_text().splitlines()[0].split()
    assert first[:3] == ["0", "0", "0"] and len(first) == 4
    again = formats.read_output_noreg(str(p))
    assert np.array_equal(again, lam)


def test_output_reg_round_trip(tmp_path):
    rng = np.random.default_rng(12)
    beta = rng.uniform(0.0, 2.0, size=(1, 7, 2, 3))
    p = tmp_path / "out.txt"
    formats.write_output_reg(beta, str(p))
    line = p.read_text().splitlines()[-1].split()
    assert line[:4] == ["0", "6", "1", "2"]
    again = formats.read_output_reg(str(p))
    assert np.array_equal(again, beta)


# ------------------------------------------------------------------
# bundle
# ------------------------------------------------------------------

def _full_inputs(tmp_path):
    info = _write(tmp_path / "info.txt", "2 7 2 1 1 0\n1 1 1 1 1 1 1\n")
    arr = _write(tmp_path / "arr.txt", "0 0 0 0 0 2 0\n1 4 1 0 0 3 0\n")
    nb = _write(tmp_path / "nb.txt", "0 0.0 0.0 0 1.0 1 5.0\n1 0.0 0.1 0 2.0 0 5.0\n")
    al = _write(tmp_path / "al.txt", "0 1\n1 0\n")
    tg = _write(tmp_path / "tg.txt", "1\n" + " ".join("0" * 1 for _ in range(14)) + "\n2.5\n")
    tg_nw = _write(tmp_path / "tgnw.txt", "1\n" + " ".join("0" * 1 for _ in range(14)) + "\n")
    w = _write(tmp_path / "w.txt", "0 1 10\n")
    return info, arr, nb, al, tg, tg_nw, w


def test_bundle_reg(tmp_path):
    info, arr, nb, al, tg, tg_nw, w = _full_inputs(tmp_path)
    b = formats.read_calibration_inputs(info, arr, nb, model_type="reg")
    assert b.alpha is None and b.time_groups is None and b.cv_weights is None
    assert len(b.arrivals) == 2 and len(b.zones) == 2


def test_bundle_noreg_calibration(tmp_path):
    info, arr, nb, al, tg, tg_nw, w = _full_inputs(tmp_path)
    b = formats.read_calibration_inputs(info, arr, nb, model_type="no_reg",
                                        alpha_path=al, time_groups_path=tg)
    assert b.alpha is not None
    assert b.time_groups.weights == [2.5]
    assert len(b.time_groups.which_group) == 14


def test_bundle_noreg_cv_skips_group_weights(tmp_path):
    info, arr, nb, al, tg, tg_nw, w = _full_inputs(tmp_path)
    b = formats.read_calibration_inputs(info, arr, nb, model_type="no_reg",
                                        method="cross_validation",
                                        alpha_path=al, time_groups_path=tg_nw,
                                        cv_weights_path=w)
    assert b.time_groups.weights is None
    assert b.cv_weights == [0.0, 1.0, 10.0]


def test_bundle_missing_requirements(tmp_path):
    info, arr, nb, al, tg, tg_nw, w = _full_inputs(tmp_path)
    with pytest.raises(ValueError, match="weight matrix"):
        formats.read_calibration_inputs(info, arr, nb, model_type="no_reg")
    with pytest.raises(ValueError, match="time-groups"):
        formats.read_calibration_inputs(info, arr, nb, model_type="no_reg",
                                        alpha_path=al)
    with pytest.raises(ValueError, match="candidate-weights"):
        formats.read_calibration_inputs(info, arr, nb, model_type="no_reg",
                                        method="cross_validation",
                                        alpha_path=al, time_groups_path=tg_nw)
    with pytest.raises(ValueError, match="model_type"):
        formats.read_calibration_inputs(info, arr, nb, model_type="boundary")
