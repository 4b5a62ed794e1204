"""Command-line front end.

Two subcommands:

* ``calibrate`` — fit the intensity model (with or without covariates) from
  the six text input formats, writing the estimated rates to a file.
  Options may come from a ``key=value`` config file (``-f``), with any flag
  given on the command line overriding the config value.
* ``discretize`` — turn a raw event CSV into the calibration input files:
  choose a border, a space partition and one or more time schemes, count
  events per cell, and write the arrivals/regions/info files.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import events as events_mod
from . import formats, spatial, temporal
from .covariates import CovariatesProblem
from .engine import Param, cross_validation, projected_gradient_armijo_feasible
from .noreg import RegularizedProblem

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    """Bad options or option values (exit 1)."""


class DataError(Exception):
    """Missing or malformed input data (exit 2)."""


# ------------------------------------------------------------------
# calibrate: option table, config file, resolution
# ------------------------------------------------------------------

#: name -> (type, default, help); None default means "required if the
#: selected model/method needs it".
_CALIB_OPTIONS = {
    "EPS": (float, 1e-5, "feasibility tolerance / intensity floor"),
    "sigma": (float, 0.5, "Armijo sufficient-decrease fraction in (0,1)"),
    "accuracy": (float, 1e-3, "stop when objective minus lower bound <= this"),
    "max_iter": (int, 100, "projected-gradient iteration cap"),
    "lower_lambda": (float, 1e-6, "lower clamp for intensities"),
    "upper_lambda": (float, 1e3, "upper clamp for intensities"),
    "beta_bar": (float, 1.0, "gradient step scale before projection"),
    "cv_proportion": (float, 0.2, "estimation-block fraction per CV fold"),
    "output_file": (str, None, "where to write the calibrated rates"),
    "model_type": (str, "no_reg", "no_reg (penalized) or reg (covariates)"),
    "method": (str, "calibration", "calibration or cross_validation"),
    "algorithm": (str, "feasible", "solver variant (only 'feasible')"),
    "info_file": (str, None, "problem dimensions + observation counts"),
    "arrivals_file": (str, None, "per-sample arrival counts"),
    "neighbors_file": (str, None, "zone table with regressors and neighbors"),
    "alpha_regions_file": (str, None, "RxR spatial smoothing weight matrix"),
    "time_groups_file": (str, None, "time-group indices and weights"),
    "duration": (float, 1.0, "length of one time period, hours"),
    "cv_weights_file": (str, None, "candidate weights for cross-validation"),
}


def _convert(name: str, raw: str, where: str):
    typ = _CALIB_OPTIONS[name][0]
    try:
        return typ(raw)
    except ValueError:
        raise UsageError(f"{where}: option {name} expects "
                         f"{typ.__name__}, got {raw!r}") from None


def _read_config(path: str) -> dict:
    """Parse a key=value config file; '#' starts a comment."""
    if not os.path.isfile(path):
        raise DataError(f"config file not found: {path}")
    pairs = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{ln}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in _CALIB_OPTIONS:
                raise UsageError(f"{path}:{ln}: unknown option {key!r}")
            pairs[key] = _convert(key, val, f"{path}:{ln}")
    return pairs


def _resolve_options(args) -> dict:
    """defaults < config file < command line."""
    config = _read_config(args.config) if args.config else {}
    out = {}
    for name, (_typ, default, _help) in _CALIB_OPTIONS.items():
        cli_val = getattr(args, name)
        if cli_val is not None:
            out[name] = cli_val
        elif name in config:
            out[name] = config[name]
        else:
            out[name] = default
    return out


def _require(opt: dict, *names: str) -> None:
    for name in names:
        if opt[name] is None:
            raise UsageError(f"missing required option --{name}")
        if name.endswith("_file") and name != "output_file" \
                and not os.path.isfile(opt[name]):
            raise DataError(f"{name}: cannot read {opt[name]}")


def run_calibrate(args) -> int:
    opt = _resolve_options(args)

    if opt["model_type"] not in ("no_reg", "reg"):
        raise UsageError(f"model_type must be no_reg or reg, "
                         f"got {opt['model_type']!r}")
    if opt["method"] not in ("calibration", "cross_validation"):
        raise UsageError(f"method must be calibration or cross_validation, "
                         f"got {opt['method']!r}")
    if opt["algorithm"] == "boundary":
        raise UsageError("algorithm 'boundary': unsupported variant")
    if opt["algorithm"] != "feasible":
        raise UsageError(f"unknown algorithm {opt['algorithm']!r}")
    if opt["model_type"] == "reg" and opt["method"] == "cross_validation":
        raise UsageError('with covariates only "calibration" is supported')
    if opt["duration"] <= 0:
        raise UsageError("duration must be positive")

    try:
        param = Param(eps=opt["EPS"], sigma=opt["sigma"],
                      accuracy=opt["accuracy"], max_iter=opt["max_iter"],
                      lower_lambda=opt["lower_lambda"],
                      upper_lambda=opt["upper_lambda"],
                      beta_bar=opt["beta_bar"],
                      cv_proportion=opt["cv_proportion"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    _require(opt, "info_file", "arrivals_file", "neighbors_file",
             "output_file")
    if opt["model_type"] == "no_reg":
        _require(opt, "alpha_regions_file", "time_groups_file")
        if opt["method"] == "cross_validation":
            _require(opt, "cv_weights_file")

    try:
        bundle = formats.read_calibration_inputs(
            opt["info_file"], opt["arrivals_file"], opt["neighbors_file"],
            opt["model_type"], opt["method"],
            alpha_path=opt["alpha_regions_file"],
            time_groups_path=opt["time_groups_file"],
            cv_weights_path=opt["cv_weights_file"])
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from None

    t0 = time.perf_counter()
    if opt["model_type"] == "no_reg":
        code = _calibrate_noreg(opt, param, bundle, args.plot)
    else:
        code = _calibrate_reg(opt, param, bundle, args.plot)
    print(f"wall_time_s {time.perf_counter() - t0:.3f}")
    return code


def _plot_path(output_file: str) -> str:
    return os.path.splitext(output_file)[0] + ".png"


def _build_noreg_problem(opt: dict, bundle) -> RegularizedProblem:
    info = bundle.info
    N, M = formats.arrivals_to_noreg_arrays(bundle.arrivals, info)
    _x, dist, nbr_lists, types = formats.zones_to_arrays(bundle.zones, info)
    tg = bundle.time_groups
    weights = tg.weights if tg.weights is not None else [0.0] * tg.n_groups
    try:
        return RegularizedProblem(
            N=N, M=M,
            durations=np.full(info.D * info.T, opt["duration"]),
            groups=tg.groups, which_group=list(tg.which_group),
            W=np.asarray(weights, dtype=float), w=bundle.alpha,
            dist=dist, type_region=types, neighbors=nbr_lists)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def _calibrate_noreg(opt, param, bundle, plot: bool) -> int:
    problem = _build_noreg_problem(opt, bundle)
    if opt["method"] == "calibration":
        model = problem.model(param)
        res = projected_gradient_armijo_feasible(
            model, param, model.projection(np.ones(problem.N.shape)),
            record_trace=plot)
        formats.write_output_noreg(res.x, opt["output_file"])
        print(f"iterations {res.iterations}")
        print(f"objective {formats.fmt_float(res.f)}")
        print(f"gap {res.gap:.6e}")
        if plot:
            from . import report
            report.plot_convergence(res.trace, _plot_path(opt["output_file"]))
    else:
        sample = formats.arrivals_to_sample(bundle.arrivals, bundle.info)
        cv = cross_validation(param, problem, sample, bundle.cv_weights)
        formats.write_output_noreg(cv.lam, opt["output_file"])
        print(f"best_weight {cv.best_weight:g}")
        print("mean_losses " + " ".join(f"{v:.6e}" for v in cv.mean_losses))
        print(f"cpu_time_s {cv.cpu_time:.3f}")
        if plot:
            from . import report
            report.plot_cv_losses(list(bundle.cv_weights), cv.mean_losses,
                                  cv.best_weight,
                                  _plot_path(opt["output_file"]))
    return EXIT_OK


def _calibrate_reg(opt, param, bundle, plot: bool) -> int:
    info = bundle.info
    N, M = formats.arrivals_to_cov_arrays(bundle.arrivals, info)
    x_mat, _dist, _nbrs, _types = formats.zones_to_arrays(bundle.zones, info)
    try:
        problem = CovariatesProblem(
            N=N, M=M, x=x_mat, durations=np.full(info.T, opt["duration"]))
    except ValueError as exc:
        raise DataError(str(exc)) from None
    model = problem.model(param)
    res = projected_gradient_armijo_feasible(
        model, param,
        model.projection(np.ones((info.C, info.D, info.T, info.J))),
        record_trace=plot)
    formats.write_output_reg(res.x, opt["output_file"])
    print(f"iterations {res.iterations}")
    print(f"objective {formats.fmt_float(res.f)}")
    print(f"gap {res.gap:.6e}")
    if plot:
        from . import report
        report.plot_convergence(res.trace, _plot_path(opt["output_file"]))
    return EXIT_OK


# ------------------------------------------------------------------
# discretize
# ------------------------------------------------------------------

def _parse_space(tokens) -> tuple:
    if not tokens:
        raise UsageError("--space needs a specification")
    kind = tokens[0]
    if kind == "rect":
        if len(tokens) != 3:
            raise UsageError("--space rect NX NY")
        try:
            nx, ny = int(tokens[1]), int(tokens[2])
        except ValueError:
            raise UsageError("--space rect NX NY: integer counts") from None
        if nx <= 0 or ny <= 0:
            raise UsageError("--space rect NX NY: counts must be positive")
        return ("rect", nx, ny)
    if kind == "hex":
        if len(tokens) != 2:
            raise UsageError("--space hex R")
        try:
            r = int(tokens[1])
        except ValueError:
            raise UsageError("--space hex R: integer scale") from None
        return ("hex", r)
    if kind in ("custom", "voronoi"):
        if len(tokens) != 2:
            raise UsageError(f"--space {kind} PATH")
        return (kind, tokens[1])
    raise UsageError(f"unknown space kind {kind!r} "
                     "(expected rect, hex, custom or voronoi)")


def _make_border(spec: str, table) -> spatial.Border:
    if spec == "rectangle":
        return spatial.border_rectangle(
            [(rec.lon, rec.lat) for rec in table.records])
    if spec == "convex":
        return spatial.border_convex(
            [(rec.lon, rec.lat) for rec in table.records])
    if not os.path.isfile(spec):
        raise DataError(f"border file not found: {spec}")
    return spatial.border_from_map(spec)


def _make_regions(space: tuple, border: spatial.Border) -> spatial.RegionSet:
    kind = space[0]
    if kind == "rect":
        return spatial.discretize_rect(border, space[1], space[2])
    if kind == "hex":
        return spatial.discretize_hex(border, space[1])
    path = space[1]
    if not os.path.isfile(path):
        raise DataError(f"--space {kind}: file not found: {path}")
    if kind == "custom":
        return spatial.discretize_custom_file(border, path)
    return spatial.discretize_voronoi_file(border, path)


def run_discretize(args) -> int:
    space = _parse_space(args.space)
    schemes = []
    for spec_text in args.time:
        try:
            schemes.append(temporal.scheme_from_text(spec_text))
        except (ValueError, OSError) as exc:
            raise UsageError(f"--time {spec_text!r}: {exc}") from None
    if not schemes:
        raise UsageError("at least one --time scheme is required")

    features = []
    for item in args.features or []:
        features.extend(s for s in item.split(",") if s)

    if not os.path.isfile(args.events):
        raise DataError(f"events file not found: {args.events}")
    try:
        table = events_mod.load_events(
            args.events, args.datetime_col, args.lat_col, args.lon_col,
            feature_cols=features, datetime_format=args.datetime_format)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    if not table.records:
        raise DataError(f"{args.events}: no event rows")

    try:
        border = _make_border(args.border, table)
        rs = _make_regions(space, border)
    except ValueError as exc:
        raise DataError(str(exc)) from None

    agg = events_mod.aggregate(table, schemes, rs)
    print(f"regions {len(rs)}")
    print(f"events {len(table.records)}")
    print(f"dropped_outside {agg.dropped_outside}")

    if args.out_regions:
        try:
            events_mod.write_regions(rs, args.out_regions,
                                     regressor_names=args.regressors or [])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        print(f"wrote regions {args.out_regions}")
    if args.out_arrivals:
        try:
            events_mod.write_arrivals(agg, args.out_arrivals)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        print(f"wrote arrivals {args.out_arrivals}")
    if args.out_info:
        try:
            # the info header must declare the same regressor count the zone
            # table carries, or the bundle cannot be read back as a whole
            events_mod.write_info(agg, args.out_info,
                                  n_regressors=len(args.regressors or []))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        print(f"wrote info {args.out_info}")
    if args.plot:
        from . import report
        png = (os.path.splitext(args.out_regions)[0] + ".png"
               if args.out_regions else "regions.png")
        report.plot_regions(rs, png,
                            points=[(r.lon, r.lat) for r in table.records])
        print(f"wrote plot {png}")
    return EXIT_OK


# ------------------------------------------------------------------
# parser / entry point
# ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rategrid", allow_abbrev=False,
        description="Spatio-temporal arrival-rate estimation toolkit.")
    sub = parser.add_subparsers(dest="cmd", required=True)

    cal = sub.add_parser(
        "calibrate", allow_abbrev=False,
        help="fit intensities from the text input files",
        description="Fit the arrival-intensity model. Options come from "
                    "defaults, then the -f config file, then the command "
                    "line (later wins).")
    cal.add_argument("-f", "--config", metavar="FILE",
                     help="key=value option file ('#' comments)")
    for name, (typ, default, help_text) in _CALIB_OPTIONS.items():
        shown = default if default is not None else "required"
        cal.add_argument(f"--{name}", type=typ, default=None,
                         help=f"{help_text} (default: {shown})")
    cal.add_argument("--plot", action="store_true",
                     help="also render a PNG figure next to the output file")

    dis = sub.add_parser(
        "discretize", allow_abbrev=False,
        help="aggregate an event CSV into calibration input files",
        description="Count events on a space/time grid and write the "
                    "arrivals, regions and info files.")
    dis.add_argument("--events", required=True, help="event CSV file")
    dis.add_argument("--datetime-col", default="date_time",
                     help="timestamp column name (default: date_time)")
    dis.add_argument("--lat-col", default="lat",
                     help="latitude column name (default: lat)")
    dis.add_argument("--lon-col", default="long",
                     help="longitude column name (default: long)")
    dis.add_argument("--datetime-format", default=None,
                     help="strptime format; default tries ISO and dd/mm/yyyy")
    dis.add_argument("--features", action="append", metavar="COLS",
                     help="categorical feature columns (comma separated, "
                          "repeatable)")
    dis.add_argument("--border", default="rectangle", metavar="SPEC",
                     help="rectangle | convex | GeoJSON path "
                          "(default: rectangle)")
    dis.add_argument("--space", nargs="+", required=True, metavar="SPEC",
                     help="rect NX NY | hex R | custom PATH | voronoi PATH")
    dis.add_argument("--time", action="append", default=[], metavar="SPEC",
                     help="time scheme UNIT:WIDTH:PERIOD, "
                          "UNIT:D1,D2,..:PERIOD or custom:PATH (repeatable)")
    dis.add_argument("--regressors", action="append", metavar="NAME",
                     help="region attribute to emit as a regressor column "
                          "(repeatable)")
    dis.add_argument("--out-arrivals", metavar="FILE",
                     help="write the arrivals sample file")
    dis.add_argument("--out-regions", metavar="FILE",
                     help="write the zone/neighbor table")
    dis.add_argument("--out-info", metavar="FILE",
                     help="write the dimensions/observations file")
    dis.add_argument("--plot", action="store_true",
                     help="also render the region map as a PNG")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        if args.cmd == "calibrate":
            return run_calibrate(args)
        return run_discretize(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
