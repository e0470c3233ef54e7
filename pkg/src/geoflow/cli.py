"""Command-line interface: ``geoflow <command> [metric.json] [options]``.

Exit status is 0 on success, 1 on a computation error (or a failed check in
``verify``) and 2 on bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import eigen
from .errors import GeoflowError, MetricConfigError
from .geodesics import connect
from .inequalities import all_passed, geometry_report
from .metric import Chart, ConformalRound, Ellipsoid, SurfacePoint, load_metric, point_from_sphere
from .shortening import birkhoff_flow, level_curve, meridian_theta, net_flow


class InputError(Exception):
    """Bad command-line input (exit status 2)."""


def _threads():
    try:
        n = int(os.environ.get("GEOFLOW_THREADS", "1"))
    except ValueError as exc:
        raise InputError("GEOFLOW_THREADS must be an integer") from exc
    return max(1, min(n, os.cpu_count() or 1))


def _write(text, out):
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _metric(args):
    path = args.metric_file or args.metric
    if path is None:
        raise InputError("a metric file is required")
    try:
        return load_metric(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc


def _point(text):
    """``x,y,z`` on the unit sphere or ``CHART:x,y`` in chart coordinates."""
    try:
        if ":" in text:
            name, rest = text.split(":", 1)
            x = [float(v) for v in rest.split(",")]
            if len(x) != 2:
                raise ValueError
            return SurfacePoint(Chart[name.strip().upper()], np.array(x))
        u = np.array([float(v) for v in text.split(",")])
        if u.shape != (3,) or np.linalg.norm(u) == 0:
            raise ValueError
        return point_from_sphere(u / np.linalg.norm(u))
    except (KeyError, ValueError) as exc:
        raise InputError(f"cannot parse point {text!r}; use x,y,z or CHART:x,y") from exc


def _floats(text, n=None):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise InputError(f"cannot parse {text!r} as numbers") from exc
    if n is not None and len(vals) != n:
        raise InputError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def _range(text):
    """``start:stop:step`` inclusive of ``stop``."""
    try:
        a, b, h = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise InputError(f"range must be start:stop:step, got {text!r}") from exc
    if h <= 0 or b < a:
        raise InputError(f"empty range {text!r}")
    k = int(math.floor((b - a) / h + 1e-9))
    return [round(a + i * h, 12) for i in range(k + 1)]


def _report_kwargs(args):
    if args.resolution < 64:
        raise InputError("--resolution must be at least 64")
    if args.levels < 1:
        raise InputError("--levels must be positive")
    return {"resolution": args.resolution, "seed": args.seed, "levels": args.levels}


# ---------------------------------------------------------------------------
# subcommands


def cmd_report(args):
    rep = geometry_report(_metric(args), **_report_kwargs(args))
    _write(rep.checks_csv() if args.format == "csv" else rep.to_json(indent=2), args.out)
    return 0


def cmd_verify(args):
    rep = geometry_report(_metric(args), **_report_kwargs(args))
    if args.format == "json":
        _write(rep.to_json(indent=2), args.out)
    else:
        _write(rep.checks_csv(), args.out)
    return 0 if all_passed(rep.checks) else 1


def cmd_geodesic(args):
    spec = _metric(args)
    p, q = _point(args.start), _point(args.end)
    curve = connect(spec, p, q, tol=args.tol)
    _write(curve.to_csv(), args.out)
    return 0


def cmd_shorten(args):
    spec = _metric(args)
    trace = []
    if args.theta:
        weights = tuple(_floats(args.weights, 3))
        th = meridian_theta(spec, weights=weights)
        out = net_flow(spec, th, weights=weights, tol=args.tol, trace=trace)
    else:
        curve = level_curve(spec, args.level, args.nodes)
        out = birkhoff_flow(spec, curve, tol=args.tol, trace=trace)
    _write(out.to_json(indent=2), args.out)
    if args.trace:
        out.write_trace(args.trace)
    return 0


def cmd_slp(args):
    if args.d is None:
        raise InputError("--d is required")
    try:
        prob = eigen.SLProblem(args.d, args.k, args.grid)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if args.transformed:
        if args.k <= 0:
            raise InputError("--transformed needs k > 0")
        res = eigen.slp_first_eigenvalue(prob.transformed())
    else:
        res = eigen.slp_first_eigenvalue(prob)
    lower = upper = None
    if args.k > 0:
        lo, up = eigen.eigenvalue_bounds(prob.scaled_d)
        lower = args.k * lo
        upper = None if up is None else args.k * up
    doc = {"d": args.d, "k": args.k, "mu": res.mu, "lower": lower, "upper": upper, "grid_shift": res.grid_shift}
    doc.update({k: v for k, v in res.to_dict().items() if k not in doc})
    _write(json.dumps(doc, indent=2), args.out)
    return 0


_CHECKS = {
    "pinched": "L<=2D/sqrt(delta)",
    "4D": "L<=4D",
    "3R": "L<=3R",
    "iso": "piA<=4D^2/delta",
    "refined": "piA<=4D^2/(delta(2-sin(eta/2)))",
}


def _sweep_item(job):
    family, value, check, kw = job
    spec = Ellipsoid((1.0, 1.0, value)) if family == "ellipsoid" else ConformalRound(coeffs=((2, 0, 1.0),), t=value)
    rep = geometry_report(spec, **kw)
    chk = next(c for c in rep.checks if c.name == _CHECKS[check])
    margin = chk.margin if chk.applicable else "NA"
    passed = "NA" if chk.passed is None else chk.passed
    return [value, rep.delta, rep.D, rep.L, margin, passed]


def cmd_sweep(args):
    if args.family == "ellipsoid":
        values = _range(args.c)
    else:
        values = _range(args.t)
    jobs = [(args.family, v, args.check, _report_kwargs(args)) for v in values]
    n = _threads()
    if n > 1:
        with ProcessPoolExecutor(n) as ex:
            rows = list(ex.map(_sweep_item, jobs))
    else:
        rows = [_sweep_item(j) for j in jobs]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["c" if args.family == "ellipsoid" else "t", "delta", "D", "L", "margin", "pass"])
    w.writerows(rows)
    _write(buf.getvalue(), args.out)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser():
    p = argparse.ArgumentParser(prog="geoflow", description="Closed geodesics, nets and isoperimetric checks on 2-spheres.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, metric=True):
        if metric:
            sp.add_argument("metric_file", nargs="?", help="metric JSON document")
            sp.add_argument("--metric", help="metric JSON document (alternative to the positional argument)")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default="json", help="output format (default: json)")
        sp.add_argument("--seed", type=int, default=0, help="random seed for sweep-out jitters (default: 0)")

    def numerics(sp):
        sp.add_argument("--resolution", type=int, default=128, help="distance-field resolution, >= 64 (default: 128)")
        sp.add_argument("--levels", type=int, default=33, help="sweep-out levels (default: 33)")

    sp = sub.add_parser("report", help="geometry report as JSON (or check CSV)")
    common(sp)
    numerics(sp)
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("verify", help="inequality checks as CSV; exit 1 if a check fails")
    common(sp)
    numerics(sp)
    sp.set_defaults(func=cmd_verify, format="csv")

    sp = sub.add_parser("geodesic", help="geodesic between two points as curve CSV")
    common(sp)
    sp.add_argument("--from", dest="start", required=True, help="start point, x,y,z or CHART:x,y")
    sp.add_argument("--to", dest="end", required=True, help="end point, x,y,z or CHART:x,y")
    sp.add_argument("--tol", type=float, default=1e-8, help="break-residual tolerance (default: 1e-8)")
    sp.set_defaults(func=cmd_geodesic)

    sp = sub.add_parser("shorten", help="Birkhoff flow of a level curve, or weighted theta flow")
    common(sp)
    sp.add_argument("--level", type=float, default=0.3, help="sweep coordinate of the initial level curve (default: 0.3)")
    sp.add_argument("--nodes", type=int, default=32, help="nodes of the initial curve (default: 32)")
    sp.add_argument("--theta", action="store_true", help="flow the meridian theta-graph instead")
    sp.add_argument("--weights", default="1,1,1", help="theta edge weights (default: 1,1,1)")
    sp.add_argument("--tol", type=float, default=1e-8, help="stationarity tolerance (default: 1e-8)")
    sp.add_argument("--trace", help="write the per-iteration trace as JSON lines")
    sp.set_defaults(func=cmd_shorten)

    sp = sub.add_parser("slp", help="first eigenvalue of the comparison Sturm-Liouville problem")
    common(sp, metric=False)
    sp.add_argument("--d", type=float, help="interval length")
    sp.add_argument("--k", type=float, default=1.0, help="curvature bound (default: 1)")
    sp.add_argument("--grid", type=int, default=512, help="initial grid size, >= 256 (default: 512)")
    sp.add_argument("--transformed", action="store_true", help="solve the sech^2 form only")
    sp.set_defaults(func=cmd_slp)

    sp = sub.add_parser("sweep", help="one CSV row per parameter value of a metric family")
    common(sp, metric=False)
    numerics(sp)
    sp.add_argument("--family", choices=("ellipsoid", "conformal"), default="ellipsoid")
    sp.add_argument("--c", default="1.0:1.2:0.05", help="ellipsoid axis range start:stop:step")
    sp.add_argument("--t", default="0.0:0.1:0.05", help="conformal parameter range start:stop:step")
    sp.add_argument("--check", choices=sorted(_CHECKS), default="pinched", help="check whose margin is reported")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, MetricConfigError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    except (GeoflowError, ArithmeticError, ValueError, AssertionError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
