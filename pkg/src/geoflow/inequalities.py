"""Geometry reports and the inequality checks between L, D, R, A and K.

Every check is stored as ``lhs <= rhs`` together with an error budget: the
linearized sum of the error bars of the quantities entering both sides.  A
check fails only when ``lhs > rhs + budget``.  Curvature-dependent checks
are evaluated scale-invariantly, so the metric is never rescaled.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field

from . import eigen
from .geodesics import diameter_radius
from .metric import DoubledTriangle, area, curvature_extrema, load_metric
from .shortening import shortest_closed_geodesic

PINCHED_GATE = (4 + math.sqrt(7)) / 8
EIGEN_ERR = 1e-4


@dataclass
class Check:
    name: str
    lhs: float
    rhs: float
    budget: float
    applicable: bool = True
    note: str = ""

    @property
    def margin(self):
        return self.rhs - self.lhs

    @property
    def passed(self):
        if not self.applicable:
            return None
        return bool(self.lhs <= self.rhs + self.budget)

    def to_dict(self):
        d = asdict(self)
        d["margin"] = self.margin if self.applicable else None
        d["pass"] = self.passed
        return d


@dataclass
class GeometryReport:
    """Measured geometry of one metric, with error bars and checks.

    ``delta`` and ``eta = D sqrt(K_min)`` are ``None`` when the curvature
    does not define them (flat or non-positive curvature).
    """

    metric: dict
    D: float
    R: float
    A: float
    L: float
    D_err: float
    R_err: float
    A_err: float
    L_err: float
    K_min: float | None = None
    K_max: float | None = None
    delta: float | None = None
    delta_err: float = 0.0
    K_min_err: float = 0.0
    eta: float | None = None
    eta_err: float = 0.0
    witness_simple: bool | None = None
    witness_kind: str = ""
    checks: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def nonnegative(self):
        return self.K_min is None or self.K_min >= 0

    def to_dict(self):
        d = asdict(self)
        d["checks"] = [c.to_dict() for c in self.checks]
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        checks = doc.pop("checks", [])
        rep = cls(**doc)
        rep.checks = [
            Check(c["name"], c["lhs"], c["rhs"], c["budget"], c["applicable"], c.get("note", "")) for c in checks
        ]
        return rep

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def checks_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "lhs", "rhs", "budget", "margin", "applicable", "pass"])
        for c in self.checks:
            d = c.to_dict()
            w.writerow([c.name, repr(c.lhs), repr(c.rhs), repr(c.budget), d["margin"], c.applicable, d["pass"]])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# building a report


def geometry_report(
    spec,
    resolution=128,
    sweep_resolution=16,
    levels=33,
    jitters=3,
    seed=0,
    curvature_resolution=64,
    area_resolution=64,
    n_sources=200,
    seeds=(),
):
    """Measure D, R, A, L and the curvature data of ``spec``, then run
    :func:`verify_inequalities`.  Deterministic for fixed arguments."""
    timings = {}

    def timed(name, fn):
        t0 = time.perf_counter()
        try:
            return fn()
        except Exception as exc:
            raise type(exc)(f"while computing {name}: {exc}") from exc
        finally:
            timings[name] = time.perf_counter() - t0

    flat = isinstance(spec, DoubledTriangle)
    dr = timed("D,R", lambda: diameter_radius(spec, resolution, n_sources=n_sources))
    A = timed("A", lambda: area(spec, area_resolution))
    A_err = 0.0 if flat else abs(area(spec, 2 * area_resolution) - A) + 1e-12 * A
    est = timed(
        "L",
        lambda: shortest_closed_geodesic(
            spec, seeds=seeds, resolution=sweep_resolution, levels=levels, jitters=jitters, seed=seed
        ),
    )
    rep = GeometryReport(
        metric=spec.to_dict(),
        D=dr.D,
        R=dr.R,
        A=A,
        L=est.L_estimate,
        D_err=dr.D_err,
        R_err=dr.R_err,
        A_err=A_err,
        L_err=est.L_err,
        witness_simple=est.witness.simple,
        witness_kind=est.witness.kind.value,
    )
    if not flat:
        ext = timed("K", lambda: curvature_extrema(spec, curvature_resolution))
        ref = curvature_extrema(spec, 2 * curvature_resolution)
        rep.K_min, rep.K_max = ext.k_min, ext.k_max
        rep.K_min_err = abs(ref.k_min - ext.k_min) + 1e-9 * abs(ext.k_min)
        if ext.delta is not None and ext.k_min > 0:
            rep.delta = ext.delta
            rep.delta_err = abs(ref.delta - ext.delta) + 1e-9
            rk = math.sqrt(ext.k_min)
            rep.eta = rep.D * rk
            rep.eta_err = rep.D_err * rk + rep.D * rep.K_min_err / (2 * rk)
    rep.provenance = {
        "resolution": resolution,
        "sweep_resolution": sweep_resolution,
        "levels": levels,
        "jitters": jitters,
        "seed": seed,
        "curvature_resolution": curvature_resolution,
        "area_resolution": area_resolution,
        "n_sources": n_sources,
    }
    rep.checks = verify_inequalities(rep)
    rep.provenance["seconds"] = {k: round(v, 3) for k, v in timings.items()}
    return rep


# ---------------------------------------------------------------------------
# checks


def refined_rhs(D, delta, eta):
    """``4 D^2 / (delta (2 - sin(eta/2)))`` with ``eta`` clamped to [0, pi]."""
    return 4 * D * D / (delta * (2 - math.sin(min(eta, math.pi) / 2)))


def verify_inequalities(rep):
    """All checks for a report; inapplicable ones are kept and marked N/A."""
    D, R, A, L = rep.D, rep.R, rep.A, rep.L
    dD, dR, dA, dL = rep.D_err, rep.R_err, rep.A_err, rep.L_err
    checks = [
        Check("L<=4D", L, 4 * D, dL + 4 * dD),
        Check("L<=3R", L, 3 * R, dL + 3 * dR, rep.nonnegative, "needs K >= 0"),
        Check("R<=D", R, D, dR + dD),
        Check("witness_simple", 0.0 if rep.witness_simple else 1.0, 0.0, 0.0, rep.nonnegative, "needs K >= 0"),
    ]
    has_delta = rep.delta is not None and rep.eta is not None
    if has_delta:
        delta, dd, eta, de = rep.delta, rep.delta_err, rep.eta, rep.eta_err
        iso = 4 * D * D / delta
        iso_budget = math.pi * dA + 8 * D * dD / delta + iso * dd / delta
        checks.append(Check("piA<=4D^2/delta", math.pi * A, iso, iso_budget))
        ref = refined_rhs(D, delta, eta)
        s = 2 - math.sin(min(eta, math.pi) / 2)
        ref_budget = math.pi * dA + (8 * D * dD / delta + ref * s * dd / delta) / s + ref * 0.5 * abs(math.cos(eta / 2)) * de / s
        checks.append(Check("piA<=4D^2/(delta(2-sin(eta/2)))", math.pi * A, ref, ref_budget))
        checks.append(Check("refined<=plain", ref, iso, 0.0))
        # eigenvalue comparison and Hirsch's bound, after K_min = 1 scaling
        hirsch = 8 * math.pi / (A * rep.K_min)
        h_budget = hirsch * (dA / A + rep.K_min_err / rep.K_min)
        e = min(eta, math.pi)
        lower = eigen.eigenvalue_bounds(e)[0]
        checks.append(Check("2+2(1-sin(eta/2))<=8pi/A", lower, hirsch, h_budget + 0.5 * de))
        mu = eigen.mu(e)
        mu_lo = eigen.mu(max(e - de, 1e-3))
        checks.append(Check("mu(eta)<=8pi/A", mu, hirsch, h_budget + EIGEN_ERR + abs(mu_lo - mu)))
        checks.append(Check("myers: eta<=pi", eta, math.pi, de))
        kling = math.pi / math.sqrt(rep.K_max)
        checks.append(Check("klingenberg: pi/sqrt(K_max)<=D", kling, D, dD + kling * dd))
    else:
        for name in (
            "piA<=4D^2/delta",
            "piA<=4D^2/(delta(2-sin(eta/2)))",
            "refined<=plain",
            "2+2(1-sin(eta/2))<=8pi/A",
            "mu(eta)<=8pi/A",
            "myers: eta<=pi",
            "klingenberg: pi/sqrt(K_max)<=D",
        ):
            checks.append(Check(name, math.nan, math.nan, 0.0, False, "delta undefined"))
    pinched = has_delta and rep.delta - rep.delta_err > PINCHED_GATE
    note = "" if pinched else "needs delta > (4+sqrt7)/8"
    if pinched:
        sd = math.sqrt(rep.delta)
        rhs = 2 * D / sd
        checks.append(Check("L<=2D/sqrt(delta)", L, rhs, dL + 2 * dD / sd + rhs * rep.delta_err / (2 * rep.delta)))
        checks.append(Check("L^2<=piA", L * L, math.pi * A, 2 * L * dL + math.pi * dA))
    else:
        checks.append(Check("L<=2D/sqrt(delta)", math.nan, math.nan, 0.0, False, note))
        checks.append(Check("L^2<=piA", math.nan, math.nan, 0.0, False, note))
    return checks


def all_passed(checks):
    return all(c.passed is not False for c in checks)


# ---------------------------------------------------------------------------
# batch mode


def batch_reports(paths, **kw):
    """Reports for several metric files and a CSV summary of check margins."""
    reports = [geometry_report(load_metric(p), **kw) for p in paths]
    names = []
    for r in reports:
        for c in r.checks:
            if c.name not in names:
                names.append(c.name)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "D", "R", "A", "L", "delta"] + names)
    for p, r in zip(paths, reports):
        margins = {c.name: (c.margin if c.applicable else "NA") for c in r.checks}
        w.writerow([str(p), r.D, r.R, r.A, r.L, r.delta] + [margins.get(n, "NA") for n in names])
    return reports, buf.getvalue()
