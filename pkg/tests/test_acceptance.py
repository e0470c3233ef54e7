"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are collected in
the "acceptance criteria" section of the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE, SQRT3, conformal
from geoflow.eigen import SLProblem, eigenvalue_bounds, slp_first_eigenvalue, taylor_at_pi
from geoflow.geodesics import connect, distance_field
from geoflow.inequalities import geometry_report
from geoflow.metric import DoubledTriangle, Ellipsoid, Round, chart_grid, fd_gauss_curvature, point_from_sphere
from geoflow.shortening import FlowKind, meridian_theta, net_flow, triangle_theta
from geoflow.triangle import lattice_for
from geoflow.variation import (
    fd_first_variation,
    fd_second_variation,
    fd_theta_variations,
    first_variation,
    second_variation,
    theta_destabilizing_field,
    theta_first_variation,
    theta_second_variation,
)
from test_variation import random_case

CORPUS = {
    "round": Round(1.0),
    "ellipsoid c=1.05": Ellipsoid((1.0, 1.0, 1.05)),
    "ellipsoid c=1.1": Ellipsoid((1.0, 1.0, 1.1)),
    "ellipsoid c=1.2": Ellipsoid((1.0, 1.0, 1.2)),
    "conformal t=0.02": conformal(0.02),
    "conformal t=0.05": conformal(0.05),
    "conformal t=0.1": conformal(0.1),
    "doubled triangle": DoubledTriangle(1.0),
}


class Criterion:
    """Collects named conditions and records one summary line."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.failed = []
        self.notes = []

    def require(self, ok, what):
        if not ok:
            self.failed.append(what)
        return ok

    def note(self, text):
        self.notes.append(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None:
            self.failed.append(f"{exc_type.__name__}: {exc}")
        status = "PASS" if not self.failed else "FAIL"
        detail = "; ".join(self.failed if self.failed else self.notes)
        line = f"criterion {self.number} {status}: {self.title}" + (f" ({detail})" if detail else "")
        ACCEPTANCE[self.number] = line
        print(line)
        return False

    def check(self):
        assert not self.failed, f"criterion {self.number}: " + "; ".join(self.failed)


@pytest.fixture(scope="module")
def reports():
    out, seconds = {}, {}
    for name, spec in CORPUS.items():
        t0 = time.perf_counter()
        out[name] = geometry_report(spec)
        seconds[name] = time.perf_counter() - t0
    return out, seconds


def close(x, y, tol):
    return abs(x - y) <= tol


def test_criterion_1_round_sphere(reports):
    reps, seconds = reports
    r = reps["round"]
    with Criterion(1, "round sphere exactness") as c:
        c.require(close(r.D, math.pi, 0.02), f"D={r.D:.5f}")
        c.require(close(r.R, math.pi, 0.02), f"R={r.R:.5f}")
        c.require(close(r.A, 4 * math.pi, 1e-3 * 4 * math.pi), f"A={r.A:.6f}")
        c.require(close(r.L, 2 * math.pi, 1e-3), f"L={r.L:.8f}")
        iso = next(k for k in r.checks if k.name == "piA<=4D^2/delta")
        c.require(iso.passed and abs(iso.margin) <= iso.budget, f"iso margin {iso.margin:.3g} budget {iso.budget:.3g}")
        c.require(seconds["round"] < 120, f"runtime {seconds['round']:.1f}s")
        c.note(f"D={r.D:.4f} R={r.R:.4f} L={r.L:.7f} iso margin {iso.margin:.3g} <= budget {iso.budget:.3g}, {seconds['round']:.1f}s")
    c.check()


def test_criterion_2_doubled_triangle(reports):
    reps, _ = reports
    r = reps["doubled triangle"]
    with Criterion(2, "doubled triangle exactness") as c:
        c.require(close(r.L, SQRT3, 1e-6), f"L={r.L!r}")
        c.require(close(r.R, 1 / SQRT3, 1e-3), f"R={r.R!r}")
        c.require(close(r.D, 1.0, 1e-3), f"D={r.D!r}")
        c.require(close(r.L, 3 * r.R, 1e-6 + 3e-3), "L != 3R")
        c.require(close(r.L, SQRT3 * r.D, 1e-6 + SQRT3 * 1e-3), "L != sqrt3 D")
        c.require(bool(r.witness_simple), "witness not simple")
        c.note(f"L={r.L:.10f} 3R={3 * r.R:.10f} sqrt3 D={SQRT3 * r.D:.10f}")
    c.check()


def test_criterion_3_degenerate_theta_family():
    dt = DoubledTriangle(1.0)
    L = lattice_for(dt.side)
    with Criterion(3, "degenerate theta family on the doubled triangle") as c:
        good = 0
        for v in L.vertices0:
            for s in (0.0, 0.2, 0.4, 0.6):
                th = triangle_theta(dt, L.center + s * (v - L.center))
                res, tot = th.stationarity_residual(), th.total_length
                good += res < 1e-8 and abs(tot - SQRT3) < 1e-9
        c.require(good >= 5, f"only {good} members stationary with length sqrt3")
        out = net_flow(dt, triangle_theta(dt, L.center + 0.3 * (L.vertices0[1] - L.center)))
        c.require(out.kind == FlowKind.STATIONARY_THETA, f"net flow gave {out.kind.value}")
        c.require(close(out.length, SQRT3, 1e-9), f"flow length {out.length!r}")
        c.note(f"{good} stationary members of total length sqrt3")
    c.check()


def test_criterion_4_destabilization():
    rd = Round(1.0)
    with Criterion(4, "destabilization of the meridian theta") as c:
        th = meridian_theta(rd, n=65)
        fields = theta_destabilizing_field(rd, th)
        d1 = theta_first_variation(rd, th, fields)
        d2 = theta_second_variation(rd, th, fields)
        fd1, fd2 = fd_theta_variations(rd, th, fields)
        c.require(abs(d1) <= 1e-6 and abs(fd1) <= 1e-6, f"L'(0)={d1:.2e}, fd {fd1:.2e}")
        for name, val in (("analytic", d2), ("finite difference", fd2)):
            c.require(close(val, -2 * math.pi, 0.01 * 2 * math.pi), f"{name} L''(0)={val:.6f}")
        out = net_flow(rd, meridian_theta(rd, weights=(1, 1, 2)))
        c.require(out.kind != FlowKind.STATIONARY_THETA, "weighted flow stayed stationary")
        c.require(out.length < 3 * math.pi, f"final length {out.length:.4f}")
        c.note(f"L''={d2:.5f} fd={fd2:.5f}; weighted flow -> {out.kind.value}, length {out.length:.2e}")
    c.check()


def test_criterion_5_slp_values():
    t0 = time.perf_counter()
    with Criterion(5, "Sturm-Liouville values and bounds") as c:
        res = slp_first_eigenvalue(SLProblem(math.pi, 1.0))
        c.require(close(res.mu, 2.0, 1e-4), f"mu(pi,1)={res.mu}")
        orig = slp_first_eigenvalue(SLProblem(math.pi, 1.0), cross_check=False)
        corr = np.corrcoef(orig.eigenfunction, np.sin(orig.grid))[0, 1]
        c.require(corr > 1 - 1e-6, f"correlation with sin {corr}")
        for d in (1.0, 2.0, math.pi):
            m = slp_first_eigenvalue(SLProblem(d, 0.0)).mu
            c.require(close(m, (math.pi / d) ** 2, 1e-4), f"mu({d},0)={m}")
        for d in (2.3, 2.6, 2.9, 3.1):
            lo, up = eigenvalue_bounds(d)
            m = slp_first_eigenvalue(SLProblem(d, 1.0)).mu
            c.require(lo <= m <= up, f"d={d}: {lo} <= {m} <= {up} fails")
        dt = time.perf_counter() - t0
        c.require(dt < 30, f"runtime {dt:.1f}s")
        c.note(f"mu(pi,1)={res.mu:.7f}, {dt:.1f}s")
    c.check()


def test_criterion_6_taylor():
    with Criterion(6, "Taylor behaviour at pi") as c:
        t = taylor_at_pi()
        c.require(abs(t.first) <= 5e-3, f"mu'(pi)={t.first}")
        c.require(0.20 <= t.second <= 1.55, f"mu''(pi)={t.second}")
        c.require(close(t.mu_pi, 2.0, 1e-4), f"fitted mu(pi)={t.mu_pi}")
        c.note(f"mu'={t.first:.2e} mu''={t.second:.4f} (coefficient {t.coefficient:.4f}) mu(pi)={t.mu_pi:.6f}")
    c.check()


def test_criterion_7_corpus(reports):
    reps, seconds = reports
    with Criterion(7, "inequality suite on the corpus") as c:
        c.require(len(reps) >= 8, "corpus too small")
        for name, r in reps.items():
            for k in r.checks:
                if k.applicable:
                    c.require(k.passed, f"{name}: {k.name} lhs={k.lhs:.6g} rhs={k.rhs:.6g} budget={k.budget:.3g}")
            if r.nonnegative:
                c.require(bool(r.witness_simple), f"{name}: witness not simple")
        pinched = [n for n, r in reps.items() if any(k.name == "L<=2D/sqrt(delta)" and k.applicable for k in r.checks)]
        total = sum(seconds.values())
        c.require(total < 1800, f"runtime {total:.0f}s")
        c.note(f"{len(reps)} metrics, pinched checks active on {', '.join(pinched)}; {total:.0f}s")
    c.check()


def test_criterion_8_oracles():
    with Criterion(8, "oracle agreement") as c:
        worst_var = 0.0
        for i in range(20):
            spec, g, V = random_case(i)
            for a, b in (
                (first_variation(spec, g, V), fd_first_variation(spec, g, V)),
                (second_variation(spec, g, V), fd_second_variation(spec, g, V)),
            ):
                err = abs(a - b) / max(abs(b), 1e-3)
                worst_var = max(worst_var, err)
                c.require(abs(a - b) <= max(1e-3 * abs(b), 1e-6), f"variation case {i}: {a} vs {b}")
        rng = np.random.default_rng(8)
        worst_d = 0.0
        for spec in (Ellipsoid((1.0, 1.0, 1.1)), conformal(0.05)):
            for _ in range(2):
                u = rng.normal(size=3)
                src = point_from_sphere(u / np.linalg.norm(u))
                f = distance_field(spec, src, resolution=128)
                for k in rng.choice(len(f.values), 5, replace=False):
                    d = connect(spec, src, f.point(k)).length
                    worst_d = max(worst_d, abs(f.values[k] - d) / f.h)
                    c.require(abs(f.values[k] - d) <= 2 * f.h, f"distance {f.values[k]} vs connect {d}, h={f.h}")
        worst_k = 0.0
        for spec in (Ellipsoid((1.0, 1.05, 1.2)), conformal(0.1)):
            for south in (False, True):
                x = chart_grid(9).reshape(-1, 2)
                x = x[np.sum(x * x, axis=1) < 1.5]
                K = spec._gauss(x, np.full(len(x), south))
                Kfd = fd_gauss_curvature(spec, x, south)
                worst_k = max(worst_k, float(np.max(np.abs(K - Kfd) / np.abs(K))))
        c.require(worst_k < 1e-6, f"curvature relative error {worst_k:.2e}")
        c.note(f"variation rel err {worst_var:.1e}, distance err {worst_d:.2f} h, curvature rel err {worst_k:.1e}")
    c.check()
