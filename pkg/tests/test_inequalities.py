import csv
import io
import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import SQRT3
from geoflow.inequalities import (
    PINCHED_GATE,
    Check,
    GeometryReport,
    all_passed,
    batch_reports,
    geometry_report,
    refined_rhs,
    verify_inequalities,
)

FAST = {"resolution": 64, "n_sources": 60, "levels": 33, "jitters": 1}


@pytest.fixture(scope="module")
def round_report(round1):
    return geometry_report(round1, **FAST)


@pytest.fixture(scope="module")
def dt_report(dt):
    return geometry_report(dt, **FAST)


def by_name(rep):
    return {c.name: c for c in rep.checks}


def synthetic(delta, D=3.0, K_min=0.9, A=11.0, L=6.0, R=2.9):
    rep = GeometryReport(
        metric={"variant": "synthetic"},
        D=D,
        R=R,
        A=A,
        L=L,
        D_err=0.01,
        R_err=0.01,
        A_err=1e-6,
        L_err=1e-8,
        K_min=K_min,
        K_max=K_min / delta,
        delta=delta,
        delta_err=1e-4,
        K_min_err=1e-6,
        eta=D * math.sqrt(K_min),
        eta_err=0.01,
        witness_simple=True,
    )
    rep.checks = verify_inequalities(rep)
    return rep


def test_round_report_values(round_report):
    r = round_report
    assert r.D == pytest.approx(math.pi, abs=0.04)
    assert r.R == pytest.approx(math.pi, abs=0.04)
    assert r.A == pytest.approx(4 * math.pi, rel=1e-3)
    assert r.L == pytest.approx(2 * math.pi, abs=1e-3)
    assert r.delta == pytest.approx(1.0, abs=1e-9)
    assert r.eta == pytest.approx(math.pi, abs=0.04)
    assert r.R <= r.D + r.R_err + r.D_err
    assert all_passed(r.checks)


def test_round_iso_is_tight(round_report):
    iso = by_name(round_report)["piA<=4D^2/delta"]
    assert iso.passed
    # equality case: the margin is consumed by the distance error bar
    assert abs(iso.margin) <= iso.budget
    assert abs(iso.margin) / iso.rhs < 0.03


def test_triangle_report(dt_report):
    r = dt_report
    assert r.D == pytest.approx(1.0, abs=1e-3)
    assert r.R == pytest.approx(1 / SQRT3, abs=1e-3)
    assert r.A == pytest.approx(SQRT3 / 2, abs=1e-12)
    assert r.L == pytest.approx(SQRT3, abs=1e-6)
    assert r.L == pytest.approx(3 * r.R, abs=1e-3)
    assert r.L == pytest.approx(SQRT3 * r.D, abs=2e-3)
    assert r.delta is None and r.eta is None
    checks = by_name(r)
    assert checks["L<=4D"].passed
    assert checks["witness_simple"].passed
    assert checks["L<=2D/sqrt(delta)"].passed is None
    assert checks["piA<=4D^2/delta"].passed is None
    assert all_passed(r.checks)


def test_report_json_round_trip(dt_report):
    text = dt_report.to_json()
    back = GeometryReport.from_json(text)
    assert back.to_json() == text
    assert [c.passed for c in verify_inequalities(back)] == [c.passed for c in dt_report.checks]


def test_report_is_deterministic(dt):
    a = geometry_report(dt, **FAST)
    b = geometry_report(dt, **FAST)
    strip = lambda r: {k: v for k, v in r.to_dict().items() if k != "provenance"}
    assert json.dumps(strip(a)) == json.dumps(strip(b))
    assert a.provenance["resolution"] == 64


def test_checks_csv(round_report):
    rows = list(csv.reader(io.StringIO(round_report.checks_csv())))
    assert rows[0] == ["name", "lhs", "rhs", "budget", "margin", "applicable", "pass"]
    assert len(rows) == len(round_report.checks) + 1


def test_pinched_gate_closed():
    rep = synthetic(PINCHED_GATE - 1e-3)
    checks = by_name(rep)
    for name in ("L<=2D/sqrt(delta)", "L^2<=piA"):
        assert not checks[name].applicable
        assert checks[name].passed is None
        assert math.isnan(checks[name].lhs)


def test_pinched_gate_needs_error_margin():
    # delta above the gate, but not by more than its error bar
    rep = synthetic(PINCHED_GATE + 5e-5)
    assert not by_name(rep)["L<=2D/sqrt(delta)"].applicable
    rep = synthetic(PINCHED_GATE + 1e-3)
    assert by_name(rep)["L<=2D/sqrt(delta)"].applicable


@given(
    st.floats(0.05, 1.0),
    st.floats(0.1, 10.0),
    st.floats(0.0, 2 * math.pi),
)
def test_refined_dominates_plain(delta, D, eta):
    assert refined_rhs(D, delta, eta) <= 4 * D * D / delta


@given(st.floats(0.3, 1.0), st.floats(0.5, 3.1))
def test_dominance_check_in_reports(delta, eta):
    rep = synthetic(delta, D=eta / math.sqrt(0.9))
    assert by_name(rep)["refined<=plain"].passed


def test_check_semantics():
    c = Check("x", 1.0, 0.9, 0.2)
    assert c.passed and c.margin == pytest.approx(-0.1)
    assert not Check("x", 1.0, 0.5, 0.2).passed
    na = Check("x", math.nan, math.nan, 0.0, False)
    assert na.passed is None and na.to_dict()["margin"] is None
    assert all_passed([c, na])
    assert not all_passed([Check("x", 2.0, 1.0, 0.0)])


def test_failure_is_data():
    rep = synthetic(0.9, L=20.0)
    checks = by_name(rep)
    assert checks["L<=4D"].passed is False
    assert not all_passed(rep.checks)


def test_negative_curvature_flags():
    rep = GeometryReport({}, 3.0, 2.0, 12.0, 6.0, 0.0, 0.0, 0.0, 0.0, K_min=-0.1, K_max=1.0)
    checks = by_name(GeometryReport(**{**rep.__dict__, "checks": verify_inequalities(rep)}))
    assert checks["L<=3R"].passed is None
    assert checks["witness_simple"].passed is None
    assert checks["L<=4D"].passed


def test_batch_reports(tmp_path, dt):
    path = tmp_path / "dt.json"
    path.write_text(dt.to_json())
    reports, text = batch_reports([path], **FAST)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0][:6] == ["metric", "D", "R", "A", "L", "delta"]
    assert len(rows) == 2 and rows[1][0] == str(path)
    assert len(reports) == 1


def test_errors_are_annotated():
    from geoflow.metric import Round

    class Broken(Round):
        pass

    with pytest.raises(Exception, match="while computing"):
        geometry_report(Broken(1.0), resolution=0)
