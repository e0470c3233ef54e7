import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import conformal, sphere_points
from geoflow.errors import ChartDomainError, MetricConfigError, UnsupportedVariantError
from geoflow.metric import (
    Chart,
    ConformalRound,
    DoubledTriangle,
    Ellipsoid,
    Round,
    SurfacePoint,
    TangentVector,
    area,
    chart_grid,
    chart_to_sphere,
    curvature_extrema,
    fd_gauss_curvature,
    gauss_curvature,
    metric_from_dict,
    metric_tensor,
    point_from_sphere,
    to_chart_vector,
    total_curvature,
    vector_norm,
)

NORTH = SurfacePoint(Chart.NORTH, np.zeros(2))


def test_round_tensor_is_stereographic():
    x = np.array([0.3, -0.7])
    G = metric_tensor(Round(1.0), SurfacePoint(Chart.NORTH, x))
    assert np.allclose(G, 4 / (1 + x @ x) ** 2 * np.eye(2), rtol=0, atol=1e-15)


def test_conformal_t0_equals_round():
    p = SurfacePoint(Chart.SOUTH, np.array([0.4, 0.2]))
    assert np.array_equal(metric_tensor(conformal(0.0, 3, 1), p), metric_tensor(Round(1.0), p))


def test_conformal_tensor_at_north_pole():
    # Y_10 at the north pole is sqrt(3 / 4pi)
    y10 = math.sqrt(3 / (4 * math.pi))
    G = metric_tensor(conformal(0.1, 1, 0), NORTH)
    assert np.allclose(G, math.exp(2 * 0.1 * y10) * 4 * np.eye(2), rtol=1e-14)


@pytest.mark.parametrize("r", [1.0, 2.5])
def test_round_curvature(r):
    assert gauss_curvature(Round(r), NORTH) == pytest.approx(1 / r**2, rel=1e-14)


def test_doubled_triangle_rejects_smooth_ops():
    with pytest.raises(UnsupportedVariantError):
        gauss_curvature(DoubledTriangle(1.0), NORTH)
    with pytest.raises(UnsupportedVariantError):
        curvature_extrema(DoubledTriangle(1.0))


def test_chart_domain_error():
    with pytest.raises(ChartDomainError):
        metric_tensor(Round(1.0), SurfacePoint(Chart.NORTH, np.array([2.0, 0.0])))


@pytest.mark.parametrize("t", [0.0, 0.05, 0.1])
def test_conformal_curvature_matches_finite_differences(t):
    spec = ConformalRound(coeffs=((1, 0, 1.0), (2, 1, 0.5), (3, -2, 0.3)), t=t)
    rng = np.random.default_rng(1)
    x = rng.uniform(-0.9, 0.9, size=(100, 2))
    for south in (False, True):
        K = spec._gauss(x, np.full(100, south))
        Kfd = fd_gauss_curvature(spec, x, south)
        assert np.max(np.abs(K - Kfd) / np.abs(K)) < 1e-6


def test_ellipsoid_curvature_matches_finite_differences(ell11):
    x = np.random.default_rng(2).uniform(-1, 1, size=(50, 2))
    K = ell11._gauss(x, np.zeros(50, bool))
    assert np.max(np.abs(K - fd_gauss_curvature(ell11, x)) / K) < 1e-6


def test_round_and_unit_ellipsoid_extrema():
    assert tuple(curvature_extrema(Round(1.0))) == pytest.approx((1, 1, 1), abs=1e-12)
    assert tuple(curvature_extrema(Ellipsoid((1, 1, 1)))) == pytest.approx((1, 1, 1), abs=1e-12)


def test_ellipsoid_extrema_closed_form(ell11):
    # K = c^2 at the poles and 1/c^2 on the equator for axes (1, 1, c)
    k_min, k_max, delta = curvature_extrema(ell11)
    assert k_max == pytest.approx(1.21, rel=1e-4)
    assert k_min == pytest.approx(1 / 1.21, rel=1e-4)
    assert delta == pytest.approx(1 / 1.21**2, rel=2e-4)


def test_ellipsoid_extrema_against_dense_sampling(ell11):
    ext = curvature_extrema(ell11, resolution=32)
    x = chart_grid(4 * 32 + 1)
    K = np.concatenate([ell11._gauss(x, np.full(len(x), s)) for s in (False, True)])
    assert ext.k_min == pytest.approx(K.min(), rel=1e-4)
    assert ext.k_max == pytest.approx(K.max(), rel=1e-4)
    assert ext.k_min <= K.min() + 1e-12 and ext.k_max >= K.max() - 1e-12


def test_pinching_tends_to_one():
    ds = [curvature_extrema(conformal(t)).delta for t in (0.2, 0.1, 0.05, 0.025)]
    assert all(a < b for a, b in zip(ds, ds[1:]))
    assert 1 - ds[-1] < 1 - ds[0]


def test_area_values():
    assert area(Round(1.0)) == pytest.approx(4 * math.pi, abs=1e-6)
    assert area(DoubledTriangle(1.0)) == math.sqrt(3) / 2


def test_conformal_area_closed_form():
    # phi = Y_10 = sqrt(3/4pi) z, so int exp(2 t phi) dA0 = 4 pi sinh(k)/k with k = 2 t sqrt(3/4pi)
    k = 2 * 0.1 * math.sqrt(3 / (4 * math.pi))
    exact = 4 * math.pi * math.sinh(k) / k
    assert area(conformal(0.1, 1, 0), resolution=64) == pytest.approx(exact, rel=1e-6)


@pytest.mark.parametrize(
    "spec",
    [Round(1.3), conformal(0.1), ConformalRound(coeffs=((3, 2, 0.7), (4, -1, 0.4)), t=0.1), Ellipsoid((1, 0.9, 1.2))],
    ids=["round", "conformal", "conformal-mixed", "ellipsoid"],
)
def test_gauss_bonnet(spec):
    assert total_curvature(spec) == pytest.approx(4 * math.pi, rel=1e-4)


@given(
    theta=st.floats(math.radians(65), math.radians(115)),
    lon=st.floats(0, 2 * math.pi),
    v=st.tuples(st.floats(-1, 1), st.floats(-1, 1)),
)
def test_chart_covariance(theta, lon, v):
    spec = ConformalRound(coeffs=((2, 1, 0.8), (1, 0, -0.5)), t=0.2)
    u = np.array([math.sin(theta) * math.cos(lon), math.sin(theta) * math.sin(lon), math.cos(theta)])
    p = point_from_sphere(u)
    w = TangentVector(p, np.array(v))
    other = Chart.SOUTH if p.chart == Chart.NORTH else Chart.NORTH
    assert vector_norm(spec, to_chart_vector(w, other)) == pytest.approx(vector_norm(spec, w), rel=1e-10, abs=1e-12)


def test_chart_round_trip():
    u = sphere_points(50)
    for south in (False, True):
        from geoflow.metric import sphere_to_chart

        keep = u[:, 2] < 0.5 if south else u[:, 2] > -0.5
        x = sphere_to_chart(u[keep], np.full(keep.sum(), south))
        assert np.allclose(chart_to_sphere(x, np.full(len(x), south)), u[keep], atol=1e-14)


def test_metric_json_round_trip():
    for spec in (Round(2.0), conformal(0.05), Ellipsoid((1, 1, 1.2)), DoubledTriangle(1.5)):
        assert metric_from_dict(json.loads(spec.to_json())) == spec


@pytest.mark.parametrize(
    "doc",
    [
        {"variant": "round", "radius": 1.0, "colour": 1},
        {"variant": "torus"},
        {"variant": "conformal_round", "t": 0.1, "coeffs": [{"l": 5, "m": 0, "a": 1.0}]},
        {"variant": "ellipsoid", "axes": [1, 1, -1]},
        {"radius": 1.0},
    ],
)
def test_bad_metric_documents(doc):
    with pytest.raises(MetricConfigError):
        metric_from_dict(doc)
