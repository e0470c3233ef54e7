import math

import numpy as np
import pytest

from conftest import conformal
from geoflow.errors import NonGeodesicError, NonStationaryError
from geoflow.geodesics import DiscreteCurve, shoot
from geoflow.metric import Ellipsoid, Round, TangentVector, curvature_extrema, point_from_sphere, vector_norm
from geoflow.shortening import meridian_theta
from geoflow.variation import (
    VariationField,
    fd_first_variation,
    fd_second_variation,
    fd_theta_variations,
    first_variation,
    second_variation,
    theta_destabilizing_field,
    theta_first_variation,
    theta_second_variation,
)


def great_arc(spec, length, n=65, tilt=0.0):
    """Unit-speed arc of the equator rotated about the x-axis by ``tilt``."""
    t = np.linspace(0.0, length, n)
    u = np.stack([np.cos(t), np.sin(t) * math.cos(tilt), np.sin(t) * math.sin(tilt)], axis=1)
    return DiscreteCurve.from_sphere(spec, u)


def meridian(spec, n=65):
    t = np.linspace(0.0, math.pi, n)
    u = np.stack([np.sin(t), np.zeros(n), np.cos(t)], axis=1)
    u[0], u[-1] = [0, 0, 1], [0, 0, -1]
    return DiscreteCurve.from_sphere(spec, u)


def unit_vector(spec, p, w):
    v = TangentVector(p, np.asarray(w, dtype=float))
    return TangentVector(p, v.vec / vector_norm(spec, v))


# ---------------------------------------------------------------------------
# analytic examples


def test_meridian_parallel_normal_first_variation(round1):
    g = meridian(round1)
    V = VariationField.from_functions(round1, g, normal=lambda t: np.ones_like(t))
    assert first_variation(round1, g, V) == pytest.approx(0.0, abs=1e-8)


def test_equator_tangential_first_variation(round1):
    g = great_arc(round1, math.pi / 2)
    V = VariationField.from_functions(round1, g, tangential=lambda t: np.ones_like(t))
    assert first_variation(round1, g, V) == pytest.approx(0.0, abs=1e-8)
    W = VariationField.from_functions(round1, g, tangential=lambda t: t / (math.pi / 2))
    assert first_variation(round1, g, W) == pytest.approx(1.0, abs=1e-8)


def test_jacobi_field_has_zero_second_variation(round1):
    g = great_arc(round1, math.pi, 129)
    V = VariationField.from_functions(round1, g, normal=np.sin)
    assert second_variation(round1, g, V) == pytest.approx(0.0, abs=1e-4)


def test_parallel_normal_second_variation(round1):
    g = great_arc(round1, math.pi, 129)
    V = VariationField.from_functions(round1, g, normal=lambda t: np.ones_like(t))
    assert second_variation(round1, g, V) == pytest.approx(-math.pi, abs=1e-4)
    assert fd_second_variation(round1, g, V) == pytest.approx(-math.pi, rel=1e-3)


def test_decompose_recovers_profiles(round1):
    g = great_arc(round1, 2.0, 41, tilt=0.4)
    V = VariationField.from_functions(round1, g, tangential=np.cos, normal=lambda t: t**2)
    gt, ft = V.decompose(round1)
    s = g.cumulative_length()
    assert np.allclose(gt, np.cos(s), atol=1e-9)
    assert np.allclose(ft, s**2, atol=1e-9)


def test_non_geodesic_carrier_rejected(round1):
    t = np.linspace(0, 2, 33)
    z = 0.3
    u = np.stack([math.sqrt(1 - z * z) * np.cos(t), math.sqrt(1 - z * z) * np.sin(t), np.full_like(t, z)], axis=1)
    c = DiscreteCurve.from_sphere(round1, u)
    V = VariationField.from_functions(round1, c, normal=np.sin)
    with pytest.raises(NonGeodesicError):
        first_variation(round1, c, V)
    with pytest.raises(NonGeodesicError):
        second_variation(round1, c, V)


def test_field_validation_and_csv(round1):
    g = great_arc(round1, 1.0, 9)
    with pytest.raises(ValueError):
        VariationField(g, np.zeros((4, 2)))
    V = VariationField.from_functions(round1, g, normal=np.sin)
    lines = V.to_csv().splitlines()
    assert lines[0] == "chart,x,y,cumulative_length,v1,v2"
    assert len(lines) == len(g) + 1
    assert len(V.vectors) == len(g)


# ---------------------------------------------------------------------------
# finite-difference oracle on random cases


SPECS = [Round(1.0), Ellipsoid((1.0, 1.0, 1.1)), Ellipsoid((1.0, 1.05, 1.2)), conformal(0.05)]


def random_case(i):
    rng = np.random.default_rng(1000 + i)
    spec = SPECS[i % len(SPECS)]
    u = rng.normal(size=3)
    u /= np.linalg.norm(u)
    p = point_from_sphere(u)
    v = unit_vector(spec, p, rng.normal(size=2))
    length = rng.uniform(0.8, 2.2)
    # fine nodes: the polygon oracle cuts corners at O(h^2) in L''
    g = shoot(spec, p, v, length, length / 160)
    a, b, c = rng.normal(size=3)
    k = rng.integers(1, 3)
    tangential = lambda t: a + 0.3 * b * t
    normal = lambda t: c * np.cos(k * np.pi * t / length) + 0.5 * np.sin(np.pi * t / length)
    return spec, g, VariationField.from_functions(spec, g, tangential, normal)


def agree(x, y, rel=1e-3, floor=1e-6):
    return abs(x - y) <= max(rel * abs(y), floor)


@pytest.mark.parametrize("i", range(20))
def test_variations_match_finite_differences(i):
    spec, g, V = random_case(i)
    d1, fd1 = first_variation(spec, g, V), fd_first_variation(spec, g, V)
    d2, fd2 = second_variation(spec, g, V), fd_second_variation(spec, g, V)
    assert agree(d1, fd1), (d1, fd1)
    assert agree(d2, fd2), (d2, fd2)


def test_first_variation_is_boundary_term():
    spec, g, V = random_case(3)
    gt, _ = V.decompose(spec)
    assert first_variation(spec, g, V) == pytest.approx(gt[-1] - gt[0], abs=1e-6)


# ---------------------------------------------------------------------------
# destabilizing fields on stationary thetas


def test_round_meridian_theta_destabilized(round1):
    th = meridian_theta(round1, n=65)
    fields = theta_destabilizing_field(round1, th)
    assert theta_first_variation(round1, th, fields) == pytest.approx(0.0, abs=1e-6)
    d2 = theta_second_variation(round1, th, fields)
    assert d2 == pytest.approx(-2 * math.pi, abs=1e-2)
    fd1, fd2 = fd_theta_variations(round1, th, fields)
    assert fd1 == pytest.approx(0.0, abs=1e-6)
    assert fd2 == pytest.approx(d2, rel=1e-2)


@pytest.mark.parametrize("spec", [Ellipsoid((1.0, 1.0, 1.1)), conformal(0.05)], ids=["ellipsoid", "conformal"])
def test_positive_curvature_admits_decrease(spec):
    th = meridian_theta(spec, n=65)
    fields = theta_destabilizing_field(spec, th)
    assert theta_first_variation(spec, th, fields) == pytest.approx(0.0, abs=1e-6)
    k_min = curvature_extrema(spec, 32).k_min
    c = k_min * min(th.lengths[:2])
    assert theta_second_variation(spec, th, fields) < -c


def test_non_stationary_theta_rejected(round1):
    th = meridian_theta(round1, longitudes=(0.0, 1.0, 2.0))
    with pytest.raises(NonStationaryError):
        theta_destabilizing_field(round1, th)
