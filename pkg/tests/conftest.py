import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from geoflow.metric import ConformalRound, DoubledTriangle, Ellipsoid, Round

settings.register_profile(
    "geoflow", deadline=None, max_examples=25, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("geoflow")


@pytest.fixture(scope="session")
def round1():
    return Round(1.0)


@pytest.fixture(scope="session")
def dt():
    return DoubledTriangle(1.0)


@pytest.fixture(scope="session")
def ell11():
    return Ellipsoid((1.0, 1.0, 1.1))


def conformal(t, l=2, m=0, a=1.0):
    return ConformalRound(coeffs=((l, m, a),), t=t)


def sphere_points(n, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(n, 3))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


SQRT3 = math.sqrt(3.0)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
