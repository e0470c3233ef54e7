"""Metric families on the 2-sphere and their chart realizations.

Smooth metrics are addressed through two stereographic charts of the unit
sphere model.  The North chart projects from the south pole, the South chart
from the north pole with the second coordinate flipped so both charts share
an orientation.  Internally every South-chart computation is the North-chart
formula applied to the reflected sphere ``R u`` with ``R = diag(1, -1, -1)``.

The doubled triangle is flat with three cone points; it has its own exact
planar code path in :mod:`geoflow.triangle`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Union

import numpy as np
from scipy.optimize import minimize

from .errors import ChartDomainError, MetricConfigError, UnsupportedVariantError
from .harmonics import L_MAX, Polynomial

# |x|^2 <= 3 is the chart region z >= -0.5 of the unit sphere model.
CHART_RADIUS2 = 3.0
_REFLECT = np.array([1.0, -1.0, -1.0])


class Chart(IntEnum):
    NORTH = 0
    SOUTH = 1
    FACE_TOP = 2
    FACE_BOTTOM = 3


@dataclass(frozen=True)
class SurfacePoint:
    chart: Chart
    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "chart", Chart(self.chart))
        object.__setattr__(self, "coords", tuple(float(c) for c in self.coords))
        if len(self.coords) != 2:
            raise ValueError("a surface point has two chart coordinates")

    @property
    def xy(self):
        return np.array(self.coords)


@dataclass(frozen=True)
class TangentVector:
    base: SurfacePoint
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(float(c) for c in self.components))

    @property
    def vec(self):
        return np.array(self.components)


# ---------------------------------------------------------------------------
# stereographic charts (batched)


def chart_to_sphere(x, south):
    """Unit-sphere points for chart coordinates ``x`` (N, 2)."""
    x = np.asarray(x, dtype=float)
    s = 1.0 + np.sum(x * x, axis=-1)
    u = np.stack([2 * x[..., 0] / s, 2 * x[..., 1] / s, 2.0 / s - 1.0], axis=-1)
    return np.where(np.asarray(south)[..., None], u * _REFLECT, u)


def sphere_to_chart(u, south):
    u = np.asarray(u, dtype=float)
    u = np.where(np.asarray(south)[..., None], u * _REFLECT, u)
    return u[..., :2] / (1.0 + u[..., 2:3])


def best_chart(u):
    """South where z < 0, else North."""
    return np.asarray(u)[..., 2] < 0


def _dU(x):
    """Jacobian of the North inverse projection, shape (N, 3, 2)."""
    s = 1.0 + np.sum(x * x, axis=-1)
    n = x.shape[0]
    J = np.empty((n, 3, 2))
    for a in range(2):
        for i in range(2):
            J[:, a, i] = (2.0 * (a == i)) / s - 4 * x[:, a] * x[:, i] / s**2
    J[:, 2, :] = -4 * x / (s**2)[:, None]
    return J


def _d2U(x, v):
    """Second derivative of the North inverse projection along ``v``."""
    s = 1.0 + np.sum(x * x, axis=-1)
    xv = np.sum(x * v, axis=-1)
    vv = np.sum(v * v, axis=-1)
    out = np.empty((x.shape[0], 3))
    out[:, :2] = (-8 * v * xv[:, None] - 4 * x * vv[:, None]) / (s**2)[:, None] + 16 * x * (xv**2 / s**3)[:, None]
    out[:, 2] = -4 * vv / s**2 + 16 * xv**2 / s**3
    return out


def transition(x, v, south):
    """Re-express chart points and vectors in the opposite chart."""
    x = np.atleast_2d(x)
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    y = np.stack([x[:, 0], -x[:, 1]], axis=-1) / r2
    if v is None:
        return y, None
    # differential of x -> (x1, -x2)/|x|^2
    v = np.atleast_2d(v)
    xv = np.sum(x * v, axis=-1, keepdims=True)
    w = v / r2 - 2 * x * xv / r2**2
    w = np.stack([w[:, 0], -w[:, 1]], axis=-1)
    return y, w


# ---------------------------------------------------------------------------
# metric specifications


class MetricSpec:
    """Base class for a metric on the 2-sphere."""

    variant = "abstract"
    smooth = True

    def to_dict(self):
        raise NotImplementedError

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


class _SmoothMetric(MetricSpec):
    """Chart-level formulas shared by smooth variants; all arrays batched."""

    def _tensor(self, x, south):
        raise NotImplementedError

    def _accel(self, x, v, south):
        raise NotImplementedError

    def _gauss(self, x, south):
        raise NotImplementedError

    def _sqrt_det(self, x, south):
        return np.sqrt(np.linalg.det(self._tensor(x, south)))

    def sweep_axis(self):
        return np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class Round(_SmoothMetric):
    radius: float = 1.0
    variant = "round"

    def __post_init__(self):
        if not self.radius > 0:
            raise MetricConfigError("round radius must be positive")

    def to_dict(self):
        return {"variant": "round", "radius": self.radius}

    def _log_factor(self, x, south):
        s = 1.0 + np.sum(x * x, axis=-1)
        return np.log(self.radius) + np.log(2.0 / s)

    def _grad_log_factor(self, x, south):
        s = 1.0 + np.sum(x * x, axis=-1)
        return -2 * x / s[:, None]

    def _tensor(self, x, south):
        e = np.exp(2 * self._log_factor(x, south))
        return e[:, None, None] * np.eye(2)

    def _sqrt_det(self, x, south):
        return np.exp(2 * self._log_factor(x, south))

    def _accel(self, x, v, south):
        g = self._grad_log_factor(x, south)
        gv = np.sum(g * v, axis=-1, keepdims=True)
        vv = np.sum(v * v, axis=-1, keepdims=True)
        return -2 * gv * v + vv * g

    def _gauss(self, x, south):
        return np.full(len(x), 1.0 / self.radius**2)


@dataclass(frozen=True)
class ConformalRound(Round):
    """``exp(2 t phi) g0`` on the unit round sphere, phi a sum of a_lm Y_lm."""

    coeffs: tuple = ()
    t: float = 0.0
    radius: float = field(default=1.0, init=False)
    variant = "conformal_round"

    def __post_init__(self):
        cleaned = []
        for item in self.coeffs:
            if isinstance(item, dict):
                item = (item["l"], item["m"], item["a"])
            l, m, a = item
            l, m = int(l), int(m)
            if not 0 <= l <= L_MAX or abs(m) > l:
                raise MetricConfigError(f"harmonic index out of range: l={l}, m={m}")
            cleaned.append((l, m, float(a)))
        object.__setattr__(self, "coeffs", tuple(cleaned))
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "_phi", Polynomial.from_harmonics(cleaned))
        object.__setattr__(
            self, "_lap_phi", Polynomial.from_harmonics(cleaned, weight=lambda l: -l * (l + 1))
        )

    def to_dict(self):
        return {
            "variant": "conformal_round",
            "t": self.t,
            "coeffs": [{"l": l, "m": m, "a": a} for l, m, a in self.coeffs],
        }

    def phi(self, u):
        return self._phi(u)

    def _log_factor(self, x, south):
        s = 1.0 + np.sum(x * x, axis=-1)
        return np.log(2.0 / s) + self.t * self._phi(chart_to_sphere(x, south))

    def _grad_log_factor(self, x, south):
        s = 1.0 + np.sum(x * x, axis=-1)
        out = -2 * x / s[:, None]
        if self.t != 0.0:
            south = np.broadcast_to(south, (len(x),))
            u = chart_to_sphere(x, south)
            gu = self._phi.gradient(u)
            gu = np.where(south[:, None], gu * _REFLECT, gu)
            out = out + self.t * np.einsum("nai,na->ni", _dU(x), gu)
        return out

    def _gauss(self, x, south):
        u = chart_to_sphere(x, south)
        return np.exp(-2 * self.t * self._phi(u)) * (1.0 - self.t * self._lap_phi(u))


@dataclass(frozen=True)
class Ellipsoid(_SmoothMetric):
    axes: tuple = (1.0, 1.0, 1.0)
    variant = "ellipsoid"

    def __post_init__(self):
        axes = tuple(float(a) for a in self.axes)
        if len(axes) != 3 or min(axes) <= 0:
            raise MetricConfigError("ellipsoid needs three positive semi-axes")
        object.__setattr__(self, "axes", axes)

    def to_dict(self):
        return {"variant": "ellipsoid", "axes": list(self.axes)}

    def _scales(self, south):
        a = np.array(self.axes)
        south = np.asarray(south)
        return np.where(south[..., None], a * _REFLECT, a)

    def _jac(self, x, south):
        sc = np.broadcast_to(self._scales(south), (len(x), 3))
        return sc[:, :, None] * _dU(x), sc

    def _tensor(self, x, south):
        J, _ = self._jac(x, south)
        return np.einsum("nai,naj->nij", J, J)

    def _accel(self, x, v, south):
        J, sc = self._jac(x, south)
        G = np.einsum("nai,naj->nij", J, J)
        rhs = np.einsum("nai,na->ni", J, sc * _d2U(x, v))
        return -np.linalg.solve(G, rhs[..., None])[..., 0]

    def embed(self, u):
        return np.asarray(u) * np.array(self.axes)

    def _gauss(self, x, south):
        a, b, c = self.axes
        X = self.embed(chart_to_sphere(x, south))
        q = X[:, 0] ** 2 / a**4 + X[:, 1] ** 2 / b**4 + X[:, 2] ** 2 / c**4
        return 1.0 / (a * a * b * b * c * c * q * q)

    def sweep_axis(self):
        return np.eye(3)[int(np.argmax(self.axes))]


@dataclass(frozen=True)
class DoubledTriangle(MetricSpec):
    side: float = 1.0
    variant = "doubled_triangle"
    smooth = False

    def __post_init__(self):
        if not self.side > 0:
            raise MetricConfigError("doubled triangle side must be positive")

    def to_dict(self):
        return {"variant": "doubled_triangle", "side": self.side}


# ---------------------------------------------------------------------------
# JSON ingestion

_KEYS = {
    "round": {"variant", "radius"},
    "conformal_round": {"variant", "t", "coeffs"},
    "ellipsoid": {"variant", "axes"},
    "doubled_triangle": {"variant", "side"},
}


def metric_from_dict(doc):
    if not isinstance(doc, dict) or "variant" not in doc:
        raise MetricConfigError("metric document must be an object with a 'variant' key")
    variant = doc["variant"]
    if variant not in _KEYS:
        raise MetricConfigError(f"unknown metric variant {variant!r}")
    extra = set(doc) - _KEYS[variant]
    if extra:
        raise MetricConfigError(f"unknown keys for {variant}: {sorted(extra)}")
    try:
        if variant == "round":
            return Round(float(doc.get("radius", 1.0)))
        if variant == "conformal_round":
            for c in doc.get("coeffs", []):
                if set(c) - {"l", "m", "a"}:
                    raise MetricConfigError(f"unknown coefficient keys: {sorted(set(c))}")
            return ConformalRound(coeffs=tuple(doc.get("coeffs", [])), t=float(doc.get("t", 0.0)))
        if variant == "ellipsoid":
            return Ellipsoid(tuple(doc["axes"]))
        return DoubledTriangle(float(doc.get("side", 1.0)))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, MetricConfigError):
            raise
        raise MetricConfigError(f"invalid {variant} metric: {exc}") from exc


def load_metric(path):
    """Read a metric JSON file; syntax errors report line and column."""
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MetricConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return metric_from_dict(doc)


# ---------------------------------------------------------------------------
# public operations


def _require_smooth(spec, what):
    if not isinstance(spec, _SmoothMetric):
        raise UnsupportedVariantError(f"{what} is not defined for {spec.variant}")


def _check_domain(p):
    if p.chart not in (Chart.NORTH, Chart.SOUTH):
        raise ChartDomainError(f"{p.chart.name} is not a smooth chart")
    if sum(c * c for c in p.coords) > CHART_RADIUS2 + 1e-12:
        raise ChartDomainError(f"{p} lies outside its chart (|x|^2 > 3)")


def point_from_sphere(u):
    """Chart point for a unit-sphere position, in the best chart."""
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    south = bool(best_chart(u))
    x = sphere_to_chart(u[None], np.array([south]))[0]
    return SurfacePoint(Chart.SOUTH if south else Chart.NORTH, x)


def point_to_sphere(p):
    return chart_to_sphere(p.xy[None], np.array([p.chart == Chart.SOUTH]))[0]


def to_chart(p, chart):
    """Express ``p`` in ``chart``; chart-domain error if it does not fit."""
    chart = Chart(chart)
    if p.chart == chart:
        return p
    if {p.chart, chart} != {Chart.NORTH, Chart.SOUTH}:
        raise ChartDomainError(f"no transition {p.chart.name} -> {chart.name}")
    y, _ = transition(p.xy[None], None, p.chart == Chart.SOUTH)
    q = SurfacePoint(chart, y[0])
    _check_domain(q)
    return q


def to_chart_vector(v, chart):
    chart = Chart(chart)
    if v.base.chart == chart:
        return v
    y, w = transition(v.base.xy[None], v.vec[None], v.base.chart == Chart.SOUTH)
    base = SurfacePoint(chart, y[0])
    _check_domain(base)
    return TangentVector(base, w[0])


def metric_tensor(spec, p):
    """2x2 metric tensor at ``p`` in ``p``'s chart."""
    _require_smooth(spec, "metric_tensor")
    _check_domain(p)
    return spec._tensor(p.xy[None], np.array([p.chart == Chart.SOUTH]))[0]


def vector_norm(spec, v):
    G = metric_tensor(spec, v.base)
    return float(np.sqrt(v.vec @ G @ v.vec))


def gauss_curvature(spec, p):
    _require_smooth(spec, "gauss_curvature")
    _check_domain(p)
    return float(spec._gauss(p.xy[None], np.array([p.chart == Chart.SOUTH]))[0])


def fd_gauss_curvature(spec, x, south=False, h=1e-2):
    """Gaussian curvature from finite differences of the metric tensor alone.

    Brioschi's formula with fourth-order central differences of E, F, G.
    Independent of the analytic curvature formulas; used as an oracle.
    """
    _require_smooth(spec, "fd_gauss_curvature")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = len(x)
    sv = np.broadcast_to(np.asarray(south), (n,))
    offsets = [-2, -1, 0, 1, 2]
    grid = np.empty((5, 5, n, 2, 2))
    for i, a in enumerate(offsets):
        for j, b in enumerate(offsets):
            grid[i, j] = spec._tensor(x + h * np.array([a, b]), sv)
    E, F, G = grid[..., 0, 0], grid[..., 0, 1], grid[..., 1, 1]

    w1 = np.array([1, -8, 0, 8, -1]) / (12 * h)
    w2 = np.array([-1, 16, -30, 16, -1]) / (12 * h * h)

    def du(f):
        return np.tensordot(w1, f[:, 2], axes=1)

    def dv(f):
        return np.tensordot(w1, f[2, :], axes=1)

    def duu(f):
        return np.tensordot(w2, f[:, 2], axes=1)

    def dvv(f):
        return np.tensordot(w2, f[2, :], axes=1)

    def duv(f):
        return np.einsum("i,j,ij...->...", w1, w1, f)

    E0, F0, G0 = E[2, 2], F[2, 2], G[2, 2]
    Eu, Ev, Fu, Fv, Gu, Gv = du(E), dv(E), du(F), dv(F), du(G), dv(G)
    Evv, Guu, Fuv = dvv(E), duu(G), duv(F)
    m1 = np.stack(
        [
            np.stack([-Evv / 2 + Fuv - Guu / 2, Eu / 2, Fu - Ev / 2], -1),
            np.stack([Fv - Gu / 2, E0, F0], -1),
            np.stack([Gv / 2, F0, G0], -1),
        ],
        -2,
    )
    z = np.zeros_like(E0)
    m2 = np.stack(
        [
            np.stack([z, Ev / 2, Gu / 2], -1),
            np.stack([Ev / 2, E0, F0], -1),
            np.stack([Gu / 2, F0, G0], -1),
        ],
        -2,
    )
    return (np.linalg.det(m1) - np.linalg.det(m2)) / (E0 * G0 - F0 * F0) ** 2


@dataclass(frozen=True)
class CurvatureExtrema:
    k_min: float
    k_max: float
    delta: float | None

    def __iter__(self):
        return iter((self.k_min, self.k_max, self.delta))


def chart_grid(resolution):
    """Grid nodes per chart inside the valid disk, shape (M, 2)."""
    r = math.sqrt(CHART_RADIUS2)
    t = np.linspace(-r, r, resolution)
    X, Y = np.meshgrid(t, t, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], -1)
    return pts[np.sum(pts * pts, axis=-1) <= CHART_RADIUS2]


def curvature_extrema(spec, resolution=64, polish=4):
    """Sampled and locally polished extrema of K and the pinching K_min/K_max."""
    _require_smooth(spec, "curvature_extrema")
    if resolution < 32:
        raise ValueError("curvature_extrema needs at least 32 samples per chart axis")
    pts = chart_grid(resolution)
    best = {}
    for south in (False, True):
        sv = np.full(len(pts), south)
        K = spec._gauss(pts, sv)
        order = np.argsort(K)
        best.setdefault("min", []).extend((K[i], pts[i], south) for i in order[:polish])
        best.setdefault("max", []).extend((K[i], pts[i], south) for i in order[-polish:])

    def polish_one(x0, south, sign):
        def f(x):
            if x @ x > CHART_RADIUS2:
                return sign * spec._gauss(x0[None], np.array([south]))[0] + 1.0
            return sign * spec._gauss(x[None], np.array([south]))[0]

        res = minimize(f, x0, method="Nelder-Mead", options={"xatol": 1e-6, "fatol": 1e-14})
        return sign * min(res.fun, f(x0))

    k_min = min(polish_one(p, s, 1.0) for _, p, s in best["min"])
    k_max = max(polish_one(p, s, -1.0) for _, p, s in best["max"])
    delta = k_min / k_max if k_max > 0 else None
    return CurvatureExtrema(float(k_min), float(k_max), None if delta is None else float(delta))


def _smooth_step(t):
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def north_weight(z):
    """Partition of unity: 1 for z >= 0.5, 0 for z <= -0.5."""
    return _smooth_step(np.asarray(z) + 0.5)


def chart_quadrature(resolution):
    """Nodes and weights on each chart disk, polar Gauss-Legendre x trapezoid.

    Returns ``(x, w)`` where ``w`` already includes the partition-of-unity
    weight for the North chart; the South chart uses the same disk and
    ``1 - weight`` evaluated at the reflected point.
    """
    nr = max(resolution, 16)
    nt = 2 * nr
    r_max = math.sqrt(CHART_RADIUS2)
    gx, gw = np.polynomial.legendre.leggauss(nr)
    r = (gx + 1) * r_max / 2
    wr = gw * r_max / 2 * r
    th = np.arange(nt) * 2 * np.pi / nt
    R, TH = np.meshgrid(r, th, indexing="ij")
    x = np.stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()], -1)
    w = np.repeat(wr, nt) * (2 * np.pi / nt)
    z = chart_to_sphere(x, np.zeros(len(x), bool))[:, 2]
    return x, w * north_weight(z)


def integrate(spec, func, resolution=64):
    """Integral of ``func(x, south)`` against the area form of ``spec``."""
    _require_smooth(spec, "integrate")
    x, w = chart_quadrature(resolution)
    total = 0.0
    for south in (False, True):
        sv = np.full(len(x), south)
        total += np.sum(w * spec._sqrt_det(x, sv) * func(x, sv))
    return float(total)


def area(spec, resolution=64):
    if isinstance(spec, DoubledTriangle):
        return 2 * (math.sqrt(3) / 4) * spec.side**2
    return integrate(spec, lambda x, s: np.ones(len(x)), resolution)


def total_curvature(spec, resolution=64):
    return integrate(spec, spec._gauss, resolution)
