"""First and second variation of length along geodesics and theta-graphs.

On a surface the unit normal ``n = J gamma'`` of a unit-speed geodesic is
parallel, so a field ``V = g gamma' + f n`` has ``(nabla_t V)^perp = f' n``
and the curvature term reduces to ``K f^2``.  The second variation of the
exponential variation ``exp(s V)`` is then ``int f'^2 - K f^2 dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .errors import NonGeodesicError, NonStationaryError
from .geodesics import DiscreteCurve
from .metric import DoubledTriangle, TangentVector
from .surface import backend

GEODESIC_TOL = 1e-8


# ---------------------------------------------------------------------------
# frames and fields


def curve_frame(spec, gamma):
    """Arclength, unit tangents and unit normals at the nodes of ``gamma``."""
    B = backend(spec)
    fwd, bwd = gamma.tangents()
    T = fwd.copy()
    if not gamma.closed:
        T[-1] = -bwd[-1]
    N = B.rotate(gamma.charts, gamma.coords, T)
    N /= B.norm(gamma.charts, gamma.coords, N)[:, None]
    return gamma.cumulative_length()[: len(gamma)], T, N


@dataclass
class VariationField:
    """Tangent vectors along the nodes of a carrier curve.

    ``components[i]`` is expressed in the chart of carrier node ``i``.  When
    built with :meth:`from_functions` the tangential and normal profiles
    ``g(t)``, ``f(t)`` (``t`` the arclength) are kept as well.
    """

    carrier: DiscreteCurve
    components: np.ndarray
    tangential: Callable | None = None
    normal: Callable | None = None

    def __post_init__(self):
        self.components = np.asarray(self.components, dtype=float).reshape(-1, 2)
        if len(self.components) != len(self.carrier):
            raise ValueError("one vector per carrier node is required")

    @classmethod
    def from_functions(cls, spec, gamma, tangential=None, normal=None):
        s, T, N = curve_frame(spec, gamma)
        g = np.zeros_like(s) if tangential is None else np.asarray(tangential(s), dtype=float)
        f = np.zeros_like(s) if normal is None else np.asarray(normal(s), dtype=float)
        return cls(gamma, g[:, None] * T + f[:, None] * N, tangential, normal)

    @property
    def vectors(self):
        return [TangentVector(self.carrier.point(i), self.components[i]) for i in range(len(self.carrier))]

    def decompose(self, spec):
        """Tangential and normal coefficients (g_i, f_i) at the nodes."""
        B = backend(spec)
        s, T, N = curve_frame(spec, self.carrier)
        c, x = self.carrier.charts, self.carrier.coords
        return B.inner(c, x, self.components, T), B.inner(c, x, self.components, N)

    def to_csv(self):
        cum = self.carrier.cumulative_length()
        lines = ["chart,x,y,cumulative_length,v1,v2"]
        for i in range(len(self.carrier)):
            c = int(self.carrier.charts[i])
            x, y = self.carrier.coords[i]
            lines.append(f"{c},{float(x)!r},{float(y)!r},{float(cum[i])!r},{float(self.components[i, 0])!r},{float(self.components[i, 1])!r}")
        return "\n".join(lines) + "\n"


def _require_geodesic(gamma, tol):
    res = gamma.max_residual()
    if res > tol:
        raise NonGeodesicError(
            f"carrier break residual {res:.2e} exceeds {tol:.0e}; use the integral form for non-geodesic curves"
        )


# ---------------------------------------------------------------------------
# analytic variations


def first_variation(spec, gamma, V, geodesic_tol=GEODESIC_TOL):
    """First derivative of length along the variation ``exp(s V)``.

    Boundary term ``<V, gamma'>`` at the ends minus the discrete integral
    term, which collects ``<V, u_next + u_prev>`` at the interior nodes and
    vanishes on a geodesic.
    """
    _require_geodesic(gamma, geodesic_tol)
    B = backend(spec)
    fwd, bwd = gamma.tangents()
    c, x = gamma.charts, gamma.coords
    s = np.nan_to_num(fwd) + np.nan_to_num(bwd)
    return float(-np.sum(B.inner(c, x, V.components, s)))


def second_variation(spec, gamma, V, geodesic_tol=GEODESIC_TOL, refine=8):
    """Second derivative of length along the variation ``exp(s V)``.

    Evaluates ``int |nabla V^perp|^2 - K |V^perp|^2 dt`` with ``V^perp = f n``
    so that ``|nabla V^perp| = |f'|``; ``f`` and ``K`` are interpolated by
    cubic splines in arclength and integrated on a refined grid.
    """
    _require_geodesic(gamma, geodesic_tol)
    s, T, N = curve_frame(spec, gamma)
    B = backend(spec)
    c, x = gamma.charts, gamma.coords
    f = B.inner(c, x, V.components, N)
    if isinstance(spec, DoubledTriangle):
        K = np.zeros(len(s))
    else:
        K = spec._gauss(x, c == 1)
    if gamma.closed:
        s = gamma.cumulative_length()
        fs = CubicSpline(s, np.append(f, f[0]), bc_type="periodic")
        ks = CubicSpline(s, np.append(K, K[0]), bc_type="periodic")
    elif V.normal is not None:
        fs, ks = None, CubicSpline(s, K)
    else:
        fs, ks = CubicSpline(s, f), CubicSpline(s, K)
    t = np.linspace(s[0], s[-1], refine * (len(s) - 1) + 1)
    if fs is None:
        fv = np.asarray(V.normal(t), dtype=float)
        h = 1e-5 * max(1.0, s[-1])
        dfv = (np.asarray(V.normal(t + h)) - np.asarray(V.normal(t - h))) / (2 * h)
    else:
        fv, dfv = fs(t), fs(t, 1)
    integrand = dfv**2 - ks(t) * fv**2
    return float(simpson(integrand, x=t))


# ---------------------------------------------------------------------------
# finite-difference oracle


def varied_curve(spec, gamma, V, s):
    """Nodes ``exp(s V_i)`` joined by geodesic segments."""
    B = backend(spec)
    c, y = B.exp(gamma.charts, gamma.coords, s * V.components)
    return DiscreteCurve(spec, c, y, gamma.closed)


def variation_length(spec, gamma, V, s):
    return varied_curve(spec, gamma, V, s).length


def fd_first_variation(spec, gamma, V, h=1e-4):
    """Central difference of the exponential-variation length."""
    return (variation_length(spec, gamma, V, h) - variation_length(spec, gamma, V, -h)) / (2 * h)


def fd_second_variation(spec, gamma, V, h=1e-3):
    """Second central difference with one Richardson step (h, h/2)."""
    L0 = gamma.length

    def d2(k):
        return (variation_length(spec, gamma, V, k) - 2 * L0 + variation_length(spec, gamma, V, -k)) / (k * k)

    return (4 * d2(h / 2) - d2(h)) / 3


# ---------------------------------------------------------------------------
# theta-graphs


def theta_destabilizing_field(spec, theta, tol=1e-6, agree_tol=1e-8):
    """Fields (V1, V2, V3) along the edges of a stationary theta-graph.

    ``V1 = (1/sqrt3) cos(pi t/L1) e1' + n1``, ``V2 = (1/sqrt3) cos(pi t/L2) e2' - n2``
    and ``V3 = (-2/sqrt3) cos(pi t/L3) e3'`` with ``n = J e'``.  The signs of
    the normal parts are flipped as needed so the three fields agree at both
    vertices; the agreement tolerance is ``agree_tol`` or, for a theta that is
    only stationary to ``r``, a few times ``r``.
    """
    res = theta.stationarity_residual(weights=(1.0, 1.0, 1.0))
    if res > tol:
        raise NonStationaryError(f"theta-graph residual {res:.2e} exceeds {tol:.0e}")
    B = backend(spec)
    c3 = 1 / math.sqrt(3)
    budget = max(agree_tol, 4 * res)
    best = None
    L1, L2, L3 = theta.lengths
    for s1 in (1.0, -1.0):
        for s2 in (-1.0, 1.0):
            profiles = [
                (lambda t: c3 * np.cos(np.pi * t / L1), lambda t, s=s1: np.full_like(t, s)),
                (lambda t: c3 * np.cos(np.pi * t / L2), lambda t, s=s2: np.full_like(t, s)),
                (lambda t: -2 * c3 * np.cos(np.pi * t / L3), None),
            ]
            fields = [
                VariationField.from_functions(spec, e, g, f) for e, (g, f) in zip(theta.edges, profiles)
            ]
            err = _vertex_disagreement(B, theta, fields)
            if best is None or err < best[0]:
                best = (err, fields)
    if best[0] > budget:
        raise NonStationaryError(f"destabilizing fields disagree at the vertices by {best[0]:.2e}")
    return tuple(best[1])


def _vertex_disagreement(B, theta, fields):
    err = 0.0
    for end in (0, -1):
        e0 = theta.edges[0]
        c0, x0 = e0.charts[end : end + 1 or None], e0.coords[end][None]
        vecs = []
        for e, V in zip(theta.edges, fields):
            c, x = e.charts[end : end + 1 or None], e.coords[end][None]
            w = V.components[end][None]
            if not B.flat and c[0] != c0[0]:
                _, w = B.in_chart(c, x, c0, v=w)
            vecs.append(w[0])
        for w in vecs[1:]:
            err = max(err, float(B.norm(c0, x0, (w - vecs[0])[None])[0]))
    return err


def theta_first_variation(spec, theta, fields):
    return sum(first_variation(spec, e, V) for e, V in zip(theta.edges, fields))


def theta_second_variation(spec, theta, fields):
    return sum(second_variation(spec, e, V) for e, V in zip(theta.edges, fields))


def theta_variation_length(spec, theta, fields, s):
    return sum(variation_length(spec, e, V, s) for e, V in zip(theta.edges, fields))


def fd_theta_variations(spec, theta, fields, h1=1e-4, h2=1e-3):
    """Finite-difference (L'(0), L''(0)) of the total theta length."""
    f = lambda s: theta_variation_length(spec, theta, fields, s)
    d1 = (f(h1) - f(-h1)) / (2 * h1)
    L0 = theta.total_length

    def d2(k):
        return (f(k) - 2 * L0 + f(-k)) / (k * k)

    return d1, (4 * d2(h2 / 2) - d2(h2)) / 3
