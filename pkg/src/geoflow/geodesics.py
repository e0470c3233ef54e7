"""Discrete curves, geodesic shooting and connection, distance fields, D and R."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, NonGeodesicError, StepTooLargeError
from .fmm import MeshMarcher, icosphere
from .metric import (
    Chart,
    DoubledTriangle,
    SurfacePoint,
    TangentVector,
    best_chart,
    chart_to_sphere,
    point_to_sphere,
    sphere_to_chart,
)
from .surface import backend
from .triangle import BOTTOM, TOP, lattice_for

MONOTONE_TOL = 1e-12
# replacements may lengthen a pair of segments by this relative amount, the
# noise level of the log map; summed over a sweep it stays below MONOTONE_TOL
ROUNDING = 1e-14


@dataclass
class DiscreteCurve:
    """Nodes joined by shortest geodesic segments.

    ``segment_lengths[i]`` is the length from node ``i`` to node ``i + 1``
    (wrapping to node 0 for closed curves).
    """

    spec: object
    charts: np.ndarray
    coords: np.ndarray
    closed: bool = False
    segment_lengths: np.ndarray | None = None

    def __post_init__(self):
        self.charts = np.asarray(self.charts, dtype=int).copy()
        self.coords = np.asarray(self.coords, dtype=float).reshape(-1, 2).copy()
        if len(self.coords) < 2:
            raise ValueError("a discrete curve needs at least two points")
        if self.segment_lengths is None:
            self.segment_lengths = self._measure()
        else:
            self.segment_lengths = np.asarray(self.segment_lengths, dtype=float).copy()

    @classmethod
    def from_points(cls, spec, points, closed=False):
        return cls(spec, [p.chart for p in points], [p.coords for p in points], closed)

    @classmethod
    def from_sphere(cls, spec, u, closed=False):
        """Build from positions on the unit-sphere model (smooth metrics)."""
        c, x = backend(spec).from_sphere(np.asarray(u, dtype=float))
        return cls(spec, c, x, closed)

    def __len__(self):
        return len(self.coords)

    def _pairs(self):
        i = np.arange(len(self) if self.closed else len(self) - 1)
        return i, (i + 1) % len(self)

    def _measure(self):
        i, j = self._pairs()
        B = backend(self.spec)
        return B.distance(self.charts[i], self.coords[i], self.charts[j], self.coords[j])

    @property
    def length(self):
        return float(np.sum(self.segment_lengths))

    @property
    def points(self):
        return [SurfacePoint(Chart(c), x) for c, x in zip(self.charts, self.coords)]

    def point(self, i):
        return SurfacePoint(Chart(self.charts[i]), self.coords[i])

    def copy(self):
        return DiscreteCurve(self.spec, self.charts, self.coords, self.closed, self.segment_lengths)

    def cumulative_length(self):
        return np.concatenate([[0.0], np.cumsum(self.segment_lengths)])

    def spacing_ratio(self):
        s = self.segment_lengths
        return float(np.max(s) / max(np.min(s), 1e-300))

    def to_sphere(self):
        if isinstance(self.spec, DoubledTriangle):
            raise TypeError("the doubled triangle has no sphere model; use embedded()")
        return chart_to_sphere(self.coords, self.charts == Chart.SOUTH)

    def embedded(self):
        """3D coordinates for plotting."""
        spec = self.spec
        if isinstance(spec, DoubledTriangle):
            z = np.where(self.charts == Chart.FACE_BOTTOM, -0.05 * spec.side, 0.0)
            return np.column_stack([self.coords, z])
        u = self.to_sphere()
        if spec.variant == "ellipsoid":
            return spec.embed(u)
        if spec.variant == "round":
            return spec.radius * u
        return u

    # -- tangents and residuals --------------------------------------------

    def tangents(self):
        """Unit outgoing tangents at each node toward the next and previous node."""
        B = backend(self.spec)
        n = len(self)
        idx = np.arange(n)
        fwd_ok = np.ones(n, bool) if self.closed else idx < n - 1
        bwd_ok = np.ones(n, bool) if self.closed else idx > 0
        nxt, prv = (idx + 1) % n, (idx - 1) % n
        fwd = np.full((n, 2), np.nan)
        bwd = np.full((n, 2), np.nan)
        f = np.flatnonzero(fwd_ok)
        v, d = B.log(self.charts[f], self.coords[f], self.charts[nxt[f]], self.coords[nxt[f]])
        fwd[f] = v / np.maximum(d, 1e-300)[:, None]
        b = np.flatnonzero(bwd_ok)
        v, d = B.log(self.charts[b], self.coords[b], self.charts[prv[b]], self.coords[prv[b]])
        bwd[b] = v / np.maximum(d, 1e-300)[:, None]
        return fwd, bwd

    def residuals(self):
        """Break residual |u_next + u_prev| at interior nodes (0 on a geodesic)."""
        fwd, bwd = self.tangents()
        B = backend(self.spec)
        s = fwd + bwd
        ok = ~np.isnan(s[:, 0])
        out = np.zeros(len(self))
        out[ok] = B.norm(self.charts[ok], self.coords[ok], s[ok])
        return out

    def max_residual(self):
        return float(np.max(self.residuals(), initial=0.0))

    # -- export ---------------------------------------------------------------

    def to_csv(self, fh=None):
        """Write ``chart,x,y,cumulative_length`` rows; returns text if no file."""
        own = fh is None
        fh = io.StringIO() if own else fh
        w = csv.writer(fh)
        w.writerow(["chart", "x", "y", "cumulative_length"])
        cum = self.cumulative_length()
        n = len(self)
        for i in range(n):
            w.writerow([Chart(self.charts[i]).name, repr(float(self.coords[i, 0])), repr(float(self.coords[i, 1])), repr(float(cum[i]))])
        if self.closed:
            w.writerow([Chart(self.charts[0]).name, repr(float(self.coords[0, 0])), repr(float(self.coords[0, 1])), repr(float(cum[n]))])
        return fh.getvalue() if own else None

    def to_xyz_csv(self, fh=None):
        own = fh is None
        fh = io.StringIO() if own else fh
        w = csv.writer(fh)
        w.writerow(["x", "y", "z"])
        for row in self.embedded():
            w.writerow([repr(float(c)) for c in row])
        return fh.getvalue() if own else None

    def is_simple(self):
        from .shortening import is_simple

        return is_simple(self)


# ---------------------------------------------------------------------------
# straightening sweeps


def midpoint_sweep(curve, parity, fixed=None):
    """Replace every node of the given parity by the geodesic midpoint of its
    neighbours, in place.  Returns the largest node displacement.

    Replacements that would lengthen the curve are skipped, so the cached
    length never increases.
    """
    n = len(curve)
    idx = np.arange(parity, n, 2)
    if not curve.closed:
        idx = idx[(idx > 0) & (idx < n - 1)]
    if fixed is not None:
        idx = idx[~fixed[idx]]
    if len(idx) == 0:
        return 0.0
    prv, nxt = (idx - 1) % n, (idx + 1) % n
    B = backend(curve.spec)
    c, y, d = B.midpoint_along(
        curve.charts[prv], curve.coords[prv], curve.charts[idx], curve.coords[idx], curve.charts[nxt], curve.coords[nxt]
    )
    seg = curve.segment_lengths
    before = seg[prv] + seg[idx]
    take = d <= before * (1 + ROUNDING)
    moved = B.same_point(curve.charts[idx[take]], curve.coords[idx[take]], c[take], y[take])
    old = curve.length
    k = idx[take]
    curve.charts[k] = c[take]
    curve.coords[k] = y[take]
    seg[prv[take]] = d[take] / 2
    seg[k] = d[take] / 2
    new = curve.length
    assert new <= old + MONOTONE_TOL * max(1.0, old), "straightening increased length"
    return float(np.max(moved, initial=0.0))


def resample(curve, n=None):
    """Redistribute nodes uniformly in arclength along the broken geodesic."""
    n = len(curve) if n is None else int(n)
    if curve.closed and n % 2:
        n += 1
    B = backend(curve.spec)
    cum = curve.cumulative_length()
    total = cum[-1]
    m = n if curve.closed else n - 1
    targets = np.linspace(0.0, total, m + 1)[: n if curve.closed else n]
    seg = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(curve.segment_lengths) - 1)
    frac = (targets - cum[seg]) / np.maximum(curve.segment_lengths[seg], 1e-300)
    i, j = seg, (seg + 1) % len(curve)
    v, _ = B.log(curve.charts[i], curve.coords[i], curve.charts[j], curve.coords[j])
    c, y = B.exp(curve.charts[i], curve.coords[i], frac[:, None] * v)
    if not curve.closed:
        c[-1], y[-1] = curve.charts[-1], curve.coords[-1]
        c[0], y[0] = curve.charts[0], curve.coords[0]
    return DiscreteCurve(curve.spec, c, y, curve.closed)


def densify(curve, per_segment):
    """Insert ``per_segment - 1`` points on every geodesic segment."""
    if per_segment <= 1:
        return curve.copy()
    B = backend(curve.spec)
    i = np.arange(len(curve.segment_lengths))
    j = (i + 1) % len(curve)
    v, _ = B.log(curve.charts[i], curve.coords[i], curve.charts[j], curve.coords[j])
    charts, coords = [], []
    for k in range(per_segment):
        c, y = B.exp(curve.charts[i], curve.coords[i], (k / per_segment) * v)
        charts.append(c)
        coords.append(y)
    charts = np.stack(charts, axis=1).reshape(-1)
    coords = np.stack(coords, axis=1).reshape(-1, 2)
    if not curve.closed:
        charts = np.append(charts, curve.charts[-1])
        coords = np.vstack([coords, curve.coords[-1]])
    return DiscreteCurve(curve.spec, charts, coords, curve.closed)


# ---------------------------------------------------------------------------
# shoot


def _unit_check(B, v):
    nrm = float(B.norm(np.array([v.base.chart]), v.base.xy[None], v.vec[None])[0])
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError(f"initial vector must be unit length, got |v| = {nrm:.12f}")


def shoot(spec, p, v, length, step):
    """Unit-speed geodesic from ``p`` with initial unit vector ``v``.

    Smooth metrics integrate the geodesic equation with an 8th-order
    Runge-Kutta scheme; the step is halved until endpoint positions agree to
    1e-10.  The doubled triangle propagates a straight line through the
    developed plane and refuses to pass through a cone point.
    """
    if step <= 0 or step > length / 16:
        raise StepTooLargeError(f"step must be in (0, length/16], got {step} for length {length}")
    B = backend(spec)
    if isinstance(spec, DoubledTriangle):
        L = B.lattice
        face = BOTTOM if p.chart == Chart.FACE_BOTTOM else TOP
        _unit_check(B, v)
        z0 = L.lift(p.xy, face)
        z1 = z0 + length * L.lift_vector(v.vec, face)
        y, faces, ts = L.straight(z0, z1, step=step)
        charts = np.where(faces == BOTTOM, Chart.FACE_BOTTOM, Chart.FACE_TOP)
        return DiscreteCurve(spec, charts, y)

    _unit_check(B, v)
    c0 = np.array([int(p.chart)])
    x0 = p.xy[None]
    v0 = v.vec[None] * length
    nsteps = math.ceil(length / step - 1e-9)
    coarse = None
    for _ in range(8):
        traj = B.integrate(c0, x0, v0, nsteps=nsteps, switch=True, record=True)
        end = chart_to_sphere(traj[-1][1], traj[-1][0] == Chart.SOUTH)
        if coarse is not None:
            prev_end = chart_to_sphere(coarse[-1][1], coarse[-1][0] == Chart.SOUTH)
            if np.max(np.abs(end - prev_end)) < 1e-10:
                break
        coarse = traj
        nsteps *= 2
    traj = coarse
    stride = max(1, (len(traj) - 1) // math.ceil(length / step - 1e-9))
    picked = traj[::stride]
    charts = np.array([t[0][0] for t in picked])
    coords = np.array([t[1][0] for t in picked])
    charts, coords = B.canonical(charts, coords)
    seg = np.full(len(coords) - 1, length / (len(coords) - 1))
    return DiscreteCurve(spec, charts, coords, False, seg)


# ---------------------------------------------------------------------------
# connect


def _initial_path(spec, p, q, n):
    B = backend(spec)
    if isinstance(spec, DoubledTriangle):
        L = B.lattice
        pf = BOTTOM if p.chart == Chart.FACE_BOTTOM else TOP
        qf = BOTTOM if q.chart == Chart.FACE_BOTTOM else TOP
        z0, z1 = L.nearest_image(p.xy, pf, q.xy, qf)
        y, faces, _ = L.straight(z0, z1, step=np.linalg.norm(z1 - z0) / max(n - 1, 1), check_cones=False)
        charts = np.where(faces == BOTTOM, Chart.FACE_BOTTOM, Chart.FACE_TOP)
        return DiscreteCurve(spec, charts, y)
    a, b = point_to_sphere(p), point_to_sphere(q)
    cosang = float(np.clip(a @ b, -1.0, 1.0))
    ang = math.acos(cosang)
    if ang < 1e-9:
        u = np.linspace(a, b, n)
    else:
        perp = b - cosang * a
        if np.linalg.norm(perp) < 1e-9:
            helper = np.eye(3)[np.argmin(np.abs(a))]
            perp = helper - (helper @ a) * a
        perp /= np.linalg.norm(perp)
        t = np.linspace(0.0, ang, n)
        u = np.cos(t)[:, None] * a + np.sin(t)[:, None] * perp
    c, x = B.from_sphere(u)
    c[0], x[0] = int(p.chart), p.xy
    c[-1], x[-1] = int(q.chart), q.xy
    return DiscreteCurve(spec, c, x)


def straighten(curve, tol=1e-8, max_sweeps=2000):
    """Curve-straighten with fixed endpoints until the break residual < tol."""
    curve = curve.copy()
    for _ in range(max_sweeps):
        midpoint_sweep(curve, 1)
        midpoint_sweep(curve, 0)
        if curve.spacing_ratio() > 1.5:
            curve = resample(curve)
        if curve.max_residual() < tol:
            return curve
    raise ConvergenceError("curve straightening did not converge", last=curve, residual=curve.max_residual())


def connect(spec, p, q, init=None, tol=1e-8, max_iter=400):
    """Geodesic from ``p`` to ``q`` by curve straightening.

    Starts from ``init`` or from the round-model great-circle arc, runs
    interleaved midpoint sweeps, then finishes with a single shooting
    correction along the straightened curve.  The doubled triangle is solved
    exactly by unfolding.
    """
    B = backend(spec)
    pc, qc = np.array([int(p.chart)]), np.array([int(q.chart)])
    if float(B.same_point(pc, p.xy[None], qc, q.xy[None])[0]) < 1e-12:
        raise ValueError("connect needs two distinct points")
    if isinstance(spec, DoubledTriangle):
        L = B.lattice
        d = float(B.distance(pc, p.xy[None], qc, q.xy[None])[0])
        return _initial_path(spec, p, q, max(2, math.ceil(d / (0.05 * L.side)) + 1))
    if init is None:
        ang = math.acos(float(np.clip(point_to_sphere(p) @ point_to_sphere(q), -1.0, 1.0)))
        curve = _initial_path(spec, p, q, max(9, math.ceil(ang / 0.25) + 1))
        if curve.length / (len(curve) - 1) > 0.3:
            curve = resample(curve, math.ceil(curve.length / 0.3) + 1)
    else:
        curve = init.copy()
    last = None
    for _ in range(max_iter):
        midpoint_sweep(curve, 1)
        midpoint_sweep(curve, 0)
        if curve.spacing_ratio() > 1.5:
            curve = resample(curve)
        res = curve.max_residual()
        if res < tol:
            return curve
        if res < 1e-3:
            shot = _shoot_polish(spec, curve)
            if shot is not None and shot.max_residual() < tol:
                return shot
        last = res
    raise ConvergenceError("connect did not converge", last=curve, residual=last)


def _shoot_polish(spec, curve):
    """Replace a nearly straight curve by the geodesic through its first segment."""
    B = backend(spec)
    n = len(curve)
    c0, x0 = curve.charts[:1], curve.coords[:1]
    v, _ = B.log(c0, x0, curve.charts[1:2], curve.coords[1:2])
    v = v * (n - 1)
    target_c, target_x = curve.charts[-1:], curve.coords[-1:]
    for _ in range(20):
        c, y = B.exp(c0, x0, v)
        miss = float(B.same_point(c, y, target_c, target_x)[0])
        if miss < 1e-12:
            break
        # correct the initial velocity with the secant from the end point
        vv = np.concatenate([v, v + [1e-7, 0.0], v + [0.0, 1e-7]])
        cc, yy = B.exp(np.repeat(c0, 3), np.repeat(x0, 3, axis=0), vv)
        work = np.full(3, cc[0])
        yy = B.in_chart(cc, yy, work)
        t = B.in_chart(target_c, target_x, work[:1])
        J = np.stack([(yy[1] - yy[0]) / 1e-7, (yy[2] - yy[0]) / 1e-7], axis=-1)
        try:
            v = v - np.linalg.solve(J, yy[0] - t[0])[None]
        except np.linalg.LinAlgError:
            return None
    else:
        return None
    ts = np.linspace(0.0, 1.0, n)
    cc, yy = B.exp(np.repeat(c0, n), np.repeat(x0, n, axis=0), ts[:, None] * v)
    cc[-1], yy[-1] = target_c[0], target_x[0]
    try:
        return DiscreteCurve(spec, cc, yy)
    except ConvergenceError:
        return None


# ---------------------------------------------------------------------------
# distance fields


@dataclass
class DistanceField:
    """First-arrival distances from ``source`` sampled at ``points``."""

    source: SurfacePoint
    charts: np.ndarray
    coords: np.ndarray
    values: np.ndarray
    resolution: int
    h: float
    metadata: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.values

    def point(self, i):
        return SurfacePoint(Chart(self.charts[i]), self.coords[i])

    def max(self):
        return float(np.max(self.values))


def mesh_frequency(resolution):
    return max(8, int(resolution) // 2)


@lru_cache(maxsize=16)
def _marcher(spec, resolution):
    verts, tris = icosphere(mesh_frequency(resolution))
    B = backend(spec)
    lengths = np.empty(tris.shape)
    for s in range(3):
        a, b = verts[tris[:, (s + 1) % 3]], verts[tris[:, (s + 2) % 3]]
        lengths[:, s] = _edge_lengths(B, a, b)
    return MeshMarcher(verts, tris, lengths)


def _edge_lengths(B, a, b):
    """Metric length of short chords a -> b by the midpoint rule in a chart."""
    mid = a + b
    mid /= np.linalg.norm(mid, axis=1, keepdims=True)
    south = best_chart(mid)
    xa, xb, xm = sphere_to_chart(a, south), sphere_to_chart(b, south), sphere_to_chart(mid, south)
    charts = np.where(south, Chart.SOUTH, Chart.NORTH)
    return B.norm(charts, xm, xb - xa)


def _mesh_points(spec, resolution):
    verts, _ = icosphere(mesh_frequency(resolution))
    south = best_chart(verts)
    return np.where(south, Chart.SOUTH, Chart.NORTH).astype(int), sphere_to_chart(verts, south)


def _source_init(spec, marcher, source):
    """Seed the vertices of the mesh triangle nearest ``source``."""
    u = point_to_sphere(source)
    verts = marcher.verts
    near = np.argsort(-(verts @ u))[:6]
    B = backend(spec)
    mid = verts[near] + u
    mid /= np.linalg.norm(mid, axis=1, keepdims=True)
    south = best_chart(mid)
    xs, xv, xm = sphere_to_chart(np.repeat(u[None], len(near), 0), south), sphere_to_chart(verts[near], south), sphere_to_chart(mid, south)
    charts = np.where(south, Chart.SOUTH, Chart.NORTH)
    return near, B.norm(charts, xm, xv - xs)


def distance_field(spec, source, resolution=128):
    """Distances from ``source`` to every sample of the surface.

    Smooth metrics: fast marching on an icosphere whose triangle sides carry
    metric lengths (frequency ``resolution // 2``).  Doubled triangle: exact
    unfolding distances on a triangular sample net.
    """
    if resolution < 64:
        raise ValueError("distance_field needs resolution >= 64")
    if isinstance(spec, DoubledTriangle):
        L = lattice_for(spec.side)
        pts, faces = L.net(max(8, resolution // 4))
        sf = BOTTOM if source.chart == Chart.FACE_BOTTOM else TOP
        vals = L.pairwise(source.xy[None], [sf], pts, faces)[0]
        charts = np.where(faces == BOTTOM, Chart.FACE_BOTTOM, Chart.FACE_TOP)
        h = L.side / max(8, resolution // 4)
        return DistanceField(source, charts, pts, vals, resolution, h, {"method": "unfolding", "exact": True})
    marcher = _marcher(spec, resolution)
    idx, val = _source_init(spec, marcher, source)
    values = marcher.march(idx, val)
    charts, coords = _mesh_points(spec, resolution)
    meta = {"method": "fast_marching", "mesh_vertices": len(values), "chart_discrepancy": 0.0}
    return DistanceField(source, charts, coords, values, resolution, marcher.h, meta)


# ---------------------------------------------------------------------------
# diameter and radius


@dataclass(frozen=True)
class DiameterRadius:
    D: float
    R: float
    D_err: float
    R_err: float
    D_source: SurfacePoint
    R_source: SurfacePoint
    resolution: int

    def __iter__(self):
        return iter((self.D, self.R))


def fibonacci_sphere(n):
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    r = np.sqrt(1 - z * z)
    th = math.pi * (1 + math.sqrt(5)) * i
    return np.column_stack([r * np.cos(th), r * np.sin(th), z])


def diameter_radius(spec, resolution=128, n_sources=200, refine=3):
    """Estimate diameter and radius from eccentricities of a source net.

    Smooth metrics: eccentricities from fast marching at ``resolution`` for
    ``n_sources`` quasi-uniform sources, then the ``refine`` best sources for
    D and R (plus nearby points) are re-run at twice the resolution.  The
    reported error bars equal the mean mesh edge length of the final run.
    Doubled triangle: exact distances on a sample net.
    """
    if resolution < 64:
        raise ValueError("diameter_radius needs resolution >= 64")
    if isinstance(spec, DoubledTriangle):
        return _dt_diameter_radius(spec, resolution)
    marcher = _marcher(spec, resolution)
    verts = marcher.verts
    picks = np.unique(np.argmax(fibonacci_sphere(max(n_sources, 200)) @ verts.T, axis=1))
    ecc = np.array([marcher.march([k], [0.0]).max() for k in picks])

    fine = _marcher(spec, 2 * resolution)
    fverts = fine.verts
    spacing = math.sqrt(4 * math.pi / len(picks))

    def fine_ecc(k):
        u = verts[k]
        cand = np.flatnonzero(fverts @ u > math.cos(0.5 * spacing))
        cand = cand[np.argsort(-(fverts[cand] @ u))][:7]
        return [(fine.march([c], [0.0]).max(), c) for c in cand]

    order = np.argsort(ecc, kind="stable")
    d_runs = [r for k in picks[order[::-1][:refine]] for r in fine_ecc(k)]
    r_runs = [r for k in picks[order[:refine]] for r in fine_ecc(k)]
    D, d_src = max(d_runs, key=lambda r: (r[0], -r[1]))
    R, r_src = min(r_runs, key=lambda r: (r[0], r[1]))
    D = max(D, float(ecc.max()))
    fc, fx = _mesh_points(spec, 2 * resolution)
    pt = lambda i: SurfacePoint(Chart(fc[i]), fx[i])
    return DiameterRadius(float(D), float(min(R, D)), fine.h, fine.h, pt(d_src), pt(r_src), resolution)


def _dt_diameter_radius(spec, resolution):
    from scipy.optimize import minimize

    L = lattice_for(spec.side)
    pts, faces = L.net(max(8, resolution // 4))
    M = L.pairwise(pts, faces, pts, faces)
    ecc = M.max(axis=1)
    D = float(M.max())
    i_r = int(np.argmin(ecc))
    i_d = int(np.unravel_index(np.argmax(M), M.shape)[0])

    def ecc_at(y, face):
        if not L.contains(y):
            return 10.0 * L.side
        return float(L.pairwise(y[None], [face], pts, faces).max())

    res = minimize(lambda y: ecc_at(y, faces[i_r]), pts[i_r], method="Nelder-Mead", options={"xatol": 1e-9, "fatol": 1e-12})
    R = min(float(ecc[i_r]), float(res.fun))
    err = 1e-9 * L.side
    mk = lambda y, f: SurfacePoint(Chart.FACE_BOTTOM if f == BOTTOM else Chart.FACE_TOP, y)
    return DiameterRadius(D, R, err, err, mk(pts[i_d], faces[i_d]), mk(pts[i_r], faces[i_r]), resolution)
