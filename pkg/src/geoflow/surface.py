"""Batched exponential/logarithm maps behind a common interface.

Points are passed around as a chart-code array ``(N,)`` and a coordinate
array ``(N, 2)``.  :func:`backend` returns an object with ``exp``, ``log``,
``midpoint``, ``inner`` and ``rotate`` for the given metric: smooth metrics
integrate the geodesic equation, the doubled triangle works in the
developed plane.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

from .errors import ConvergenceError
from .metric import (
    Chart,
    DoubledTriangle,
    best_chart,
    chart_to_sphere,
    sphere_to_chart,
    transition,
)
from .triangle import BOTTOM, TOP, lattice_for

_A = _dop.A[: _dop.N_STAGES, : _dop.N_STAGES]
_B = _dop.B
STEP = 0.15  # metric length per 8th-order step
SWITCH_R2 = 1.8  # leave a chart once z < about -0.29


def _as_arrays(charts, coords):
    return np.atleast_1d(np.asarray(charts, dtype=int)), np.atleast_2d(np.asarray(coords, dtype=float))


class SmoothBackend:
    """Geodesic machinery for metrics realized in the stereographic charts."""

    flat = False

    def __init__(self, spec):
        self.spec = spec

    # -- pointwise geometry -------------------------------------------------

    def tensor(self, charts, x):
        return self.spec._tensor(x, charts == Chart.SOUTH)

    def inner(self, charts, x, v, w):
        G = self.tensor(charts, x)
        return np.einsum("ni,nij,nj->n", v, G, w)

    def norm(self, charts, x, v):
        return np.sqrt(np.maximum(self.inner(charts, x, v, v), 0.0))

    def rotate(self, charts, x, v):
        """Rotate by +90 degrees in the metric (orientation of the chart)."""
        G = self.tensor(charts, x)
        # J = sqrt(det G) * G^{-1} [[0, -1], [1, 0]]
        det = np.linalg.det(G)
        w = np.stack([-v[:, 1], v[:, 0]], axis=-1)
        return np.sqrt(det)[:, None] * np.linalg.solve(G, w[..., None])[..., 0]

    def accel(self, charts, x, v):
        return self.spec._accel(x, v, charts == Chart.SOUTH)

    def to_sphere(self, charts, x):
        return chart_to_sphere(x, charts == Chart.SOUTH)

    def from_sphere(self, u):
        south = best_chart(u)
        return np.where(south, Chart.SOUTH, Chart.NORTH).astype(int), sphere_to_chart(u, south)

    def canonical(self, charts, x, v=None):
        """Move points (and vectors) to their best chart."""
        charts, x = _as_arrays(charts, x)
        u = self.to_sphere(charts, x)
        want = np.where(best_chart(u), Chart.SOUTH, Chart.NORTH)
        flip = want != charts
        if not np.any(flip):
            return (charts, x) if v is None else (charts, x, v)
        x = x.copy()
        y, w = transition(x[flip], None if v is None else v[flip], charts[flip] == Chart.SOUTH)
        x[flip] = y
        charts = want.astype(int)
        if v is None:
            return charts, x
        v = v.copy()
        v[flip] = w
        return charts, x, v

    def in_chart(self, charts, x, target, v=None):
        """Express points (and vectors at them) in the ``target`` charts."""
        charts, x = _as_arrays(charts, x)
        target = np.broadcast_to(np.asarray(target, dtype=int), charts.shape)
        flip = target != charts
        x = x.copy()
        v = None if v is None else np.array(v, dtype=float)
        if np.any(flip):
            y, w = transition(x[flip], None if v is None else v[flip], charts[flip] == Chart.SOUTH)
            x[flip] = y
            if v is not None:
                v[flip] = w
        return (x, v) if v is not None else x

    # -- geodesic flow ------------------------------------------------------

    def _rhs(self, charts, y):
        x, v = y[:, :2], y[:, 2:]
        return np.concatenate([v, self.accel(charts, x, v)], axis=1)

    def integrate(self, charts, x, v, nsteps=None, switch=False, record=False):
        """Follow geodesics with initial velocity ``v`` for unit parameter time."""
        charts, x = _as_arrays(charts, x)
        v = np.atleast_2d(np.asarray(v, dtype=float))
        if nsteps is None:
            speed = self.norm(charts, x, v)
            nsteps = max(2, math.ceil(float(np.max(speed, initial=0.0)) / STEP))
        h = 1.0 / nsteps
        y = np.concatenate([x, v], axis=1)
        charts = charts.copy()
        traj = [(charts.copy(), y[:, :2].copy(), y[:, 2:].copy())] if record else None
        k = np.empty((len(_B),) + y.shape)
        for _ in range(nsteps):
            for i in range(len(_B)):
                yi = y + h * np.tensordot(_A[i, :i], k[:i], axes=1) if i else y
                k[i] = self._rhs(charts, yi)
            y = y + h * np.tensordot(_B, k, axes=1)
            if switch:
                r2 = np.sum(y[:, :2] ** 2, axis=1)
                out = r2 > SWITCH_R2
                if np.any(out):
                    xs, vs = transition(y[out, :2], y[out, 2:], charts[out] == Chart.SOUTH)
                    y[out, :2], y[out, 2:] = xs, vs
                    charts[out] = 1 - charts[out]
            if record:
                traj.append((charts.copy(), y[:, :2].copy(), y[:, 2:].copy()))
        if record:
            return traj
        return charts, y[:, :2], y[:, 2:]

    def exp(self, charts, x, v):
        c, y, w = self.integrate(charts, x, v, switch=True)
        c, y = self.canonical(c, y)
        return c, y

    def log(self, pc, px, qc, qx, tol=1e-13, max_iter=30):
        """Initial velocities (in the charts of ``p``) of geodesics p -> q.

        Returns ``(v, lengths)``.  Newton iteration on the shooting map with
        a finite-difference Jacobian, in a chart chosen per pair.
        """
        pc, px = _as_arrays(pc, px)
        qc, qx = _as_arrays(qc, qx)
        n = len(pc)
        up, uq = self.to_sphere(pc, px), self.to_sphere(qc, qx)
        mid = up + uq
        bad = np.linalg.norm(mid, axis=1) < 1e-6
        mid[bad] = up[bad]
        work = np.where(best_chart(mid), Chart.SOUTH, Chart.NORTH).astype(int)
        a = self.in_chart(pc, px, work)
        b = self.in_chart(qc, qx, work)
        delta = b - a
        v = delta - 0.5 * self.accel(work, a, delta)
        scale = np.maximum(np.linalg.norm(delta, axis=1), 1e-300)
        active = np.ones(n, bool)
        eps = 1e-7
        for _ in range(max_iter):
            idx = np.flatnonzero(active)
            if len(idx) == 0:
                break
            m = len(idx)
            cc = np.tile(work[idx], 3)
            xx = np.tile(a[idx], (3, 1))
            vv = np.concatenate([v[idx], v[idx] + [eps, 0.0], v[idx] + [0.0, eps]])
            try:
                with np.errstate(all="ignore"):
                    _, end, _ = self.integrate(cc, xx, vv)
            except np.linalg.LinAlgError:
                end = np.full((3 * m, 2), np.nan)
            if not np.all(np.isfinite(end)):
                raise ConvergenceError("log map shooting left the chart", last=v, residual=None)
            f0 = end[:m] - b[idx]
            J = np.stack([(end[m : 2 * m] - end[:m]) / eps, (end[2 * m :] - end[:m]) / eps], axis=-1)
            err = np.linalg.norm(f0, axis=1)
            done = err <= tol * np.maximum(scale[idx], 1.0)
            step = np.linalg.solve(J, f0[..., None])[..., 0]
            # damp long Newton steps so trajectories stay inside the chart
            size = np.linalg.norm(step, axis=1)
            cap = 0.5 * np.maximum(np.linalg.norm(v[idx], axis=1), scale[idx])
            step *= np.minimum(1.0, cap / np.maximum(size, 1e-300))[:, None]
            v[idx[~done]] -= step[~done]
            active[idx[done]] = False
        if np.any(active):
            raise ConvergenceError("log map did not converge", last=v, residual=None)
        _, vp = self.in_chart(work, a, pc, v=v)
        return vp, self.norm(pc, px, vp)

    def midpoint(self, pc, px, qc, qx):
        v, d = self.log(pc, px, qc, qx)
        c, y = self.exp(pc, px, 0.5 * v)
        return c, y, d

    def distance(self, pc, px, qc, qx):
        return self.log(pc, px, qc, qx)[1]

    def midpoint_along(self, pc, px, mc, mx, qc, qx):
        """Midpoint of p and q on the geodesic near the current middle node."""
        return self.midpoint(pc, px, qc, qx)

    def same_point(self, pc, px, qc, qx):
        return np.linalg.norm(self.to_sphere(pc, px) - self.to_sphere(qc, qx), axis=1)


class FlatBackend:
    """Exact developed-plane geometry of the doubled triangle."""

    flat = True

    def __init__(self, spec):
        self.spec = spec
        self.lattice = lattice_for(spec.side)

    @staticmethod
    def _face(charts):
        return np.where(np.asarray(charts) == Chart.FACE_BOTTOM, BOTTOM, TOP)

    @staticmethod
    def _chart(faces):
        return np.where(np.asarray(faces) == BOTTOM, Chart.FACE_BOTTOM, Chart.FACE_TOP).astype(int)

    def inner(self, charts, x, v, w):
        return np.sum(np.atleast_2d(v) * np.atleast_2d(w), axis=1)

    def norm(self, charts, x, v):
        return np.linalg.norm(np.atleast_2d(v), axis=1)

    def rotate(self, charts, x, v):
        v = np.atleast_2d(v)
        return np.stack([-v[:, 1], v[:, 0]], axis=-1)

    def canonical(self, charts, x, v=None):
        return (charts, x) if v is None else (charts, x, v)

    def log(self, pc, px, qc, qx):
        pc, px = _as_arrays(pc, px)
        qc, qx = _as_arrays(qc, qx)
        L = self.lattice
        pf, qf = self._face(pc), self._face(qc)
        pl, ql = L.nearest_images(px, pf, qx, qf)
        # home-tile maps are isometries, so the inverse is the transpose
        out = np.einsum("nji,nj->ni", L.linear[L._homes(pf)], ql - pl)
        return out, np.linalg.norm(out, axis=1)

    def exp(self, charts, x, v):
        charts, x = _as_arrays(charts, x)
        v = np.atleast_2d(v)
        L = self.lattice
        f = self._face(charts)
        z = L.lift_many(x, f) + L.lift_vectors(v, f)
        y, faces = L.fold(z)
        return self._chart(faces), y

    def midpoint(self, pc, px, qc, qx):
        v, d = self.log(pc, px, qc, qx)
        c, y = self.exp(pc, px, 0.5 * v)
        return c, y, d

    def distance(self, pc, px, qc, qx):
        return self.log(pc, px, qc, qx)[1]

    def midpoint_along(self, pc, px, mc, mx, qc, qx):
        """Midpoint of p and q on the straight line developed through the
        middle node, so the replacement stays in the curve's own sheet."""
        L = self.lattice
        pf, mf, qf = self._face(pc), self._face(mc), self._face(qc)
        pl, ml = L.nearest_images(px, pf, mx, mf)
        _, ql = L.nearest_images(px, pf, qx, qf, ref=ml)
        y, faces = L.fold(0.5 * (pl + ql))
        return self._chart(faces), y, np.linalg.norm(ql - pl, axis=1)

    def develop(self, charts, x):
        return self.lattice.lift_many(x, self._face(charts))

    def same_point(self, pc, px, qc, qx):
        return self.log(pc, px, qc, qx)[1]


def backend(spec):
    if isinstance(spec, DoubledTriangle):
        return FlatBackend(spec)
    return SmoothBackend(spec)
