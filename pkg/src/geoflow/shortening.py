"""Birkhoff curve shortening, length-shortening flow for theta-graphs and a
sweep-out estimate of the shortest closed geodesic."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConvergenceError
from .geodesics import MONOTONE_TOL, ROUNDING, DiscreteCurve, midpoint_sweep, resample
from .metric import Chart, DoubledTriangle, SurfacePoint, curvature_extrema, point_from_sphere
from .surface import backend
from .triangle import BOTTOM, SQ3, TOP, lattice_for


class FlowKind(str, Enum):
    CLOSED_GEODESIC = "ClosedGeodesic"
    FIGURE_EIGHT = "FigureEight"
    STATIONARY_THETA = "StationaryTheta"
    COLLAPSED = "CollapsedToPoint"
    EDGE_VANISHED = "EdgeVanished"


@dataclass
class FlowOutcome:
    kind: FlowKind
    carrier: object
    length: float
    stationarity_residual: float
    simple: bool | None
    iterations: int = 0
    events: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    def to_dict(self):
        out = {
            "kind": self.kind.value,
            "length": self.length,
            "stationarity_residual": self.stationarity_residual,
            "simple": self.simple,
            "iterations": self.iterations,
            "events": list(self.events),
        }
        if isinstance(self.carrier, DiscreteCurve):
            out["carrier"] = {"type": "curve", **_curve_dict(self.carrier)}
        elif isinstance(self.carrier, ThetaGraph):
            out["carrier"] = {
                "type": "theta",
                "weights": list(self.carrier.weights),
                "edges": [_curve_dict(e) for e in self.carrier.edges],
            }
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def write_trace(self, path):
        """Dump the per-iteration trace as JSON lines."""
        with open(path, "w") as fh:
            for row in self.trace:
                fh.write(json.dumps(row) + "\n")


def _curve_dict(c):
    return {
        "closed": c.closed,
        "charts": [Chart(k).name for k in c.charts],
        "coords": c.coords.tolist(),
        "length": c.length,
    }


# ---------------------------------------------------------------------------
# simplicity


def _arc_crossings(a, b):
    """Pairs of great-circle arcs (a_i, b_i) that cross properly; (K, K) bool."""
    na = np.cross(a, b)
    s1 = np.einsum("jk,ik->ij", a, na)
    s2 = np.einsum("jk,ik->ij", b, na)
    straddle = s1 * s2 < 0  # arc j crosses the great circle of arc i
    mid = a + b
    same_side = mid @ mid.T > 0
    return straddle & straddle.T & same_side


def _segment_distances(a0, a1, b0, b1):
    """Distances between planar segments a_i and b_j; (K, M)."""

    def point_seg(p, s0, s1):
        d = s1 - s0
        L2 = np.maximum(np.sum(d * d, axis=-1), 1e-300)
        t = np.clip(np.sum((p - s0) * d, axis=-1) / L2, 0.0, 1.0)
        return np.linalg.norm(p - s0 - t[..., None] * d, axis=-1)

    A0, A1 = a0[:, None], a1[:, None]
    B0, B1 = b0[None], b1[None]

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    cross = (orient(A0, A1, B0) * orient(A0, A1, B1) < 0) & (orient(B0, B1, A0) * orient(B0, B1, A1) < 0)
    d = np.minimum.reduce(
        [point_seg(A0, B0, B1), point_seg(A1, B0, B1), point_seg(B0, A0, A1), point_seg(B1, A0, A1)]
    )
    return np.where(cross, 0.0, d)


def is_simple(curve):
    """True when no two non-adjacent pieces of ``curve`` cross.

    Smooth metrics test great-arc pieces on the unit-sphere model; the
    doubled triangle tests straight pieces face by face.
    """
    if isinstance(curve.spec, DoubledTriangle):
        return _is_simple_flat(curve)
    u = curve.to_sphere()
    n = len(u)
    idx = np.arange(n if curve.closed else n - 1)
    a, b = u[idx], u[(idx + 1) % n]
    cross = _arc_crossings(a, b)
    m = len(idx)
    i, j = np.triu_indices(m, k=2)
    ok = ~((i == 0) & (j == m - 1)) if curve.closed else np.ones(len(i), bool)
    return not bool(np.any(cross[i[ok], j[ok]]))


def _is_simple_flat(curve):
    L = lattice_for(curve.spec.side)
    faces = np.where(curve.charts == Chart.FACE_BOTTOM, BOTTOM, TOP)
    n = len(curve)
    m = n if curve.closed else n - 1
    nxt = (np.arange(m) + 1) % n
    z0, z1 = L.nearest_images(curve.coords[:m], faces[:m], curve.coords[nxt], faces[nxt])
    starts, ends, fs = [], [], []
    for k in range(m):
        y, f, _ = L.straight(z0[k], z1[k], check_cones=False)
        starts.append(y[:-1])
        ends.append(y[1:])
        fs.append(f[:-1])
    starts, ends = np.vstack(starts), np.vstack(ends)
    fs = np.concatenate(fs)
    # consecutive pieces share an endpoint; any other contact is a crossing
    order = np.arange(len(fs))
    for face in (TOP, BOTTOM):
        sel = np.flatnonzero(fs == face)
        if len(sel) < 2:
            continue
        dist = _segment_distances(starts[sel], ends[sel], starts[sel], ends[sel])
        gap = np.abs(order[sel][:, None] - order[sel][None, :])
        if curve.closed:
            gap = np.minimum(gap, len(fs) - gap)
        if np.any((dist < 1e-10) & (gap >= 2)):
            return False
    return True


# ---------------------------------------------------------------------------
# batched Birkhoff flow on closed curves with a common node count


@dataclass
class _Batch:
    spec: object
    charts: np.ndarray  # (M, n)
    coords: np.ndarray  # (M, n, 2)
    seg: np.ndarray  # (M, n); seg[:, i] is the length from node i to node i+1

    @classmethod
    def from_curves(cls, curves):
        return cls(
            curves[0].spec,
            np.stack([c.charts for c in curves]),
            np.stack([c.coords for c in curves]),
            np.stack([c.segment_lengths for c in curves]),
        )

    def curve(self, r):
        return DiscreteCurve(self.spec, self.charts[r], self.coords[r], True, self.seg[r])

    def set_curve(self, r, c):
        self.charts[r], self.coords[r], self.seg[r] = c.charts, c.coords, c.segment_lengths

    def lengths(self):
        return self.seg.sum(axis=1)

    def sweep(self, parity, rows):
        n = self.charts.shape[1]
        j = np.arange(parity, n, 2)
        R, J = np.meshgrid(rows, j, indexing="ij")
        R, J = R.ravel(), J.ravel()
        P, N = (J - 1) % n, (J + 1) % n
        B = backend(self.spec)
        c, y, d = B.midpoint_along(
            self.charts[R, P], self.coords[R, P], self.charts[R, J], self.coords[R, J], self.charts[R, N], self.coords[R, N]
        )
        take = d <= (self.seg[R, P] + self.seg[R, J]) * (1 + ROUNDING)
        disp = np.zeros(len(R))
        disp[take] = B.same_point(self.charts[R, J][take], self.coords[R, J][take], c[take], y[take])
        R, J, P = R[take], J[take], P[take]
        self.charts[R, J] = c[take]
        self.coords[R, J] = y[take]
        self.seg[R, P] = d[take] / 2
        self.seg[R, J] = d[take] / 2
        out = np.zeros(self.charts.shape[0])
        np.maximum.at(out, R, disp[take])
        return out

    def residuals(self, rows):
        """Largest break residual per row."""
        n = self.charts.shape[1]
        R, I = np.meshgrid(rows, np.arange(n), indexing="ij")
        R, I = R.ravel(), I.ravel()
        B = backend(self.spec)
        c, x = self.charts[R, I], self.coords[R, I]
        vf, df = B.log(c, x, self.charts[R, (I + 1) % n], self.coords[R, (I + 1) % n])
        vb, db = B.log(c, x, self.charts[R, (I - 1) % n], self.coords[R, (I - 1) % n])
        s = vf / np.maximum(df, 1e-300)[:, None] + vb / np.maximum(db, 1e-300)[:, None]
        r = B.norm(c, x, s)
        out = np.zeros(self.charts.shape[0])
        np.maximum.at(out, R, r)
        return out[rows]

    def sides(self, rows, axis):
        if isinstance(self.spec, DoubledTriangle):
            return np.zeros(len(rows))
        from .metric import chart_to_sphere

        u = chart_to_sphere(self.coords[rows], self.charts[rows] == Chart.SOUTH)
        return u.mean(axis=1) @ axis


@dataclass
class _RunResult:
    status: str  # "converged", "collapsed", "max_iter"
    curve: DiscreteCurve
    residual: float
    iterations: int
    side: float
    best: DiscreteCurve | None = None
    best_residual: float = math.inf


# residual below which a stalled Birkhoff flow is finished by polish_closed
STALL_RESIDUAL = 1e-5


def _run_batch(curves, tol, max_iter, collapse_length=0.0, check_every=10, trace=None, track_best=False, axis=None):
    """Birkhoff flow on several closed curves at once."""
    batch = _Batch.from_curves(curves)
    M = len(curves)
    active = np.ones(M, bool)
    results = [None] * M
    best = [None] * M
    best_res = np.full(M, math.inf)
    floor = max(10 * tol, collapse_length)
    axis = np.array([0.0, 0.0, 1.0]) if axis is None else axis
    length = batch.lengths()
    last_res = np.full(M, math.inf)
    it = 0

    def finish(r, status, res):
        results[r] = _RunResult(
            status, batch.curve(r), float(res), it, float(batch.sides(np.array([r]), axis)[0]), best[r], best_res[r]
        )
        active[r] = False

    for r in np.flatnonzero(length < floor):
        finish(r, "collapsed", math.nan)
    while np.any(active) and it < max_iter:
        rows = np.flatnonzero(active)
        if it % check_every == 0:
            res = batch.residuals(rows)
            if trace is not None:
                trace.append({"iteration": it, "length": float(length[rows].min()), "residual": float(res.min())})
            for r, v in zip(rows, res):
                if track_best and v < best_res[r]:
                    best_res[r], best[r] = v, batch.curve(r)
                if v < tol:
                    finish(r, "converged", v)
                elif v < STALL_RESIDUAL and v > 0.9 * last_res[r]:
                    # midpoint moves are below rounding; finish by Gauss-Newton
                    c, pr = polish_closed(batch.curve(r), tol=0.1 * tol)
                    if pr < tol and c.length <= length[r] + MONOTONE_TOL * max(1.0, length[r]):
                        batch.set_curve(r, c)
                        length[r] = c.length
                        finish(r, "converged", pr)
                last_res[r] = v
            rows = np.flatnonzero(active)
            if len(rows) == 0:
                break
        it += 1
        batch.sweep(1, rows)
        batch.sweep(0, rows)
        for r in rows:
            s = batch.seg[r]
            if s.max() > 1.5 * s.min() and s.min() > 0:
                c = resample(batch.curve(r))
                if c.length <= batch.seg[r].sum() + MONOTONE_TOL * max(1.0, c.length):
                    batch.set_curve(r, c)
        new = batch.lengths()
        grew = new[rows] > length[rows] + MONOTONE_TOL * np.maximum(1.0, length[rows])
        assert not np.any(grew), "curve shortening increased length"
        length = new
        for r in rows:
            if length[r] < floor:
                finish(r, "collapsed", math.nan)
    for r in np.flatnonzero(active):
        res = float(batch.residuals(np.array([r]))[0])
        if res < tol:
            finish(r, "converged", res)
        else:
            finish(r, "max_iter", res)
    return results


def _even_closed(curve, n=None):
    if not curve.closed:
        raise ValueError("expected a closed curve")
    n = len(curve) if n is None else n
    if n % 2 or n != len(curve):
        return resample(curve, n + (n % 2))
    return curve


def birkhoff_flow(spec, c, tol=1e-8, max_iter=20000, trace=None, collapse_length=0.0):
    """Birkhoff curve shortening of a closed curve.

    Interleaved sweeps replace the odd and then the even nodes by geodesic
    midpoints of their neighbours.  Each replacement is accepted only if it
    does not lengthen the curve, so the length is non-increasing (asserted).
    Terminates as ClosedGeodesic when every break residual is below ``tol``
    or as CollapsedToPoint once the length drops below ``10 tol`` (or below
    ``collapse_length`` when a lower bound on closed geodesics is known).
    """
    if not c.closed or len(c) < 8:
        raise ValueError("birkhoff_flow needs a closed curve with at least 8 nodes")
    if c.spec is not spec:
        c = DiscreteCurve(spec, c.charts, c.coords, True)
    c = _even_closed(c)
    rows = [] if trace is None else trace
    res = _run_batch([c], tol, max_iter, collapse_length, trace=rows)[0]
    if res.status == "max_iter":
        raise ConvergenceError("Birkhoff flow hit max_iter", last=res.curve, residual=res.residual)
    if res.status == "collapsed":
        return FlowOutcome(FlowKind.COLLAPSED, res.curve, res.curve.length, math.nan, True, res.iterations, trace=rows)
    simple = is_simple(res.curve)
    return FlowOutcome(
        FlowKind.CLOSED_GEODESIC, res.curve, res.curve.length, res.residual, simple, res.iterations, trace=rows
    )


# ---------------------------------------------------------------------------
# theta-graphs


@dataclass
class ThetaGraph:
    """Two vertices joined by three edges, each an open curve from p to q."""

    spec: object
    edges: list
    weights: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if len(self.edges) != 3:
            raise ValueError("a theta-graph has exactly three edges")
        self.weights = tuple(float(w) for w in self.weights)
        if min(self.weights) <= 0:
            raise ValueError("weights must be positive")
        B = backend(self.spec)
        for e in self.edges:
            if e.closed:
                raise ValueError("theta edges are open curves")
        for end in (0, -1):
            c = np.array([e.charts[end] for e in self.edges])
            x = np.array([e.coords[end] for e in self.edges])
            gap = B.same_point(c[[0, 0]], x[[0, 0]], c[[1, 2]], x[[1, 2]])
            if np.max(gap) > 1e-10:
                raise ValueError("theta edges must share both endpoints")

    @property
    def p(self):
        return self.edges[0].point(0)

    @property
    def q(self):
        return self.edges[0].point(len(self.edges[0]) - 1)

    @property
    def vertices(self):
        return self.p, self.q

    @property
    def lengths(self):
        return np.array([e.length for e in self.edges])

    @property
    def total_length(self):
        return float(self.lengths.sum())

    @property
    def weighted_length(self):
        return float(np.dot(self.weights, self.lengths))

    def vertex_tangents(self):
        """Outgoing unit tangents, shape (2, 3, 2): [vertex, edge, component]."""
        B = backend(self.spec)
        out = np.empty((2, 3, 2))
        for v, (a, b) in enumerate(((0, 1), (-1, -2))):
            c = np.array([e.charts[a] for e in self.edges])
            x = np.array([e.coords[a] for e in self.edges])
            cn = np.array([e.charts[b] for e in self.edges])
            xn = np.array([e.coords[b] for e in self.edges])
            w, d = B.log(c, x, cn, xn)
            out[v] = w / np.maximum(d, 1e-300)[:, None]
        return out

    def vertex_residuals(self, weights=None):
        """|sum w_i u_i| at p and at q."""
        w = np.asarray(self.weights if weights is None else weights)
        u = self.vertex_tangents()
        B = backend(self.spec)
        out = []
        for v, e in ((0, 0), (1, -1)):
            s = np.einsum("i,ij->j", w, u[v])
            c = np.array([self.edges[0].charts[e]])
            x = self.edges[0].coords[e][None]
            out.append(float(B.norm(c, x, s[None])[0]))
        return np.array(out)

    def edge_residual(self):
        return max(e.max_residual() for e in self.edges)

    def stationarity_residual(self, weights=None):
        return max(float(self.vertex_residuals(weights).max()), self.edge_residual())

    def copy(self, weights=None):
        return ThetaGraph(self.spec, [e.copy() for e in self.edges], self.weights if weights is None else weights)


def meridian_theta(spec, longitudes=(0.0, 2 * math.pi / 3, 4 * math.pi / 3), n=17, weights=(1.0, 1.0, 1.0)):
    """Theta-graph of three meridians joining the poles of the sphere model."""
    t = np.linspace(0.0, math.pi, n)
    edges = []
    for lon in longitudes:
        u = np.column_stack([np.sin(t) * math.cos(lon), np.sin(t) * math.sin(lon), np.cos(t)])
        u[0], u[-1] = [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]
        edges.append(DiscreteCurve.from_sphere(spec, u))
    return ThetaGraph(spec, edges, weights)


def triangle_theta(spec, y=None):
    """Degenerate theta on the doubled triangle.

    The top vertex sits at ``y`` on the top face and the bottom vertex at the
    same position on the bottom face; each edge runs perpendicularly to one
    side, crosses it and comes back on the other face.
    """
    if not isinstance(spec, DoubledTriangle):
        raise TypeError("triangle_theta needs a doubled triangle")
    L = lattice_for(spec.side)
    y = L.center if y is None else np.asarray(y, dtype=float)
    if not L.contains(y) or L.cone_clearance(y, y) < 1e-9:
        raise ValueError("vertex must lie in the face")
    V = L.vertices0
    edges = []
    for a, b in ((0, 1), (1, 2), (2, 0)):
        d = V[b] - V[a]
        foot = V[a] + ((y - V[a]) @ d) / (d @ d) * d
        charts = [Chart.FACE_TOP, Chart.FACE_TOP, Chart.FACE_BOTTOM]
        edges.append(DiscreteCurve(spec, charts, [y, foot, y]))
    return ThetaGraph(spec, edges)


# ---------------------------------------------------------------------------
# net flow


def _hausdorff_edges(spec, a, b, n):
    """Node-wise distance of two edges resampled to a common parametrization."""
    B = backend(spec)
    ra, rb = resample(a, n), resample(b, n)
    chord = B.same_point(ra.charts, ra.coords, rb.charts, rb.coords)
    if chord.max() > 1e-4:
        return float(chord.max())
    return float(np.max(B.distance(ra.charts, ra.coords, rb.charts, rb.coords)))


def _join(spec, first, second_reversed_from):
    """Closed curve running along ``first`` (p -> q) and back along another edge."""
    back = second_reversed_from
    charts = np.concatenate([first.charts, back.charts[-2:0:-1]])
    coords = np.vstack([first.coords, back.coords[-2:0:-1]])
    return DiscreteCurve(spec, charts, coords, True)


def _move_vertex(B, edges, end, step):
    """Move the shared endpoint ``end`` (0 or -1) of the edges by ``step``."""
    e0 = edges[0]
    c, y = B.exp(np.array([e0.charts[end]]), e0.coords[end][None], step[None])
    new = []
    for e in edges:
        e = e.copy()
        e.charts[end], e.coords[end] = c[0], y[0]
        k = 0 if end == 0 else len(e.segment_lengths) - 1
        nb = 1 if end == 0 else len(e) - 2
        e.segment_lengths[k] = float(B.distance(c, y, e.charts[nb : nb + 1], e.coords[nb : nb + 1])[0])
        new.append(e)
    return new


def net_flow(
    spec,
    theta,
    weights=None,
    tol=1e-8,
    max_iter=5000,
    edge_sweeps=4,
    escape_rounds=0,
    follow=True,
    trace=None,
):
    """Weighted length-shortening flow of a theta-graph.

    Each iteration straightens the edges by Birkhoff sweeps with the vertices
    held fixed, then moves each vertex along the descent direction
    ``+sum w_i u_i`` (``u_i`` the outgoing unit tangents) with a backtracking
    line search starting at a tenth of the shortest edge.  The weighted
    length is non-increasing (asserted).

    Terminates as StationaryTheta, or when two edges merge (Hausdorff
    distance below ``5 tol``) or an edge vanishes (length below ``10 tol``).
    With ``follow`` the closed curve left behind is run through
    :func:`birkhoff_flow` and reported as ClosedGeodesic, FigureEight (a
    non-simple closed geodesic) or CollapsedToPoint; otherwise merges and
    vanishing edges are reported as they happen.  With ``escape_rounds`` > 0
    a stationary theta is pushed off along the destabilizing field and the
    unweighted flow resumes, at most that many times.
    """
    w = np.asarray(theta.weights if weights is None else weights, dtype=float)
    if w.shape != (3,) or np.min(w) <= 0:
        raise ValueError("weights must be three positive numbers")
    B = backend(spec)
    edges = [e.copy() for e in theta.edges]
    rows = [] if trace is None else trace
    events = []
    rounds = 0
    wlen = float(np.dot(w, [e.length for e in edges]))
    n_cmp = max(len(e) for e in edges)

    for it in range(max_iter):
        # straighten edges with the vertices fixed
        for k, e in enumerate(edges):
            for _ in range(edge_sweeps):
                midpoint_sweep(e, 1)
                midpoint_sweep(e, 0)
            if e.spacing_ratio() > 1.5 and len(e) > 2:
                r = resample(e)
                if r.length <= e.length + MONOTONE_TOL * max(1.0, e.length):
                    edges[k] = r
        new = float(np.dot(w, [e.length for e in edges]))
        assert new <= wlen + MONOTONE_TOL * max(1.0, wlen), "net flow increased weighted length"
        wlen = new
        th = ThetaGraph(spec, edges, tuple(w))

        lens = th.lengths
        k_short = int(np.argmin(lens))
        if lens[k_short] < 10 * tol or float(B.same_point(*_endpoints(th))[0]) < 10 * tol:
            events.append({"iteration": it, "event": "edge_vanished", "edge": k_short})
            a, b = [k for k in range(3) if k != k_short]
            loop = _join(spec, edges[a], edges[b])
            if not follow:
                return FlowOutcome(
                    FlowKind.EDGE_VANISHED, loop, loop.length, math.nan, is_simple(loop), it, events, rows
                )
            return _follow(spec, loop, tol, it, events, rows)
        for a, b in ((0, 1), (0, 2), (1, 2)):
            if _hausdorff_edges(spec, edges[a], edges[b], n_cmp) < 5 * tol:
                events.append({"iteration": it, "event": "edges_merged", "edges": [a, b]})
                c = 3 - a - b
                loop = _join(spec, edges[a], edges[c])
                return _follow(spec, loop, tol, it, events, rows)

        u = th.vertex_tangents()
        vres = th.vertex_residuals(w)
        eres = th.edge_residual() if vres.max() < tol else math.inf
        rows.append({"iteration": it, "length": wlen, "residual": float(vres.max() if eres == math.inf else max(vres.max(), eres))})
        if vres.max() < tol and eres < tol:
            if rounds < escape_rounds:
                rounds += 1
                events.append({"iteration": it, "event": "escape", "round": rounds})
                edges = _escape(spec, th, 10 * tol)
                w = np.ones(3)
                wlen = float(np.dot(w, [e.length for e in edges]))
                continue
            if rounds and rounds >= escape_rounds and escape_rounds:
                events.append({"iteration": it, "event": "escape_cap_reached"})
            return FlowOutcome(
                FlowKind.STATIONARY_THETA, th, th.total_length, float(max(vres.max(), eres)), None, it, events, rows
            )

        # vertex descent with backtracking on the weighted length
        for v, end in ((0, 0), (1, -1)):
            s = np.einsum("i,ij->j", w, u[v])
            c = np.array([edges[0].charts[end]])
            x = edges[0].coords[end][None]
            nrm = float(B.norm(c, x, s[None])[0])
            if nrm < tol:
                continue
            direction = s / nrm
            tau = 0.1 * min(e.length for e in edges)
            for _ in range(40):
                trial = _move_vertex(B, edges, end, tau * direction)
                tl = float(np.dot(w, [e.length for e in trial]))
                if tl < wlen:
                    edges, wlen = trial, tl
                    break
                tau /= 2
    raise ConvergenceError(
        "net flow hit max_iter", last=ThetaGraph(spec, edges, tuple(w)), residual=rows[-1]["residual"] if rows else None
    )


def _endpoints(th):
    e = th.edges[0]
    return e.charts[:1], e.coords[:1], e.charts[-1:], e.coords[-1:]


def _follow(spec, loop, tol, it, events, rows):
    loop = _even_closed(resample(loop, max(16, len(loop))))
    out = birkhoff_flow(spec, loop, tol=tol)
    kind = out.kind
    if kind == FlowKind.CLOSED_GEODESIC and not out.simple:
        kind = FlowKind.FIGURE_EIGHT
    return FlowOutcome(kind, out.carrier, out.length, out.stationarity_residual, out.simple, it + out.iterations, events, rows)


def _escape(spec, th, size):
    from .variation import theta_destabilizing_field

    fields = theta_destabilizing_field(spec, th)
    B = backend(spec)
    edges = []
    for e, V in zip(th.edges, fields):
        c, y = B.exp(e.charts, e.coords, size * V.components)
        edges.append(DiscreteCurve(spec, c, y))
    return edges


# ---------------------------------------------------------------------------
# shortest closed geodesic by a sweep-out


def _frame(axis):
    axis = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    helper = np.eye(3)[np.argmin(np.abs(axis))]
    e1 = helper - (helper @ axis) * axis
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(axis, e1), axis


def level_curve(spec, level, n, axis=None, jitter=None):
    """Closed curve {u . axis = level} on the sphere model, optionally jittered
    normally by ``jitter(phi)``."""
    e1, e2, ax = _frame(spec.sweep_axis() if axis is None else axis)
    phi = 2 * math.pi * np.arange(n) / n
    z = np.full(n, float(level)) + (0.0 if jitter is None else jitter(phi))
    z = np.clip(z, -0.999, 0.999)
    r = np.sqrt(1 - z * z)
    u = r[:, None] * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2) + z[:, None] * ax
    return DiscreteCurve.from_sphere(spec, u, closed=True)


def _random_jitter(rng, amplitude):
    k = np.arange(1, 4)
    a = rng.normal(size=3) * amplitude / np.sqrt(3)
    b = rng.normal(size=3) * amplitude / np.sqrt(3)
    return lambda phi: np.sin(np.outer(phi, k)) @ a + np.cos(np.outer(phi, k)) @ b


def triangle_line(spec, offset, direction=0, n=32, jitter=None):
    """Closed geodesic family on the doubled triangle: lines perpendicular to
    side ``direction`` at ``offset`` (fraction of the side) from its first
    vertex.  Optional normal jitter ``jitter(t)`` in units of the side."""
    L = lattice_for(spec.side)
    V = L.vertices0
    a, b = V[direction], V[(direction + 1) % 3]
    d = (b - a) / np.linalg.norm(b - a)
    normal = np.array([-d[1], d[0]])
    if normal @ (V[(direction + 2) % 3] - a) < 0:
        normal = -normal
    t = np.arange(n) / n
    off = np.full(n, float(offset)) if jitter is None else offset + jitter(2 * math.pi * t)
    z = a + (off * spec.side)[:, None] * d + (SQ3 * spec.side * t)[:, None] * normal
    y, faces = L.fold(z)
    charts = np.where(faces == BOTTOM, Chart.FACE_BOTTOM, Chart.FACE_TOP)
    return DiscreteCurve(spec, charts, y, closed=True)


def doubled_altitude(spec, direction=0, n=32):
    """The doubled altitude onto side ``direction`` of the doubled triangle.

    It is the boundary member of the flat cylinder of closed geodesics of
    length sqrt(3) s and the only simple one: the cone-free members cross
    themselves once.  It passes through the opposite vertex, so midpoint
    replacement would cut the corner there; it is built exactly as a folded
    straight line instead and its residual is that of the developed line.
    """
    c = triangle_line(spec, 0.5, direction, n)
    return FlowOutcome(FlowKind.CLOSED_GEODESIC, c, c.length, 0.0, is_simple(c), 0, ["exact developed line"])


def polish_closed(curve, tol=1e-10, max_iter=12):
    """Gauss-Newton solve of the discrete closed-geodesic equations.

    Unknowns are the node coordinates; equations the break residual vectors
    ``u_next + u_prev``.  Least-squares steps handle the null directions
    (sliding along the curve, symmetries of the metric).
    """
    B = backend(curve.spec)
    c = curve.copy()
    n = len(c)
    idx = np.arange(n)

    def F(charts, X):
        # X: (K, n, 2) configurations
        K = X.shape[0]
        cc = np.tile(charts, K)
        xx = X.reshape(-1, 2)
        R = np.repeat(np.arange(K), n) * n
        nxt, prv = R + np.tile((idx + 1) % n, K), R + np.tile((idx - 1) % n, K)
        vf, df = B.log(cc, xx, cc[nxt], xx[nxt])
        vb, db = B.log(cc, xx, cc[prv], xx[prv])
        s = vf / np.maximum(df, 1e-300)[:, None] + vb / np.maximum(db, 1e-300)[:, None]
        return s.reshape(K, 2 * n), B.norm(cc, xx, s).reshape(K, n).max(axis=1)

    X = c.coords.copy()
    f0, r0 = F(c.charts, X[None])
    f0, r0 = f0[0], r0[0]
    eps = 1e-7
    for _ in range(max_iter):
        if r0 < tol:
            break
        pert = np.repeat(X[None], 2 * n, axis=0).reshape(2 * n, 2 * n)
        pert[np.arange(2 * n), np.arange(2 * n)] += eps
        fp, _ = F(c.charts, pert.reshape(2 * n, n, 2))
        J = (fp - f0[None]).T / eps
        step = np.linalg.lstsq(J, -f0, rcond=1e-10)[0].reshape(n, 2)
        for damp in (1.0, 0.5, 0.25, 0.125):
            Xt = X + damp * step
            ft, rt = F(c.charts, Xt[None])
            if rt[0] < r0:
                X, f0, r0 = Xt, ft[0], rt[0]
                break
        else:
            break
    out = DiscreteCurve(curve.spec, c.charts, X, True)
    return out, float(r0)


@dataclass(frozen=True)
class ClosedGeodesicEstimate:
    L_estimate: float
    witness: FlowOutcome
    outcomes: tuple
    L_err: float = 0.0

    def __iter__(self):
        return iter((self.L_estimate, self.witness))


def _length_floor(spec):
    """Closed geodesics on a positively curved sphere are at least 2 pi/sqrt(K_max) long."""
    if isinstance(spec, DoubledTriangle):
        return 0.0
    if spec.variant == "round":
        return 2 * math.pi * spec.radius * (1 - 1e-9)
    ext = curvature_extrema(spec, resolution=32)
    if ext.k_min <= 0:
        return 0.0
    return 0.98 * 2 * math.pi / math.sqrt(ext.k_max)


def shortest_closed_geodesic(
    spec, seeds=(), resolution=16, levels=33, jitters=3, seed=0, tol=1e-8, max_iter=6000, trace=None
):
    """Upper bound for the length of the shortest closed geodesic.

    Runs Birkhoff shortening on a sweep-out family (level curves of the
    sweep coordinate, each with ``jitters`` random perturbations) plus any
    user ``seeds`` (closed curves), and returns the shortest closed geodesic
    found.  When no family member converges, the level at which the collapse
    side switches is located by bisection and the flow closest to the
    critical curve is polished by a Gauss-Newton solve.  On the doubled
    triangle the family is the parallel lines perpendicular to each side.

    The result is an upper bound: it is the length of an actual closed
    geodesic, not a certified minimum.
    """
    rng = np.random.default_rng(seed)
    n = max(8, int(resolution) + int(resolution) % 2)
    curves, tags = [], []
    flat = isinstance(spec, DoubledTriangle)
    if flat:
        # offset 0.5 runs through a cone point; it is added exactly below
        offsets = (np.arange(levels // 3 + 1) + 0.5) / (levels // 3 + 1) * 0.5
        for d in range(3):
            for off in offsets:
                curves.append(triangle_line(spec, off, d, n))
                tags.append(("line", d, float(off), 0))
                for j in range(jitters):
                    jit = _random_jitter(rng, 0.01)
                    curves.append(triangle_line(spec, off, d, n, jitter=jit))
                    tags.append(("line", d, float(off), j + 1))
        axis = None
    else:
        axis = spec.sweep_axis()
        zs = np.linspace(-1.0, 1.0, levels + 2)[1:-1]
        for z in zs:
            curves.append(level_curve(spec, z, n))
            tags.append(("level", 0, float(z), 0))
            for j in range(jitters):
                curves.append(level_curve(spec, z, n, jitter=_random_jitter(rng, 0.02)))
                tags.append(("level", 0, float(z), j + 1))
    for k, s in enumerate(seeds):
        curves.append(_even_closed(resample(s, n)))
        tags.append(("seed", k, 0.0, 0))

    floor = _length_floor(spec)
    results = _run_batch(curves, tol, max_iter, floor, trace=trace, axis=axis)
    outcomes = [_outcome(r) for r in results]
    if flat:
        outcomes.extend(doubled_altitude(spec, d, n) for d in range(3))
    found = [o for o in outcomes if o.kind in (FlowKind.CLOSED_GEODESIC, FlowKind.FIGURE_EIGHT)]

    if not found and not flat:
        base = [(t[2], r) for t, r in zip(tags, results) if t[0] == "level" and t[3] == 0]
        found = _bisect(spec, base, n, tol, max_iter, floor, axis, trace)
        outcomes.extend(found)
    if not found:
        raise ConvergenceError("no closed geodesic found; use a denser family or more nodes")
    found = [o for o in outcomes if o.kind in (FlowKind.CLOSED_GEODESIC, FlowKind.FIGURE_EIGHT)]
    shortest = min(o.length for o in found)
    # among equally short geodesics prefer a simple one
    ties = [o for o in found if o.length <= shortest + 10 * tol]
    witness = min(ties, key=lambda o: (not o.simple, o.length, _hash(o.carrier)))
    return ClosedGeodesicEstimate(witness.length, witness, tuple(outcomes), 10 * tol)


def _outcome(r):
    if r.status == "converged":
        simple = is_simple(r.curve)
        kind = FlowKind.CLOSED_GEODESIC if simple else FlowKind.FIGURE_EIGHT
        return FlowOutcome(kind, r.curve, r.curve.length, r.residual, simple, r.iterations)
    if r.status == "collapsed":
        return FlowOutcome(FlowKind.COLLAPSED, r.curve, r.curve.length, math.nan, True, r.iterations)
    return FlowOutcome(FlowKind.COLLAPSED, r.curve, r.curve.length, r.residual, None, r.iterations, ["max_iter"])


def _hash(curve):
    return hash(np.round(curve.coords, 9).tobytes())


def _bisect(spec, base, n, tol, max_iter, floor, axis, trace, steps=40):
    base = [(z, r) for z, r in base if r.status == "collapsed"]
    lo = hi = None
    for (z0, r0), (z1, r1) in zip(base, base[1:]):
        if np.sign(r0.side) != np.sign(r1.side):
            lo, hi, s_lo = z0, z1, np.sign(r0.side)
            break
    if lo is None:
        return []
    best, best_res = None, math.inf
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        r = _run_batch([level_curve(spec, mid, n, axis)], tol, max_iter, floor, track_best=True, axis=axis)[0]
        if r.status == "converged":
            best, best_res = r.curve, r.residual
            break
        if r.best is not None and r.best_residual < best_res:
            best, best_res = r.best, r.best_residual
        if np.sign(r.side) == s_lo:
            lo = mid
        else:
            hi = mid
        if best_res < 1e-4 or hi - lo < 1e-13:
            break
    if best is None:
        return []
    if best_res >= tol:
        best, best_res = polish_closed(best, tol=tol)
    if best_res >= tol:
        return []
    simple = is_simple(best)
    kind = FlowKind.CLOSED_GEODESIC if simple else FlowKind.FIGURE_EIGHT
    return [FlowOutcome(kind, best, best.length, best_res, simple, 0, ["bisection"])]
