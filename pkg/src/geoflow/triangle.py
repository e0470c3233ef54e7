"""Exact flat geometry of the doubled equilateral triangle.

The doubled triangle is the plane modulo the orientation-preserving part of
the reflection group of the equilateral triangular tiling.  Every face of
the tiling is an image of the base triangle ``T0 = (A, B, C)``; upward
triangles carry the top face, downward triangles the bottom face.  Lattice
vertices are 3-coloured by ``(i - j) mod 3`` and each group element maps
colours to colours, which fixes the affine map from ``T0`` to any tile.

Distances are minima over images, geodesics are straight lines in the
developed plane folded back into ``T0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConePointError

SQ3 = math.sqrt(3.0)
TOP, BOTTOM = 0, 1


@dataclass(frozen=True)
class Tile:
    linear: np.ndarray  # 2x2, maps T0 vectors to tile vectors
    offset: np.ndarray
    parity: int  # TOP for upward tiles, BOTTOM for downward


class Lattice:
    """Tiles of the developed plane for a doubled triangle of side ``side``."""

    def __init__(self, side=1.0, reach=4):
        self.side = float(side)
        s = self.side
        self.e1 = np.array([s, 0.0])
        self.e2 = np.array([s / 2, s * SQ3 / 2])
        self.basis = np.stack([self.e1, self.e2], axis=1)
        self.basis_inv = np.linalg.inv(self.basis)
        self.vertices0 = np.array([[0.0, 0.0], [s, 0.0], [s / 2, s * SQ3 / 2]])
        edge_inv = np.linalg.inv(np.stack([self.vertices0[1], self.vertices0[2]], axis=1))
        tiles = []
        for i in range(-reach, reach + 1):
            for j in range(-reach, reach + 1):
                up = [(i, j), (i + 1, j), (i, j + 1)]
                down = [(i + 1, j), (i, j + 1), (i + 1, j + 1)]
                for verts, parity in ((up, TOP), (down, BOTTOM)):
                    P = np.empty((3, 2))
                    for a, b in verts:
                        P[(a - b) % 3] = a * self.e1 + b * self.e2
                    M = np.stack([P[1] - P[0], P[2] - P[0]], axis=1) @ edge_inv
                    tiles.append((i, j, parity, M, P[0]))
        self._index = {(i, j, p): k for k, (i, j, p, _, _) in enumerate(tiles)}
        self.reach = reach
        self._dense = np.full((2 * reach + 1, 2 * reach + 1, 2), -1, dtype=int)
        for (i, j, p), k in self._index.items():
            self._dense[i + reach, j + reach, p] = k
        self.linear = np.array([t[3] for t in tiles])
        self.offset = np.array([t[4] for t in tiles])
        self.parity = np.array([t[2] for t in tiles])
        centers = self.offset + np.einsum("kij,j->ki", self.linear, self.vertices0.mean(axis=0))
        near = np.linalg.norm(centers - self.vertices0.mean(axis=0), axis=1) <= 3.2 * s
        self._near = {
            TOP: np.flatnonzero(near & (self.parity == TOP)),
            BOTTOM: np.flatnonzero(near & (self.parity == BOTTOM)),
        }
        # the mirror of T0 across AB is the home tile of bottom-face points
        self.home = {TOP: self._index[(0, 0, TOP)], BOTTOM: self._index[(0, -1, BOTTOM)]}
        jr = np.arange(-2 * reach, 2 * reach + 1)
        I, J = np.meshgrid(jr, jr, indexing="ij")
        self.lattice_points = I.reshape(-1, 1) * self.e1 + J.reshape(-1, 1) * self.e2

    # -- lifting and folding -------------------------------------------------

    def lift(self, y, face):
        """Plane position of a face point in its home tile."""
        k = self.home[int(face)]
        return self.linear[k] @ np.asarray(y) + self.offset[k]

    def lift_vector(self, w, face):
        return self.linear[self.home[int(face)]] @ np.asarray(w)

    def _homes(self, faces):
        return np.where(np.asarray(faces) == BOTTOM, self.home[BOTTOM], self.home[TOP])

    def lift_many(self, y, faces):
        k = self._homes(faces)
        return np.einsum("nij,nj->ni", self.linear[k], np.atleast_2d(y)) + self.offset[k]

    def lift_vectors(self, w, faces):
        k = self._homes(faces)
        return np.einsum("nij,nj->ni", self.linear[k], np.atleast_2d(w))

    def locate(self, z):
        """Tile index (i, j, parity) containing plane points ``z`` (N, 2)."""
        z = np.atleast_2d(z)
        ab = z @ self.basis_inv.T
        ij = np.floor(ab + 1e-13).astype(int)
        frac = ab - ij
        parity = (frac.sum(axis=1) > 1.0 + 1e-13).astype(int)
        return ij[:, 0], ij[:, 1], parity

    def _tile_ids(self, z):
        i, j, p = self.locate(z)
        r = self.reach
        if np.any((np.abs(i) > r) | (np.abs(j) > r)):
            raise ValueError("point outside the developed region")
        return self._dense[i + r, j + r, p]

    def fold(self, z):
        """Fold plane points back to ``(T0 coords, face)``."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        k = self._tile_ids(z)
        inv = np.linalg.inv(self.linear[k])
        y = np.einsum("nij,nj->ni", inv, z - self.offset[k])
        return self.clamp(y), self.parity[k]

    def fold_vector(self, z, w):
        k = self._tile_ids(np.atleast_2d(z))
        inv = np.linalg.inv(self.linear[k])
        return np.einsum("nij,nj->ni", inv, np.atleast_2d(w))

    def clamp(self, y):
        """Snap rounding noise so coordinates stay in the closed triangle."""
        y = np.array(y, dtype=float)
        ab = y @ self.basis_inv.T
        ab = np.clip(ab, 0.0, None)
        tot = ab.sum(axis=1)
        over = tot > 1.0
        ab[over] /= tot[over, None]
        return ab @ self.basis.T

    def contains(self, y, tol=1e-12):
        ab = np.atleast_2d(y) @ self.basis_inv.T
        return bool(np.all(ab >= -tol) and np.all(ab.sum(axis=1) <= 1 + tol))

    # -- distances -----------------------------------------------------------

    def images(self, y, face):
        """All plane images of face point ``y`` near the base tiles, (K, 2)."""
        idx = self._near[int(face)]
        return np.einsum("kij,j->ki", self.linear[idx], np.asarray(y)) + self.offset[idx]

    def nearest_image(self, p, pface, q, qface):
        """Lift of ``p`` and the closest plane image of ``q``."""
        pl = self.lift(p, pface)
        imgs = self.images(q, qface)
        k = np.argmin(np.sum((imgs - pl) ** 2, axis=1))
        return pl, imgs[k]

    def nearest_images(self, P, pfaces, Q, qfaces, ref=None):
        """Vectorized :meth:`nearest_image` over paired arrays.

        With ``ref`` (plane points) the images of ``Q`` closest to ``ref``
        are returned instead of those closest to the lifts of ``P``.
        """
        P, Q = np.atleast_2d(P), np.atleast_2d(Q)
        pfaces, qfaces = np.asarray(pfaces), np.asarray(qfaces)
        lifts = self.lift_many(P, pfaces) if ref is None else np.atleast_2d(ref)
        out = np.empty_like(lifts)
        for f in (TOP, BOTTOM):
            rows = np.flatnonzero(qfaces == f)
            if len(rows) == 0:
                continue
            idx = self._near[f]
            imgs = np.einsum("kij,mj->mki", self.linear[idx], Q[rows]) + self.offset[idx][None]
            d2 = np.sum((imgs - lifts[rows, None, :]) ** 2, axis=-1)
            out[rows] = imgs[np.arange(len(rows)), np.argmin(d2, axis=1)]
        return lifts, out

    def distance(self, p, pface, q, qface):
        pl, ql = self.nearest_image(p, pface, q, qface)
        return float(np.linalg.norm(ql - pl))

    def pairwise(self, P, pfaces, Q, qfaces, chunk=256):
        """Distance matrix between face-point arrays."""
        P, Q = np.atleast_2d(P), np.atleast_2d(Q)
        pfaces, qfaces = np.asarray(pfaces), np.asarray(qfaces)
        lifts = np.array([self.lift(p, f) for p, f in zip(P, pfaces)])
        imgs = {}
        for f in (TOP, BOTTOM):
            idx = self._near[f]
            imgs[f] = np.einsum("kij,mj->mki", self.linear[idx], Q) + self.offset[idx][None]
        out = np.empty((len(P), len(Q)))
        for f in (TOP, BOTTOM):
            cols = np.flatnonzero(qfaces == f)
            if len(cols) == 0:
                continue
            I = imgs[f][cols]  # (m, K, 2)
            for s in range(0, len(P), chunk):
                L = lifts[s : s + chunk]
                d2 = np.sum((I[None] - L[:, None, None, :]) ** 2, axis=-1)
                out[s : s + chunk, cols] = np.sqrt(d2.min(axis=-1))
        return out

    # -- straight lines ------------------------------------------------------

    def cone_clearance(self, z0, z1):
        """Smallest distance from lattice vertices to the segment z0 -> z1."""
        d = z1 - z0
        L2 = d @ d
        rel = self.lattice_points - z0
        if L2 == 0:
            return float(np.min(np.linalg.norm(rel, axis=1)))
        t = np.clip(rel @ d / L2, 0.0, 1.0)
        return float(np.min(np.linalg.norm(rel - t[:, None] * d, axis=1)))

    def edge_crossings(self, z0, z1):
        """Parameters in (0, 1) where the segment crosses tiling lines."""
        ts = []
        normals = [np.array([0.0, 1.0]), np.array([SQ3 / 2, -0.5]), np.array([SQ3 / 2, 0.5])]
        spacing = self.side * SQ3 / 2
        for n in normals:
            a, b = (z0 @ n) / spacing, (z1 @ n) / spacing
            if a == b:
                continue
            lo, hi = sorted((a, b))
            for k in range(math.floor(lo) + 1, math.ceil(hi)):
                ts.append((k - a) / (b - a))
        return sorted(t for t in ts if 1e-12 < t < 1 - 1e-12)

    def straight(self, z0, z1, step=None, check_cones=True, cone_tol=1e-9):
        """Fold the plane segment into face points, splitting at tile edges.

        Returns ``(coords, faces, params)`` with params in [0, 1].
        """
        z0, z1 = np.asarray(z0, float), np.asarray(z1, float)
        if check_cones:
            interior = self._interior_clearance(z0, z1)
            if interior < cone_tol:
                raise ConePointError(f"trajectory passes within {interior:.2e} of a cone point")
        ts = {0.0, 1.0, *self.edge_crossings(z0, z1)}
        if step is not None and step > 0:
            length = np.linalg.norm(z1 - z0)
            n = max(1, math.ceil(length / step - 1e-9))
            ts.update(np.linspace(0.0, 1.0, n + 1))
        ts = np.array(sorted(ts))
        keep = np.concatenate([[True], np.diff(ts) > 1e-12])
        ts = ts[keep]
        pts = z0 + ts[:, None] * (z1 - z0)
        # fold using tile midpoints so points on tile edges get a definite face
        mids = np.empty_like(pts)
        mids[:-1] = z0 + (0.5 * (ts[:-1] + ts[1:]))[:, None] * (z1 - z0)
        mids[-1] = mids[-2] if len(ts) > 1 else pts[-1]
        k = self._tile_ids(mids)
        inv = np.linalg.inv(self.linear[k])
        y = self.clamp(np.einsum("nij,nj->ni", inv, pts - self.offset[k]))
        return y, self.parity[k], ts

    def _interior_clearance(self, z0, z1):
        rel = self.lattice_points - z0
        d = z1 - z0
        L2 = d @ d
        if L2 == 0:
            return math.inf
        t = rel @ d / L2
        inside = (t > 1e-12) & (t < 1 - 1e-12)
        if not np.any(inside):
            return math.inf
        return float(np.min(np.linalg.norm(rel[inside] - t[inside, None] * d, axis=1)))

    # -- sample nets ---------------------------------------------------------

    def net(self, n):
        """Triangular sample net on both faces; includes vertices and centers."""
        pts = []
        for i in range(n + 1):
            for j in range(n + 1 - i):
                pts.append((i / n) * self.vertices0[1] + (j / n) * self.vertices0[2])
        pts = np.array(pts)
        center = self.vertices0.mean(axis=0)
        pts = np.vstack([pts, center])
        faces = np.concatenate([np.zeros(len(pts), int), np.ones(len(pts), int)])
        return np.vstack([pts, pts]), faces

    @property
    def center(self):
        return self.vertices0.mean(axis=0)


_CACHE = {}


def lattice_for(side):
    key = float(side)
    if key not in _CACHE:
        _CACHE[key] = Lattice(key)
    return _CACHE[key]
