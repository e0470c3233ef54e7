"""Fast marching on a triangulated sphere with metric edge lengths.

Each mesh triangle is treated as a flat triangle whose side lengths are the
metric lengths of its edges.  The update of a vertex from an accepted edge
unfolds the triangle and intersects the two distance circles of the edge
endpoints (exact for a point source in a flat region); when the virtual
source does not see the target through the edge, the update falls back to
Dijkstra along the triangle sides.
"""

from __future__ import annotations

import heapq
import math
from functools import lru_cache

import numba
import numpy as np

_PHI = (1 + math.sqrt(5)) / 2
_ICO_V = np.array(
    [
        [-1, _PHI, 0], [1, _PHI, 0], [-1, -_PHI, 0], [1, -_PHI, 0],
        [0, -1, _PHI], [0, 1, _PHI], [0, -1, -_PHI], [0, 1, -_PHI],
        [_PHI, 0, -1], [_PHI, 0, 1], [-_PHI, 0, -1], [-_PHI, 0, 1],
    ],
    dtype=float,
)
_ICO_F = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
)


@lru_cache(maxsize=8)
def icosphere(freq):
    """Geodesic subdivision of the icosahedron; returns (vertices, triangles).

    Each face is split into ``freq**2`` triangles and projected to the unit
    sphere, giving ``10 freq^2 + 2`` vertices.
    """
    V0 = _ICO_V / np.linalg.norm(_ICO_V, axis=1, keepdims=True)
    pts, tris = [], []
    offset = 0
    for a, b, c in _ICO_F:
        A, B, C = V0[a], V0[b], V0[c]
        index = {}
        local = []
        for i in range(freq + 1):
            for j in range(freq + 1 - i):
                index[(i, j)] = len(local)
                local.append(A + (B - A) * (i / freq) + (C - A) * (j / freq))
        for i in range(freq):
            for j in range(freq - i):
                tris.append((index[(i, j)] + offset, index[(i + 1, j)] + offset, index[(i, j + 1)] + offset))
                if i + j + 1 < freq:
                    tris.append(
                        (index[(i + 1, j)] + offset, index[(i + 1, j + 1)] + offset, index[(i, j + 1)] + offset)
                    )
        pts.extend(local)
        offset += len(local)
    pts = np.array(pts)
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    keys = np.round(pts * 1e9).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    verts = pts[first]
    tris = inverse[np.array(tris)]
    verts.setflags(write=False)
    tris.setflags(write=False)
    return verts, tris


def vertex_triangles(n_vertices, tris):
    """CSR incidence (offsets, triangle ids) from vertices to triangles."""
    flat = tris.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=n_vertices)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return offsets, (order // 3).astype(np.int64)


@numba.njit(cache=True)
def _update(ta, tb, a_len, b_len, c_len):
    """Distance at C from A, B with distances ta, tb.

    Side lengths: a_len = |BC|, b_len = |AC|, c_len = |AB|.
    """
    direct = min(ta + b_len, tb + a_len)
    # place A = (0, 0), B = (c, 0), C above the axis
    cx = (b_len * b_len + c_len * c_len - a_len * a_len) / (2 * c_len)
    cy2 = b_len * b_len - cx * cx
    if cy2 <= 0.0:
        return direct
    cy = math.sqrt(cy2)
    # virtual source S below the axis with |SA| = ta, |SB| = tb
    sx = (ta * ta - tb * tb + c_len * c_len) / (2 * c_len)
    sy2 = ta * ta - sx * sx
    if sy2 < 0.0:
        return direct
    sy = -math.sqrt(sy2)
    # the ray S -> C must cross the segment AB
    t = -sy / (cy - sy)
    xcross = sx + t * (cx - sx)
    if xcross < 0.0 or xcross > c_len:
        return direct
    d = math.sqrt((cx - sx) ** 2 + (cy - sy) ** 2)
    return min(d, direct)


@numba.njit(cache=True)
def _march(tris, lengths, offsets, incident, init_idx, init_val):
    n = offsets.shape[0] - 1
    T = np.full(n, np.inf)
    done = np.zeros(n, dtype=np.bool_)
    heap = [(0.0, np.int64(0))]
    heap.pop()
    for k in range(init_idx.shape[0]):
        i = init_idx[k]
        if init_val[k] < T[i]:
            T[i] = init_val[k]
            heapq.heappush(heap, (init_val[k], np.int64(i)))
    while len(heap) > 0:
        t, v = heapq.heappop(heap)
        if done[v]:
            continue
        done[v] = True
        for q in range(offsets[v], offsets[v + 1]):
            tri = incident[q]
            for r in range(3):
                target = tris[tri, r]
                if target == v or done[target]:
                    continue
                other = tris[tri, 0] + tris[tri, 1] + tris[tri, 2] - v - target
                # edge lengths by local index: lengths[tri, r] is the side opposite vertex r
                l_v = 0.0
                l_o = 0.0
                l_t = 0.0
                for s in range(3):
                    w = tris[tri, s]
                    if w == v:
                        l_v = lengths[tri, s]
                    elif w == other:
                        l_o = lengths[tri, s]
                    else:
                        l_t = lengths[tri, s]
                # |v target| = side opposite other, |other target| = opposite v
                cand = T[v] + l_o
                if done[other]:
                    c2 = _update(T[v], T[other], l_v, l_o, l_t)
                    if c2 < cand:
                        cand = c2
                if cand < T[target]:
                    T[target] = cand
                    heapq.heappush(heap, (cand, np.int64(target)))
    return T


class MeshMarcher:
    """Fast marching on the icosphere for one metric and resolution."""

    def __init__(self, verts, tris, lengths):
        self.verts = verts
        self.tris = np.ascontiguousarray(tris, dtype=np.int64)
        self.lengths = np.ascontiguousarray(lengths, dtype=float)
        self.offsets, self.incident = vertex_triangles(len(verts), self.tris)
        self.h = float(np.mean(lengths))

    def march(self, init_idx, init_val):
        return _march(
            self.tris,
            self.lengths,
            self.offsets,
            self.incident,
            np.asarray(init_idx, dtype=np.int64),
            np.asarray(init_val, dtype=float),
        )
