"""Spatial index over mesh triangles plus the vectorized intersection kernels.

The index is a bounding-volume hierarchy flattened to its leaves: faces are
recursively split at the median centroid along the widest axis until a leaf
holds at most ``leaf_size`` faces. Runs of ``GROUP`` consecutive leaves
(spatially coherent in split order) get a bounding box of their own, so a
query tests group boxes first, then the leaves of surviving groups, and only
then touches faces.
"""

from __future__ import annotations

import numpy as np

RAY_EPS = 1e-9
_BARY_TOL = 1e-12
GROUP = 64


class FaceIndex:
    def __init__(self, triangles: np.ndarray, leaf_size: int = 8):
        triangles = np.asarray(triangles, dtype=np.float64)
        n = len(triangles)
        centroids = triangles.mean(axis=1)
        order = np.arange(n)
        leaves = []
        stack = [(0, n)]
        while stack:
            start, stop = stack.pop()
            if stop - start <= leaf_size:
                leaves.append((start, stop))
                continue
            idx = order[start:stop]
            c = centroids[idx]
            axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
            mid = (stop - start) // 2
            # stable ordering keeps the build deterministic under ties
            part = np.argsort(c[:, axis], kind="stable")
            order[start:stop] = idx[part]
            stack.append((start + mid, stop))
            stack.append((start, start + mid))
        leaves.sort()
        self.order = order
        self.leaf_start = np.array([s for s, _ in leaves], dtype=np.int64)
        self.leaf_stop = np.array([e for _, e in leaves], dtype=np.int64)
        tri_lo = triangles.min(axis=1)
        tri_hi = triangles.max(axis=1)
        self.lo = np.array([tri_lo[order[s:e]].min(axis=0) for s, e in leaves])
        self.hi = np.array([tri_hi[order[s:e]].max(axis=0) for s, e in leaves])
        # inflate so boundary-grazing rays and touching boxes are never culled
        pad = 1e-9 * (1.0 + np.abs(triangles).max(initial=0.0))
        self.lo -= pad
        self.hi += pad
        self.n_faces = n
        self.leaf_size = self.leaf_stop - self.leaf_start
        bounds = np.arange(0, len(leaves), GROUP)
        self.group_first = bounds
        self.group_count = np.diff(np.append(bounds, len(leaves)))
        self.group_lo = np.minimum.reduceat(self.lo, bounds, axis=0)
        self.group_hi = np.maximum.reduceat(self.hi, bounds, axis=0)

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_start)

    def _faces_of(self, leaf_mask: np.ndarray) -> np.ndarray:
        faces = self.order[np.repeat(leaf_mask, self.leaf_size)]
        faces.sort()
        return faces

    def ray_candidates(self, origin, direction) -> np.ndarray:
        """Sorted indices of faces whose leaf box the ray (t >= 0) passes through."""
        return self.rays_candidates(origin, direction)[1]

    def rays_candidates(self, origins, directions) -> tuple[np.ndarray, np.ndarray]:
        """(ray, face) index pairs for many rays (t >= 0), sorted by ray then face."""
        o = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
        d = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
        with np.errstate(divide="ignore", over="ignore"):
            inv = 1.0 / d

        def keep(q, lo, hi):
            return _ray_hits_boxes(o[q], d[q], inv[q], lo, hi)

        return self._descend(len(o), keep)

    def obb_pairs(self, centers, axes, halves) -> tuple[np.ndarray, np.ndarray]:
        """(box, face) index pairs not culled by the leaf boxes, sorted by box then face."""
        c = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
        a = np.asarray(axes, dtype=np.float64).reshape(-1, 3, 3)
        h = np.asarray(halves, dtype=np.float64).reshape(-1, 3)

        def keep(q, lo, hi):
            return _obb_meets_aabb(c[q], a[q], h[q], lo, hi)

        return self._descend(len(c), keep)

    def _descend(self, n: int, keep) -> tuple[np.ndarray, np.ndarray]:
        ng = len(self.group_first)
        q = np.repeat(np.arange(n), ng)
        g = np.tile(np.arange(ng), n)
        ok = keep(q, self.group_lo[g], self.group_hi[g])
        q, g = q[ok], g[ok]
        q, leaf = _expand(q, self.group_first[g], self.group_count[g])
        ok = keep(q, self.lo[leaf], self.hi[leaf])
        q, leaf = q[ok], leaf[ok]
        q, pos = _expand(q, self.leaf_start[leaf], self.leaf_size[leaf])
        faces = self.order[pos]
        o = np.lexsort((faces, q))
        return q[o], faces[o]

    def box_candidates(self, lo, hi) -> np.ndarray:
        """Sorted indices of faces whose leaf box overlaps the axis-aligned box."""
        overlap = np.all((self.lo <= np.asarray(hi)) & (self.hi >= np.asarray(lo)), axis=1)
        return self._faces_of(overlap)


def _expand(q: np.ndarray, first: np.ndarray, count: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Repeat each query row over the index range first..first+count-1."""
    qi = np.repeat(q, count)
    offset = np.arange(count.sum()) - np.repeat(np.cumsum(count) - count, count)
    return qi, np.repeat(first, count) + offset


def _ray_hits_boxes(o, d, inv, lo, hi) -> np.ndarray:
    """Row-wise slab test of rays (t >= 0) against axis-aligned boxes."""
    with np.errstate(invalid="ignore"):
        t0 = (lo - o) * inv
        t1 = (hi - o) * inv
    tmin = np.minimum(t0, t1)
    tmax = np.maximum(t0, t1)
    # zero direction component: the slab is either all-in or all-out
    flat = ~np.isfinite(inv)
    if flat.any():
        inside = (o >= lo) & (o <= hi)
        tmin = np.where(flat, np.where(inside, -np.inf, np.inf), tmin)
        tmax = np.where(flat, np.where(inside, np.inf, -np.inf), tmax)
    enter = tmin.max(axis=1)
    leave = tmax.min(axis=1)
    return (enter <= leave) & (leave >= 0.0)


def _obb_meets_aabb(c, a, h, lo, hi) -> np.ndarray:
    """Row-wise overlap test on the six face axes (a superset of true overlaps)."""
    m = 0.5 * (lo + hi)
    e = 0.5 * (hi - lo)
    d = m - c
    absa = np.abs(a)
    reach = np.einsum("bij,bj->bi", absa, h)
    ok = np.all(np.abs(d) <= e + reach, axis=1)
    proj = np.abs(np.einsum("bi,bij->bj", d, a))
    return ok & np.all(proj <= np.einsum("bi,bij->bj", e, absa) + h, axis=1)


def cross_rows(a, b) -> np.ndarray:
    """Row-wise cross product; either argument may be a single 3-vector."""
    a = np.asarray(a)
    b = np.asarray(b)
    ax, ay, az = a[..., 0], a[..., 1], a[..., 2]
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx], axis=-1)


def ray_triangle_t(origin, direction, triangles: np.ndarray) -> np.ndarray:
    """Moller-Trumbore ray parameters, ``inf`` where the ray misses.

    ``origin`` and ``direction`` are single 3-vectors or row-aligned with
    ``triangles``. Hits on the triangle boundary count as hits.
    """
    v0 = triangles[:, 0]
    e1 = triangles[:, 1] - v0
    e2 = triangles[:, 2] - v0
    direction = np.broadcast_to(direction, v0.shape)
    p = cross_rows(direction, e2)
    det = _dot_rows(e1, p)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        inv = 1.0 / det
        s = origin - v0
        u = _dot_rows(s, p) * inv
        q = cross_rows(s, e1)
        v = _dot_rows(q, direction) * inv
        t = _dot_rows(e2, q) * inv
        ok = (
            (det != 0.0)
            & (u >= -_BARY_TOL)
            & (v >= -_BARY_TOL)
            & (u + v <= 1.0 + _BARY_TOL)
        )
    return np.where(ok, t, np.inf)


def _dot_rows(a, b) -> np.ndarray:
    # explicit sum: identical rounding whatever the batch shape
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def to_box_frame(points: np.ndarray, centers, axes) -> np.ndarray:
    """Coordinates of ``points`` (..., k, 3) in boxes (..., 3) / (..., 3, 3) broadcast per row."""
    d = points - centers[..., None, :]
    return np.stack([_dot_rows(d, axes[..., None, :, i]) for i in range(3)], axis=-1)


def triangle_box_overlap(v: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Separating-axis overlap test, row by row.

    ``v`` (p, 3, 3) holds triangle vertices already in the box frame and
    ``h`` (p, 3) the box half extents. Closed sets: touching counts. Rows are
    filtered stage by stage so the 9 edge axes only run on undecided pairs.
    """
    out = np.zeros(len(v), dtype=bool)
    # a vertex inside the box settles it
    inside = np.any(np.all(np.abs(v) <= h[:, None, :], axis=2), axis=1)
    out[inside] = True
    # box face normals
    und = ~inside & ~(np.any(v.min(axis=1) > h, axis=1) | np.any(v.max(axis=1) < -h, axis=1))
    idx = np.flatnonzero(und)
    v = v[idx]
    h = h[idx]

    e = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 1], v[:, 0] - v[:, 2]], axis=1)
    # triangle normal
    nrm = cross_rows(e[:, 0], e[:, 1])
    keep = np.abs(_dot_rows(nrm, v[:, 0])) <= _dot_rows(np.abs(nrm), h)
    idx, v, h, e = idx[keep], v[keep], h[keep], e[keep]

    # edge x box-axis: e x X = (0, ez, -ey), e x Y = (-ez, 0, ex), e x Z = (ey, -ex, 0)
    ex, ey, ez = e[:, :, None, 0], e[:, :, None, 1], e[:, :, None, 2]  # (p, 3 edges, 1)
    vx, vy, vz = v[:, None, :, 0], v[:, None, :, 1], v[:, None, :, 2]  # (p, 1, 3 verts)
    hx, hy, hz = h[:, None, 0:1], h[:, None, 1:2], h[:, None, 2:3]
    sep = np.zeros(len(v), dtype=bool)
    for proj, r in (
        (vy * ez - vz * ey, hy * np.abs(ez) + hz * np.abs(ey)),
        (vz * ex - vx * ez, hx * np.abs(ez) + hz * np.abs(ex)),
        (vx * ey - vy * ex, hx * np.abs(ey) + hy * np.abs(ex)),
    ):
        sep |= np.any((proj.min(axis=2) > r[..., 0]) | (proj.max(axis=2) < -r[..., 0]), axis=1)
    out[idx[~sep]] = True
    return out


def triangles_intersect_boxes(triangles: np.ndarray, centers, axes, halves) -> np.ndarray:
    """All-pairs overlap of triangles (n, 3, 3) with oriented boxes.

    ``centers`` (b, 3), ``axes`` (b, 3, 3) with box axes as columns, ``halves``
    (b, 3). Returns a (b, n) boolean array.
    """
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 1, 3)
    axes = np.asarray(axes, dtype=np.float64).reshape(-1, 1, 3, 3)
    h = np.asarray(halves, dtype=np.float64).reshape(-1, 1, 3)
    tri = np.asarray(triangles, dtype=np.float64)[None]
    v = to_box_frame(tri, centers, axes)
    shape = v.shape[:2]
    h = np.broadcast_to(h, shape + (3,)).reshape(-1, 3)
    return triangle_box_overlap(v.reshape(-1, 3, 3), h).reshape(shape)


def triangles_intersect_box(triangles: np.ndarray, center, axes, half) -> np.ndarray:
    """Single-box form of :func:`triangles_intersect_boxes`."""
    return triangles_intersect_boxes(triangles, center, axes, half)[0]
