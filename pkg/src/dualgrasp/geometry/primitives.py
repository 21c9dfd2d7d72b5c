"""Procedural watertight meshes used as desk objects and test fixtures.

All generators return ``(vertices, faces)`` with outward (counter-clockwise)
winding; wrap them with :meth:`TriangleMesh.from_arrays`.
"""

from __future__ import annotations

import numpy as np


def box(extents=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)):
    ex = np.asarray(extents, dtype=np.float64) / 2.0
    corners = np.array(
        [[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=np.float64
    )
    vertices = corners * ex + np.asarray(center, dtype=np.float64)
    # corner index = 4*ix + 2*iy + iz
    faces = np.array(
        [
            [0, 1, 3], [0, 3, 2],  # -x
            [4, 6, 7], [4, 7, 5],  # +x
            [0, 4, 5], [0, 5, 1],  # -y
            [2, 3, 7], [2, 7, 6],  # +y
            [0, 2, 6], [0, 6, 4],  # -z
            [1, 5, 7], [1, 7, 3],  # +z
        ],
        dtype=np.int64,
    )
    return vertices, faces


def icosphere(subdivisions: int = 3, radius: float = 1.0, center=(0.0, 0.0, 0.0)):
    t = (1.0 + 5.0**0.5) / 2.0
    verts = [
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ]
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = [list(np.asarray(v, float) / np.linalg.norm(v)) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = np.asarray(verts[a]) + np.asarray(verts[b])
                verts.append(list(m / np.linalg.norm(m)))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new
    vertices = np.asarray(verts) * radius + np.asarray(center, dtype=np.float64)
    return vertices, np.asarray(faces, dtype=np.int64)


def extrude(polygon, height: float, z0: float = 0.0):
    """Prism from a simple counter-clockwise polygon in the xy plane.

    Caps are fan-triangulated from the polygon centroid, so the polygon must be
    star-shaped about its centroid.
    """
    poly = np.asarray(polygon, dtype=np.float64)
    n = len(poly)
    c = poly.mean(axis=0)
    bottom = np.column_stack([poly, np.full(n, z0)])
    top = np.column_stack([poly, np.full(n, z0 + height)])
    vertices = np.vstack([bottom, top, [[c[0], c[1], z0]], [[c[0], c[1], z0 + height]]])
    cb, ct = 2 * n, 2 * n + 1
    faces = []
    for i in range(n):
        j = (i + 1) % n
        faces += [[i, j, n + j], [i, n + j, n + i]]
        faces.append([cb, j, i])
        faces.append([ct, n + i, n + j])
    return vertices, np.asarray(faces, dtype=np.int64)


def cylinder(radius: float = 0.5, height: float = 1.0, sections: int = 32):
    ang = np.linspace(0.0, 2.0 * np.pi, sections, endpoint=False)
    poly = np.column_stack([radius * np.cos(ang), radius * np.sin(ang)])
    return extrude(poly, height, z0=-height / 2.0)


def l_prism(size: float = 1.0, depth: float | None = None):
    """Two ``size`` cubes joined into an L: cells [0,2s]x[0,s] and [0,s]x[s,2s].

    The side walls are split at the interior corner so every edge is shared by
    exactly two faces.
    """
    s = size
    depth = s if depth is None else depth
    # boundary walked counter-clockwise, including the T-junction vertices
    poly = np.array(
        [[0, 0], [s, 0], [2 * s, 0], [2 * s, s], [s, s], [s, 2 * s], [0, 2 * s], [0, s]],
        dtype=np.float64,
    )
    n = len(poly)
    bottom = np.column_stack([poly, np.zeros(n)])
    top = np.column_stack([poly, np.full(n, depth)])
    vertices = np.vstack([bottom, top])
    faces = []
    for i in range(n):
        j = (i + 1) % n
        faces += [[i, j, n + j], [i, n + j, n + i]]
    # caps: the L splits into three unit squares sharing vertices 1, 4, 7 and 0
    squares = [(0, 1, 4, 7), (1, 2, 3, 4), (7, 4, 5, 6)]
    for a, b, c, d in squares:
        faces += [[a, c, b], [a, d, c]]
        faces += [[n + a, n + b, n + c], [n + a, n + c, n + d]]
    return vertices, np.asarray(faces, dtype=np.int64)


def lathe(profile, sections: int = 32):
    """Solid of revolution about z from a (radius, z) profile running bottom to top.

    The first and last profile points are closed with fan caps on the axis.
    """
    prof = np.asarray(profile, dtype=np.float64)
    m = len(prof)
    ang = np.linspace(0.0, 2.0 * np.pi, sections, endpoint=False)
    ring = np.stack(
        [np.column_stack([r * np.cos(ang), r * np.sin(ang), np.full(sections, z)]) for r, z in prof]
    ).reshape(-1, 3)
    bottom = m * sections
    top = bottom + 1
    vertices = np.vstack([ring, [[0.0, 0.0, prof[0, 1]]], [[0.0, 0.0, prof[-1, 1]]]])
    faces = []
    for k in range(m - 1):
        for i in range(sections):
            j = (i + 1) % sections
            a, b = k * sections + i, k * sections + j
            c, d = a + sections, b + sections
            faces += [[a, b, d], [a, d, c]]
    last = (m - 1) * sections
    for i in range(sections):
        j = (i + 1) % sections
        faces.append([bottom, j, i])
        faces.append([top, last + i, last + j])
    return vertices, np.asarray(faces, dtype=np.int64)


def bottle(height: float = 0.24, radius: float = 0.035, neck_radius: float = 0.013, sections: int = 32):
    """Wine-bottle-like solid of revolution (a common ShapeNet ``bottle`` silhouette)."""
    h, r, q = height, radius, neck_radius
    profile = [
        (r, 0.0),
        (r, 0.55 * h),
        (0.8 * r, 0.65 * h),
        (q * 1.3, 0.75 * h),
        (q, 0.8 * h),
        (q, 0.97 * h),
        (q * 1.15, h),
    ]
    return lathe(profile, sections=sections)
