"""Slow, independent reference implementations used as test oracles.

Nothing here calls the package's acceleration structures or vectorized
kernels; each check is written out per triangle or per box.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from dualgrasp.force_closure import ExternalWrench, assemble
from dualgrasp.wrench import contact_frame, grasp_matrix, rank_test


def write_obj(path, vertices, faces) -> Path:
    path = Path(path)
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in np.asarray(vertices).tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in np.asarray(faces).tolist()]
    path.write_text("\n".join(lines) + "\n")
    return path


# -- rays ---------------------------------------------------------------------

def ray_hits_t(o, d, triangles, eps=1e-15, tol=0.0):
    """Moller-Trumbore against every triangle at once; nan where the ray misses.

    ``tol`` > 0 inflates the triangles in barycentric terms, < 0 shrinks them.
    """
    tri = np.asarray(triangles, dtype=np.float64)
    v0 = tri[:, 0]
    e1, e2 = tri[:, 1] - v0, tri[:, 2] - v0
    p = np.cross(d, e2)
    det = e1 @ p if e1.ndim == 1 else np.einsum("ij,ij->i", e1, p)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        inv = 1.0 / det
        s = o - v0
        u = np.einsum("ij,ij->i", s, p) * inv
        q = np.cross(s, e1)
        v = (q @ d) * inv
        t = np.einsum("ij,ij->i", e2, q) * inv
        hit = (np.abs(det) >= eps) & (u >= -tol) & (v >= -tol) & (u + v <= 1 + tol)
    return np.where(hit, t, np.nan)


def brute_raycast(triangles, o, d, t_min=1e-9, tol=0.0):
    """(t, face) of the nearest hit over every face, or (inf, -1)."""
    t = ray_hits_t(np.asarray(o, dtype=np.float64), np.asarray(d, dtype=np.float64), triangles, tol=tol)
    t = np.where(t > t_min, t, np.inf)
    k = int(np.argmin(t))
    return (float(t[k]), k) if np.isfinite(t[k]) else (math.inf, -1)


def brute_inside(triangles, point, direction=(0.31, 0.53, 0.79)):
    """Crossing parity over every face along a fixed direction."""
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)
    t = ray_hits_t(np.asarray(point, dtype=np.float64), d, triangles)
    return int(np.sum(t > 1e-12)) % 2 == 1


# -- triangle vs oriented box ------------------------------------------------

def _separated(axis, verts, half):
    n = np.linalg.norm(axis)
    if n < 1e-14:
        return False
    axis = axis / n
    p = verts @ axis
    r = np.abs(axis) @ half
    return p.min() > r or p.max() < -r


def triangle_box_sat(tri_local, half):
    """13-axis separating-axis test in the box frame; touching counts as overlap."""
    v = np.asarray(tri_local, dtype=np.float64)
    axes = list(np.eye(3))
    e = [v[1] - v[0], v[2] - v[1], v[0] - v[2]]
    axes.append(np.cross(e[0], e[1]))
    axes += [np.cross(a, b) for a in np.eye(3) for b in e]
    return not any(_separated(a, v, half) for a in axes)


def triangles_box_sat(tri_local, half):
    """:func:`triangle_box_sat` over an (n, 3, 3) stack at once."""
    v = np.asarray(tri_local, dtype=np.float64)
    e = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 1], v[:, 0] - v[:, 2]], axis=1)
    n = len(v)
    axes = [np.broadcast_to(a, (n, 3)) for a in np.eye(3)]
    axes.append(np.cross(e[:, 0], e[:, 1]))
    axes += [np.cross(np.broadcast_to(a, (n, 3)), e[:, k]) for a in np.eye(3) for k in range(3)]
    separated = np.zeros(n, dtype=bool)
    for ax in axes:
        norm = np.linalg.norm(ax, axis=1)
        good = norm >= 1e-14
        u = ax / np.where(good, norm, 1.0)[:, None]
        p = np.einsum("nkj,nj->nk", v, u)
        r = np.abs(u) @ half
        separated |= good & ((p.min(axis=1) > r) | (p.max(axis=1) < -r))
    return ~separated


def box_collides(center, axes, half, triangles, vertex0):
    """Surface overlap with any face, box inside the mesh, or mesh inside the box."""
    local = (np.asarray(triangles) - center) @ axes
    if triangles_box_sat(local, half).any():
        return True
    if np.all(np.abs((vertex0 - center) @ axes) <= half):
        return True
    return brute_inside(triangles, center)


def gripper_collides(boxes, mesh):
    tris = np.asarray(mesh.vertices)[np.asarray(mesh.faces)]
    return any(box_collides(b.center, b.axes, b.half, tris, mesh.vertices[0]) for b in boxes)


# -- antipodality ----------------------------------------------------------

def contact_angles_deg(c1, n1, c2, n2):
    """Angles between the contact line and each inward normal, in degrees."""
    d = np.asarray(c2) - np.asarray(c1)
    d = d / np.linalg.norm(d)
    a1 = math.degrees(math.acos(max(-1.0, min(1.0, float(d @ n1)))))
    a2 = math.degrees(math.acos(max(-1.0, min(1.0, float(-d @ n2)))))
    return a1, a2


# -- force-closure instances --------------------------------------------------

def cube_side_program(mu, f_high=70.0, mass=1.0, edge=0.1):
    """Four contacts at the centers of the +-x and +-y faces of a cube, gravity at the COM."""
    h = edge / 2.0
    pts = [(h, 0, 0), (-h, 0, 0), (0, h, 0), (0, -h, 0)]
    frames = [contact_frame(p, -np.asarray(p, dtype=np.float64) / h) for p in pts]
    return assemble(frames, ExternalWrench.gravity(mass), mu, f_high)


def random_programs(n, seed=0, mass_range=(0.5, 30.0), mu_range=(0.1, 0.8), f_high=70.0):
    """Rank-feasible random 4-contact programs with roughly inward normals."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        p = rng.normal(size=(4, 3)) * 0.05
        nn = -p / np.linalg.norm(p, axis=1, keepdims=True) + 0.6 * rng.normal(size=(4, 3))
        nn /= np.linalg.norm(nn, axis=1, keepdims=True)
        frames = [contact_frame(a, b) for a, b in zip(p, nn)]
        if not rank_test(grasp_matrix(frames)):
            continue
        mass = rng.uniform(*mass_range)
        mu = rng.uniform(*mu_range)
        w = ExternalWrench.gravity(mass, direction=rng.normal(size=3))
        out.append(assemble(frames, w, mu, f_high))
    return out
