"""Triangle meshes: loading, watertightness, mass properties, queries."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .accel import RAY_EPS, FaceIndex, ray_triangle_t

log = logging.getLogger(__name__)

SUPPORTED_SUFFIXES = (".obj", ".stl")
MAX_DEGENERATE_FRACTION = 0.01


class MeshError(ValueError):
    """Mesh cannot be loaded or does not meet a precondition."""


class NotWatertightError(MeshError):
    def __init__(self, open_edges):
        self.open_edges = [tuple(int(i) for i in e) for e in open_edges]
        shown = ", ".join(str(e) for e in self.open_edges[:10])
        more = "" if len(self.open_edges) <= 10 else f" (+{len(self.open_edges) - 10} more)"
        super().__init__(f"mesh is not watertight; offending edges: {shown}{more}")


class RayHit(NamedTuple):
    point: np.ndarray
    normal: np.ndarray
    face_index: int
    distance: float


@dataclass(frozen=True)
class MassProperties:
    volume: float
    center_of_mass: np.ndarray
    mass: float


@dataclass(frozen=True)
class SurfaceSample:
    point: np.ndarray
    normal: np.ndarray
    face_index: int


def cross3(a, b) -> np.ndarray:
    """Cross product of two 3-vectors (np.cross carries heavy per-call overhead)."""
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Immutable triangle mesh in meters with outward face normals.

    Construct through :meth:`from_arrays` or :func:`load_mesh`; both compute
    normals and areas and build the face index used by ray and box queries.
    """

    vertices: np.ndarray
    faces: np.ndarray
    face_normals: np.ndarray
    face_areas: np.ndarray
    ray_accel: FaceIndex = field(repr=False)

    @classmethod
    def from_arrays(cls, vertices, faces, leaf_size: int = 8) -> "TriangleMesh":
        vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        if len(faces) == 0:
            raise MeshError("mesh has no faces")
        if faces.min() < 0 or faces.max() >= len(vertices):
            raise MeshError("face index out of range")
        tri = vertices[faces]
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        twice_area = np.linalg.norm(cross, axis=1)
        if np.any(twice_area == 0.0):
            raise MeshError("mesh contains zero-area faces")
        normals = cross / twice_area[:, None]
        return cls(
            vertices=_readonly(vertices),
            faces=_readonly(faces),
            face_normals=_readonly(normals),
            face_areas=_readonly(0.5 * twice_area),
            ray_accel=FaceIndex(tri, leaf_size=leaf_size),
        )

    @cached_property
    def triangles(self) -> np.ndarray:
        return _readonly(self.vertices[self.faces])

    @cached_property
    def area_cdf(self) -> np.ndarray:
        cdf = np.cumsum(self.face_areas)
        return _readonly(cdf / cdf[-1])

    @cached_property
    def bounds(self) -> np.ndarray:
        return _readonly(np.stack([self.vertices.min(axis=0), self.vertices.max(axis=0)]))

    @property
    def bbox_diagonal(self) -> float:
        lo, hi = self.bounds
        return float(np.linalg.norm(hi - lo))

    def signed_volume(self) -> float:
        tri = self.triangles
        return float(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum() / 6.0)

    def open_edges(self) -> np.ndarray:
        """Directed edges lacking exactly one oppositely-wound partner."""
        f = self.faces
        directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        uniq, counts = np.unique(directed, axis=0, return_counts=True)
        bad = uniq[counts != 1]
        single = uniq[counts == 1]
        # every directed edge needs its reverse present exactly once
        keys = {tuple(e) for e in single.tolist()}
        unmatched = [e for e in single.tolist() if (e[1], e[0]) not in keys]
        out = [tuple(e) for e in bad.tolist()] + [tuple(e) for e in unmatched]
        return np.array(sorted(set(out)), dtype=np.int64).reshape(-1, 2)

    def is_watertight(self) -> bool:
        return len(self.open_edges()) == 0

    def raycast(self, origin, direction) -> Optional[RayHit]:
        return raycast(self, origin, direction)

    def ray_distances(self, origin, direction) -> np.ndarray:
        """All hit distances t > RAY_EPS along the ray, sorted ascending."""
        ray, face = self.ray_accel.rays_candidates(origin, direction)
        t = ray_triangle_t(np.asarray(origin, dtype=np.float64), np.asarray(direction, dtype=np.float64),
                           self.triangles[face])
        return np.sort(t[np.isfinite(t) & (t > RAY_EPS)])

    def contains(self, point) -> bool:
        """Inside test by crossing parity along a fixed off-axis direction."""
        return bool(contains_many(self, np.asarray(point, dtype=np.float64).reshape(1, 3))[0])

    def inside_bounds(self, point) -> bool:
        lo, hi = self.bounds
        return bool(np.all(point >= lo) and np.all(point <= hi))


def validate_watertight(mesh: TriangleMesh) -> None:
    edges = mesh.open_edges()
    if len(edges):
        raise NotWatertightError(edges)


def load_mesh(path, scale: float = 1.0) -> TriangleMesh:
    """Load an OBJ or STL file and scale it into meters.

    Vertices are merged, zero-area faces are dropped (the file is rejected if
    more than 1% of faces are degenerate), and winding is flipped when the
    enclosed signed volume comes out negative.
    """
    import trimesh

    path = Path(path)
    if not scale > 0:
        raise MeshError(f"scale must be positive, got {scale}")
    if not path.is_file():
        raise FileNotFoundError(f"mesh file not found: {path}")
    if path.suffix.lower() not in SUPPORTED_SUFFIXES:
        raise MeshError(f"unsupported mesh format {path.suffix!r} ({path})")
    try:
        loaded = trimesh.load(str(path), force="mesh", process=False)
    except Exception as exc:  # trimesh raises a wide range of parse errors
        raise MeshError(f"failed to parse {path}: {exc}") from exc
    vertices = np.asarray(loaded.vertices, dtype=np.float64)
    faces = np.asarray(loaded.faces, dtype=np.int64)
    if len(faces) == 0:
        raise MeshError(f"failed to parse {path}: no faces")

    # STL stores per-face vertex copies; merge exact duplicates
    vertices, inverse = np.unique(vertices, axis=0, return_inverse=True)
    faces = inverse.reshape(-1)[faces]

    vertices = vertices * float(scale)
    tri = vertices[faces]
    area2 = np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    diag = np.linalg.norm(vertices.max(axis=0) - vertices.min(axis=0))
    degenerate = area2 <= 1e-12 * diag**2
    if degenerate.mean() > MAX_DEGENERATE_FRACTION:
        raise MeshError(
            f"{path}: {int(degenerate.sum())} of {len(faces)} faces are degenerate "
            f"(limit {MAX_DEGENERATE_FRACTION:.0%})"
        )
    if degenerate.any():
        log.warning("%s: dropping %d degenerate faces", path, int(degenerate.sum()))
        faces = faces[~degenerate]
    mesh = TriangleMesh.from_arrays(vertices, faces)
    if mesh.signed_volume() < 0:
        mesh = TriangleMesh.from_arrays(vertices, faces[:, ::-1])
    if not mesh.is_watertight():
        log.warning("%s is not watertight; mass properties will be unavailable", path)
    return mesh


def mass_properties(mesh: TriangleMesh, density: float = 1000.0) -> MassProperties:
    """Volume, center of mass and mass from signed tetrahedra about the origin."""
    validate_watertight(mesh)
    tri = mesh.triangles
    vol6 = np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2]))
    volume = vol6.sum() / 6.0
    if not volume > 0:
        raise MeshError(f"non-positive enclosed volume {volume}")
    com = (vol6[:, None] * tri.sum(axis=1)).sum(axis=0) / (24.0 * volume)
    return MassProperties(volume=float(volume), center_of_mass=com, mass=float(density * volume))


def sample_surface_batch(mesh: TriangleMesh, rng, n: int):
    """``n`` area-weighted uniform surface points: (points, normals, face_indices)."""
    rng = np.random.default_rng(rng)
    cdf = mesh.area_cdf
    face = np.searchsorted(cdf, rng.random(n), side="right")
    face = np.minimum(face, len(cdf) - 1)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    tri = mesh.vertices[mesh.faces[face]]
    pts = (
        (1.0 - r1)[:, None] * tri[:, 0]
        + (r1 * (1.0 - r2))[:, None] * tri[:, 1]
        + (r1 * r2)[:, None] * tri[:, 2]
    )
    return pts, mesh.face_normals[face].copy(), face


def sample_surface(mesh: TriangleMesh, rng) -> SurfaceSample:
    """One area-weighted surface sample; ``rng`` is a seed or a Generator."""
    pts, nrm, face = sample_surface_batch(mesh, rng, 1)
    return SurfaceSample(point=pts[0], normal=nrm[0], face_index=int(face[0]))


def raycast_many(mesh: TriangleMesh, origins, directions) -> tuple[np.ndarray, np.ndarray]:
    """Nearest hits with t > RAY_EPS for row-aligned rays.

    Returns (t, face) with t = inf and face = -1 on a miss. Ties go to the
    lower face index.
    """
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    n = len(origins)
    best_t = np.full(n, np.inf)
    best_f = np.full(n, -1, dtype=np.int64)
    ray, face = mesh.ray_accel.rays_candidates(origins, directions)
    if ray.size == 0:
        return best_t, best_f
    t = ray_triangle_t(origins[ray], directions[ray], mesh.triangles[face])
    ok = np.isfinite(t) & (t > RAY_EPS)
    ray, face, t = ray[ok], face[ok], t[ok]
    o = np.lexsort((face, t, ray))
    ray, face, t = ray[o], face[o], t[o]
    first = np.ones(len(ray), dtype=bool)
    first[1:] = ray[1:] != ray[:-1]
    best_t[ray[first]] = t[first]
    best_f[ray[first]] = face[first]
    return best_t, best_f


_PARITY_DIR = np.array([0.5773502691896258 + 1.3e-3, 0.5773502691896258 - 2.9e-3, 0.5773502691896258 + 0.7e-3])
_PARITY_DIR = _PARITY_DIR / np.linalg.norm(_PARITY_DIR)


def contains_many(mesh: TriangleMesh, points) -> np.ndarray:
    """Inside flags by crossing parity along a fixed off-axis direction.

    Points outside the bounding box are reported outside without casting.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    lo, hi = mesh.bounds
    inside = np.all((points >= lo) & (points <= hi), axis=1)
    idx = np.flatnonzero(inside)
    if idx.size:
        d = np.broadcast_to(_PARITY_DIR, (idx.size, 3))
        ray, face = mesh.ray_accel.rays_candidates(points[idx], d)
        t = ray_triangle_t(points[idx][ray], d[ray], mesh.triangles[face])
        hits = np.bincount(ray[np.isfinite(t) & (t > RAY_EPS)], minlength=idx.size)
        inside[idx] = hits % 2 == 1
    return inside


def raycast(mesh: TriangleMesh, origin, direction) -> Optional[RayHit]:
    """Nearest hit with t > 1e-9 along a unit direction, or None."""
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    t, face = raycast_many(mesh, origin, direction)
    if face[0] < 0:
        return None
    dist = float(t[0])
    return RayHit(origin + dist * direction, mesh.face_normals[face[0]].copy(), int(face[0]), dist)
