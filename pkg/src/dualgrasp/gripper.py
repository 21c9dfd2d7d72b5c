"""Parallel-jaw gripper model, grasp poses and gripper/object collision checks.

Gripper frame convention (columns of the pose rotation):

* x -- closing axis, pointing from contact 1 to contact 2
* z -- approach axis, pointing from the palm toward the fingertips
* y -- z cross x

The frame origin sits at the center of the palm face. Fingers run from the
palm (z = 0) to z = finger_length; the contact midpoint lies at z = standoff,
by default the fingertips.
With ``roll = 0`` the approach axis is the downward world direction projected
orthogonal to the closing axis (world -y when closing is near vertical), and
``roll`` turns it about the closing axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry.accel import cross_rows, to_box_frame, triangle_box_overlap
from .geometry.mesh import TriangleMesh, contains_many

CONTACT_TOL = 1e-4


class GripperError(ValueError):
    pass


@dataclass(frozen=True)
class GripperModel:
    max_opening: float = 0.08
    finger_length: float = 0.05
    finger_thickness: float = 0.01
    palm_depth: float = 0.02
    f_high: float = 70.0
    standoff: float = 0.05

    def __post_init__(self):
        for name in ("max_opening", "finger_length", "finger_thickness", "palm_depth", "f_high"):
            if not getattr(self, name) > 0:
                raise GripperError(f"{name} must be positive")
        if not 0 <= self.standoff <= self.finger_length:
            raise GripperError("standoff must lie within the finger length")


@dataclass(frozen=True, eq=False)
class GraspPose:
    transform: np.ndarray  # 4x4 homogeneous, object frame
    contact_1: np.ndarray
    contact_2: np.ndarray
    normal_1: np.ndarray  # inward
    normal_2: np.ndarray  # inward
    width: float

    @property
    def rotation(self) -> np.ndarray:
        return self.transform[:3, :3]

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.contact_1 + self.contact_2)

    def __eq__(self, other):
        if not isinstance(other, GraspPose):
            return NotImplemented
        return (
            np.array_equal(self.transform, other.transform)
            and np.array_equal(self.contact_1, other.contact_1)
            and np.array_equal(self.contact_2, other.contact_2)
            and np.array_equal(self.normal_1, other.normal_1)
            and np.array_equal(self.normal_2, other.normal_2)
            and self.width == other.width
        )


def _dot(a, b) -> np.ndarray:
    # explicit sums keep rounding identical for any batch size
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def _unit(a) -> np.ndarray:
    return a / np.sqrt(_dot(a, a))[..., None]


def _canonical_approach(x: np.ndarray) -> np.ndarray:
    """Downward world direction projected orthogonal to closing axes ``x`` (n, 3)."""
    ref = np.where(np.abs(x[..., 2:3]) < 0.9, np.array([0.0, 0.0, -1.0]), np.array([0.0, -1.0, 0.0]))
    return _unit(ref - _dot(ref, x)[..., None] * x)


def aligned_rolls(c1, c2, n1, n2) -> np.ndarray:
    """Row-wise :func:`aligned_roll`."""
    x = _unit(np.asarray(c2, dtype=np.float64) - np.asarray(c1, dtype=np.float64))
    e = np.asarray(n1, dtype=np.float64) - np.asarray(n2, dtype=np.float64)
    y = cross_rows(x, e)
    ny = np.sqrt(_dot(y, y))
    degenerate = ny < 1e-12
    y = y / np.where(degenerate, 1.0, ny)[..., None]
    z = cross_rows(x, y)
    z = np.where((_dot(z, e) > 0)[..., None], -z, z)
    a0 = _canonical_approach(x)
    roll = np.arctan2(_dot(cross_rows(x, a0), z), _dot(a0, z)) % (2.0 * np.pi)
    return np.where(degenerate, 0.0, roll)


def aligned_roll(c1, c2, n1, n2) -> float:
    """Roll that keeps the finger pads leaning away from the surface.

    Puts the pose y axis orthogonal to both the closing axis and the mean
    contact normal, so any tilt between them lies in the approach plane, and
    picks the sign with the fingers extending back along the outward side.
    """
    return float(aligned_rolls(*(np.asarray(v, dtype=np.float64)[None] for v in (c1, c2, n1, n2)))[0])


def pose_matrices(c1, c2, roll, standoff: float) -> tuple[np.ndarray, np.ndarray]:
    """Homogeneous transforms (n, 4, 4) and widths (n,) for row-aligned contacts."""
    c1 = np.asarray(c1, dtype=np.float64)
    c2 = np.asarray(c2, dtype=np.float64)
    roll = np.asarray(roll, dtype=np.float64)
    axis = c2 - c1
    width = np.sqrt(_dot(axis, axis))
    x = axis / width[..., None]
    a0 = _canonical_approach(x)
    z = _unit(np.cos(roll)[..., None] * a0 + np.sin(roll)[..., None] * cross_rows(x, a0))
    y = cross_rows(z, x)
    H = np.zeros(x.shape[:-1] + (4, 4))
    H[..., :3, 0] = x
    H[..., :3, 1] = y
    H[..., :3, 2] = z
    H[..., :3, 3] = 0.5 * (c1 + c2) - standoff * z
    H[..., 3, 3] = 1.0
    return H, width


def pose_from_contacts(c1, c2, roll: float = 0.0, standoff: float | None = None,
                       gripper: GripperModel = GripperModel(), normal_1=None,
                       normal_2=None) -> GraspPose:
    """Gripper pose closing on ``c1`` and ``c2``.

    ``standoff`` defaults to the gripper's. ``normal_1``/``normal_2`` are
    stored as given (inward); when omitted they default to the closing
    direction at each contact.
    """
    c1 = np.asarray(c1, dtype=np.float64).reshape(3)
    c2 = np.asarray(c2, dtype=np.float64).reshape(3)
    standoff = gripper.standoff if standoff is None else float(standoff)
    if np.array_equal(c1, c2):
        raise GripperError("contacts coincide")
    H, width = pose_matrices(c1[None], c2[None], np.array([roll]), standoff)
    width = float(width[0])
    if width > gripper.max_opening:
        raise GripperError(f"contact width {width:.4g} m exceeds max opening {gripper.max_opening} m")
    x = H[0, :3, 0]
    n1 = x.copy() if normal_1 is None else np.asarray(normal_1, dtype=np.float64)
    n2 = -x if normal_2 is None else np.asarray(normal_2, dtype=np.float64)
    return GraspPose(transform=H[0], contact_1=c1, contact_2=c2, normal_1=n1, normal_2=n2, width=width)


class Box(NamedTuple):
    center: np.ndarray
    axes: np.ndarray  # columns
    half: np.ndarray

    def corners(self) -> np.ndarray:
        s = np.array([[i, j, k] for i in (-1, 1) for j in (-1, 1) for k in (-1, 1)], dtype=np.float64)
        return self.center + (s * self.half) @ self.axes.T

    def aabb(self):
        r = np.abs(self.axes) @ self.half
        return self.center - r, self.center + r

    def contains(self, points: np.ndarray) -> np.ndarray:
        local = (np.asarray(points) - self.center) @ self.axes
        return np.all(np.abs(local) <= self.half, axis=-1)


def box_arrays(transforms, widths, gripper: GripperModel):
    """Finger, finger, palm boxes for each pose: centers (n, 3, 3), axes (n, 3, 3, 3), halves (n, 3, 3).

    Finger inner faces sit ``CONTACT_TOL`` outside the contacts so surface
    contact is not counted as penetration.
    """
    H = np.asarray(transforms, dtype=np.float64).reshape(-1, 4, 4)
    w = np.asarray(widths, dtype=np.float64).reshape(-1) / 2.0 + CONTACT_TOL
    n = len(H)
    t = gripper.finger_thickness
    L = gripper.finger_length
    R = H[:, :3, :3]
    o = H[:, :3, 3]
    local = np.zeros((n, 3, 3))
    local[:, 0, 0] = -(w + t / 2.0)
    local[:, 1, 0] = w + t / 2.0
    local[:, :2, 2] = L / 2.0
    local[:, 2, 2] = -gripper.palm_depth / 2.0 - CONTACT_TOL
    centers = o[:, None, :] + np.stack([_dot(R[:, None, i, :], local) for i in range(3)], axis=-1)
    halves = np.empty((n, 3, 3))
    halves[:, :2] = (t / 2.0, t / 2.0, L / 2.0)
    halves[:, 2] = (gripper.max_opening / 2.0 + t, t, gripper.palm_depth / 2.0)
    axes = np.broadcast_to(R[:, None], (n, 3, 3, 3)).copy()
    return centers, axes, halves


def gripper_boxes(pose: GraspPose, gripper: GripperModel) -> list[Box]:
    """Finger, finger and palm boxes at the grasp's closing width."""
    c, a, h = box_arrays(pose.transform, pose.width, gripper)
    return [Box(c[0, i], a[0, i], h[0, i]) for i in range(3)]


_BOX_BATCH = 1024


def boxes_hit_mesh(centers, axes, halves, mesh: TriangleMesh) -> np.ndarray:
    """Per-box collision flags: surface overlap, or box inside / around the mesh."""
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
    axes = np.asarray(axes, dtype=np.float64).reshape(-1, 3, 3)
    halves = np.asarray(halves, dtype=np.float64).reshape(-1, 3)
    nb = len(centers)
    hit = np.zeros(nb, dtype=bool)
    step = _BOX_BATCH
    for s in range(0, nb, step):
        sl = slice(s, min(nb, s + step))
        b, f = mesh.ray_accel.obb_pairs(centers[sl], axes[sl], halves[sl])
        if b.size:
            v = to_box_frame(mesh.triangles[f], centers[sl][b], axes[sl][b])
            ok = triangle_box_overlap(v, halves[sl][b])
            hit[sl] |= np.bincount(b[ok], minlength=sl.stop - sl.start) > 0
    # no surface crossing: the box is wholly inside, wholly outside, or encloses the mesh
    rest = np.flatnonzero(~hit)
    if rest.size:
        v0 = to_box_frame(mesh.vertices[:1][None], centers[rest], axes[rest])[:, 0]
        encloses = np.all(np.abs(v0) <= halves[rest], axis=1)
        hit[rest] = encloses | contains_many(mesh, centers[rest])
    return hit


def collision_free_many(transforms, widths, gripper: GripperModel, mesh: TriangleMesh) -> np.ndarray:
    """Row-wise :func:`check_collision` for stacked poses."""
    c, a, h = box_arrays(transforms, widths, gripper)
    return ~boxes_hit_mesh(c, a, h, mesh).reshape(-1, 3).any(axis=1)


def check_collision(pose: GraspPose, gripper: GripperModel, mesh: TriangleMesh) -> bool:
    """True when the gripper at this pose is collision-free."""
    return bool(collision_free_many(pose.transform, pose.width, gripper, mesh)[0])


def obbs_overlap(ca, aa, ha, cb, ab, hb) -> np.ndarray:
    """Row-wise oriented-box overlap by the 15-axis separating-axis test.

    Centers (n, 3), axes (n, 3, 3) as columns, half extents (n, 3). Touching
    boxes overlap.
    """
    d = cb - ca
    # B's axes and the offset in A's frame
    Rm = np.einsum("nki,nkj->nij", aa, ab)
    t = np.einsum("nk,nki->ni", d, aa)
    absR = np.abs(Rm) + 1e-12
    sep = np.any(np.abs(t) > ha + np.einsum("nij,nj->ni", absR, hb), axis=1)
    tb = np.einsum("nk,nkj->nj", d, ab)
    sep |= np.any(np.abs(tb) > np.einsum("nij,ni->nj", absR, ha) + hb, axis=1)
    for i in range(3):
        i1, i2 = (i + 1) % 3, (i + 2) % 3
        for j in range(3):
            j1, j2 = (j + 1) % 3, (j + 2) % 3
            ra = ha[:, i1] * absR[:, i2, j] + ha[:, i2] * absR[:, i1, j]
            rb = hb[:, j1] * absR[:, i, j2] + hb[:, j2] * absR[:, i, j1]
            dist = np.abs(t[:, i2] * Rm[:, i1, j] - t[:, i1] * Rm[:, i2, j])
            sep |= dist > ra + rb
    return ~sep
