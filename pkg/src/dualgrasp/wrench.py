"""Contact frames, the point-contact-with-friction grasp matrix, rank test and Q(G).

Contacts are ordered (left-1, left-2, right-1, right-2); force vectors are
stacked in that order, three contact-frame components each (two tangential,
then normal).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_TOL_RATIO = 1e-8


@dataclass(frozen=True, eq=False)
class ContactFrame:
    p: np.ndarray  # position relative to the wrench reference point (COM)
    R: np.ndarray  # columns: tangent 1, tangent 2, inward normal

    @property
    def normal(self) -> np.ndarray:
        return self.R[:, 2]


@dataclass(frozen=True, eq=False)
class GraspMatrix:
    G: np.ndarray  # 6 x 12

    @property
    def blocks(self) -> list[np.ndarray]:
        return [self.G[:, 3 * k:3 * k + 3] for k in range(self.G.shape[1] // 3)]


def skew(p) -> np.ndarray:
    x, y, z = p
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def tangent_basis(normal) -> np.ndarray:
    """Rotation whose third column is ``normal``.

    The first tangent is the world axis least aligned with the normal,
    orthogonalized against it; the second completes a right-handed frame.
    """
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    ref = np.zeros(3)
    ref[int(np.argmin(np.abs(n)))] = 1.0
    t1 = ref - (ref @ n) * n
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return np.column_stack([t1, t2, n])


def contact_frame(point, inward_normal) -> ContactFrame:
    return ContactFrame(p=np.asarray(point, dtype=np.float64), R=tangent_basis(inward_normal))


def contact_block(frame: ContactFrame) -> np.ndarray:
    """[[R, 0], [[p]x R, R]] @ [I; 0], i.e. the 6x3 map of one PCWF contact."""
    return np.vstack([frame.R, skew(frame.p) @ frame.R])


def grasp_matrix(frames) -> GraspMatrix:
    return GraspMatrix(np.hstack([contact_block(f) for f in frames]))


def grasp_matrices(p: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Batched grasp matrices from positions (n, k, 3) and rotations (n, k, 3, 3)."""
    n, k = p.shape[:2]
    S = np.zeros((n, k, 3, 3))
    S[..., 0, 1], S[..., 0, 2] = -p[..., 2], p[..., 1]
    S[..., 1, 0], S[..., 1, 2] = p[..., 2], -p[..., 0]
    S[..., 2, 0], S[..., 2, 1] = -p[..., 1], p[..., 0]
    top = R
    bottom = S @ R
    blocks = np.concatenate([top, bottom], axis=2)  # (n, k, 6, 3)
    return blocks.transpose(0, 2, 1, 3).reshape(n, 6, 3 * k)


def _matrix(G) -> np.ndarray:
    return G.G if isinstance(G, GraspMatrix) else np.asarray(G, dtype=np.float64)


def rank_test(G, tol_ratio: float = RANK_TOL_RATIO) -> bool:
    """Full row rank 6, judged by the singular value ratio."""
    s = np.linalg.svd(_matrix(G), compute_uv=False)
    return bool(s[-1] > tol_ratio * s[0]) if s[0] > 0 else False


def rank_tests(Gs: np.ndarray, tol_ratio: float = RANK_TOL_RATIO) -> np.ndarray:
    s = np.linalg.svd(Gs, compute_uv=False)
    return (s[:, 0] > 0) & (s[:, -1] > tol_ratio * s[:, 0])


def grasp_quality(G) -> float:
    """Q(G) = sqrt(det(G G^T)), the grasp wrench space volume measure."""
    M = _matrix(G)
    det = float(np.linalg.det(M @ M.T))
    return float(np.sqrt(det)) if det > 0 else 0.0


def grasp_qualities(Gs: np.ndarray) -> np.ndarray:
    det = np.linalg.det(Gs @ Gs.transpose(0, 2, 1))
    return np.sqrt(np.maximum(det, 0.0))
