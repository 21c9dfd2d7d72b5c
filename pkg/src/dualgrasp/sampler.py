"""Antipodal single-arm grasp sampling on triangle meshes."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry.accel import cross_rows
from .geometry.mesh import TriangleMesh, raycast_many
from .gripper import GraspPose, GripperModel, aligned_rolls, collision_free_many, pose_matrices

log = logging.getLogger(__name__)

_CHUNK = 64


@dataclass(frozen=True)
class SamplerConfig:
    mu: float = 0.5
    n_grasps: int = 500
    max_attempts: Optional[int] = None  # None -> 100 * n_grasps
    rolls_per_contact: int = 4
    rng_seed: int = 0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.n_grasps < 0 or self.rolls_per_contact < 1:
            raise ValueError("n_grasps must be >= 0 and rolls_per_contact >= 1")

    @property
    def cone_angle(self) -> float:
        return math.atan(self.mu)

    @property
    def gamma(self) -> float:
        """Ray-deviation threshold tan(alpha / 2)."""
        return math.tan(self.cone_angle / 2.0)

    @property
    def attempts(self) -> int:
        return 100 * self.n_grasps if self.max_attempts is None else self.max_attempts


@dataclass
class SampleReport:
    grasps: list
    attempts: int
    no_hit: int = 0
    not_antipodal: int = 0
    too_wide: int = 0
    colliding: int = 0

    @property
    def exhausted(self) -> bool:
        return self.attempts > 0 and len(self.grasps) == 0


def antipodality_check(c1, n1, c2, n2, mu: float) -> bool:
    """Both friction cones contain the contact line.

    Normals are inward. The line from c1 to c2 must be within atan(mu) of n1,
    and the line from c2 to c1 within atan(mu) of n2.
    """
    d = np.asarray(c2, dtype=np.float64) - np.asarray(c1, dtype=np.float64)
    norm = np.linalg.norm(d)
    if norm == 0.0:
        return False
    d = d / norm
    cos_alpha = math.cos(math.atan(mu))
    # small slack absorbs round-off on exactly-on-cone contacts
    return bool(d @ n1 >= cos_alpha - 1e-12 and -d @ n2 >= cos_alpha - 1e-12)


def _draws(seed: int, start: int, stop: int) -> np.ndarray:
    """Five uniforms per attempt from its own (seed, index) stream."""
    return np.array([np.random.default_rng([seed, k]).random(5) for k in range(start, stop)]).reshape(-1, 5)


def cone_directions(axes: np.ndarray, half_angle: float, u: np.ndarray) -> np.ndarray:
    """Directions uniform by solid angle inside cones about unit ``axes`` (n, 3).

    ``u`` (n, 2) are uniforms for the polar cosine and the azimuth.
    """
    cos_t = 1.0 - u[:, 0] * (1.0 - math.cos(half_angle))
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t * cos_t))
    phi = 2.0 * math.pi * u[:, 1]
    helper = np.where(np.abs(axes[:, :1]) < 0.9, np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    e1 = cross_rows(axes, helper)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = cross_rows(axes, e1)
    d = cos_t[:, None] * axes + sin_t[:, None] * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2)
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _antipodal_rows(c1, n1, c2, n2, mu: float) -> np.ndarray:
    d = c2 - c1
    norm = np.linalg.norm(d, axis=1)
    cos_alpha = math.cos(math.atan(mu))
    with np.errstate(divide="ignore", invalid="ignore"):
        d = d / norm[:, None]
    ok = (np.einsum("ij,ij->i", d, n1) >= cos_alpha - 1e-12) & (np.einsum("ij,ij->i", -d, n2) >= cos_alpha - 1e-12)
    return ok & (norm > 0.0)


def _run_chunk(mesh: TriangleMesh, gripper: GripperModel, cfg: SamplerConfig, start: int, stop: int) -> list:
    """Outcomes of attempts ``start..stop-1``: a GraspPose or a failure tag each.

    Every attempt depends only on its own random stream, so the outcome list
    does not depend on how attempts are grouped into chunks.
    """
    u = _draws(cfg.rng_seed, start, stop)
    n = len(u)
    face = np.minimum(np.searchsorted(mesh.area_cdf, u[:, 0], side="right"), len(mesh.faces) - 1)
    r1 = np.sqrt(u[:, 1])
    r2 = u[:, 2]
    tri = mesh.triangles[face]
    c1 = (1.0 - r1)[:, None] * tri[:, 0] + (r1 * (1.0 - r2))[:, None] * tri[:, 1] + (r1 * r2)[:, None] * tri[:, 2]
    n1 = -mesh.face_normals[face]
    d = cone_directions(n1, cfg.cone_angle / 2.0, u[:, 3:])
    t, f2 = raycast_many(mesh, c1, d)

    out: list = ["no_hit"] * n
    hit = f2 >= 0
    c2 = c1 + np.where(hit, t, 0.0)[:, None] * d
    n2 = -mesh.face_normals[np.maximum(f2, 0)]
    anti = hit & _antipodal_rows(c1, n1, c2, n2, cfg.mu)
    width = np.linalg.norm(c2 - c1, axis=1)
    fits = anti & (width <= gripper.max_opening)
    for i in np.flatnonzero(hit & ~anti):
        out[i] = "not_antipodal"
    for i in np.flatnonzero(anti & ~fits):
        out[i] = "too_wide"

    idx = np.flatnonzero(fits)
    if idx.size == 0:
        return out
    R = cfg.rolls_per_contact
    phase = aligned_rolls(c1[idx], c2[idx], n1[idx], n2[idx])
    rolls = (phase[:, None] + (2.0 * math.pi / R) * np.arange(R)[None]) % (2.0 * math.pi)
    H, widths = pose_matrices(np.repeat(c1[idx], R, axis=0), np.repeat(c2[idx], R, axis=0),
                              rolls.reshape(-1), gripper.standoff)
    free = collision_free_many(H, widths, gripper, mesh).reshape(-1, R)
    for row, i in enumerate(idx):
        j = np.flatnonzero(free[row])
        if j.size == 0:
            out[i] = "colliding"
            continue
        k = row * R + j[0]
        out[i] = GraspPose(transform=H[k], contact_1=c1[i], contact_2=c2[i], normal_1=n1[i],
                           normal_2=n2[i], width=float(widths[k]))
    return out


def sample_antipodal_report(mesh: TriangleMesh, gripper: GripperModel, cfg: SamplerConfig,
                            threads: int = 1) -> SampleReport:
    """Run attempts in index order (chunked, optionally threaded) until enough grasps."""
    report = SampleReport(grasps=[], attempts=0)
    total = cfg.attempts
    starts = range(0, total, _CHUNK)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        pos = 0
        while pos < len(starts) and len(report.grasps) < cfg.n_grasps:
            # a window of chunks in flight; outcomes are consumed in attempt order
            window = starts[pos:pos + max(1, threads)]
            pos += len(window)
            run = lambda s: _run_chunk(mesh, gripper, cfg, s, min(s + _CHUNK, total))  # noqa: E731
            chunks = list(pool.map(run, window)) if pool is not None else [run(s) for s in window]
            for res in (r for chunk in chunks for r in chunk):
                report.attempts += 1
                if isinstance(res, GraspPose):
                    report.grasps.append(res)
                    if len(report.grasps) == cfg.n_grasps:
                        break
                else:
                    setattr(report, res, getattr(report, res) + 1)
    finally:
        if pool is not None:
            pool.shutdown()
    if len(report.grasps) < cfg.n_grasps:
        log.warning(
            "sampler found %d/%d grasps after %d attempts (no_hit=%d not_antipodal=%d "
            "too_wide=%d colliding=%d)", len(report.grasps), cfg.n_grasps, report.attempts,
            report.no_hit, report.not_antipodal, report.too_wide, report.colliding,
        )
    return report


def sample_antipodal(mesh: TriangleMesh, gripper: GripperModel, cfg: SamplerConfig,
                     threads: int = 1) -> list[GraspPose]:
    return sample_antipodal_report(mesh, gripper, cfg, threads=threads).grasps
