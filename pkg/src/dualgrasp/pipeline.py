"""Dual-arm pair generation: enumerate, prune, screen by rank, solve, label.

Three pairing strategies share the labeling machinery:

* ``force_closure``: all pairs surviving distance and mutual-collision
  pruning are solved; passes are kept up to the budget plus a seeded sample
  of failures for negatives.
* ``random_pair``: a seeded uniform sample of unordered pairs, unpruned.
* ``farthest_pair``: each grasp with the grasp whose midpoint is farthest away.

Contacts are ordered (left 1, left 2, right 1, right 2); the grasp with the
lexicographically smaller midpoint is "left". Contact positions are taken
relative to the center of mass, where the external wrench acts.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .force_closure.problem import LOSS_THRESHOLD, ConeProgram, ExternalWrench
from .force_closure.socp import SolverOptions, solve_batch
from .geometry.mesh import MassProperties, TriangleMesh, mass_properties
from .gripper import GraspPose, GripperModel, box_arrays, obbs_overlap
from .sampler import SamplerConfig, sample_antipodal_report
from .wrench import RANK_TOL_RATIO, GraspMatrix, grasp_matrices, grasp_qualities, rank_tests, tangent_basis

log = logging.getLogger(__name__)

STRATEGIES = ("force_closure", "random_pair", "farthest_pair")
SOLVE_CHUNK = 256  # fixed so results do not depend on the thread count


@dataclass(frozen=True)
class ForceClosureConfig:
    mu: float = 0.5
    density: float = 1000.0  # kg/m^3, sets the gravity load
    threshold: float = LOSS_THRESHOLD
    rank_tol: float = RANK_TOL_RATIO
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.mu < 0 or not self.density > 0 or not self.threshold > 0:
            raise ValueError("need mu >= 0, density > 0 and threshold > 0")
        if not 0 < self.rank_tol < 1:
            raise ValueError("rank_tol must lie in (0, 1)")


@dataclass(frozen=True)
class PairingConfig:
    min_sep_ratio: float = 0.1
    fail_ratio: float = 1.0  # retained fails per retained pass (force_closure)
    max_eval_pairs: Optional[int] = None  # seeded cap on pairs solved per object
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.min_sep_ratio < 1:
            raise ValueError("min_sep_ratio must lie in [0, 1)")
        if self.fail_ratio < 0:
            raise ValueError("fail_ratio must be >= 0")
        if self.max_eval_pairs is not None and self.max_eval_pairs < 1:
            raise ValueError("max_eval_pairs must be positive")


@dataclass(frozen=True, eq=False)
class DualGraspRecord:
    grasp_left: GraspPose
    grasp_right: GraspPose
    loss: Optional[float]  # None when the rank test fails
    quality: float
    rank_ok: bool
    label: bool  # True = pass
    converged: Optional[bool]
    iterations: int
    forces: Optional[np.ndarray]  # (12,) contact-frame forces, l1 l2 r1 r2
    w_ext: ExternalWrench
    mu: float
    f_high: float
    pair: tuple[int, int]  # indices into the sampled grasp list
    config_hash: str

    def frames(self, com) -> tuple[np.ndarray, np.ndarray]:
        """Contact positions relative to ``com`` (4, 3) and rotations (4, 3, 3)."""
        return _frames(self.grasp_left, self.grasp_right, np.asarray(com, dtype=np.float64))

    def program(self, com) -> ConeProgram:
        p, R = self.frames(com)
        return ConeProgram(GraspMatrix(grasp_matrices(p[None], R[None])[0]), self.w_ext, self.mu, self.f_high)

    def recheck_loss(self, com) -> Optional[float]:
        """Loss recomputed from the stored forces, or None without forces."""
        if self.forces is None:
            return None
        prog = self.program(com)
        r = prog.G.G @ self.forces + prog.w_ext.w
        return float(r @ r)


@dataclass
class PipelineResult:
    records: list[DualGraspRecord]
    grasps: list[GraspPose]
    mass: MassProperties
    config_hash: str
    diagnostics: dict


def config_digest(obj) -> str:
    """sha256 of the canonical JSON of a (nested) dataclass or plain tree."""
    data = asdict(obj) if hasattr(obj, "__dataclass_fields__") else obj
    text = json.dumps(data, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(text.encode()).hexdigest()


def _jsonable(x):
    if hasattr(x, "__dataclass_fields__"):
        return asdict(x)
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"cannot hash {type(x).__name__}")


def enumerate_pairs(grasps) -> np.ndarray:
    """All unordered index pairs (i < j) in lexicographic order, shape (n(n-1)/2, 2)."""
    i, j = np.triu_indices(len(grasps), k=1)
    return np.column_stack([i, j]).astype(np.int64)


def _midpoints(grasps) -> np.ndarray:
    return np.array([g.midpoint for g in grasps], dtype=np.float64).reshape(-1, 3)


def mutual_collision(pairs: np.ndarray, grasps, gripper: GripperModel) -> np.ndarray:
    """True where the two grippers of a pair overlap."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    out = np.zeros(len(pairs), dtype=bool)
    if len(pairs) == 0:
        return out
    c, a, h = box_arrays(np.array([g.transform for g in grasps]), np.array([g.width for g in grasps]), gripper)
    step = 20_000
    for s in range(0, len(pairs), step):
        p = pairs[s:s + step]
        i = np.repeat(p[:, 0], 9)
        j = np.repeat(p[:, 1], 9)
        bi = np.tile(np.repeat(np.arange(3), 3), len(p))
        bj = np.tile(np.tile(np.arange(3), 3), len(p))
        hit = obbs_overlap(c[i, bi], a[i, bi], h[i, bi], c[j, bj], a[j, bj], h[j, bj])
        out[s:s + step] = hit.reshape(-1, 9).any(axis=1)
    return out


def prune_close_pairs(pairs, grasps, mesh: TriangleMesh, min_sep_ratio: float = 0.1,
                      gripper: GripperModel = GripperModel()) -> np.ndarray:
    """Keep pairs whose midpoints are at least ``min_sep_ratio`` bbox diagonals
    apart and whose grippers do not overlap each other."""
    if not 0 <= min_sep_ratio < 1:
        raise ValueError("min_sep_ratio must lie in [0, 1)")
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        return pairs
    mid = _midpoints(grasps)
    dist = np.linalg.norm(mid[pairs[:, 0]] - mid[pairs[:, 1]], axis=1)
    pairs = pairs[dist >= min_sep_ratio * mesh.bbox_diagonal]
    return pairs[~mutual_collision(pairs, grasps, gripper)]


def farthest_pairs(grasps) -> np.ndarray:
    """Each grasp with its farthest-midpoint partner (lowest index on ties),
    as sorted unique (i < j) pairs."""
    mid = _midpoints(grasps)
    if len(mid) < 2:
        return np.empty((0, 2), dtype=np.int64)
    d = np.linalg.norm(mid[:, None] - mid[None], axis=2)
    j = np.argmax(d, axis=1)
    pairs = np.sort(np.column_stack([np.arange(len(mid)), j]), axis=1)
    return np.unique(pairs, axis=0)


def random_pairs(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` distinct unordered pairs drawn uniformly, in lexicographic order."""
    total = n * (n - 1) // 2
    count = min(count, total)
    if count == 0:
        return np.empty((0, 2), dtype=np.int64)
    flat = np.sort(rng.choice(total, size=count, replace=False))
    i, j = np.triu_indices(n, k=1)
    return np.column_stack([i[flat], j[flat]]).astype(np.int64)


def _subsample(idx: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    if len(idx) <= count:
        return idx
    return np.sort(rng.choice(idx, size=count, replace=False))


def _frames(left: GraspPose, right: GraspPose, com: np.ndarray):
    pts = np.array([left.contact_1, left.contact_2, right.contact_1, right.contact_2]) - com
    R = np.array([tangent_basis(n) for n in (left.normal_1, left.normal_2, right.normal_1, right.normal_2)])
    return pts, R


def orient_pair(grasps, i: int, j: int) -> tuple[int, int]:
    """(left, right) order: lexicographically smaller midpoint first."""
    return (i, j) if tuple(grasps[i].midpoint) <= tuple(grasps[j].midpoint) else (j, i)


def evaluate_pairs(pairs, grasps, com, w_ext: ExternalWrench, fc: ForceClosureConfig, f_high: float,
                   config_hash: str, threads: int = 1) -> list[DualGraspRecord]:
    """Rank-screen, solve and label each pair; output follows ``pairs`` order."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    n = len(pairs)
    if n == 0:
        return []
    com = np.asarray(com, dtype=np.float64)
    lr = [orient_pair(grasps, int(i), int(j)) for i, j in pairs]
    fr = [_frames(grasps[l], grasps[r], com) for l, r in lr]
    P = np.array([f[0] for f in fr])
    R = np.array([f[1] for f in fr])
    G = grasp_matrices(P, R)
    ok = rank_tests(G, fc.rank_tol)
    # rank-rejected pairs count as singular: Q is recorded as exactly 0
    Q = np.where(ok, grasp_qualities(G), 0.0)

    solve_idx = np.flatnonzero(ok)
    chunks = [solve_idx[s:s + SOLVE_CHUNK] for s in range(0, len(solve_idx), SOLVE_CHUNK)]

    def run(idx):
        return solve_batch(G[idx], np.broadcast_to(w_ext.w, (len(idx), 6)), fc.mu, f_high, fc.solver)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]

    sol = {}
    for idx, res in zip(chunks, results):
        for k, m in enumerate(idx):
            sol[int(m)] = (res.f[k].copy(), float(res.loss[k]), bool(res.converged[k]), int(res.iterations[k]))

    out = []
    for m in range(n):
        l, r = lr[m]
        if m in sol:
            f, loss, conv, iters = sol[m]
            passed = conv and loss <= fc.threshold and Q[m] > 0
        else:
            f, loss, conv, iters, passed = None, None, None, 0, False
        out.append(DualGraspRecord(
            grasp_left=grasps[l], grasp_right=grasps[r], loss=loss, quality=float(Q[m]), rank_ok=bool(ok[m]),
            label=bool(passed), converged=conv, iterations=iters, forces=f, w_ext=w_ext, mu=float(fc.mu),
            f_high=float(f_high), pair=(int(pairs[m, 0]), int(pairs[m, 1])), config_hash=config_hash,
        ))
    return out


def run_pipeline(mesh: TriangleMesh, gripper: GripperModel, sampler_cfg: SamplerConfig,
                 fc_cfg: ForceClosureConfig, strategy: str = "force_closure", budget: int = 4000,
                 pairing: PairingConfig = PairingConfig(), threads: int = 1,
                 grasps: Optional[list[GraspPose]] = None, config_hash: Optional[str] = None,
                 w_ext: Optional[ExternalWrench] = None) -> PipelineResult:
    """Sample (unless ``grasps`` is given), pair, label and select records.

    ``budget`` caps retained passes for ``force_closure`` and evaluated pairs
    for the two baselines. ``w_ext`` defaults to gravity on the
    density-derived mass.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {', '.join(STRATEGIES)}")
    if budget < 0:
        raise ValueError("budget must be >= 0")
    if config_hash is None:
        config_hash = config_digest({
            "gripper": gripper, "sampler": sampler_cfg, "force_closure": fc_cfg,
            "strategy": strategy, "budget": budget, "pairing": pairing,
        })
    mass = mass_properties(mesh, fc_cfg.density)
    w_ext = ExternalWrench.gravity(mass.mass) if w_ext is None else w_ext
    diag = {"strategy": strategy}
    if grasps is None:
        rep = sample_antipodal_report(mesh, gripper, sampler_cfg, threads=threads)
        grasps = rep.grasps
        diag.update(sample_attempts=rep.attempts, no_hit=rep.no_hit, not_antipodal=rep.not_antipodal,
                    too_wide=rep.too_wide, colliding=rep.colliding)
    diag["grasps"] = len(grasps)
    if len(grasps) < 2:
        log.warning("only %d grasps sampled; no pairs to evaluate", len(grasps))
        diag.update(pairs=0, evaluated=0, rank_failed=0, unconverged=0, passed=0, retained=0)
        return PipelineResult([], list(grasps), mass, config_hash, diag)

    rng = np.random.default_rng([pairing.seed, STRATEGIES.index(strategy)])
    cap = pairing.max_eval_pairs
    if strategy == "force_closure":
        pairs = enumerate_pairs(grasps)
        diag["pairs"] = len(pairs)
        pairs = prune_close_pairs(pairs, grasps, mesh, pairing.min_sep_ratio, gripper)
        diag["pruned_pairs"] = len(pairs)
        if cap is not None and len(pairs) > cap:
            pairs = pairs[_subsample(np.arange(len(pairs)), cap, rng)]
    elif strategy == "random_pair":
        count = budget if cap is None else min(budget, cap)
        pairs = random_pairs(len(grasps), count, rng)
        diag["pairs"] = len(pairs)
    else:
        pairs = farthest_pairs(grasps)
        diag["pairs"] = len(pairs)
        count = budget if cap is None else min(budget, cap)
        pairs = pairs[_subsample(np.arange(len(pairs)), count, rng)]

    records = evaluate_pairs(pairs, grasps, mass.center_of_mass, w_ext, fc_cfg, gripper.f_high, config_hash,
                             threads)
    labels = np.array([r.label for r in records], dtype=bool)
    diag.update(
        evaluated=len(records),
        rank_failed=sum(not r.rank_ok for r in records),
        unconverged=sum(r.converged is False for r in records),
        passed=int(labels.sum()),
    )
    if strategy == "force_closure":
        keep_pass = _subsample(np.flatnonzero(labels), budget, rng)
        n_fail = int(round(pairing.fail_ratio * len(keep_pass)))
        keep_fail = _subsample(np.flatnonzero(~labels), n_fail, rng)
        keep = np.sort(np.concatenate([keep_pass, keep_fail]))
        records = [records[k] for k in keep]
    diag["retained"] = len(records)
    return PipelineResult(records, list(grasps), mass, config_hash, diag)


def fce_metric(records) -> float:
    """Fraction of records labeled pass."""
    records = list(records)
    if not records:
        raise ValueError("fce_metric needs at least one record")
    return sum(bool(r.label) for r in records) / len(records)
