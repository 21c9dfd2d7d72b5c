"""Force-closure programs: assembly, solving, and the loss-threshold label."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..wrench import ContactFrame, GraspMatrix, grasp_matrix
from .socp import SolverOptions, solve_batch

GRAVITY = 9.81
LOSS_THRESHOLD = 1e-5


@dataclass(frozen=True, eq=False)
class ExternalWrench:
    w: np.ndarray  # (fx, fy, fz, tx, ty, tz), object frame about the COM

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64).reshape(6)
        if not np.all(np.isfinite(w)):
            raise ValueError("external wrench must be finite")
        object.__setattr__(self, "w", w)

    @classmethod
    def gravity(cls, mass: float, g: float = GRAVITY, direction=(0.0, 0.0, -1.0)) -> "ExternalWrench":
        d = np.asarray(direction, dtype=np.float64)
        return cls(np.concatenate([mass * g * d / np.linalg.norm(d), np.zeros(3)]))

    @classmethod
    def zero(cls) -> "ExternalWrench":
        return cls(np.zeros(6))


@dataclass(frozen=True, eq=False)
class ConeProgram:
    G: GraspMatrix
    w_ext: ExternalWrench
    mu: float
    f_high: float

    def __post_init__(self):
        if self.mu < 0 or not self.f_high > 0:
            raise ValueError("need mu >= 0 and f_high > 0")

    @property
    def n_contacts(self) -> int:
        return self.G.G.shape[1] // 3

    @property
    def n_variables(self) -> int:
        return self.G.G.shape[1]


@dataclass(frozen=True, eq=False)
class ConeSolution:
    f: np.ndarray
    loss: float
    iterations: int
    converged: bool
    primal_residual: float
    dual_residual: float

    @property
    def forces(self) -> np.ndarray:
        """Per-contact forces, shape (k, 3): tangential, tangential, normal."""
        return self.f.reshape(-1, 3)


def assemble(frames: list[ContactFrame], w_ext: ExternalWrench, mu: float, f_high: float) -> ConeProgram:
    return ConeProgram(G=grasp_matrix(frames), w_ext=w_ext, mu=float(mu), f_high=float(f_high))


def solve_many(progs: list[ConeProgram], opts: SolverOptions = SolverOptions()) -> list[ConeSolution]:
    if not progs:
        return []
    res = solve_batch(
        np.stack([p.G.G for p in progs]),
        np.stack([p.w_ext.w for p in progs]),
        np.array([p.mu for p in progs]),
        np.array([p.f_high for p in progs]),
        opts,
    )
    return [
        ConeSolution(res.f[i], float(res.loss[i]), int(res.iterations[i]), bool(res.converged[i]),
                     float(res.primal_residual[i]), float(res.dual_residual[i]))
        for i in range(len(progs))
    ]


def solve(prog: ConeProgram, opts: SolverOptions = SolverOptions()) -> ConeSolution:
    return solve_many([prog], opts)[0]


def loss_of(prog: ConeProgram, f) -> float:
    r = prog.G.G @ np.asarray(f, dtype=np.float64) + prog.w_ext.w
    return float(r @ r)


def label(sol: ConeSolution, threshold: float = LOSS_THRESHOLD) -> bool:
    """Pass iff the solve converged and the loss is at most the threshold."""
    return bool(sol.converged and sol.loss <= threshold)
