"""Independent check of force-closure programs with discretized friction cones.

Each contact's feasible set (ball intersect friction cone) is replaced by the
convex hull of the origin and ``f_high`` times a set of unit directions: the
cone axis plus ``rings`` circles of ``cone_edges`` directions at evenly spaced
polar angles up to atan(mu). Every generator lies in the exact set, so the
hull is an inner approximation and its minimum loss bounds the exact minimum
from above. The resulting QP over nonnegative weights is handed to a generic
conic solver, sharing no code with the ADMM kernel.
"""

from __future__ import annotations

import math

import numpy as np

from .problem import LOSS_THRESHOLD, ConeProgram


def cone_directions(mu: float, cone_edges: int, rings: int = 4) -> np.ndarray:
    """Unit generators (3, J) inside the friction cone, axis first."""
    dirs = [np.array([0.0, 0.0, 1.0])]
    alpha = math.atan(mu)
    if alpha > 0:
        phi = 2.0 * np.pi * np.arange(cone_edges) / cone_edges
        for r in range(1, rings + 1):
            th = alpha * r / rings
            ring = np.column_stack([
                math.sin(th) * np.cos(phi), math.sin(th) * np.sin(phi), np.full(cone_edges, math.cos(th))
            ])
            dirs.extend(ring)
    return np.array(dirs).T


def _problem(A_val: np.ndarray, w_val: np.ndarray, n_contacts: int, n_dirs: int):
    # built fresh per call: a cached, re-parameterized problem lets the solver
    # warm-start across instances whose sparsity differs, which it rejects
    import cvxpy as cp

    lam = cp.Variable((n_contacts * n_dirs,), nonneg=True)
    cons = [cp.sum(lam[i * n_dirs:(i + 1) * n_dirs]) <= 1 for i in range(n_contacts)]
    return cp.Problem(cp.Minimize(cp.sum_squares(A_val @ lam + w_val)), cons), lam


def oracle_check(prog: ConeProgram, cone_edges: int = 64, rings: int = 4,
                 threshold: float = LOSS_THRESHOLD) -> tuple[bool, float]:
    """(min loss over the inner approximation <= threshold, that min loss)."""
    if cone_edges < 8:
        raise ValueError("cone_edges must be at least 8")
    D = cone_directions(prog.mu, cone_edges, rings) * prog.f_high
    k = prog.n_contacts
    J = D.shape[1]
    G = prog.G.G
    A_val = np.hstack([G[:, 3 * i:3 * i + 3] @ D for i in range(k)])

    prob, lam = _problem(A_val, prog.w_ext.w, k, J)
    prob.solve(solver="CLARABEL")
    x = np.asarray(lam.value, dtype=np.float64)
    # clean solver round-off into an exactly feasible point, then re-evaluate
    x = np.maximum(x, 0.0).reshape(k, J)
    s = x.sum(axis=1, keepdims=True)
    x = (x / np.maximum(s, 1.0)).reshape(-1)
    r = A_val @ x + prog.w_ext.w
    bound = float(r @ r)
    return bound <= threshold, bound
