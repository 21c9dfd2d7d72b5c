"""Operator-splitting (ADMM) kernel for the contact-force SOCP.

Solves, for a batch of independent instances,

    minimize    || G f + w ||^2
    subject to  || f_i || <= f_high                     (ball, per contact)
                || f_t,i || <= mu * f_n,i               (friction cone, per contact)

with f_i = (f_t,i, f_n,i) the contact-frame force of contact i. The splitting
keeps two copies of f, one per constraint family:

    f    <- (G^T G + rho I)^-1 (-G^T w + rho/2 (zb - ub + zk - uk))
    zb   <- P_ball(f + ub)
    zk   <- P_cone(f + uk)
    ub   <- ub + f - zb
    uk   <- uk + f - zk

Every ``adapt_every`` iterations rho is rescaled by sqrt(r_prim / r_dual) when
that factor leaves [1/adapt_threshold, adapt_threshold]. Each instance iterates
independently of the others in the batch; a batch is only a vectorization
convenience.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SolverOptions:
    eps_abs: float = 1e-10
    max_iter: int = 10_000
    rho: float = 1.0
    adaptive_rho: bool = True
    adapt_every: int = 50
    adapt_threshold: float = 2.0
    rho_min: float = 1e-6
    rho_max: float = 1e6

    def __post_init__(self):
        if not (self.eps_abs > 0 and self.max_iter > 0 and self.rho > 0):
            raise ValueError("eps_abs, max_iter and rho must be positive")


def project_ball(v: np.ndarray, radius) -> np.ndarray:
    """Radial scaling onto ||v|| <= radius over the last axis:
    v * min(1, radius / ||v||). ``radius`` broadcasts to v.shape[:-1]."""
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    radius = np.asarray(radius, dtype=np.float64)[..., None] if np.ndim(radius) else radius
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norm > radius, radius / norm, 1.0)
    return v * scale


def project_friction_cone(v: np.ndarray, mu) -> np.ndarray:
    """Projection onto {(t, s) : ||t|| <= mu s} over the last axis (t = v[..., :2]).

    With r = ||t||:
      r <= mu s            -> v                        (inside)
      mu r <= -s           -> 0                        (inside the polar cone)
      otherwise            -> s' = (mu r + s) / (1 + mu^2),  t' = mu s' t / r
    """
    mu = np.asarray(mu, dtype=np.float64)  # broadcastable to v.shape[:-1]
    t = v[..., :2]
    s = v[..., 2]
    r = np.linalg.norm(t, axis=-1)
    inside = r <= mu * s
    polar = mu * r <= -s
    s_new = (mu * r + s) / (1.0 + mu * mu)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_new = t * np.where(r > 0, mu * s_new / r, 0.0)[..., None]
    out = np.concatenate([t_new, s_new[..., None]], axis=-1)
    out = np.where(inside[..., None], v, out)
    return np.where(polar[..., None] & ~inside[..., None], 0.0, out)


def project_contact_set(v: np.ndarray, mu, f_high) -> np.ndarray:
    """Exact projection onto ball intersect cone; the cone has its apex at the
    ball center, so projecting onto the cone and then the ball is exact."""
    return project_ball(project_friction_cone(v, mu), f_high)


@dataclass
class BatchResult:
    f: np.ndarray  # (n, 12)
    loss: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    primal_residual: np.ndarray
    dual_residual: np.ndarray


def _inverse(GtG: np.ndarray, rho: np.ndarray) -> np.ndarray:
    m = GtG.shape[-1]
    return np.linalg.inv(GtG + rho[:, None, None] * np.eye(m))


def solve_batch(G: np.ndarray, w: np.ndarray, mu, f_high, opts: SolverOptions = SolverOptions()) -> BatchResult:
    """Solve ``n`` instances; ``G`` is (n, 6, m), ``w`` (n, 6), ``mu``/``f_high`` scalar or (n,)."""
    G = np.asarray(G, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, _, m = G.shape
    k = m // 3
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(w))):
        raise ValueError("non-finite problem data")
    mu = np.broadcast_to(np.asarray(mu, dtype=np.float64), (n,)).copy()
    f_high = np.broadcast_to(np.asarray(f_high, dtype=np.float64), (n,)).copy()
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(f_high))):
        raise ValueError("non-finite mu or f_high")

    GtG = G.transpose(0, 2, 1) @ G
    q = -np.einsum("nij,ni->nj", G, w)
    rho = np.full(n, float(opts.rho))
    Minv = _inverse(GtG, rho)

    f = np.zeros((n, m))
    zb = np.zeros((n, m))
    zk = np.zeros((n, m))
    ub = np.zeros((n, m))
    uk = np.zeros((n, m))
    iters = np.zeros(n, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    r_prim = np.full(n, np.inf)
    r_dual = np.full(n, np.inf)

    active = np.arange(n)
    it = 0
    while active.size and it < opts.max_iter:
        it += 1
        a = active
        rho_a = rho[a]
        rhs = q[a] + 0.5 * rho_a[:, None] * (zb[a] - ub[a] + zk[a] - uk[a])
        fa = np.einsum("nij,nj->ni", Minv[a], rhs)
        vb = (fa + ub[a]).reshape(-1, k, 3)
        vk = (fa + uk[a]).reshape(-1, k, 3)
        zb_new = project_ball(vb, f_high[a][:, None]).reshape(-1, m)
        zk_new = project_friction_cone(vk, mu[a][:, None]).reshape(-1, m)
        rb = fa - zb_new
        rk = fa - zk_new
        prim = np.sqrt(np.einsum("ij,ij->i", rb, rb) + np.einsum("ij,ij->i", rk, rk))
        dz = (zb_new - zb[a]) + (zk_new - zk[a])
        dual = rho_a * np.sqrt(np.einsum("ij,ij->i", dz, dz))

        f[a] = fa
        zb[a] = zb_new
        zk[a] = zk_new
        ub[a] += rb
        uk[a] += rk
        iters[a] = it
        r_prim[a] = prim
        r_dual[a] = dual

        fin = (prim <= opts.eps_abs) & (dual <= opts.eps_abs)
        done[a[fin]] = True

        if opts.adaptive_rho and it % opts.adapt_every == 0:
            with np.errstate(divide="ignore", invalid="ignore"):
                factor = np.sqrt(np.maximum(prim, 1e-300) / np.maximum(dual, 1e-300))
            factor = np.clip(factor, opts.rho_min / rho_a, opts.rho_max / rho_a)
            change = ~fin & ((factor > opts.adapt_threshold) | (factor * opts.adapt_threshold < 1.0))
            if change.any():
                factor = factor[change]
                idx = a[change]
                rho[idx] *= factor
                # scaled duals carry a 1/rho factor
                ub[idx] /= factor[:, None]
                uk[idx] /= factor[:, None]
                Minv[idx] = _inverse(GtG[idx], rho[idx])
        active = a[~fin]

    # feasible point: project the cone copy onto the exact contact set
    f_out = project_contact_set(zk.reshape(n, k, 3), mu[:, None], f_high[:, None]).reshape(n, m)
    resid = np.einsum("nij,nj->ni", G, f_out) + w
    loss = np.einsum("ni,ni->n", resid, resid)
    return BatchResult(f=f_out, loss=loss, iterations=iters, converged=done,
                       primal_residual=r_prim, dual_residual=r_dual)
