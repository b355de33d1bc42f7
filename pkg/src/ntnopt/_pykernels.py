"""Pure numpy versions of the hot loops; reference for the compiled module."""
from __future__ import annotations

import numpy as np


def project_rows(Xt, B, r, max_iter=500, tol=1e-13):
    """Row-separable dual solve of min 0.5||X - Xt||^2 s.t. X >= 0, sum_j B_ij X_ij >= r_i.

    Minimises phi(mu) = 0.5 sum_j max(Xt_j - B_j mu, 0)^2 + r mu over mu <= 0 by
    projected gradient steps scaled with the active-set curvature. Returns
    (X*, mu*, iterations of the slowest row).
    """
    Xt = np.asarray(Xt, dtype=float)
    B = np.asarray(B, dtype=float)
    r = np.asarray(r, dtype=float)
    K = Xt.shape[0]
    mu = np.zeros(K)
    bb = np.einsum("ij,ij->i", B, B)
    live = np.ones(K, dtype=bool)
    iters = 0
    for it in range(max_iter):
        if not live.any():
            break
        iters = it + 1
        idx = np.flatnonzero(live)
        m = mu[idx]
        b = B[idx]
        v = Xt[idx] - b * m[:, None]
        act = v > 0
        g = r[idx] - np.einsum("ij,ij->i", b, np.where(act, v, 0.0))
        h = np.einsum("ij,ij->i", b, np.where(act, b, 0.0))
        h = np.where(h > 0, h, bb[idx])
        done = (m == 0.0) & (g <= 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            new = np.minimum(m - np.where(h > 0, g / h, 0.0), 0.0)
        new = np.where(done, 0.0, new)
        stall = np.abs(new - m) <= tol * np.maximum(np.abs(m), np.abs(new))
        mu[idx] = new
        live[idx[done | stall | (h <= 0)]] = False
    X = np.maximum(Xt - B * mu[:, None], 0.0)
    return X, mu, iters


def greedy_assign(order, cand, spectral, bandwidth, loads):
    """Assign UEs in ``order`` to the candidate maximising bandwidth_j/(k_j+1)*spectral_ij.

    ``loads`` is updated in place; UEs without candidates get -1.
    """
    K = cand.shape[0]
    out = np.full(K, -1, dtype=np.int64)
    for i in order:
        c = cand[i]
        if not c.any():
            continue
        score = np.where(c, bandwidth / (loads + 1.0) * spectral[i], -np.inf)
        j = int(np.argmax(score))
        out[i] = j
        loads[j] += 1.0
    return out
