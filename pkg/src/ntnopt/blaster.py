"""BLASTER: block-coordinate gradient ascent over association, bandwidth split and power.

Each outer iteration takes a projected gradient step on the relaxed
association matrix (the projection is solved through its one-dimensional
row duals), sets the satellite share of the band to its closed-form optimum,
takes a proximal gradient step on the terrestrial powers with block-soft
thresholding, clamps the powers into the coverage-feasible box and refreshes
the group-sparsity weights.

Units: ``Allocation.p`` is in mW per RE. The penalty and the proximal step
work in W, so ``lam`` multiplies W-valued norms.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .linklayer import (Allocation, Network, coverage_floor, interference_plus_noise, one_hot, sinr_matrix,
                        tier_bandwidth)

log = logging.getLogger(__name__)

MW_PER_W = 1000.0


@dataclass(frozen=True)
class BlasterConfig:
    lambda_max: float = 1e7
    k_min: int = 40
    # converts lambda_max to the W-valued penalty used here (unit convention, see docs)
    penalty_scale: float = 1e-6
    alpha: float = 0.5  # association step, as a fraction of the largest gradient entry
    eta: float = 0.25  # power step, as a fraction of the largest terrestrial p_max
    eta_growth: float = 64.0  # cap on how far successful power steps may lengthen the base step
    delta_frac: float = 1e-3  # reweighting stabiliser relative to p_max
    max_iter: int = 200
    dual_max_iter: int = 500
    dual_tol: float = 1e-13
    tol: float = 1e-4
    eps_floor: float = 1e-3
    max_backtrack: int = 12
    assoc_inner: int = 50  # gradient-projection steps per association block
    assoc_tol: float = 1e-5
    power_inner: int = 500  # gradient-prox steps per power block
    power_tol: float = 1e-12
    polish: bool = True  # power block on the binarized association before returning
    normalize_rows: bool = True

    def __post_init__(self):
        if min(self.alpha, self.eta, self.eta_growth, self.delta_frac, self.tol, self.dual_tol) <= 0:
            raise ValueError("step sizes, delta and tolerances must be positive")
        if min(self.max_iter, self.dual_max_iter, self.max_backtrack, self.assoc_inner,
               self.power_inner) < 1:
            raise ValueError("iteration caps must be >= 1")
        if not 0.0 < self.eps_floor < 0.5:
            raise ValueError("eps_floor must lie in (0, 0.5)")
        if self.lambda_max < 0 or self.penalty_scale < 0 or self.k_min < 1:
            raise ValueError("lambda_max, penalty_scale must be >= 0 and k_min >= 1")

    def lam(self, K: int) -> float:
        """Penalty weight for a snapshot with K UEs: inversely proportional to K."""
        return self.penalty_scale * self.lambda_max * self.k_min / K


@dataclass(frozen=True)
class ObjectiveBreakdown:
    slt: float
    l1: float
    group: float
    lam: float

    @property
    def total(self) -> float:
        return self.slt - self.lam * (self.l1 + self.group)


@dataclass
class OptimizerTrace:
    rows: list = field(default_factory=list)
    mu: np.ndarray | None = None
    w: np.ndarray | None = None
    dual_iters: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.rows)

    @property
    def mean_dual_iters(self) -> float:
        return float(np.mean(self.dual_iters)) if self.dual_iters else 0.0

    def gains(self) -> np.ndarray:
        return np.array([r["relative_gain"] for r in self.rows])


# ---------------------------------------------------------------- objective pieces

def _loads(X, loads):
    return np.maximum(X.sum(axis=0) if loads is None else np.asarray(loads, dtype=float), 1.0)


def rates(X, p, eps, net: Network, loads=None):
    """(R_ij, R_i); the load k_j = sum_i x_ij is floored at 1 and may be frozen by the caller."""
    gamma = sinr_matrix(net.beta, p, net.is_sat, net.sigma2)
    W = tier_bandwidth(net.is_sat, eps, net.bandwidth)
    Rij = (W / _loads(X, loads))[None, :] * np.log2(1.0 + gamma)
    return Rij, (X * Rij).sum(axis=1)


def slt(alloc: Allocation, net: Network, loads=None) -> float:
    _, R = rates(alloc.X, alloc.p, alloc.eps, net, loads)
    if np.any(R <= 0):
        raise ValueError(f"orphan UE {int(np.flatnonzero(R <= 0)[0])}")
    return float(np.sum(np.log(R)))


def penalty_terms(p_mw, w, psi) -> tuple[float, float]:
    """(||p||_1, sum_j psi_j w_j * ||p||_2) with p in W."""
    pw = np.asarray(p_mw, dtype=float) / MW_PER_W
    return float(np.sum(np.abs(pw))), float(np.dot(psi, w) * np.linalg.norm(pw))


def objective(alloc: Allocation, net: Network, w, lam: float, loads=None) -> ObjectiveBreakdown:
    l1, group = penalty_terms(alloc.p, w, net.psi)
    return ObjectiveBreakdown(slt(alloc, net, loads), l1, group, lam)


# ---------------------------------------------------------------- association block

def assoc_gradient(alloc: Allocation, net: Network, loads=None) -> np.ndarray:
    """d f / d x_ij = R_ij / R_i with the loads held fixed."""
    Rij, R = rates(alloc.X, alloc.p, alloc.eps, net, loads)
    if np.any(R <= 0):
        raise ValueError("orphan UE")
    return Rij / R[:, None]


def assoc_gradient_step(X, grad, alpha) -> np.ndarray:
    return np.asarray(X) + np.asarray(alpha) * np.asarray(grad)


def solve_projection(Xt, B, r, max_iter=500, tol=1e-13):
    """Raw solution of min 0.5||X - Xt||_F^2 s.t. X >= 0, (X * B) 1 >= r via the dual."""
    return kernels.project_rows(np.asarray(Xt, dtype=float), np.asarray(B, dtype=float),
                                np.broadcast_to(np.asarray(r, dtype=float), (np.shape(Xt)[0],)).copy(),
                                int(max_iter), float(tol))


def normalize_rows(X, fallback) -> np.ndarray:
    """Clip into [0, 1], rescale positive rows to sum 1, send empty rows to ``fallback``."""
    X = np.clip(X, 0.0, 1.0)
    s = X.sum(axis=1)
    empty = s <= 0
    X[~empty] /= s[~empty, None]
    if empty.any():
        X[empty] = 0.0
        X[np.flatnonzero(empty), fallback[empty]] = 1.0
    return X


def project_association(Xt, net: Network, p, *, normalize: bool = True, max_iter: int = 500, tol: float = 1e-13):
    """Project onto the coverage-feasible set; returns (X, mu, dual iterations)."""
    serving = net.max_rsrp_association()
    if np.any(serving < 0):
        bad = int(np.flatnonzero(serving < 0)[0])
        raise ValueError(f"uncoverable UE {bad}")
    X, mu, iters = solve_projection(Xt, net.beta * p[None, :], net.rsrp_min, max_iter, tol)
    if normalize:
        X = normalize_rows(X, serving)
    return X, mu, iters


def x_star(mu, Xt, B) -> np.ndarray:
    return np.maximum(Xt - B * np.asarray(mu)[:, None], 0.0)


def lagrangian(X, mu, Xt, B, r) -> float:
    """0.5||X - Xt||^2 + ((X * B) 1 - r)^T mu."""
    cov = (X * B).sum(axis=1)
    return float(0.5 * np.sum((X - Xt) ** 2) + np.dot(cov - r, mu))


def dual_value(mu, Xt, B, r) -> float:
    """Closed form of the dual at mu, including the constant 0.5||Xt||_F^2 of the Lagrangian."""
    mu = np.asarray(mu, dtype=float)
    Xs = x_star(mu, Xt, B)
    A = Xt - B * mu[:, None]
    r = np.broadcast_to(r, mu.shape)
    return float(0.5 * np.sum(Xs ** 2) - np.sum(Xs * A) - np.dot(r, mu) + 0.5 * np.sum(Xt ** 2))


def trace_identity(X, beta, p, mu) -> tuple[float, float]:
    """Both sides of [(X * beta) p]^T mu = Tr(X (beta * p_pad * mu_pad)^T)."""
    lhs = float(((X * beta) @ p) @ mu)
    M = beta * p[None, :] * np.asarray(mu)[:, None]
    rhs = float(np.trace(X @ M.T))
    return lhs, rhs


# ---------------------------------------------------------------- bandwidth split

def optimal_split(X, is_sat, eps_floor: float = 1e-3) -> float:
    K = X.shape[0]
    if K < 1:
        raise ValueError("need at least one UE")
    eps = float(X[:, is_sat].sum()) / K
    return min(max(eps, eps_floor), 1.0 - eps_floor)


def split_derivative(eps: float, K: int, K_s: float) -> float:
    return K_s / eps - (K - K_s) / (1.0 - eps)


# ---------------------------------------------------------------- power block

def power_gradient(alloc: Allocation, net: Network, loads=None) -> np.ndarray:
    """d SLT / d p_m (per mW), same-tier interference included."""
    X, p = alloc.X, alloc.p
    gamma = sinr_matrix(net.beta, p, net.is_sat, net.sigma2)
    D = interference_plus_noise(net.beta, p, net.is_sat, net.sigma2)
    W = tier_bandwidth(net.is_sat, alloc.eps, net.bandwidth)
    k = _loads(X, loads)
    Rij = (W / k)[None, :] * np.log2(1.0 + gamma)
    R = (X * Rij).sum(axis=1)
    A = X * (W / k)[None, :] / (R[:, None] * math.log(2.0) * (1.0 + gamma) * D)
    Ag = A * gamma
    s_sat = Ag[:, net.is_sat].sum(axis=1)
    s_terr = Ag[:, ~net.is_sat].sum(axis=1)
    S = np.where(net.is_sat[None, :], s_sat[:, None], s_terr[:, None])
    return (net.beta * (A - (S - Ag))).sum(axis=0)


def penalty_gradient(p_mw, w, psi, lam) -> np.ndarray:
    """Gradient of lam * (||p||_1 + psi^T w ||p||_2) per mW, valid for p > 0."""
    pw = np.asarray(p_mw, dtype=float) / MW_PER_W
    return lam * (np.sign(pw) + np.dot(psi, w) * pw / np.linalg.norm(pw)) / MW_PER_W


def power_gradient_step(p, grad, eta) -> np.ndarray:
    return np.asarray(p) + np.asarray(eta) * np.asarray(grad)


def prox_group(p_tilde, t: float) -> np.ndarray:
    """argmin_p 0.5||p_tilde - p||^2 + t||p||_2 (block-soft thresholding)."""
    if t < 0:
        raise ValueError("threshold must be >= 0")
    p_tilde = np.asarray(p_tilde, dtype=float)
    n = np.linalg.norm(p_tilde)
    if n <= t:
        return np.zeros_like(p_tilde)
    return (1.0 - t / n) * p_tilde


def power_feasibility_clamp(p_hat, net: Network, serving, *, fixed=None) -> np.ndarray:
    """Clamp into [tau_j, p_max_j]; ``fixed`` columns are pinned to p_max."""
    tau = coverage_floor(np.asarray(serving), net)
    bad = tau > net.p_max * (1.0 + 1e-12)
    if bad.any():
        raise ValueError(f"infeasible coverage at MBS {int(np.flatnonzero(bad)[0])}")
    p = np.clip(p_hat, np.minimum(tau, net.p_max), net.p_max)
    if fixed is not None:
        p = np.where(fixed, net.p_max, p)
    return p


def reweight(p, delta) -> np.ndarray:
    if np.any(np.asarray(delta) <= 0):
        raise ValueError("delta must be positive")
    return 1.0 / (np.asarray(p, dtype=float) + delta)


def binarize(X, net: Network) -> np.ndarray:
    """Row argmax, repaired to the best coverable column when the argmax cannot cover the UE."""
    serving = np.argmax(X, axis=1)
    ok = net.coverable()
    bad = ~ok[np.arange(X.shape[0]), serving]
    if bad.any():
        score = np.where(ok, X, -np.inf)
        alt = np.argmax(score, axis=1)
        fallback = net.max_rsrp_association()
        repaired = np.where(np.isfinite(score.max(axis=1)) & (X[np.arange(len(alt)), alt] > 0), alt, fallback)
        serving = np.where(bad, repaired, serving)
    if np.any(serving < 0):
        raise ValueError(f"uncoverable UE {int(np.flatnonzero(serving < 0)[0])}")
    return serving


# ---------------------------------------------------------------- outer loop

def association_block(cur: Allocation, net: Network, w, lam, config: BlasterConfig, trace=None, f0=None):
    """Repeated gradient-projection steps on X with backtracking, until the gain stalls.

    Loads are frozen inside each step and refreshed between steps; powers
    are lifted to the coverage floors implied by each candidate association.
    """
    f_cur = _surrogate(cur, net, w, lam) if f0 is None else f0
    for _ in range(config.assoc_inner):
        G = assoc_gradient(cur, net)
        gmax = np.max(np.abs(G), axis=1, keepdims=True)
        a = np.where(gmax > 0, config.alpha / np.where(gmax > 0, gmax, 1.0), 0.0)
        accepted = False
        for _ in range(config.max_backtrack):
            Xt = assoc_gradient_step(cur.X, G, a)
            X, mu, it = project_association(Xt, net, cur.p, normalize=config.normalize_rows,
                                            max_iter=config.dual_max_iter, tol=config.dual_tol)
            if trace is not None:
                trace.dual_iters.append(it)
            p = power_feasibility_clamp(cur.p, net, binarize(X, net), fixed=net.is_sat)
            cand = Allocation(X, p, cur.eps, net.bandwidth)
            f = _surrogate(cand, net, w, lam)
            if f >= f_cur:
                if trace is not None:
                    trace.mu = mu
                accepted = True
                break
            a = a * 0.5
        if not accepted:
            break
        gain = (f - f_cur) / abs(f_cur) if f_cur != 0 else 0.0
        cur, f_cur = cand, f
        if gain < config.assoc_tol:
            break
    return cur, f_cur



def power_block(cur: Allocation, net: Network, w, lam, config: BlasterConfig, f_cur: float):
    """Repeated gradient, block-soft-threshold and clamp steps on p with backtracking."""
    terr = ~net.is_sat
    p_ref_w = float(net.p_max[terr].max() if terr.any() else net.p_max.max()) / MW_PER_W
    serving = binarize(cur.X, net)
    scale = config.eta
    for _ in range(config.power_inner):
        g = power_gradient(cur, net) * MW_PER_W  # per W
        g[~terr] = 0.0
        gn = float(np.max(np.abs(g))) if terr.any() else 0.0
        eta = scale * p_ref_w / gn if gn > 0 else scale * p_ref_w
        pw = cur.p / MW_PER_W
        accepted = False
        for _ in range(config.max_backtrack):
            p_tilde = power_gradient_step(pw, g, eta)
            t = lam * eta * float(np.dot(w, net.psi))
            p_hat = prox_group(p_tilde, t)
            p_new = power_feasibility_clamp(p_hat * MW_PER_W, net, serving, fixed=net.is_sat)
            cand = Allocation(cur.X, p_new, cur.eps, net.bandwidth)
            f = _surrogate(cand, net, w, lam)
            if f >= f_cur:
                accepted = True
                break
            eta *= 0.5
            scale *= 0.5
        if not accepted:
            break
        # a successful step lets the next one try twice as far
        scale = min(2.0 * scale, config.eta * config.eta_growth)
        gain = (f - f_cur) / abs(f_cur) if f_cur != 0 else 0.0
        cur, f_cur = cand, f
        if gain < config.power_tol:
            break
    return cur, f_cur


def _surrogate(alloc, net, w, lam):
    try:
        return objective(alloc, net, w, lam).total
    except ValueError:
        return -np.inf


def run_blaster(net: Network, config: BlasterConfig = BlasterConfig(), *, lam: float | None = None):
    """Returns (binary Allocation, OptimizerTrace)."""
    K, L = net.K, net.L
    lam = config.lam(K) if lam is None else lam
    terr = ~net.is_sat
    serving = net.max_rsrp_association()
    if np.any(serving < 0):
        raise ValueError(f"uncoverable UE {int(np.flatnonzero(serving < 0)[0])}")
    delta = config.delta_frac * net.p_max / MW_PER_W
    cur = Allocation(one_hot(serving, L), net.p_max.copy(), 0.5, net.bandwidth)
    w = np.ones(L)
    trace = OptimizerTrace()

    for s in range(config.max_iter):
        f0 = _surrogate(cur, net, w, lam)

        # association block, iterated at fixed split and power
        cur, f_best = association_block(cur, net, w, lam, config, trace, f0)

        # bandwidth split, kept only when it does not lower the relaxed objective
        eps = optimal_split(cur.X, net.is_sat, config.eps_floor)
        cand = Allocation(cur.X, cur.p, eps, net.bandwidth)
        f = _surrogate(cand, net, w, lam)
        if f >= f_best:
            cur, f_best = cand, f

        # power block, iterated at fixed association and split
        cur, f_best = power_block(cur, net, w, lam, config, f_best)

        gain = (f_best - f0) / abs(f0) if np.isfinite(f0) and f0 != 0 else 0.0
        ob = objective(cur, net, w, lam)
        trace.rows.append({
            "iteration": s + 1, "f_total": ob.total, "slt_term": ob.slt, "l1_term": ob.l1,
            "group_term": ob.group, "epsilon": cur.eps,
            "active_mbs_count": int(np.sum((cur.p > 0) & terr)), "relative_gain": gain,
        })
        w = reweight(cur.p / MW_PER_W, delta)
        if abs(gain) < config.tol:
            trace.converged = True
            break
    trace.w = w
    if not trace.converged:
        log.warning("BLASTER hit the iteration cap (%d) before converging", config.max_iter)
    final = finalize(cur, net, config.eps_floor)
    if config.polish:
        # one more power block on the binary point, which is what gets reported
        final, _ = power_block(final, net, w, lam, config, _surrogate(final, net, w, lam))
        off = (final.X.sum(axis=0) == 0) & ~net.is_sat
        final = Allocation(final.X, np.where(off, 0.0, final.p), final.eps, net.bandwidth)
    return final, trace


def finalize(alloc: Allocation, net: Network, eps_floor: float = 1e-3) -> Allocation:
    """Binary association, empty terrestrial MBSs switched off, powers lifted to coverage floors."""
    serving = binarize(alloc.X, net)
    X = one_hot(serving, net.L)
    loads = X.sum(axis=0)
    p = np.where((loads == 0) & ~net.is_sat, 0.0, alloc.p)
    p = power_feasibility_clamp(p, net, serving, fixed=net.is_sat)
    p = np.where((loads == 0) & ~net.is_sat, 0.0, p)
    return Allocation(X, p, optimal_split(X, net.is_sat, eps_floor), net.bandwidth)
