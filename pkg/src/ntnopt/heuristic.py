"""Low-complexity heuristic: rank-based association, closed-form split, threshold shutdown, power floors."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .blaster import optimal_split
from .linklayer import Allocation, Network, coverage_floor, one_hot, sinr_matrix, tier_bandwidth


@dataclass(frozen=True)
class HeuristicConfig:
    t_ue: int = 3
    low_traffic_hours: tuple = (0, 7)  # [start, end)
    tol: float = 1e-4
    max_iter: int = 50
    eps_floor: float = 1e-3
    eps_init: float = 0.5

    def __post_init__(self):
        if self.t_ue < 1:
            raise ValueError("T_UE must be >= 1")
        lo, hi = self.low_traffic_hours
        if not 0 <= lo <= hi <= 24:
            raise ValueError("low-traffic window must lie within 0..24")
        if self.max_iter < 1 or self.tol <= 0:
            raise ValueError("max_iter must be >= 1 and tol > 0")

    def is_low_traffic(self, hour: int) -> bool:
        lo, hi = self.low_traffic_hours
        return lo <= hour < hi


@dataclass
class HeuristicTrace:
    rows: list = field(default_factory=list)
    shutdown: tuple = ()
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.rows)


def rank_ues(net: Network, p) -> np.ndarray:
    """UE indices, worst mean in-coverage RSRP (dBm) first; UEs with no candidate lead."""
    cov = net.coverable(p) & (p[None, :] > 0)
    with np.errstate(divide="ignore"):
        dbm = 10.0 * np.log10(net.beta * p[None, :])
    n = cov.sum(axis=1)
    mean = np.where(n > 0, np.where(cov, dbm, 0.0).sum(axis=1) / np.maximum(n, 1), -np.inf)
    ids = np.arange(net.K)
    return np.lexsort((ids, mean))


def _spectral(net: Network, p) -> np.ndarray:
    return np.log2(1.0 + sinr_matrix(net.beta, p, net.is_sat, net.sigma2))


def associate(net: Network, hour: int, config: HeuristicConfig = HeuristicConfig(), p=None,
              eps: float | None = None) -> np.ndarray:
    """Serving MBS per UE; each UE is placed exactly once."""
    p = net.p_max if p is None else np.asarray(p, dtype=float)
    eps = config.eps_init if eps is None else eps
    cov = net.coverable(p) & (p[None, :] > 0)
    loads = np.zeros(net.L)
    serving = np.full(net.K, -1, dtype=np.int64)
    if config.is_low_traffic(hour) and net.is_sat.any():
        sat_cov = cov[:, net.is_sat]
        first = sat_cov.any(axis=1)
        sat_idx = np.flatnonzero(net.is_sat)
        pick = sat_idx[np.argmax(sat_cov, axis=1)]
        serving[first] = pick[first]
        np.add.at(loads, pick[first], 1.0)
    order = rank_ues(net, p)
    order = order[serving[order] < 0]
    W = tier_bandwidth(net.is_sat, eps, net.bandwidth)
    placed = kernels.greedy_assign(order.astype(np.int64), cov, _spectral(net, p), W, loads)
    serving = np.where(serving >= 0, serving, placed)
    if np.any(serving < 0):
        raise ValueError(f"uncoverable UE {int(np.flatnonzero(serving < 0)[0])}")
    return serving


def shutdown_pass(serving, net: Network, p, config: HeuristicConfig, hour: int, eps: float = 0.5):
    """Switch off lightly loaded terrestrial MBSs whose UEs can all be handed over.

    Returns (serving', p', sorted tuple of MBSs switched off in this pass).
    """
    serving = np.array(serving, dtype=np.int64)
    p = np.array(p, dtype=float)
    loads = np.bincount(serving, minlength=net.L).astype(float)
    threshold = config.t_ue if config.is_low_traffic(hour) else 1
    reach = net.coverable()  # handover targets are judged at full power
    spectral = _spectral(net, p)
    W = tier_bandwidth(net.is_sat, eps, net.bandwidth)
    examined = np.zeros(net.L, dtype=bool)
    off = []
    while True:
        cand = np.flatnonzero(~net.is_sat & (p > 0) & ~examined & (loads < threshold))
        if cand.size == 0:
            break
        b = int(cand[np.lexsort((cand, loads[cand]))[0]])
        examined[b] = True
        users = np.flatnonzero(serving == b)
        alive = (p > 0) & (np.arange(net.L) != b)
        alt = reach[users] & alive[None, :]
        if not alt.any(axis=1).all():
            continue
        for n, i in enumerate(users):
            score = np.where(alt[n], W / (loads + 1.0) * spectral[i], -np.inf)
            j = int(np.argmax(score))
            serving[i] = j
            loads[j] += 1.0
            loads[b] -= 1.0
        p[b] = 0.0
        off.append(b)
    return serving, p, tuple(sorted(off))


def power_floor(serving, net: Network, *, keep_satellite: bool = True) -> np.ndarray:
    """Every active MBS at its coverage floor, empty MBSs off; the satellite stays at p_max."""
    tau = coverage_floor(np.asarray(serving), net)
    if np.any(tau > net.p_max * (1.0 + 1e-12)):
        raise ValueError("coverage floor above p_max")
    if keep_satellite:
        tau = np.where(net.is_sat, net.p_max, tau)
    return tau


def _slt(serving, p, eps, net):
    X = one_hot(serving, net.L)
    k = np.maximum(X.sum(axis=0), 1.0)
    W = tier_bandwidth(net.is_sat, eps, net.bandwidth)
    r = (W / k) * np.log2(1.0 + sinr_matrix(net.beta, p, net.is_sat, net.sigma2))
    return float(np.sum(np.log(r[np.arange(net.K), serving])))


def run_heuristic(net: Network, hour: int, config: HeuristicConfig = HeuristicConfig()):
    """Returns (binary Allocation, HeuristicTrace)."""
    p = net.p_max.copy()
    eps = config.eps_init
    serving = associate(net, hour, config, p, eps)
    trace = HeuristicTrace()
    prev = None
    off_all: set = set()
    for s in range(config.max_iter):
        eps = optimal_split(one_hot(serving, net.L), net.is_sat, config.eps_floor)
        serving, p, off = shutdown_pass(serving, net, p, config, hour, eps)
        off_all.update(off)
        eps = optimal_split(one_hot(serving, net.L), net.is_sat, config.eps_floor)
        p = power_floor(serving, net)
        val = _slt(serving, p, eps, net)
        gain = 0.0 if prev is None else (val - prev) / abs(prev)
        trace.rows.append({
            "iteration": s + 1, "f_total": val, "slt_term": val, "l1_term": 0.0, "group_term": 0.0,
            "epsilon": eps, "active_mbs_count": int(np.sum((p > 0) & ~net.is_sat)), "relative_gain": gain,
        })
        if prev is not None and abs(gain) < config.tol:
            trace.converged = True
            break
        prev = val
    trace.shutdown = tuple(sorted(off_all))
    return Allocation(one_hot(serving, net.L), p, eps, net.bandwidth), trace
