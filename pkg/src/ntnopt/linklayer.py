"""SINR, throughput and energy for a given allocation.

Powers are per resource element in mW. Noise is referred to the same RE
bandwidth, so SINR does not depend on how much spectrum a tier receives.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import SATELLITE, TERRESTRIAL, Mbs

THERMAL_DBM_HZ = -174.0
RE_BANDWIDTH_HZ = 180e3
TOTAL_BANDWIDTH_HZ = 40e6
RSRP_MIN_DBM = -120.0
RSRP_MIN_MW = 10.0 ** (RSRP_MIN_DBM / 10.0)
SUBCARRIER_HZ = 15e3
SECONDS_PER_HOUR = 3600.0


def noise_mw(re_bandwidth_hz: float = RE_BANDWIDTH_HZ) -> float:
    return 10.0 ** ((THERMAL_DBM_HZ + 10.0 * math.log10(re_bandwidth_hz)) / 10.0)


@dataclass
class Allocation:
    X: np.ndarray  # K x L association weights
    p: np.ndarray  # L, mW per RE
    eps: float
    bandwidth_hz: float = TOTAL_BANDWIDTH_HZ

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.X.ndim != 2 or self.X.shape[1] != self.p.shape[0]:
            raise ValueError("X must be K x L with L = len(p)")
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")
        if np.any(self.p < 0):
            raise ValueError("powers must be nonnegative")

    @property
    def loads(self) -> np.ndarray:
        return self.X.sum(axis=0)

    def is_binary(self) -> bool:
        return bool(np.all((self.X == 0) | (self.X == 1)) and np.all(self.X.sum(axis=1) == 1))

    def serving(self) -> np.ndarray:
        return np.argmax(self.X, axis=1)

    def copy(self) -> "Allocation":
        return Allocation(self.X.copy(), self.p.copy(), self.eps, self.bandwidth_hz)


def split_bandwidth(eps: float, W: float = TOTAL_BANDWIDTH_HZ) -> tuple[float, float]:
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    return eps * W, (1.0 - eps) * W


def tier_bandwidth(is_sat: np.ndarray, eps: float, W: float = TOTAL_BANDWIDTH_HZ) -> np.ndarray:
    w_sat, w_terr = split_bandwidth(eps, W)
    return np.where(is_sat, w_sat, w_terr)


def sinr(beta: np.ndarray, p: np.ndarray, i: int, j: int, interferers, sigma2: float | None = None) -> float:
    sigma2 = noise_mw() if sigma2 is None else sigma2
    interferers = list(interferers)
    if j in interferers:
        raise ValueError("serving MBS cannot interfere with itself")
    interference = sum(beta[i, k] * p[k] for k in interferers)
    return float(beta[i, j] * p[j] / (interference + sigma2))


def interference_plus_noise(beta: np.ndarray, p: np.ndarray, is_sat: np.ndarray, sigma2: float) -> np.ndarray:
    """D_ij: same-tier received power from every other MBS plus noise, K x L."""
    rx = beta * p[None, :]
    tot_sat = rx[:, is_sat].sum(axis=1)
    tot_terr = rx[:, ~is_sat].sum(axis=1)
    tier_tot = np.where(is_sat[None, :], tot_sat[:, None], tot_terr[:, None])
    # clamp cancellation error from the subtraction
    return np.maximum(tier_tot - rx, 0.0) + sigma2


def sinr_matrix(beta: np.ndarray, p: np.ndarray, is_sat: np.ndarray, sigma2: float | None = None) -> np.ndarray:
    sigma2 = noise_mw() if sigma2 is None else sigma2
    return beta * p[None, :] / interference_plus_noise(beta, p, is_sat, sigma2)


def mean_throughput(gamma, W_j, k_j):
    k_j = np.asarray(k_j, dtype=float)
    if np.any(k_j <= 0) or np.any(np.asarray(W_j) <= 0):
        raise ValueError("throughput needs k_j > 0 and W_j > 0")
    return np.asarray(W_j) / k_j * np.log2(1.0 + np.asarray(gamma))


def rate_matrix(alloc: Allocation, beta: np.ndarray, is_sat: np.ndarray, sigma2: float | None = None,
                load_floor: float = 1.0) -> np.ndarray:
    """R_ij for every pair, with relaxed load k_j = sum_i x_ij floored at ``load_floor``."""
    gamma = sinr_matrix(beta, alloc.p, is_sat, sigma2)
    W = tier_bandwidth(is_sat, alloc.eps, alloc.bandwidth_hz)
    k = np.maximum(alloc.loads, load_floor)
    return (W / k)[None, :] * np.log2(1.0 + gamma)


def ue_throughput(alloc: Allocation, beta: np.ndarray, is_sat: np.ndarray, sigma2: float | None = None) -> np.ndarray:
    rows = alloc.X.sum(axis=1)
    if np.any(rows <= 0):
        raise ValueError(f"orphan UE {int(np.flatnonzero(rows <= 0)[0])}")
    return (alloc.X * rate_matrix(alloc, beta, is_sat, sigma2)).sum(axis=1)


def sum_log_throughput(rates) -> float:
    rates = np.asarray(rates, dtype=float)
    if np.any(rates <= 0) or not np.all(np.isfinite(rates)):
        raise ValueError("sum-log throughput needs strictly positive finite rates")
    return float(np.sum(np.log(rates)))


# ---------------------------------------------------------------- energy

@dataclass(frozen=True)
class EnergyParams:
    """Power-model constants. Resource-element counts are fixed per tier."""

    terrestrial_re: float = 10e6 / SUBCARRIER_HZ
    satellite_re: float = 30e6 / SUBCARRIER_HZ
    e_c_j: float = 500.0
    duration_s: float = SECONDS_PER_HOUR


@dataclass(frozen=True)
class EnergyReport:
    q_w: np.ndarray  # per-MBS instantaneous power, W
    tn_j: float
    sat_j: float

    @property
    def tn_w(self) -> float:
        return self.tn_j / SECONDS_PER_HOUR


def mbs_power_w(p_mw: np.ndarray, roster, params: EnergyParams = EnergyParams()) -> np.ndarray:
    """Q_j = P0 + N_RE * p_j + psi_j * 1[p_j > 0], in W."""
    p_mw = np.asarray(p_mw, dtype=float)
    n_re = np.array([params.satellite_re if m.tier == SATELLITE else params.terrestrial_re for m in roster])
    p0 = np.array([m.p0_w for m in roster])
    psi = np.array([m.psi_w for m in roster])
    return p0 + n_re * p_mw * 1e-3 + psi * (p_mw > 0)


def energy(alloc: Allocation, roster: "list[Mbs] | tuple", params: EnergyParams = EnergyParams(),
           satellite_enabled: bool = True) -> EnergyReport:
    if len(roster) != alloc.p.shape[0]:
        raise ValueError("roster and power vector differ in length")
    q = mbs_power_w(alloc.p, roster, params)
    terr = np.array([m.tier == TERRESTRIAL for m in roster])
    tn = float(q[terr].sum() * params.duration_s)
    sat = 0.0
    if satellite_enabled and np.any(~terr):
        sat = float(params.e_c_j + q[~terr].sum() * params.duration_s)
    return EnergyReport(q, tn, sat)


# ---------------------------------------------------------------- network bundle

@dataclass(frozen=True)
class Network:
    """Everything the optimizers need about one snapshot, as flat arrays.

    ``p_max`` in mW per RE, ``psi`` in W, ``rsrp_min`` in mW.
    """

    beta: np.ndarray
    is_sat: np.ndarray
    p_max: np.ndarray
    psi: np.ndarray
    sigma2: float = noise_mw()
    bandwidth: float = TOTAL_BANDWIDTH_HZ
    rsrp_min: float = RSRP_MIN_MW

    @classmethod
    def build(cls, channel, roster, **kw) -> "Network":
        return cls(channel.beta, np.asarray(channel.is_sat, dtype=bool),
                   np.array([m.p_max_mw for m in roster]), np.array([m.psi_w for m in roster]), **kw)

    @property
    def K(self) -> int:
        return self.beta.shape[0]

    @property
    def L(self) -> int:
        return self.beta.shape[1]

    def rows(self, idx) -> "Network":
        return Network(self.beta[idx], self.is_sat, self.p_max, self.psi, self.sigma2, self.bandwidth,
                       self.rsrp_min)

    def coverable(self, p=None) -> np.ndarray:
        """K x L mask of links meeting RSRP_min at power ``p`` (default p_max)."""
        p = self.p_max if p is None else p
        # relative slack absorbs rounding when p sits exactly on a floor
        return self.beta * p[None, :] >= self.rsrp_min * (1.0 - 1e-9)

    def max_rsrp_association(self, columns=None) -> np.ndarray:
        """Serving index per UE by max RSRP at p_max (ties to the lowest id); -1 if uncoverable."""
        rx = self.beta * self.p_max[None, :]
        ok = self.coverable()
        if columns is not None:
            ok = ok & columns[None, :]
        rx = np.where(ok, rx, -np.inf)
        j = np.argmax(rx, axis=1)
        return np.where(ok.any(axis=1), j, -1)


def one_hot(serving: np.ndarray, L: int) -> np.ndarray:
    X = np.zeros((len(serving), L))
    ok = serving >= 0
    X[np.flatnonzero(ok), serving[ok]] = 1.0
    return X


def coverage_floor(serving: np.ndarray, net: Network) -> np.ndarray:
    """tau_j = max over served UEs of RSRP_min / beta_ij; 0 for MBSs serving nobody."""
    tau = np.zeros(net.L)
    ok = serving >= 0
    need = net.rsrp_min / net.beta[np.flatnonzero(ok), serving[ok]]
    np.maximum.at(tau, serving[ok], need)
    return tau
