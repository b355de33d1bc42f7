"""3GPP reference policies: max-RSRP association at full power with a fixed band plan."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linklayer import Allocation, Network, one_hot

R_FLOOR = 1.0  # bit/s credited to UEs in outage


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    satellite: bool
    terrestrial_mhz: float
    satellite_mhz: float
    shutdown_empty: bool = False

    @property
    def eps(self) -> float:
        return self.satellite_mhz / (self.terrestrial_mhz + self.satellite_mhz)

    @property
    def bandwidth_hz(self) -> float:
        return (self.terrestrial_mhz + self.satellite_mhz) * 1e6


TN = BenchmarkSpec("3GPP-TN", False, 10.0, 0.0)
NTN = BenchmarkSpec("3GPP-NTN", True, 10.0, 30.0)
ENERGY_SAVING = BenchmarkSpec("3GPP-ENERGY-SAVING", False, 10.0, 0.0, shutdown_empty=True)
SPECS = {s.name: s for s in (TN, NTN, ENERGY_SAVING)}


@dataclass(frozen=True)
class BenchmarkResult:
    alloc: Allocation
    outage: np.ndarray  # bool per UE; outage rows of X are all zero


def run_benchmark(spec: BenchmarkSpec, net: Network) -> BenchmarkResult:
    usable = np.ones(net.L, dtype=bool) if spec.satellite else ~net.is_sat
    serving = net.max_rsrp_association(columns=usable)
    outage = serving < 0
    X = one_hot(serving, net.L)
    p = np.where(usable, net.p_max, 0.0)
    if spec.shutdown_empty:
        p = np.where(X.sum(axis=0) > 0, p, 0.0)
    return BenchmarkResult(Allocation(X, p, spec.eps, spec.bandwidth_hz), outage)
