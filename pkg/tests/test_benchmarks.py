import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ntnopt.benchmarks import ENERGY_SAVING, NTN, SPECS, TN, run_benchmark
from ntnopt.linklayer import EnergyParams, Network, energy, noise_mw
from ntnopt.scenario import SATELLITE, TERRESTRIAL, Mbs

from conftest import random_network


def _roster(L, n_sat=1):
    out = [Mbs(j, TERRESTRIAL, float(j), 0.0, 0.025, 17.7, 14.0, 5.0, 5.0) for j in range(L - n_sat)]
    out += [Mbs(L - n_sat + j, SATELLITE, 0.0, 0.0, 600.0, 15.8, 30.0, 5.0, 5.0) for j in range(n_sat)]
    return out


def test_band_plans():
    assert TN.eps == 0.0 and TN.bandwidth_hz == 10e6
    assert NTN.eps == 0.75 and NTN.bandwidth_hz == 40e6
    assert set(SPECS) == {"3GPP-TN", "3GPP-NTN", "3GPP-ENERGY-SAVING"}


def test_max_rsrp_association():
    beta = np.array([[1e-9, 1e-10, 1e-11], [1e-10, 1e-9, 1e-8]])
    net = Network(beta, np.array([False, False, True]), np.full(3, 50.0), np.ones(3), noise_mw())
    assert run_benchmark(TN, net).alloc.serving().tolist() == [0, 1]
    res = run_benchmark(NTN, net)
    assert res.alloc.serving().tolist() == [0, 2]
    assert res.alloc.eps == 0.75
    assert run_benchmark(TN, net).alloc.p.tolist() == [50.0, 50.0, 0.0]


def test_tn_outage_when_only_satellite_reaches():
    beta = np.array([[1e-16, 1e-9]])
    net = Network(beta, np.array([False, True]), np.full(2, 50.0), np.ones(2), noise_mw())
    res = run_benchmark(TN, net)
    assert res.outage.tolist() == [True] and res.alloc.X.sum() == 0
    assert run_benchmark(NTN, net).outage.tolist() == [False]


def test_energy_saving_difference():
    # MBSs 2 and 3 have no UEs
    beta = np.array([[1e-9, 1e-10, 1e-11, 1e-11, 1e-12], [1e-10, 1e-9, 1e-11, 1e-11, 1e-12]])
    net = Network(beta, np.array([False] * 4 + [True]), np.full(5, 10 ** 1.77), np.full(5, 5.0), noise_mw())
    roster = _roster(5)
    params = EnergyParams(duration_s=1.0)
    tn = energy(run_benchmark(TN, net).alloc, roster, params, satellite_enabled=False).tn_j
    es = energy(run_benchmark(ENERGY_SAVING, net).alloc, roster, params, satellite_enabled=False).tn_j
    m = 2
    assert tn - es == pytest.approx(m * (5.0 + params.terrestrial_re * 10 ** 1.77 * 1e-3), rel=1e-12)


@given(st.integers(0, 10_000))
def test_energy_saving_bounds(seed):
    net = random_network(np.random.default_rng(seed), 20, 4)
    roster = _roster(4)
    tn = energy(run_benchmark(TN, net).alloc, roster, satellite_enabled=False).tn_j
    es_alloc = run_benchmark(ENERGY_SAVING, net).alloc
    es = energy(es_alloc, roster, satellite_enabled=False).tn_j
    assert es <= tn
    loads = es_alloc.X.sum(axis=0)[:-1]
    if np.all(loads > 0):
        assert es == tn
    assert np.array_equal(run_benchmark(TN, net).alloc.X, es_alloc.X)
