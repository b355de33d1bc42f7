import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ntnopt.linklayer import RSRP_MIN_MW, Network, noise_mw

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_network(rng, K, L, n_sat=1, p_max_dbm=17.7, sat_dbm=15.8, psi=5.0):
    """Small network whose every UE is covered by at least one MBS at p_max."""
    is_sat = np.zeros(L, dtype=bool)
    if n_sat:
        is_sat[-n_sat:] = True
    p_max = np.where(is_sat, 10 ** (sat_dbm / 10), 10 ** (p_max_dbm / 10))
    beta_db = rng.uniform(-150.0, -100.0, (K, L))
    beta = 10 ** (beta_db / 10)
    for i in range(K):
        j = rng.integers(L)
        beta[i, j] = max(beta[i, j], 4 * RSRP_MIN_MW / p_max[j])
    return Network(beta, is_sat, p_max, np.full(L, psi), noise_mw())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
