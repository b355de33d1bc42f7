import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ntnopt.channel import (C_LIGHT, ChannelParams, ChannelState, LinkConditions, LinkDraws, build_channel,
                            db_to_lin, elevation_angle, lin_to_db, link_conditions, los_probability_satellite,
                            rsrp, sample_los, satellite_gain, terrestrial_gain)
from ntnopt.scenario import (RURAL, SATELLITE, TERRESTRIAL, URBAN, AreaSpec, Mbs, Ue, build_scenario,
                             satellite_positions)

DESK = AreaSpec(side_x_km=8.0, side_y_km=8.0, urban_x_km=2.0, urban_y_km=2.0, layout="rings", rings=2)
MEAN = LinkDraws()
TOWER = Mbs(0, TERRESTRIAL, 0.0, 0.0, 0.025, 17.7, 14.0, 5.0, 5.0, URBAN)
SAT = Mbs(1, SATELLITE, 0.0, 0.0, 600.0, 15.8, 30.0, 5.0, 5.0, RURAL)


def fspl_db(d_m, f_hz):
    # Friis free-space loss, independent of the implementation's rounded constant
    return 20 * math.log10(4 * math.pi * d_m * f_hz / C_LIGHT)


@pytest.mark.parametrize("sat,ue,expect", [((0, 0, 600), (0, 0, 0), 90.0), ((50, 0, 600), (0, 0, 0), 85.2364),
                                          ((600, 0, 600), (0, 0, 0), 45.0)])
def test_elevation_examples(sat, ue, expect):
    assert elevation_angle(sat, ue) == pytest.approx(expect, abs=1e-4)


def test_elevation_slant_of_p1():
    # slant range 602.08 km for a 50 km offset at 600 km altitude
    assert math.hypot(50, 600) == pytest.approx(602.08, abs=0.005)


def test_elevation_errors():
    with pytest.raises(ValueError):
        elevation_angle((1, 2, 3), (1, 2, 3))
    with pytest.raises(ValueError):
        elevation_angle((0, 0, 0), (0, 0, 1))


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(1.0, 2000.0))
def test_elevation_in_range(x, y, h):
    t = elevation_angle((x, y, h), (0.0, 0.0, 0.0))
    assert 0.0 < t <= 90.0


def test_link_conditions_validation():
    with pytest.raises(ValueError):
        LinkConditions(True, 10.0, 0.0)
    with pytest.raises(ValueError):
        LinkConditions(True, 10.0, 20.0, elevation_deg=95.0)


@given(st.floats(-200.0, 50.0))
def test_db_round_trip(x):
    assert lin_to_db(db_to_lin(x)) == pytest.approx(x, rel=1e-10, abs=1e-10)


def test_db_identity():
    assert db_to_lin(0.0) == 1.0


def test_rsrp_examples():
    assert rsrp(1.0, 1.0) == 0.0
    assert rsrp(1e-12, 10 ** 1.77) == pytest.approx(-102.3, abs=1e-9)
    assert rsrp(1e-12, 1.0) == pytest.approx(-120.0)
    with pytest.raises(ValueError):
        rsrp(0.0, 1.0)
    with pytest.raises(ValueError):
        rsrp(1.0, -1.0)


def test_satellite_gain_nadir_equals_fspl():
    params = ChannelParams(scintillation_db=0.0)
    ue = Ue(0, 0.0, 0.0, False, RURAL)
    cond = LinkConditions(True, 0.0, 600e3, 90.0)
    g = satellite_gain(SAT, ue, cond, params, draws=MEAN)
    assert lin_to_db(g) == pytest.approx(30.0 - fspl_db(600e3, 2e9), abs=0.01)
    assert fspl_db(600e3, 2e9) == pytest.approx(154.03, abs=0.01)


def test_satellite_entry_loss_only_indoor():
    params = ChannelParams()
    cond = LinkConditions(False, 0.0, 600e3, 90.0)
    out = satellite_gain(SAT, Ue(0, 0, 0, False, URBAN), cond, params, draws=MEAN)
    ins = satellite_gain(SAT, Ue(0, 0, 0, True, URBAN), cond, params, draws=MEAN)
    assert lin_to_db(out) - lin_to_db(ins) == pytest.approx(params.building_entry_db)


@pytest.mark.parametrize("zone", [URBAN, RURAL])
@pytest.mark.parametrize("los", [True, False])
def test_satellite_gain_monotone_in_elevation(zone, los):
    params = ChannelParams()
    ue = Ue(0, 0, 0, False, zone)
    gains = []
    for theta in np.arange(10.0, 90.1, 5.0):
        gains.append(satellite_gain(SAT, ue, LinkConditions(los, 0.0, 600e3, theta), params, draws=MEAN))
    # slant held fixed so only the elevation-binned clutter loss moves
    assert all(b >= a - 1e-15 for a, b in zip(gains, gains[1:]))


def test_terrestrial_outdoor_los_matches_uma():
    params = ChannelParams()
    ue = Ue(0, 0.2, 0.0, False, URBAN)
    cond = link_conditions(TOWER, ue, True)
    g = terrestrial_gain(TOWER, ue, cond, params, draws=MEAN)
    d3d = math.hypot(200.0, 23.5)
    pl = 28.0 + 22 * math.log10(d3d) + 20 * math.log10(2.0)  # below the breakpoint distance of 320 m
    assert lin_to_db(g) == pytest.approx(14.0 - pl, abs=1e-9)


def test_terrestrial_indoor_toggle_touches_only_o2i():
    params = ChannelParams(o2i_sigma_db=0.0)
    out = Ue(0, 0.3, 0.1, False, URBAN)
    ins = Ue(0, 0.3, 0.1, True, URBAN)
    cond = link_conditions(TOWER, out, False)
    d = LinkDraws(0.5, 0.7, 1.3, 0.0)
    diff = lin_to_db(terrestrial_gain(TOWER, out, cond, params, draws=d)) - \
        lin_to_db(terrestrial_gain(TOWER, ins, cond, params, draws=d))
    l_glass, l_conc = 2.0 + 0.2 * 2.0, 5.0 + 4.0 * 2.0
    low_loss = 5.0 - 10 * math.log10(0.3 * 10 ** (-l_glass / 10) + 0.7 * 10 ** (-l_conc / 10))
    assert diff == pytest.approx(low_loss, abs=1e-9)


def test_terrestrial_gain_deterministic():
    params = ChannelParams()
    ue = Ue(0, 1.0, 1.0, True, RURAL)
    cond = link_conditions(TOWER, ue, False)
    a = terrestrial_gain(TOWER, ue, cond, params, np.random.default_rng(7))
    b = terrestrial_gain(TOWER, ue, cond, params, np.random.default_rng(7))
    assert a == b
    with pytest.raises(ValueError):
        terrestrial_gain(SAT, ue, cond, params, draws=MEAN)
    with pytest.raises(ValueError):
        satellite_gain(TOWER, ue, cond, params, draws=MEAN)


def test_sample_los_forced():
    params = ChannelParams()
    rng = np.random.default_rng(0)
    assert all(sample_los(TERRESTRIAL, 500.0, params, rng, prob=1.0) for _ in range(100))
    top = dict(params.sat_los_prob)
    top[RURAL] = top[RURAL][:-1] + (1.0,)
    p2 = replace(params, sat_los_prob=top)
    assert all(sample_los(SATELLITE, 90.0, p2, rng) for _ in range(100))
    with pytest.raises(ValueError):
        sample_los("balloon", 1.0, params, rng)


@pytest.mark.parametrize("kind,geom,urban", [(TERRESTRIAL, 150.0, True), (TERRESTRIAL, 800.0, False),
                                             (SATELLITE, 45.0, True)])
def test_sample_los_frequency(kind, geom, urban):
    params = ChannelParams()
    rng = np.random.default_rng(11)
    from ntnopt.channel import los_probability_terrestrial
    p = float(los_probability_terrestrial(geom, urban) if kind == TERRESTRIAL
              else los_probability_satellite(geom, urban, params))
    n = 100_000
    hits = sum(sample_los(kind, geom, params, urban=urban, u=u) for u in rng.random(n))
    assert abs(hits / n - p) < 0.01


def test_channel_params_validation():
    with pytest.raises(ValueError):
        ChannelParams(sf_uma_los_db=-1.0)
    bad = dict(ChannelParams().sat_los_prob)
    bad[URBAN] = (0.5,)
    with pytest.raises(ValueError):
        ChannelParams(sat_los_prob=bad)
    p = ChannelParams()
    assert 4.0 <= min(p.sf_uma_los_db, p.sf_rma_los_db) and max(p.sf_uma_nlos_db, p.sf_rma_nlos_db) <= 8.0
    for tab in (p.sat_sf_los_db, p.sat_sf_nlos_db):
        assert all(0.0 <= v <= 12.0 for z in (URBAN, RURAL) for v in tab[z])


def test_build_channel_reproducible_and_valid():
    scn = build_scenario(DESK, 30, 5, 1, satellite_positions()[0])
    a = build_channel(scn)
    b = build_channel(scn)
    assert np.array_equal(a.beta, b.beta) and np.array_equal(a.los, b.los)
    assert a.shape == (30, 20) and np.all(a.beta > 0) and np.all(np.isfinite(a.beta))
    assert a.is_sat.tolist() == [False] * 19 + [True]
    assert np.all((a.elevation_deg > 0) & (a.elevation_deg <= 90))
    sub = a.subset([0, 2])
    assert sub.beta.shape == (2, 20) and sub.ue_ids == (0, 2)


def test_terrestrial_columns_shared_across_positions():
    chans = [build_channel(build_scenario(DESK, 25, 20, 4, pos)) for pos in satellite_positions()]
    for c in chans[1:]:
        assert np.array_equal(c.beta[:, :19], chans[0].beta[:, :19])


def test_p2_dominates_with_pinned_draws():
    g = [build_channel(build_scenario(DESK, 50, 5, 2, pos), pin_draws=True).beta[:, -1]
         for pos in satellite_positions()]
    assert np.all(g[1] >= g[0]) and np.all(g[1] >= g[2])


def test_channel_state_rejects_bad_gains():
    with pytest.raises(ValueError):
        ChannelState.from_gains(np.array([[1.0, 0.0]]), [False, True])
    with pytest.raises(ValueError):
        ChannelState.from_gains(np.array([[1.0, np.inf]]), [False, True])
