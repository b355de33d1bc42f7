"""Large-scale channel gains for terrestrial and satellite links.

Every dB term is stored with the sign it contributes to the link gain, so a
loss appears as a negative number and the gain in dB is a plain sum.

Terrestrial links use the UMa (urban UEs) and RMa (rural UEs) path-loss and
LoS-probability formulas of TR 38.901 with the low-loss O2I model. Satellite
links use free-space loss at the slant range plus elevation-interpolated
LoS probability, shadowing and clutter tables in the style of TR 38.811
(S band); the shipped tables are made monotone in elevation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scenario import (RURAL, SATELLITE, STREAM_SATELLITE, STREAM_TERRESTRIAL, TERRESTRIAL, URBAN,
                       Mbs, Scenario, Ue, make_rng)

C_LIGHT = 299_792_458.0
ELEV_BINS = np.arange(10.0, 91.0, 10.0)


def db_to_lin(x):
    return np.power(10.0, np.asarray(x, dtype=float) / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(x)


@dataclass(frozen=True)
class ChannelParams:
    fc_ghz: float = 2.0
    sf_uma_los_db: float = 4.0
    sf_uma_nlos_db: float = 6.0
    sf_rma_los_db: float = 4.0
    sf_rma_nlos_db: float = 8.0
    o2i_sigma_db: float = 4.4
    indoor_depth_m: dict = field(default_factory=lambda: {URBAN: 25.0, RURAL: 10.0})
    # satellite tables indexed by ELEV_BINS, per UE zone
    sat_los_prob: dict = field(default_factory=lambda: {
        URBAN: (0.246, 0.386, 0.493, 0.613, 0.726, 0.805, 0.919, 0.968, 0.992),
        RURAL: (0.782, 0.869, 0.919, 0.929, 0.935, 0.940, 0.949, 0.952, 0.998),
    })
    sat_sf_los_db: dict = field(default_factory=lambda: {
        URBAN: (4.0,) * 9,
        RURAL: (1.79, 1.14, 1.14, 0.92, 1.42, 1.56, 0.85, 0.72, 0.72),
    })
    sat_sf_nlos_db: dict = field(default_factory=lambda: {
        URBAN: (6.0,) * 9,
        RURAL: (8.93, 9.08, 8.78, 10.25, 10.56, 10.74, 10.17, 11.52, 11.52),
    })
    sat_cl_nlos_db: dict = field(default_factory=lambda: {
        URBAN: (34.3, 30.9, 29.0, 27.7, 26.8, 26.2, 25.8, 25.5, 25.5),
        RURAL: (19.52, 18.17, 18.17, 18.17, 18.17, 17.68, 16.50, 16.30, 16.30),
    })
    sat_cl_los_db: float = 0.0
    scintillation_db: float = 1.1
    building_entry_db: float = 9.0

    def __post_init__(self):
        sig = [self.sf_uma_los_db, self.sf_uma_nlos_db, self.sf_rma_los_db, self.sf_rma_nlos_db,
               self.o2i_sigma_db]
        if min(sig) < 0:
            raise ValueError("shadowing deviations must be >= 0")
        for tab in (self.sat_los_prob, self.sat_sf_los_db, self.sat_sf_nlos_db, self.sat_cl_nlos_db):
            for zone in (URBAN, RURAL):
                if len(tab[zone]) != len(ELEV_BINS):
                    raise ValueError("satellite tables need one value per 10-degree elevation bin")


@dataclass(frozen=True)
class LinkConditions:
    los: bool
    d2d_m: float
    d3d_m: float
    elevation_deg: float | None = None

    def __post_init__(self):
        if self.d3d_m <= 0 or self.d2d_m < 0:
            raise ValueError("distances must be positive")
        if self.elevation_deg is not None and not 0.0 < self.elevation_deg <= 90.0:
            raise ValueError("elevation must lie in (0, 90] degrees")


@dataclass(frozen=True)
class LinkDraws:
    """Standardised random inputs for one link; means are (0.5, 0, 0, 0.5)."""

    u_los: float = 0.5
    z_sf: float = 0.0
    z_o2i: float = 0.0
    u_depth: float = 0.5


@dataclass(frozen=True)
class ChannelState:
    beta: np.ndarray  # K x L linear gains
    los: np.ndarray  # K x L bool
    is_sat: np.ndarray  # L bool
    elevation_deg: np.ndarray  # K, NaN without a satellite
    ue_ids: tuple
    mbs_ids: tuple

    def __post_init__(self):
        if not (np.all(np.isfinite(self.beta)) and np.all(self.beta > 0)):
            raise ValueError("channel gains must be finite and positive")

    @classmethod
    def from_gains(cls, beta, is_sat) -> "ChannelState":
        beta = np.asarray(beta, dtype=float)
        K, L = beta.shape
        return cls(beta, np.zeros((K, L), dtype=bool), np.asarray(is_sat, dtype=bool), np.full(K, np.nan),
                   tuple(range(K)), tuple(range(L)))

    @property
    def shape(self):
        return self.beta.shape

    def subset(self, rows) -> "ChannelState":
        rows = np.asarray(rows)
        return ChannelState(self.beta[rows], self.los[rows], self.is_sat, self.elevation_deg[rows],
                            tuple(np.asarray(self.ue_ids)[rows].tolist()), self.mbs_ids)


# ---------------------------------------------------------------- geometry

def elevation_angle(sat, ue) -> float:
    sx, sy, sz = (float(v) for v in sat)
    ux, uy, uz = (float(v) for v in ue)
    slant = math.sqrt((sx - ux) ** 2 + (sy - uy) ** 2 + (sz - uz) ** 2)
    if slant == 0.0:
        raise ValueError("satellite and UE positions coincide")
    if sz <= uz:
        raise ValueError("satellite must be above the UE")
    return math.degrees(math.asin((sz - uz) / slant))


def _elevation_vec(sat_xyz, ux, uy, uz):
    dx, dy, dz = sat_xyz[0] - ux, sat_xyz[1] - uy, sat_xyz[2] - uz
    slant = np.sqrt(dx * dx + dy * dy + dz * dz)
    return np.degrees(np.arcsin(dz / slant)), slant


def _interp(table, theta):
    return np.interp(theta, ELEV_BINS, np.asarray(table, dtype=float))


# ---------------------------------------------------------------- terrestrial models

def _pl_uma(d2d, d3d, fc, h_bs, h_ut):
    d_bp = 4.0 * (h_bs - 1.0) * (h_ut - 1.0) * fc * 1e9 / C_LIGHT
    pl1 = 28.0 + 22.0 * np.log10(d3d) + 20.0 * np.log10(fc)
    pl2 = 28.0 + 40.0 * np.log10(d3d) + 20.0 * np.log10(fc) - 9.0 * np.log10(d_bp ** 2 + (h_bs - h_ut) ** 2)
    los = np.where(d2d <= d_bp, pl1, pl2)
    nlos = np.maximum(los, 13.54 + 39.08 * np.log10(d3d) + 20.0 * np.log10(fc) - 0.6 * (h_ut - 1.5))
    return los, nlos


def _pl_rma(d2d, d3d, fc, h_bs, h_ut, h_bld=5.0, w_street=20.0):
    d_bp = 2.0 * math.pi * h_bs * h_ut * fc * 1e9 / C_LIGHT

    def pl1(d):
        return (20.0 * np.log10(40.0 * math.pi * d * fc / 3.0) + min(0.03 * h_bld ** 1.72, 10.0) * np.log10(d)
                - min(0.044 * h_bld ** 1.72, 14.77) + 0.002 * math.log10(h_bld) * d)

    los = np.where(d2d <= d_bp, pl1(d3d), pl1(d_bp) + 40.0 * np.log10(d3d / d_bp))
    nlos_p = (161.04 - 7.1 * math.log10(w_street) + 7.5 * math.log10(h_bld)
              - (24.37 - 3.7 * (h_bld / h_bs) ** 2) * math.log10(h_bs)
              + (43.42 - 3.1 * math.log10(h_bs)) * (np.log10(d3d) - 3.0)
              + 20.0 * math.log10(fc) - (3.2 * math.log10(11.75 * h_ut) ** 2 - 4.97))
    return los, np.maximum(los, nlos_p)


def los_probability_terrestrial(d2d, urban):
    d2d = np.asarray(d2d, dtype=float)
    safe = np.maximum(d2d, 1e-9)
    p_uma = np.where(d2d <= 18.0, 1.0, 18.0 / safe + np.exp(-safe / 63.0) * (1.0 - 18.0 / safe))
    p_rma = np.where(d2d <= 10.0, 1.0, np.exp(-(d2d - 10.0) / 1000.0))
    return np.clip(np.where(urban, p_uma, p_rma), 0.0, 1.0)


def los_probability_satellite(theta, urban, params: ChannelParams):
    return np.where(urban, _interp(params.sat_los_prob[URBAN], theta), _interp(params.sat_los_prob[RURAL], theta))


def sample_los(kind: str, geometry: float, params: ChannelParams, rng=None, *, urban: bool = False,
               prob: float | None = None, u: float | None = None) -> bool:
    """Bernoulli LoS draw; ``geometry`` is the 2D distance in m or the elevation in degrees."""
    if prob is None:
        if kind == TERRESTRIAL:
            prob = float(los_probability_terrestrial(geometry, urban))
        elif kind == SATELLITE:
            prob = float(los_probability_satellite(geometry, urban, params))
        else:
            raise ValueError(f"unknown link kind {kind!r}")
    if u is None:
        u = (rng if rng is not None else np.random.default_rng()).random()
    return bool(u < prob)


def o2i_low_loss_db(fc_ghz: float) -> float:
    l_glass = 2.0 + 0.2 * fc_ghz
    l_concrete = 5.0 + 4.0 * fc_ghz
    return 5.0 - 10.0 * math.log10(0.3 * 10 ** (-l_glass / 10) + 0.7 * 10 ** (-l_concrete / 10))


def _terrestrial_db(d2d, d3d, urban, los, indoor, z_sf, z_o2i, u_depth, g_tx, g_ue, h_bs, h_ut,
                    params: ChannelParams):
    fc = params.fc_ghz
    uma_los, uma_nlos = _pl_uma(d2d, d3d, fc, h_bs, h_ut)
    rma_los, rma_nlos = _pl_rma(d2d, d3d, fc, h_bs, h_ut)
    pl = np.where(urban, np.where(los, uma_los, uma_nlos), np.where(los, rma_los, rma_nlos))
    sigma = np.where(urban, np.where(los, params.sf_uma_los_db, params.sf_uma_nlos_db),
                     np.where(los, params.sf_rma_los_db, params.sf_rma_nlos_db))
    depth = np.where(urban, params.indoor_depth_m[URBAN], params.indoor_depth_m[RURAL]) * u_depth
    o2i = -(o2i_low_loss_db(fc) + 0.5 * depth) + params.o2i_sigma_db * z_o2i
    return g_tx + g_ue - pl + sigma * z_sf + np.where(indoor, o2i, 0.0)


def _satellite_db(slant_m, theta, urban, los, indoor, z_sf, g_tx, g_ue, params: ChannelParams):
    fspl = 32.45 + 20.0 * math.log10(params.fc_ghz) + 20.0 * np.log10(slant_m)
    zone_tab = (lambda name: np.where(urban, _interp(getattr(params, name)[URBAN], theta),
                                      _interp(getattr(params, name)[RURAL], theta)))
    sigma = np.where(los, zone_tab("sat_sf_los_db"), zone_tab("sat_sf_nlos_db"))
    cl = np.where(los, params.sat_cl_los_db, zone_tab("sat_cl_nlos_db"))
    return (g_tx + g_ue - fspl + sigma * z_sf - cl - params.scintillation_db
            - np.where(indoor, params.building_entry_db, 0.0))


# ---------------------------------------------------------------- per-link API

def link_conditions(mbs: Mbs, ue: Ue, los: bool, ue_height_m: float = 1.5) -> LinkConditions:
    dx, dy = (mbs.x - ue.x) * 1000.0, (mbs.y - ue.y) * 1000.0
    dz = mbs.z * 1000.0 - ue_height_m
    d2d = math.hypot(dx, dy)
    d3d = math.sqrt(d2d * d2d + dz * dz)
    theta = None
    if mbs.tier == SATELLITE:
        theta = elevation_angle((mbs.x, mbs.y, mbs.z), (ue.x, ue.y, ue_height_m / 1000.0))
    return LinkConditions(los, max(d2d, 1e-3), d3d, theta)


def _draws(rng, draws):
    if draws is not None:
        return draws
    rng = rng if rng is not None else np.random.default_rng()
    u_los, z_sf, z_o2i, u_depth = rng.random(), rng.standard_normal(), rng.standard_normal(), rng.random()
    return LinkDraws(u_los, z_sf, z_o2i, u_depth)


def terrestrial_gain(mbs: Mbs, ue: Ue, cond: LinkConditions, params: ChannelParams, rng=None, *,
                     draws: LinkDraws | None = None, ue_height_m: float = 1.5) -> float:
    if mbs.tier != TERRESTRIAL:
        raise ValueError("terrestrial_gain needs a terrestrial MBS")
    d = _draws(rng, draws)
    db = _terrestrial_db(np.float64(max(cond.d2d_m, 1.0)), np.float64(cond.d3d_m), ue.zone == URBAN, cond.los,
                         ue.indoor, d.z_sf, d.z_o2i, min(d.u_depth, 1.0), mbs.gain_dbi, ue.gain_dbi,
                         mbs.z * 1000.0, ue_height_m, params)
    return float(db_to_lin(db))


def satellite_gain(mbs: Mbs, ue: Ue, cond: LinkConditions, params: ChannelParams, rng=None, *,
                   draws: LinkDraws | None = None) -> float:
    if mbs.tier != SATELLITE:
        raise ValueError("satellite_gain needs a satellite MBS")
    if cond.elevation_deg is None:
        raise ValueError("satellite link conditions must carry the elevation angle")
    d = _draws(rng, draws)
    db = _satellite_db(cond.d3d_m, cond.elevation_deg, ue.zone == URBAN, cond.los, ue.indoor, d.z_sf,
                       mbs.gain_dbi, ue.gain_dbi, params)
    return float(db_to_lin(db))


def rsrp(beta, p_mw):
    """Received reference-signal power in dBm for linear gain ``beta`` and per-RE power in mW."""
    beta = np.asarray(beta, dtype=float)
    p_mw = np.asarray(p_mw, dtype=float)
    if np.any(beta <= 0) or np.any(p_mw <= 0):
        raise ValueError("rsrp needs positive gain and power")
    out = 10.0 * np.log10(beta * p_mw)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- whole snapshot

def build_channel(scn: Scenario, params: ChannelParams | None = None, *, pin_draws: bool = False) -> ChannelState:
    """Vectorised gains for every (UE, MBS) pair of a snapshot.

    Terrestrial draws come from a stream keyed by ``(seed, hour)`` only, so
    they are shared by the three satellite positions; satellite draws use a
    separate stream with common uniforms so positions compare like-for-like.
    ``pin_draws`` replaces every random input by its mean.
    """
    params = params or ChannelParams()
    h_ut = scn.area.ue_height_m
    ux = np.array([u.x for u in scn.ues])
    uy = np.array([u.y for u in scn.ues])
    urban = np.array([u.zone == URBAN for u in scn.ues])
    indoor = np.array([u.indoor for u in scn.ues])
    g_ue = np.array([u.gain_dbi for u in scn.ues])
    K, L = len(scn.ues), len(scn.mbs)
    terr = [m for m in scn.mbs if m.tier == TERRESTRIAL]
    sats = [m for m in scn.mbs if m.tier == SATELLITE]
    is_sat = np.array([m.tier == SATELLITE for m in scn.mbs])
    beta_db = np.empty((K, L))
    los = np.zeros((K, L), dtype=bool)
    elev = np.full(K, np.nan)

    if terr:
        LT = len(terr)
        rng = make_rng(scn.seed, scn.hour, STREAM_TERRESTRIAL)
        u_los, z_sf, z_o2i = rng.random((K, LT)), rng.standard_normal((K, LT)), rng.standard_normal((K, LT))
        u_depth = np.minimum(rng.random(K), rng.random(K))
        if pin_draws:
            u_los, z_sf, z_o2i, u_depth = np.full((K, LT), 0.5), np.zeros((K, LT)), np.zeros((K, LT)), np.full(K, 0.5)
        mx = np.array([m.x for m in terr])
        my = np.array([m.y for m in terr])
        h_bs = terr[0].z * 1000.0
        d2d = np.maximum(np.hypot((mx[None, :] - ux[:, None]) * 1000.0, (my[None, :] - uy[:, None]) * 1000.0), 1.0)
        d3d = np.sqrt(d2d ** 2 + (h_bs - h_ut) ** 2)
        p_los = los_probability_terrestrial(d2d, urban[:, None])
        l_t = u_los < p_los
        g_tx = np.array([m.gain_dbi for m in terr])
        db = _terrestrial_db(d2d, d3d, urban[:, None], l_t, indoor[:, None], z_sf, z_o2i, u_depth[:, None],
                             g_tx[None, :], g_ue[:, None], h_bs, h_ut, params)
        idx = [j for j, m in enumerate(scn.mbs) if m.tier == TERRESTRIAL]
        beta_db[:, idx] = db
        los[:, idx] = l_t

    if sats:
        rng = make_rng(scn.seed, scn.hour, STREAM_SATELLITE)
        for s_i, sat in enumerate(sats):
            u_los, z_sf = rng.random(K), rng.standard_normal(K)
            if pin_draws:
                u_los, z_sf = np.full(K, 0.5), np.zeros(K)
            theta, slant_km = _elevation_vec((sat.x, sat.y, sat.z), ux, uy, h_ut / 1000.0)
            l_s = u_los < los_probability_satellite(theta, urban, params)
            db = _satellite_db(slant_km * 1000.0, theta, urban, l_s, indoor, z_sf, sat.gain_dbi, g_ue, params)
            j = [k for k, m in enumerate(scn.mbs) if m is sat][0]
            beta_db[:, j] = db
            los[:, j] = l_s
            if s_i == 0:
                elev = theta

    return ChannelState(db_to_lin(beta_db), los, is_sat, elev,
                        tuple(u.id for u in scn.ues), tuple(m.id for m in scn.mbs))
