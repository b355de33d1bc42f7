"""Deployment snapshots: terrestrial grid, UE drops, traffic profile, satellite positions.

All randomness flows through ``numpy.random.Generator(PCG64)`` seeded from a
``SeedSequence`` built from integer keys, so a snapshot is a pure function of
its configuration and ``(seed, hour)`` on every platform numpy supports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TERRESTRIAL = "terrestrial"
SATELLITE = "satellite"
URBAN = "urban"
RURAL = "rural"

# stream tags for SeedSequence; fixed integers keep streams stable across releases
STREAM_UES = 1
STREAM_TERRESTRIAL = 2
STREAM_SATELLITE = 3


def make_rng(*keys: int) -> np.random.Generator:
    """PCG64 generator keyed by a tuple of non-negative integers."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in keys])))


@dataclass(frozen=True)
class AreaSpec:
    """Study area centred on the origin. Extents in km, ISDs in m.

    ``layout="grid"`` tiles the urban core and the rural remainder with
    hexagonal lattices at their own ISD; ``layout="rings"`` places
    ``1 + 3 r (r + 1)`` sites in hexagonal rings at ``ring_isd_m``.
    """

    side_x_km: float = 50.0
    side_y_km: float = 50.0
    urban_x_km: float = 14.0
    urban_y_km: float = 14.0
    urban_isd_m: float = 500.0
    rural_isd_m: float = 1732.0
    layout: str = "grid"
    rings: int = 2
    ring_isd_m: float = 1732.0
    tower_height_m: float = 25.0
    ue_height_m: float = 1.5

    def __post_init__(self):
        if self.side_x_km <= 0 or self.side_y_km <= 0:
            raise ValueError("area extents must be positive")
        if min(self.urban_isd_m, self.rural_isd_m, self.ring_isd_m) <= 0:
            raise ValueError("inter-site distances must be positive")
        if not (0 < self.urban_x_km < self.side_x_km and 0 < self.urban_y_km < self.side_y_km):
            raise ValueError("urban region must lie strictly inside the area")
        if self.layout not in ("grid", "rings"):
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.rings < 0:
            raise ValueError("rings must be >= 0")

    @property
    def area_km2(self) -> float:
        return self.side_x_km * self.side_y_km

    def in_urban(self, x, y):
        return (np.abs(x) <= self.urban_x_km / 2) & (np.abs(y) <= self.urban_y_km / 2)


@dataclass(frozen=True)
class Mbs:
    id: int
    tier: str
    x: float
    y: float
    z: float  # km
    p_max_dbm: float
    gain_dbi: float
    psi_w: float
    p0_w: float
    zone: str = RURAL

    @property
    def p_max_mw(self) -> float:
        return 10.0 ** (self.p_max_dbm / 10.0)


@dataclass(frozen=True)
class Ue:
    id: int
    x: float
    y: float
    indoor: bool
    zone: str
    gain_dbi: float = 0.0


@dataclass(frozen=True)
class SatellitePosition:
    label: str
    offset_km: float
    altitude_km: float


@dataclass(frozen=True)
class TierDefaults:
    """Per-tier radio and power-model defaults.

    ``p0_w`` and ``psi_w`` have no reference values; the defaults are chosen so
    that a fully loaded terrestrial site draws ~120 W and a sleeping one ~10 W.
    """

    p_max_dbm: float
    gain_dbi: float
    psi_w: float
    p0_w: float


TERRESTRIAL_DEFAULTS = TierDefaults(p_max_dbm=17.7, gain_dbi=14.0, psi_w=70.0, p0_w=10.0)
SATELLITE_DEFAULTS = TierDefaults(p_max_dbm=15.8, gain_dbi=30.0, psi_w=70.0, p0_w=10.0)

# Fraction of the daily peak per hour; anchors: hour 5 -> 0.04 (400 of 10000), hour 20 -> 1.0.
DEFAULT_PROFILE_SHAPE = (
    0.30, 0.20, 0.13, 0.08, 0.055, 0.04, 0.06, 0.12,
    0.25, 0.40, 0.52, 0.60, 0.66, 0.70, 0.72, 0.75,
    0.79, 0.84, 0.90, 0.96, 1.00, 0.92, 0.75, 0.50,
)


@dataclass(frozen=True)
class TrafficProfile:
    counts: tuple = field(default_factory=lambda: tuple(round(10000 * s) for s in DEFAULT_PROFILE_SHAPE))

    def __post_init__(self):
        if len(self.counts) != 24:
            raise ValueError("traffic profile needs exactly 24 hourly counts")
        if min(self.counts) < 1:
            raise ValueError("hourly UE counts must be >= 1")

    @classmethod
    def anchored(cls, k_min: int = 400, k_max: int = 10000) -> "TrafficProfile":
        """Default shape rescaled so hour 5 maps to ``k_min`` and hour 20 to ``k_max``."""
        lo, hi = DEFAULT_PROFILE_SHAPE[5], DEFAULT_PROFILE_SHAPE[20]
        counts = []
        for s in DEFAULT_PROFILE_SHAPE:
            frac = (s - lo) / (hi - lo)
            counts.append(max(1, int(math.floor(k_min + frac * (k_max - k_min) + 0.5))))
        return cls(tuple(counts))

    @property
    def k_min(self) -> int:
        return min(self.counts)


@dataclass(frozen=True)
class Scenario:
    """Immutable deployment snapshot; satellite (if any) is the last MBS."""

    area: AreaSpec
    mbs: tuple
    ues: tuple
    hour: int
    satellite: SatellitePosition | None = None
    seed: int = 0

    @property
    def n_ue(self) -> int:
        return len(self.ues)

    @property
    def n_mbs(self) -> int:
        return len(self.mbs)

    @property
    def tiers(self) -> np.ndarray:
        return np.array([m.tier for m in self.mbs])

    @property
    def is_sat(self) -> np.ndarray:
        return self.tiers == SATELLITE

    @property
    def p_max_mw(self) -> np.ndarray:
        return np.array([m.p_max_mw for m in self.mbs])

    @property
    def terrestrial_only(self) -> "Scenario":
        return Scenario(self.area, tuple(m for m in self.mbs if m.tier == TERRESTRIAL),
                        self.ues, self.hour, None, self.seed)


def _lattice(x0: float, x1: float, y0: float, y1: float, isd_km: float):
    """Hexagonal lattice points inside [x0,x1]x[y0,y1], centred, ordered by (row, col)."""
    wx, wy = x1 - x0, y1 - y0
    if isd_km > wx + 1e-9 or isd_km > wy + 1e-9:
        raise ValueError(f"degenerate grid: ISD {isd_km * 1000:.0f} m exceeds region extent")
    dy = isd_km * math.sqrt(3) / 2
    n_rows = int(math.floor(wy / dy + 1e-9)) + 1
    y_start = y0 + (wy - (n_rows - 1) * dy) / 2
    pts = []
    for r in range(n_rows):
        y = y_start + r * dy
        shift = isd_km / 2 if r % 2 else 0.0
        n_cols = int(math.floor(wx / isd_km + 1e-9)) + 1
        x_start = x0 + (wx - (n_cols - 1) * isd_km) / 2 + shift
        c = 0
        for k in range(n_cols):
            x = x_start + k * isd_km
            if x > x1 + 1e-9:
                continue
            pts.append((r, c, x, y))
            c += 1
    return pts


def hex_ring_sites(rings: int, isd_km: float):
    """Centre site plus ``rings`` hexagonal rings, ordered ring by ring, counter-clockwise."""
    pts = [(0.0, 0.0)]
    dirs = [(math.cos(math.radians(60 * k + 120)), math.sin(math.radians(60 * k + 120))) for k in range(6)]
    for n in range(1, rings + 1):
        x, y = n * isd_km, 0.0
        for dx, dy in dirs:
            for _ in range(n):
                pts.append((round(x, 12), round(y, 12)))
                x += dx * isd_km
                y += dy * isd_km
    return pts


def build_grid(area: AreaSpec, tier: TierDefaults = TERRESTRIAL_DEFAULTS) -> list[Mbs]:
    z = area.tower_height_m / 1000.0
    sites: list[tuple[float, float, str]] = []
    if area.layout == "rings":
        for x, y in hex_ring_sites(area.rings, area.ring_isd_m / 1000.0):
            zone = URBAN if bool(area.in_urban(x, y)) else RURAL
            sites.append((x, y, zone))
    else:
        ux, uy = area.urban_x_km / 2, area.urban_y_km / 2
        sx, sy = area.side_x_km / 2, area.side_y_km / 2
        for _, _, x, y in _lattice(-ux, ux, -uy, uy, area.urban_isd_m / 1000.0):
            sites.append((x, y, URBAN))
        for _, _, x, y in _lattice(-sx, sx, -sy, sy, area.rural_isd_m / 1000.0):
            if not area.in_urban(x, y):
                sites.append((x, y, RURAL))
    return [Mbs(i, TERRESTRIAL, x, y, z, tier.p_max_dbm, tier.gain_dbi, tier.psi_w, tier.p0_w, zone)
            for i, (x, y, zone) in enumerate(sites)]


def zone_split(count: int, urban_share: float) -> tuple[int, int]:
    """Largest-remainder split of ``count`` into (urban, rural)."""
    quotas = [count * urban_share, count * (1.0 - urban_share)]
    base = [int(math.floor(q)) for q in quotas]
    left = count - sum(base)
    order = sorted(range(2), key=lambda k: (-(quotas[k] - base[k]), k))
    for k in order[:left]:
        base[k] += 1
    return base[0], base[1]


def sample_ues(count: int, area: AreaSpec, seed: int, *, hour: int = 0, urban_share: float = 0.4,
               indoor_ratio: float = 0.8, gain_dbi: float = 0.0) -> list[Ue]:
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = make_rng(seed, hour, STREAM_UES)
    n_u, n_r = zone_split(count, urban_share)
    ux, uy = area.urban_x_km / 2, area.urban_y_km / 2
    sx, sy = area.side_x_km / 2, area.side_y_km / 2
    xu = rng.uniform(-ux, ux, n_u)
    yu = rng.uniform(-uy, uy, n_u)
    xr = np.empty(n_r)
    yr = np.empty(n_r)
    filled = 0
    while filled < n_r:
        need = n_r - filled
        cx = rng.uniform(-sx, sx, 2 * need + 8)
        cy = rng.uniform(-sy, sy, 2 * need + 8)
        keep = ~area.in_urban(cx, cy)
        cx, cy = cx[keep][:need], cy[keep][:need]
        xr[filled:filled + len(cx)] = cx
        yr[filled:filled + len(cy)] = cy
        filled += len(cx)
    n_in = int(math.floor(count * indoor_ratio + 0.5))
    indoor = np.zeros(count, dtype=bool)
    indoor[rng.permutation(count)[:n_in]] = True
    xs = np.concatenate([xu, xr])
    ys = np.concatenate([yu, yr])
    zones = [URBAN] * n_u + [RURAL] * n_r
    return [Ue(i, float(xs[i]), float(ys[i]), bool(indoor[i]), zones[i], gain_dbi) for i in range(count)]


def ue_count_at(hour: int, profile: TrafficProfile, scale: float = 1.0) -> int:
    if not 0 <= hour <= 23:
        raise ValueError("hour must be in 0..23")
    if scale <= 0:
        raise ValueError("scale must be positive")
    return max(1, int(math.floor(profile.counts[hour] * scale + 0.5)))


def satellite_positions(altitude: float = 600.0, offset: float = 50.0) -> list[SatellitePosition]:
    if altitude <= 0:
        raise ValueError("altitude must be positive")
    return [SatellitePosition("P1", -offset, altitude),
            SatellitePosition("P2", 0.0, altitude),
            SatellitePosition("P3", offset, altitude)]


def satellite_mbs(idx: int, pos: SatellitePosition, tier: TierDefaults = SATELLITE_DEFAULTS) -> Mbs:
    return Mbs(idx, SATELLITE, pos.offset_km, 0.0, pos.altitude_km, tier.p_max_dbm, tier.gain_dbi,
               tier.psi_w, tier.p0_w, RURAL)


def build_scenario(area: AreaSpec, n_ue: int, hour: int, seed: int,
                   satellite: SatellitePosition | None = None, *,
                   grid: Sequence[Mbs] | None = None, urban_share: float = 0.4,
                   indoor_ratio: float = 0.8, terrestrial: TierDefaults = TERRESTRIAL_DEFAULTS,
                   sat_tier: TierDefaults = SATELLITE_DEFAULTS) -> Scenario:
    mbs = list(grid) if grid is not None else build_grid(area, terrestrial)
    if satellite is not None:
        mbs.append(satellite_mbs(len(mbs), satellite, sat_tier))
    ues = sample_ues(n_ue, area, seed, hour=hour, urban_share=urban_share, indoor_ratio=indoor_ratio)
    return Scenario(area, tuple(mbs), tuple(ues), hour, satellite, seed)
