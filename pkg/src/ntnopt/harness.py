"""Daily sweep orchestration: config loading, per-snapshot policy runs, aggregation, file output."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__, kernels
from .benchmarks import R_FLOOR, SPECS, run_benchmark
from .blaster import BlasterConfig, run_blaster
from .channel import ChannelParams, build_channel
from .heuristic import HeuristicConfig, run_heuristic
from .linklayer import Allocation, EnergyParams, Network, energy, noise_mw, sinr_matrix, tier_bandwidth
from .scenario import (AreaSpec, TierDefaults, TrafficProfile, build_grid, build_scenario, satellite_positions,
                       ue_count_at)

log = logging.getLogger(__name__)

BLASTER = "BLASTER"
HEURISTIC = "HEURISTIC"
POLICIES = (BLASTER, HEURISTIC, "3GPP-TN", "3GPP-NTN", "3GPP-ENERGY-SAVING")
BASELINE = "3GPP-TN"

HOURLY_COLUMNS = ("hour", "policy", "lambda_max", "K", "sat_fraction", "epsilon", "slt", "slt_gain_vs_tn_pct",
                  "tn_energy_j", "sat_energy_j", "active_tn_mbs", "outage_count", "op_count", "iterations",
                  "coverage_violations", "pmax_violations")
SUMMARY_COLUMNS = ("policy", "lambda_max", "window", "hours", "mean_slt", "mean_slt_gain_vs_tn_pct",
                   "mean_tn_energy_j", "total_tn_energy_j", "mean_sat_energy_j", "mean_sat_fraction",
                   "mean_active_tn_mbs", "mean_op_count")
TRACE_COLUMNS = ("iteration", "f_total", "slt_term", "l1_term", "group_term", "epsilon", "active_mbs_count",
                 "relative_gain")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- configuration

@dataclass(frozen=True)
class TrafficConfig:
    k_min: int = 400
    k_max: int = 10000
    scale: float = 0.1
    counts: tuple | None = None

    def profile(self) -> TrafficProfile:
        if self.counts is not None:
            return TrafficProfile(tuple(int(c) for c in self.counts))
        return TrafficProfile.anchored(self.k_min, self.k_max)


@dataclass(frozen=True)
class SimConfig:
    area: AreaSpec = field(default_factory=lambda: AreaSpec(
        side_x_km=8.0, side_y_km=8.0, urban_x_km=2.0, urban_y_km=2.0, layout="rings", rings=2, ring_isd_m=1732.0))
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    urban_share: float = 0.4
    indoor_ratio: float = 0.8
    altitude_km: float = 600.0
    offset_km: float = 50.0
    terrestrial: TierDefaults = field(default_factory=lambda: TierDefaults(17.7, 14.0, 5.0, 5.0))
    satellite: TierDefaults = field(default_factory=lambda: TierDefaults(15.8, 30.0, 5.0, 5.0))
    channel: ChannelParams = field(default_factory=ChannelParams)
    energy: EnergyParams = field(default_factory=EnergyParams)
    blaster: BlasterConfig = field(default_factory=BlasterConfig)
    heuristic: HeuristicConfig = field(default_factory=HeuristicConfig)

    def k_min(self) -> int:
        prof = self.traffic.profile()
        return min(ue_count_at(h, prof, self.traffic.scale) for h in range(24))


@dataclass(frozen=True)
class RunPlan:
    config: SimConfig = field(default_factory=SimConfig)
    policies: tuple = POLICIES
    hours: tuple = tuple(range(24))
    lambda_max: tuple = (1e7,)
    seeds: tuple = (0, 1, 2)
    positions: tuple = ("P1", "P2", "P3")
    out_dir: str | None = None
    workers: int = 1
    write_traces: bool = True

    def __post_init__(self):
        if not self.policies:
            raise ValueError("policy list must not be empty")
        unknown = set(self.policies) - set(POLICIES)
        if unknown:
            raise ValueError(f"unknown policies {sorted(unknown)}")
        if any(not 0 <= h <= 23 for h in self.hours):
            raise ValueError("hours must lie in 0..23")
        if not self.seeds or not self.lambda_max or not self.positions:
            raise ValueError("seeds, lambda_max and positions must be nonempty")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


_SECTIONS = {
    "area": AreaSpec, "traffic": TrafficConfig, "terrestrial": TierDefaults, "satellite": TierDefaults,
    "channel": ChannelParams, "energy": EnergyParams, "blaster": BlasterConfig, "heuristic": HeuristicConfig,
}
_SCALARS = {"urban_share": float, "indoor_ratio": float, "altitude_km": float, "offset_km": float}
_RUN_KEYS = {"policies", "hours", "lambda_max", "seeds", "positions", "workers", "write_traces"}


def _line_of(node, key):
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            if k.value == key:
                return k.start_mark.line + 1
    return node.start_mark.line + 1 if node is not None else 0


def _child(node, key):
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            if k.value == key:
                return v
    return None


def _coerce(value, like):
    if isinstance(like, tuple):
        return tuple(value)
    if isinstance(like, bool):
        return bool(value)
    if isinstance(like, float):
        return float(value)
    if isinstance(like, int) and not isinstance(value, bool):
        if float(value) != int(value):
            raise TypeError("expected an integer")
        return int(value)
    return value


def _build_section(cls, data, node, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} (line {_line_of(node, None) if node else '?'}): expected a mapping")
    base = cls() if cls is not TierDefaults else None
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        line = _line_of(node, key)
        if key not in names:
            raise ConfigError(f"line {line}: unknown key {where}.{key}")
        like = getattr(base, key) if base is not None else 0.0
        try:
            if isinstance(like, dict):
                value = {k: tuple(v) if isinstance(v, list) else v for k, v in value.items()}
            elif like is not None:
                value = _coerce(value, like)
            elif isinstance(value, list):
                value = tuple(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"line {line}: bad value for {where}.{key}: {exc}") from None
        kwargs[key] = value
    try:
        if base is None:
            return cls(**kwargs)
        return replace(base, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"line {_line_of(node, None) if node else '?'}: invalid {where}: {exc}") from None


def load_config(text: str, *, source: str = "<config>") -> tuple[SimConfig, dict]:
    """Parse a YAML document into (SimConfig, run-section dict). Errors carry line numbers."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if data is None:
        return SimConfig(), {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    cfg = SimConfig()
    updates = {}
    run = {}
    for key, value in data.items():
        line = _line_of(root, key)
        node = _child(root, key)
        if key in _SECTIONS:
            updates[key] = _build_section(_SECTIONS[key], value, node, key)
        elif key in _SCALARS:
            try:
                updates[key] = _SCALARS[key](value)
            except (TypeError, ValueError):
                raise ConfigError(f"{source}:{line}: {key} must be a number") from None
        elif key == "run":
            if not isinstance(value, dict):
                raise ConfigError(f"{source}:{line}: run must be a mapping")
            for k in value:
                if k not in _RUN_KEYS:
                    raise ConfigError(f"{source}:{_line_of(node, k)}: unknown key run.{k}")
            run = dict(value)
        else:
            raise ConfigError(f"{source}:{line}: unknown key {key}")
    try:
        cfg = replace(cfg, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cfg, run


def load_config_file(path) -> tuple[SimConfig, dict]:
    p = Path(path)
    return load_config(p.read_text(), source=str(p))


def config_to_dict(cfg: SimConfig) -> dict:
    def clean(x):
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        return x
    return clean(asdict(cfg))


# ---------------------------------------------------------------- per-snapshot evaluation

@dataclass(frozen=True)
class ComplexityEstimate:
    policy: str
    K: int
    L: int
    iterations: int
    inner_iterations: float = 1.0

    @property
    def operations(self) -> float:
        return self.iterations * self.inner_iterations * self.K * self.L


def complexity_estimate(policy: str, K: int, L: int, iterations: int, inner_iterations: float = 1.0):
    """BLASTER: I_blaster * I_mu * K * L; heuristic: I_H * K * L; benchmarks: one K * L pass."""
    if policy == BLASTER:
        return ComplexityEstimate(policy, K, L, iterations, inner_iterations)
    if policy == HEURISTIC:
        return ComplexityEstimate(policy, K, L, iterations)
    return ComplexityEstimate(policy, K, L, 1)


def relative_gain(metric: float, baseline: float) -> float:
    if baseline == 0:
        raise ValueError("relative gain against a zero baseline")
    return 100.0 * (metric - baseline) / abs(baseline)


def evaluate(alloc: Allocation, net: Network, outage: np.ndarray) -> dict:
    """SLT (outage UEs credited R_floor), coverage and power checks for a binary allocation."""
    served = ~outage
    X = alloc.X[served]
    serving = np.argmax(X, axis=1)
    k = np.maximum(X.sum(axis=0), 1.0)
    W = tier_bandwidth(net.is_sat, alloc.eps, alloc.bandwidth_hz)
    beta = net.beta[served]
    gamma = sinr_matrix(beta, alloc.p, net.is_sat, net.sigma2)
    idx = np.arange(len(serving))
    rates = W[serving] / k[serving] * np.log2(1.0 + gamma[idx, serving])
    n_out = int(outage.sum())
    rx = beta[idx, serving] * alloc.p[serving]
    return {
        "slt": float(np.sum(np.log(rates)) + n_out * math.log(R_FLOOR)),
        "sat_fraction": float(np.sum(net.is_sat[serving])) / len(outage),
        "epsilon": float(alloc.eps),
        "coverage_violations": int(np.sum(rx < net.rsrp_min * (1.0 - 1e-9))),
        "pmax_violations": int(np.sum(alloc.p > net.p_max * (1.0 + 1e-12))),
        "outage_count": n_out,
    }


def _network(scn, cfg: SimConfig):
    ch = build_channel(scn, cfg.channel)
    return Network.build(ch, scn.mbs, sigma2=noise_mw())


def run_snapshot(cfg: SimConfig, hour: int, seed: int, position: str, policies, lambdas, k_min: int):
    """All policies on one (hour, seed, satellite position); returns (metrics rows, traces)."""
    prof = cfg.traffic.profile()
    K = ue_count_at(hour, prof, cfg.traffic.scale)
    pos = {p.label: p for p in satellite_positions(cfg.altitude_km, cfg.offset_km)}[position]
    grid = build_grid(cfg.area, cfg.terrestrial)
    scn = build_scenario(cfg.area, K, hour, seed, pos, grid=grid, urban_share=cfg.urban_share,
                         indoor_ratio=cfg.indoor_ratio, terrestrial=cfg.terrestrial, sat_tier=cfg.satellite)
    net = _network(scn, cfg)
    # UEs out of reach of every MBS are in outage for every policy
    unreachable = net.max_rsrp_association() < 0
    sub = net.rows(~unreachable)
    rows, traces = [], {}
    runs = []
    for pol in policies:
        if pol == BLASTER:
            runs += [(pol, lam) for lam in lambdas]
        else:
            runs.append((pol, None))
    for pol, lam in runs:
        if pol in SPECS:
            res = run_benchmark(SPECS[pol], net)
            alloc_full, outage = res.alloc, res.outage | unreachable
            alloc_full = Allocation(np.where(outage[:, None], 0.0, alloc_full.X), alloc_full.p, alloc_full.eps,
                                    alloc_full.bandwidth_hz)
            iters, inner = 1, 1.0
            sat_on = SPECS[pol].satellite
        else:
            if pol == BLASTER:
                bcfg = replace(cfg.blaster, lambda_max=lam, k_min=k_min)
                alloc, tr = run_blaster(sub, bcfg)
                iters, inner = tr.iterations, tr.mean_dual_iters
            else:
                alloc, tr = run_heuristic(sub, hour, cfg.heuristic)
                iters, inner = tr.iterations, 1.0
            traces[(pol, lam)] = tr.rows
            X = np.zeros((net.K, net.L))
            X[~unreachable] = alloc.X
            alloc_full = Allocation(X, alloc.p, alloc.eps, alloc.bandwidth_hz)
            outage = unreachable
            sat_on = True
        m = evaluate(alloc_full, net, outage)
        en = energy(alloc_full, scn.mbs, cfg.energy, satellite_enabled=sat_on)
        m.update({
            "hour": hour, "policy": pol, "lambda_max": lam, "K": K, "tn_energy_j": en.tn_j, "sat_energy_j": en.sat_j,
            "active_tn_mbs": int(np.sum((alloc_full.p > 0) & ~net.is_sat)),
            "op_count": complexity_estimate(pol, int(sub.K), net.L, iters, inner).operations,
            "iterations": iters,
        })
        rows.append(m)
    return rows, traces


def _snapshot_job(args):
    cfg, hour, seed, policies, lambdas, positions, k_min = args
    out = []
    for pos in positions:
        rows, traces = run_snapshot(cfg, hour, seed, pos, policies, lambdas, k_min)
        out.append((hour, seed, pos, rows, traces))
    return out


# ---------------------------------------------------------------- aggregation and output

def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("refusing to serialise a non-finite value")
    s = format(x, ".9g")
    return "0" if s == "-0" else s


def _csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) if not isinstance(r[c], str) else r[c] for c in columns])
    return buf.getvalue()


_MEAN_KEYS = ("sat_fraction", "epsilon", "slt", "tn_energy_j", "sat_energy_j", "active_tn_mbs", "outage_count",
              "op_count", "iterations")
_SUM_KEYS = ("coverage_violations", "pmax_violations")


def aggregate(snapshot_rows) -> list[dict]:
    """Mean over seeds and satellite positions per (hour, policy, lambda_max)."""
    groups: dict = {}
    for r in snapshot_rows:
        groups.setdefault((r["hour"], r["policy"], r["lambda_max"]), []).append(r)
    out = []
    for (hour, pol, lam), rs in groups.items():
        row = {"hour": hour, "policy": pol, "lambda_max": lam, "K": rs[0]["K"]}
        for k in _MEAN_KEYS:
            row[k] = float(np.mean([r[k] for r in rs]))
        for k in _SUM_KEYS:
            row[k] = int(sum(r[k] for r in rs))
        out.append(row)
    base = {r["hour"]: r["slt"] for r in out if r["policy"] == BASELINE}
    for r in out:
        r["slt_gain_vs_tn_pct"] = relative_gain(r["slt"], base[r["hour"]]) if r["hour"] in base else 0.0
    order = {p: i for i, p in enumerate(POLICIES)}
    out.sort(key=lambda r: (r["hour"], order[r["policy"]], -1.0 if r["lambda_max"] is None else r["lambda_max"]))
    return out


def summarize(hourly, low_window=(0, 7)) -> list[dict]:
    """Per (policy, lambda_max): means over the day, the low-traffic window and the rest."""
    lo, hi = low_window
    keyed: dict = {}
    for r in hourly:
        keyed.setdefault((r["policy"], r["lambda_max"]), []).append(r)
    out = []
    for (pol, lam), rs in keyed.items():
        for window, pick in (("all", lambda h: True), ("low", lambda h: lo <= h < hi),
                             ("high", lambda h: not lo <= h < hi)):
            sel = [r for r in rs if pick(r["hour"])]
            if not sel:
                continue
            out.append({
                "policy": pol, "lambda_max": lam, "window": window, "hours": len(sel),
                "mean_slt": float(np.mean([r["slt"] for r in sel])),
                "mean_slt_gain_vs_tn_pct": float(np.mean([r["slt_gain_vs_tn_pct"] for r in sel])),
                "mean_tn_energy_j": float(np.mean([r["tn_energy_j"] for r in sel])),
                "total_tn_energy_j": float(np.sum([r["tn_energy_j"] for r in sel])),
                "mean_sat_energy_j": float(np.mean([r["sat_energy_j"] for r in sel])),
                "mean_sat_fraction": float(np.mean([r["sat_fraction"] for r in sel])),
                "mean_active_tn_mbs": float(np.mean([r["active_tn_mbs"] for r in sel])),
                "mean_op_count": float(np.mean([r["op_count"] for r in sel])),
            })
    return out


def _rounded(rows, columns):
    """Rows as they will read back from CSV, so summaries are recomputable from the file."""
    out = []
    for r in rows:
        q = dict(r)
        for c in columns:
            if isinstance(q[c], float):
                q[c] = float(fmt(q[c]))
        out.append(q)
    return out


@dataclass
class PlanResult:
    hourly: list
    summary: list
    snapshots: list
    traces: dict

    def hourly_csv(self) -> str:
        return _csv(self.hourly, HOURLY_COLUMNS)

    def summary_csv(self) -> str:
        return _csv(self.summary, SUMMARY_COLUMNS)


def run_plan(plan: RunPlan) -> PlanResult:
    cfg = plan.config
    k_min = cfg.k_min()
    jobs = [(cfg, h, s, tuple(plan.policies), tuple(plan.lambda_max), tuple(plan.positions), k_min)
            for h in plan.hours for s in plan.seeds]
    if plan.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as ex:
            results = list(ex.map(_snapshot_job, jobs))
    else:
        results = [_snapshot_job(j) for j in jobs]
    snapshots, traces = [], {}
    for batch in results:
        for hour, seed, pos, rows, tr in batch:
            for r in rows:
                snapshots.append(dict(r, seed=seed, position=pos))
            for (pol, lam), t in tr.items():
                traces[(pol, lam, hour, seed, pos)] = t
    hourly = _rounded(aggregate(snapshots), HOURLY_COLUMNS)
    summary = summarize(hourly, cfg.heuristic.low_traffic_hours)
    result = PlanResult(hourly, summary, snapshots, traces)
    if plan.out_dir is not None:
        write_outputs(plan, result)
    return result


def trace_name(pol, lam, hour, seed, pos) -> str:
    tag = pol.lower()
    if lam is not None:
        tag += f"_lam{fmt(lam)}"
    return f"{tag}_h{hour:02d}_s{seed}_{pos}.csv"


def write_outputs(plan: RunPlan, result: PlanResult) -> None:
    out = Path(plan.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "hourly_metrics.csv").write_text(result.hourly_csv(), newline="")
    (out / "daily_summary.csv").write_text(result.summary_csv(), newline="")
    if plan.write_traces:
        tdir = out / "traces"
        tdir.mkdir(exist_ok=True)
        for key in sorted(result.traces, key=lambda k: (k[0], -1 if k[1] is None else k[1], *k[2:])):
            (tdir / trace_name(*key)).write_text(_csv(result.traces[key], TRACE_COLUMNS), newline="")
    manifest = {
        "tool": "ntnopt", "version": __version__, "kernel_backend": kernels.BACKEND,
        "config": config_to_dict(plan.config),
        "plan": {"policies": list(plan.policies), "hours": list(plan.hours), "lambda_max": list(plan.lambda_max),
                 "seeds": list(plan.seeds), "positions": list(plan.positions)},
        "k_min": plan.config.k_min(),
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
