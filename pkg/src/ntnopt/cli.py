"""Command line entry point: ``ntnopt run | scenario dump | channel dump``."""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path


from .channel import build_channel, lin_to_db
from .harness import POLICIES, ConfigError, RunPlan, SimConfig, load_config_file, run_plan
from .scenario import build_grid, build_scenario, satellite_positions, ue_count_at


def _csv_list(kind):
    def parse(text):
        try:
            return tuple(kind(t) for t in text.replace(",", " ").split())
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None
    return parse


def _load(path) -> tuple[SimConfig, dict]:
    if path is None:
        return SimConfig(), {}
    return load_config_file(path)


def _plan(args) -> RunPlan:
    cfg, run = _load(args.config)
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in run.items()}
    for name in ("policies", "hours", "seeds", "lambda_max", "workers"):
        value = getattr(args, name)
        if value is not None:
            kw[name] = value
    if "lambda_max" in kw:
        kw["lambda_max"] = tuple(float(x) for x in kw["lambda_max"])
    if args.no_traces:
        kw["write_traces"] = False
    return RunPlan(config=cfg, out_dir=args.out, **kw)


def _scenario(args):
    cfg, _ = _load(args.config)
    K = args.ues if args.ues is not None else ue_count_at(args.hour, cfg.traffic.profile(), cfg.traffic.scale)
    pos = {p.label: p for p in satellite_positions(cfg.altitude_km, cfg.offset_km)}[args.position]
    sat = None if args.no_satellite else pos
    return cfg, build_scenario(cfg.area, K, args.hour, args.seed, sat, grid=build_grid(cfg.area, cfg.terrestrial),
                               urban_share=cfg.urban_share, indoor_ratio=cfg.indoor_ratio,
                               terrestrial=cfg.terrestrial, sat_tier=cfg.satellite)


def _write(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, newline="")


def cmd_run(args) -> int:
    plan = _plan(args)
    res = run_plan(plan)
    print(f"wrote {len(res.hourly)} hourly rows to {plan.out_dir}")
    return 0


def cmd_scenario_dump(args) -> int:
    _, scn = _scenario(args)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["kind", "id", "tier", "zone", "x_km", "y_km", "z_km", "indoor", "p_max_dbm", "gain_dbi"])
    for m in scn.mbs:
        w.writerow(["MBS", m.id, m.tier, m.zone, f"{m.x:.6f}", f"{m.y:.6f}", f"{m.z:.6f}", "", m.p_max_dbm,
                    m.gain_dbi])
    for u in scn.ues:
        w.writerow(["UE", u.id, "", u.zone, f"{u.x:.6f}", f"{u.y:.6f}", "", int(u.indoor), "", u.gain_dbi])
    _write(buf.getvalue(), args.out)
    return 0


def cmd_channel_dump(args) -> int:
    cfg, scn = _scenario(args)
    ch = build_channel(scn, cfg.channel)
    db = lin_to_db(ch.beta)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["ue"] + [str(m.id) for m in scn.mbs])
    for i, u in enumerate(scn.ues):
        w.writerow([u.id] + [f"{v:.6f}" for v in db[i]])
    _write(buf.getvalue(), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ntnopt", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="daily sweep; writes CSVs and a manifest")
    run.add_argument("--config", type=Path)
    run.add_argument("--out", required=True)
    run.add_argument("--policies", type=_csv_list(str), help=f"subset of {', '.join(POLICIES)}")
    run.add_argument("--hours", type=_csv_list(int))
    run.add_argument("--seeds", type=_csv_list(int))
    run.add_argument("--lambda-max", dest="lambda_max", type=_csv_list(float))
    run.add_argument("--workers", type=int)
    run.add_argument("--no-traces", action="store_true")
    run.set_defaults(func=cmd_run)

    for name, func, help_ in (("scenario", cmd_scenario_dump, "deployment as CSV, one row per MBS/UE"),
                              ("channel", cmd_channel_dump, "gain matrix in dB as CSV")):
        grp = sub.add_parser(name).add_subparsers(dest="action", required=True)
        dump = grp.add_parser("dump", help=help_)
        dump.add_argument("--config", type=Path)
        dump.add_argument("--hour", type=int, default=20)
        dump.add_argument("--seed", type=int, default=0)
        dump.add_argument("--position", choices=("P1", "P2", "P3"), default="P1")
        dump.add_argument("--ues", type=int, help="override the hour's UE count")
        dump.add_argument("--no-satellite", action="store_true")
        dump.add_argument("--out", help="file path; stdout when omitted")
        dump.set_defaults(func=func)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"ntnopt: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
