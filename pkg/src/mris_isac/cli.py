"""Command-line front end for runs, sweeps and validation suites."""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import (RunSpec, SweepSpec, beampattern_map, map_peak,
                          oracle_assignment, run, run_case, sweep,
                          validate_bounds)
from .scenario import ConfigError, load_config


def _parse_value(text):
    """int if it looks like one, else float, else the raw string."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _parse_grid(items):
    grid = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"grid entry must look like key=v1,v2: {item!r}")
        key, vals = item.split("=", 1)
        grid[key.strip()] = [_parse_value(v) for v in vals.split(",")
                             if v.strip()]
    return grid


def _config_from(args):
    cfg = load_config(args.config, args.override or ())
    if getattr(args, "seed", None):
        cfg = cfg.with_overrides(seed=args.seed[0])
    return cfg


def _seeds_from(args, cfg, default_count=1):
    if args.seed:
        return [int(s) for s in args.seed]
    return list(range(cfg.seed, cfg.seed + default_count))


def _add_common(sub):
    sub.add_argument("--config", metavar="PATH", default=None,
                     help="INI scenario file (defaults used when absent)")
    sub.add_argument("--override", metavar="KEY=VALUE", action="append",
                     help="section.key=value config override, repeatable")
    sub.add_argument("--seed", type=int, action="append", metavar="N",
                     help="seed, repeatable for multi-seed commands")
    sub.add_argument("--out", metavar="DIR", default=None,
                     help="output directory for CSV/JSON/plots")
    sub.add_argument("--mc-samples", type=int, default=1000, metavar="N",
                     help="Monte-Carlo draws for worst-case evaluation")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="mris-isac",
        description="Secure ISAC with a movable reconfigurable surface: "
                    "runs, sweeps, bound validation, beam maps, oracles.")
    sp = ap.add_subparsers(dest="command", required=True)

    p = sp.add_parser("run", help="solve one scenario end to end")
    _add_common(p)

    p = sp.add_parser("sweep", help="grid of config overrides x seeds")
    _add_common(p)
    p.add_argument("--grid", metavar="KEY=V1,V2", action="append",
                   help="config field name and value list, repeatable")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel worker processes for sweep cells")

    p = sp.add_parser("validate-bounds",
                      help="bound tightness and containment over a "
                           "(D, Theta, Psi) grid")
    _add_common(p)
    p.add_argument("--samples", type=int, default=10_000,
                   help="containment draws per grid cell")
    p.add_argument("--d-grid", metavar="V1,V2", default=None,
                   help="range error bounds in meters")
    p.add_argument("--theta-grid", metavar="V1,V2", default=None,
                   help="azimuth error bounds in degrees")
    p.add_argument("--psi-grid", metavar="V1,V2", default=None,
                   help="elevation error bounds in degrees")

    p = sp.add_parser("beampattern",
                      help="solve one scenario, then map transmit gain "
                           "over direction")
    _add_common(p)
    p.add_argument("--az-points", type=int, default=81)
    p.add_argument("--el-points", type=int, default=41)

    p = sp.add_parser("oracle",
                      help="exhaustive assignment check against the "
                           "relaxed solver (K<=3, B<=3)")
    _add_common(p)
    return ap


def _cmd_run(args):
    cfg = _config_from(args)
    spec = RunSpec(config=cfg, seeds=_seeds_from(args, cfg),
                   out_dir=args.out, mc_samples=args.mc_samples)
    record = run(spec)
    print(json.dumps(record.as_dict(), indent=2))
    return 0


def _cmd_sweep(args):
    cfg = _config_from(args)
    spec = SweepSpec(config=cfg, seeds=_seeds_from(args, cfg, 5),
                     out_dir=args.out, mc_samples=args.mc_samples,
                     grid=_parse_grid(args.grid), workers=args.workers)
    rows = sweep(spec)
    print(f"{len(rows)} rows over {len(spec.cell_list())} cells")
    if args.out:
        print(f"wrote {args.out}/sweep.csv")
    return 0


def _cmd_validate(args):
    kw = {}
    if args.d_grid:
        kw["D_grid"] = [float(v) for v in args.d_grid.split(",")]
    if args.theta_grid:
        kw["Theta_grid_deg"] = [float(v) for v in args.theta_grid.split(",")]
    if args.psi_grid:
        kw["Psi_grid_deg"] = [float(v) for v in args.psi_grid.split(",")]
    rows = validate_bounds(out_dir=args.out, samples=args.samples,
                           seed=(args.seed[0] if args.seed else 0), **kw)
    bad = sum(r["vector_violations"] for r in rows)
    etas = [r["eta"] for r in rows if r["eta"] > 0]
    print(f"{len(rows)} cells, {bad} total ball violations, "
          f"eta in [{min(etas, default=0):.4f}, {max(etas, default=0):.4f}]")
    if args.out:
        print(f"wrote {args.out}/bounds.csv and heatmaps")
    return 0


def _cmd_beampattern(args):
    import numpy as np

    cfg = _config_from(args)
    seed = args.seed[0] if args.seed else cfg.seed
    record, (ws, state, layout, channels, bounds) = run_case(
        cfg, seed, mc_samples=args.mc_samples, keep_state=True)
    rows = beampattern_map(
        cfg, state, ws.placements, channels.G,
        az_deg=np.linspace(-80.0, 80.0, args.az_points),
        el_deg=np.linspace(-40.0, 40.0, args.el_points),
        out_dir=args.out)
    print(f"min secrecy {record.min_secrecy_wc_bits:.3f} bit/s/Hz worst case")
    for layer in ("gain_comm_W", "gain_an_W"):
        az, el = map_peak(rows, layer)
        print(f"{layer} peak at azimuth {az:+.1f} deg, elevation {el:+.1f} deg")
    if args.out:
        print(f"wrote {args.out}/beampattern.csv and beampattern.png")
    return 0


def _cmd_oracle(args):
    cfg = _config_from(args)
    seeds = _seeds_from(args, cfg, 10)
    report = oracle_assignment(cfg, seeds)
    for case in report["cases"]:
        print(f"seed {case['seed']}: chosen {case['chosen']} "
              f"best {case['best']} gap {case['gap']:.3e} "
              f"{'match' if case['match'] else 'MISS'}")
    print(f"{report['matches']}/{report['total']} matched")
    if args.out:
        from pathlib import Path
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "oracle.json").write_text(json.dumps(report, indent=2))
        print(f"wrote {args.out}/oracle.json")
    return 0


_DISPATCH = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "validate-bounds": _cmd_validate,
    "beampattern": _cmd_beampattern,
    "oracle": _cmd_oracle,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
