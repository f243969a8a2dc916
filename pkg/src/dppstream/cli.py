"""Command-line entry point: ``run``, ``sweep-v`` and ``compare``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import POLICIES, ConfigError, load_config
from .reports import emit_reports, summary_row, write_table, write_timeseries
from .sim import run, sweep_v


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _policies(text: str) -> list[str]:
    names = [p.strip() for p in text.split(",") if p.strip()]
    bad = [p for p in names if p not in POLICIES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown policies {bad}; choose from {', '.join(POLICIES)}")
    return names


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_run(seed=args.seed)
    if args.policy:
        cfg = cfg.with_policy(variant=args.policy)
    rep = run(cfg)
    emit_reports(rep, args.out)
    write_table([summary_row(rep)], Path(args.out) / "summary.csv")
    _print_summary([summary_row(rep)])
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    seeds = args.seeds if args.seeds is not None else [cfg.run.seed]
    rows = sweep_v(cfg, args.v, seeds)
    write_table(rows, Path(args.out) / "sweep_v.csv")
    for r in rows:
        print(f"V={r['V']:<10g} seed={r['seed']}  backlog={r['mean_backlog']:.4g}  utility={r['utility']:.4g}")
    return 0


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    seeds = args.seeds if args.seeds is not None else [cfg.run.seed]
    out = Path(args.out)
    rows = []
    for seed in seeds:
        reports = {}
        for pol in args.policies:
            rep = run(cfg.with_policy(variant=pol).with_run(seed=seed))
            emit_reports(rep, out / f"seed{seed}" / pol)
            reports[pol] = rep
            rows.append(summary_row(rep))
        write_timeseries(reports, out / f"seed{seed}")
    write_table(rows, out / "summary.csv")
    _print_summary(rows)
    return 0


def _print_summary(rows):
    for r in rows:
        print(f"{r['policy']:<10} seed={r['seed']}  ssim={r['mean_ssim']:.4f}  buffering={r['buffering_frac']:.4f}"
              f"  rebuf={r['rebuf_frac']:.4f}  skipped%={r['skipped_pct']:.3f}  underrun={r['underrun_rate']:.4f}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dppstream", description="Helper-network video streaming simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one configuration and write reports")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--policy", choices=POLICIES)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep-v", help="time-averaged backlog and utility against V")
    s.add_argument("--config", required=True)
    s.add_argument("--v", type=_floats, required=True, help="comma-separated V values")
    s.add_argument("--seeds", type=_ints)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("compare", help="run several policies on the same scenario")
    c.add_argument("--config", required=True)
    c.add_argument("--policies", type=_policies, default=list(POLICIES))
    c.add_argument("--seeds", type=_ints)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
