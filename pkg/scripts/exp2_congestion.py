"""Congested cluster: shortest-queue DPP variants against max-SINR
association, averaged over seeds."""

import argparse
from pathlib import Path

import numpy as np

from dppstream import load_config, run
from dppstream.reports import emit_reports, summary_row, write_table

ROOT = Path(__file__).resolve().parents[1]
METRICS = ("mean_ssim", "buffering_frac", "rebuf_frac", "skipped_pct", "underrun_rate")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=ROOT / "configs" / "exp2.ini")
    ap.add_argument("--policies", default="dpp-macro,dpp-unique,max-sinr")
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--out", default="out/exp2")
    args = ap.parse_args()

    cfg = load_config(args.config)
    seeds = [int(s) for s in args.seeds.split(",")]
    policies = args.policies.split(",")
    rows = []
    for pol in policies:
        for seed in seeds:
            rep = run(cfg.with_policy(variant=pol).with_run(seed=seed))
            emit_reports(rep, Path(args.out) / f"seed{seed}" / pol)
            row = summary_row(rep)
            ur = np.array([u["underrun_rate"] for u in rep.users])
            row["users_underrun_le_5pct"] = float(np.mean(ur <= 0.05))
            rows.append(row)
    write_table(rows, Path(args.out) / "summary.csv")
    cols = METRICS + ("users_underrun_le_5pct",)
    widths = [max(12, len(m) + 2) for m in cols]
    print(f"{'policy':<11}" + "".join(f"{m:>{w}}" for m, w in zip(cols, widths)))
    for pol in policies:
        mine = [r for r in rows if r["policy"] == pol]
        vals = [np.mean([r[m] for r in mine]) for m in cols]
        print(f"{pol:<11}" + "".join(f"{v:>{w}.4f}" for v, w in zip(vals, widths)))


if __name__ == "__main__":
    main()
