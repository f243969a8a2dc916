"""Sweep V on the stationary instance: time-averaged backlog grows with V
while the network utility saturates."""

import argparse
from pathlib import Path

import numpy as np

from dppstream import load_config, sweep_v
from dppstream.reports import write_table

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=ROOT / "configs" / "tradeoff.ini")
    ap.add_argument("--v", default="0.1,1,10,100")
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--out", default="out/v_tradeoff")
    args = ap.parse_args()

    vs = [float(v) for v in args.v.split(",")]
    rows = sweep_v(load_config(args.config), vs, [int(s) for s in args.seeds.split(",")])
    write_table(rows, Path(args.out) / "sweep_v.csv")
    print(f"{'V':>8} {'backlog':>10} {'utility':>10} {'quality':>9}")
    for v in vs:
        mine = [r for r in rows if r["V"] == v]
        b, u, q = (np.mean([r[k] for r in mine]) for k in ("mean_backlog", "utility", "mean_quality"))
        print(f"{v:>8g} {b:>10.2f} {u:>10.4f} {q:>9.4f}")


if __name__ == "__main__":
    main()
