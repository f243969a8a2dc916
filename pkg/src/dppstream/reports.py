"""CSV reports for one run or a policy comparison.

Every writer emits its header even when there are no rows, so downstream
readers never special-case an empty run. Floats are written with ``repr``
precision, which keeps reports byte-identical across reruns of a seed.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .sim import MetricsReport

SESSION_COLUMNS = ("session", "user", "start", "prebuffer_slots", "skipped_pct", "mean_ssim", "rebuf_frac",
                   "underrun_rate", "buffering_frac", "stalls", "skipped", "accounted", "complete",
                   "deferrals", "mobile")
USER_CDF_METRICS = ("skipped_pct", "mean_ssim", "rebuf_frac", "buffering_frac", "underrun_rate")
SESSION_CDF_METRICS = ("prebuffer_slots",)


def _write(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def empirical_cdf(values) -> list[tuple[float, float]]:
    """(value, fraction of samples <= value) at each distinct finite value."""
    x = np.sort(np.asarray([v for v in values if v is not None and not math.isnan(v)], dtype=float))
    if x.size == 0:
        return []
    uniq, counts = np.unique(x, return_counts=True)
    return list(zip(uniq.tolist(), (np.cumsum(counts) / x.size).tolist()))


def write_sessions(report: MetricsReport, out: Path) -> Path:
    rows = [[s.get(c, "") for c in SESSION_COLUMNS] for s in report.sessions]
    return _write(out / "sessions.csv", SESSION_COLUMNS, rows)


def write_users(report: MetricsReport, out: Path) -> Path:
    cols = ("user", "sessions", "requests", "mean_requested_quality") + USER_CDF_METRICS + ("stalls",)
    return _write(out / "users.csv", cols, [[u[c] for c in cols] for u in report.users])


def write_cdfs(report: MetricsReport, out: Path) -> list[Path]:
    paths = []
    for metric in USER_CDF_METRICS:
        vals = [u[metric] for u in report.users if u["sessions"] > 0]
        paths.append(_write(out / f"cdf_{metric}.csv", ("value", "cdf"), empirical_cdf(vals)))
    for metric in SESSION_CDF_METRICS:
        vals = [s[metric] for s in report.sessions]
        paths.append(_write(out / f"cdf_{metric}.csv", ("value", "cdf"), empirical_cdf(vals)))
    return paths


def write_timeseries(reports: dict[str, MetricsReport], out: Path) -> Path:
    """One ``total_backlog`` column per policy, aligned on the slot index."""
    names = list(reports)
    slots = sorted(set().union(*(r.slots.tolist() for r in reports.values()))) if names else []
    lookup = {n: dict(zip(r.slots.tolist(), r.total_backlog.tolist())) for n, r in reports.items()}
    rows = [[t] + [lookup[n].get(t, math.nan) for n in names] for t in slots]
    return _write(out / "timeseries.csv", ["slot"] + [f"total_backlog[{n}]" for n in names], rows)


def write_helper_trace(report: MetricsReport, out: Path) -> Path:
    cols = ("user", "session", "chunk", "helper", "request_slot", "arrival_slot")
    rows = sorted(([e[c] for c in cols] for e in report.helper_trace), key=lambda r: (r[0], r[1], r[2]))
    return _write(out / "helper_trace.csv", cols, rows)


def write_playback_traces(report: MetricsReport, out: Path) -> Path:
    rows = [[u, t, name, k] for u, events in sorted(report.playback_traces.items()) for t, name, k in events]
    return _write(out / "playback_events.csv", ("user", "slot", "event", "chunk"), rows)


def emit_reports(report: MetricsReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    paths = [write_sessions(report, out), write_users(report, out)]
    paths += write_cdfs(report, out)
    paths.append(write_timeseries({report.policy: report}, out))
    paths.append(write_helper_trace(report, out))
    paths.append(write_playback_traces(report, out))
    return paths


def summary_row(report: MetricsReport) -> dict:
    return {
        "policy": report.policy,
        "seed": report.seed,
        "mean_ssim": report.user_mean("mean_ssim"),
        "buffering_frac": report.user_mean("buffering_frac"),
        "rebuf_frac": report.user_mean("rebuf_frac"),
        "skipped_pct": report.user_mean("skipped_pct"),
        "underrun_rate": report.user_mean("underrun_rate"),
        "mean_backlog": report.mean_backlog,
        "utility": report.utility,
    }


def write_table(rows: list[dict], path) -> Path:
    path = Path(path)
    header = list(rows[0]) if rows else []
    return _write(path, header, [[r[c] for c in header] for r in rows])
