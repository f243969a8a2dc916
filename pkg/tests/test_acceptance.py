"""Exit criteria for the package, one test (and one PASS/FAIL line) each.

Run with ``pytest tests/test_acceptance.py -v -s`` or ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np
import pytest

from dppstream.config import load_config
from dppstream.netmodel import exp_integral_e1
from dppstream.policy import UserControlState, congestion_control_step, gamma_update
from dppstream.reports import emit_reports
from dppstream.scheduler import IDLE, max_weight_bipartite_matching
from dppstream.sim import run, sweep_v
from dppstream.video import QualityBounds

from oracles import brute_force_dpp, brute_force_matching, e1_quadrature, gamma_objective, grid_gamma, replay_playable

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SEEDS = (0, 1, 2)
DPP = ("dpp-macro", "dpp-unique")


@pytest.fixture
def verdict(capsys):
    def emit(name: str, ok: bool, detail: str = ""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"
    return emit


def test_c1_congestion_control_equals_brute_force(verdict):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        n_h, n_m = rng.integers(1, 6), rng.integers(1, 9)
        ids = rng.choice(20, size=n_h, replace=False)
        # integer queues and sizes keep every score exact, so ties are real ties
        queues = {int(h): float(q) for h, q in zip(ids, rng.integers(0, 5, size=n_h) * 10**6)}
        sizes = np.sort(rng.choice(np.arange(1, 50), size=n_m, replace=False) * 10**5).astype(float)
        quals = np.sort(rng.integers(50, 100, size=n_m) / 100)
        theta = float(rng.integers(0, 4)) * 10.0 ** rng.integers(9, 13)
        state = UserControlState(1e13, 1.0, QualityBounds(0.5, 1.0), theta)
        act = congestion_control_step(state, queues, sizes, quals)
        (h, m), _ = brute_force_dpp(queues, theta, sizes, quals)
        mismatches += (act.helper, act.mode) != (h, m)
    dt = time.perf_counter() - t0
    verdict("C1 DPP step vs brute force", mismatches == 0 and dt < 10,
            f"{mismatches} mismatches in 1000 instances, {dt:.2f}s")


def test_c2_matching_equals_enumeration(verdict):
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(1000):
        h, u = rng.integers(1, 7, size=2)
        w = rng.integers(0, 30, size=(h, u)).astype(float) * (rng.random((h, u)) < 0.8)
        a, total = max_weight_bipartite_matching(w)
        users = [x for x in a if x != IDLE]
        feasible = len(users) == len(set(users)) and len(a) == h
        bad += not (feasible and total == brute_force_matching(w))
    dt = time.perf_counter() - t0
    verdict("C2 matching vs enumeration", bad == 0 and dt < 30, f"{bad} wrong of 1000, {dt:.2f}s")


def test_c3_gamma_closed_form(verdict):
    rng = np.random.default_rng(303)
    worst = 0.0
    for alpha in (0.0, 0.5, 1.0, 2.0):
        for _ in range(200):
            v = 10 ** rng.uniform(-2, 3)
            theta = 10 ** rng.uniform(-3, 3) if rng.random() > 0.05 else 0.0
            lo = rng.uniform(0.05, 0.9)
            hi = rng.uniform(lo + 1e-3, 1.0)
            g = gamma_update(theta, v, alpha, QualityBounds(lo, hi))
            best = grid_gamma(theta, v, alpha, lo, hi)
            gap = (best - gamma_objective(g, theta, v, alpha)) / max(1.0, abs(best))
            worst = max(worst, gap)
    verdict("C3 gamma vs grid search", worst <= 1e-9, f"worst relative objective gap {worst:.3e}")


def test_c4_e1_accuracy(verdict):
    xs = np.logspace(-3, math.log10(50), 100)
    err = max(abs(exp_integral_e1(x) - e1_quadrature(x)) for x in xs)
    verdict("C4 E1 vs quadrature", err <= 1e-10, f"max abs error {err:.2e}")


def _table_replay(rho):
    from test_playback import TABLE_ARRIVALS, replay
    return TABLE_ARRIVALS, replay(TABLE_ARRIVALS, rho=rho)


def test_c5_table_replay(verdict):
    arrivals, (buf, rows) = _table_replay(math.inf)
    slots = [r["t"] for r in rows]
    at = {r["t"]: r for r in rows}
    traj_ok = [r["frontier"] for r in rows] == replay_playable(arrivals, slots)
    jump_ok = buf.playable_time(4) == 11 and at[11]["lam"] == 5 and not buf.skipped
    _, (buf1, rows1) = _table_replay(1)
    at1 = {r["t"]: r for r in rows1}
    skip_ok = at1[8]["frontier"] == 6 and 4 in buf1.skipped and at1[8]["lam"] == 2
    verdict("C5 playback trace replay", traj_ok and jump_ok and skip_ok,
            f"trajectory={traj_ok} P4=11&jump5={jump_ok} rho1-skip4-at8={skip_ok}")


def test_c6_v_tradeoff(verdict):
    cfg = load_config(CONFIGS / "tradeoff.ini")
    vs = [0.1, 1.0, 10.0, 100.0]
    t0 = time.perf_counter()
    rows = sweep_v(cfg, vs, SEEDS)
    dt = time.perf_counter() - t0
    backlog = np.array([[r["mean_backlog"] for r in rows if r["V"] == v] for v in vs])
    util = np.array([[r["utility"] for r in rows if r["V"] == v] for v in vs])
    mean_b = backlog.mean(axis=1)
    strictly = bool(np.all(np.diff(mean_b) > 0))
    per_seed = bool(np.all(backlog[1:] >= 0.95 * backlog[:-1]))
    u_top, u_next = util[-1].mean(), util[-2].mean()
    util_ok = u_top >= u_next - 0.01 * abs(u_next)
    verdict("C6 backlog/utility tradeoff in V", strictly and per_seed and util_ok and dt < 120,
            f"mean backlog {np.round(mean_b, 2).tolist()}, utility {np.round(util.mean(axis=1), 4).tolist()}, "
            f"{dt:.1f}s")


@pytest.fixture(scope="module")
def exp2():
    cfg = load_config(CONFIGS / "exp2.ini")
    t0 = time.perf_counter()
    reps = {(p, s): run(cfg.with_policy(variant=p).with_run(seed=s))
            for p in (*DPP, "max-sinr") for s in SEEDS}
    return reps, time.perf_counter() - t0


def _mean(reps, policy, key):
    return float(np.mean([reps[(policy, s)].user_mean(key) for s in SEEDS]))


def test_c7a_ssim_margin(verdict, exp2):
    reps, dt = exp2
    base = _mean(reps, "max-sinr", "mean_ssim")
    margins = {p: _mean(reps, p, "mean_ssim") - base for p in DPP}
    verdict("C7a SSIM margin over max-SINR", all(m >= 0.02 for m in margins.values()) and dt < 300,
            ", ".join(f"{p} +{m:.4f}" for p, m in margins.items()) + f" (baseline {base:.4f}, {dt:.1f}s)")


def test_c7b_buffering_fraction(verdict, exp2):
    reps, _ = exp2
    base = _mean(reps, "max-sinr", "buffering_frac")
    vals = {p: _mean(reps, p, "buffering_frac") for p in DPP}
    verdict("C7b buffering fraction below max-SINR", all(v < base for v in vals.values()),
            ", ".join(f"{p} {v:.4f}" for p, v in vals.items()) + f" vs baseline {base:.4f}")


def test_c7c_variants_close(verdict, exp2):
    reps, _ = exp2
    diff = abs(_mean(reps, "dpp-macro", "mean_ssim") - _mean(reps, "dpp-unique", "mean_ssim"))
    verdict("C7c macro vs unique SSIM", diff <= 0.02, f"|difference| {diff:.4f}")


def test_c8_smooth_streaming(verdict, exp2):
    reps, _ = exp2
    cfg = load_config(CONFIGS / "exp2.ini")
    params_ok = (cfg.policy.rho, cfg.policy.xi, cfg.policy.delta) == (50, 25, 10)
    fracs = {}
    for p in DPP:
        for s in SEEDS:
            ur = np.array([u["underrun_rate"] for u in reps[(p, s)].users])
            fracs[(p, s)] = float(np.mean(ur <= 0.05))
    worst = min(fracs.values())
    verdict("C8 per-user underrun <= 5% for >= 90% of users", params_ok and worst >= 0.9,
            f"worst run {worst:.2f}; " + ", ".join(f"{p}/s{s} {f:.2f}" for (p, s), f in fracs.items()))


def test_c9_invariant_suites(verdict):
    import test_netmodel as nm
    import test_playback as pb
    import test_policy as po
    import test_scheduler as sc
    import test_sim as si
    import test_video as vi

    checks = {
        "pathloss monotone": nm.TestPathloss().test_monotone_beyond_clamp,
        "peak rate bounds": nm.TestPeakRate().test_bounds,
        "rate table relabeling": nm.TestRateTable().test_relabeling_equivariance,
        "rate table invariants": nm.TestRateTable().test_invariants,
        "profile ladders": vi.test_synth_ladders_monotone,
        "chunk_at periodic": vi.test_chunk_at_periodic,
        "DPP term optimal": po.test_step_minimizes_first_term,
        "helper argmin scale": po.test_helper_choice_scale_invariant,
        "quality argmin scale": po.test_quality_choice_scale_invariant,
        "gamma optimal": po.TestGamma().test_grid_optimality,
        "theta non-negative": po.TestVirtualQueue().test_non_negative,
        "matching optimal": sc.TestMatching().test_optimal_and_feasible,
        "LP integrality": sc.TestMatching().test_lp_relaxation_is_tight,
        "matching scale": sc.TestMatching().test_scaling_keeps_value,
        "macro LP vertex": sc.TestMacroDiversity().test_best_vertex_of_helper_lp,
        "served set is matching": sc.TestUniqueAssociation().test_served_pairs_form_matching,
        "queue conservation": sc.TestQueueUpdate().test_conservation,
        "buffer invariants / one skip": pb.test_buffer_invariants,
        "psi recursion": pb.test_psi_matches_replayed_recursion,
        "CDF monotone": si.TestReports().test_cdf_monotone,
    }
    failed = []
    for name, fn in checks.items():
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - collect every failure
            failed.append(f"{name}: {type(exc).__name__}")
    import tempfile
    with tempfile.TemporaryDirectory() as d:
        for name, fn in {"bit conservation": lambda: si.TestEngine().test_bit_conservation_and_single_delivery(),
                         "determinism": lambda: si.TestEngine().test_deterministic(Path(d)),
                         "variant isolation": lambda: si.TestEngine().test_variant_isolation()}.items():
            try:
                fn()
            except Exception as exc:  # noqa: BLE001
                failed.append(f"{name}: {type(exc).__name__}")
    verdict("C9 invariant suites", not failed, f"{len(checks) + 3 - len(failed)}/{len(checks) + 3} pass "
            + ("" if not failed else "; failed: " + ", ".join(failed)))


def test_scaled_experiment_one(verdict, tmp_path):
    cfg = load_config(CONFIGS / "exp1_scaled.ini")
    t0 = time.perf_counter()
    rep = run(cfg)
    files = emit_reports(rep, tmp_path)
    dt = time.perf_counter() - t0
    mobile = rep.mobile_users[0]
    helpers = [e["helper"] for e in rep.helper_trace if e["user"] == mobile]
    distinct = len(set(helpers))
    shape_ok = rep.n_helpers == 16 and rep.n_users == 41 and len(rep.mobile_users) == 1
    all_files = all(p.exists() for p in files)
    verdict("Scaled experiment 1", shape_ok and all_files and distinct >= 3,
            f"{len(files)} report files, mobile user served by {distinct} distinct helpers "
            f"over {len(helpers)} chunks, {dt:.1f}s")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
