import math

import pytest
from hypothesis import given, strategies as st

from dppstream.playback import DelayEstimator, Mode, PlaybackBuffer, delay_window_max

from oracles import replay_playable

# arrival slot of chunks 1..13, each requested at slot k
TABLE_ARRIVALS = dict(enumerate((3, 4, 5, 11, 6, 8, 9, 10, 12, 13, 16, 15, 14), start=1))


def replay(arrivals, n=None, rho=math.inf, xi=25.0, delta=10, horizon=None, request=None):
    n = n or len(arrivals)
    buf = PlaybackBuffer(n, rho, xi, delta, session_start=1, trace=True)
    request = request or {k: k for k in arrivals}
    horizon = horizon or max(arrivals.values()) + n + 5
    rows = []
    for t in range(1, horizon + 1):
        for k, r in request.items():
            if r == t:
                buf.on_request(k, t, quality=0.9)
        for k in sorted(k for k, a in arrivals.items() if a == t):
            buf.on_chunk_delivered(k, t)
        skipped_before = len(buf.skipped)
        lam = buf.advance_slot(t)
        rows.append({"t": t, "frontier": buf.frontier, "lam": lam, "psi": buf.psi, "mode": buf.mode,
                     "new_skips": len(buf.skipped) - skipped_before})
    return buf, rows


class TestTableTrace:
    def test_in_order_prefix(self):
        buf, rows = replay(TABLE_ARRIVALS)
        assert [r["frontier"] for r in rows[2:5]] == [1, 2, 3]
        assert buf.playable_time(3) == 5

    def test_no_skip_frontier_matches_oracle(self):
        buf, rows = replay(TABLE_ARRIVALS)
        slots = [r["t"] for r in rows]
        assert [r["frontier"] for r in rows] == replay_playable(TABLE_ARRIVALS, slots)
        assert not buf.skipped

    def test_jump_of_five_at_eleven(self):
        buf, rows = replay(TABLE_ARRIVALS)
        at = {r["t"]: r for r in rows}
        assert buf.playable_time(4) == 11
        assert at[11]["lam"] == 5 and at[11]["frontier"] == 8
        assert all(buf.playable_at[k] == 11 for k in range(4, 9))
        assert at[16]["frontier"] == 13

    def test_skip_threshold_one(self):
        buf, rows = replay(TABLE_ARRIVALS, rho=1)
        at = {r["t"]: r for r in rows}
        assert at[7]["frontier"] == 3
        assert at[8]["frontier"] == 6 and at[8]["lam"] == 2
        assert 4 in buf.skipped
        assert min(buf.skipped) == 4


class TestSkipCases:
    def test_case_d_skips_one_without_jump(self):
        # frontier 1, chunks 4 and 5 present, chunks 2 and 3 missing
        buf, rows = replay({1: 1, 4: 2, 5: 2, 3: 4}, n=5, rho=1, horizon=4)
        at = {r["t"]: r for r in rows}
        assert at[2]["frontier"] == 2 and at[2]["lam"] == 0 and buf.skipped >= {2}
        # next slot k- = k* + 2, so chunk 3 is skipped and the run 4..5 becomes playable
        assert at[3]["frontier"] == 5 and at[3]["new_skips"] == 1 and at[3]["lam"] == 2
        # the late copy of chunk 3 is behind the frontier and changes nothing
        assert at[4]["frontier"] == 5 and at[4]["lam"] == 0

    def test_wait_below_threshold(self):
        buf, rows = replay({1: 1, 3: 2, 2: 5}, n=3, rho=2, horizon=5)
        at = {r["t"]: r for r in rows}
        assert at[2]["frontier"] == 1 and at[2]["lam"] == 0
        assert at[5]["frontier"] == 3 and not buf.skipped


class TestDelayWindow:
    def test_max(self):
        est = DelayEstimator(10)
        for a, w in ((3, 2), (4, 5), (5, 3)):
            est.add(a, w)
        assert delay_window_max(est, 5) == 5

    def test_empty(self):
        assert DelayEstimator(10).window_max(7) == 0

    @pytest.mark.parametrize("t, expected", [(14, 9), (15, 1)])
    def test_boundary_excluded(self, t, expected):
        est = DelayEstimator(10)
        est.add(5, 9)
        est.add(6, 1)
        assert est.window_max(t) == expected


class TestStartRule:
    def make(self, psi, e, xi=25.0):
        buf = PlaybackBuffer(1000, xi=xi)
        if e:
            buf.estimator.add(1, e)
        buf.psi = psi
        return buf

    def test_threshold_met(self):
        assert self.make(50, 2).start_rule(1)

    def test_empty_window_needs_one_chunk(self):
        assert self.make(1, 0).start_rule(1)
        assert not self.make(0, 0).start_rule(1)

    def test_just_below(self):
        assert not self.make(124, 5).start_rule(1)
        assert self.make(125, 5).start_rule(1)

    def test_not_in_playing_mode(self):
        buf = self.make(50, 0)
        buf.mode = Mode.PLAYING
        assert not buf.start_rule(1)


class TestMetrics:
    def test_table_session(self):
        buf, _ = replay(TABLE_ARRIVALS)
        m = buf.metrics()
        assert m["skipped_pct"] == 0.0
        assert m["complete"] and buf.done
        assert m["played"] == 13

    def test_instant_delivery(self):
        arrivals = {k: k for k in range(1, 21)}
        buf, _ = replay(arrivals)
        m = buf.metrics()
        assert m["prebuffer_slots"] == 1 and buf.first_start == 1
        assert m["rebuf_frac"] == 0.0 and m["stalls"] == 0
        assert m["underrun_rate"] == 0.0

    def test_one_stall(self):
        arrivals = {1: 1, 2: 2, 3: 3, **{k: 8 for k in range(4, 9)}, 9: 9, 10: 10}
        buf, rows = replay(arrivals, xi=1.0)
        m = buf.metrics()
        assert m["stalls"] == 1
        assert m["rebuf_frac"] > 0
        assert {r["t"]: r["mode"] for r in rows}[4] is Mode.REBUFFERING

    def test_playback_starts_the_slot_after_start(self):
        buf, rows = replay({1: 1, 2: 1, 3: 1}, n=3, request={1: 1, 2: 1, 3: 1})
        at = {r["t"]: r for r in rows}
        assert buf.first_start == 1 and at[1]["psi"] == 3
        assert at[2]["psi"] == 2

    def test_duplicates_counted(self):
        buf = PlaybackBuffer(3)
        buf.on_request(1, 1)
        buf.on_chunk_delivered(1, 2)
        buf.on_chunk_delivered(1, 3)
        assert buf.duplicates == 1 and buf.arrivals[1] == 2

    def test_slots_must_increase(self):
        buf = PlaybackBuffer(3)
        buf.advance_slot(2)
        with pytest.raises(ValueError):
            buf.advance_slot(2)

    @pytest.mark.parametrize("kw", [{"rho": 0}, {"xi": 0}, {"delta": 0}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            PlaybackBuffer(3, **kw)


@st.composite
def delivery_patterns(draw):
    n = draw(st.integers(1, 25))
    delays = draw(st.lists(st.integers(0, 12), min_size=n, max_size=n))
    return {k: k + d for k, d in zip(range(1, n + 1), delays)}


@given(delivery_patterns(), st.sampled_from([1, 2, 3, 5, math.inf]), st.sampled_from([0.5, 1.0, 25.0]))
def test_buffer_invariants(arrivals, rho, xi):
    buf, rows = replay(arrivals, rho=rho, xi=xi, delta=4)
    prev = 0
    consumed_prev = 0
    for r in rows:
        assert r["psi"] >= 0
        assert r["frontier"] >= prev
        assert r["new_skips"] <= 1
        prev = r["frontier"]
    assert buf.consumed + buf.psi + len(buf.skipped) == buf.frontier
    assert consumed_prev <= buf.consumed
    for k, p in buf.playable_at.items():
        assert p >= buf.arrivals[k]
    if rho == math.inf:
        assert not buf.skipped
    assert buf.skipped.isdisjoint(buf.playable_at)


@given(delivery_patterns(), st.sampled_from([1, 3, math.inf]))
def test_psi_matches_replayed_recursion(arrivals, rho):
    buf, rows = replay(arrivals, rho=rho, xi=1.0, delta=4)
    # replay the recursion from the logged increments and playing indicator
    playing = False
    psi = 0
    events = {}
    for t, name, _ in buf.events:
        events.setdefault(t, []).append(name)
    for r in rows:
        if r["mode"] is Mode.DONE and "done" not in events.get(r["t"], []):
            break
        psi = max(psi - int(playing), 0) + r["lam"]
        assert psi == r["psi"]
        names = events.get(r["t"], [])
        if "start" in names:
            playing = True
        if "stall" in names or "done" in names:
            playing = False
