"""Client playback buffer: playable frontier, chunk skipping, delay-window
estimation and the adaptive (re)buffering start rule.

Chunk ids are 1-based request indices within a session; slots are absolute.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum


class Mode(str, Enum):
    PREBUFFERING = "prebuffering"
    PLAYING = "playing"
    REBUFFERING = "rebuffering"
    DONE = "done"


@dataclass
class DelayEstimator:
    delta: int = 10
    records: deque = field(default_factory=deque)  # (arrival slot, delay), arrival order

    def add(self, arrival: int, delay: int) -> None:
        self.records.append((arrival, delay))

    def window_max(self, t: int) -> int:
        lo = t - self.delta + 1
        while self.records and self.records[0][0] < lo:
            self.records.popleft()
        return max((w for a, w in self.records if a <= t), default=0)


def delay_window_max(estimator: DelayEstimator, t: int) -> int:
    return estimator.window_max(t)


@dataclass
class PlaybackBuffer:
    """Playback state of one streaming session.

    ``n_chunks`` is the session length; ``rho`` may be ``math.inf`` to
    disable skipping. ``session_start`` is the slot of the first request.
    """

    n_chunks: int
    rho: float = math.inf
    xi: float = 25.0
    delta: int = 10
    session_start: int = 1
    trace: bool = False

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.xi > 0:
            raise ValueError("xi must be positive")
        if self.delta < 1:
            raise ValueError("delta must be at least 1")
        self.estimator = DelayEstimator(self.delta)
        self.arrivals: dict[int, int] = {}
        self.request_times: dict[int, int] = {}
        self.quality: dict[int, float] = {}
        self.playable_at: dict[int, int] = {}
        self.skipped: set[int] = set()
        self.pending: set[int] = set()  # arrived chunks beyond the frontier
        self.frontier = 0
        self.psi = 0
        self.mode = Mode.PREBUFFERING
        self.consumed = 0
        self.first_start: int | None = None
        self.starts: list[int] = []
        self.stalls = 0
        self.duplicates = 0
        self.slots = {m: 0 for m in Mode}
        self.last_slot: int | None = None
        self.events: list[tuple[int, str, int]] = []
        self.psi_history: list[tuple[int, int]] = []

    # bookkeeping ---------------------------------------------------------
    def _event(self, t, name, k=0):
        if self.trace:
            self.events.append((t, name, k))

    def on_request(self, k: int, t: int, quality: float | None = None) -> None:
        self.request_times[k] = t
        if quality is not None:
            self.quality[k] = quality

    def on_chunk_delivered(self, k: int, t: int) -> None:
        if k in self.arrivals:
            self.duplicates += 1
            return
        self.arrivals[k] = t
        t_k = self.request_times.get(k, self.session_start + k - 1)
        self.estimator.add(t, t - t_k)
        if k > self.frontier:
            self.pending.add(k)
        self._event(t, "deliver", k)

    def playable_time(self, k: int) -> int:
        """P_k = max(A_1..A_k) for fully delivered prefixes."""
        return max(self.arrivals[j] for j in range(1, k + 1))

    # per-slot dynamics ----------------------------------------------------
    def _mark_playable(self, first, last, t):
        for j in range(first, last + 1):
            self.playable_at[j] = t
            self.pending.discard(j)
            self._event(t, "playable", j)

    def _run_from(self, k):
        while k + 1 in self.pending:
            k += 1
        return k

    def _advance_frontier(self, t: int) -> int:
        ks = self.frontier
        if not self.pending:
            return 0
        k_minus = min(self.pending)
        if k_minus == ks + 1:
            new = self._run_from(ks + 1)
            self._mark_playable(ks + 1, new, t)
            self.frontier = new
            return new - ks
        if len(self.pending) <= self.rho:
            return 0
        self.skipped.add(ks + 1)
        self._event(t, "skip", ks + 1)
        if k_minus == ks + 2:
            new = self._run_from(ks + 2)
            self._mark_playable(ks + 2, new, t)
            self.frontier = new
            return new - ks - 1
        self.frontier = ks + 1
        return 0

    def advance_slot(self, t: int) -> int:
        """Process the end of slot ``t``; returns the buffer increment."""
        if self.last_slot is not None and t <= self.last_slot:
            raise ValueError("slots must be strictly increasing")
        self.last_slot = t
        if self.mode is Mode.DONE:
            return 0
        self.slots[self.mode] += 1
        lam = self._advance_frontier(t)
        playing = self.mode is Mode.PLAYING
        if playing and self.psi > 0:
            self.consumed += 1
        self.psi = max(self.psi - int(playing), 0) + lam
        self.psi_history.append((t, self.psi))
        if playing and self.psi == 0:
            if self.frontier >= self.n_chunks:
                self.mode = Mode.DONE
                self._event(t, "done")
            else:
                self.stalls += 1
                self.mode = Mode.REBUFFERING
                self._event(t, "stall")
        elif self.mode in (Mode.PREBUFFERING, Mode.REBUFFERING):
            if not self.start_rule(t) and self.frontier >= self.n_chunks:
                # nothing left to wait for
                if self.psi >= 1:
                    self._start(t)
                else:
                    self.mode = Mode.DONE
                    self._event(t, "done")
        return lam

    def _start(self, t):
        self.mode = Mode.PLAYING
        self.starts.append(t)
        if self.first_start is None:
            self.first_start = t
        self._event(t, "start")

    def start_rule(self, t: int) -> bool:
        """Start (or restart) playback once the buffer reaches xi * E_t."""
        if self.mode not in (Mode.PREBUFFERING, Mode.REBUFFERING):
            return False
        e_t = self.estimator.window_max(t)
        if self.psi >= 1 and self.psi >= self.xi * e_t:
            self._start(t)
            return True
        return False

    @property
    def done(self) -> bool:
        return self.mode is Mode.DONE

    # metrics --------------------------------------------------------------
    @property
    def prebuffer_slots(self) -> int | None:
        if self.first_start is None:
            return None
        return self.first_start - self.session_start + 1

    def metrics(self) -> dict:
        accounted = self.frontier
        played = [k for k in self.playable_at if k not in self.skipped]
        quals = [self.quality[k] for k in played if k in self.quality]
        t_rel = self.prebuffer_slots
        underruns = due = 0
        if t_rel is not None and self.last_slot is not None:
            for k, t_k in self.request_times.items():
                deadline = t_k + t_rel
                if deadline > self.last_slot:
                    continue
                due += 1
                p = self.playable_at.get(k)
                if k in self.skipped or p is None or p > deadline:
                    underruns += 1
        after_start = self.slots[Mode.PLAYING] + self.slots[Mode.REBUFFERING]
        buffering = self.slots[Mode.PREBUFFERING] + self.slots[Mode.REBUFFERING]
        total = sum(self.slots.values())
        return {
            "chunks": self.n_chunks,
            "complete": self.done,
            "skipped": len(self.skipped),
            "accounted": accounted,
            "skipped_pct": 100.0 * len(self.skipped) / accounted if accounted else 0.0,
            "played": len(quals),
            "ssim_sum": sum(quals),
            "mean_ssim": sum(quals) / len(quals) if quals else math.nan,
            "prebuffer_slots": t_rel if t_rel is not None else math.nan,
            "rebuffer_slots": self.slots[Mode.REBUFFERING],
            "after_start_slots": after_start,
            "rebuf_frac": self.slots[Mode.REBUFFERING] / after_start if after_start else 0.0,
            "buffering_slots": buffering,
            "session_slots": total,
            "buffering_frac": buffering / total if total else 0.0,
            "stalls": self.stalls,
            "underruns": underruns,
            "due": due,
            "underrun_rate": underruns / due if due else math.nan,
            "duplicates": self.duplicates,
        }
