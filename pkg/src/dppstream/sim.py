"""Slot-by-slot simulation of the helper network.

Each slot runs, in order: mobility and link/rate update, session arrivals,
congestion control for every requesting user, transmission scheduling,
queue update with FIFO chunk-completion detection, playback advance and
metric sampling.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig
from .netmodel import LinkState, Topology, advance_mobility, compute_rate_table
from .playback import PlaybackBuffer
from .policy import UserControlState, alpha_fair_utility, congestion_control_step
from .scheduler import SCHEDULERS, queue_update
from .video import VideoProfile, chunk_at, load_profile, quality_bounds, synth_profile

log = logging.getLogger(__name__)

_EPS_BITS = 1e-6
STREAMS = ("placement", "channel", "sessions", "profiles")


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent named generators so that one consumer never shifts another."""
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAMS, children)}


@dataclass
class Session:
    sid: int
    user: int
    start: int
    offset: int
    length: int
    buffer: PlaybackBuffer
    control: UserControlState
    next_k: int = 1
    outstanding: int = 0  # requested chunks not yet fully delivered
    helpers: dict[int, int] = field(default_factory=dict)  # chunk -> serving helper
    deferrals: int = 0

    @property
    def requesting(self) -> bool:
        return self.next_k <= self.length

    @property
    def finished(self) -> bool:
        return not self.requesting and self.outstanding == 0 and self.buffer.done


@dataclass
class MetricsReport:
    policy: str
    seed: int
    n_helpers: int
    n_users: int
    slots: np.ndarray
    total_backlog: np.ndarray  # sum Q (in policy queue units) + sum Theta
    queue_bits: np.ndarray
    theta_sum: np.ndarray
    sessions: list[dict]
    users: list[dict]
    helper_trace: list[dict]
    playback_traces: dict[int, list] = field(default_factory=dict)
    mobile_users: list[int] = field(default_factory=list)
    alpha: float = 1.0

    @property
    def mean_backlog(self) -> float:
        return float(self.total_backlog.mean()) if len(self.total_backlog) else 0.0

    @property
    def utility(self) -> float:
        """Sum over users of phi(mean requested quality)."""
        vals = [u["mean_requested_quality"] for u in self.users if u["requests"] > 0]
        return float(np.sum(alpha_fair_utility(np.array(vals), self.alpha))) if vals else 0.0

    def user_mean(self, key: str) -> float:
        vals = [u[key] for u in self.users if u["sessions"] > 0 and not math.isnan(u[key])]
        return float(np.mean(vals)) if vals else math.nan


def make_profile(cfg: SimConfig, rng: np.random.Generator) -> VideoProfile:
    if cfg.video.profile:
        return load_profile(cfg.video.profile)
    return synth_profile(cfg.video.segments, rng)


class Simulator:
    def __init__(self, cfg: SimConfig, profile: VideoProfile | None = None, topology: Topology | None = None):
        self.cfg = cfg.validate()
        self.rng = rng_streams(cfg.run.seed)
        self.topology = topology if topology is not None else cfg.topology.build(self.rng["placement"])
        self.profile = profile if profile is not None else make_profile(cfg, self.rng["profiles"])
        self.bounds = quality_bounds(self.profile)
        h, u = self.topology.n_helpers, self.topology.n_users
        self.q = np.zeros((h, u))
        self.fifo: dict[tuple[int, int], deque] = {}
        self.links = LinkState(self.rng["channel"], cfg.run.f0_ghz, cfg.run.redraw_m)
        self.mobile = set(self.topology.mobile_users())
        self.active: dict[int, Session] = {}
        self.sessions: list[Session] = []
        self.started_users: set[int] = set()
        self.rates = None
        self._positions = None
        self.schedule = SCHEDULERS["unique" if cfg.policy.variant == "dpp-unique" else "macro"]
        self.req_quality_sum = np.zeros(u)
        self.req_count = np.zeros(u, dtype=int)
        self.trace: list[dict] = []
        self.series: list[tuple[int, float, float, float]] = []

    # environment -----------------------------------------------------------
    def _update_channel(self, t: int) -> None:
        if self._positions is not None and not self.mobile:
            return
        pos = advance_mobility(self.topology, t)
        if self._positions is not None and np.array_equal(pos, self._positions):
            return
        self._positions = pos
        real = self.links.update(self.topology.helper_positions, pos)
        run = self.cfg.run
        self.rates = compute_rate_table(real.gain, run.power, run.n_symbols, run.edge_threshold_bits)

    def _start_session(self, user: int, t: int, offset: int) -> None:
        p, s = self.cfg.policy, self.cfg.sessions
        buf = PlaybackBuffer(s.session_length, p.rho, p.xi, p.delta, session_start=t,
                             trace=self.cfg.run.trace_playback or user in self.mobile)
        ctrl = UserControlState(p.v_param, p.alpha, self.bounds)
        sess = Session(len(self.sessions), user, t, offset, s.session_length, buf, ctrl)
        self.sessions.append(sess)
        self.active[user] = sess
        self.started_users.add(user)

    def _arrivals(self, t: int) -> None:
        s = self.cfg.sessions
        n_users = self.topology.n_users
        # drawn for every user every slot so consumption never depends on policy
        coin = self.rng["sessions"].random(n_users)
        offsets = self.rng["sessions"].integers(0, self.profile.length, size=n_users)
        for u in range(n_users):
            if u in self.active:
                continue
            if u in self.mobile:
                if t == s.mobile_start and u not in self.started_users:
                    self._start_session(u, t, int(offsets[u]))
                continue
            if s.arrival == "simultaneous":
                if t == 0 and u not in self.started_users:
                    self._start_session(u, t, int(offsets[u]))
            elif coin[u] < s.p_start:
                self._start_session(u, t, int(offsets[u]))

    # policy ----------------------------------------------------------------
    def _congestion_control(self, t: int) -> list[tuple[int, int, int, int, float]]:
        variant = self.cfg.policy.variant
        bit_unit = self.cfg.policy.bit_unit
        rates = self.rates
        new = []
        for u, sess in self.active.items():
            if not sess.requesting:
                continue
            nbrs = np.flatnonzero(rates.edges[:, u])
            if len(nbrs) == 0:
                # deferred: same chunk index next slot, Theta frozen
                sess.deferrals += 1
                continue
            sizes, quals = chunk_at(self.profile, sess.next_k, sess.offset)
            queues = {int(h): float(self.q[h, u]) for h in nbrs}
            forced = None
            if variant == "max-sinr":
                c = rates.peak_rate[nbrs, u]
                forced = int(nbrs[int(np.argmax(c))])
            act = congestion_control_step(sess.control, queues, sizes, quals, bit_unit, helper=forced)
            k = sess.next_k
            bits = act.request_bits[act.helper]
            sess.buffer.on_request(k, t, act.requested_quality)
            sess.helpers[k] = act.helper
            sess.next_k += 1
            sess.outstanding += 1
            self.req_quality_sum[u] += act.requested_quality
            self.req_count[u] += 1
            new.append((act.helper, u, sess.sid, k, bits))
        return new

    def _drain(self, h: int, u: int, amount: float, t: int) -> None:
        queue = self.fifo[(h, u)]
        while queue and amount > _EPS_BITS:
            head = queue[0]
            if head[2] <= amount + _EPS_BITS:
                amount -= head[2]
                queue.popleft()
                self._complete(head[0], head[1], h, t)
            else:
                head[2] -= amount
                amount = 0.0
        self.q[h, u] = sum(item[2] for item in queue)

    def _complete(self, sid: int, k: int, h: int, t: int) -> None:
        sess = self.sessions[sid]
        sess.outstanding -= 1
        sess.buffer.on_chunk_delivered(k, t)
        if sess.user in self.mobile:
            self.trace.append({"user": sess.user, "session": sid, "chunk": k, "helper": h,
                               "request_slot": sess.buffer.request_times[k], "arrival_slot": t})

    def step(self, t: int) -> None:
        self._update_channel(t)
        self._arrivals(t)
        requests = self._congestion_control(t)
        arrivals = np.zeros_like(self.q)
        for h, u, _, _, bits in requests:
            arrivals[h, u] += bits
        rates = self.rates
        schedulable = rates.edges | (self.q > 0)
        decision = self.schedule(self.q, rates.peak_rate, schedulable, rates.n_symbols)
        q_next, delivered = queue_update(self.q, decision.service_bits, arrivals)
        self.q = q_next - arrivals
        for h, u in zip(*np.nonzero(delivered)):
            self._drain(int(h), int(u), float(delivered[h, u]), t)
        for h, u, sid, k, bits in requests:
            self.fifo.setdefault((h, u), deque()).append([sid, k, float(bits)])
            self.q[h, u] += bits
        for u in list(self.active):
            sess = self.active[u]
            sess.buffer.advance_slot(t)
            if sess.finished:
                del self.active[u]
        theta = sum(s.control.theta for s in self.active.values())
        qsum = float(self.q.sum())
        self.series.append((t, qsum / self.cfg.policy.bit_unit + theta, qsum, theta))

    def _all_done(self, t: int) -> bool:
        s = self.cfg.sessions
        if s.arrival != "simultaneous" or self.active:
            return False
        return not self.mobile or t >= s.mobile_start

    def run(self) -> MetricsReport:
        for t in range(self.cfg.run.horizon):
            self.step(t)
            if self.cfg.run.stop_when_done and self._all_done(t):
                log.debug("all sessions finished at slot %d", t)
                break
        return self.report()

    def report(self) -> MetricsReport:
        sessions = []
        for s in self.sessions:
            m = s.buffer.metrics()
            sessions.append({"session": s.sid, "user": s.user, "start": s.start, "offset": s.offset,
                             "mobile": s.user in self.mobile, "deferrals": s.deferrals, **m})
        users = []
        for u in range(self.topology.n_users):
            mine = [m for m in sessions if m["user"] == u]
            users.append(_aggregate_user(u, mine, self.req_quality_sum[u], self.req_count[u]))
        ser = np.array(self.series) if self.series else np.zeros((0, 4))
        traces = {s.user: s.buffer.events for s in self.sessions if s.buffer.trace}
        return MetricsReport(
            policy=self.cfg.policy.variant, seed=self.cfg.run.seed,
            n_helpers=self.topology.n_helpers, n_users=self.topology.n_users,
            slots=ser[:, 0].astype(int), total_backlog=ser[:, 1], queue_bits=ser[:, 2], theta_sum=ser[:, 3],
            sessions=sessions, users=users, helper_trace=self.trace, playback_traces=traces,
            mobile_users=sorted(self.mobile), alpha=self.cfg.policy.alpha,
        )


def _ratio(num, den):
    return num / den if den else math.nan


def _aggregate_user(u, mine, qsum, qcount) -> dict:
    def tot(key):
        return sum(m[key] for m in mine)

    return {
        "user": u,
        "sessions": len(mine),
        "requests": int(qcount),
        "mean_requested_quality": qsum / qcount if qcount else math.nan,
        "skipped_pct": 100.0 * _ratio(tot("skipped"), tot("accounted")) if mine else math.nan,
        "mean_ssim": _ratio(tot("ssim_sum"), tot("played")) if mine else math.nan,
        "rebuf_frac": _ratio(tot("rebuffer_slots"), tot("after_start_slots")) if mine else math.nan,
        "buffering_frac": _ratio(tot("buffering_slots"), tot("session_slots")) if mine else math.nan,
        "underrun_rate": _ratio(tot("underruns"), tot("due")) if mine else math.nan,
        "stalls": tot("stalls") if mine else 0,
    }


def run(cfg: SimConfig, profile: VideoProfile | None = None) -> MetricsReport:
    return Simulator(cfg, profile).run()


def sweep_v(cfg: SimConfig, v_list, seeds=None) -> list[dict]:
    """Time-averaged total backlog and network utility per (V, seed)."""
    seeds = [cfg.run.seed] if seeds is None else list(seeds)
    rows = []
    for v in v_list:
        for seed in seeds:
            rep = run(cfg.with_policy(v_param=float(v)).with_run(seed=seed))
            rows.append({"V": float(v), "seed": seed, "mean_backlog": rep.mean_backlog, "utility": rep.utility,
                         "mean_quality": float(np.nanmean([x["mean_requested_quality"] for x in rep.users]))})
    return rows


def compare(cfg: SimConfig, policies) -> dict[str, MetricsReport]:
    return {p: run(cfg.with_policy(variant=p)) for p in policies}
