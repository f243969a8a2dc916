"""Simulation configuration and its INI-style file format.

Sections are [topology], [video], [policy], [sessions] and [run], each with
``key = value`` lines. Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .netmodel import (DEFAULT_EDGE_THRESHOLD_BITS, DEFAULT_POWER, DEFAULT_SYMBOLS_PER_SLOT, TopologySpec,
                       read_topology)
from .video import Segment

POLICIES = ("dpp-macro", "dpp-unique", "max-sinr")
ARRIVALS = ("geometric", "simultaneous")


class ConfigError(ValueError):
    pass


@dataclass
class VideoConfig:
    profile: str | None = None
    segments: list[Segment] = field(default_factory=lambda: [
        Segment(200, 8, (2e5, 3e6), (0.75, 0.99)),
        Segment(400, 4, (2e5, 3e6), (0.75, 0.99)),
        Segment(200, 8, (2e5, 3e6), (0.75, 0.99)),
    ])


@dataclass
class PolicyConfig:
    variant: str = "dpp-macro"
    v_param: float = 1e13
    alpha: float = 1.0
    rho: float = 50.0
    xi: float = 25.0
    delta: int = 10
    # bits per queue unit inside the quality score
    bit_unit: float = 1.0


@dataclass
class SessionConfig:
    session_length: int = 1000
    arrival: str = "geometric"
    p_start: float = 0.005
    mobile_start: int = 0


@dataclass
class RunConfig:
    horizon: int = 3000
    seed: int = 0
    n_symbols: float = DEFAULT_SYMBOLS_PER_SLOT
    edge_threshold_bits: float = DEFAULT_EDGE_THRESHOLD_BITS
    power: float = DEFAULT_POWER
    f0_ghz: float = 5.0
    redraw_m: float = 1.0
    stop_when_done: bool = True
    trace_playback: bool = False


@dataclass
class SimConfig:
    topology: TopologySpec = field(default_factory=TopologySpec)
    video: VideoConfig = field(default_factory=VideoConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    sessions: SessionConfig = field(default_factory=SessionConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def validate(self) -> "SimConfig":
        p = self.policy
        if p.variant not in POLICIES:
            raise ConfigError(f"unknown policy variant {p.variant!r}; expected one of {POLICIES}")
        if not p.v_param > 0:
            raise ConfigError("V must be > 0")
        if p.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if not p.rho > 0:
            raise ConfigError("rho must be in (0, inf]")
        if not p.xi > 0:
            raise ConfigError("xi must be > 0")
        if p.delta < 1:
            raise ConfigError("delta must be >= 1")
        if not p.bit_unit > 0:
            raise ConfigError("bit_unit must be > 0")
        s = self.sessions
        if not 0.0 <= s.p_start <= 1.0:
            raise ConfigError("p_start must be in [0, 1]")
        if s.session_length < 1:
            raise ConfigError("session_length must be >= 1")
        if s.arrival not in ARRIVALS:
            raise ConfigError(f"arrival must be one of {ARRIVALS}")
        r = self.run
        if r.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if not (r.n_symbols > 0 and r.edge_threshold_bits >= 0 and r.power > 0 and r.f0_ghz > 0):
            raise ConfigError("n_symbols, power and f0_ghz must be positive; edge threshold non-negative")
        return self

    def with_policy(self, **kw) -> "SimConfig":
        return replace(self, policy=replace(self.policy, **kw))

    def with_run(self, **kw) -> "SimConfig":
        return replace(self, run=replace(self.run, **kw))


def _parse_float(text: str) -> float:
    text = text.strip().lower()
    if text in ("inf", "infinity", "+inf"):
        return math.inf
    return float(text)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_segments(text: str) -> list[Segment]:
    """``chunks modes size_lo size_hi q_lo q_hi`` per segment, ';'-separated."""
    out = []
    for block in text.replace("\n", ";").split(";"):
        if not block.strip():
            continue
        parts = block.split()
        if len(parts) != 6:
            raise ConfigError(f"segment needs 6 fields, got {block.strip()!r}")
        n, m = int(parts[0]), int(parts[1])
        lo, hi, qlo, qhi = (float(v) for v in parts[2:])
        out.append(Segment(n, m, (lo, hi), (qlo, qhi)))
    if not out:
        raise ConfigError("empty segment list")
    return out


def _fill(obj, section: str, raw: dict, renames: dict | None = None):
    renames = renames or {}
    known = {f.name: f for f in fields(obj)}
    for key, value in raw.items():
        name = renames.get(key, key)
        if name not in known:
            raise ConfigError(f"[{section}] unknown key {key!r}")
        current = getattr(obj, name)
        try:
            if isinstance(current, bool):
                setattr(obj, name, _parse_bool(value))
            elif isinstance(current, int):
                setattr(obj, name, int(float(value)))
            elif isinstance(current, float):
                setattr(obj, name, _parse_float(value))
            else:
                setattr(obj, name, value.strip())
        except ValueError as exc:
            raise ConfigError(f"[{section}] bad value for {key!r}: {value!r}") from exc


def load_config(path) -> SimConfig:
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    cp.optionxform = str
    with path.open() as fh:
        cp.read_file(fh)
    cfg = SimConfig()
    allowed = {"topology", "video", "policy", "sessions", "run"}
    extra = set(cp.sections()) - allowed
    if extra:
        raise ConfigError(f"unknown sections: {sorted(extra)}")
    if cp.has_section("topology"):
        raw = dict(cp["topology"])
        if "topology_file" in raw:
            tfile = Path(raw.pop("topology_file"))
            if not tfile.is_absolute():
                tfile = path.parent / tfile
            raw = {**read_topology(tfile), **raw}
        try:
            cfg.topology = TopologySpec.from_mapping(raw)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if cp.has_section("video"):
        raw = dict(cp["video"])
        for key in raw:
            if key not in ("profile", "segments"):
                raise ConfigError(f"[video] unknown key {key!r}")
        if "profile" in raw:
            prof = Path(raw["profile"])
            cfg.video.profile = str(prof if prof.is_absolute() else path.parent / prof)
        if "segments" in raw:
            cfg.video.segments = parse_segments(raw["segments"])
    if cp.has_section("policy"):
        _fill(cfg.policy, "policy", dict(cp["policy"]), {"V": "v_param", "v": "v_param"})
    if cp.has_section("sessions"):
        _fill(cfg.sessions, "sessions", dict(cp["sessions"]))
    if cp.has_section("run"):
        _fill(cfg.run, "run", dict(cp["run"]))
    return cfg.validate()
