"""Small-cell channel model: WINNER II A1 pathloss, LOS draws, SINR and peak rates.

Distances are in meters, gains are linear, and the noise power is normalized
to 1 so that transmit powers are expressed as SNR multipliers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EULER_GAMMA = 0.5772156649015329

# (A, B, C, sigma_dB) for the A1 indoor small-cell scenario
A1_LOS = (18.7, 46.8, 20.0, 3.0)
A1_NLOS = (36.8, 43.8, 20.0, 4.0)

MIN_MODEL_DISTANCE = 3.0
SLOT_SECONDS = 0.5
DEFAULT_POWER = 1e8
DEFAULT_SYMBOLS_PER_SLOT = 1e5 * 84
DEFAULT_EDGE_THRESHOLD_BITS = 1e6


def pathloss_db(d, los, f0_ghz=5.0, shadow_db=0.0):
    """Pathloss in dB; distances below 3 m are clamped to 3 m."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("pathloss_db requires a positive distance")
    los = np.asarray(los, dtype=bool)
    a = np.where(los, A1_LOS[0], A1_NLOS[0])
    b = np.where(los, A1_LOS[1], A1_NLOS[1])
    c = np.where(los, A1_LOS[2], A1_NLOS[2])
    out = a * np.log10(np.maximum(d, MIN_MODEL_DISTANCE)) + b + c * np.log10(f0_ghz / 5.0) + shadow_db
    return float(out) if out.ndim == 0 else out


def los_probability(d):
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("los_probability requires a positive distance")
    far = 1.0 - 0.9 * np.cbrt(1.0 - (1.24 - 0.6 * np.log10(np.maximum(d, 1e-12))) ** 3)
    p = np.clip(np.where(d <= 2.5, 1.0, far), 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def _e1_series(x):
    # E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
    total = np.zeros_like(x)
    term = np.ones_like(x)
    for k in range(1, 60):
        term = term * (-x) / k
        contrib = term / k
        total += contrib
        if np.all(np.abs(contrib) <= 1e-17 * np.maximum(np.abs(total), 1e-300)):
            break
    return -EULER_GAMMA - np.log(x) - total


def _e1_continued_fraction_scaled(x):
    # modified Lentz evaluation of exp(x) E1(x)
    tiny = 1e-300
    b = x + 1.0
    c = np.full_like(x, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, 500):
        an = -float(i * i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if np.all(np.abs(delta - 1.0) < 1e-16):
            break
    return h


def _e1(x, scaled):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("exp_integral_e1 is defined for x > 0 only")
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    small = flat <= 1.0
    if np.any(small):
        xs = flat[small]
        out[small] = _e1_series(xs) * (np.exp(xs) if scaled else 1.0)
    if np.any(~small):
        xl = flat[~small]
        out[~small] = _e1_continued_fraction_scaled(xl) * (1.0 if scaled else np.exp(-xl))
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def exp_integral_e1(x):
    """Exponential integral E1(x) = int_x^inf exp(-t)/t dt for x > 0.

    Uses the power series for x <= 1 and a continued fraction above.
    Accepts scalars or arrays.
    """
    return _e1(x, scaled=False)


def peak_rate(gamma):
    """Ergodic-rate lower bound exp(1/G) E1(1/G) in nats per channel symbol.

    Returns 0 at G = 0 (the limit). The product is evaluated in scaled form
    so that tiny SINR values do not overflow.
    """
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0) or np.any(np.isnan(g)):
        raise ValueError("peak_rate requires a non-negative SINR")
    flat = np.atleast_1d(g).ravel()
    out = np.zeros_like(flat)
    pos = flat > 0
    if np.any(pos):
        out[pos] = _e1(1.0 / flat[pos], scaled=True)
    if g.ndim == 0:
        return float(out[0])
    return out.reshape(g.shape)


@dataclass
class UserTrack:
    """Piecewise-linear path. ``waypoints`` rows are (x, y, speed) with the
    speed (m/s) applying to the segment that starts at that waypoint."""

    waypoints: np.ndarray

    def __post_init__(self):
        self.waypoints = np.atleast_2d(np.asarray(self.waypoints, dtype=float))
        if self.waypoints.shape[1] == 2:
            self.waypoints = np.column_stack([self.waypoints, np.zeros(len(self.waypoints))])
        if self.waypoints.shape[1] != 3 or len(self.waypoints) == 0:
            raise ValueError("waypoints must be (x, y, speed) triples")
        if np.any(self.waypoints[:, 2] < 0):
            raise ValueError("waypoint speeds must be non-negative")
        seg = np.diff(self.waypoints[:, :2], axis=0)
        self._lengths = np.hypot(seg[:, 0], seg[:, 1])
        speeds = self.waypoints[:-1, 2]
        with np.errstate(divide="ignore"):
            durations = np.where(self._lengths == 0, 0.0, self._lengths / speeds)
        self._durations = durations
        self._ends = np.cumsum(durations)

    @property
    def is_static(self):
        return len(self.waypoints) == 1 or not np.isfinite(self._durations[0]) or np.all(self._lengths == 0)

    def position(self, seconds: float) -> np.ndarray:
        if len(self.waypoints) == 1:
            return self.waypoints[0, :2].copy()
        start = 0.0
        for i, (length, dur, end) in enumerate(zip(self._lengths, self._durations, self._ends)):
            if not np.isfinite(dur):
                # zero speed: the user parks at this waypoint
                return self.waypoints[i, :2].copy()
            if seconds < end:
                frac = 0.0 if dur == 0 else (seconds - start) / dur
                a, b = self.waypoints[i, :2], self.waypoints[i + 1, :2]
                return a + frac * (b - a)
            start = end
        return self.waypoints[-1, :2].copy()


@dataclass
class Topology:
    helper_positions: np.ndarray
    user_tracks: list[UserTrack]
    area: tuple[float, float]
    slot_seconds: float = SLOT_SECONDS

    def __post_init__(self):
        self.helper_positions = np.atleast_2d(np.asarray(self.helper_positions, dtype=float))
        if len(self.helper_positions) < 1:
            raise ValueError("topology needs at least one helper")
        w, h = self.area
        pts = [self.helper_positions] + [t.waypoints[:, :2] for t in self.user_tracks]
        allpts = np.vstack(pts)
        if np.any(allpts < -1e-9) or np.any(allpts[:, 0] > w + 1e-9) or np.any(allpts[:, 1] > h + 1e-9):
            raise ValueError("all positions must lie within the area bounds")

    @property
    def n_helpers(self) -> int:
        return len(self.helper_positions)

    @property
    def n_users(self) -> int:
        return len(self.user_tracks)

    def mobile_users(self) -> list[int]:
        return [i for i, tr in enumerate(self.user_tracks) if not tr.is_static]


def helper_grid(rows: int, cols: int, cell: float) -> np.ndarray:
    """Helpers at cell centers, numbered left to right then bottom to top."""
    return np.array([((c + 0.5) * cell, (r + 0.5) * cell) for r in range(rows) for c in range(cols)])


def advance_mobility(topology: Topology, t: int) -> np.ndarray:
    """User positions (U x 2) at slot ``t``."""
    secs = t * topology.slot_seconds
    if topology.n_users == 0:
        return np.zeros((0, 2))
    return np.array([tr.position(secs) for tr in topology.user_tracks])


def distances(helpers: np.ndarray, users: np.ndarray) -> np.ndarray:
    diff = helpers[:, None, :] - users[None, :, :]
    return np.maximum(np.hypot(diff[..., 0], diff[..., 1]), 1e-3)


@dataclass
class LinkRealization:
    los: np.ndarray        # H x U bool
    shadow_db: np.ndarray  # H x U
    gain: np.ndarray       # H x U linear


@dataclass
class LinkState:
    """Per-link LOS/shadowing draws, refreshed after a displacement of
    ``redraw_m`` meters since the link's last draw."""

    rng: np.random.Generator
    f0_ghz: float = 5.0
    redraw_m: float = 1.0
    los: np.ndarray | None = None
    shadow_db: np.ndarray | None = None
    anchor: np.ndarray | None = None  # user position at last draw, U x 2

    def _draw(self, dist: np.ndarray):
        u = self.rng.random(dist.shape)
        z = self.rng.standard_normal(dist.shape)
        los = u < los_probability(dist)
        sigma = np.where(los, A1_LOS[3], A1_NLOS[3])
        return los, sigma * z

    def update(self, helpers: np.ndarray, positions: np.ndarray) -> LinkRealization:
        dist = distances(helpers, positions)
        if self.los is None:
            self.los, self.shadow_db = self._draw(dist)
            self.anchor = positions.copy()
        else:
            moved = np.hypot(*(positions - self.anchor).T) >= self.redraw_m
            if np.any(moved):
                los, shadow = self._draw(dist[:, moved])
                self.los[:, moved] = los
                self.shadow_db[:, moved] = shadow
                self.anchor[moved] = positions[moved]
        pl = pathloss_db(dist, self.los, self.f0_ghz, self.shadow_db)
        gain = 10.0 ** (-np.asarray(pl) / 10.0)
        return LinkRealization(self.los.copy(), self.shadow_db.copy(), gain)


def resample_link_state(rng: np.random.Generator, helpers: np.ndarray, positions: np.ndarray,
                        f0_ghz: float = 5.0) -> LinkRealization:
    """Fresh independent LOS/shadowing draw for every link."""
    return LinkState(rng, f0_ghz).update(helpers, positions)


@dataclass
class RateTable:
    gamma: np.ndarray      # H x U SINR
    peak_rate: np.ndarray  # H x U nats/symbol
    edges: np.ndarray      # H x U bool
    n_symbols: float = DEFAULT_SYMBOLS_PER_SLOT

    @property
    def capacity_bits(self) -> np.ndarray:
        return self.n_symbols * self.peak_rate

    def neighbors(self, u: int) -> np.ndarray:
        return np.flatnonzero(self.edges[:, u])


def compute_rate_table(gains: np.ndarray, powers=DEFAULT_POWER, n_symbols: float = DEFAULT_SYMBOLS_PER_SLOT,
                       edge_threshold_bits: float = DEFAULT_EDGE_THRESHOLD_BITS) -> RateTable:
    """SINR with interference from every other helper, closed-form peak rates
    and the edge set {n C > threshold}."""
    gains = np.atleast_2d(np.asarray(gains, dtype=float))
    p = np.broadcast_to(np.asarray(powers, dtype=float).reshape(-1, 1) if np.ndim(powers) else powers,
                        (gains.shape[0], 1))
    rx = p * gains
    interference = rx.sum(axis=0, keepdims=True) - rx
    gamma = rx / (1.0 + interference)
    c = peak_rate(gamma)
    c = np.asarray(c).reshape(gamma.shape)
    edges = n_symbols * c > edge_threshold_bits
    return RateTable(gamma, c, edges, n_symbols)


def read_topology(path) -> dict:
    """Parse a topology file (INI with a [topology] section) into raw keys."""
    import configparser

    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    with open(path) as fh:
        cp.read_file(fh)
    if "topology" not in cp:
        raise ValueError(f"{path}: missing [topology] section")
    return dict(cp["topology"])


def parse_points(text: str, width: int) -> np.ndarray:
    rows = [r.split() for r in text.replace("\n", ";").split(";") if r.strip()]
    arr = np.array([[float(v) for v in r] for r in rows], dtype=float)
    if arr.size == 0 or arr.shape[1] != width:
        raise ValueError(f"expected {width} numbers per point, got {text!r}")
    return arr


@dataclass
class TopologySpec:
    """Declarative topology; ``build`` places random users with ``rng``."""

    area: tuple[float, float] = (10.0, 10.0)
    helper_grid: tuple[int, int, float] | None = (2, 2, 5.0)
    helper_positions: np.ndarray | None = None
    static_users: np.ndarray | None = None
    random_users: int = 0
    cluster_users: tuple[int, float, float, float] | None = None
    mobile_waypoints: list[np.ndarray] = field(default_factory=list)

    KEYS = ("area", "helper_grid", "helper_positions", "static_users", "random_users",
            "cluster_users", "mobile_waypoints")

    @classmethod
    def from_mapping(cls, raw: dict) -> "TopologySpec":
        unknown = set(raw) - set(cls.KEYS)
        if unknown:
            raise ValueError(f"unknown topology keys: {sorted(unknown)}")
        spec = cls()
        if "area" in raw:
            w, h = (float(v) for v in raw["area"].replace(",", " ").split())
            spec.area = (w, h)
        if "helper_positions" in raw:
            spec.helper_positions = parse_points(raw["helper_positions"], 2)
            spec.helper_grid = None
        if "helper_grid" in raw:
            r, c, s = raw["helper_grid"].replace(",", " ").split()
            spec.helper_grid = (int(r), int(c), float(s))
        if "static_users" in raw:
            spec.static_users = parse_points(raw["static_users"], 2)
        if "random_users" in raw:
            spec.random_users = int(raw["random_users"])
        if "cluster_users" in raw:
            n, cx, cy, rad = raw["cluster_users"].replace(",", " ").split()
            spec.cluster_users = (int(n), float(cx), float(cy), float(rad))
        if "mobile_waypoints" in raw:
            # several mobile users are separated by '|'
            spec.mobile_waypoints = [parse_points(block, 3) for block in raw["mobile_waypoints"].split("|")
                                     if block.strip()]
        return spec

    def build(self, rng: np.random.Generator) -> Topology:
        w, h = self.area
        if self.helper_positions is not None:
            helpers = self.helper_positions
        elif self.helper_grid is not None:
            helpers = helper_grid(*self.helper_grid)
        else:
            raise ValueError("topology needs helper_grid or helper_positions")
        tracks = []
        if self.static_users is not None:
            tracks += [UserTrack(p[None, :]) for p in self.static_users]
        if self.random_users:
            pts = rng.uniform([0, 0], [w, h], size=(self.random_users, 2))
            tracks += [UserTrack(p[None, :]) for p in pts]
        if self.cluster_users is not None:
            n, cx, cy, rad = self.cluster_users
            r = rad * np.sqrt(rng.random(n))
            th = rng.uniform(0, 2 * np.pi, n)
            pts = np.column_stack([cx + r * np.cos(th), cy + r * np.sin(th)])
            pts = np.clip(pts, [0, 0], [w, h])
            tracks += [UserTrack(p[None, :]) for p in pts]
        tracks += [UserTrack(wp) for wp in self.mobile_waypoints]
        return Topology(helpers, tracks, (w, h))
