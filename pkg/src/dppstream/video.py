"""Per-chunk VBR rate/quality ladders.

Chunk sizes are stored in bits (the full payload of one chunk at a given
mode) and quality is an SSIM value in [0, 1].
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

GOP_SECONDS = 0.5
HEADER = ("chunk", "mode", "bits", "ssim")


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class QualityBounds:
    d_min: float
    d_max: float


@dataclass(frozen=True)
class VideoProfile:
    """``sizes[t]`` and ``qualities[t]`` are the mode ladders of chunk ``t``."""

    sizes: tuple[np.ndarray, ...]
    qualities: tuple[np.ndarray, ...]
    gop_seconds: float = GOP_SECONDS

    def __post_init__(self):
        if len(self.sizes) == 0:
            raise ProfileError("no chunks")
        if len(self.sizes) != len(self.qualities):
            raise ProfileError("sizes and qualities disagree on the chunk count")
        for t, (s, q) in enumerate(zip(self.sizes, self.qualities)):
            _check_ladder(t, s, q)

    @property
    def length(self) -> int:
        return len(self.sizes)

    def mode_counts(self) -> list[int]:
        return [len(s) for s in self.sizes]


def _check_ladder(t, sizes, qualities):
    if len(sizes) == 0:
        raise ProfileError(f"chunk {t}: no modes")
    if len(sizes) != len(qualities):
        raise ProfileError(f"chunk {t}: sizes and qualities disagree on the mode count")
    if np.any(np.asarray(sizes) <= 0):
        raise ProfileError(f"chunk {t}: sizes must be positive")
    if np.any(np.diff(sizes) <= 0):
        raise ProfileError(f"chunk {t}: sizes must be strictly increasing across modes")
    if np.any(np.diff(qualities) < 0):
        raise ProfileError(f"chunk {t}: quality must be non-decreasing across modes")
    if np.any((np.asarray(qualities) < 0) | (np.asarray(qualities) > 1)):
        raise ProfileError(f"chunk {t}: quality outside [0, 1]")


def load_profile(path) -> VideoProfile:
    """Read a ``chunk,mode,bits,ssim`` file (0-based chunk and mode ids)."""
    path = Path(path)
    rows: dict[int, dict[int, tuple[float, float]]] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ProfileError(f"{path}: no chunks")
        if tuple(h.strip() for h in header) != HEADER:
            raise ProfileError(f"{path}: header must be {','.join(HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                chunk, mode, bits, ssim = int(row[0]), int(row[1]), float(row[2]), float(row[3])
            except (ValueError, IndexError) as exc:
                raise ProfileError(f"{path}:{lineno}: malformed row {row}") from exc
            if not 0.0 <= ssim <= 1.0:
                raise ProfileError(f"{path}:{lineno}: quality {ssim} outside [0, 1]")
            if bits <= 0:
                raise ProfileError(f"{path}:{lineno}: non-positive size {bits}")
            if mode in rows.setdefault(chunk, {}):
                raise ProfileError(f"{path}:{lineno}: duplicate (chunk {chunk}, mode {mode})")
            rows[chunk][mode] = (bits, ssim)
    if not rows:
        raise ProfileError(f"{path}: no chunks")
    n_chunks = max(rows) + 1
    sizes, quals = [], []
    for t in range(n_chunks):
        modes = rows.get(t)
        if not modes:
            raise ProfileError(f"{path}: chunk {t} has no modes")
        if sorted(modes) != list(range(len(modes))):
            raise ProfileError(f"{path}: chunk {t} is missing modes (have {sorted(modes)})")
        ladder = [modes[m] for m in range(len(modes))]
        s = np.array([b for b, _ in ladder])
        q = np.array([d for _, d in ladder])
        try:
            _check_ladder(t, s, q)
        except ProfileError as exc:
            raise ProfileError(f"{path}: {exc}") from None
        sizes.append(s)
        quals.append(q)
    return VideoProfile(tuple(sizes), tuple(quals))


def save_profile(profile: VideoProfile, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for t, (s, q) in enumerate(zip(profile.sizes, profile.qualities)):
            for m, (b, d) in enumerate(zip(s, q)):
                w.writerow([t, m, repr(float(b)), repr(float(d))])


@dataclass(frozen=True)
class Segment:
    chunks: int
    modes: int
    size_range: tuple[float, float]
    quality_range: tuple[float, float]


def synth_profile(segments, rng: np.random.Generator) -> VideoProfile:
    """Random monotone ladders, segment by segment.

    Each chunk draws a complexity factor that scales its whole ladder inside
    the segment's size range, so consecutive chunks vary like VBR content.
    """
    segments = [s if isinstance(s, Segment) else Segment(*s) for s in segments]
    if not segments:
        raise ProfileError("synth_profile needs at least one segment")
    sizes, quals = [], []
    for seg in segments:
        lo, hi = seg.size_range
        qlo, qhi = seg.quality_range
        if seg.chunks < 1 or seg.modes < 1 or not 0 < lo <= hi or not 0 <= qlo <= qhi <= 1:
            raise ProfileError(f"invalid segment {seg}")
        for _ in range(seg.chunks):
            if seg.modes == 1:
                s = np.array([np.round(rng.uniform(lo, hi))])
                q = np.array([rng.uniform(qlo, qhi)])
            else:
                # geometric ladder between a jittered floor and ceiling
                c = rng.uniform(0.7, 1.0)
                top = lo + c * (hi - lo)
                bottom = lo * rng.uniform(1.0, 1.3)
                bottom = min(bottom, top * 0.9)
                s = np.round(np.geomspace(bottom, top, seg.modes))
                s = np.maximum.accumulate(s + np.arange(seg.modes))  # strictness after rounding
                # concave quality ladder: diminishing returns per extra bit
                base = rng.uniform(qlo, qlo + 0.25 * (qhi - qlo))
                span = qhi - base
                frac = np.log(s / s[0]) / np.log(s[-1] / s[0])
                q = base + span * (1.0 - np.exp(-2.5 * frac)) / (1.0 - np.exp(-2.5))
                q = np.minimum(q, qhi)
            sizes.append(s.astype(float))
            quals.append(q.astype(float))
    return VideoProfile(tuple(sizes), tuple(quals))


def three_segment_profile(rng: np.random.Generator, size_range=(2e5, 3e6), quality_range=(0.75, 0.99)) -> VideoProfile:
    """800 chunks: 8 modes for chunks 0-199 and 600-799, 4 modes in between."""
    return synth_profile([
        Segment(200, 8, size_range, quality_range),
        Segment(400, 4, size_range, quality_range),
        Segment(200, 8, size_range, quality_range),
    ], rng)


def chunk_at(profile: VideoProfile, k: int, start_offset: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """(sizes, qualities) of the ``k``-th requested chunk (k >= 1), cycling."""
    if k < 1:
        raise ValueError("request index k starts at 1")
    t = (start_offset + k - 1) % profile.length
    return profile.sizes[t], profile.qualities[t]


def quality_bounds(profile: VideoProfile) -> QualityBounds:
    return QualityBounds(
        d_min=float(min(q[0] for q in profile.qualities)),
        d_max=float(max(q[-1] for q in profile.qualities)),
    )
