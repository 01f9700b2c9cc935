"""Annotation chain applied to live tracks: downsample, smooth, prune.

Native-rate semi-local positions are averaged into non-overlapping windows
down to 2.5 Hz (30 fps -> 12-frame windows, aligned to track start), then a
constant-velocity Kalman pass refines the horizontal components. Tracks that
end up shorter than 6 downsampled samples are discarded as unreliable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kalman
from .geometry import SemiLocalPoint

TARGET_HZ = 2.5
STEP = 1.0 / TARGET_HZ  # 0.4 s
MIN_TRACK_SAMPLES = 6  # tracks shorter than this are pruned
MIN_PARTIAL_WINDOW = 6  # valid samples needed to emit the trailing window


@dataclass(frozen=True)
class SemiLocalSample:
    """One 2.5 Hz sample; point is None for a window with no valid positions."""

    t: float
    point: SemiLocalPoint | None


@dataclass
class SemiLocalTrack:
    track_id: int
    samples: list[SemiLocalSample] = field(default_factory=list)

    def valid_count(self) -> int:
        return sum(1 for s in self.samples if s.point is not None)

    def horizontal(self) -> np.ndarray:
        """(n, 2) horizontal positions with NaN rows at gaps."""
        out = np.full((len(self.samples), 2), np.nan)
        for i, s in enumerate(self.samples):
            if s.point is not None:
                out[i] = (s.point.x, s.point.y)
        return out


def window_length(native_fps: int) -> int:
    """Frames per 2.5 Hz window; the native rate must divide evenly."""
    length = native_fps / TARGET_HZ
    if abs(length - round(length)) > 1e-9:
        raise ValueError(f"native fps {native_fps} does not divide into {TARGET_HZ} Hz windows")
    return int(round(length))


class LiveDownsampler:
    """Streaming window-mean downsampler for one track.

    Windows are indexed from the first pushed sample. A window is emitted
    once a sample lands beyond it (so outputs never change retroactively);
    intervening empty windows come out as gaps. The trailing window, flushed
    by `finish`, is only emitted if it holds at least MIN_PARTIAL_WINDOW
    valid samples.
    """

    def __init__(self, track_id: int, native_fps: int = 30):
        self.track_id = track_id
        self.native_fps = native_fps
        self.window = window_length(native_fps)
        self._t0: float | None = None
        self._open_index: int | None = None
        self._acc: list[SemiLocalPoint] = []

    def _window_time(self, index: int) -> float:
        # nominal center of the window's native-frame span, which keeps the
        # output grid exactly STEP apart regardless of how full windows are
        return self._t0 + index * STEP + (self.window - 1) / (2.0 * self.native_fps)

    def _close(self, index: int) -> SemiLocalSample:
        if self._acc:
            n = len(self._acc)
            x = sum(p.x for p in self._acc) / n
            y = sum(p.y for p in self._acc) / n
            z = sum(p.z for p in self._acc) / n
            point = SemiLocalPoint(x, y, z)
        else:
            point = None
        self._acc = []
        return SemiLocalSample(t=self._window_time(index), point=point)

    def push(self, t: float, point: SemiLocalPoint) -> list[SemiLocalSample]:
        if self._t0 is None:
            self._t0 = t
            self._open_index = 0
        rel = int(round((t - self._t0) * self.native_fps))
        index = rel // self.window
        out: list[SemiLocalSample] = []
        while index > self._open_index:
            out.append(self._close(self._open_index))
            self._open_index += 1
        self._acc.append(point)
        return out

    def finish(self) -> list[SemiLocalSample]:
        if self._open_index is None:
            return []
        valid = len(self._acc)
        if valid >= MIN_PARTIAL_WINDOW:
            return [self._close(self._open_index)]
        return []


def downsample(
    track_id: int,
    samples: list[tuple[float, SemiLocalPoint]],
    native_fps: int = 30,
) -> SemiLocalTrack:
    """Batch window-mean downsample of (timestamp, point) pairs to 2.5 Hz."""
    ds = LiveDownsampler(track_id, native_fps)
    out: list[SemiLocalSample] = []
    for t, point in samples:
        out.extend(ds.push(t, point))
    out.extend(ds.finish())
    return SemiLocalTrack(track_id=track_id, samples=out)


@dataclass
class SmootherConfig:
    sigma_a: float = 0.5  # white-noise acceleration, m/s^2
    sigma_m: float = 0.1  # measurement noise, m (~2% of 5 m depth)
    mode: str = "live"  # "live": causal forward pass; "batch": forward + RTS
    enabled: bool = True


def smooth(track: SemiLocalTrack, cfg: SmootherConfig) -> SemiLocalTrack:
    """Kalman-refine the horizontal components; vertical passes through.

    Gap slots get the filter's propagated estimate (vertical carried forward
    from the last valid sample); slots before the first valid sample stay
    gaps. Timestamps and sample count never change. Tracks with fewer than
    two valid samples are returned unchanged.
    """
    if track.valid_count() < 2:
        return track
    zs = track.horizontal()
    result = kalman.forward_filter(zs, STEP, cfg.sigma_a, cfg.sigma_m)
    if cfg.mode == "batch":
        positions, _ = kalman.rts_smooth(result, STEP, cfg.sigma_a)
    elif cfg.mode == "live":
        positions = result.positions
    else:
        raise ValueError(f"unknown smoother mode {cfg.mode!r}")
    out: list[SemiLocalSample] = []
    last_z: float | None = None
    for i, s in enumerate(track.samples):
        if s.point is not None:
            last_z = s.point.z
        if np.isnan(positions[i]).any() or last_z is None:
            out.append(SemiLocalSample(t=s.t, point=None))
        else:
            out.append(
                SemiLocalSample(
                    t=s.t,
                    point=SemiLocalPoint(float(positions[i, 0]), float(positions[i, 1]), last_z),
                )
            )
    return replace(track, samples=out)


def prune(tracks: list[SemiLocalTrack]) -> list[SemiLocalTrack]:
    """Keep exactly the tracks with at least MIN_TRACK_SAMPLES valid samples."""
    return [t for t in tracks if t.valid_count() >= MIN_TRACK_SAMPLES]
