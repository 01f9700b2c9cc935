"""Frame-by-frame driver: detections in, deduplicated alert events out.

Per frame: associate detections to tracks, rotate new 3D samples into the
ego-centered frame, feed per-track streaming downsamplers, run the causal
smoother on every newly closed 2.5 Hz slot, and from six slots on predict
the relative trajectory and assess it against the safety radius. One driver
owns the tracker and the alert state; results are deterministic given
(recording, config) regardless of wall-clock pacing.
"""

from __future__ import annotations

import bisect
import time
from dataclasses import dataclass, field

import numpy as np

from .collision import AlertEvent, AlertStream, assess
from .config import RunConfig
from .evaluate import latency_stats
from .formats import (
    FrameRecord,
    PredDump,
    PredictionRecord,
    RecordingHeader,
    RunSummary,
    TrackSampleRecord,
)
from .geometry import SemiLocalPoint, camera_to_semilocal
from .kalman import CausalCvFilter
from .predict import build_predictor, predict
from .preprocess import STEP, LiveDownsampler, SemiLocalSample, SemiLocalTrack, smooth
from .tracking import Track, Tracker, TrackState


@dataclass
class _Lane:
    """Per-track pipeline state: downsampler, smoother, slot history."""

    downsampler: LiveDownsampler
    causal: CausalCvFilter | None
    raw: list[SemiLocalSample] = field(default_factory=list)
    smoothed: list[SemiLocalSample] = field(default_factory=list)
    records: list[TrackSampleRecord] = field(default_factory=list)
    consumed: int = 0  # cursor into the tracker Track.samples list
    last_vertical: float | None = None


@dataclass
class RunResult:
    events: list[AlertEvent]
    dump: PredDump
    latencies_ms: list[float]
    frames: int
    max_concurrent_tracks: int
    queue_depth_max: int = 0
    budget_violations: int = 0

    def summary(self) -> RunSummary:
        if self.latencies_ms:
            p50, p99 = latency_stats(self.latencies_ms)
        else:
            p50 = p99 = 0.0
        return RunSummary(
            frames=self.frames,
            latency_p50_ms=p50,
            latency_p99_ms=p99,
            latency_count=len(self.latencies_ms),
            max_concurrent_tracks=self.max_concurrent_tracks,
            queue_depth_max=self.queue_depth_max,
            budget_violations=self.budget_violations,
        )


class Pipeline:
    """Single-owner streaming engine over one recording's frames."""

    def __init__(self, header: RecordingHeader, cfg: RunConfig):
        self.header = header
        self.cfg = cfg
        self.tracker = Tracker(cfg.tracker, header.intrinsics)
        self.predictor = build_predictor(cfg.predictor)
        self.alerts = AlertStream(cfg.collision)
        self.lanes: dict[int, _Lane] = {}
        self.events: list[AlertEvent] = []
        self.predictions: list[PredictionRecord] = []
        self.samples: list[TrackSampleRecord] = []
        self.latencies_ms: list[float] = []
        self.frames_processed = 0
        self.max_concurrent_tracks = 0
        self._last_t = 0.0

    # -- per-frame driver ---------------------------------------------------

    def process_frame(self, frame: FrameRecord) -> list[AlertEvent]:
        start = time.perf_counter()
        if self.cfg.pipeline.delay_ms > 0:
            time.sleep(self.cfg.pipeline.delay_ms / 1000.0)
        step = self.tracker.associate(frame.detections, frame.t, frame.pose)
        events: list[AlertEvent] = []
        for track in step.active:
            lane = self._lane(track.track_id)
            new_samples = track.samples[lane.consumed :]
            lane.consumed = len(track.samples)
            for s in new_samples:
                point = camera_to_semilocal(s.point, s.pose.rotation)
                for slot in lane.downsampler.push(s.t, point):
                    events.extend(self._ingest_slot(lane, track, slot))
        for track in step.newly_lost:
            events.extend(self._close_track(track, frame.t))
        confirmed = sum(1 for t in step.active if t.state is TrackState.CONFIRMED)
        self.max_concurrent_tracks = max(self.max_concurrent_tracks, confirmed)
        self.frames_processed += 1
        self._last_t = frame.t
        self.latencies_ms.append((time.perf_counter() - start) * 1000.0)
        self.events.extend(events)
        return events

    def finish(self) -> list[AlertEvent]:
        """Flush open windows and close alert episodes at end of stream."""
        events: list[AlertEvent] = []
        for track_id, lane in sorted(self.lanes.items()):
            for slot in lane.downsampler.finish():
                self._record_slot(lane, slot)
            self._flush_records(lane)
            events.extend(self.alerts.close_track(track_id, self._last_t))
        self.lanes.clear()
        self.events.extend(events)
        return events

    def result(self, queue_depth_max: int = 0, budget_violations: int = 0) -> RunResult:
        dump = PredDump(
            samples=self.samples,
            predictions=self.predictions,
            summary=None,
            metadata=dict(self.header.metadata),
        )
        out = RunResult(
            events=self.events,
            dump=dump,
            latencies_ms=self.latencies_ms,
            frames=self.frames_processed,
            max_concurrent_tracks=self.max_concurrent_tracks,
            queue_depth_max=queue_depth_max,
            budget_violations=budget_violations,
        )
        dump.summary = out.summary()
        return out

    # -- slot handling --------------------------------------------------------

    def _lane(self, track_id: int) -> _Lane:
        lane = self.lanes.get(track_id)
        if lane is None:
            causal = None
            if self.cfg.smoother.enabled and self.cfg.smoother.mode == "live":
                causal = CausalCvFilter(STEP, self.cfg.smoother.sigma_a, self.cfg.smoother.sigma_m)
            lane = _Lane(
                downsampler=LiveDownsampler(track_id, self.header.native_fps), causal=causal
            )
            self.lanes[track_id] = lane
        return lane

    def _ingest_slot(self, lane: _Lane, track: Track, slot: SemiLocalSample) -> list[AlertEvent]:
        self._record_slot(lane, slot)
        events: list[AlertEvent] = []
        if not self.cfg.smoother.enabled:
            events.extend(self._tick(lane, track, lane.raw, slot.t))
            return events
        if self.cfg.smoother.mode == "live":
            z = None if slot.point is None else np.array([slot.point.x, slot.point.y])
            for est in lane.causal.step(z):
                t = lane.raw[est.slot].t
                vertical = self._vertical_at(lane, est.slot)
                sample = SemiLocalSample(
                    t=t,
                    point=SemiLocalPoint(float(est.position[0]), float(est.position[1]), vertical),
                )
                lane.smoothed.append(sample)
                self._attach_smoothed(lane, est.slot, sample)
                events.extend(self._tick(lane, track, lane.smoothed, t))
        else:  # batch: re-smooth the whole history so far on every slot
            track_so_far = SemiLocalTrack(track_id=track.track_id, samples=list(lane.raw))
            smoothed = smooth(track_so_far, self.cfg.smoother)
            lane.smoothed = list(smoothed.samples)
            for i, sample in enumerate(lane.smoothed):
                self._attach_smoothed(lane, i, sample)
            events.extend(self._tick(lane, track, lane.smoothed, slot.t))
        return events

    def _vertical_at(self, lane: _Lane, slot_index: int) -> float:
        sample = lane.raw[slot_index]
        if sample.point is not None:
            lane.last_vertical = sample.point.z
        return lane.last_vertical if lane.last_vertical is not None else 0.0

    def _record_slot(self, lane: _Lane, slot: SemiLocalSample) -> None:
        lane.raw.append(slot)
        raw_xy = None if slot.point is None else (slot.point.x, slot.point.y)
        vertical = None if slot.point is None else slot.point.z
        lane.records.append(
            TrackSampleRecord(
                t=slot.t,
                track_id=lane.downsampler.track_id,
                raw=raw_xy,
                smoothed=None if self.cfg.smoother.enabled else raw_xy,
                vertical=vertical,
            )
        )

    def _attach_smoothed(self, lane: _Lane, slot_index: int, sample: SemiLocalSample) -> None:
        rec = lane.records[slot_index]
        smoothed = None if sample.point is None else (sample.point.x, sample.point.y)
        lane.records[slot_index] = TrackSampleRecord(
            t=rec.t, track_id=rec.track_id, raw=rec.raw, smoothed=smoothed, vertical=rec.vertical
        )

    def _tick(
        self, lane: _Lane, track: Track, series: list[SemiLocalSample], t: float
    ) -> list[AlertEvent]:
        if track.state is not TrackState.CONFIRMED:
            return []
        # predictions only fire off fully measured windows: the smoother may
        # bridge dropout gaps for continuity, but extrapolating a window that
        # contains synthesized slots trades too much precision for latency
        window = self.predictor.contract.observe_window
        tail = lane.raw[: len(series)][-window:]
        if len(tail) < window or any(s.point is None for s in tail):
            return []
        semi = SemiLocalTrack(track_id=track.track_id, samples=series)
        pred = predict(semi, self.predictor)
        if pred is None:
            return []
        self.predictions.append(
            PredictionRecord(
                t=t,
                track_id=track.track_id,
                points=[(float(x), float(y)) for x, y in pred.points],
            )
        )
        alert = assess(pred, track.track_id, self.cfg.collision)
        return self.alerts.update(track.track_id, t, alert)

    def _close_track(self, track: Track, t: float) -> list[AlertEvent]:
        lane = self.lanes.pop(track.track_id, None)
        if lane is not None:
            for slot in lane.downsampler.finish():
                self._record_slot(lane, slot)
            self._flush_records(lane)
        return self.alerts.close_track(track.track_id, t)

    def _flush_records(self, lane: _Lane) -> None:
        self.samples.extend(lane.records)
        lane.records = []


# ---------------------------------------------------------------------------
# whole-recording runners


def run_offline(header: RecordingHeader, frames: list[FrameRecord], cfg: RunConfig) -> RunResult:
    """Process every frame as fast as possible (the `run` command)."""
    pipeline = Pipeline(header, cfg)
    for frame in frames:
        pipeline.process_frame(frame)
    pipeline.finish()
    return pipeline.result()


def track_census(header: RecordingHeader, frames: list[FrameRecord], cfg: RunConfig) -> int:
    """Tracking-only pass; counts tracks that ever reach the confirmed state."""
    tracker = Tracker(cfg.tracker, header.intrinsics)
    confirmed: set[int] = set()
    for frame in frames:
        step = tracker.associate(frame.detections, frame.t, frame.pose)
        confirmed.update(t.track_id for t in step.active if t.state is TrackState.CONFIRMED)
    return len(confirmed)


def replay(
    header: RecordingHeader,
    frames: list[FrameRecord],
    cfg: RunConfig,
    rate: float = 1.0,
    budget_ms: float | None = None,
    on_event=None,
) -> RunResult:
    """Wall-clock playback at native fps x rate (the `stream` command).

    rate 0 means as-fast-as-possible; pacing never changes the emitted
    alerts, only the latency/queue statistics. Frames that arrive while the
    previous one is still processing are counted as queued.
    """
    pipeline = Pipeline(header, cfg)
    violations = 0
    queue_max = 0
    t0 = frames[0].t if frames else 0.0
    offsets = [f.t - t0 for f in frames]
    start = time.perf_counter()
    for i, frame in enumerate(frames):
        if rate > 0:
            arrival = start + offsets[i] / rate
            now = time.perf_counter()
            if now < arrival:
                time.sleep(arrival - now)
        events = pipeline.process_frame(frame)
        if budget_ms is not None and pipeline.latencies_ms[-1] > budget_ms:
            violations += 1
        if rate > 0:
            elapsed = (time.perf_counter() - start) * rate
            ready = bisect.bisect_right(offsets, elapsed) - 1
            queue_max = max(queue_max, ready - i)
        if on_event is not None:
            for event in events:
                on_event(event)
    tail = pipeline.finish()
    if on_event is not None:
        for event in tail:
            on_event(event)
    return pipeline.result(queue_depth_max=queue_max, budget_violations=violations)
