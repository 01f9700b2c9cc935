"""Identity-stable pedestrian tracks from per-frame detections.

Association is two-stage in the ByteTrack spirit: high-confidence detections
are matched first, the leftovers of the low-confidence band second, both by
greedy descending IoU against constant-velocity-predicted boxes. Greedy
matching (instead of an optimal assignment) is deliberate: at the densities
this engine targets (~10 concurrent pedestrians) it is indistinguishable in
practice and trivial to reason about.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .geometry import CameraIntrinsics, CameraPoint, PixelPoint, Pose, backproject

Bbox = tuple[float, float, float, float]  # u_min, v_min, u_max, v_max


class TrackingError(ValueError):
    """Rejected tracker input (malformed detection, non-monotonic frame)."""


@dataclass(frozen=True)
class Detection:
    """One detected pedestrian box; center_depth is None when depth dropped out."""

    bbox: Bbox
    confidence: float
    center_depth: float | None

    def __post_init__(self) -> None:
        u_min, v_min, u_max, v_max = self.bbox
        if not (u_min < u_max and v_min < v_max):
            raise TrackingError(f"degenerate bbox {self.bbox}")
        if not 0.0 <= self.confidence <= 1.0:
            raise TrackingError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def center(self) -> tuple[float, float]:
        u_min, v_min, u_max, v_max = self.bbox
        return ((u_min + u_max) / 2.0, (v_min + v_max) / 2.0)

    def has_depth(self) -> bool:
        d = self.center_depth
        return d is not None and math.isfinite(d) and d > 0.0


class TrackState(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    LOST = "lost"


@dataclass
class TrackSample:
    """One 3D observation: backprojected bbox center plus the frame's pose."""

    t: float
    point: CameraPoint
    pose: Pose


@dataclass
class Track:
    track_id: int
    state: TrackState = TrackState.TENTATIVE
    samples: list[TrackSample] = field(default_factory=list)
    misses: int = 0
    hits: int = 1
    # pixel-space association state
    last_bbox: Bbox | None = None
    last_t: float = 0.0
    prev_center: tuple[float, float] | None = None
    prev_t: float | None = None


@dataclass
class TrackerConfig:
    high_thresh: float = 0.5
    low_thresh: float = 0.1
    iou_thresh: float = 0.3
    confirm_hits: int = 3
    max_misses: int = 30
    dup_iou: float = 0.85  # concurrent tracks overlapping this much are duplicates


def iou(a: Bbox, b: Bbox) -> float:
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def predict_box(track: Track, t: float | None = None) -> Bbox:
    """Constant-velocity extrapolation of the track's box in pixel space.

    With a single observation the last box is returned unchanged. With two or
    more, the box center is shifted by the last pixel velocity times the
    elapsed time (one native frame interval when `t` is not given).
    """
    if track.last_bbox is None:
        raise TrackingError(f"track {track.track_id} has no observations")
    if track.prev_center is None or track.prev_t is None:
        return track.last_bbox
    dt_obs = track.last_t - track.prev_t
    if dt_obs <= 0.0:
        return track.last_bbox
    u_min, v_min, u_max, v_max = track.last_bbox
    cu = (u_min + u_max) / 2.0
    cv = (v_min + v_max) / 2.0
    vu = (cu - track.prev_center[0]) / dt_obs
    vv = (cv - track.prev_center[1]) / dt_obs
    dt = dt_obs if t is None else t - track.last_t
    du, dv = vu * dt, vv * dt
    return (u_min + du, v_min + dv, u_max + du, v_max + dv)


def _greedy_match(
    tracks: list[Track],
    boxes: list[Bbox],
    detections: list[Detection],
    iou_thresh: float,
) -> list[tuple[int, int]]:
    """Greedy descending-IoU pairing; ties broken by (track, detection) index."""
    pairs = []
    for ti, box in enumerate(boxes):
        for di, det in enumerate(detections):
            score = iou(box, det.bbox)
            if score >= iou_thresh:
                pairs.append((-score, ti, di))
    pairs.sort()
    matched: list[tuple[int, int]] = []
    used_t: set[int] = set()
    used_d: set[int] = set()
    for _, ti, di in pairs:
        if ti in used_t or di in used_d:
            continue
        used_t.add(ti)
        used_d.add(di)
        matched.append((ti, di))
    return matched


@dataclass
class TrackerStep:
    """Result of one associate() call."""

    active: list[Track]
    newly_lost: list[Track]


class Tracker:
    """Single-owner, frame-by-frame pedestrian tracker.

    One instance per stream; not safe for shared mutable use. Track ids are
    handed out in spawn order starting at 1 and never reused.
    """

    def __init__(self, cfg: TrackerConfig, intrinsics: CameraIntrinsics):
        self.cfg = cfg
        self.intrinsics = intrinsics
        self.tracks: list[Track] = []
        self._next_id = 1
        self._last_t: float | None = None

    def associate(self, detections: list[Detection], t: float, pose: Pose) -> TrackerStep:
        """Advance the tracker by one frame; returns active and newly lost tracks."""
        if self._last_t is not None and t <= self._last_t:
            raise TrackingError(f"frame at t={t} is not after t={self._last_t}")
        self._last_t = t

        high = [d for d in detections if d.confidence >= self.cfg.high_thresh]
        low = [
            d
            for d in detections
            if self.cfg.low_thresh <= d.confidence < self.cfg.high_thresh
        ]

        boxes = [predict_box(tr, t) for tr in self.tracks]
        matched_first = _greedy_match(self.tracks, boxes, high, self.cfg.iou_thresh)
        matched_tracks = {ti for ti, _ in matched_first}
        matched_dets = {di for _, di in matched_first}

        leftover_idx = [i for i in range(len(self.tracks)) if i not in matched_tracks]
        matched_second = _greedy_match(
            [self.tracks[i] for i in leftover_idx],
            [boxes[i] for i in leftover_idx],
            low,
            self.cfg.iou_thresh,
        )

        for ti, di in matched_first:
            self._update_track(self.tracks[ti], high[di], t, pose)
        for li, di in matched_second:
            ti = leftover_idx[li]
            matched_tracks.add(ti)
            self._update_track(self.tracks[ti], low[di], t, pose)

        newly_lost: list[Track] = []
        survivors: list[Track] = []
        for i, track in enumerate(self.tracks):
            if i in matched_tracks:
                survivors.append(track)
                continue
            track.misses += 1
            if track.misses >= self.cfg.max_misses:
                track.state = TrackState.LOST
                newly_lost.append(track)
            else:
                survivors.append(track)
        self.tracks = survivors

        for di, det in enumerate(high):
            if di not in matched_dets:
                self.tracks.append(self._spawn(det, t, pose))

        newly_lost.extend(self._drop_duplicates(t))
        return TrackerStep(active=list(self.tracks), newly_lost=newly_lost)

    def _drop_duplicates(self, t: float) -> list[Track]:
        """Suppress concurrent tracks sitting on the same object.

        During fast camera sweeps a detection can alternate between a track
        and a freshly spawned duplicate; once their predicted boxes converge
        the shorter-lived one is retired (the recipe the two-stage tracker
        family uses for the same pathology).
        """
        if len(self.tracks) < 2:
            return []
        boxes = [predict_box(tr, t) for tr in self.tracks]
        dropped: set[int] = set()
        for i in range(len(self.tracks)):
            for j in range(i + 1, len(self.tracks)):
                if i in dropped or j in dropped:
                    continue
                if iou(boxes[i], boxes[j]) >= self.cfg.dup_iou:
                    a, b = self.tracks[i], self.tracks[j]
                    loser = j if (a.hits, -a.track_id) >= (b.hits, -b.track_id) else i
                    dropped.add(loser)
        lost: list[Track] = []
        if dropped:
            for idx in dropped:
                track = self.tracks[idx]
                track.state = TrackState.LOST
                lost.append(track)
            self.tracks = [tr for i, tr in enumerate(self.tracks) if i not in dropped]
        return lost

    def _update_track(self, track: Track, det: Detection, t: float, pose: Pose) -> None:
        if track.last_bbox is not None:
            u_min, v_min, u_max, v_max = track.last_bbox
            track.prev_center = ((u_min + u_max) / 2.0, (v_min + v_max) / 2.0)
            track.prev_t = track.last_t
        track.last_bbox = det.bbox
        track.last_t = t
        track.misses = 0
        track.hits += 1
        if track.state is TrackState.TENTATIVE and track.hits >= self.cfg.confirm_hits:
            track.state = TrackState.CONFIRMED
        self._append_sample(track, det, t, pose)

    def _spawn(self, det: Detection, t: float, pose: Pose) -> Track:
        track = Track(track_id=self._next_id, last_bbox=det.bbox, last_t=t)
        self._next_id += 1
        self._append_sample(track, det, t, pose)
        return track

    def _append_sample(self, track: Track, det: Detection, t: float, pose: Pose) -> None:
        # depthless detections keep the identity alive but add no 3D sample
        if not det.has_depth():
            return
        cu, cv = det.center
        point = backproject(PixelPoint(cu, cv, det.center_depth), self.intrinsics)
        track.samples.append(TrackSample(t=t, point=point, pose=pose))
