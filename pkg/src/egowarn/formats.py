"""Bit-exact text formats: .rec, .truth, .alerts, .pred and .metrics.

Every file is line-oriented JSON: one self-describing object per line,
header first, body lines in time order. Floats go through Python's
shortest-round-trip repr, so read(write(x)) == x exactly and replay is
byte-stable. Field names are frozen in FORMATS.md.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .collision import AlertEvent
from .geometry import CameraIntrinsics, Pose, Quaternion, WorldPoint
from .tracking import Detection

FORMAT_VERSION = 1


class FormatError(ValueError):
    """Malformed or inconsistent file content; carries the offending line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class RecordingHeader:
    intrinsics: CameraIntrinsics
    native_fps: int
    metadata: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION


@dataclass(frozen=True)
class FrameRecord:
    """One ingested frame: index, timestamp, ego pose and detections."""

    frame: int
    t: float
    pose: Pose
    detections: list[Detection]


@dataclass
class PedTruth:
    ped_id: int
    spawn_frame: int
    positions: np.ndarray  # (m, 3) world positions from spawn_frame on


@dataclass(frozen=True)
class CollisionInterval:
    ped_id: int
    frame_start: int
    frame_end: int  # inclusive
    t_start: float
    t_end: float


@dataclass
class GroundTruth:
    """Synthetic-scenario ground truth: trajectories plus collision intervals."""

    t: np.ndarray  # (n,)
    ego: np.ndarray  # (n, 3); equals the pose stream's translations exactly
    peds: dict[int, PedTruth]
    intervals: list[CollisionInterval]
    radius_gt: float
    native_fps: int
    metadata: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# line plumbing


def _dump_text(objs) -> str:
    out = []
    for obj in objs:
        out.append(json.dumps(obj, separators=(",", ":"), allow_nan=False))
        out.append("\n")
    return "".join(out)


def _write_lines(path: str, objs) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dump_text(objs))


def _iter_text(text: str) -> Iterator[tuple[int, dict]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            yield lineno, json.loads(raw)
        except json.JSONDecodeError as exc:
            raise FormatError(f"malformed JSON ({exc.msg})", line=lineno) from exc


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _expect_header(text: str, kind: str) -> tuple[dict, Iterator[tuple[int, dict]]]:
    lines = _iter_text(text)
    try:
        lineno, obj = next(lines)
    except StopIteration:
        raise FormatError(f"empty input, expected a {kind} line", line=1) from None
    if obj.get("kind") != kind:
        raise FormatError(f"expected kind={kind!r}, got {obj.get('kind')!r}", line=lineno)
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {version!r}", line=lineno)
    return obj, lines


# ---------------------------------------------------------------------------
# recordings (.rec)


def _pose_to_obj(pose: Pose) -> dict:
    q = pose.rotation
    t = pose.translation
    return {"q": [q.w, q.x, q.y, q.z], "t": [t.x, t.y, t.z]}


def _pose_from_obj(obj: dict, lineno: int) -> Pose:
    try:
        q = obj["q"]
        t = obj["t"]
        return Pose(
            rotation=Quaternion(q[0], q[1], q[2], q[3]),
            translation=WorldPoint(t[0], t[1], t[2]),
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise FormatError(f"bad pose object: {exc}", line=lineno) from exc


def header_to_obj(header: RecordingHeader) -> dict:
    k = header.intrinsics
    return {
        "kind": "header",
        "format_version": header.format_version,
        "intrinsics": {
            "fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy,
            "width": k.width, "height": k.height,
        },
        "native_fps": header.native_fps,
        "metadata": header.metadata,
    }


def header_from_obj(obj: dict, lineno: int = 1) -> RecordingHeader:
    if obj.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {obj.get('format_version')!r}", line=lineno)
    try:
        ik = obj["intrinsics"]
        return RecordingHeader(
            intrinsics=CameraIntrinsics(
                fx=ik["fx"], fy=ik["fy"], cx=ik["cx"], cy=ik["cy"],
                width=ik["width"], height=ik["height"],
            ),
            native_fps=obj["native_fps"],
            metadata=obj.get("metadata", {}),
            format_version=obj["format_version"],
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"bad header: {exc}", line=lineno) from exc


def frame_to_obj(f: FrameRecord) -> dict:
    return {
        "kind": "frame",
        "frame": f.frame,
        "t": f.t,
        "pose": _pose_to_obj(f.pose),
        "detections": [
            {
                "bbox": list(d.bbox),
                "confidence": d.confidence,
                "center_depth": d.center_depth,
            }
            for d in f.detections
        ],
    }


def frame_from_obj(fo: dict, intrinsics: CameraIntrinsics, lineno: int = 0) -> FrameRecord:
    try:
        index = fo["frame"]
        t = fo["t"]
        pose = _pose_from_obj(fo["pose"], lineno)
        detections = []
        for do in fo["detections"]:
            depth = do["center_depth"]
            if depth is not None and not (isinstance(depth, (int, float)) and depth > 0):
                raise FormatError(f"bad center_depth {depth!r}", line=lineno)
            det = Detection(
                bbox=tuple(do["bbox"]),
                confidence=do["confidence"],
                center_depth=depth,
            )
            u_min, v_min, u_max, v_max = det.bbox
            if u_min < 0 or v_min < 0 or u_max > intrinsics.width or v_max > intrinsics.height:
                raise FormatError(f"bbox {det.bbox} outside image bounds", line=lineno)
            detections.append(det)
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad frame object: {exc}", line=lineno) from exc
    return FrameRecord(frame=index, t=t, pose=pose, detections=detections)


def recording_to_text(header: RecordingHeader, frames: list[FrameRecord]) -> str:
    def objs():
        yield header_to_obj(header)
        for f in frames:
            yield frame_to_obj(f)

    return _dump_text(objs())


def write_recording(path: str, header: RecordingHeader, frames: list[FrameRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(recording_to_text(header, frames))


def parse_recording(text: str) -> tuple[RecordingHeader, list[FrameRecord]]:
    obj, lines = _expect_header(text, "header")
    header = header_from_obj(obj)
    frames: list[FrameRecord] = []
    last_t = -math.inf
    for lineno, fo in lines:
        if fo.get("kind") != "frame":
            raise FormatError(f"unexpected kind {fo.get('kind')!r} in recording", line=lineno)
        frame = frame_from_obj(fo, header.intrinsics, lineno)
        if frame.frame != len(frames):
            raise FormatError(f"frame index {frame.frame}, expected {len(frames)}", line=lineno)
        if frame.t <= last_t:
            raise FormatError(f"timestamp {frame.t} not after {last_t}", line=lineno)
        last_t = frame.t
        frames.append(frame)
    return header, frames


def read_recording(path: str) -> tuple[RecordingHeader, list[FrameRecord]]:
    return parse_recording(_read_text(path))


# ---------------------------------------------------------------------------
# ground truth (.truth)


def truth_to_text(truth: GroundTruth) -> str:
    def objs():
        yield {
            "kind": "truth_header",
            "format_version": FORMAT_VERSION,
            "native_fps": truth.native_fps,
            "radius_gt": truth.radius_gt,
            "metadata": truth.metadata,
        }
        n = len(truth.t)
        for i in range(n):
            peds = {}
            for ped_id, ped in truth.peds.items():
                j = i - ped.spawn_frame
                if 0 <= j < len(ped.positions):
                    p = ped.positions[j]
                    peds[str(ped_id)] = [float(p[0]), float(p[1]), float(p[2])]
            e = truth.ego[i]
            yield {
                "kind": "truth_frame",
                "frame": i,
                "t": float(truth.t[i]),
                "ego": [float(e[0]), float(e[1]), float(e[2])],
                "peds": peds,
            }
        for iv in truth.intervals:
            yield {
                "kind": "interval",
                "ped": iv.ped_id,
                "frame_start": iv.frame_start,
                "frame_end": iv.frame_end,
                "t_start": iv.t_start,
                "t_end": iv.t_end,
            }

    return _dump_text(objs())


def write_truth(path: str, truth: GroundTruth) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(truth_to_text(truth))


def parse_truth(text: str) -> GroundTruth:
    obj, lines = _expect_header(text, "truth_header")
    native_fps = obj["native_fps"]
    radius_gt = obj["radius_gt"]
    metadata = obj.get("metadata", {})

    ts: list[float] = []
    egos: list[list[float]] = []
    ped_rows: dict[int, list[tuple[int, list[float]]]] = {}
    intervals: list[CollisionInterval] = []
    for lineno, fo in lines:
        kind = fo.get("kind")
        if kind == "truth_frame":
            if intervals:
                raise FormatError("truth_frame after interval section", line=lineno)
            if fo["frame"] != len(ts):
                raise FormatError(f"frame index {fo['frame']}, expected {len(ts)}", line=lineno)
            ts.append(fo["t"])
            egos.append(fo["ego"])
            for key, pos in fo["peds"].items():
                ped_rows.setdefault(int(key), []).append((fo["frame"], pos))
        elif kind == "interval":
            intervals.append(
                CollisionInterval(
                    ped_id=fo["ped"],
                    frame_start=fo["frame_start"],
                    frame_end=fo["frame_end"],
                    t_start=fo["t_start"],
                    t_end=fo["t_end"],
                )
            )
        else:
            raise FormatError(f"unexpected kind {kind!r} in truth file", line=lineno)

    peds: dict[int, PedTruth] = {}
    for ped_id, rows in ped_rows.items():
        frames = [f for f, _ in rows]
        if frames != list(range(frames[0], frames[0] + len(frames))):
            raise FormatError(f"pedestrian {ped_id} has non-contiguous frames")
        peds[ped_id] = PedTruth(
            ped_id=ped_id,
            spawn_frame=frames[0],
            positions=np.array([p for _, p in rows], dtype=float),
        )
    return GroundTruth(
        t=np.array(ts, dtype=float),
        ego=np.array(egos, dtype=float) if egos else np.zeros((0, 3)),
        peds=peds,
        intervals=intervals,
        radius_gt=radius_gt,
        native_fps=native_fps,
        metadata=metadata,
    )


def read_truth(path: str) -> GroundTruth:
    return parse_truth(_read_text(path))


# ---------------------------------------------------------------------------
# alerts (.alerts)


def event_to_obj(e: AlertEvent) -> dict:
    return {
        "kind": "event",
        "t": e.t,
        "track_id": e.track_id,
        "event": e.kind,
        "tier": e.tier,
        "ttc": e.ttc,
        "min_distance": e.min_distance,
    }


def alerts_to_text(events: list[AlertEvent], metadata: dict | None = None) -> str:
    def objs():
        yield {
            "kind": "alerts_header",
            "format_version": FORMAT_VERSION,
            "metadata": metadata or {},
        }
        for e in events:
            yield event_to_obj(e)

    return _dump_text(objs())


def write_alerts(path: str, events: list[AlertEvent], metadata: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(alerts_to_text(events, metadata))


def parse_alerts(text: str) -> tuple[list[AlertEvent], dict]:
    obj, lines = _expect_header(text, "alerts_header")
    metadata = obj.get("metadata", {})
    events: list[AlertEvent] = []
    for lineno, eo in lines:
        if eo.get("kind") != "event":
            raise FormatError(f"unexpected kind {eo.get('kind')!r} in alerts file", line=lineno)
        try:
            events.append(
                AlertEvent(
                    t=eo["t"],
                    track_id=eo["track_id"],
                    kind=eo["event"],
                    tier=eo["tier"],
                    ttc=eo["ttc"],
                    min_distance=eo["min_distance"],
                )
            )
        except KeyError as exc:
            raise FormatError(f"bad event object: missing {exc}", line=lineno) from exc
    return events, metadata


def read_alerts(path: str) -> tuple[list[AlertEvent], dict]:
    return parse_alerts(_read_text(path))


# ---------------------------------------------------------------------------
# prediction dump (.pred)


@dataclass(frozen=True)
class TrackSampleRecord:
    """One downsampled sample as seen by the pipeline, for plots and metrics."""

    t: float
    track_id: int
    raw: tuple[float, float] | None  # horizontal, None for a gap window
    smoothed: tuple[float, float] | None
    vertical: float | None


@dataclass(frozen=True)
class PredictionRecord:
    t: float  # timestamp of the last observed sample
    track_id: int
    points: list[tuple[float, float]]


@dataclass(frozen=True)
class RunSummary:
    frames: int
    latency_p50_ms: float
    latency_p99_ms: float
    latency_count: int
    max_concurrent_tracks: int
    queue_depth_max: int
    budget_violations: int


@dataclass
class PredDump:
    samples: list[TrackSampleRecord]
    predictions: list[PredictionRecord]
    summary: RunSummary | None
    metadata: dict = field(default_factory=dict)


def pred_to_text(dump: PredDump) -> str:
    def objs():
        yield {
            "kind": "pred_header",
            "format_version": FORMAT_VERSION,
            "metadata": dump.metadata,
        }
        events = [("s", s.t, i, s) for i, s in enumerate(dump.samples)]
        events += [("p", p.t, i, p) for i, p in enumerate(dump.predictions)]
        # stable time order; samples before predictions at equal timestamps
        events.sort(key=lambda e: (e[1], e[0] != "s", e[2]))
        for kind, _, _, rec in events:
            if kind == "s":
                yield {
                    "kind": "track_sample",
                    "t": rec.t,
                    "track_id": rec.track_id,
                    "raw": list(rec.raw) if rec.raw is not None else None,
                    "smoothed": list(rec.smoothed) if rec.smoothed is not None else None,
                    "vertical": rec.vertical,
                }
            else:
                yield {
                    "kind": "prediction",
                    "t": rec.t,
                    "track_id": rec.track_id,
                    "points": [list(p) for p in rec.points],
                }
        if dump.summary is not None:
            s = dump.summary
            yield {
                "kind": "run_summary",
                "frames": s.frames,
                "latency_p50_ms": s.latency_p50_ms,
                "latency_p99_ms": s.latency_p99_ms,
                "latency_count": s.latency_count,
                "max_concurrent_tracks": s.max_concurrent_tracks,
                "queue_depth_max": s.queue_depth_max,
                "budget_violations": s.budget_violations,
            }

    return _dump_text(objs())


def write_pred(path: str, dump: PredDump) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(pred_to_text(dump))


def parse_pred(text: str) -> PredDump:
    obj, lines = _expect_header(text, "pred_header")
    dump = PredDump(samples=[], predictions=[], summary=None, metadata=obj.get("metadata", {}))
    for lineno, o in lines:
        kind = o.get("kind")
        if kind == "track_sample":
            dump.samples.append(
                TrackSampleRecord(
                    t=o["t"],
                    track_id=o["track_id"],
                    raw=tuple(o["raw"]) if o["raw"] is not None else None,
                    smoothed=tuple(o["smoothed"]) if o["smoothed"] is not None else None,
                    vertical=o["vertical"],
                )
            )
        elif kind == "prediction":
            dump.predictions.append(
                PredictionRecord(
                    t=o["t"],
                    track_id=o["track_id"],
                    points=[tuple(p) for p in o["points"]],
                )
            )
        elif kind == "run_summary":
            dump.summary = RunSummary(
                frames=o["frames"],
                latency_p50_ms=o["latency_p50_ms"],
                latency_p99_ms=o["latency_p99_ms"],
                latency_count=o["latency_count"],
                max_concurrent_tracks=o["max_concurrent_tracks"],
                queue_depth_max=o["queue_depth_max"],
                budget_violations=o["budget_violations"],
            )
        else:
            raise FormatError(f"unexpected kind {kind!r} in pred file", line=lineno)
    return dump


def read_pred(path: str) -> PredDump:
    return parse_pred(_read_text(path))


# ---------------------------------------------------------------------------
# metrics (.metrics): a single structured JSON document

METRIC_KEYS = (
    "ade",
    "fde",
    "precision",
    "recall",
    "f1",
    "equivalence_residual_max",
    "equivalence_residual_mean",
    "latency_p50_ms",
    "latency_p99_ms",
)
COUNT_KEYS = ("tracks", "predictions", "alerts", "gt_intervals")


def metrics_to_text(report: dict) -> str:
    """Render a schema-complete metrics document (missing keys become null)."""
    doc = {"format_version": FORMAT_VERSION}
    for key in METRIC_KEYS:
        doc[key] = report.get(key)
    doc["counts"] = {key: report.get("counts", {}).get(key) for key in COUNT_KEYS}
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_metrics(path: str, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(metrics_to_text(report))


def parse_metrics(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed metrics document ({exc.msg})", line=exc.lineno) from exc
    if doc.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {doc.get('format_version')!r}")
    return doc


def read_metrics(path: str) -> dict:
    return parse_metrics(_read_text(path))
