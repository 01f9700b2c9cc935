"""Round-trip identity and corruption handling for every file format."""

import json
import math

import numpy as np
import pytest

from egowarn import formats
from egowarn.collision import AlertEvent
from egowarn.formats import (
    FORMAT_VERSION,
    CollisionInterval,
    FormatError,
    FrameRecord,
    GroundTruth,
    PedTruth,
    PredDump,
    PredictionRecord,
    RecordingHeader,
    RunSummary,
    TrackSampleRecord,
    read_alerts,
    read_metrics,
    read_pred,
    read_recording,
    read_truth,
    write_alerts,
    write_metrics,
    write_pred,
    write_recording,
    write_truth,
)
from egowarn.geometry import CameraIntrinsics, Pose, Quaternion, WorldPoint
from egowarn.tracking import Detection

K = CameraIntrinsics(fx=960.0, fy=960.0, cx=960.0, cy=540.0, width=1920, height=1080)
HEADER = RecordingHeader(intrinsics=K, native_fps=30, metadata={"preset": "easy", "seed": 3})


def random_frames(n, rng):
    frames = []
    for k in range(n):
        raw = rng.normal(size=4)
        raw /= np.linalg.norm(raw)
        pose = Pose(Quaternion(*raw), WorldPoint(*rng.uniform(-10, 10, size=3)))
        dets = []
        for _ in range(int(rng.integers(0, 4))):
            cu = float(rng.uniform(100, 1800))
            cv = float(rng.uniform(100, 900))
            w, h = float(rng.uniform(20, 80)), float(rng.uniform(50, 170))
            depth = float(rng.uniform(0.6, 24.0)) if rng.random() > 0.2 else None
            bbox = (
                max(0.0, cu - w), max(0.0, cv - h),
                min(1920.0, cu + w), min(1080.0, cv + h),
            )
            dets.append(
                Detection(
                    bbox=bbox,
                    confidence=float(rng.uniform(0.05, 0.99)),
                    center_depth=depth,
                )
            )
        frames.append(FrameRecord(frame=k, t=k / 30.0, pose=pose, detections=dets))
    return frames


class TestRecording:
    def test_empty_recording_roundtrips(self, tmp_path):
        path = str(tmp_path / "empty.rec")
        write_recording(path, HEADER, [])
        header, frames = read_recording(path)
        assert frames == []
        assert header == HEADER

    def test_hundred_frames_bit_exact(self, tmp_path):
        rng = np.random.default_rng(12)
        frames = random_frames(100, rng)
        p1 = str(tmp_path / "a.rec")
        p2 = str(tmp_path / "b.rec")
        write_recording(p1, HEADER, frames)
        header, back = read_recording(p1)
        write_recording(p2, header, back)
        assert open(p1, "rb").read() == open(p2, "rb").read()
        assert back == frames

    def test_truncated_line_names_the_line(self, tmp_path):
        path = str(tmp_path / "trunc.rec")
        write_recording(path, HEADER, random_frames(5, np.random.default_rng(0)))
        content = open(path).read().splitlines()
        content[-1] = content[-1][: len(content[-1]) // 2]
        open(path, "w").write("\n".join(content) + "\n")
        with pytest.raises(FormatError) as err:
            read_recording(path)
        assert err.value.line == 6
        assert "line 6" in str(err.value)

    def test_version_mismatch(self, tmp_path):
        path = str(tmp_path / "vers.rec")
        write_recording(path, HEADER, [])
        obj = json.loads(open(path).readline())
        obj["format_version"] = 99
        open(path, "w").write(json.dumps(obj) + "\n")
        with pytest.raises(FormatError):
            read_recording(path)

    def test_non_monotone_timestamps_rejected(self, tmp_path):
        path = str(tmp_path / "mono.rec")
        frames = random_frames(3, np.random.default_rng(1))
        frames[2] = FrameRecord(frame=2, t=frames[1].t, pose=frames[2].pose, detections=[])
        write_recording(path, HEADER, frames)
        with pytest.raises(FormatError) as err:
            read_recording(path)
        assert err.value.line == 4

    def test_non_contiguous_frame_index_rejected(self, tmp_path):
        path = str(tmp_path / "idx.rec")
        frames = random_frames(3, np.random.default_rng(2))
        frames[2] = FrameRecord(frame=5, t=frames[2].t, pose=frames[2].pose, detections=[])
        write_recording(path, HEADER, frames)
        with pytest.raises(FormatError):
            read_recording(path)

    def test_bbox_outside_bounds_rejected(self, tmp_path):
        path = str(tmp_path / "bbox.rec")
        frames = [
            FrameRecord(
                frame=0,
                t=0.0,
                pose=Pose(Quaternion.identity(), WorldPoint(0, 0, 0)),
                detections=[Detection(bbox=(-5.0, 0.0, 50.0, 50.0), confidence=0.9, center_depth=3.0)],
            )
        ]
        write_recording(path, HEADER, frames)
        with pytest.raises(FormatError):
            read_recording(path)


class TestTruth:
    def make_truth(self):
        n = 30
        t = np.arange(n) / 30.0
        ego = np.stack([0.8 * t, np.zeros(n), np.full(n, 1.7)], axis=1)
        peds = {
            0: PedTruth(ped_id=0, spawn_frame=0, positions=np.stack(
                [12.0 - 1.2 * t, np.zeros(n), np.full(n, 0.9)], axis=1)),
            3: PedTruth(ped_id=3, spawn_frame=10, positions=np.stack(
                [np.full(n - 10, 5.0), 2.0 - t[: n - 10], np.full(n - 10, 0.9)], axis=1)),
        }
        intervals = [CollisionInterval(ped_id=0, frame_start=20, frame_end=25, t_start=t[20], t_end=t[25])]
        return GroundTruth(
            t=t, ego=ego, peds=peds, intervals=intervals, radius_gt=0.5,
            native_fps=30, metadata={"preset": "easy"},
        )

    def test_roundtrip(self, tmp_path):
        truth = self.make_truth()
        path = str(tmp_path / "x.truth")
        write_truth(path, truth)
        back = read_truth(path)
        np.testing.assert_array_equal(back.t, truth.t)
        np.testing.assert_array_equal(back.ego, truth.ego)
        assert set(back.peds) == {0, 3}
        for pid in back.peds:
            assert back.peds[pid].spawn_frame == truth.peds[pid].spawn_frame
            np.testing.assert_array_equal(back.peds[pid].positions, truth.peds[pid].positions)
        assert back.intervals == truth.intervals
        assert back.radius_gt == 0.5

    def test_write_is_deterministic(self, tmp_path):
        truth = self.make_truth()
        p1, p2 = str(tmp_path / "a.truth"), str(tmp_path / "b.truth")
        write_truth(p1, truth)
        write_truth(p2, truth)
        assert open(p1, "rb").read() == open(p2, "rb").read()


class TestAlerts:
    def test_zero_alerts_header_only(self, tmp_path):
        path = str(tmp_path / "x.alerts")
        write_alerts(path, [], metadata={"seed": 1})
        events, metadata = read_alerts(path)
        assert events == [] and metadata == {"seed": 1}
        assert len(open(path).read().splitlines()) == 1

    def test_escalation_round_trips_in_order(self, tmp_path):
        events = [
            AlertEvent(t=2.0, track_id=1, kind="alert", tier="warn", ttc=3.2, min_distance=0.1),
            AlertEvent(t=3.2, track_id=1, kind="escalate", tier="urgent", ttc=1.2, min_distance=0.0),
            AlertEvent(t=8.0, track_id=1, kind="clear", tier=None, ttc=None, min_distance=None),
        ]
        path = str(tmp_path / "x.alerts")
        write_alerts(path, events)
        back, _ = read_alerts(path)
        assert back == events


class TestPred:
    def test_roundtrip(self, tmp_path):
        dump = PredDump(
            samples=[
                TrackSampleRecord(t=0.18, track_id=1, raw=(3.0, 0.1), smoothed=(3.0, 0.1), vertical=-0.8),
                TrackSampleRecord(t=0.58, track_id=1, raw=None, smoothed=(2.8, 0.1), vertical=-0.8),
            ],
            predictions=[PredictionRecord(t=0.58, track_id=1, points=[(2.5, 0.1), (2.2, 0.1)])],
            summary=RunSummary(
                frames=60, latency_p50_ms=0.4, latency_p99_ms=1.2, latency_count=60,
                max_concurrent_tracks=2, queue_depth_max=0, budget_violations=0,
            ),
            metadata={"config": "default"},
        )
        path = str(tmp_path / "x.pred")
        write_pred(path, dump)
        back = read_pred(path)
        assert back == dump

    def test_lines_are_time_ordered(self, tmp_path):
        dump = PredDump(
            samples=[TrackSampleRecord(t=float(t), track_id=1, raw=(0.0, 0.0), smoothed=(0.0, 0.0), vertical=0.0) for t in (3, 1)],
            predictions=[PredictionRecord(t=2.0, track_id=1, points=[(0.0, 0.0)])],
            summary=None,
        )
        path = str(tmp_path / "x.pred")
        write_pred(path, dump)
        ts = [json.loads(line)["t"] for line in open(path).read().splitlines()[1:]]
        assert ts == sorted(ts)


class TestMetrics:
    def test_schema_totality_with_nulls(self, tmp_path):
        path = str(tmp_path / "x.metrics")
        write_metrics(path, {"ade": 0.25, "counts": {"tracks": 4}})
        doc = read_metrics(path)
        for key in formats.METRIC_KEYS:
            assert key in doc
        assert doc["ade"] == 0.25
        assert doc["fde"] is None
        assert doc["precision"] is None
        for key in formats.COUNT_KEYS:
            assert key in doc["counts"]
        assert doc["counts"]["tracks"] == 4
        assert doc["counts"]["alerts"] is None

    def test_single_document(self, tmp_path):
        path = str(tmp_path / "x.metrics")
        write_metrics(path, {})
        doc = json.load(open(path))
        assert doc["format_version"] == FORMAT_VERSION

    def test_nan_never_written(self, tmp_path):
        path = str(tmp_path / "x.metrics")
        with pytest.raises(ValueError):
            write_metrics(path, {"ade": math.nan})
