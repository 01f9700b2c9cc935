"""Association, track lifecycle and pixel-space box prediction."""

import pytest

from egowarn.geometry import CameraIntrinsics, Pose, Quaternion, WorldPoint
from egowarn.tracking import (
    Detection,
    Track,
    Tracker,
    TrackerConfig,
    TrackingError,
    TrackState,
    iou,
    predict_box,
)

K = CameraIntrinsics(fx=960.0, fy=960.0, cx=960.0, cy=540.0, width=1920, height=1080)
POSE = Pose(Quaternion.identity(), WorldPoint(0.0, 0.0, 1.7))
DT = 1.0 / 30.0


def det(cu, cv, w=40.0, h=120.0, conf=0.9, depth=5.0):
    return Detection(
        bbox=(cu - w / 2, cv - h / 2, cu + w / 2, cv + h / 2),
        confidence=conf,
        center_depth=depth,
    )


def advance(tracker, frame_dets, start=0):
    steps = []
    for i, dets in enumerate(frame_dets):
        steps.append(tracker.associate(dets, (start + i) * DT, POSE))
    return steps


class TestIou:
    def test_identical_boxes(self):
        assert iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0

    def test_disjoint_boxes(self):
        assert iou((0, 0, 10, 10), (20, 20, 30, 30)) == 0.0

    def test_half_overlap(self):
        # 5x10 intersection over 10x10 + 10x10 - 50 union
        assert iou((0, 0, 10, 10), (5, 0, 15, 10)) == pytest.approx(50 / 150)


class TestPredictBox:
    def test_single_sample_returns_last_bbox(self):
        track = Track(track_id=1, last_bbox=(10, 10, 20, 20), last_t=0.0)
        assert predict_box(track) == (10, 10, 20, 20)

    def test_linear_extrapolation_one_frame(self):
        track = Track(
            track_id=1,
            last_bbox=(105, 95, 115, 105),  # center (110, 100)
            last_t=DT,
            prev_center=(100.0, 100.0),
            prev_t=0.0,
        )
        box = predict_box(track)
        cu = (box[0] + box[2]) / 2
        cv = (box[1] + box[3]) / 2
        assert cu == pytest.approx(120.0)
        assert cv == pytest.approx(100.0)

    def test_stationary_center_unchanged(self):
        track = Track(
            track_id=1,
            last_bbox=(95, 95, 105, 105),
            last_t=DT,
            prev_center=(100.0, 100.0),
            prev_t=0.0,
        )
        assert predict_box(track) == (95, 95, 105, 105)

    def test_empty_track_errors(self):
        with pytest.raises(TrackingError):
            predict_box(Track(track_id=1))

    def test_predict_to_explicit_time(self):
        track = Track(
            track_id=1,
            last_bbox=(105, 95, 115, 105),
            last_t=DT,
            prev_center=(100.0, 100.0),
            prev_t=0.0,
        )
        box = predict_box(track, t=DT + 3 * DT)
        assert (box[0] + box[2]) / 2 == pytest.approx(140.0)


class TestAssociation:
    def test_single_unambiguous_match_extends_track(self):
        tracker = Tracker(TrackerConfig(), K)
        steps = advance(tracker, [[det(500, 500)], [det(503, 500)]])
        assert len(steps[1].active) == 1
        track = steps[1].active[0]
        assert track.hits == 2
        assert len(track.samples) == 2

    def test_two_tracks_two_detections_greedy(self):
        # IoU matrix [[0.8, 0.1], [0.1, 0.7]]: greedy pairs (t0,d0), (t1,d1),
        # which matches the (enumerated) optimal assignment
        tracker = Tracker(TrackerConfig(), K)
        tracker.associate([det(300, 300), det(900, 300)], 0.0, POSE)
        ids_before = sorted(t.track_id for t in tracker.tracks)
        step = tracker.associate([det(302, 300), det(903, 300)], DT, POSE)
        by_id = {t.track_id: t for t in step.active}
        assert sorted(by_id) == ids_before
        assert by_id[1].last_bbox[0] == pytest.approx(302 - 20)
        assert by_id[2].last_bbox[0] == pytest.approx(903 - 20)

    def test_track_lost_after_max_misses(self):
        cfg = TrackerConfig(max_misses=5)
        tracker = Tracker(cfg, K)
        advance(tracker, [[det(500, 500)]])
        lost = []
        for i in range(1, 6):
            lost += tracker.associate([], i * DT, POSE).newly_lost
        assert len(lost) == 1
        assert lost[0].state is TrackState.LOST
        assert tracker.tracks == []

    def test_confirmation_after_three_hits(self):
        tracker = Tracker(TrackerConfig(confirm_hits=3), K)
        states = []
        for i, dets in enumerate([[det(500, 500)], [det(502, 500)], [det(504, 500)]]):
            step = tracker.associate(dets, i * DT, POSE)
            states.append(step.active[0].state)
        assert states == [TrackState.TENTATIVE, TrackState.TENTATIVE, TrackState.CONFIRMED]

    def test_low_confidence_never_spawns(self):
        tracker = Tracker(TrackerConfig(), K)
        step = tracker.associate([det(500, 500, conf=0.3)], 0.0, POSE)
        assert step.active == []

    def test_low_confidence_keeps_track_alive(self):
        tracker = Tracker(TrackerConfig(), K)
        advance(tracker, [[det(500, 500)]])
        step = tracker.associate([det(502, 500, conf=0.3)], DT, POSE)
        track = step.active[0]
        assert track.misses == 0
        assert track.hits == 2

    def test_second_pass_prefers_unmatched_tracks(self):
        cfg = TrackerConfig()
        tracker = Tracker(cfg, K)
        tracker.associate([det(300, 300), det(340, 300)], 0.0, POSE)
        # one high detection matches track A; the low one must go to track B
        step = tracker.associate([det(300, 300, conf=0.9), det(340, 300, conf=0.2)], DT, POSE)
        assert all(t.misses == 0 for t in step.active)

    def test_depthless_detection_adds_no_sample(self):
        tracker = Tracker(TrackerConfig(), K)
        advance(tracker, [[det(500, 500)]])
        step = tracker.associate([det(502, 500, depth=None)], DT, POSE)
        track = step.active[0]
        assert track.hits == 2
        assert len(track.samples) == 1

    def test_non_monotonic_frame_rejected(self):
        tracker = Tracker(TrackerConfig(), K)
        tracker.associate([], 1.0, POSE)
        with pytest.raises(TrackingError):
            tracker.associate([], 1.0, POSE)

    def test_ids_strictly_increasing_never_reused(self):
        tracker = Tracker(TrackerConfig(max_misses=2), K)
        tracker.associate([det(500, 500)], 0.0, POSE)
        tracker.associate([], DT, POSE)
        tracker.associate([], 2 * DT, POSE)  # track 1 lost
        step = tracker.associate([det(500, 500)], 3 * DT, POSE)
        assert step.active[0].track_id == 2

    def test_no_double_assignment(self):
        tracker = Tracker(TrackerConfig(), K)
        tracker.associate([det(500, 500), det(530, 500)], 0.0, POSE)
        step = tracker.associate([det(515, 500)], DT, POSE)
        matched = [t for t in step.active if t.misses == 0]
        assert len(matched) == 1

    def test_samples_carry_backprojected_center(self):
        tracker = Tracker(TrackerConfig(), K)
        step = tracker.associate([det(960, 540, depth=4.0)], 0.0, POSE)
        sample = step.active[0].samples[0]
        assert sample.point.as_tuple() == (0.0, 0.0, 4.0)

    def test_state_transitions_only_forward(self):
        cfg = TrackerConfig(confirm_hits=2, max_misses=3)
        tracker = Tracker(cfg, K)
        advance(tracker, [[det(500, 500)], [det(502, 500)]])
        track = tracker.tracks[0]
        assert track.state is TrackState.CONFIRMED
        for i in range(2, 5):
            tracker.associate([], i * DT, POSE)
        assert track.state is TrackState.LOST
