"""Collision assessment and the deduplicated alert stream."""

import numpy as np
import pytest

from egowarn.collision import (
    EVENT_ALERT,
    EVENT_CLEAR,
    EVENT_ESCALATE,
    URGENT,
    WARN,
    AlertStream,
    CollisionConfig,
    assess,
)
from egowarn.geometry import FrameTagError
from egowarn.predict import SEMILOCAL, WORLD, PredictedTrajectory

CFG = CollisionConfig()


def traj(points, frame=SEMILOCAL, t0=0.0):
    return PredictedTrajectory(points=np.asarray(points, dtype=float), frame=frame, t0=t0, step=0.4)


def approach():
    # x_i = 3 - 0.5 i for i = 1..12
    return traj([(3.0 - 0.5 * i, 0.0) for i in range(1, 13)])


class TestAssess:
    def test_head_on_approach(self):
        alert = assess(approach(), track_id=7, cfg=CFG)
        # d_5 = 0.5 is not < 0.5 (strict); d_6 = 0.0 is
        assert alert.first_step == 6
        assert alert.time_to_collision == pytest.approx(2.4)
        assert alert.min_distance == pytest.approx(0.0)
        assert alert.tier == WARN
        assert alert.track_id == 7

    def test_receding_no_alert(self):
        pts = [(1.0 + 0.5 * i, 0.0) for i in range(1, 13)]
        assert assess(traj(pts), 1, CFG) is None

    def test_parallel_pass_at_two_meters(self):
        pts = [(3.0 - 0.5 * i, 2.0) for i in range(1, 13)]
        assert assess(traj(pts), 1, CFG) is None

    def test_urgent_when_ttc_at_or_below_threshold(self):
        pts = [(0.1 * i, 0.0) for i in range(1, 13)]  # inside radius at i=1
        alert = assess(traj(pts), 1, CFG)
        assert alert.first_step == 1
        assert alert.tier == URGENT
        # boundary: ttc == urgent_ttc is still urgent
        pts = [(10.0, 10.0)] * 3 + [(0.0, 0.0)] + [(10.0, 10.0)] * 8
        alert = assess(traj(pts), 1, CFG)
        assert alert.time_to_collision == pytest.approx(1.6)
        assert alert.tier == URGENT

    def test_world_frame_rejected(self):
        with pytest.raises(FrameTagError):
            assess(traj([(0.0, 0.0)], frame=WORLD), 1, CFG)

    def test_radius_monotonicity(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            pts = rng.uniform(-3, 3, size=(12, 2))
            small = assess(traj(pts), 1, CollisionConfig(radius=0.3))
            large = assess(traj(pts), 1, CollisionConfig(radius=0.9))
            if small is not None:
                assert large is not None
                assert large.first_step <= small.first_step

    def test_min_distance_is_horizon_minimum(self):
        pts = [(2.0, 0.0)] * 6 + [(0.7, 0.0)] + [(2.0, 0.0)] * 5
        alert = assess(traj(pts), 1, CollisionConfig(radius=1.0))
        assert alert.min_distance == pytest.approx(0.7)
        assert alert.first_step == 7


class TestAlertStream:
    def step(self, stream, k, alert):
        return stream.update(1, k * 0.4, alert)

    def test_persistent_alert_emits_once(self):
        stream = AlertStream(CFG)
        alert = assess(approach(), 1, CFG)
        events = []
        for k in range(10):
            events += self.step(stream, k, alert)
        assert len(events) == 1
        assert events[0].kind == EVENT_ALERT and events[0].tier == WARN

    def test_escalation_emits_second_event(self):
        stream = AlertStream(CFG)
        warn_alert = assess(approach(), 1, CFG)
        pts = [(0.1, 0.0)] + [(3.0, 3.0)] * 11
        urgent_alert = assess(traj(pts), 1, CFG)
        events = self.step(stream, 0, warn_alert)
        events += self.step(stream, 1, warn_alert)
        events += self.step(stream, 2, urgent_alert)
        events += self.step(stream, 3, urgent_alert)
        assert [e.kind for e in events] == [EVENT_ALERT, EVENT_ESCALATE]
        assert events[1].tier == URGENT

    def test_hysteresis_clear_and_realert(self):
        stream = AlertStream(CFG)
        alert = assess(approach(), 1, CFG)
        events = self.step(stream, 0, alert)
        for k in range(1, 9):  # 8 alert-free assessments
            events += self.step(stream, k, alert=None)
        events += self.step(stream, 9, alert)
        assert [e.kind for e in events] == [EVENT_ALERT, EVENT_CLEAR, EVENT_ALERT]

    def test_short_dropout_does_not_clear(self):
        stream = AlertStream(CFG)
        alert = assess(approach(), 1, CFG)
        events = self.step(stream, 0, alert)
        for k in range(1, 8):  # 7 < clear_frames
            events += self.step(stream, k, alert=None)
        events += self.step(stream, 8, alert)
        assert [e.kind for e in events] == [EVENT_ALERT]

    def test_no_event_when_never_alerted(self):
        stream = AlertStream(CFG)
        for k in range(20):
            assert self.step(stream, k, alert=None) == []
        assert stream.close_track(1, 8.0) == []

    def test_close_track_emits_clear_when_active(self):
        stream = AlertStream(CFG)
        alert = assess(approach(), 1, CFG)
        self.step(stream, 0, alert)
        events = stream.close_track(1, 0.4)
        assert [e.kind for e in events] == [EVENT_CLEAR]

    def test_urgent_first_never_escalates(self):
        stream = AlertStream(CFG)
        pts = [(0.1, 0.0)] + [(3.0, 3.0)] * 11
        urgent_alert = assess(traj(pts), 1, CFG)
        events = self.step(stream, 0, urgent_alert)
        events += self.step(stream, 1, urgent_alert)
        assert [e.kind for e in events] == [EVENT_ALERT]
        assert events[0].tier == URGENT

    def test_tracks_are_independent(self):
        stream = AlertStream(CFG)
        alert = assess(approach(), 1, CFG)
        e1 = stream.update(1, 0.0, alert)
        e2 = stream.update(2, 0.0, alert)
        assert len(e1) == 1 and len(e2) == 1
        assert {e1[0].track_id, e2[0].track_id} == {1, 2}

    def test_time_going_backwards_rejected(self):
        stream = AlertStream(CFG)
        stream.update(1, 1.0, None)
        with pytest.raises(ValueError):
            stream.update(1, 0.5, None)
