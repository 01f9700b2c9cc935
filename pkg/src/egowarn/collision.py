"""Collision assessment on predicted semi-local trajectories.

A warning exists when the predicted horizontal distance to the semi-local
origin (where the ego agent sits, by construction) drops below the safety
radius at any future step. The alert stream turns per-tick assessments into
deduplicated events: one event when an alert appears, one on escalation to
urgent, and one clear event after a hysteresis period without alerts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geometry import FrameTagError
from .predict import SEMILOCAL, PredictedTrajectory

WARN = "warn"
URGENT = "urgent"

EVENT_ALERT = "alert"
EVENT_ESCALATE = "escalate"
EVENT_CLEAR = "clear"


@dataclass
class CollisionConfig:
    radius: float = 0.5  # meters; strict inequality, d < radius
    urgent_ttc: float = 1.6  # seconds; at or below this the tier is urgent
    clear_frames: int = 8  # alert-free assessments before a clear event


@dataclass(frozen=True)
class CollisionAlert:
    track_id: int
    first_step: int  # 1-based horizon index of the first incursion
    time_to_collision: float  # seconds, = step * first_step
    min_distance: float  # min over the horizon of horizontal distance
    tier: str


def assess(
    pred: PredictedTrajectory, track_id: int, cfg: CollisionConfig
) -> CollisionAlert | None:
    """Alert iff the predicted trajectory enters the safety radius."""
    if pred.frame != SEMILOCAL:
        raise FrameTagError(f"collision assessment needs a semi-local prediction, got {pred.frame!r}")
    first_step = None
    min_distance = math.inf
    for i, (x, y) in enumerate(pred.points, start=1):
        d = math.hypot(x, y)
        if d < min_distance:
            min_distance = d
        if first_step is None and d < cfg.radius:
            first_step = i
    if first_step is None:
        return None
    ttc = first_step * pred.step
    tier = URGENT if ttc <= cfg.urgent_ttc else WARN
    return CollisionAlert(
        track_id=track_id,
        first_step=first_step,
        time_to_collision=ttc,
        min_distance=min_distance,
        tier=tier,
    )


@dataclass(frozen=True)
class AlertEvent:
    t: float
    track_id: int
    kind: str  # alert | escalate | clear
    tier: str | None  # None for clear events
    ttc: float | None
    min_distance: float | None


@dataclass
class _TrackAlertState:
    active: bool = False
    announced_tier: str | None = None
    clear_count: int = 0
    last_t: float = -math.inf


@dataclass
class AlertStream:
    """Per-track alert deduplication and hysteresis; owned by one driver."""

    cfg: CollisionConfig
    _states: dict[int, _TrackAlertState] = field(default_factory=dict)

    def update(
        self, track_id: int, t: float, alert: CollisionAlert | None
    ) -> list[AlertEvent]:
        state = self._states.setdefault(track_id, _TrackAlertState())
        if t < state.last_t:
            raise ValueError(f"assessments for track {track_id} went back in time")
        state.last_t = t
        if alert is not None:
            state.clear_count = 0
            if not state.active:
                state.active = True
                state.announced_tier = alert.tier
                return [self._event(t, track_id, EVENT_ALERT, alert)]
            if alert.tier == URGENT and state.announced_tier == WARN:
                state.announced_tier = URGENT
                return [self._event(t, track_id, EVENT_ESCALATE, alert)]
            return []
        if state.active:
            state.clear_count += 1
            if state.clear_count >= self.cfg.clear_frames:
                self._states[track_id] = _TrackAlertState(last_t=t)
                return [AlertEvent(t, track_id, EVENT_CLEAR, None, None, None)]
        return []

    def close_track(self, track_id: int, t: float) -> list[AlertEvent]:
        """Emit a clear for a track that is going away while alerted."""
        state = self._states.pop(track_id, None)
        if state is not None and state.active:
            return [AlertEvent(t, track_id, EVENT_CLEAR, None, None, None)]
        return []

    @staticmethod
    def _event(t: float, track_id: int, kind: str, alert: CollisionAlert) -> AlertEvent:
        return AlertEvent(
            t=t,
            track_id=track_id,
            kind=kind,
            tier=alert.tier,
            ttc=alert.time_to_collision,
            min_distance=alert.min_distance,
        )
