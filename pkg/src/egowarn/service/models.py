"""Request/response schemas for the HTTP service.

File-shaped payloads (recordings, truth, alerts, predictions, metrics) travel
as the exact text of the corresponding file format, so clients can write them
to disk untouched and the wire stays bit-faithful.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class SimulateRequest(BaseModel):
    preset: str = "easy"
    seed: int = 0
    duration: float | None = None
    spec: dict | None = None  # custom scenario document (overrides preset)
    overrides: dict[str, str] = Field(default_factory=dict)  # config keys


class SimulateResponse(BaseModel):
    recording: str
    truth: str
    frames: int
    pedestrians: int
    collision_intervals: int


class RunRequest(BaseModel):
    recording: str
    config_text: str | None = None  # full .cfg content
    overrides: dict[str, str] = Field(default_factory=dict)


class RunResponse(BaseModel):
    alerts: str
    predictions: str
    events: int
    frames: int
    latency_p50_ms: float
    latency_p99_ms: float
    max_concurrent_tracks: int


class StreamRequest(RunRequest):
    rate: float = 1.0
    budget_ms: float | None = None


class EvaluateRequest(BaseModel):
    truth: str
    alerts: str
    predictions: str
    equivalence: bool = False  # also compute the equivalence residuals
    config_text: str | None = None
    overrides: dict[str, str] = Field(default_factory=dict)


class EvaluateResponse(BaseModel):
    metrics: str
    report: dict


class InspectRequest(BaseModel):
    recording: str


class InspectResponse(BaseModel):
    frames: int
    duration: float
    native_fps: int
    metadata: dict
    detections: int
    track_estimate: int


class SessionCreateRequest(BaseModel):
    header: dict  # the .rec header object
    config_text: str | None = None
    overrides: dict[str, str] = Field(default_factory=dict)


class SessionCreateResponse(BaseModel):
    session_id: str


class SessionFramesRequest(BaseModel):
    frames: list[dict]  # .rec frame objects


class SessionFramesResponse(BaseModel):
    events: list[dict]  # .alerts event objects


class SessionCloseResponse(BaseModel):
    events: list[dict]
    alerts: str
    summary: dict
