"""HTTP service wrapping the engine.

Stateless endpoints mirror the CLI commands (simulate/run/stream/evaluate/
inspect) and exchange file contents as text. The stateful /sessions API is
the live-ingestion surface: create a session from a recording header, feed
frames as they arrive, collect alert events per request.

/stream responds with NDJSON: one alert-event object per line as the replay
produces it, then a single stream_result object carrying the full outputs.
"""

from __future__ import annotations

import itertools
import json
import queue
import threading

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, StreamingResponse

from .. import __version__, evaluate, formats, pipeline, scenario
from ..config import ConfigError, resolve_config
from ..geometry import GeometryError
from ..predict import InsufficientHistoryError, build_predictor
from ..scenario import NoiseConfig, ScenarioError
from ..tracking import TrackingError
from . import models

app = FastAPI(title="egowarn", version=__version__)

_INPUT_ERRORS = (
    formats.FormatError,
    ConfigError,
    ScenarioError,
    TrackingError,
    GeometryError,
    InsufficientHistoryError,
)


@app.exception_handler(Exception)
async def _input_error_handler(request: Request, exc: Exception):
    if isinstance(exc, _INPUT_ERRORS):
        return JSONResponse(status_code=400, content={"detail": str(exc)})
    raise exc


def _summary_dict(summary: formats.RunSummary) -> dict:
    return {
        "frames": summary.frames,
        "latency_p50_ms": summary.latency_p50_ms,
        "latency_p99_ms": summary.latency_p99_ms,
        "latency_count": summary.latency_count,
        "max_concurrent_tracks": summary.max_concurrent_tracks,
        "queue_depth_max": summary.queue_depth_max,
        "budget_violations": summary.budget_violations,
    }


def _noise_from(cfg) -> NoiseConfig:
    n = cfg.noise
    return NoiseConfig(
        depth_rel_near=n.depth_rel_near,
        depth_rel_far=n.depth_rel_far,
        near_range=n.near_range,
        far_range=n.far_range,
        pixel_jitter=n.pixel_jitter,
        dropout=n.dropout,
        depth_dropout=n.depth_dropout,
        conf_mean=n.conf_mean,
        conf_sigma=n.conf_sigma,
        low_conf_rate=n.low_conf_rate,
        scale=n.scale,
    )


@app.get("/health", response_model=models.HealthResponse)
def health() -> models.HealthResponse:
    return models.HealthResponse(status="ok", version=__version__)


@app.post("/simulate", response_model=models.SimulateResponse)
def simulate(req: models.SimulateRequest) -> models.SimulateResponse:
    cfg = resolve_config(None, req.overrides)
    # explicit noise.* overrides replace the preset's noise block entirely
    noise = _noise_from(cfg) if any(k.startswith("noise.") for k in req.overrides) else None
    if req.spec is not None:
        spec = scenario.spec_from_dict(req.spec, noise=noise)
        header, frames, truth = scenario.simulate(spec, seed=req.seed, duration=req.duration)
    else:
        header, frames, truth = scenario.simulate(
            req.preset, seed=req.seed, duration=req.duration, noise=noise
        )
    return models.SimulateResponse(
        recording=formats.recording_to_text(header, frames),
        truth=formats.truth_to_text(truth),
        frames=len(frames),
        pedestrians=len(truth.peds),
        collision_intervals=len(truth.intervals),
    )


def _run_common(req: models.RunRequest, rate: float | None, budget_ms: float | None, on_event=None):
    cfg = resolve_config(req.config_text, req.overrides)
    header, frames = formats.parse_recording(req.recording)
    if rate is None:
        result = pipeline.run_offline(header, frames, cfg)
    else:
        result = pipeline.replay(header, frames, cfg, rate=rate, budget_ms=budget_ms, on_event=on_event)
    dump = result.dump
    return header, cfg, result, dump


def _run_response(header, result) -> models.RunResponse:
    summary = result.dump.summary
    return models.RunResponse(
        alerts=formats.alerts_to_text(result.events, metadata=dict(header.metadata)),
        predictions=formats.pred_to_text(result.dump),
        events=len(result.events),
        frames=result.frames,
        latency_p50_ms=summary.latency_p50_ms,
        latency_p99_ms=summary.latency_p99_ms,
        max_concurrent_tracks=summary.max_concurrent_tracks,
    )


@app.post("/run", response_model=models.RunResponse)
def run(req: models.RunRequest) -> models.RunResponse:
    header, _, result, _ = _run_common(req, rate=None, budget_ms=None)
    return _run_response(header, result)


@app.post("/stream")
def stream(req: models.StreamRequest) -> StreamingResponse:
    """NDJSON: alert events as they happen, then one stream_result object."""

    def generate():
        events_q: queue.Queue = queue.Queue()
        box: dict = {}

        def worker():
            try:
                header, _, result, _ = _run_common(
                    req, rate=req.rate, budget_ms=req.budget_ms,
                    on_event=lambda e: events_q.put(formats.event_to_obj(e)),
                )
                box["header"] = header
                box["result"] = result
            except Exception as exc:  # surfaced as an error line
                box["error"] = exc
            finally:
                events_q.put(None)

        thread = threading.Thread(target=worker, daemon=True)
        thread.start()
        while True:
            item = events_q.get()
            if item is None:
                break
            yield json.dumps(item, separators=(",", ":")) + "\n"
        thread.join()
        if "error" in box:
            exc = box["error"]
            if isinstance(exc, _INPUT_ERRORS):
                yield json.dumps({"kind": "error", "detail": str(exc)}) + "\n"
                return
            raise exc
        header, result = box["header"], box["result"]
        summary = result.dump.summary
        final = {
            "kind": "stream_result",
            "alerts": formats.alerts_to_text(result.events, metadata=dict(header.metadata)),
            "predictions": formats.pred_to_text(result.dump),
            "events": len(result.events),
            **_summary_dict(summary),
        }
        yield json.dumps(final, separators=(",", ":")) + "\n"

    return StreamingResponse(generate(), media_type="application/x-ndjson")


@app.post("/evaluate", response_model=models.EvaluateResponse)
def evaluate_run(req: models.EvaluateRequest) -> models.EvaluateResponse:
    cfg = resolve_config(req.config_text, req.overrides)
    truth = formats.parse_truth(req.truth)
    events, _ = formats.parse_alerts(req.alerts)
    dump = formats.parse_pred(req.predictions)
    report = evaluate.report_from_run(
        truth, events, dump, horizon_steps=cfg.predictor.horizon, cfg=cfg.eval
    )
    if req.equivalence:
        predictor = build_predictor(cfg.predictor)
        stats = evaluate.equivalence(truth, predictor, cfg.smoother)
        report["equivalence_residual_max"] = stats.residual_max
        report["equivalence_residual_mean"] = stats.residual_mean
    return models.EvaluateResponse(metrics=formats.metrics_to_text(report), report=report)


@app.post("/inspect", response_model=models.InspectResponse)
def inspect(req: models.InspectRequest) -> models.InspectResponse:
    header, frames = formats.parse_recording(req.recording)
    cfg = resolve_config()
    duration = len(frames) / header.native_fps if frames else 0.0
    return models.InspectResponse(
        frames=len(frames),
        duration=duration,
        native_fps=header.native_fps,
        metadata=dict(header.metadata),
        detections=sum(len(f.detections) for f in frames),
        track_estimate=pipeline.track_census(header, frames, cfg),
    )


# ---------------------------------------------------------------------------
# live sessions

_sessions: dict[str, "pipeline.Pipeline"] = {}
_sessions_lock = threading.Lock()
_session_ids = itertools.count(1)


def _get_session(session_id: str) -> "pipeline.Pipeline":
    with _sessions_lock:
        engine = _sessions.get(session_id)
    if engine is None:
        raise HTTPException(status_code=404, detail=f"no session {session_id}")
    return engine


@app.post("/sessions", response_model=models.SessionCreateResponse)
def create_session(req: models.SessionCreateRequest) -> models.SessionCreateResponse:
    header = formats.header_from_obj(req.header)
    cfg = resolve_config(req.config_text, req.overrides)
    engine = pipeline.Pipeline(header, cfg)
    with _sessions_lock:
        session_id = str(next(_session_ids))
        _sessions[session_id] = engine
    return models.SessionCreateResponse(session_id=session_id)


@app.post("/sessions/{session_id}/frames", response_model=models.SessionFramesResponse)
def push_frames(session_id: str, req: models.SessionFramesRequest) -> models.SessionFramesResponse:
    engine = _get_session(session_id)
    events = []
    for fo in req.frames:
        frame = formats.frame_from_obj(fo, engine.header.intrinsics)
        events.extend(engine.process_frame(frame))
    return models.SessionFramesResponse(events=[formats.event_to_obj(e) for e in events])


@app.post("/sessions/{session_id}/close", response_model=models.SessionCloseResponse)
def close_session(session_id: str) -> models.SessionCloseResponse:
    engine = _get_session(session_id)
    with _sessions_lock:
        _sessions.pop(session_id, None)
    tail = engine.finish()
    result = engine.result()
    return models.SessionCloseResponse(
        events=[formats.event_to_obj(e) for e in tail],
        alerts=formats.alerts_to_text(result.events, metadata=dict(engine.header.metadata)),
        summary=_summary_dict(result.dump.summary),
    )


def serve(host: str = "127.0.0.1", port: int = 8750) -> None:
    import uvicorn

    uvicorn.run(app, host=host, port=port)
