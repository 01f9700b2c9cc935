"""Thin client for the service; the CLI's only way of reaching the engine.

With a server URL it talks HTTP; without one it mounts the app in-process,
so the CLI works standalone while still exercising the exact service surface.
"""

from __future__ import annotations

import json
import warnings

import httpx

from . import models


class ServiceError(RuntimeError):
    """Server-side rejection, carrying the HTTP detail."""


class EngineClient:
    def __init__(self, server: str | None = None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=None)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .app import app

            self._client = TestClient(app)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "EngineClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _post(self, path: str, payload: dict) -> dict:
        response = self._client.post(path, json=payload)
        if response.status_code != 200:
            raise ServiceError(self._detail(response))
        return response.json()

    @staticmethod
    def _detail(response) -> str:
        try:
            return response.json().get("detail", response.text)
        except ValueError:
            return response.text

    def health(self) -> models.HealthResponse:
        response = self._client.get("/health")
        if response.status_code != 200:
            raise ServiceError(self._detail(response))
        return models.HealthResponse(**response.json())

    def simulate(self, req: models.SimulateRequest) -> models.SimulateResponse:
        return models.SimulateResponse(**self._post("/simulate", req.model_dump()))

    def run(self, req: models.RunRequest) -> models.RunResponse:
        return models.RunResponse(**self._post("/run", req.model_dump()))

    def stream(self, req: models.StreamRequest, on_event=None) -> dict:
        """Consume the NDJSON stream; returns the final stream_result object."""
        final: dict | None = None
        with self._client.stream("POST", "/stream", json=req.model_dump()) as response:
            if response.status_code != 200:
                response.read()
                raise ServiceError(self._detail(response))
            for line in response.iter_lines():
                if not line:
                    continue
                obj = json.loads(line)
                kind = obj.get("kind")
                if kind == "event":
                    if on_event is not None:
                        on_event(obj)
                elif kind == "error":
                    raise ServiceError(obj.get("detail", "stream failed"))
                elif kind == "stream_result":
                    final = obj
        if final is None:
            raise ServiceError("stream ended without a result")
        return final

    def evaluate(self, req: models.EvaluateRequest) -> models.EvaluateResponse:
        return models.EvaluateResponse(**self._post("/evaluate", req.model_dump()))

    def inspect(self, req: models.InspectRequest) -> models.InspectResponse:
        return models.InspectResponse(**self._post("/inspect", req.model_dump()))

    def create_session(self, req: models.SessionCreateRequest) -> str:
        return self._post("/sessions", req.model_dump())["session_id"]

    def push_frames(self, session_id: str, frames: list[dict]) -> list[dict]:
        return self._post(f"/sessions/{session_id}/frames", {"frames": frames})["events"]

    def close_session(self, session_id: str) -> models.SessionCloseResponse:
        return models.SessionCloseResponse(**self._post(f"/sessions/{session_id}/close", {}))
