"""HTTP front of the judgment experiment.

JSON API consumed by the participant web UI (or any scripted client):

    POST /api/sessions                  {set_id, age?, gender?}
        -> {session_id, k, trials: [{index, pattern_hex}]}  (presentation order)
    POST /api/sessions/{id}/responses   {index, choice, rt_ms}
        -> {ok: true}; errors carry {code, message}
    GET  /api/sets/{id}/export          CSV pattern_hex,n_random,n_total
    GET  /api/healthz                   {ok: true}

Responses are acknowledged only after the store has them on disk.  When
a static directory is configured (the built web UI), it is served at /.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from scenestat.experiment import (
    DuplicateResponseError,
    ExperimentStore,
    ResponseValidationError,
    UnknownSessionError,
    UnknownSetError,
    aggregates_to_csv,
)


class SessionRequest(BaseModel):
    set_id: str
    age: int | None = None
    gender: str | None = None


class ResponseRequest(BaseModel):
    index: int
    choice: Literal["random", "not_random"]
    rt_ms: float


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def create_app(store: ExperimentStore, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="scenestat experiment service")

    @app.exception_handler(UnknownSetError)
    async def _unknown_set(request: Request, err: UnknownSetError):
        return _error(404, "unknown_set", f"no stimulus set {err.args[0]!r}")

    @app.exception_handler(UnknownSessionError)
    async def _unknown_session(request: Request, err: UnknownSessionError):
        return _error(404, "unknown_session", f"no session {err.args[0]!r}")

    @app.exception_handler(DuplicateResponseError)
    async def _duplicate(request: Request, err: DuplicateResponseError):
        return _error(409, "duplicate_response", str(err))

    @app.exception_handler(ResponseValidationError)
    async def _invalid(request: Request, err: ResponseValidationError):
        return _error(422, "validation_error", str(err))

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, err: RequestValidationError):
        return _error(422, "validation_error", str(err.errors()))

    @app.get("/api/healthz")
    def healthz():
        return {"ok": True}

    @app.post("/api/sessions")
    def create_session(body: SessionRequest):
        session = store.create_session(body.set_id, age=body.age, gender=body.gender)
        stimulus_set = store.get_set(session.set_id)
        return {
            "session_id": session.session_id,
            "k": stimulus_set.side,
            "trials": [
                {
                    "index": i,
                    "pattern_hex": stimulus_set.pattern_hex(set_index),
                }
                for i, set_index in enumerate(session.order)
            ],
        }

    @app.post("/api/sessions/{session_id}/responses")
    def record_response(session_id: str, body: ResponseRequest):
        store.record_response(session_id, body.index, body.choice, body.rt_ms)
        return {"ok": True}

    @app.get("/api/sets/{set_id}/export")
    def export(set_id: str):
        aggregates = store.export_aggregates(set_id)
        csv_text = aggregates_to_csv(
            aggregates, set_id, len(store.completed_sessions(set_id))
        )
        return PlainTextResponse(csv_text, media_type="text/csv")

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
