"""HTTP surface: chat, profile/memory/summaries inspection, trace lookup.

All endpoints live under /v1. Reads are snapshot-only and side-effect free;
writes go through the engine's per-user single-writer lock (409 when busy).
"""

from __future__ import annotations

import logging
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel

from .engine import Engine
from .errors import BackendUnavailable, SessionBusy, StorageCorrupt, StorageUnavailable
from .storage import USER_ID_RE

logger = logging.getLogger(__name__)


class ChatRequestBody(BaseModel):
    message: str
    session_id: str | None = None
    user_id: str | None = None


def _check_user_id(user_id: str) -> None:
    if not USER_ID_RE.match(user_id):
        raise HTTPException(status_code=400, detail=f"invalid user_id: {user_id!r}")


def create_app(engine: Engine, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="personamem", version="0.1.0")

    @app.get("/v1/health")
    def health() -> dict:
        return {"status": "ok", "backend": engine.gateway.backend_id}

    @app.post("/v1/users/{user_id}/messages")
    def post_message(user_id: str, body: ChatRequestBody) -> dict:
        _check_user_id(user_id)
        if body.user_id is not None and body.user_id != user_id:
            raise HTTPException(status_code=400, detail="body user_id does not match path")
        if not body.message.strip():
            raise HTTPException(status_code=400, detail="message empty")
        try:
            result = engine.run_turn(user_id, body.message, blocking=False)
        except SessionBusy as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except (StorageCorrupt, StorageUnavailable) as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        if result.error == "BackendUnavailable":
            raise HTTPException(status_code=503, detail=result.reply)
        return {
            "reply": result.reply,
            "trace_id": result.trace_id,
            "timings": result.trace.timings,
            "error": result.error,
        }

    @app.get("/v1/users/{user_id}/profile")
    def get_profile(user_id: str) -> dict:
        _check_user_id(user_id)
        return engine.get_profile(user_id).to_dict()

    @app.get("/v1/users/{user_id}/memories")
    def get_memories(
        user_id: str,
        probe: str | None = Query(default=None),
        k: int = Query(default=10),
        offset: int = Query(default=0),
    ) -> dict:
        _check_user_id(user_id)
        try:
            return engine.inspect_memories(user_id, probe=probe, k=k, offset=offset)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/v1/users/{user_id}/summaries")
    def get_summaries(user_id: str) -> dict:
        _check_user_id(user_id)
        return {"summaries": engine.get_summaries(user_id)}

    @app.get("/v1/users/{user_id}/traces/{trace_id}")
    def get_trace(user_id: str, trace_id: str) -> dict:
        _check_user_id(user_id)
        trace = engine.get_trace(user_id, trace_id)
        if trace is None:
            raise HTTPException(status_code=404, detail=f"unknown trace: {trace_id!r}")
        return trace

    @app.exception_handler(BackendUnavailable)
    def backend_unavailable(_request, exc):  # pragma: no cover - defensive
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=503, content={"detail": str(exc)})

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
