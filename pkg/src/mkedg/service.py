"""HTTP JSON API for interactive inference.

Stateless by design: every request carries the full history, so the
server holds only the immutable engine.  Static files for the browser
chat client are served from the package's bundled frontend build (or
any directory handed to create_app) when present.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .checkpoint import MAGIC
from .errors import DomainError

MAX_UTTERANCE_CHARS = 512
_LOCAL_ORIGINS = r"https?://(localhost|127\.0\.0\.1)(:\d+)?"

# default location of the built chat client, shipped inside the package
BUNDLED_UI = Path(__file__).resolve().parent / "static"


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _validate(payload) -> str | None:
    if not isinstance(payload, dict):
        return "request body must be a JSON object"
    if "history" not in payload:
        return "missing required field: history"
    history = payload["history"]
    if not isinstance(history, list):
        return "history must be a list of strings"
    if not history:
        return "history must contain at least one utterance"
    if not all(isinstance(u, str) for u in history):
        return "history must be a list of strings"
    return None


def create_app(engine, static_dir=None) -> FastAPI:
    """Assemble the API around one read-only inference engine."""
    app = FastAPI(title="mkedg", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=_LOCAL_ORIGINS,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/api/health")
    def health():
        return {"status": "ok", "model": MAGIC.decode()}

    @app.post("/api/chat")
    async def chat(request: Request):
        raw = await request.body()
        try:
            payload = json.loads(raw)
        except ValueError:
            return _error(400, "request body is not valid JSON")
        problem = _validate(payload)
        if problem:
            return _error(400, problem)
        history = payload["history"]
        oversized = [i for i, u in enumerate(history)
                     if len(u) > MAX_UTTERANCE_CHARS]
        if oversized:
            return _error(413, f"utterance {oversized[0]} exceeds "
                               f"{MAX_UTTERANCE_CHARS} characters")
        try:
            result = engine.respond(history)
        except DomainError as exc:
            return _error(400, str(exc))
        except Exception as exc:  # decode failures must not kill the server
            return _error(500, f"internal error: {exc}")
        return JSONResponse(result.as_dict())

    if static_dir is None and BUNDLED_UI.is_dir():
        static_dir = BUNDLED_UI
    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")
    return app


def run_server(engine, port: int, host: str = "127.0.0.1",
               static_dir=None) -> None:
    """Blocking uvicorn loop around create_app."""
    import uvicorn

    uvicorn.run(create_app(engine, static_dir=static_dir),
                host=host, port=port, log_level="warning")
