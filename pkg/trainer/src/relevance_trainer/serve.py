"""HTTP scoring service implementing the reranker wire protocol:

POST /score  {"query": str, "passages": [str, ...]}
          -> {"p_relevant": [float, ...]}   (positionally aligned)
GET  /healthz -> 200

Malformed requests get a 400 with a JSON error body. Requests are
stateless and independent; concurrent calls are safe.
"""

from __future__ import annotations

import threading
import time

import httpx
import uvicorn
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .scoring import Scorer


class ScoreRequest(BaseModel):
    query: str
    passages: list[str]


def build_app(scorer: Scorer) -> FastAPI:
    app = FastAPI(title="relevance-scorer")

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:3])})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "epoch": scorer.epoch}

    @app.post("/score")
    def score(body: ScoreRequest):
        return {"p_relevant": scorer.score(body.query, body.passages)}

    return app


def serve(checkpoint_path: str, host: str = "127.0.0.1", port: int = 8040) -> None:
    """Blocking server for CLI use."""
    uvicorn.run(build_app(Scorer(checkpoint_path)), host=host, port=port, log_level="warning")


class BackgroundServer:
    """Run the scoring service in a thread; used by the eval loop."""

    def __init__(self, checkpoint_path: str, host: str = "127.0.0.1", port: int = 0):
        self._config = uvicorn.Config(
            build_app(Scorer(checkpoint_path)), host=host, port=port, log_level="warning"
        )
        self._server = uvicorn.Server(self._config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)
        self.host = host

    @property
    def port(self) -> int:
        servers = getattr(self._server, "servers", None)
        if servers:
            return servers[0].sockets[0].getsockname()[1]
        return self._config.port

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self, timeout: float = 30.0) -> "BackgroundServer":
        self._thread.start()
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self._server.started:
                try:
                    if httpx.get(f"{self.base_url}/healthz", timeout=2.0).status_code == 200:
                        return self
                except httpx.HTTPError:
                    pass
            time.sleep(0.05)
        self.stop()
        raise RuntimeError("scoring service failed to become healthy")

    def stop(self) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=10)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
