"""HTTP surface: the embed wire protocol.

POST /embed {"texts": [...]} -> {"model": ..., "dim": ..., "vectors": [...]}
GET  /health                 -> {"status": "ok", "model": ..., "dim": ...}

The app binds immediately and loads its backend in a background thread, so
both endpoints answer 503 until the weights are in memory. No server-side
cache: identical text always maps to an identical vector and callers own
caching, keeping a single source of truth for cache keys.
"""

from __future__ import annotations

import logging
import threading
from contextlib import asynccontextmanager
from typing import Callable

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import __version__
from .backends import EncoderBackend, build_backend
from .config import EncoderConfig

log = logging.getLogger(__name__)


class EmbedRequest(BaseModel):
    texts: list[str]  # batch-size limits are 400/413, not 422, so no bounds here


def create_app(
    cfg: EncoderConfig | None = None,
    backend_factory: Callable[[str], EncoderBackend] = build_backend,
) -> FastAPI:
    cfg = cfg or EncoderConfig()
    state: dict = {"backend": None, "error": None}
    lock = threading.Lock()
    ready = threading.Event()

    def load() -> None:
        try:
            backend = backend_factory(cfg.model)
        except Exception as exc:
            with lock:
                state["error"] = str(exc)
            log.error("backend load failed: %s", exc)
        else:
            with lock:
                state["backend"] = backend
            log.info("backend %s ready, dim=%d", backend.model_id, backend.dim)
        ready.set()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        threading.Thread(target=load, name="encoder-load", daemon=True).start()
        yield

    app = FastAPI(title="encoder-service", version=__version__, lifespan=lifespan)
    app.state.encoder_ready = ready

    def backend_or_unavailable() -> EncoderBackend:
        with lock:
            backend, error = state["backend"], state["error"]
        if error is not None:
            raise HTTPException(status_code=500, detail=f"backend failed to load: {error}")
        if backend is None:
            raise HTTPException(status_code=503, detail="model loading")
        return backend

    @app.get("/health")
    def health() -> dict:
        backend = backend_or_unavailable()
        return {"status": "ok", "model": backend.model_id, "dim": backend.dim}

    @app.post("/embed")
    def embed(req: EmbedRequest) -> dict:
        backend = backend_or_unavailable()
        if not req.texts:
            raise HTTPException(status_code=400, detail="texts must be non-empty")
        if len(req.texts) > cfg.max_batch:
            raise HTTPException(
                status_code=413,
                detail=f"batch of {len(req.texts)} exceeds max {cfg.max_batch}",
            )
        vectors = backend.encode(req.texts)
        if cfg.normalize:
            norms = np.linalg.norm(vectors, axis=1, keepdims=True)
            vectors = np.divide(vectors, norms, out=vectors.copy(), where=norms > 0)
        return {"model": backend.model_id, "dim": backend.dim, "vectors": vectors.tolist()}

    return app


def create_app_from_env() -> FastAPI:
    """uvicorn --factory entry point for deployments."""
    from .config import from_env

    return create_app(from_env())
