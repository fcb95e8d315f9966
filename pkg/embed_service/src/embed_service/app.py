"""HTTP surface: POST /embed for batches, GET /health for metadata."""

from __future__ import annotations

import threading
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, field_validator

from .encoders import TextEncoder, build_encoder

MAX_BATCH = 256
MAX_TEXT_CHARS = 2048


class EmbedRequest(BaseModel):
    texts: list[str] = Field(min_length=1, max_length=MAX_BATCH)

    @field_validator("texts")
    @classmethod
    def _texts_fit(cls, texts: list[str]) -> list[str]:
        for text in texts:
            if len(text) > MAX_TEXT_CHARS:
                raise ValueError(f"text exceeds {MAX_TEXT_CHARS} characters")
        return texts


class EmbedResponse(BaseModel):
    dim: int
    model: str
    vectors: list[list[float]]


def create_app(
    model_id: str | None = None,
    encoder: TextEncoder | None = None,
    defer_load: bool = False,
) -> FastAPI:
    """Build the service app.

    Pass a ready encoder for tests, or a model id to load at startup;
    until loading finishes /embed answers 503.
    """
    state: dict[str, TextEncoder | None] = {"encoder": encoder}

    lifespan = None
    if encoder is None and model_id is not None and not defer_load:

        @asynccontextmanager
        async def lifespan(_: FastAPI):
            def worker() -> None:
                state["encoder"] = build_encoder(model_id)

            # load off the event loop; endpoints answer 503 until ready
            threading.Thread(target=worker, daemon=True).start()
            yield

    app = FastAPI(title="embed-service", lifespan=lifespan)

    @app.exception_handler(RequestValidationError)
    async def _bad_request(_: Request, exc: RequestValidationError) -> JSONResponse:
        detail = [
            {"loc": [str(part) for part in err.get("loc", ())], "msg": str(err.get("msg", ""))}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"detail": detail})

    @app.get("/health")
    def health() -> JSONResponse:
        enc = state["encoder"]
        if enc is None:
            return JSONResponse(status_code=503, content={"detail": "model loading"})
        return JSONResponse(content={"model": enc.model_id, "dim": enc.dim})

    @app.post("/embed", response_model=EmbedResponse)
    def embed(request: EmbedRequest) -> EmbedResponse | JSONResponse:
        enc = state["encoder"]
        if enc is None:
            return JSONResponse(status_code=503, content={"detail": "model loading"})
        vectors = enc.encode(request.texts)
        return EmbedResponse(
            dim=enc.dim, model=enc.model_id, vectors=[row.tolist() for row in vectors]
        )

    return app
