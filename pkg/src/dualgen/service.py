"""HTTP front end for the query pipeline."""

from __future__ import annotations

import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field

from . import llm, scoring
from .config import PipelineConfig
from .errors import DataError, DualGenError, StageError
from .geo import GeoPoint
from .jsonfmt import dumps
from .pipeline import Pipeline

log = logging.getLogger(__name__)

_STATUS = {"not_found": 404, "extraction_failed": 422, "transport": 502, "backend": 502}


class RecommendBody(BaseModel):
    prompt: str = Field(min_length=1)
    k: int | None = Field(default=None, ge=1)


class ScoreBody(BaseModel):
    candidate: str
    reference: str
    mode: str = "structured"


def _json(obj, status: int = 200) -> Response:
    return Response(dumps(obj), status_code=status, media_type="application/json")


def _error(status: int, error: str, **extra) -> Response:
    return _json({"error": error, **extra}, status)


def create_app(config: PipelineConfig, autoload: bool = True) -> FastAPI:
    """Build the app. Catalogs load at startup unless ``autoload`` is false.

    An invalid config aborts startup with a ``ConfigError`` naming the field.
    """
    config.validate(need=("viewpoints",))
    pipe = Pipeline(config, load=False)

    @asynccontextmanager
    async def lifespan(app):
        if autoload:
            pipe.load()
        yield

    app = FastAPI(title="dualgen", lifespan=lifespan)
    app.state.pipeline = pipe

    @app.exception_handler(RequestValidationError)
    async def on_validation(request: Request, exc: RequestValidationError):
        fields = {".".join(str(p) for p in e["loc"][1:]) or "body": e["msg"] for e in exc.errors()}
        return _error(400, "invalid_request", fields=fields)

    @app.exception_handler(Exception)
    async def on_unhandled(request: Request, exc: Exception):
        log.exception("unhandled error on %s", request.url.path)
        return _error(500, "internal", detail=type(exc).__name__)

    @app.get("/healthz")
    def healthz():
        body = {
            "status": "ok" if pipe.loaded else "loading",
            "catalogs_loaded": pipe.loaded,
            "backend_kinds": {role: b.config.kind for role, b in sorted(pipe.backends.items())},
        }
        return _json(body, 200 if pipe.loaded else 503)

    def not_ready():
        return _error(503, "not_ready", detail="catalogs not loaded")

    @app.post("/recommend")
    def recommend(body: RecommendBody):
        if not pipe.loaded:
            return not_ready()
        if not body.prompt.strip():
            return _error(400, "invalid_request", fields={"prompt": "must contain non-whitespace text"})
        try:
            resp = pipe.run_query(body.prompt, body.k)
        except StageError as exc:
            return _json(exc.to_dict(), _STATUS.get(exc.kind, 500))
        return Response(resp.to_json(), media_type="application/json")

    @app.get("/nearest")
    def nearest(lat: float, lon: float, k: int | None = None):
        if not pipe.loaded:
            return not_ready()
        if not -90.0 <= lat <= 90.0:
            return _error(400, "invalid_request", fields={"lat": "must be within [-90, 90]"})
        if not -180.0 <= lon <= 180.0:
            return _error(400, "invalid_request", fields={"lon": "must be within [-180, 180]"})
        if k is not None and k < 1:
            return _error(400, "invalid_request", fields={"k": "must be >= 1"})
        results = pipe.nearest(GeoPoint(lat, lon), k)
        return _json([r.to_dict() for r in results])

    @app.post("/score")
    def score(body: ScoreBody):
        if body.mode not in scoring.BRANCHES:
            return _error(400, "invalid_request", fields={"mode": f"must be one of {scoring.BRANCHES}"})
        if not body.candidate.strip() or not body.reference.strip():
            return _error(400, "invalid_request", fields={"candidate": "candidate and reference must be non-empty"})
        weights = config.weights.with_branch(body.mode)
        try:
            if body.mode == scoring.STRUCTURED:
                comp = scoring.structured_components(body.candidate, body.reference)
            else:
                if "judge" not in pipe.backends:
                    return _error(503, "not_ready", detail="no judge backend configured")
                comp = scoring.unstructured_components(body.candidate, body.reference, pipe.scorers())
            raw, pct = scoring.composite_score(comp, weights)
        except llm.JudgeParseError as exc:
            return _error(502, "judge_parse", detail=str(exc))
        except DataError as exc:
            return _error(400, "invalid_request", detail=str(exc))
        except DualGenError as exc:
            return _error(502, "backend", detail=str(exc))
        return _json({"mode": body.mode, "components": comp.present(), "raw": raw, "percent": pct})

    return app


def serve(config: PipelineConfig, host: str | None = None, port: int | None = None) -> None:
    import uvicorn

    svc = config.raw.get("service", {})
    uvicorn.run(create_app(config), host=host or svc.get("host", "127.0.0.1"), port=port or int(svc.get("port", 8000)))
