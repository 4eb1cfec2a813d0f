"""FastAPI application wrapping the retrieval engine.

Endpoints mirror the CLI subcommands one to one; an in-memory workspace
registry holds the indexes built by POST /index so that POST /search can
serve many clients from the same read-only structures. Engine errors map
to transport-appropriate statuses: validation 400, stage 500, scorer
transport 502.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import PriorcaseError, ScorerTransportError, ValidationError
from . import handlers, schemas

_ERROR_KINDS = {
    1: "validation",
    2: "stage",
    3: "scorer_transport",
}


def _http_status(exc: PriorcaseError) -> int:
    if isinstance(exc, ValidationError):
        return 400
    if isinstance(exc, ScorerTransportError):
        return 502
    return 500


def create_app() -> FastAPI:
    app = FastAPI(title="priorcase", version=__version__)
    registry = handlers.WorkspaceRegistry()
    app.state.registry = registry

    @app.exception_handler(PriorcaseError)
    async def engine_error_handler(_: Request, exc: PriorcaseError) -> JSONResponse:
        body = schemas.ErrorResponse(
            error=_ERROR_KINDS.get(exc.exit_code, "stage"), detail=str(exc)
        )
        return JSONResponse(status_code=_http_status(exc), content=body.model_dump())

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(version=__version__)

    @app.post("/ingest", response_model=schemas.IngestResponse)
    def ingest(request: schemas.IngestRequest) -> schemas.IngestResponse:
        return handlers.ingest(request)

    @app.post("/annotate", response_model=schemas.AnnotateResponse)
    def annotate(request: schemas.AnnotateRequest) -> schemas.AnnotateResponse:
        return handlers.annotate(request)

    @app.post("/index", response_model=schemas.IndexResponse)
    def build_index(request: schemas.IndexRequest) -> schemas.IndexResponse:
        return handlers.build_index(request, registry)

    @app.post("/search", response_model=schemas.SearchResponse)
    def search(request: schemas.SearchRequest) -> schemas.SearchResponse:
        return handlers.search(request, registry)

    @app.post("/run", response_model=schemas.RunResponse)
    def run(request: schemas.RunRequest) -> schemas.RunResponse:
        return handlers.run(request)

    @app.post("/eval", response_model=schemas.EvalResponse)
    def evaluate(request: schemas.EvalRequest) -> schemas.EvalResponse:
        return handlers.evaluate(request)

    @app.post("/export-qrels", response_model=schemas.ExportQrelsResponse)
    def export_qrels(request: schemas.ExportQrelsRequest) -> schemas.ExportQrelsResponse:
        return handlers.export_qrels_handler(request)

    return app


app = create_app()
