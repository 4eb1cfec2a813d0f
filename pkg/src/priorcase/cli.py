"""Command-line client for the retrieval engine.

Every subcommand marshals its arguments into the service's request model
and dispatches it either to the in-process handlers (default) or to a
running server (`--server http://host:port`); the CLI itself contains no
retrieval logic. Exit codes: 0 success, 1 validation failure, 2
runtime/stage failure, 3 scorer transport failure.
"""

from __future__ import annotations

import json
import sys

import click
import httpx
from pydantic import BaseModel

from . import __version__
from .errors import PriorcaseError, ScorerTransportError, StageError, ValidationError
from .service import handlers, schemas

_EXIT_BY_ERROR_KIND = {"validation": 1, "stage": 2, "scorer_transport": 3}


class _Transport:
    """Routes a request model to a handler or to a remote server."""

    def __init__(self, server: str | None):
        self.server = server.rstrip("/") if server else None
        self._registry = handlers.WorkspaceRegistry()

    def call(self, path: str, request: BaseModel, local_fn, needs_registry: bool = False):
        if self.server is None:
            args = (request, self._registry) if needs_registry else (request,)
            return local_fn(*args)
        try:
            response = httpx.post(
                f"{self.server}{path}", json=request.model_dump(), timeout=600.0
            )
        except httpx.HTTPError as exc:
            raise StageError(f"server {self.server} unreachable: {exc}") from exc
        if response.status_code >= 400:
            try:
                payload = response.json()
            except ValueError:
                payload = {"error": "stage", "detail": response.text}
            kind = payload.get("error", "stage")
            detail = payload.get("detail", response.text)
            if kind == "validation":
                raise ValidationError(detail)
            if kind == "scorer_transport":
                raise ScorerTransportError(detail)
            raise StageError(detail)
        return response.json()


def _emit(result) -> None:
    data = result.model_dump() if isinstance(result, BaseModel) else result
    click.echo(json.dumps(data, indent=2))


@click.group()
@click.version_option(__version__)
@click.option(
    "--server",
    default=None,
    envvar="PRIORCASE_SERVER",
    help="Base URL of a running priorcase service; omit to run in-process.",
)
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Hybrid prior-case retrieval engine."""
    ctx.obj = _Transport(server)


def _wrap(fn):
    """Translate engine errors into the documented exit codes."""
    import functools

    @functools.wraps(fn)
    def inner(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PriorcaseError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)

    return inner


@main.command()
@click.argument("corpus_path")
@click.pass_obj
@_wrap
def ingest(transport: _Transport, corpus_path: str) -> None:
    """Validate a corpus file and print its statistics."""
    request = schemas.IngestRequest(corpus_path=corpus_path)
    _emit(transport.call("/ingest", request, handlers.ingest))


@main.command()
@click.argument("corpus_path")
@click.argument("output_path")
@click.option("--strategy", default="heuristic", show_default=True,
              type=click.Choice(["file", "heuristic", "external"]))
@click.option("--cue-table", "cue_table_path", default=None,
              help="Cue-phrase table overriding the shipped one.")
@click.option("--scorer-endpoint", default=None, help="Sidecar endpoint for --strategy external.")
@click.pass_obj
@_wrap
def annotate(transport: _Transport, corpus_path: str, output_path: str, strategy: str,
             cue_table_path: str | None, scorer_endpoint: str | None) -> None:
    """Apply an annotator strategy and write the annotated corpus."""
    request = schemas.AnnotateRequest(
        corpus_path=corpus_path, output_path=output_path, strategy=strategy,
        cue_table_path=cue_table_path, scorer_endpoint=scorer_endpoint,
    )
    _emit(transport.call("/annotate", request, handlers.annotate))


@main.command()
@click.argument("config_path")
@click.option("--out", "workspace_dir", default=None,
              help="Persist the built indexes to this workspace directory.")
@click.pass_obj
@_wrap
def index(transport: _Transport, config_path: str, workspace_dir: str | None) -> None:
    """Build the lexical and vector indexes declared by a config file."""
    request = schemas.IndexRequest(config_path=config_path, workspace_dir=workspace_dir)
    _emit(transport.call("/index", request, handlers.build_index, needs_registry=True))


@main.command()
@click.option("--text", default=None, help="Ad-hoc query text.")
@click.option("--doc-id", default=None, help="Query with a corpus document instead of text.")
@click.option("--method", default="trace_full", show_default=True)
@click.option("--preset", default="full", show_default=True,
              help="Role preset applied when querying by doc id.")
@click.option("--top-k", default=10, show_default=True, type=int)
@click.option("--workspace", "workspace_dir", default=None,
              help="Workspace directory written by `index --out`.")
@click.pass_obj
@_wrap
def search(transport: _Transport, text: str | None, doc_id: str | None, method: str,
           preset: str, top_k: int, workspace_dir: str | None) -> None:
    """Run one ad-hoc query against the loaded indexes."""
    request = schemas.SearchRequest(
        method=method, text=text, doc_id=doc_id, preset=preset,
        top_k=top_k, workspace_dir=workspace_dir,
    )
    result = transport.call("/search", request, handlers.search, needs_registry=True)
    _emit(result)


@main.command()
@click.argument("config_path")
@click.option("--out", "output_dir", default=None, help="Override the config's output_dir.")
@click.pass_obj
@_wrap
def run(transport: _Transport, config_path: str, output_dir: str | None) -> None:
    """Run the full experiment described by a config file."""
    request = schemas.RunRequest(config_path=config_path, output_dir=output_dir)
    _emit(transport.call("/run", request, handlers.run))


@main.command(name="eval")
@click.argument("runs_dir")
@click.argument("qrels_path")
@click.option("--k-min", default=1, show_default=True, type=int)
@click.option("--k-max", default=20, show_default=True, type=int)
@click.pass_obj
@_wrap
def eval_cmd(transport: _Transport, runs_dir: str, qrels_path: str, k_min: int, k_max: int) -> None:
    """Re-score existing run files against a qrels file."""
    request = schemas.EvalRequest(runs_dir=runs_dir, qrels_path=qrels_path, k_min=k_min, k_max=k_max)
    _emit(transport.call("/eval", request, handlers.evaluate))


@main.command(name="export-qrels")
@click.argument("corpus_path")
@click.argument("output_path")
@click.option("--include-unknown", is_flag=True, default=False,
              help="Also export citations pointing outside the corpus.")
@click.pass_obj
@_wrap
def export_qrels(transport: _Transport, corpus_path: str, output_path: str,
                 include_unknown: bool) -> None:
    """Write citation links as a 4-column qrels file."""
    request = schemas.ExportQrelsRequest(
        corpus_path=corpus_path, output_path=output_path, include_unknown=include_unknown
    )
    _emit(transport.call("/export-qrels", request, handlers.export_qrels_handler))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8350, show_default=True, type=int)
@_wrap
def serve(host: str, port: int) -> None:
    """Start the HTTP service (uvicorn)."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port, log_level="info")


@main.command()
@click.argument("endpoint")
@_wrap
def conformance(endpoint: str) -> None:
    """Run the sidecar protocol conformance suite against an endpoint."""
    from .protocol import run_conformance

    report = run_conformance(endpoint)
    click.echo(report.summary())
    if not report.ok:
        sys.exit(2)


if __name__ == "__main__":
    main()
