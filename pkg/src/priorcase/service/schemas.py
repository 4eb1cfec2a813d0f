"""Pydantic request/response models for the HTTP service.

The CLI builds these same models and either posts them to a running
server or hands them straight to the in-process handlers, so the wire
schema is the single source of truth for both transports.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class IngestRequest(BaseModel):
    corpus_path: str
    format: str = "jsonl"


class IngestResponse(BaseModel):
    n_documents: int
    avg_document_size: float
    n_query_documents: int
    total_citation_links: int
    avg_citations_per_query: float
    vocabulary_size: int
    n_annotated: int
    warnings: list[str] = Field(default_factory=list)


class AnnotateRequest(BaseModel):
    corpus_path: str
    output_path: str
    strategy: str = "heuristic"
    cue_table_path: str | None = None
    scorer_endpoint: str | None = None


class AnnotateResponse(BaseModel):
    output_path: str
    n_documents: int
    n_annotated: int


class IndexRequest(BaseModel):
    config_path: str
    workspace_dir: str | None = None  # persist here when given


class IndexResponse(BaseModel):
    n_documents: int
    lexical_vocabulary: int | None = None
    vector_dimension: int | None = None
    nlist: int | None = None
    nprobe: int | None = None
    workspace_dir: str | None = None
    warnings: list[str] = Field(default_factory=list)


class SearchRequest(BaseModel):
    method: str = "trace_full"
    text: str | None = None
    doc_id: str | None = None
    preset: str = "full"
    top_k: int = 10
    workspace_dir: str | None = None  # load from disk instead of app state


class RankedEntryModel(BaseModel):
    doc_id: str
    rank: int
    score: float


class SearchResponse(BaseModel):
    query_id: str
    method: str
    source: str
    entries: list[RankedEntryModel]


class RunRequest(BaseModel):
    config_path: str
    output_dir: str | None = None  # overrides the config's output_dir


class EvalRowModel(BaseModel):
    preset: str
    method: str
    k: int
    precision: float
    recall: float
    f1: float
    map: float
    mrr: float


class ReportModel(BaseModel):
    columns: list[str]
    k_range: list[int]
    rows: list[EvalRowModel]
    best_rows: list[EvalRowModel]
    n_queries: dict[str, int]
    excluded_queries: dict[str, int]
    manifest: str | None = None


class RunResponse(BaseModel):
    output_dir: str
    manifest_path: str
    run_files: list[str]
    report: ReportModel
    warnings: list[str] = Field(default_factory=list)


class EvalRequest(BaseModel):
    runs_dir: str
    qrels_path: str
    k_min: int = 1
    k_max: int = 20


class EvalResponse(BaseModel):
    report: ReportModel


class ExportQrelsRequest(BaseModel):
    corpus_path: str
    output_path: str
    include_unknown: bool = False


class ExportQrelsResponse(BaseModel):
    output_path: str
    n_lines: int
    warnings: list[str] = Field(default_factory=list)


class ErrorResponse(BaseModel):
    error: str  # validation | stage | scorer_transport
    detail: str
