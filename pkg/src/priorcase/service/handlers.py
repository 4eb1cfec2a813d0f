"""Transport-neutral handlers shared by the FastAPI app and the CLI.

Each handler takes a request model (plus the workspace registry where
needed) and returns a response model; all retrieval logic stays in the
core package. The CLI's local mode calls these functions directly, the
HTTP routes wrap them, so both transports behave identically.
"""

from __future__ import annotations

from pathlib import Path

from .. import pipeline
from ..corpus import export_qrels, load_corpus, save_corpus
from ..errors import StageError, ValidationError
from ..evaluation import EvalReport, load_qrels, load_run, sweep_and_report
from ..fusion import RankedList
from ..protocol import SidecarClient
from ..segmenter import CuePhraseAnnotator, ExternalAnnotator, annotate_document, load_cue_table
from . import schemas


class WorkspaceRegistry:
    """Engines currently held in memory, keyed by workspace directory.

    The `current` slot is whatever the latest `index` call built; on-disk
    workspaces load lazily and are cached.
    """

    def __init__(self) -> None:
        self.current: pipeline.RetrievalEngine | None = None
        self._by_dir: dict[str, pipeline.RetrievalEngine] = {}

    def set_current(self, engine: pipeline.RetrievalEngine, directory: str | None) -> None:
        self.current = engine
        if directory:
            self._by_dir[str(Path(directory).resolve())] = engine

    def resolve(self, directory: str | None) -> pipeline.RetrievalEngine:
        if directory:
            key = str(Path(directory).resolve())
            if key not in self._by_dir:
                self._by_dir[key] = pipeline.load_workspace(directory)
            return self._by_dir[key]
        if self.current is None:
            raise StageError(
                "no index loaded: call `index` first or pass a workspace directory"
            )
        return self.current


def _report_model(report: EvalReport) -> schemas.ReportModel:
    def rows(items) -> list[schemas.EvalRowModel]:
        return [
            schemas.EvalRowModel(
                preset=r.preset, method=r.method, k=r.k, precision=r.precision,
                recall=r.recall, f1=r.f1, map=r.map, mrr=r.mrr,
            )
            for r in items
        ]

    return schemas.ReportModel(
        columns=list(report.columns),
        k_range=report.k_range,
        rows=rows(report.rows),
        best_rows=rows(report.best_rows),
        n_queries={f"{p}/{m}": n for (p, m), n in report.n_queries.items()},
        excluded_queries={f"{p}/{m}": n for (p, m), n in report.excluded_queries.items()},
        manifest=report.manifest_path,
    )


def ingest(request: schemas.IngestRequest) -> schemas.IngestResponse:
    if request.format != "jsonl":
        raise ValidationError(f"unsupported corpus format {request.format!r}")
    summary, warnings = pipeline.corpus_summary(request.corpus_path)
    return schemas.IngestResponse(**summary, warnings=warnings)


def annotate(request: schemas.AnnotateRequest) -> schemas.AnnotateResponse:
    corpus, _ = load_corpus(request.corpus_path)
    if request.strategy == "external":
        endpoint = request.scorer_endpoint or pipeline.resolve_scorer_endpoint(
            pipeline.ScorerConfig(kind="external", endpoint=None)
        )
        if not endpoint:
            raise ValidationError("annotate: external strategy requires a scorer endpoint")
        client = SidecarClient(endpoint)
        annotator = ExternalAnnotator(client)
    elif request.strategy == "heuristic":
        rules = load_cue_table(request.cue_table_path) if request.cue_table_path else None
        annotator = CuePhraseAnnotator(rules)
    else:
        annotator = None  # file strategy just validates
    annotated = corpus.map_documents(
        lambda doc: annotate_document(doc, request.strategy, annotator)
    )
    save_corpus(annotated, request.output_path)
    return schemas.AnnotateResponse(
        output_path=request.output_path,
        n_documents=len(annotated),
        n_annotated=sum(1 for d in annotated if d.is_annotated),
    )


def build_index(
    request: schemas.IndexRequest, registry: WorkspaceRegistry
) -> schemas.IndexResponse:
    config = pipeline.ExperimentConfig.from_yaml(request.config_path)
    engine = pipeline.build_engine(config)
    workspace_dir = request.workspace_dir
    if workspace_dir:
        pipeline.save_workspace(engine, workspace_dir)
    registry.set_current(engine, workspace_dir)
    return schemas.IndexResponse(
        n_documents=len(engine.corpus),
        lexical_vocabulary=(
            engine.lexical_index.vocabulary_size() if engine.lexical_index else None
        ),
        vector_dimension=(engine.vector_index.dimension if engine.vector_index else None),
        nlist=(engine.vector_index.nlist if engine.vector_index else None),
        nprobe=(engine.nprobe if engine.vector_index else None),
        workspace_dir=workspace_dir,
        warnings=engine.warnings,
    )


def search(request: schemas.SearchRequest, registry: WorkspaceRegistry) -> schemas.SearchResponse:
    engine = registry.resolve(request.workspace_dir)
    ranking = pipeline.search_adhoc(
        engine,
        method=request.method,
        text=request.text,
        doc_id=request.doc_id,
        preset=request.preset,
        top_k=request.top_k,
    )
    return _search_response(ranking, request.method)


def _search_response(ranking: RankedList, method: str) -> schemas.SearchResponse:
    return schemas.SearchResponse(
        query_id=ranking.query_id,
        method=method,
        source=ranking.source,
        entries=[
            schemas.RankedEntryModel(doc_id=e.doc_id, rank=e.rank, score=e.score)
            for e in ranking.entries
        ],
    )


def run(request: schemas.RunRequest) -> schemas.RunResponse:
    config = pipeline.ExperimentConfig.from_yaml(request.config_path)
    if request.output_dir:
        from dataclasses import replace

        config = replace(config, output_dir=request.output_dir)
    result = pipeline.run_experiment(config)
    return schemas.RunResponse(
        output_dir=str(result.output_dir),
        manifest_path=str(result.output_dir / "manifest.json"),
        run_files=[str(p) for p in result.run_files.values()],
        report=_report_model(result.report),
        warnings=list(result.manifest.get("warnings", [])),
    )


def evaluate(request: schemas.EvalRequest) -> schemas.EvalResponse:
    runs_dir = Path(request.runs_dir)
    if not runs_dir.is_dir():
        raise ValidationError(f"runs directory not found: {runs_dir}")
    qrels = load_qrels(request.qrels_path)
    runs: dict[tuple[str, str], dict[str, RankedList]] = {}
    for run_path in sorted(runs_dir.glob("*.run")):
        stem = run_path.stem
        preset, sep, _ = stem.partition("__")
        if not sep:
            preset = "unknown"
        rankings, method = load_run(run_path)
        runs[(preset, method)] = rankings
    if not runs:
        raise ValidationError(f"no .run files in {runs_dir}")
    if request.k_min < 1 or request.k_max < request.k_min:
        raise ValidationError(f"bad eval k range [{request.k_min}, {request.k_max}]")
    report = sweep_and_report(runs, qrels, range(request.k_min, request.k_max + 1))
    return schemas.EvalResponse(report=_report_model(report))


def export_qrels_handler(request: schemas.ExportQrelsRequest) -> schemas.ExportQrelsResponse:
    corpus, _ = load_corpus(request.corpus_path)
    warnings = export_qrels(corpus, request.output_path, include_unknown=request.include_unknown)
    n_lines = len(Path(request.output_path).read_text(encoding="utf-8").splitlines())
    return schemas.ExportQrelsResponse(
        output_path=request.output_path, n_lines=n_lines, warnings=warnings
    )
