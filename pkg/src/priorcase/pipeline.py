"""Experiment orchestration: configs, engine assembly, runs, manifests.

A run is declarative: an ExperimentConfig names the corpus, role presets,
annotator strategy, retrieval methods and all stage parameters. Methods:

* ``bm25_full``        - BM25 over the whole corpus (standalone baseline),
* ``bm25_candidates``  - BM25 restricted to the vector top-k_vec set,
* ``vector``           - dense IVF-FLAT search alone,
* ``cross_encoder``    - pair-scorer re-ranking of the raw vector candidates,
* ``trace_full``       - vector -> BM25-on-candidates -> RRF -> re-ranking.

Every run writes per-(preset, method) run files, a qrels export, a report,
and a manifest capturing the resolved config, seeds, corpus hash, stage
timings and warnings. With the stub scorer and a fixed seed, re-running an
identical config reproduces byte-identical run files.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping

import yaml

from . import __version__
from .corpus import (
    Corpus,
    LoadReport,
    TextTransform,
    corpus_stats,
    drop_citation_sentences,
    load_corpus,
    mask_document,
    save_corpus,
    transform_document,
)
from .errors import ScorerTransportError, StageError, ValidationError
from .evaluation import (
    EvalReport,
    Qrels,
    qrels_from_corpus,
    save_run,
    sweep_and_report,
)
from .fusion import RankedList, RrfConfig, rrf_fuse
from .lexical import (
    Bm25Config,
    InvertedIndex,
    build_index,
    load_index,
    save_index,
    score_candidates,
    search as bm25_search,
    tokenize,
)
from .protocol import SidecarClient
from .rerank import (
    ChunkingConfig,
    ExternalPairScorer,
    JaccardPairScorer,
    PairScorer,
    rerank,
)
from .segmenter import (
    ANNOTATOR_STRATEGIES,
    Annotator,
    CuePhraseAnnotator,
    ExternalAnnotator,
    RoleConfig,
    RoleQuery,
    annotate_document,
    build_role_query,
    load_cue_table,
)
from .vector import (
    ExternalEmbedder,
    HashingEmbedder,
    IvfFlatIndex,
    IvfParams,
    SearchParams,
    build_ivf,
    default_nlist,
    default_nprobe,
    embed_texts,
    load_vector_index,
    save_vector_index,
    search_ivf,
)

SCORER_ENDPOINT_ENV = "PRIORCASE_SCORER_ENDPOINT"

METHODS = ("bm25_full", "bm25_candidates", "vector", "cross_encoder", "trace_full")
_VECTOR_METHODS = {"bm25_candidates", "vector", "cross_encoder", "trace_full"}
_LEXICAL_METHODS = {"bm25_full", "bm25_candidates", "trace_full"}
_RERANK_METHODS = {"cross_encoder", "trace_full"}

MANIFEST_FORMAT = "priorcase-manifest"
MANIFEST_VERSION = 1


@dataclass(frozen=True)
class PreprocessConfig:
    mask_citations: bool = True
    drop_citation_sentences: bool = False
    char_cap: int = 60_000
    truncate_queries: bool = True


@dataclass(frozen=True)
class EmbedderConfig:
    kind: str = "hashing"  # hashing | external
    dimension: int = 768

    def __post_init__(self) -> None:
        if self.kind not in ("hashing", "external"):
            raise ValidationError(f"embedder kind must be hashing|external, got {self.kind!r}")


@dataclass(frozen=True)
class IvfConfig:
    nlist: int | None = None  # None -> min(2048, ceil(sqrt(n)))
    kmeans_iters: int = 10


@dataclass(frozen=True)
class SearchConfig:
    nprobe: int | None = None  # None -> ceil(nlist / 16)


@dataclass(frozen=True)
class ScorerConfig:
    kind: str = "stub"  # stub | external
    endpoint: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("stub", "external"):
            raise ValidationError(f"scorer kind must be stub|external, got {self.kind!r}")


@dataclass(frozen=True)
class EvalConfig:
    k_min: int = 1
    k_max: int = 20
    best_by: str = "f1"  # f1 | precision | recall

    def __post_init__(self) -> None:
        if self.k_min < 1 or self.k_max < self.k_min:
            raise ValidationError(f"bad eval k range [{self.k_min}, {self.k_max}]")
        if self.best_by not in ("f1", "precision", "recall"):
            raise ValidationError(f"bad best-k criterion {self.best_by!r}")

    @property
    def k_range(self) -> range:
        return range(self.k_min, self.k_max + 1)


@dataclass(frozen=True)
class ExperimentConfig:
    corpus_path: str
    output_dir: str = "runs/experiment"
    presets: tuple[str, ...] = ("full",)
    methods: tuple[str, ...] = ("trace_full",)
    annotator: str = "heuristic"
    k_vec: int = 1000
    seed: int = 0
    bm25: Bm25Config = field(default_factory=Bm25Config)
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    ivf: IvfConfig = field(default_factory=IvfConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    rrf: RrfConfig = field(default_factory=RrfConfig)
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    cue_table_path: str | None = None

    def __post_init__(self) -> None:
        for preset in self.presets:
            RoleConfig.preset(preset)
        for method in self.methods:
            if method not in METHODS:
                raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")
        if self.annotator not in ANNOTATOR_STRATEGIES:
            raise ValidationError(f"unknown annotator strategy {self.annotator!r}")
        if self.k_vec < 1:
            raise ValidationError(f"k_vec must be >= 1, got {self.k_vec}")
        if not self.presets:
            raise ValidationError("at least one role preset required")
        if not self.methods:
            raise ValidationError("at least one method required")

    def to_dict(self) -> dict:
        return {
            "corpus_path": self.corpus_path,
            "output_dir": self.output_dir,
            "presets": list(self.presets),
            "methods": list(self.methods),
            "annotator": self.annotator,
            "k_vec": self.k_vec,
            "seed": self.seed,
            "bm25": {
                "k1": self.bm25.k1,
                "b": self.bm25.b,
                "lowercase": self.bm25.lowercase,
                "stopwords": sorted(self.bm25.stopwords) if self.bm25.stopwords else None,
            },
            "embedder": {"kind": self.embedder.kind, "dimension": self.embedder.dimension},
            "ivf": {"nlist": self.ivf.nlist, "kmeans_iters": self.ivf.kmeans_iters},
            "search": {"nprobe": self.search.nprobe},
            "rrf": {"k_const": self.rrf.k_const},
            "chunking": {
                "max_chars": self.chunking.max_chars,
                "overlap_chars": self.chunking.overlap_chars,
                "aggregation": self.chunking.aggregation,
                "rerank_depth": self.chunking.rerank_depth,
            },
            "preprocess": {
                "mask_citations": self.preprocess.mask_citations,
                "drop_citation_sentences": self.preprocess.drop_citation_sentences,
                "char_cap": self.preprocess.char_cap,
                "truncate_queries": self.preprocess.truncate_queries,
            },
            "scorer": {"kind": self.scorer.kind, "endpoint": self.scorer.endpoint},
            "eval": {"k_min": self.eval.k_min, "k_max": self.eval.k_max, "best_by": self.eval.best_by},
            "cue_table_path": self.cue_table_path,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ExperimentConfig":
        def sub(key: str) -> dict:
            value = raw.get(key) or {}
            if not isinstance(value, Mapping):
                raise ValidationError(f"config section {key!r} must be a mapping")
            return dict(value)

        known = {
            "corpus_path", "output_dir", "presets", "methods", "annotator",
            "k_vec", "seed", "bm25", "embedder", "ivf", "search", "rrf",
            "chunking", "preprocess", "scorer", "eval", "cue_table_path",
        }
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        if "corpus_path" not in raw:
            raise ValidationError("config is missing corpus_path")
        bm25_raw = sub("bm25")
        if "stopwords" in bm25_raw and bm25_raw["stopwords"] is not None:
            bm25_raw["stopwords"] = frozenset(bm25_raw["stopwords"])
        try:
            return cls(
                corpus_path=str(raw["corpus_path"]),
                output_dir=str(raw.get("output_dir", "runs/experiment")),
                presets=tuple(raw.get("presets", ("full",))),
                methods=tuple(raw.get("methods", ("trace_full",))),
                annotator=str(raw.get("annotator", "heuristic")),
                k_vec=int(raw.get("k_vec", 1000)),
                seed=int(raw.get("seed", 0)),
                bm25=Bm25Config(**bm25_raw),
                embedder=EmbedderConfig(**sub("embedder")),
                ivf=IvfConfig(**sub("ivf")),
                search=SearchConfig(**sub("search")),
                rrf=RrfConfig(**sub("rrf")),
                chunking=ChunkingConfig(**sub("chunking")),
                preprocess=PreprocessConfig(**sub("preprocess")),
                scorer=ScorerConfig(**sub("scorer")),
                eval=EvalConfig(**sub("eval")),
                cue_table_path=raw.get("cue_table_path"),
            )
        except TypeError as exc:
            raise ValidationError(f"bad config: {exc}") from None

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ExperimentConfig":
        try:
            raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except (OSError, yaml.YAMLError) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, Mapping):
            raise ValidationError(f"config {path} is not a mapping")
        return cls.from_dict(raw)


def resolve_scorer_endpoint(config: ScorerConfig) -> str | None:
    """Environment variable wins over the config file (endpoint only)."""
    return os.environ.get(SCORER_ENDPOINT_ENV) or config.endpoint


@dataclass
class RetrievalEngine:
    """Read-only retrieval state shared by every query of a run."""

    config: ExperimentConfig
    corpus: Corpus
    doc_texts: dict[str, str]
    lexical_index: InvertedIndex | None = None
    vector_index: IvfFlatIndex | None = None
    embedder: object | None = None
    scorer: PairScorer | None = None
    annotator: Annotator | None = None
    client: SidecarClient | None = None
    nprobe: int = 1
    warnings: list[str] = field(default_factory=list)
    stage_timings: dict[str, float] = field(default_factory=dict)
    load_report: LoadReport | None = None

    def require_lexical(self) -> InvertedIndex:
        if self.lexical_index is None:
            raise StageError("stage 'lexical index': index not built for this run")
        return self.lexical_index

    def require_vector(self) -> IvfFlatIndex:
        if self.vector_index is None:
            raise StageError("stage 'vector index': index not built for this run")
        return self.vector_index

    def embed_query(self, text: str):
        if self.embedder is None:
            raise StageError("stage 'embed': no embedder configured")
        cap = self.config.preprocess.char_cap if self.config.preprocess.truncate_queries else len(text)
        return embed_texts([text], self.embedder, char_cap=max(cap, 1))[0]

    def close(self) -> None:
        if self.client is not None:
            self.client.close()


def _make_annotator(config: ExperimentConfig, client: SidecarClient | None) -> Annotator | None:
    if config.annotator == "file":
        return None
    if config.annotator == "heuristic":
        rules = load_cue_table(config.cue_table_path) if config.cue_table_path else None
        return CuePhraseAnnotator(rules)
    if client is None:
        raise ValidationError("annotator strategy 'external' requires a scorer endpoint")
    return ExternalAnnotator(client)


def preprocess_corpus(
    corpus: Corpus,
    config: PreprocessConfig,
    text_transform: TextTransform | None = None,
) -> tuple[Corpus, list[str]]:
    """Text-transform hook, citation masking, and (optionally) the
    citation-sentence-drop variant.

    The hook (entity normalization and the like) defaults to identity and
    runs before masking; truncation to the char cap happens later, at
    embedding time, i.e. after masking.
    """
    warnings: list[str] = []
    if text_transform is not None:
        corpus = corpus.map_documents(lambda d: transform_document(d, text_transform))
    if config.mask_citations:
        corpus = corpus.map_documents(mask_document)
    if config.drop_citation_sentences:
        from .segmenter import segment_sentences, assign_roles, CuePhraseAnnotator as _Cue

        fallback = _Cue()

        def ensure_segmented(doc):
            if doc.sentences:
                return doc
            spans = segment_sentences(doc.raw_text)
            return replace(doc, sentences=tuple(assign_roles([s.text for s in spans], fallback)))

        corpus = corpus.map_documents(ensure_segmented)
        dropped_all: list[str] = []

        def drop(doc):
            out = drop_citation_sentences(doc)
            if not out.sentences:
                dropped_all.append(doc.doc_id)
            return out

        corpus = corpus.map_documents(drop)
        for doc_id in dropped_all:
            warnings.append(f"{doc_id}: all sentences dropped by citation filter")
    return corpus, warnings


def annotate_corpus(
    corpus: Corpus, config: ExperimentConfig, annotator: Annotator | None
) -> Corpus:
    """Annotate query documents (all documents under the drop variant)."""
    need_all = config.preprocess.drop_citation_sentences

    def annotate(doc):
        if not (doc.is_query or need_all):
            return doc
        return annotate_document(doc, config.annotator, annotator)

    return corpus.map_documents(annotate)


def build_engine(
    config: ExperimentConfig,
    corpus: Corpus | None = None,
    text_transform: TextTransform | None = None,
) -> RetrievalEngine:
    """Load, preprocess, annotate, and index everything the methods need."""
    timings: dict[str, float] = {}
    warnings: list[str] = []
    load_report: LoadReport | None = None

    t0 = time.perf_counter()
    if corpus is None:
        corpus, load_report = load_corpus(config.corpus_path)
        warnings.extend(load_report.warnings)
    timings["load"] = time.perf_counter() - t0

    endpoint = resolve_scorer_endpoint(config.scorer)
    needs_client = (
        config.scorer.kind == "external"
        or config.embedder.kind == "external"
        or config.annotator == "external"
    )
    client: SidecarClient | None = None
    if needs_client:
        if not endpoint:
            raise ValidationError(
                "external embedder/scorer/annotator configured but no endpoint given "
                f"(config scorer.endpoint or ${SCORER_ENDPOINT_ENV})"
            )
        client = SidecarClient(endpoint)

    t0 = time.perf_counter()
    corpus, pre_warnings = preprocess_corpus(corpus, config.preprocess, text_transform)
    warnings.extend(pre_warnings)
    timings["preprocess"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    annotator = _make_annotator(config, client)
    corpus = annotate_corpus(corpus, config, annotator)
    timings["annotate"] = time.perf_counter() - t0

    doc_texts = corpus.body_texts()
    engine = RetrievalEngine(
        config=config,
        corpus=corpus,
        doc_texts=doc_texts,
        annotator=annotator,
        client=client,
        warnings=warnings,
        stage_timings=timings,
        load_report=load_report,
    )

    methods = set(config.methods)
    if methods & _LEXICAL_METHODS:
        t0 = time.perf_counter()
        engine.lexical_index = build_index(doc_texts, config.bm25)
        timings["lexical_index"] = time.perf_counter() - t0

    if methods & _VECTOR_METHODS:
        t0 = time.perf_counter()
        if config.embedder.kind == "external":
            assert client is not None
            embedder = ExternalEmbedder(client)
        else:
            embedder = HashingEmbedder(config.embedder.dimension)
        engine.embedder = embedder
        ids = sorted(doc_texts)
        matrix = embed_texts([doc_texts[i] for i in ids], embedder, config.preprocess.char_cap)
        empties = [ids[row] for row in range(len(ids)) if not matrix[row].any()]
        for doc_id in empties:
            warnings.append(f"{doc_id}: embeds to the zero vector (empty text)")
        nlist = config.ivf.nlist if config.ivf.nlist is not None else default_nlist(len(ids))
        params = IvfParams(nlist=nlist, kmeans_iters=config.ivf.kmeans_iters, seed=config.seed)
        index = build_ivf({i: matrix[row] for row, i in enumerate(ids)}, params)
        if index.clamped:
            warnings.append(f"nlist clamped from {nlist} to {index.nlist} (corpus size)")
        engine.vector_index = index
        engine.nprobe = (
            config.search.nprobe if config.search.nprobe is not None else default_nprobe(index.nlist)
        )
        if not 1 <= engine.nprobe <= index.nlist:
            raise ValidationError(
                f"nprobe {engine.nprobe} out of range 1..{index.nlist}"
            )
        timings["vector_index"] = time.perf_counter() - t0

    if methods & _RERANK_METHODS or config.scorer.kind == "external":
        engine.scorer = (
            ExternalPairScorer(client) if config.scorer.kind == "external" else JaccardPairScorer(config.bm25)
        )

    return engine


def _vector_candidates(engine: RetrievalEngine, query: RoleQuery) -> RankedList:
    index = engine.require_vector()
    q_vec = engine.embed_query(query.text)
    params = SearchParams(nprobe=engine.nprobe, top_k=engine.config.k_vec)
    return search_ivf(index, q_vec, params, query_id=query.query_id)


def _retrieve(
    engine: RetrievalEngine, query: RoleQuery, method: str
) -> tuple[RankedList, frozenset[str] | None]:
    """One query through one method; returns (result, vector candidate set)."""
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}")
    config = engine.config
    if method == "bm25_full":
        tokens = tokenize(query.text, config.bm25)
        ranking = bm25_search(
            tokens, engine.require_lexical(), top_k=config.k_vec, query_id=query.query_id
        )
        return ranking.without(query.query_id), None

    candidates = _vector_candidates(engine, query)
    candidate_ids = frozenset(candidates.doc_ids())
    if method == "vector":
        return candidates.top(config.k_vec).without(query.query_id), candidate_ids

    if method == "bm25_candidates":
        tokens = tokenize(query.text, config.bm25)
        ranking = score_candidates(
            tokens, candidates.doc_ids(), engine.require_lexical(), query_id=query.query_id
        )
        return ranking.without(query.query_id), candidate_ids

    if engine.scorer is None:
        raise StageError("stage 'rerank': no pair scorer configured")

    if method == "cross_encoder":
        if not candidates.entries:
            return candidates, candidate_ids
        reranked = rerank(query.text, candidates, engine.scorer, config.chunking, engine.doc_texts)
        return reranked.without(query.query_id), candidate_ids

    # trace_full
    tokens = tokenize(query.text, config.bm25)
    bm25_list = score_candidates(
        tokens, candidates.doc_ids(), engine.require_lexical(), query_id=query.query_id
    )
    fused = rrf_fuse([candidates, bm25_list], config.rrf)
    if not fused.entries:
        return fused, candidate_ids
    reranked = rerank(query.text, fused, engine.scorer, config.chunking, engine.doc_texts)
    return reranked.without(query.query_id), candidate_ids


def retrieve_query(engine: RetrievalEngine, query: RoleQuery, method: str) -> RankedList:
    """Run one query through one method; the query's own document is
    removed before returning."""
    ranking, _ = _retrieve(engine, query, method)
    return ranking


@dataclass
class RunResult:
    report: EvalReport
    manifest: dict
    output_dir: Path
    run_files: dict[tuple[str, str], Path]
    rankings: dict[tuple[str, str], dict[str, RankedList]]
    candidate_sets: dict[tuple[str, str], dict[str, frozenset[str]]]


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run_experiment(config: ExperimentConfig, corpus: Corpus | None = None) -> RunResult:
    """Execute every preset x method block and evaluate the results.

    On a stage failure the partial outputs are preserved and the manifest
    is written with status "failed" before the error is re-raised.
    """
    out_dir = Path(config.output_dir)
    runs_dir = out_dir / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)

    manifest: dict = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "engine_version": __version__,
        "status": "running",
        "started_at": _utc_now(),
        "config": config.to_dict(),
        "choices": {
            "truncation_order": "mask_then_truncate",
            "query_truncation": config.preprocess.truncate_queries,
            "best_k_criterion": config.eval.best_by,
        },
        "warnings": [],
        "stage_timings": {},
    }
    manifest_path = out_dir / "manifest.json"

    def flush_manifest() -> None:
        import json as _json

        manifest_path.write_text(_json.dumps(manifest, indent=2), encoding="utf-8")

    engine: RetrievalEngine | None = None
    try:
        engine = build_engine(config, corpus)
        manifest["resolved"] = {
            "corpus_sha256": engine.corpus.content_hash(),
            "n_documents": len(engine.corpus),
            "n_query_documents": len(engine.corpus.query_documents()),
            "nlist": engine.vector_index.nlist if engine.vector_index else None,
            "nprobe": engine.nprobe if engine.vector_index else None,
            "scorer_endpoint": resolve_scorer_endpoint(config.scorer)
            if config.scorer.kind == "external"
            else None,
        }
        manifest["stage_timings"].update(engine.stage_timings)
        manifest["warnings"].extend(engine.warnings)

        query_docs = sorted(engine.corpus.query_documents(), key=lambda d: d.doc_id)
        if not query_docs:
            raise ValidationError("corpus has no query documents (no citation links)")

        rankings: dict[tuple[str, str], dict[str, RankedList]] = {}
        candidate_sets: dict[tuple[str, str], dict[str, frozenset[str]]] = {}
        run_files: dict[tuple[str, str], Path] = {}
        t_retrieve = time.perf_counter()
        n_empty = 0
        rerank_in_play = bool(set(config.methods) & _RERANK_METHODS)
        for preset in config.presets:
            role_config = RoleConfig.preset(preset)
            queries: dict[str, RoleQuery] = {}
            for doc in query_docs:
                rq = build_role_query(doc, role_config)
                if rq.is_empty:
                    n_empty += 1
                    manifest["warnings"].append(f"{preset}/{doc.doc_id}: empty role query")
                elif rerank_in_play and len(rq.text) > config.chunking.max_chars:
                    manifest["warnings"].append(
                        f"{preset}/{doc.doc_id}: query exceeds chunk cap "
                        f"({len(rq.text)} > {config.chunking.max_chars}); truncated for pair scoring"
                    )
                queries[doc.doc_id] = rq
            for method in config.methods:
                block: dict[str, RankedList] = {}
                cands: dict[str, frozenset[str]] = {}
                for doc_id, rq in queries.items():
                    block[doc_id], candidate_ids = _retrieve(engine, rq, method)
                    if candidate_ids is not None:
                        cands[doc_id] = candidate_ids
                rankings[(preset, method)] = block
                candidate_sets[(preset, method)] = cands
                run_path = runs_dir / f"{preset}__{method}.run"
                save_run(run_path, block, method)
                run_files[(preset, method)] = run_path
        manifest["stage_timings"]["retrieve"] = time.perf_counter() - t_retrieve
        manifest["n_empty_role_queries"] = n_empty

        t_eval = time.perf_counter()
        qrels: Qrels = qrels_from_corpus(engine.corpus)
        report = sweep_and_report(
            rankings,
            qrels,
            config.eval.k_range,
            manifest_path=str(manifest_path),
            best_by=config.eval.best_by,
        )
        report.save(out_dir)
        from .corpus import export_qrels

        qrels_warnings = export_qrels(engine.corpus, out_dir / "qrels.txt")
        manifest["warnings"].extend(qrels_warnings)
        manifest["stage_timings"]["eval"] = time.perf_counter() - t_eval

        manifest["status"] = "ok"
        manifest["finished_at"] = _utc_now()
        flush_manifest()
        return RunResult(
            report=report,
            manifest=manifest,
            output_dir=out_dir,
            run_files=run_files,
            rankings=rankings,
            candidate_sets=candidate_sets,
        )
    except Exception as exc:
        manifest["status"] = "failed"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        manifest["finished_at"] = _utc_now()
        flush_manifest()
        if isinstance(exc, (ValidationError, StageError, ScorerTransportError)):
            raise
        raise StageError(f"experiment failed: {exc}") from exc
    finally:
        if engine is not None:
            engine.close()


def search_adhoc(
    engine: RetrievalEngine,
    method: str,
    text: str | None = None,
    doc_id: str | None = None,
    preset: str = "full",
    top_k: int = 10,
) -> RankedList:
    """One ad-hoc query: raw text, or a corpus document filtered by preset."""
    if (text is None) == (doc_id is None):
        raise ValidationError("search: provide exactly one of text or doc_id")
    if doc_id is not None:
        doc = engine.corpus.get(doc_id)
        query = build_role_query(doc, RoleConfig.preset(preset))
    else:
        query = RoleQuery(query_id="", text=text or "", config_name=preset)
    ranking = retrieve_query(engine, query, method)
    return ranking.top(top_k)


WORKSPACE_META = "workspace.json"


def save_workspace(engine: RetrievalEngine, directory: str | Path) -> Path:
    """Persist the preprocessed corpus and both indexes for later searches."""
    import json as _json

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_corpus(engine.corpus, directory / "corpus.annotated.jsonl")
    meta = {
        "format": "priorcase-workspace",
        "version": 1,
        "engine_version": __version__,
        "config": engine.config.to_dict(),
        "corpus_sha256": engine.corpus.content_hash(),
        "nprobe": engine.nprobe,
    }
    if engine.lexical_index is not None:
        save_index(engine.lexical_index, directory / "lexical.json")
        meta["lexical"] = "lexical.json"
    if engine.vector_index is not None:
        save_vector_index(engine.vector_index, directory / "vector.npz")
        meta["vector"] = "vector.npz"
    (directory / WORKSPACE_META).write_text(_json.dumps(meta, indent=2), encoding="utf-8")
    return directory


def load_workspace(directory: str | Path) -> RetrievalEngine:
    """Rebuild an engine from a persisted workspace without re-indexing."""
    import json as _json

    directory = Path(directory)
    meta_path = directory / WORKSPACE_META
    if not meta_path.exists():
        raise ValidationError(f"not a workspace directory (missing {WORKSPACE_META}): {directory}")
    meta = _json.loads(meta_path.read_text(encoding="utf-8"))
    config = ExperimentConfig.from_dict(meta["config"])
    corpus_path = directory / "corpus.annotated.jsonl"
    corpus, _ = load_corpus(corpus_path)

    endpoint = resolve_scorer_endpoint(config.scorer)
    needs_client = (
        config.scorer.kind == "external"
        or config.embedder.kind == "external"
        or config.annotator == "external"
    )
    client = SidecarClient(endpoint) if endpoint and needs_client else None

    engine = RetrievalEngine(
        config=config,
        corpus=corpus,
        doc_texts=corpus.body_texts(),
        annotator=_make_annotator(config, client),
        client=client,
        nprobe=int(meta.get("nprobe", 1)),
    )
    if "lexical" in meta:
        engine.lexical_index = load_index(directory / meta["lexical"], expected_config=config.bm25)
    if "vector" in meta:
        engine.vector_index = load_vector_index(directory / meta["vector"])
        if config.embedder.kind == "external":
            assert client is not None
            engine.embedder = ExternalEmbedder(client)
        else:
            engine.embedder = HashingEmbedder(config.embedder.dimension)
    engine.scorer = (
        ExternalPairScorer(client)
        if config.scorer.kind == "external" and client is not None
        else JaccardPairScorer(config.bm25)
    )
    return engine


def corpus_summary(path: str | Path) -> tuple[dict, list[str]]:
    """Load + validate a corpus file and summarize it (CLI `ingest`)."""
    corpus, report = load_corpus(path)
    stats = corpus_stats(corpus)
    summary = {
        "n_documents": stats.n_documents,
        "avg_document_size": stats.avg_document_size,
        "n_query_documents": stats.n_query_documents,
        "total_citation_links": stats.total_citation_links,
        "avg_citations_per_query": stats.avg_citations_per_query,
        "vocabulary_size": stats.vocabulary_size,
        "n_annotated": report.n_annotated,
    }
    return summary, report.warnings
