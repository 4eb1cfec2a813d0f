"""Pair-scorer re-ranking of fused candidates with chunked long documents.

Long candidate documents are split into overlapping character chunks; the
scorer rates each (query, chunk) pair and the chunk scores are aggregated
into one document score (length-weighted mean by default, max/mean
selectable). Only the top rerank_depth fused entries are re-scored; the
rest keep their fused order behind the re-scored block, with scores capped
at the block minimum so the ranked-list monotonicity invariant survives
the change of score scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

from . import lexical
from .errors import ValidationError
from .fusion import RankedEntry, RankedList, SOURCE_RERANK

AGGREGATION_MODES = ("weighted_mean", "max", "mean")


@dataclass(frozen=True)
class ChunkingConfig:
    max_chars: int = 2000
    overlap_chars: int = 200
    aggregation: str = "weighted_mean"
    rerank_depth: int = 100

    def __post_init__(self) -> None:
        if self.max_chars <= 0:
            raise ValidationError(f"max_chars must be > 0, got {self.max_chars}")
        if not 0 <= self.overlap_chars < self.max_chars:
            raise ValidationError(
                f"overlap_chars must be in [0, max_chars), got {self.overlap_chars}"
            )
        if self.aggregation not in AGGREGATION_MODES:
            raise ValidationError(
                f"aggregation must be one of {AGGREGATION_MODES}, got {self.aggregation!r}"
            )
        if self.rerank_depth < 0:
            raise ValidationError(f"rerank_depth must be >= 0, got {self.rerank_depth}")


def chunk_document(text: str, config: ChunkingConfig) -> list[str]:
    """Split text into overlapping chunks.

    Chunk i starts at i * (max_chars - overlap_chars); every chunk except
    possibly the last has max_chars characters. Empty text yields no
    chunks. Concatenating chunks with the overlaps removed reconstructs
    the text exactly.
    """
    if not text:
        return []
    stride = config.max_chars - config.overlap_chars
    chunks: list[str] = []
    start = 0
    while True:
        chunks.append(text[start : start + config.max_chars])
        if start + config.max_chars >= len(text):
            break
        start += stride
    return chunks


def aggregate_scores(chunk_scores: Sequence[tuple[float, int]], mode: str) -> float:
    """Combine (score, chunk_length) pairs into one document score."""
    if not chunk_scores:
        raise ValidationError("aggregate_scores: empty chunk score sequence")
    if mode == "weighted_mean":
        total_len = sum(length for _, length in chunk_scores)
        if total_len == 0:
            return sum(score for score, _ in chunk_scores) / len(chunk_scores)
        return sum(score * length for score, length in chunk_scores) / total_len
    if mode == "max":
        return max(score for score, _ in chunk_scores)
    if mode == "mean":
        return sum(score for score, _ in chunk_scores) / len(chunk_scores)
    raise ValidationError(f"unknown aggregation mode {mode!r}")


class PairScorer(Protocol):
    max_pair_length: int | None

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]: ...


class JaccardPairScorer:
    """Deterministic stub: token-set Jaccard similarity in [0, 1]."""

    max_pair_length: int | None = None

    def __init__(self, bm25_config: lexical.Bm25Config = lexical.DEFAULT_BM25):
        self._config = bm25_config

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        scores = []
        for query, chunk in pairs:
            q = set(lexical.tokenize(query, self._config))
            c = set(lexical.tokenize(chunk, self._config))
            union = q | c
            scores.append(len(q & c) / len(union) if union else 0.0)
        return scores


class ExternalPairScorer:
    """Scores pairs through the sidecar protocol."""

    def __init__(self, client):
        self._client = client
        self.max_pair_length = client.hello().max_pair_length

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        if not pairs:
            return []
        return self._client.score_pairs([list(p) for p in pairs])


def effective_chunking(config: ChunkingConfig, scorer: PairScorer) -> ChunkingConfig:
    """Respect an external scorer's advertised pair-length limit."""
    limit = getattr(scorer, "max_pair_length", None)
    if not limit or limit >= config.max_chars:
        return config
    return ChunkingConfig(
        max_chars=limit,
        overlap_chars=min(config.overlap_chars, limit - 1),
        aggregation=config.aggregation,
        rerank_depth=config.rerank_depth,
    )


def rerank(
    query_text: str,
    fused: RankedList,
    scorer: PairScorer,
    config: ChunkingConfig,
    doc_texts: Mapping[str, str],
) -> RankedList:
    """Re-score the top rerank_depth fused entries and re-sort them.

    Entries beyond rerank_depth keep their fused order after the re-scored
    block; their scores are min(fused score, block minimum) so scores stay
    non-increasing. Documents with no text to chunk score 0. The query is
    never chunked; if longer than max_chars it is truncated (callers
    record the truncation).
    """
    if not fused.entries:
        raise ValidationError("rerank: fused input list is empty")
    cfg = effective_chunking(config, scorer)
    head = fused.entries[: cfg.rerank_depth]
    tail = fused.entries[cfg.rerank_depth :]

    query = query_text[: cfg.max_chars]
    pairs: list[tuple[str, str]] = []
    slices: list[tuple[str, list[int]]] = []  # doc_id -> chunk lengths
    for entry in head:
        text = doc_texts.get(entry.doc_id, "")
        chunks = chunk_document(text, cfg)
        pairs.extend((query, chunk) for chunk in chunks)
        slices.append((entry.doc_id, [len(c) for c in chunks]))
    flat_scores = scorer.score_pairs(pairs) if pairs else []
    if len(flat_scores) != len(pairs):
        raise ValidationError(
            f"scorer returned {len(flat_scores)} scores for {len(pairs)} pairs"
        )

    rescored: list[tuple[str, float]] = []
    cursor = 0
    for doc_id, lengths in slices:
        doc_scores = [
            (flat_scores[cursor + i], length) for i, length in enumerate(lengths)
        ]
        cursor += len(lengths)
        score = aggregate_scores(doc_scores, cfg.aggregation) if doc_scores else 0.0
        rescored.append((doc_id, score))
    rescored.sort(key=lambda item: (-item[1], item[0]))

    entries: list[RankedEntry] = [
        RankedEntry(doc_id, i + 1, score) for i, (doc_id, score) in enumerate(rescored)
    ]
    floor = entries[-1].score if entries else None
    offset = len(entries)
    for i, entry in enumerate(tail):
        score = entry.score if floor is None else min(entry.score, floor)
        entries.append(RankedEntry(entry.doc_id, offset + i + 1, score))
    return RankedList(fused.query_id, tuple(entries), SOURCE_RERANK)
