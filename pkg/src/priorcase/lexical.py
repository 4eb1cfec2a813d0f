"""Tokenization, inverted index, and Okapi BM25 scoring.

Scoring always uses corpus-global statistics (N, df, avgdl) even when only
a candidate subset is ranked: candidate restriction is an efficiency
device, not a statistical re-scoping, so a document's score is identical
whether it is ranked against the whole corpus or against three candidates.

Score of document d for query q (sum over *distinct* query tokens t):

    idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))

with idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), which is non-negative
for every df <= N.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ValidationError
from .fusion import RankedList, SOURCE_BM25

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

INDEX_FORMAT = "priorcase-lexical"
INDEX_VERSION = 1


@dataclass(frozen=True)
class Bm25Config:
    k1: float = 1.2
    b: float = 0.75
    lowercase: bool = True
    stopwords: frozenset[str] | None = None

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ValidationError(f"bm25 k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValidationError(f"bm25 b must be in [0, 1], got {self.b}")

    def fingerprint(self) -> str:
        """Stable digest of the config, used to fail fast on stale index loads."""
        stop = sorted(self.stopwords) if self.stopwords else []
        blob = json.dumps(
            {"k1": self.k1, "b": self.b, "lowercase": self.lowercase, "stopwords": stop},
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


DEFAULT_BM25 = Bm25Config()


def tokenize(text: str, config: Bm25Config = DEFAULT_BM25) -> list[str]:
    """Split text into maximal runs of letters/digits.

    Lowercases when configured; drops configured stopwords (matched on the
    lowercased form). Hyphens, underscores and punctuation all split.
    """
    tokens = _TOKEN_RE.findall(text)
    if config.lowercase:
        tokens = [t.lower() for t in tokens]
    if config.stopwords:
        stop = {w.lower() for w in config.stopwords}
        tokens = [t for t in tokens if t.lower() not in stop]
    return tokens


@dataclass(frozen=True)
class InvertedIndex:
    """Token -> postings map plus the corpus-global length statistics.

    Postings are (doc_id, term frequency) pairs in ascending doc_id order;
    the sum of a document's term frequencies equals its doc_length.
    """

    postings: Mapping[str, tuple[tuple[str, int], ...]]
    doc_lengths: Mapping[str, int]
    avg_doc_length: float
    n_docs: int
    config: Bm25Config

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.doc_lengths

    def df(self, token: str) -> int:
        return len(self.postings.get(token, ()))

    def idf(self, token: str) -> float:
        df = self.df(token)
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))

    def term_frequency(self, token: str, doc_id: str) -> int:
        for posting_doc, tf in self.postings.get(token, ()):
            if posting_doc == doc_id:
                return tf
        return 0

    def vocabulary_size(self) -> int:
        return len(self.postings)


def build_index(
    texts: Mapping[str, str] | Iterable[tuple[str, str]],
    config: Bm25Config = DEFAULT_BM25,
) -> InvertedIndex:
    """Build an inverted index over doc_id -> text pairs.

    Deterministic: postings are ordered by ascending doc_id regardless of
    input order.
    """
    items = texts.items() if isinstance(texts, Mapping) else texts
    freqs: dict[str, dict[str, int]] = {}
    doc_lengths: dict[str, int] = {}
    for doc_id, text in items:
        if doc_id in doc_lengths:
            raise ValidationError(f"build_index: duplicate doc_id {doc_id!r}")
        tokens = tokenize(text, config)
        doc_lengths[doc_id] = len(tokens)
        counts: dict[str, int] = {}
        for token in tokens:
            counts[token] = counts.get(token, 0) + 1
        for token, tf in counts.items():
            freqs.setdefault(token, {})[doc_id] = tf
    postings = {
        token: tuple(sorted(by_doc.items()))
        for token, by_doc in sorted(freqs.items())
    }
    n_docs = len(doc_lengths)
    avg = (sum(doc_lengths.values()) / n_docs) if n_docs else 0.0
    return InvertedIndex(
        postings=postings,
        doc_lengths=dict(sorted(doc_lengths.items())),
        avg_doc_length=avg,
        n_docs=n_docs,
        config=config,
    )


def _length_norm(index: InvertedIndex, cfg: Bm25Config, doc_id: str) -> float:
    if not index.avg_doc_length:
        return cfg.k1
    dl = index.doc_lengths[doc_id]
    return cfg.k1 * (1.0 - cfg.b + cfg.b * dl / index.avg_doc_length)


def bm25_score(
    query: Sequence[str],
    doc_id: str,
    index: InvertedIndex,
    config: Bm25Config | None = None,
) -> float:
    """Okapi BM25 score of one document for a tokenized query."""
    if doc_id not in index.doc_lengths:
        raise ValidationError(f"bm25_score: unknown doc_id {doc_id!r}")
    cfg = config or index.config
    norm = _length_norm(index, cfg, doc_id)
    score = 0.0
    for token in dict.fromkeys(query):  # distinct tokens, first-seen order
        tf = index.term_frequency(token, doc_id)
        if tf == 0:
            continue
        score += index.idf(token) * tf * (cfg.k1 + 1.0) / (tf + norm)
    return score


def _bulk_scores(
    query: Sequence[str],
    doc_ids: Sequence[str],
    index: InvertedIndex,
    cfg: Bm25Config,
) -> dict[str, float]:
    """Token-major scoring: one pass over each query token's posting list.

    Per-document contributions accumulate in the same distinct-token order
    as bm25_score, so the two paths produce bit-identical floats.
    """
    wanted = set(doc_ids)
    scores = {doc_id: 0.0 for doc_id in doc_ids}
    for token in dict.fromkeys(query):
        postings = index.postings.get(token)
        if not postings:
            continue
        idf = index.idf(token)
        for doc_id, tf in postings:
            if doc_id in wanted:
                norm = _length_norm(index, cfg, doc_id)
                scores[doc_id] += idf * tf * (cfg.k1 + 1.0) / (tf + norm)
    return scores


def score_candidates(
    query: Sequence[str],
    candidates: Iterable[str],
    index: InvertedIndex,
    query_id: str = "",
    config: Bm25Config | None = None,
) -> RankedList:
    """Rank exactly the candidate set by full-corpus BM25 score.

    Zero-score candidates stay in the list; ties order by ascending doc_id.
    """
    candidate_ids = list(candidates)
    unknown = [c for c in candidate_ids if c not in index.doc_lengths]
    if unknown:
        raise ValidationError(f"score_candidates: candidates not in index: {unknown[:5]!r}")
    if len(set(candidate_ids)) != len(candidate_ids):
        raise ValidationError("score_candidates: duplicate candidate ids")
    scores = _bulk_scores(query, candidate_ids, index, config or index.config)
    return RankedList.from_scores(query_id, scores.items(), SOURCE_BM25)


def search(
    query: Sequence[str],
    index: InvertedIndex,
    top_k: int | None = None,
    query_id: str = "",
    config: Bm25Config | None = None,
) -> RankedList:
    """Full-corpus BM25 search (standalone baseline mode).

    Every indexed document is ranked (zero-score documents tie-break by
    ascending doc_id at the tail), so restricting to the full candidate set
    reproduces this ranking exactly; the result is cut to top_k when given.
    """
    scores = _bulk_scores(query, list(index.doc_lengths), index, config or index.config)
    ranking = RankedList.from_scores(query_id, scores.items(), SOURCE_BM25)
    return ranking.top(top_k) if top_k is not None else ranking


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Persist the index with a header recording the build config."""
    payload = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "config": {
            "k1": index.config.k1,
            "b": index.config.b,
            "lowercase": index.config.lowercase,
            "stopwords": sorted(index.config.stopwords) if index.config.stopwords else None,
            "fingerprint": index.config.fingerprint(),
        },
        "postings": {t: [[d, tf] for d, tf in plist] for t, plist in index.postings.items()},
        "doc_lengths": dict(index.doc_lengths),
        "avg_doc_length": index.avg_doc_length,
        "n_docs": index.n_docs,
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_index(path: str | Path, expected_config: Bm25Config | None = None) -> InvertedIndex:
    """Load a persisted index; fail fast if the stored config is stale."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read lexical index {path}: {exc}") from exc
    if payload.get("format") != INDEX_FORMAT or payload.get("version") != INDEX_VERSION:
        raise ValidationError(f"{path}: not a v{INDEX_VERSION} {INDEX_FORMAT} file")
    raw_cfg = payload["config"]
    config = Bm25Config(
        k1=raw_cfg["k1"],
        b=raw_cfg["b"],
        lowercase=raw_cfg["lowercase"],
        stopwords=frozenset(raw_cfg["stopwords"]) if raw_cfg["stopwords"] else None,
    )
    if config.fingerprint() != raw_cfg["fingerprint"]:
        raise ValidationError(f"{path}: stored config fingerprint mismatch")
    if expected_config is not None and expected_config.fingerprint() != config.fingerprint():
        raise ValidationError(
            f"{path}: index was built with a different BM25 config; rebuild required"
        )
    postings = {
        t: tuple((d, int(tf)) for d, tf in plist)
        for t, plist in payload["postings"].items()
    }
    return InvertedIndex(
        postings=postings,
        doc_lengths={d: int(n) for d, n in payload["doc_lengths"].items()},
        avg_doc_length=float(payload["avg_doc_length"]),
        n_docs=int(payload["n_docs"]),
        config=config,
    )
