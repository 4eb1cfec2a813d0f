"""Corpus model: documents, rhetorical annotations, citation links.

A corpus file holds one UTF-8 JSON object per line:

    {"doc_id": "...", "text": "...",
     "sentences": [{"text": "...", "role": "Facts"}, ...],   # optional
     "citations": ["other-doc-id", ...]}                      # optional

Citation links double as relevance judgments: a document with a non-empty
citation set is a query document and its cited ids are its gold relevant
priors. Corpora are immutable after load and safe for concurrent reads.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping

from . import lexical
from .errors import ValidationError

CITATION_TOKEN = "<CITATION>"

# Matches: already-masked tokens (keeps masking idempotent), anchor-tagged
# hyperlink spans, and "Name v. Name" case-reference patterns. Conservative
# by design; callers may override with a corpus-specific pattern.
# Capitalized sentence starters never begin or continue a party name; a
# connector (of/the/and) must be followed by another name word; a party
# phrase neither continues past nor ends on a word-final "." - that keeps
# sentence terminators out of the mask and stops the pattern at sentence
# boundaries.
_STARTER = r"(?:In|The|A|An|On|At|As|It|He|She|We|If|But|Or|For|This|That|See|Per)"
_WORD = rf"(?!{_STARTER}\b)[A-Z][\w.&'()\-]*"
_PARTY = rf"{_WORD}(?:(?<!\.)\s+(?:(?:of|the|and)\s+)?{_WORD})*"
DEFAULT_CITATION_PATTERN = re.compile(
    r"<CITATION>"
    r"|<a\s[^>]*>.*?</a>"
    rf"|\b{_PARTY}\s+[Vv]s?\.\s+{_PARTY}(?<!\.)",
    re.DOTALL,
)


class RhetoricalRole(str, Enum):
    FACTS = "Facts"
    ISSUE = "Issue"
    ARGUMENT = "Argument"
    REASONING = "Reasoning"
    DECISION = "Decision"
    OTHER = "Other"


# Canonicalization for the naming drift seen in annotation files
# ("Issues" vs "Issue", "Arguments" vs "Argument", ...).
ROLE_ALIASES: Mapping[str, RhetoricalRole] = {
    "facts": RhetoricalRole.FACTS,
    "fact": RhetoricalRole.FACTS,
    "issue": RhetoricalRole.ISSUE,
    "issues": RhetoricalRole.ISSUE,
    "argument": RhetoricalRole.ARGUMENT,
    "arguments": RhetoricalRole.ARGUMENT,
    "reasoning": RhetoricalRole.REASONING,
    "decision": RhetoricalRole.DECISION,
    "other": RhetoricalRole.OTHER,
}


def parse_role(name: str) -> RhetoricalRole:
    role = ROLE_ALIASES.get(name.strip().lower())
    if role is None:
        raise ValidationError(f"unknown rhetorical role {name!r}")
    return role


@dataclass(frozen=True)
class AnnotatedSentence:
    index: int
    text: str
    role: RhetoricalRole

    def __post_init__(self) -> None:
        if not self.text:
            raise ValidationError(f"sentence {self.index}: empty text")


@dataclass(frozen=True)
class Document:
    doc_id: str
    raw_text: str
    sentences: tuple[AnnotatedSentence, ...] = ()
    cited_doc_ids: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValidationError("document with empty doc_id")
        if self.doc_id in self.cited_doc_ids:
            raise ValidationError(f"document {self.doc_id!r} cites itself")
        for i, sent in enumerate(self.sentences):
            if sent.index != i:
                raise ValidationError(
                    f"document {self.doc_id!r}: sentence index {sent.index} at position {i}"
                )

    @property
    def is_query(self) -> bool:
        return bool(self.cited_doc_ids)

    @property
    def is_annotated(self) -> bool:
        return bool(self.sentences)

    @property
    def body(self) -> str:
        """Text the engine indexes: sentence join when segmented, else raw."""
        if self.sentences:
            return " ".join(s.text for s in self.sentences)
        return self.raw_text


@dataclass(frozen=True)
class CorpusStats:
    n_documents: int
    avg_document_size: float
    n_query_documents: int
    total_citation_links: int
    avg_citations_per_query: float
    vocabulary_size: int


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    validation_fraction: float = 0.1
    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        fracs = (self.train_fraction, self.validation_fraction, self.test_fraction)
        if any(f < 0 for f in fracs):
            raise ValidationError(f"split fractions must be non-negative: {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValidationError(f"split fractions must sum to 1: {fracs}")


@dataclass(frozen=True)
class QuerySplit:
    train: frozenset[str]
    validation: frozenset[str]
    test: frozenset[str]


@dataclass
class LoadReport:
    n_documents: int = 0
    n_annotated: int = 0
    n_query_documents: int = 0
    unknown_citations: dict[str, list[str]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


class Corpus:
    """Immutable, ordered collection of documents with unique ids."""

    def __init__(self, documents: Iterable[Document]):
        self._docs: dict[str, Document] = {}
        for doc in documents:
            if doc.doc_id in self._docs:
                raise ValidationError(f"duplicate doc_id {doc.doc_id!r}")
            self._docs[doc.doc_id] = doc

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._docs.values())

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def get(self, doc_id: str) -> Document:
        try:
            return self._docs[doc_id]
        except KeyError:
            raise ValidationError(f"unknown doc_id {doc_id!r}") from None

    def doc_ids(self) -> list[str]:
        return list(self._docs)

    def query_documents(self) -> list[Document]:
        return [d for d in self._docs.values() if d.is_query]

    def body_texts(self) -> dict[str, str]:
        return {doc_id: doc.body for doc_id, doc in self._docs.items()}

    def map_documents(self, fn: Callable[[Document], Document]) -> "Corpus":
        return Corpus(fn(doc) for doc in self)

    def content_hash(self) -> str:
        """Digest of the full corpus content, recorded in run manifests."""
        h = hashlib.sha256()
        for doc in self:
            h.update(json.dumps(_doc_to_record(doc), sort_keys=True).encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()


def _doc_to_record(doc: Document) -> dict:
    record: dict = {"doc_id": doc.doc_id, "text": doc.raw_text}
    if doc.sentences:
        record["sentences"] = [{"text": s.text, "role": s.role.value} for s in doc.sentences]
    if doc.cited_doc_ids:
        record["citations"] = sorted(doc.cited_doc_ids)
    return record


def _record_to_doc(record: dict, line_no: int) -> Document:
    if not isinstance(record, dict):
        raise ValidationError(f"line {line_no}: record is not an object")
    try:
        doc_id = record["doc_id"]
        raw_text = record["text"]
    except KeyError as exc:
        raise ValidationError(f"line {line_no}: missing field {exc}") from None
    if not isinstance(doc_id, str) or not isinstance(raw_text, str):
        raise ValidationError(f"line {line_no}: doc_id and text must be strings")
    sentences = tuple(
        AnnotatedSentence(index=i, text=s["text"], role=parse_role(s["role"]))
        for i, s in enumerate(record.get("sentences") or [])
    )
    citations = frozenset(record.get("citations") or [])
    try:
        return Document(doc_id=doc_id, raw_text=raw_text, sentences=sentences, cited_doc_ids=citations)
    except ValidationError as exc:
        raise ValidationError(f"line {line_no}: {exc}") from None


def load_corpus(path: str | Path, format: str = "jsonl") -> tuple[Corpus, LoadReport]:
    """Load a corpus file, validating ids and flagging unknown citations.

    Unknown cited ids are retained on the documents (one-hop corpora
    legitimately cite out-of-corpus cases) but listed in the report.
    """
    if format != "jsonl":
        raise ValidationError(f"unsupported corpus format {format!r}")
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"corpus file not found: {path}")
    docs: list[Document] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"line {line_no}: malformed record: {exc.msg}") from None
            doc = _record_to_doc(record, line_no)
            if doc.doc_id in seen:
                raise ValidationError(f"line {line_no}: duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)
            docs.append(doc)
    corpus = Corpus(docs)
    report = LoadReport(
        n_documents=len(corpus),
        n_annotated=sum(1 for d in corpus if d.is_annotated),
        n_query_documents=sum(1 for d in corpus if d.is_query),
    )
    for doc in corpus:
        missing = sorted(c for c in doc.cited_doc_ids if c not in corpus)
        if missing:
            report.unknown_citations[doc.doc_id] = missing
            report.warnings.append(
                f"{doc.doc_id}: cites {len(missing)} document(s) not in the corpus"
            )
    return corpus, report


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc in corpus:
            fh.write(json.dumps(_doc_to_record(doc), ensure_ascii=False) + "\n")


TextTransform = Callable[[str], str]


def transform_document(doc: Document, transform: TextTransform) -> Document:
    """Apply a text transform (e.g. entity normalization) to a document.

    The hook runs over the raw text and every sentence; the default
    pipeline behavior is the identity (no hook).
    """
    sentences = tuple(replace(s, text=transform(s.text)) for s in doc.sentences)
    return replace(doc, raw_text=transform(doc.raw_text), sentences=sentences)


def mask_citations(text: str, pattern: re.Pattern[str] = DEFAULT_CITATION_PATTERN) -> str:
    """Replace every citation span with the literal mask token. Idempotent."""
    return pattern.sub(CITATION_TOKEN, text)


def mask_document(doc: Document, pattern: re.Pattern[str] = DEFAULT_CITATION_PATTERN) -> Document:
    sentences = tuple(
        replace(s, text=mask_citations(s.text, pattern)) for s in doc.sentences
    )
    return replace(doc, raw_text=mask_citations(doc.raw_text, pattern), sentences=sentences)


def drop_citation_sentences(
    doc: Document, pattern: re.Pattern[str] = DEFAULT_CITATION_PATTERN
) -> Document:
    """Remove every sentence containing a citation match or the mask token.

    Requires sentence segmentation; surviving sentences are re-indexed
    contiguously and their texts are untouched. The result may have zero
    sentences (callers flag that in their report).
    """
    if not doc.sentences:
        raise ValidationError(
            f"drop_citation_sentences: document {doc.doc_id!r} is not segmented"
        )
    kept = [
        s
        for s in doc.sentences
        if CITATION_TOKEN not in s.text and not pattern.search(s.text)
    ]
    sentences = tuple(
        AnnotatedSentence(index=i, text=s.text, role=s.role) for i, s in enumerate(kept)
    )
    return replace(doc, sentences=sentences)


def corpus_stats(corpus: Corpus, bm25_config: lexical.Bm25Config = lexical.DEFAULT_BM25) -> CorpusStats:
    """Corpus summary; vocabulary is counted under the lexical tokenizer."""
    n_docs = len(corpus)
    sizes = [len(doc.body) for doc in corpus]
    queries = corpus.query_documents()
    total_links = sum(len(d.cited_doc_ids) for d in queries)
    vocab: set[str] = set()
    for doc in corpus:
        vocab.update(lexical.tokenize(doc.body, bm25_config))
    return CorpusStats(
        n_documents=n_docs,
        avg_document_size=(sum(sizes) / n_docs) if n_docs else 0.0,
        n_query_documents=len(queries),
        total_citation_links=total_links,
        avg_citations_per_query=(total_links / len(queries)) if queries else 0.0,
        vocabulary_size=len(vocab),
    )


def split_queries(corpus: Corpus, spec: SplitSpec) -> QuerySplit:
    """Deterministically partition query-document ids into train/val/test.

    Validation and test sizes are the rounded fractions of the query count;
    the remainder goes to train.
    """
    import random

    query_ids = sorted(d.doc_id for d in corpus.query_documents())
    n = len(query_ids)
    rng = random.Random(spec.seed)
    rng.shuffle(query_ids)
    n_val = round(spec.validation_fraction * n)
    n_test = round(spec.test_fraction * n)
    if n_val + n_test > n:
        n_test = n - n_val
    validation = frozenset(query_ids[:n_val])
    test = frozenset(query_ids[n_val : n_val + n_test])
    train = frozenset(query_ids[n_val + n_test :])
    return QuerySplit(train=train, validation=validation, test=test)


def export_qrels(
    corpus: Corpus, path: str | Path, include_unknown: bool = False
) -> list[str]:
    """Write 4-column qrels (`query_id 0 doc_id 1`) from citation links.

    By default only in-corpus citation targets are exported (out-of-corpus
    targets can never be retrieved); dropped ids are returned as warnings.
    """
    warnings: list[str] = []
    with Path(path).open("w", encoding="utf-8") as fh:
        for doc in corpus:
            if not doc.is_query:
                continue
            for cited in sorted(doc.cited_doc_ids):
                if cited not in corpus and not include_unknown:
                    warnings.append(f"{doc.doc_id}: dropped out-of-corpus citation {cited}")
                    continue
                fh.write(f"{doc.doc_id} 0 {cited} 1\n")
    return warnings
