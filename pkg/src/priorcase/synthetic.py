"""Synthetic corpora with planted relevance for end-to-end validation.

Each query document gets a private set of rare marker tokens and a topic
vocabulary shared with exactly `n_relevant` planted documents; everything
else is drawn from a common background vocabulary. The planted documents
are both lexically (markers, topic words) and semantically (hashed
embedding cluster) close to their query, so a working retrieval pipeline
should surface them, while a broken one will not beat a shuffled ranking.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .corpus import AnnotatedSentence, Corpus, Document, RhetoricalRole

_ROLE_CYCLE = (
    RhetoricalRole.FACTS,
    RhetoricalRole.FACTS,
    RhetoricalRole.ISSUE,
    RhetoricalRole.ARGUMENT,
    RhetoricalRole.REASONING,
    RhetoricalRole.DECISION,
)


@dataclass(frozen=True)
class PlantedSpec:
    n_docs: int = 500
    n_queries: int = 50
    n_relevant: int = 5
    n_markers: int = 3
    background_vocab: int = 2000
    topic_vocab: int = 25
    sentences_per_doc: int = 8
    tokens_per_sentence: int = 12
    seed: int = 13


def _sentence(rng: random.Random, pools: list[tuple[list[str], float]], n_tokens: int) -> str:
    words: list[str] = []
    for _ in range(n_tokens):
        roll = rng.random()
        acc = 0.0
        chosen = pools[-1][0]
        for pool, weight in pools:
            acc += weight
            if roll < acc:
                chosen = pool
                break
        words.append(rng.choice(chosen))
    return " ".join(words).capitalize() + "."


def _make_doc(
    doc_id: str,
    rng: random.Random,
    pools: list[tuple[list[str], float]],
    spec: PlantedSpec,
    must_include: list[str] | None = None,
    citations: frozenset[str] = frozenset(),
) -> Document:
    sentences = [
        _sentence(rng, pools, spec.tokens_per_sentence)
        for _ in range(spec.sentences_per_doc)
    ]
    if must_include:
        # Guarantee the markers appear (twice each) regardless of sampling.
        for i, token in enumerate(must_include):
            slot = i % len(sentences)
            sentences[slot] = sentences[slot][:-1] + f" {token} {token}."
    annotated = tuple(
        AnnotatedSentence(index=i, text=text, role=_ROLE_CYCLE[i % len(_ROLE_CYCLE)])
        for i, text in enumerate(sentences)
    )
    return Document(
        doc_id=doc_id,
        raw_text=" ".join(sentences),
        sentences=annotated,
        cited_doc_ids=citations,
    )


def make_planted_corpus(spec: PlantedSpec = PlantedSpec()) -> tuple[Corpus, dict[str, frozenset[str]]]:
    """Build the corpus and return it with the planted relevance map."""
    rng = random.Random(spec.seed)
    background = [f"w{i:04d}" for i in range(spec.background_vocab)]
    docs: list[Document] = []
    relevance: dict[str, frozenset[str]] = {}

    n_planted = spec.n_queries * spec.n_relevant
    n_distractors = spec.n_docs - spec.n_queries - n_planted
    if n_distractors < 0:
        raise ValueError(
            f"n_docs={spec.n_docs} too small for {spec.n_queries} queries x {spec.n_relevant} relevant"
        )

    for q in range(spec.n_queries):
        markers = [f"marker{q:03d}x{j}" for j in range(spec.n_markers)]
        topic = [f"topic{q:03d}w{j}" for j in range(spec.topic_vocab)]
        cluster_pools = [(topic, 0.55), (markers, 0.1), (background, 0.35)]
        relevant_ids = frozenset(f"rel{q:03d}n{j}" for j in range(spec.n_relevant))

        docs.append(
            _make_doc(
                f"query{q:03d}",
                rng,
                cluster_pools,
                spec,
                must_include=markers,
                citations=relevant_ids,
            )
        )
        for rel_id in sorted(relevant_ids):
            docs.append(_make_doc(rel_id, rng, cluster_pools, spec, must_include=markers))
        relevance[f"query{q:03d}"] = relevant_ids

    for d in range(n_distractors):
        docs.append(_make_doc(f"noise{d:04d}", rng, [(background, 1.0)], spec))

    return Corpus(docs), relevance
