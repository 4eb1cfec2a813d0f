"""Default model implementations.

The shipped backend ("hashing") is deterministic and dependency-free:
signed feature hashing over unigrams and bigrams for embeddings, cosine
over hashed term-frequency vectors for pair scoring, and a keyword tagger
with a positional prior for rhetorical roles. Heavier model families
(sentence encoders, trained cross-encoders, sequence labelers) plug in by
registering another backend with the same three callables; everything is
deterministic as long as the underlying models are.
"""

from __future__ import annotations

import hashlib
import math
import re
from typing import Callable, Sequence

_TOKEN_RE = re.compile(r"[a-z0-9]+")

ROLE_NAMES = ("Facts", "Issue", "Argument", "Reasoning", "Decision", "Other")


def _tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _bucket(token: str, buckets: int, salt: bytes) -> tuple[int, float]:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=9, person=salt).digest()
    slot = int.from_bytes(digest[:8], "big") % buckets
    sign = 1.0 if digest[8] & 1 else -1.0
    return slot, sign


class HashingTextEmbedder:
    """Signed feature hashing of unigram+bigram counts, L2-normalized."""

    def __init__(self, dimension: int = 768):
        if dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {dimension}")
        self.dimension = dimension

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        out = []
        for text in texts:
            vec = [0.0] * self.dimension
            tokens = _tokens(text)
            grams = tokens + [f"{a}_{b}" for a, b in zip(tokens, tokens[1:])]
            for gram in grams:
                slot, sign = _bucket(gram, self.dimension, b"pc-embed")
                vec[slot] += sign
            norm = math.sqrt(sum(v * v for v in vec))
            if norm > 0:
                vec = [v / norm for v in vec]
            out.append(vec)
        return out


class HashedCosineScorer:
    """Cosine similarity between hashed term-frequency vectors, in [0, 1].

    Term frequencies (not set membership) weight the overlap, so scores
    differ from plain Jaccard similarity on the same pair.
    """

    def __init__(self, buckets: int = 1024):
        self.buckets = buckets

    def _counts(self, text: str) -> dict[int, float]:
        counts: dict[int, float] = {}
        for token in _tokens(text):
            slot, _ = _bucket(token, self.buckets, b"pc-score")
            counts[slot] = counts.get(slot, 0.0) + 1.0
        return counts

    def score(self, query: str, document: str) -> float:
        q = self._counts(query)
        d = self._counts(document)
        if not q or not d:
            return 0.0
        if q == d:
            return 1.0  # cosine(x, x) is exactly 1; sqrt rounding would drift
        dot = sum(value * d.get(slot, 0.0) for slot, value in q.items())
        norm = math.sqrt(sum(v * v for v in q.values())) * math.sqrt(
            sum(v * v for v in d.values())
        )
        if not norm:
            return 0.0
        return min(1.0, max(0.0, dot / norm))


class KeywordRoleTagger:
    """First-match keyword rules with an early-Facts / late-Decision prior."""

    RULES: tuple[tuple[str, str], ...] = (
        ("Issue", "whether"),
        ("Issue", "question before"),
        ("Issue", "issue is"),
        ("Argument", "contended"),
        ("Argument", "submitted"),
        ("Argument", "argued"),
        ("Argument", "counsel"),
        ("Reasoning", "we are of the"),
        ("Reasoning", "in our opinion"),
        ("Reasoning", "therefore"),
        ("Reasoning", "it follows"),
        ("Decision", "allowed"),
        ("Decision", "dismissed"),
        ("Decision", "set aside"),
        ("Decision", "disposed of"),
        ("Facts", "was convicted"),
        ("Facts", "was charged"),
        ("Facts", "appellant"),
        ("Facts", "respondent"),
        ("Facts", "filed"),
        ("Facts", "accused"),
    )

    def tag(self, sentences: Sequence[str]) -> list[str]:
        n = len(sentences)
        early = max(1, math.ceil(n * 0.2)) if n else 0
        late = n - max(1, int(n * 0.1)) if n else 0
        roles = []
        for i, sentence in enumerate(sentences):
            lowered = sentence.lower()
            role = next((r for r, phrase in self.RULES if phrase in lowered), None)
            if role is None:
                role = "Facts" if i < early else ("Decision" if i >= late else "Other")
            roles.append(role)
        return roles


ModelBundle = tuple[HashingTextEmbedder, HashedCosineScorer, KeywordRoleTagger]


def build_hashing_backend(dimension: int) -> ModelBundle:
    return HashingTextEmbedder(dimension), HashedCosineScorer(), KeywordRoleTagger()


BACKENDS: dict[str, Callable[[int], ModelBundle]] = {
    "hashing": build_hashing_backend,
}
