"""Ranked lists and Reciprocal Rank Fusion.

RankedList is the currency every retrieval stage trades in: an ordered
sequence of (doc_id, rank, score) entries for one query, tagged with the
stage that produced it. RRF merges several such lists for the same query
into one, using only the ranks: each document scores the sum over lists
containing it of 1 / (rank + k_const), and documents missing from a list
simply contribute nothing for that list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .errors import ValidationError

SOURCE_VECTOR = "vector"
SOURCE_BM25 = "bm25"
SOURCE_RRF = "rrf"
SOURCE_RERANK = "rerank"


class RankedEntry(NamedTuple):
    doc_id: str
    rank: int
    score: float


@dataclass(frozen=True)
class RankedList:
    """Ordered retrieval result for one query.

    Invariants (enforced at construction): ranks are 1..n with no gaps,
    doc_ids are unique, and scores never increase with rank.
    """

    query_id: str
    entries: tuple[RankedEntry, ...]
    source: str

    def __post_init__(self) -> None:
        seen: set[str] = set()
        prev_score: float | None = None
        for i, entry in enumerate(self.entries):
            if entry.rank != i + 1:
                raise ValidationError(
                    f"ranked list for {self.query_id!r}: rank {entry.rank} at position {i}"
                )
            if entry.doc_id in seen:
                raise ValidationError(
                    f"ranked list for {self.query_id!r}: duplicate doc_id {entry.doc_id!r}"
                )
            seen.add(entry.doc_id)
            if prev_score is not None and entry.score > prev_score:
                raise ValidationError(
                    f"ranked list for {self.query_id!r}: score increases at rank {entry.rank}"
                )
            prev_score = entry.score

    def __len__(self) -> int:
        return len(self.entries)

    def doc_ids(self) -> list[str]:
        return [entry.doc_id for entry in self.entries]

    def top(self, k: int) -> "RankedList":
        if k >= len(self.entries):
            return self
        return RankedList(self.query_id, self.entries[:k], self.source)

    def without(self, doc_id: str) -> "RankedList":
        """Drop one document and close the rank gap (scores untouched)."""
        kept = [e for e in self.entries if e.doc_id != doc_id]
        if len(kept) == len(self.entries):
            return self
        entries = tuple(
            RankedEntry(e.doc_id, i + 1, e.score) for i, e in enumerate(kept)
        )
        return RankedList(self.query_id, entries, self.source)

    @classmethod
    def from_scores(
        cls,
        query_id: str,
        scores: Iterable[tuple[str, float]],
        source: str,
    ) -> "RankedList":
        """Build a list from unordered (doc_id, score) pairs.

        Sorted by descending score; equal scores ordered by ascending doc_id.
        """
        ordered = sorted(scores, key=lambda item: (-item[1], item[0]))
        entries = tuple(
            RankedEntry(doc_id, i + 1, float(score))
            for i, (doc_id, score) in enumerate(ordered)
        )
        return cls(query_id, entries, source)


@dataclass(frozen=True)
class RrfConfig:
    """Fusion constant; larger values flatten the influence of top ranks."""

    k_const: float = 60.0

    def __post_init__(self) -> None:
        if not self.k_const > 0:
            raise ValidationError(f"rrf k_const must be > 0, got {self.k_const}")


def rrf_fuse(lists: Sequence[RankedList], config: RrfConfig = RrfConfig()) -> RankedList:
    """Fuse ranked lists for one query by summed reciprocal ranks.

    Output is sorted by descending RRF score, ties broken by ascending
    doc_id; output scores are the RRF sums. Input scores are ignored -
    fusion depends on ranks alone.
    """
    if not lists:
        raise ValidationError("rrf_fuse requires at least one ranked list")
    query_id = lists[0].query_id
    for lst in lists:
        if lst.query_id != query_id:
            raise ValidationError(
                f"rrf_fuse: mixed query ids {query_id!r} and {lst.query_id!r}"
            )
    contributions: dict[str, list[float]] = {}
    for lst in lists:
        for entry in lst.entries:
            contributions.setdefault(entry.doc_id, []).append(
                1.0 / (entry.rank + config.k_const)
            )
    # Summing in a canonical order makes the result exactly invariant under
    # permutation of the input lists (float addition is not associative).
    scores = {
        doc_id: math.fsum(sorted(values)) for doc_id, values in contributions.items()
    }
    return RankedList.from_scores(query_id, scores.items(), SOURCE_RRF)
