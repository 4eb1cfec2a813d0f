from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from priorcase.corpus import AnnotatedSentence, Corpus, Document, RhetoricalRole


def make_doc(
    doc_id: str,
    text: str | None = None,
    sentences: list[tuple[str, RhetoricalRole]] | None = None,
    citations: set[str] | None = None,
) -> Document:
    annotated = tuple(
        AnnotatedSentence(index=i, text=s, role=r)
        for i, (s, r) in enumerate(sentences or [])
    )
    raw = text if text is not None else " ".join(s.text for s in annotated)
    return Document(
        doc_id=doc_id,
        raw_text=raw,
        sentences=annotated,
        cited_doc_ids=frozenset(citations or set()),
    )


@pytest.fixture
def tiny_corpus() -> Corpus:
    """Three annotated documents; d1 cites d2."""
    R = RhetoricalRole
    return Corpus(
        [
            make_doc(
                "d1",
                sentences=[
                    ("The appellant was convicted of theft.", R.FACTS),
                    ("The question is whether the conviction stands.", R.ISSUE),
                    ("The appeal is dismissed.", R.DECISION),
                ],
                citations={"d2"},
            ),
            make_doc(
                "d2",
                sentences=[
                    ("The respondent filed a suit for recovery.", R.FACTS),
                    ("We are of the view that the suit was barred.", R.REASONING),
                ],
            ),
            make_doc("d3", text="An unannotated document about property disputes."),
        ]
    )
