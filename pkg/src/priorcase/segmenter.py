"""Sentence segmentation, rhetorical-role assignment, role-filtered queries.

The splitter is deterministic and rule based: a sentence ends at a
terminator (. ? !) that is followed by whitespace or end-of-text, unless
the word immediately before a period is a known abbreviation ("s. 302"
stays together). Role labels come from one of three strategies:

* ``file``      - trust annotations loaded with the corpus,
* ``heuristic`` - shipped cue-phrase table, first match wins, with a
                  positional prior for unmatched sentences,
* ``external``  - a sequence-labeling model behind the sidecar protocol.

Role-filtered query text is the index-order join of the sentences whose
role lies in the active preset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

from .corpus import AnnotatedSentence, Document, RhetoricalRole, parse_role
from .errors import ValidationError

ANNOTATOR_STRATEGIES = ("file", "heuristic", "external")

_TERMINATORS = ".?!"

# Lowercased, without the trailing period. Conservative legal-English list.
DEFAULT_ABBREVIATIONS = frozenset(
    {
        "s", "ss", "sec", "secs", "art", "arts", "cl", "sub-s",
        "no", "nos", "p", "pp", "para", "paras", "vol",
        "v", "vs", "viz", "i.e", "e.g", "cf", "etc",
        "mr", "mrs", "ms", "dr", "prof", "hon", "st",
        "j", "jj", "cj", "ors", "anr", "co", "ltd", "inc", "corp",
        "crl", "civ", "w.p", "o.s", "a.i.r", "s.c.r", "s.c.c",
    }
)


@dataclass(frozen=True)
class SentenceSpan:
    start: int
    end: int
    text: str


def _word_before(text: str, dot_index: int) -> str:
    """The maximal word-ish token ending right before text[dot_index]."""
    i = dot_index
    while i > 0 and (text[i - 1].isalnum() or text[i - 1] in ".-"):
        i -= 1
    return text[i:dot_index]


def segment_sentences(
    text: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS
) -> list[SentenceSpan]:
    """Split text into ordered, non-overlapping sentence spans.

    Spans cover all non-whitespace text; runs of terminators ("...", "?!")
    close at the end of the run; a terminator followed by a non-space
    character (decimals, "p.3") never splits.
    """
    abbrevs = {a.lower().rstrip(".") for a in abbreviations}
    spans: list[SentenceSpan] = []
    n = len(text)
    start: int | None = None
    i = 0
    while i < n:
        ch = text[i]
        if start is None:
            if ch.isspace():
                i += 1
                continue
            start = i
        if ch in _TERMINATORS:
            j = i
            while j + 1 < n and text[j + 1] in _TERMINATORS:
                j += 1
            ends_text = j + 1 >= n
            if ends_text or text[j + 1].isspace():
                is_single_period = ch == "." and i == j
                if is_single_period and _word_before(text, i).lower().rstrip(".") in abbrevs:
                    i += 1
                    continue
                spans.append(SentenceSpan(start, j + 1, text[start : j + 1]))
                start = None
                i = j + 1
                continue
        i += 1
    if start is not None:
        end = n
        while end > start and text[end - 1].isspace():
            end -= 1
        spans.append(SentenceSpan(start, end, text[start:end]))
    return spans


class Annotator(Protocol):
    def label(self, sentences: Sequence[str]) -> list[RhetoricalRole]: ...


@dataclass(frozen=True)
class CueRule:
    role: RhetoricalRole
    phrase: str


def load_cue_table(path: str | Path) -> list[CueRule]:
    """Parse a cue table file (`ROLE <tab> substring`, # comments allowed)."""
    rules: list[CueRule] = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "\t" not in stripped:
            raise ValidationError(f"cue table line {line_no}: expected 'ROLE<tab>phrase'")
        role_name, phrase = stripped.split("\t", 1)
        phrase = phrase.strip().lower()
        if not phrase:
            raise ValidationError(f"cue table line {line_no}: empty phrase")
        rules.append(CueRule(parse_role(role_name), phrase))
    return rules


def default_cue_rules() -> list[CueRule]:
    ref = resources.files("priorcase").joinpath("data/cue_phrases.tsv")
    with resources.as_file(ref) as path:
        return load_cue_table(path)


class CuePhraseAnnotator:
    """Deterministic cue-phrase classifier.

    First matching rule (table order) wins. Unmatched sentences take the
    positional prior: the first ~20% of sentences default to Facts, the
    final ~10% to Decision, everything else to Other.
    """

    def __init__(
        self,
        rules: Sequence[CueRule] | None = None,
        early_fraction: float = 0.2,
        late_fraction: float = 0.1,
    ):
        self.rules = list(rules) if rules is not None else default_cue_rules()
        self.early_fraction = early_fraction
        self.late_fraction = late_fraction

    def label(self, sentences: Sequence[str]) -> list[RhetoricalRole]:
        n = len(sentences)
        early_cut = max(1, math.ceil(n * self.early_fraction)) if n else 0
        late_cut = n - max(1, int(n * self.late_fraction)) if n else 0
        labels: list[RhetoricalRole] = []
        for i, sentence in enumerate(sentences):
            lowered = sentence.lower()
            matched: RhetoricalRole | None = None
            for rule in self.rules:
                if rule.phrase in lowered:
                    matched = rule.role
                    break
            if matched is None:
                if i < early_cut:
                    matched = RhetoricalRole.FACTS
                elif i >= late_cut:
                    matched = RhetoricalRole.DECISION
                else:
                    matched = RhetoricalRole.OTHER
            labels.append(matched)
        return labels


class ExternalAnnotator:
    """Labels sentences through the sidecar protocol's `annotate` request."""

    def __init__(self, client) -> None:
        self._client = client

    def label(self, sentences: Sequence[str]) -> list[RhetoricalRole]:
        if not sentences:
            return []
        roles = self._client.annotate(list(sentences))
        return [parse_role(r) for r in roles]


def assign_roles(
    sentences: Sequence[str | SentenceSpan], annotator: Annotator
) -> list[AnnotatedSentence]:
    """Label every sentence; output order and count match the input."""
    texts = [s.text if isinstance(s, SentenceSpan) else s for s in sentences]
    labels = annotator.label(texts)
    if len(labels) != len(texts):
        raise ValidationError(
            f"annotator returned {len(labels)} labels for {len(texts)} sentences"
        )
    return [
        AnnotatedSentence(index=i, text=text, role=role)
        for i, (text, role) in enumerate(zip(texts, labels))
    ]


def annotate_document(
    doc: Document,
    strategy: str,
    annotator: Annotator | None = None,
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS,
) -> Document:
    """Return a copy of the document with role-annotated sentences.

    * file: the document must already carry annotations (pass-through).
    * heuristic/external: existing segmentation is kept and re-labeled;
      unsegmented documents are segmented first.
    """
    if strategy not in ANNOTATOR_STRATEGIES:
        raise ValidationError(f"unknown annotator strategy {strategy!r}")
    if strategy == "file":
        if not doc.is_annotated:
            raise ValidationError(
                f"annotator strategy 'file': document {doc.doc_id!r} has no annotations"
            )
        return doc
    if annotator is None:
        raise ValidationError(f"strategy {strategy!r} requires an annotator instance")
    if doc.sentences:
        texts: list[str] = [s.text for s in doc.sentences]
    else:
        texts = [span.text for span in segment_sentences(doc.raw_text, abbreviations)]
    return replace(doc, sentences=tuple(assign_roles(texts, annotator)))


ROLE_PRESETS: dict[str, frozenset[RhetoricalRole]] = {
    "full": frozenset(RhetoricalRole),
    "facts": frozenset({RhetoricalRole.FACTS}),
    "facts_issue": frozenset({RhetoricalRole.FACTS, RhetoricalRole.ISSUE}),
    "facts_issue_arguments": frozenset(
        {RhetoricalRole.FACTS, RhetoricalRole.ISSUE, RhetoricalRole.ARGUMENT}
    ),
    "facts_issue_reasoning": frozenset(
        {RhetoricalRole.FACTS, RhetoricalRole.ISSUE, RhetoricalRole.REASONING}
    ),
    "facts_issue_decision": frozenset(
        {RhetoricalRole.FACTS, RhetoricalRole.ISSUE, RhetoricalRole.DECISION}
    ),
}

# Human-readable row labels used in report rendering.
PRESET_LABELS = {
    "full": "Full Query",
    "facts": "Facts",
    "facts_issue": "Facts+Issue",
    "facts_issue_arguments": "Facts+Issue+Arguments",
    "facts_issue_reasoning": "Facts+Issue+Reasoning",
    "facts_issue_decision": "Facts+Issue+Decision",
}


@dataclass(frozen=True)
class RoleConfig:
    """A named set of roles whose sentences form the query text.

    The ``full`` preset is the identity filter (every role, including
    Other); no selective preset ever includes Other.
    """

    name: str
    included_roles: frozenset[RhetoricalRole]

    @classmethod
    def preset(cls, name: str) -> "RoleConfig":
        try:
            return cls(name=name, included_roles=ROLE_PRESETS[name])
        except KeyError:
            raise ValidationError(
                f"unknown role preset {name!r}; expected one of {sorted(ROLE_PRESETS)}"
            ) from None

    @classmethod
    def custom(cls, name: str, roles: Sequence[RhetoricalRole | str]) -> "RoleConfig":
        parsed = frozenset(r if isinstance(r, RhetoricalRole) else parse_role(r) for r in roles)
        return cls(name=name, included_roles=parsed)


@dataclass(frozen=True)
class RoleQuery:
    """Role-filtered query text for one query document."""

    query_id: str
    text: str
    config_name: str

    @property
    def is_empty(self) -> bool:
        return not self.text


def build_role_query(doc: Document, config: RoleConfig) -> RoleQuery:
    """Join (in index order) the sentences whose role is in the preset.

    An empty result is permitted; callers count it in their run report.
    """
    if not doc.is_annotated:
        raise ValidationError(
            f"build_role_query: document {doc.doc_id!r} has no role annotations"
        )
    kept = [s.text for s in doc.sentences if s.role in config.included_roles]
    return RoleQuery(query_id=doc.doc_id, text=" ".join(kept), config_name=config.name)
