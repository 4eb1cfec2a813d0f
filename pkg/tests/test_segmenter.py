from __future__ import annotations

import random
from collections import Counter

import pytest

from conftest import make_doc
from priorcase.corpus import RhetoricalRole
from priorcase.errors import ValidationError
from priorcase.lexical import tokenize
from priorcase.segmenter import (
    CuePhraseAnnotator,
    CueRule,
    PRESET_LABELS,
    ROLE_PRESETS,
    RoleConfig,
    annotate_document,
    assign_roles,
    build_role_query,
    load_cue_table,
    segment_sentences,
)

R = RhetoricalRole


class TestSegmentSentences:
    def test_two_sentences(self):
        spans = segment_sentences("The court held X. The appeal fails.")
        assert [s.text for s in spans] == ["The court held X.", "The appeal fails."]

    def test_empty_text(self):
        assert segment_sentences("") == []
        assert segment_sentences("   \n\t ") == []

    def test_abbreviation_guard(self):
        spans = segment_sentences("See s. 302 IPC. He appealed.")
        assert [s.text for s in spans] == ["See s. 302 IPC.", "He appealed."]

    def test_terminator_followed_by_nonspace_does_not_split(self):
        spans = segment_sentences("At p.3 the court noted 2.5 acres. Next point.")
        assert [s.text for s in spans] == ["At p.3 the court noted 2.5 acres.", "Next point."]

    def test_terminator_run_closes_once(self):
        spans = segment_sentences("Is it so?! Yes... Indeed.")
        assert [s.text for s in spans] == ["Is it so?!", "Yes...", "Indeed."]

    def test_trailing_text_without_terminator(self):
        spans = segment_sentences("First one. trailing words")
        assert [s.text for s in spans] == ["First one.", "trailing words"]

    def test_partition_of_non_whitespace(self):
        rng = random.Random(23)
        pieces = ["word", "s.", "No. 4", "end.", "x?", "y!", "...", "2.5", " ", "\n", "Mr."]
        for _ in range(200):
            text = " ".join(rng.choices(pieces, k=rng.randrange(0, 14)))
            spans = segment_sentences(text)
            prev_end = 0
            for span in spans:
                assert span.start >= prev_end
                assert text[prev_end : span.start].strip() == ""  # gap is whitespace
                assert span.text == text[span.start : span.end]
                assert span.text == span.text.strip()
                prev_end = span.end
            assert text[prev_end:].strip() == ""  # tail is whitespace
            # Reassembly up to whitespace normalization
            assert " ".join(s.text for s in spans).split() == text.split()


class TestCueAnnotator:
    def test_past_tense_event_cue_is_facts(self):
        ann = CuePhraseAnnotator()
        [role] = ann.label(["The appellant was convicted under section 302."])
        assert role == R.FACTS

    def test_question_cue_is_issue(self):
        ann = CuePhraseAnnotator()
        [role] = ann.label(["The question before us is whether the sale was valid."])
        assert role == R.ISSUE

    def test_first_match_wins_order(self):
        rules = [CueRule(R.ISSUE, "whether"), CueRule(R.FACTS, "appellant")]
        ann = CuePhraseAnnotator(rules)
        [role] = ann.label(["Whether the appellant may appeal."])
        assert role == R.ISSUE

    def test_positional_prior_for_unmatched(self):
        ann = CuePhraseAnnotator(rules=[])
        labels = ann.label([f"zz {i}" for i in range(10)])
        assert labels[0] == R.FACTS and labels[1] == R.FACTS  # ceil(0.2*10) = 2
        assert labels[-1] == R.DECISION
        assert all(l == R.OTHER for l in labels[2:9])

    def test_deterministic(self):
        ann = CuePhraseAnnotator()
        sentences = ["It was contended that the order was bad.", "Therefore we allow it."]
        assert ann.label(sentences) == ann.label(sentences)
        assert ann.label(sentences) == [R.ARGUMENT, R.REASONING]

    def test_load_cue_table_round_trip(self, tmp_path):
        path = tmp_path / "cues.tsv"
        path.write_text("# comment\nIssue\twhether\nFacts\tappellant\n", encoding="utf-8")
        rules = load_cue_table(path)
        assert rules == [CueRule(R.ISSUE, "whether"), CueRule(R.FACTS, "appellant")]

    def test_bad_cue_table_line(self, tmp_path):
        path = tmp_path / "cues.tsv"
        path.write_text("Issue whether-no-tab\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="line 1"):
            load_cue_table(path)


class TestAssignRoles:
    def test_every_sentence_labeled(self):
        out = assign_roles(["One.", "Two.", "Three."], CuePhraseAnnotator(rules=[]))
        assert [s.index for s in out] == [0, 1, 2]
        assert all(isinstance(s.role, R) for s in out)

    def test_file_strategy_pass_through(self, tiny_corpus):
        doc = tiny_corpus.get("d1")
        assert annotate_document(doc, "file") is doc

    def test_file_strategy_missing_annotations_names_doc(self, tiny_corpus):
        with pytest.raises(ValidationError, match="d3"):
            annotate_document(tiny_corpus.get("d3"), "file")

    def test_heuristic_segments_unannotated(self, tiny_corpus):
        out = annotate_document(tiny_corpus.get("d3"), "heuristic", CuePhraseAnnotator())
        assert out.is_annotated

    def test_heuristic_relabels_existing_segmentation(self, tiny_corpus):
        doc = tiny_corpus.get("d1")
        out = annotate_document(doc, "heuristic", CuePhraseAnnotator())
        assert [s.text for s in out.sentences] == [s.text for s in doc.sentences]


class TestRolePresets:
    def test_preset_role_sets_match_report_labels(self):
        assert ROLE_PRESETS["facts"] == {R.FACTS}
        assert ROLE_PRESETS["facts_issue"] == {R.FACTS, R.ISSUE}
        assert ROLE_PRESETS["facts_issue_arguments"] == {R.FACTS, R.ISSUE, R.ARGUMENT}
        assert ROLE_PRESETS["facts_issue_reasoning"] == {R.FACTS, R.ISSUE, R.REASONING}
        assert ROLE_PRESETS["facts_issue_decision"] == {R.FACTS, R.ISSUE, R.DECISION}
        assert ROLE_PRESETS["full"] == set(R)
        assert set(PRESET_LABELS) == set(ROLE_PRESETS)

    def test_selective_presets_never_include_other(self):
        for name, roles in ROLE_PRESETS.items():
            if name != "full":
                assert R.OTHER not in roles

    def test_unknown_preset(self):
        with pytest.raises(ValidationError, match="unknown role preset"):
            RoleConfig.preset("facts_only_please")


class TestBuildRoleQuery:
    def test_full_equals_all_sentences_joined(self, tiny_corpus):
        doc = tiny_corpus.get("d1")
        rq = build_role_query(doc, RoleConfig.preset("full"))
        assert rq.text == " ".join(s.text for s in doc.sentences)
        assert rq.text.split() == doc.body.split()

    def test_facts_filter_keeps_index_order(self):
        doc = make_doc(
            "d",
            sentences=[("First fact.", R.FACTS), ("The issue.", R.ISSUE), ("Second fact.", R.FACTS)],
        )
        rq = build_role_query(doc, RoleConfig.preset("facts"))
        assert rq.text == "First fact. Second fact."

    def test_empty_result_flagged(self):
        doc = make_doc("d", sentences=[("Reasons only.", R.REASONING)])
        rq = build_role_query(doc, RoleConfig.preset("facts_issue"))
        assert rq.is_empty and rq.text == ""

    def test_unannotated_precondition(self, tiny_corpus):
        with pytest.raises(ValidationError, match="d3"):
            build_role_query(tiny_corpus.get("d3"), RoleConfig.preset("full"))

    def test_filter_monotonicity_token_submultiset(self):
        rng = random.Random(41)
        roles = list(R)
        preset_chain = ["facts", "facts_issue", "facts_issue_reasoning", "full"]
        for _ in range(100):
            sentences = [
                (f"tok{rng.randrange(8)} tok{rng.randrange(8)} word{i}.", rng.choice(roles))
                for i in range(rng.randrange(1, 12))
            ]
            doc = make_doc("d", sentences=sentences)
            counters = []
            for preset in preset_chain:
                rq = build_role_query(doc, RoleConfig.preset(preset))
                counters.append(Counter(tokenize(rq.text)))
            for smaller, larger in zip(counters, counters[1:]):
                assert all(larger[t] >= n for t, n in smaller.items())
