from __future__ import annotations

import random

import pytest

import oracles
from priorcase.errors import ValidationError
from priorcase.fusion import RankedEntry, RankedList, RrfConfig, rrf_fuse


def list_from_order(query_id: str, doc_ids: list[str], source: str = "vector") -> RankedList:
    entries = tuple(
        RankedEntry(doc_id, i + 1, float(len(doc_ids) - i)) for i, doc_id in enumerate(doc_ids)
    )
    return RankedList(query_id, entries, source)


class TestRankedList:
    def test_rank_gap_rejected(self):
        with pytest.raises(ValidationError, match="rank"):
            RankedList("q", (RankedEntry("a", 1, 2.0), RankedEntry("b", 3, 1.0)), "vector")

    def test_duplicate_doc_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            RankedList("q", (RankedEntry("a", 1, 2.0), RankedEntry("a", 2, 1.0)), "vector")

    def test_increasing_scores_rejected(self):
        with pytest.raises(ValidationError, match="score increases"):
            RankedList("q", (RankedEntry("a", 1, 1.0), RankedEntry("b", 2, 2.0)), "vector")

    def test_from_scores_sorts_and_tiebreaks(self):
        rl = RankedList.from_scores("q", [("b", 1.0), ("a", 1.0), ("c", 2.0)], "bm25")
        assert rl.doc_ids() == ["c", "a", "b"]
        assert [e.rank for e in rl.entries] == [1, 2, 3]

    def test_without_closes_rank_gap(self):
        rl = list_from_order("q", ["a", "b", "c"])
        out = rl.without("b")
        assert out.doc_ids() == ["a", "c"]
        assert [e.rank for e in out.entries] == [1, 2]
        assert [e.score for e in out.entries] == [3.0, 1.0]


class TestRrfFuse:
    def test_single_list_preserves_order(self):
        rl = list_from_order("q", ["x", "y", "z"])
        fused = rrf_fuse([rl])
        assert fused.doc_ids() == ["x", "y", "z"]
        assert fused.source == "rrf"

    def test_worked_example(self):
        l1 = list_from_order("q", ["A", "B", "C"])
        l2 = list_from_order("q", ["A", "C"], source="bm25")
        fused = rrf_fuse([l1, l2], RrfConfig(k_const=60))
        assert fused.doc_ids() == ["A", "C", "B"]
        scores = {e.doc_id: e.score for e in fused.entries}
        assert scores["A"] == pytest.approx(2 / 61, abs=1e-15)
        assert scores["C"] == pytest.approx(1 / 63 + 1 / 62, abs=1e-15)
        assert scores["B"] == pytest.approx(1 / 62, abs=1e-15)

    def test_doc_in_both_lists_beats_single_list_doc(self):
        l1 = list_from_order("q", ["both", "only1"])
        l2 = list_from_order("q", ["both", "only2"], source="bm25")
        fused = rrf_fuse([l1, l2])
        assert fused.doc_ids()[0] == "both"

    def test_empty_collection_error(self):
        with pytest.raises(ValidationError):
            rrf_fuse([])

    def test_mixed_query_ids_error(self):
        with pytest.raises(ValidationError, match="mixed query ids"):
            rrf_fuse([list_from_order("q1", ["a"]), list_from_order("q2", ["a"])])

    def test_input_order_invariance(self):
        rng = random.Random(3)
        for _ in range(50):
            lists = [
                list_from_order("q", rng.sample([f"d{i}" for i in range(10)], rng.randrange(1, 10)))
                for _ in range(rng.randrange(2, 4))
            ]
            base = rrf_fuse(lists)
            shuffled = lists[:]
            rng.shuffle(shuffled)
            assert rrf_fuse(shuffled).entries == base.entries

    def test_score_ignorance(self):
        # Same order, different score values -> identical fusion.
        a = RankedList("q", (RankedEntry("x", 1, 9.0), RankedEntry("y", 2, 8.0)), "vector")
        b = RankedList("q", (RankedEntry("x", 1, 0.2), RankedEntry("y", 2, 0.1)), "vector")
        other = list_from_order("q", ["y", "z"], source="bm25")
        assert rrf_fuse([a, other]).entries == rrf_fuse([b, other]).entries

    def test_rank_monotonicity(self):
        # Improving a doc's rank in one list never lowers its fused rank.
        base_l1 = list_from_order("q", ["a", "b", "c", "d"])
        better_l1 = list_from_order("q", ["a", "c", "b", "d"])  # c moves up
        l2 = list_from_order("q", ["d", "c", "a"], source="bm25")
        rank_before = rrf_fuse([base_l1, l2]).doc_ids().index("c")
        rank_after = rrf_fuse([better_l1, l2]).doc_ids().index("c")
        assert rank_after <= rank_before

    def test_brute_force_equivalence_random(self):
        rng = random.Random(17)
        docs = [f"d{i}" for i in range(10)]
        for _ in range(200):
            lists = [
                list_from_order("q", rng.sample(docs, rng.randrange(1, len(docs) + 1)))
                for _ in range(rng.randrange(1, 4))
            ]
            fused = rrf_fuse(lists)
            expected = oracles.rrf_order([lst.doc_ids() for lst in lists])
            assert fused.doc_ids() == [d for d, _ in expected]
            for entry, (_, score) in zip(fused.entries, expected):
                assert entry.score == pytest.approx(score, abs=1e-15)
