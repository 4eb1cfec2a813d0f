from __future__ import annotations

import random

import pytest

from priorcase.errors import ValidationError
from priorcase.fusion import RankedEntry, RankedList
from priorcase.lexical import tokenize
from priorcase.rerank import (
    ChunkingConfig,
    JaccardPairScorer,
    aggregate_scores,
    chunk_document,
    effective_chunking,
    rerank,
)


class TestChunkDocument:
    def test_worked_offsets(self):
        cfg = ChunkingConfig(max_chars=2000, overlap_chars=200)
        chunks = chunk_document("x" * 5000, cfg)
        assert [len(c) for c in chunks] == [2000, 2000, 1400]

    def test_short_text_single_chunk(self):
        cfg = ChunkingConfig()
        assert chunk_document("short", cfg) == ["short"]

    def test_empty_text_no_chunks(self):
        assert chunk_document("", ChunkingConfig()) == []

    def test_exact_max_chars_single_chunk(self):
        cfg = ChunkingConfig(max_chars=10, overlap_chars=2)
        assert chunk_document("0123456789", cfg) == ["0123456789"]

    def test_overlap_is_exact(self):
        cfg = ChunkingConfig(max_chars=10, overlap_chars=3)
        text = "abcdefghijklmnopqrstuvwxyz"
        chunks = chunk_document(text, cfg)
        for a, b in zip(chunks, chunks[1:]):
            assert a[-3:] == b[:3]

    def test_coverage_reconstruction(self):
        rng = random.Random(31)
        alphabet = "abcdefgh "
        for _ in range(100):
            text = "".join(rng.choices(alphabet, k=rng.randrange(0, 400)))
            max_chars = rng.randrange(5, 60)
            overlap = rng.randrange(0, max_chars)
            cfg = ChunkingConfig(max_chars=max_chars, overlap_chars=overlap)
            chunks = chunk_document(text, cfg)
            rebuilt = "".join([chunks[0]] + [c[overlap:] for c in chunks[1:]]) if chunks else ""
            assert rebuilt == text

    def test_invalid_configs(self):
        with pytest.raises(ValidationError):
            ChunkingConfig(max_chars=0)
        with pytest.raises(ValidationError):
            ChunkingConfig(max_chars=10, overlap_chars=10)
        with pytest.raises(ValidationError):
            ChunkingConfig(aggregation="median")


class TestAggregateScores:
    def test_weighted_mean_worked(self):
        assert aggregate_scores([(0.2, 100), (0.8, 300)], "weighted_mean") == pytest.approx(0.65)

    def test_max_mode(self):
        assert aggregate_scores([(0.2, 10), (0.8, 10)], "max") == 0.8

    def test_mean_mode(self):
        assert aggregate_scores([(0.2, 10), (0.8, 1000)], "mean") == pytest.approx(0.5)

    def test_singleton_identity_all_modes(self):
        for mode in ("weighted_mean", "max", "mean"):
            assert aggregate_scores([(0.37, 50)], mode) == pytest.approx(0.37)

    def test_empty_error(self):
        with pytest.raises(ValidationError):
            aggregate_scores([], "max")


class TestJaccardScorer:
    def test_identity_pair_scores_one(self):
        scorer = JaccardPairScorer()
        assert scorer.score_pairs([("same words", "words same")]) == [1.0]

    def test_disjoint_scores_zero(self):
        scorer = JaccardPairScorer()
        assert scorer.score_pairs([("alpha", "beta")]) == [0.0]

    def test_scores_in_unit_interval(self):
        rng = random.Random(13)
        scorer = JaccardPairScorer()
        pairs = [
            (
                " ".join(rng.choices("abcdef", k=rng.randrange(0, 10))),
                " ".join(rng.choices("abcdef", k=rng.randrange(0, 10))),
            )
            for _ in range(100)
        ]
        assert all(0.0 <= s <= 1.0 for s in scorer.score_pairs(pairs))


def fused_list(doc_ids: list[str]) -> RankedList:
    n = len(doc_ids)
    entries = tuple(
        RankedEntry(d, i + 1, (n - i) / (n * 100.0)) for i, d in enumerate(doc_ids)
    )
    return RankedList("q", entries, "rrf")


class TestRerank:
    def test_identical_document_ranks_first(self):
        query = "the exact matching document text"
        texts = {
            "match": query,
            "near": "the matching document",
            "far": "entirely unrelated words here",
        }
        fused = fused_list(["far", "near", "match"])
        out = rerank(query, fused, JaccardPairScorer(), ChunkingConfig(), texts)
        assert out.doc_ids()[0] == "match"
        assert out.source == "rerank"

    def test_depth_zero_identity(self):
        fused = fused_list(["a", "b", "c"])
        cfg = ChunkingConfig(rerank_depth=0)
        out = rerank("query", fused, JaccardPairScorer(), cfg, {})
        assert out.entries == fused.entries

    def test_three_candidates_match_hand_jaccard(self):
        query = "alpha beta gamma"
        texts = {
            "d1": "alpha beta gamma",          # J = 3/3
            "d2": "alpha beta delta",          # J = 2/4
            "d3": "zeta eta theta",            # J = 0/6
        }
        fused = fused_list(["d3", "d2", "d1"])
        out = rerank(query, fused, JaccardPairScorer(), ChunkingConfig(), texts)
        assert out.doc_ids() == ["d1", "d2", "d3"]
        scores = {e.doc_id: e.score for e in out.entries}
        assert scores["d1"] == pytest.approx(1.0)
        assert scores["d2"] == pytest.approx(0.5)
        assert scores["d3"] == pytest.approx(0.0)

    def test_chunked_document_weighted_aggregation(self):
        # One long doc split into 2 chunks with known Jaccard per chunk.
        cfg = ChunkingConfig(max_chars=12, overlap_chars=0, rerank_depth=10)
        query = "aa bb"
        text = "aa bb cc dd " + "ee ff gg hh"   # chunk1 len 12, chunk2 len 11
        chunks = chunk_document(text, cfg)
        scorer = JaccardPairScorer()
        per_chunk = scorer.score_pairs([(query, c) for c in chunks])
        expected = sum(s * len(c) for s, c in zip(per_chunk, chunks)) / sum(len(c) for c in chunks)
        out = rerank(query, fused_list(["doc"]), scorer, cfg, {"doc": text})
        assert out.entries[0].score == pytest.approx(expected)

    def test_tail_keeps_fused_order_behind_block(self):
        cfg = ChunkingConfig(rerank_depth=2)
        texts = {d: f"text {d}" for d in "abcdef"}
        fused = fused_list(list("abcdef"))
        out = rerank("unrelated query wording", fused, JaccardPairScorer(), cfg, texts)
        assert set(out.doc_ids()[:2]) == {"a", "b"}   # re-scored block
        assert out.doc_ids()[2:] == ["c", "d", "e", "f"]  # fused order preserved

    def test_tail_scores_capped_at_block_minimum(self):
        cfg = ChunkingConfig(rerank_depth=1)
        fused = fused_list(["a", "b", "c"])
        out = rerank("zzz", fused, JaccardPairScorer(), cfg, {"a": "yyy"})
        scores = [e.score for e in out.entries]
        assert scores[0] == 0.0  # Jaccard of disjoint texts
        assert all(s <= scores[0] for s in scores[1:])
        assert all(b <= a for a, b in zip(scores, scores[1:]))

    def test_empty_fused_error(self):
        with pytest.raises(ValidationError):
            rerank("q", RankedList("q", (), "rrf"), JaccardPairScorer(), ChunkingConfig(), {})

    def test_missing_doc_text_scores_zero(self):
        out = rerank(
            "query", fused_list(["known", "unknown"]), JaccardPairScorer(),
            ChunkingConfig(), {"known": "query"},
        )
        assert out.doc_ids()[0] == "known"
        assert out.entries[1].score == 0.0

    def test_depth_locality_property(self):
        rng = random.Random(47)
        vocab = [f"w{i}" for i in range(20)]
        for _ in range(30):
            n = rng.randrange(1, 12)
            ids = [f"d{i}" for i in range(n)]
            texts = {d: " ".join(rng.choices(vocab, k=8)) for d in ids}
            depth = rng.randrange(0, n + 2)
            cfg = ChunkingConfig(rerank_depth=depth)
            fused = fused_list(ids)
            out = rerank("w1 w2 w3", fused, JaccardPairScorer(), cfg, texts)
            block = set(ids[:depth])
            assert set(out.doc_ids()[: len(block)]) == block
            assert out.doc_ids()[len(block):] == ids[depth:]


class TestEffectiveChunking:
    def test_external_limit_respected(self):
        class Limited:
            max_pair_length = 100

            def score_pairs(self, pairs):
                return [0.0] * len(pairs)

        cfg = ChunkingConfig(max_chars=2000, overlap_chars=200)
        eff = effective_chunking(cfg, Limited())
        assert eff.max_chars == 100
        assert eff.overlap_chars == 99  # clamped below max_chars

    def test_no_limit_unchanged(self):
        cfg = ChunkingConfig()
        assert effective_chunking(cfg, JaccardPairScorer()) is cfg
