from __future__ import annotations

import math

from priorcase_sidecar.models import (
    HashedCosineScorer,
    HashingTextEmbedder,
    KeywordRoleTagger,
    ROLE_NAMES,
)


class TestEmbedder:
    def test_dimension_and_norm(self):
        emb = HashingTextEmbedder(96)
        [vec] = emb.embed(["some text to embed"])
        assert len(vec) == 96
        assert abs(math.sqrt(sum(v * v for v in vec)) - 1.0) < 1e-9

    def test_deterministic(self):
        emb = HashingTextEmbedder(64)
        assert emb.embed(["same input"]) == emb.embed(["same input"])

    def test_empty_text_zero_vector(self):
        emb = HashingTextEmbedder(32)
        [vec] = emb.embed([""])
        assert all(v == 0.0 for v in vec)

    def test_different_texts_different_vectors(self):
        emb = HashingTextEmbedder(256)
        a, b = emb.embed(["first legal judgment", "completely different words"])
        assert a != b

    def test_bigrams_make_order_matter(self):
        emb = HashingTextEmbedder(512)
        a, b = emb.embed(["alpha beta gamma", "gamma beta alpha"])
        assert a != b


class TestScorer:
    def test_identity_pair_scores_one(self):
        scorer = HashedCosineScorer()
        assert scorer.score("a b c", "a b c") == 1.0

    def test_disjoint_scores_zero(self):
        scorer = HashedCosineScorer()
        assert scorer.score("alpha", "omega") == 0.0

    def test_range_and_determinism(self):
        scorer = HashedCosineScorer()
        pairs = [("a b b", "b c"), ("x", ""), ("", ""), ("w w w", "w")]
        for q, d in pairs:
            s = scorer.score(q, d)
            assert 0.0 <= s <= 1.0
            assert scorer.score(q, d) == s

    def test_tf_weighting_differs_from_set_overlap(self):
        scorer = HashedCosineScorer()
        # Same token sets, different frequencies -> different cosine.
        assert scorer.score("a b", "a a a b") != scorer.score("a b", "a b")


class TestTagger:
    def test_roles_are_canonical(self):
        tagger = KeywordRoleTagger()
        roles = tagger.tag(["Sentence one.", "It was contended otherwise.", "Appeal dismissed."])
        assert all(r in ROLE_NAMES for r in roles)

    def test_keyword_rules(self):
        tagger = KeywordRoleTagger()
        assert tagger.tag(["The question is whether the act applies."]) == ["Issue"]
        assert tagger.tag(["Counsel submitted a brief.", "x", "y", "z", "q", "r"])[0] == "Argument"

    def test_positional_prior(self):
        tagger = KeywordRoleTagger()
        roles = tagger.tag([f"neutral {i}" for i in range(10)])
        assert roles[0] == "Facts"
        assert roles[-1] == "Decision"
        assert "Other" in roles[2:9]
