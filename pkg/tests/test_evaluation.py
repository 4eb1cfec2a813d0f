from __future__ import annotations

import random

import pytest

import oracles
from priorcase.errors import ValidationError
from priorcase.evaluation import (
    REPORT_COLUMNS,
    average_precision,
    f1_at_k,
    load_qrels,
    load_run,
    mrr,
    precision_at_k,
    recall_at_k,
    reciprocal_rank,
    save_run,
    sweep_and_report,
)
from priorcase.fusion import RankedEntry, RankedList


def ranking(query_id: str, doc_ids: list[str]) -> RankedList:
    n = len(doc_ids)
    entries = tuple(RankedEntry(d, i + 1, float(n - i)) for i, d in enumerate(doc_ids))
    return RankedList(query_id, entries, "vector")


class TestPointMetrics:
    def test_precision_worked(self):
        assert precision_at_k(["d1", "d2", "d3"], {"d1", "d3"}, 3) == pytest.approx(2 / 3)

    def test_precision_empty_relevant_zero(self):
        assert precision_at_k(["d1", "d2"], set(), 2) == 0.0

    def test_precision_all_relevant_one(self):
        assert precision_at_k(["d1", "d2"], {"d1", "d2"}, 2) == 1.0

    def test_precision_denominator_is_k(self):
        # fewer than k retrieved: missing slots count as non-relevant
        assert precision_at_k(["d1"], {"d1"}, 4) == pytest.approx(1 / 4)

    def test_recall_worked(self):
        assert recall_at_k(["d1", "d2", "d3"], {"d1", "d3"}, 2) == pytest.approx(1 / 2)

    def test_recall_complete_one(self):
        assert recall_at_k(["d1", "d2"], {"d1", "d2"}, 5) == 1.0

    def test_recall_none_zero(self):
        assert recall_at_k(["d1"], {"x"}, 1) == 0.0

    def test_recall_requires_relevant(self):
        with pytest.raises(ValidationError):
            recall_at_k(["d1"], set(), 1)

    def test_f1_symmetric_case(self):
        assert f1_at_k(0.5, 0.5) == 0.5

    def test_f1_zero(self):
        assert f1_at_k(0.0, 0.9) == 0.0
        assert f1_at_k(0.0, 0.0) == 0.0

    def test_f1_worked(self):
        assert f1_at_k(2 / 3, 1 / 2) == pytest.approx(4 / 7)

    def test_ap_worked(self):
        assert average_precision(["d1", "d2", "d3"], {"d1", "d3"}) == pytest.approx(5 / 6)

    def test_ap_first_doc_only_relevant(self):
        assert average_precision(["d1", "d2"], {"d1"}) == 1.0

    def test_ap_unretrieved_relevant_contributes_zero(self):
        assert average_precision(["d1"], {"d1", "ghost"}) == pytest.approx(1 / 2)

    def test_ap_is_one_iff_perfect_prefix(self):
        assert average_precision(["r1", "r2", "x"], {"r1", "r2"}) == 1.0
        assert average_precision(["r1", "x", "r2"], {"r1", "r2"}) < 1.0

    def test_rr_and_mrr(self):
        assert reciprocal_rank(["x", "y", "z", "d"], {"d"}) == 0.25
        assert mrr([(["d"], {"d"}), (["x", "d"], {"d"})]) == pytest.approx(0.75)
        assert mrr([(["x"], {"d"})]) == 0.0


class TestQrelsIO:
    def test_load_qrels(self, tmp_path):
        path = tmp_path / "qrels.txt"
        path.write_text("q1 0 d1 1\nq1 0 d2 0\nq2 0 d9 1\nq2 0 q2 1\n", encoding="utf-8")
        qrels = load_qrels(path)
        assert qrels == {"q1": frozenset({"d1"}), "q2": frozenset({"d9"})}

    def test_bad_column_count(self, tmp_path):
        path = tmp_path / "qrels.txt"
        path.write_text("q1 d1 1\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="4 columns"):
            load_qrels(path)

    def test_bad_relevance(self, tmp_path):
        path = tmp_path / "qrels.txt"
        path.write_text("q1 0 d1 2\n", encoding="utf-8")
        with pytest.raises(ValidationError, match="relevance"):
            load_qrels(path)


class TestRunIO:
    def test_round_trip(self, tmp_path):
        rankings = {
            "q1": ranking("q1", ["a", "b"]),
            "q2": ranking("q2", ["c"]),
        }
        path = tmp_path / "x.run"
        save_run(path, rankings, "vector")
        loaded, method = load_run(path)
        assert method == "vector"
        assert loaded["q1"].doc_ids() == ["a", "b"]
        assert loaded["q2"].entries[0].score == 1.0

    def test_score_repr_round_trips_floats(self, tmp_path):
        entries = (RankedEntry("a", 1, 1 / 3), RankedEntry("b", 2, 0.1 + 0.2))
        rankings = {"q": RankedList("q", entries, "bm25")}
        path = tmp_path / "x.run"
        save_run(path, rankings, "bm25")
        loaded, _ = load_run(path)
        assert loaded["q"].entries[0].score == 1 / 3
        assert loaded["q"].entries[1].score == 0.1 + 0.2


class TestSweep:
    def test_perfect_ranking_formulas(self):
        relevant = {"r1", "r2", "r3"}
        perfect = ranking("q", ["r1", "r2", "r3", "x1", "x2"])
        qrels = {"q": frozenset(relevant)}
        report = sweep_and_report({("full", "vector"): {"q": perfect}}, qrels, range(1, 6))
        for row in report.rows:
            k = row.k
            assert row.precision == pytest.approx(min(len(relevant), k) / k)
            assert row.recall == pytest.approx(min(len(relevant), k) / len(relevant))
        assert report.best_rows[0].map == 1.0
        assert report.best_rows[0].mrr == 1.0

    def test_unknown_query_id_error(self):
        runs = {("full", "vector"): {"mystery": ranking("mystery", ["a"])}}
        with pytest.raises(ValidationError, match="mystery"):
            sweep_and_report(runs, {}, range(1, 3))

    def test_self_retrieval_removed(self):
        lst = ranking("q", ["q", "r"])
        report = sweep_and_report(
            {("full", "vector"): {"q": lst}}, {"q": frozenset({"r"})}, range(1, 2)
        )
        assert report.rows[0].precision == 1.0  # "q" dropped, "r" at rank 1

    def test_empty_relevant_excluded_not_zeroed(self):
        runs = {
            ("full", "vector"): {
                "q1": ranking("q1", ["r"]),
                "q2": ranking("q2", ["x"]),
            }
        }
        qrels = {"q1": frozenset({"r"}), "q2": frozenset()}
        report = sweep_and_report(runs, qrels, range(1, 2))
        assert report.excluded_queries[("full", "vector")] == 1
        assert report.n_queries[("full", "vector")] == 1
        assert report.rows[0].precision == 1.0  # q2 did not drag the mean down

    def test_best_k_max_f1_tie_smaller_k(self):
        # Construct equal f1 at k=1 and k=2: relevant {r}, ranking [r, x]:
        # k=1 -> P=1, R=1, F1=1 ; k=2 -> P=.5, R=1, F1=2/3. Best is k=1.
        report = sweep_and_report(
            {("full", "m"): {"q": ranking("q", ["r", "x"])}},
            {"q": frozenset({"r"})},
            range(1, 3),
        )
        assert report.best_rows[0].k == 1

    def test_best_by_criterion_configurable(self):
        # relevant {r}, ranking [x, r, y]: precision peaks at k=2 (0.5) vs
        # k=1 (0) and k=3 (1/3); recall peaks first at k=2 and stays 1.
        runs = {("full", "m"): {"q": ranking("q", ["x", "r", "y"])}}
        qrels = {"q": frozenset({"r"})}
        by_precision = sweep_and_report(runs, qrels, range(1, 4), best_by="precision")
        assert by_precision.best_rows[0].k == 2
        by_recall = sweep_and_report(runs, qrels, range(1, 4), best_by="recall")
        assert by_recall.best_rows[0].k == 2  # ties at k=2,3 -> smaller k
        with pytest.raises(ValidationError):
            sweep_and_report(runs, qrels, range(1, 4), best_by="map")

    def test_map_mrr_k_independent(self):
        report = sweep_and_report(
            {("full", "m"): {"q": ranking("q", ["x", "r"])}},
            {"q": frozenset({"r"})},
            range(1, 4),
        )
        assert len({row.map for row in report.rows}) == 1
        assert len({row.mrr for row in report.rows}) == 1

    def test_report_columns_exact(self):
        report = sweep_and_report(
            {("full", "m"): {"q": ranking("q", ["r"])}},
            {"q": frozenset({"r"})},
            range(1, 2),
        )
        assert report.columns == REPORT_COLUMNS
        assert tuple(report.best_rows[0].as_report_cells()) == REPORT_COLUMNS
        text = report.render_text()
        for column in REPORT_COLUMNS:
            assert column in text

    def test_metrics_bounded_and_recall_monotone(self):
        rng = random.Random(61)
        docs = [f"d{i}" for i in range(20)]
        for _ in range(30):
            retrieved = rng.sample(docs, rng.randrange(1, len(docs)))
            relevant = frozenset(rng.sample(docs, rng.randrange(1, 6)))
            runs = {("full", "m"): {"q": ranking("q", retrieved)}}
            report = sweep_and_report(runs, {"q": relevant}, range(1, 15))
            recalls = [row.recall for row in report.rows]
            assert all(0 <= v <= 1 for row in report.rows for v in
                       (row.precision, row.recall, row.f1, row.map, row.mrr))
            assert all(b >= a - 1e-12 for a, b in zip(recalls, recalls[1:]))

    def test_matches_brute_force_oracle(self):
        rng = random.Random(71)
        docs = [f"d{i}" for i in range(20)]
        for _ in range(40):
            n_queries = rng.randrange(1, 6)
            runs_block = {}
            qrels = {}
            for qi in range(n_queries):
                qid = f"q{qi}"
                runs_block[qid] = ranking(qid, rng.sample(docs, rng.randrange(1, len(docs))))
                qrels[qid] = frozenset(rng.sample(docs, rng.randrange(1, 8)))
            report = sweep_and_report({("full", "m"): runs_block}, qrels, range(1, 10))
            for row in report.rows:
                ps, rs, f1s, aps, rrs = [], [], [], [], []
                for qid, lst in runs_block.items():
                    ids = [d for d in lst.doc_ids() if d != qid]
                    rel = set(qrels[qid])
                    ps.append(oracles.precision_at_k(ids, rel, row.k))
                    rs.append(oracles.recall_at_k(ids, rel, row.k))
                    f1s.append(oracles.f1_at_k(ids, rel, row.k))
                    aps.append(oracles.average_precision(ids, rel))
                    rrs.append(oracles.reciprocal_rank(ids, rel))
                assert row.precision == pytest.approx(oracles.macro_mean(ps), abs=1e-12)
                assert row.recall == pytest.approx(oracles.macro_mean(rs), abs=1e-12)
                assert row.f1 == pytest.approx(oracles.macro_mean(f1s), abs=1e-12)
                assert row.map == pytest.approx(oracles.macro_mean(aps), abs=1e-12)
                assert row.mrr == pytest.approx(oracles.macro_mean(rrs), abs=1e-12)
