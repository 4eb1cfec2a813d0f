from __future__ import annotations

import json
from pathlib import Path

import pytest
import yaml
from fastapi.testclient import TestClient

from priorcase.corpus import save_corpus
from priorcase.service.app import create_app
from priorcase.synthetic import PlantedSpec, make_planted_corpus

SPEC = PlantedSpec(
    n_docs=30,
    n_queries=4,
    n_relevant=3,
    background_vocab=200,
    topic_vocab=8,
    sentences_per_doc=5,
    tokens_per_sentence=7,
    seed=9,
)


@pytest.fixture(scope="module")
def corpus_file(tmp_path_factory) -> Path:
    corpus, _ = make_planted_corpus(SPEC)
    path = tmp_path_factory.mktemp("svc") / "corpus.jsonl"
    save_corpus(corpus, path)
    return path


@pytest.fixture(scope="module")
def config_file(tmp_path_factory, corpus_file) -> Path:
    out = tmp_path_factory.mktemp("svc-out")
    raw = {
        "corpus_path": str(corpus_file),
        "output_dir": str(out / "exp"),
        "presets": ["full"],
        "methods": ["vector", "trace_full"],
        "annotator": "file",
        "k_vec": 15,
        "seed": 2,
        "embedder": {"kind": "hashing", "dimension": 64},
        "ivf": {"nlist": 3, "kmeans_iters": 3},
        "search": {"nprobe": 3},
        "chunking": {"max_chars": 300, "overlap_chars": 30, "rerank_depth": 8},
        "eval": {"k_min": 1, "k_max": 5},
    }
    path = tmp_path_factory.mktemp("svc-cfg") / "config.yaml"
    path.write_text(yaml.safe_dump(raw), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def client() -> TestClient:
    return TestClient(create_app())


class TestServiceEndpoints:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"

    def test_ingest(self, client, corpus_file):
        response = client.post("/ingest", json={"corpus_path": str(corpus_file)})
        assert response.status_code == 200
        body = response.json()
        assert body["n_documents"] == SPEC.n_docs
        assert body["n_query_documents"] == SPEC.n_queries

    def test_ingest_missing_file_maps_to_400(self, client):
        response = client.post("/ingest", json={"corpus_path": "/nope/missing.jsonl"})
        assert response.status_code == 400
        assert response.json()["error"] == "validation"

    def test_search_without_index_is_stage_error(self, corpus_file):
        fresh = TestClient(create_app())
        response = fresh.post("/search", json={"text": "anything"})
        assert response.status_code == 500
        assert response.json()["error"] == "stage"

    def test_index_then_search(self, client, config_file):
        response = client.post("/index", json={"config_path": str(config_file)})
        assert response.status_code == 200
        body = response.json()
        assert body["n_documents"] == SPEC.n_docs
        assert body["nlist"] == 3

        search = client.post(
            "/search",
            json={"doc_id": "query000", "method": "trace_full", "preset": "full", "top_k": 5},
        )
        assert search.status_code == 200
        entries = search.json()["entries"]
        assert len(entries) == 5
        assert entries[0]["rank"] == 1
        assert all(e["doc_id"] != "query000" for e in entries)

    def test_search_from_persisted_workspace(self, config_file, tmp_path_factory):
        ws = tmp_path_factory.mktemp("ws")
        fresh = TestClient(create_app())
        built = fresh.post(
            "/index", json={"config_path": str(config_file), "workspace_dir": str(ws)}
        )
        assert built.status_code == 200
        other = TestClient(create_app())  # brand-new app, loads from disk
        search = other.post(
            "/search",
            json={"text": "topic001w1 topic001w2", "method": "vector",
                  "top_k": 3, "workspace_dir": str(ws)},
        )
        assert search.status_code == 200
        assert len(search.json()["entries"]) == 3

    def test_run_and_eval(self, client, config_file, tmp_path_factory):
        out = tmp_path_factory.mktemp("run-out")
        response = client.post(
            "/run", json={"config_path": str(config_file), "output_dir": str(out)}
        )
        assert response.status_code == 200
        body = response.json()
        assert body["report"]["columns"] == [
            "Precision@k", "Recall@k", "F1-score@k", "MAP", "MRR", "k",
        ]
        assert len(body["report"]["best_rows"]) == 2  # 1 preset x 2 methods
        assert Path(body["manifest_path"]).exists()

        evaluated = client.post(
            "/eval",
            json={"runs_dir": str(out / "runs"), "qrels_path": str(out / "qrels.txt"),
                  "k_min": 1, "k_max": 5},
        )
        assert evaluated.status_code == 200
        fresh_rows = evaluated.json()["report"]["best_rows"]
        original_rows = body["report"]["best_rows"]
        assert {(r["preset"], r["method"], r["k"]) for r in fresh_rows} == {
            (r["preset"], r["method"], r["k"]) for r in original_rows
        }

    def test_eval_rejects_inverted_k_range(self, client, config_file, tmp_path_factory):
        out = tmp_path_factory.mktemp("bad-k")
        ok = client.post("/run", json={"config_path": str(config_file), "output_dir": str(out)})
        assert ok.status_code == 200
        response = client.post(
            "/eval",
            json={"runs_dir": str(out / "runs"), "qrels_path": str(out / "qrels.txt"),
                  "k_min": 5, "k_max": 2},
        )
        assert response.status_code == 400

    def test_export_qrels(self, client, corpus_file, tmp_path_factory):
        out_path = tmp_path_factory.mktemp("q") / "qrels.txt"
        response = client.post(
            "/export-qrels",
            json={"corpus_path": str(corpus_file), "output_path": str(out_path)},
        )
        assert response.status_code == 200
        assert response.json()["n_lines"] == SPEC.n_queries * SPEC.n_relevant
        line = out_path.read_text().splitlines()[0].split()
        assert len(line) == 4 and line[1] == "0" and line[3] == "1"

    def test_annotate_endpoint(self, client, corpus_file, tmp_path_factory):
        out_path = tmp_path_factory.mktemp("a") / "annotated.jsonl"
        response = client.post(
            "/annotate",
            json={"corpus_path": str(corpus_file), "output_path": str(out_path),
                  "strategy": "heuristic"},
        )
        assert response.status_code == 200
        body = response.json()
        assert body["n_annotated"] == body["n_documents"]
        first = json.loads(out_path.read_text().splitlines()[0])
        assert "sentences" in first
