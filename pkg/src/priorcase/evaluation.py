"""Retrieval metrics against citation-derived relevance judgments.

P@k, R@k and F1@k are swept over a k range; MAP and MRR are computed once
over the full returned ranking (k-independent) and repeated per row, which
is how the report presents a single MAP/MRR per configuration next to an
optimal k. Queries with an empty relevant set are excluded from
aggregation (not scored as zero) and counted in the report. Self-retrieval
entries (doc_id == query_id) are removed before any metric is computed.

The best-k row per configuration maximizes F1@k; ties resolve to the
smaller k. Report F1 is the macro mean of per-query F1 values, the same
averaging applied to precision and recall.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ValidationError
from .fusion import RankedEntry, RankedList

Qrels = dict[str, frozenset[str]]

REPORT_COLUMNS = ("Precision@k", "Recall@k", "F1-score@k", "MAP", "MRR", "k")

DEFAULT_K_RANGE = range(1, 21)


def load_qrels(path: str | Path) -> Qrels:
    """Parse 4-column qrels lines `query_id 0 doc_id relevance`.

    Only relevance 1 rows contribute; self pairs (doc == query) are
    ignored since a relevant set never contains its own query.
    """
    qrels: dict[str, set[str]] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValidationError(f"qrels line {line_no}: expected 4 columns, got {len(parts)}")
        query_id, _, doc_id, relevance = parts
        if relevance not in ("0", "1"):
            raise ValidationError(f"qrels line {line_no}: relevance must be 0 or 1")
        qrels.setdefault(query_id, set())
        if relevance == "1" and doc_id != query_id:
            qrels[query_id].add(doc_id)
    return {q: frozenset(docs) for q, docs in qrels.items()}


def qrels_from_corpus(corpus) -> Qrels:
    """Relevance sets from in-corpus citation links."""
    return {
        doc.doc_id: frozenset(c for c in doc.cited_doc_ids if c in corpus)
        for doc in corpus.query_documents()
    }


def _doc_ids(ranking: RankedList | Sequence[str]) -> list[str]:
    if isinstance(ranking, RankedList):
        return ranking.doc_ids()
    return list(ranking)


def precision_at_k(ranking: RankedList | Sequence[str], relevant: frozenset[str] | set[str], k: int) -> float:
    """|relevant ∩ top-k| / k; missing slots count as non-relevant."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    top = _doc_ids(ranking)[:k]
    return sum(1 for d in top if d in relevant) / k


def recall_at_k(ranking: RankedList | Sequence[str], relevant: frozenset[str] | set[str], k: int) -> float:
    """|relevant ∩ top-k| / |relevant|."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if not relevant:
        raise ValidationError("recall_at_k: empty relevant set (query should be excluded)")
    top = _doc_ids(ranking)[:k]
    return sum(1 for d in top if d in relevant) / len(relevant)


def f1_at_k(p: float, r: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


def average_precision(ranking: RankedList | Sequence[str], relevant: frozenset[str] | set[str]) -> float:
    """Mean of precision at each rank holding a relevant document.

    Relevant documents never retrieved contribute zero.
    """
    if not relevant:
        raise ValidationError("average_precision: empty relevant set")
    ids = _doc_ids(ranking)
    hits = 0
    total = 0.0
    for rank, doc_id in enumerate(ids, start=1):
        if doc_id in relevant:
            hits += 1
            total += hits / rank
    return total / len(relevant)


def reciprocal_rank(ranking: RankedList | Sequence[str], relevant: frozenset[str] | set[str]) -> float:
    for rank, doc_id in enumerate(_doc_ids(ranking), start=1):
        if doc_id in relevant:
            return 1.0 / rank
    return 0.0


def mrr(rankings_with_relevance: Iterable[tuple[RankedList | Sequence[str], frozenset[str] | set[str]]]) -> float:
    """Mean reciprocal rank; 0 for queries with no relevant retrieved."""
    values = [reciprocal_rank(r, rel) for r, rel in rankings_with_relevance]
    if not values:
        raise ValidationError("mrr: no evaluable queries")
    return sum(values) / len(values)


@dataclass(frozen=True)
class EvalRow:
    preset: str
    method: str
    k: int
    precision: float
    recall: float
    f1: float
    map: float
    mrr: float

    def as_report_cells(self) -> dict[str, float | int]:
        return {
            "Precision@k": self.precision,
            "Recall@k": self.recall,
            "F1-score@k": self.f1,
            "MAP": self.map,
            "MRR": self.mrr,
            "k": self.k,
        }


@dataclass
class EvalReport:
    rows: list[EvalRow]
    best_rows: list[EvalRow]
    n_queries: dict[tuple[str, str], int]
    excluded_queries: dict[tuple[str, str], int]
    k_range: list[int]
    manifest_path: str | None = None
    columns: tuple[str, ...] = REPORT_COLUMNS

    def to_dict(self) -> dict:
        def row_obj(row: EvalRow) -> dict:
            return {"preset": row.preset, "method": row.method, **row.as_report_cells()}

        return {
            "columns": list(self.columns),
            "k_range": self.k_range,
            "rows": [row_obj(r) for r in self.rows],
            "best_rows": [row_obj(r) for r in self.best_rows],
            "n_queries": {f"{p}/{m}": n for (p, m), n in self.n_queries.items()},
            "excluded_queries": {f"{p}/{m}": n for (p, m), n in self.excluded_queries.items()},
            "manifest": self.manifest_path,
        }

    def render_text(self) -> str:
        """Aligned plain-text table of the best-k rows, grouped by preset."""
        header = ["Query config", "Method"] + list(self.columns)
        lines: list[list[str]] = [header]
        from .segmenter import PRESET_LABELS

        for row in self.best_rows:
            cells = row.as_report_cells()
            lines.append(
                [PRESET_LABELS.get(row.preset, row.preset), row.method]
                + [
                    f"{cells[c]:.4f}" if isinstance(cells[c], float) else str(cells[c])
                    for c in self.columns
                ]
            )
        widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
        rendered = []
        for idx, line in enumerate(lines):
            rendered.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(line)).rstrip())
            if idx == 0:
                rendered.append("  ".join("-" * w for w in widths))
        return "\n".join(rendered) + "\n"

    def save(self, directory: str | Path) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        json_path = directory / "report.json"
        text_path = directory / "report.txt"
        json_path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        text_path.write_text(self.render_text(), encoding="utf-8")
        return json_path, text_path


def _strip_self(ranking: RankedList, query_id: str) -> RankedList:
    return ranking.without(query_id)


def sweep_and_report(
    runs: Mapping[tuple[str, str], Mapping[str, RankedList]],
    qrels: Qrels,
    k_range: Iterable[int] = DEFAULT_K_RANGE,
    manifest_path: str | None = None,
    best_by: str = "f1",
) -> EvalReport:
    """Compute the full metric table over (preset, method) blocks.

    Every ranking's query_id must appear in qrels (unknown ids raise);
    queries whose relevant set is empty are excluded from aggregation and
    counted. MAP/MRR are computed over the full ranking once per block.
    """
    ks = sorted(set(int(k) for k in k_range))
    if not ks or ks[0] < 1:
        raise ValidationError(f"invalid k_range {ks}")
    if best_by not in ("f1", "precision", "recall"):
        raise ValidationError(
            f"best-k criterion must be f1|precision|recall, got {best_by!r}"
        )

    rows: list[EvalRow] = []
    best_rows: list[EvalRow] = []
    n_queries: dict[tuple[str, str], int] = {}
    excluded: dict[tuple[str, str], int] = {}

    for (preset, method), rankings in runs.items():
        evaluable: list[tuple[RankedList, frozenset[str]]] = []
        n_excluded = 0
        for query_id in sorted(rankings):
            if query_id not in qrels:
                raise ValidationError(f"query {query_id!r} missing from qrels")
            relevant = qrels[query_id]
            if not relevant:
                n_excluded += 1
                continue
            evaluable.append((_strip_self(rankings[query_id], query_id), relevant))
        n_queries[(preset, method)] = len(evaluable)
        excluded[(preset, method)] = n_excluded

        if evaluable:
            block_map = sum(average_precision(r, rel) for r, rel in evaluable) / len(evaluable)
            block_mrr = mrr(evaluable)
        else:
            block_map = 0.0
            block_mrr = 0.0

        block_rows: list[EvalRow] = []
        for k in ks:
            if evaluable:
                ps = [precision_at_k(r, rel, k) for r, rel in evaluable]
                rs = [recall_at_k(r, rel, k) for r, rel in evaluable]
                f1s = [f1_at_k(p, rr) for p, rr in zip(ps, rs)]
                p_mean = sum(ps) / len(ps)
                r_mean = sum(rs) / len(rs)
                f1_mean = sum(f1s) / len(f1s)
            else:
                p_mean = r_mean = f1_mean = 0.0
            block_rows.append(
                EvalRow(
                    preset=preset,
                    method=method,
                    k=k,
                    precision=p_mean,
                    recall=r_mean,
                    f1=f1_mean,
                    map=block_map,
                    mrr=block_mrr,
                )
            )
        rows.extend(block_rows)
        best_rows.append(
            max(block_rows, key=lambda row: (getattr(row, best_by), -row.k))
        )

    return EvalReport(
        rows=rows,
        best_rows=best_rows,
        n_queries=n_queries,
        excluded_queries=excluded,
        k_range=ks,
        manifest_path=manifest_path,
    )


def save_run(path: str | Path, rankings: Mapping[str, RankedList], method: str) -> None:
    """Write run lines `query_id doc_id rank score method`, sorted by query."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for query_id in sorted(rankings):
            for entry in rankings[query_id].entries:
                fh.write(f"{query_id} {entry.doc_id} {entry.rank} {entry.score!r} {method}\n")


def load_run(path: str | Path) -> tuple[dict[str, RankedList], str]:
    """Read a run file back into per-query ranked lists plus its method tag."""
    grouped: dict[str, list[RankedEntry]] = {}
    method = ""
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ValidationError(f"run line {line_no}: expected 5 columns, got {len(parts)}")
        query_id, doc_id, rank, score, row_method = parts
        if method and row_method != method:
            raise ValidationError(f"run line {line_no}: mixed methods in one run file")
        method = row_method
        grouped.setdefault(query_id, []).append(RankedEntry(doc_id, int(rank), float(score)))
    rankings = {}
    for query_id, entries in grouped.items():
        entries.sort(key=lambda e: e.rank)
        rankings[query_id] = RankedList(query_id, tuple(entries), method)
    return rankings, method
