"""Dense embeddings and L2 nearest-neighbor search (flat and IVF-FLAT).

The flat index is the exactness oracle: it scans every vector. The
IVF-FLAT index partitions vectors into nlist k-means cells and scans only
the nprobe cells whose centroids are closest to the query; inside scanned
cells distances are exact. nprobe = nlist therefore reproduces the flat
result bit for bit - both paths compute each row's distance with the same
routine, so per-row floats are identical regardless of which subset is
scanned.

Scores are -distance so every ranked list in the engine is uniformly
descending-score.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np

from . import lexical
from .errors import ValidationError
from .fusion import RankedEntry, RankedList, SOURCE_VECTOR

DEFAULT_DIMENSION = 768
DEFAULT_CHAR_CAP = 60_000
VECTOR_FORMAT = "priorcase-vector"
VECTOR_VERSION = 1


class Embedder(Protocol):
    dimension: int

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class HashingEmbedder:
    """Deterministic feature-hashing embedder.

    Token counts are hashed into a fixed-size vector which is then
    L2-normalized. The hash is keyed blake2b, stable across processes and
    platforms; identical text always produces the identical vector. Empty
    (or all-punctuation) text embeds to the zero vector.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 1:
            raise ValidationError(f"embedder dimension must be >= 1, got {dimension}")
        self.dimension = dimension
        self._slot_cache: dict[str, int] = {}

    def _slot(self, token: str) -> int:
        slot = self._slot_cache.get(token)
        if slot is None:
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            slot = int.from_bytes(digest, "big") % self.dimension
            self._slot_cache[token] = slot
        return slot

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dimension), dtype=np.float64)
        for row, text in enumerate(texts):
            for token in lexical.tokenize(text):
                out[row, self._slot(token)] += 1.0
            norm = math.sqrt(float(np.dot(out[row], out[row])))
            if norm > 0.0:
                out[row] /= norm
        return out


class ExternalEmbedder:
    """Embeds through the sidecar protocol; dimension comes from `hello`."""

    def __init__(self, client, batch_size: int = 128):
        self._client = client
        self._batch_size = batch_size
        self.dimension = client.hello().dimension

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dimension), dtype=np.float64)
        for start in range(0, len(texts), self._batch_size):
            batch = list(texts[start : start + self._batch_size])
            vectors = self._client.embed(batch)
            for offset, vec in enumerate(vectors):
                if len(vec) != self.dimension:
                    raise ValidationError(
                        f"sidecar returned dimension {len(vec)}, expected {self.dimension}"
                    )
                out[start + offset] = vec
        return out


def embed_texts(
    texts: Sequence[str], embedder: Embedder, char_cap: int = DEFAULT_CHAR_CAP
) -> np.ndarray:
    """Embed texts in order, truncating each to char_cap first."""
    capped = [t[:char_cap] for t in texts]
    matrix = embedder.embed(capped)
    if matrix.shape != (len(texts), embedder.dimension):
        raise ValidationError(
            f"embedder returned shape {matrix.shape}, expected {(len(texts), embedder.dimension)}"
        )
    return matrix


@dataclass(frozen=True)
class IvfParams:
    nlist: int
    kmeans_iters: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.nlist < 1:
            raise ValidationError(f"nlist must be >= 1, got {self.nlist}")
        if self.kmeans_iters < 1:
            raise ValidationError(f"kmeans_iters must be >= 1, got {self.kmeans_iters}")


@dataclass(frozen=True)
class SearchParams:
    nprobe: int
    top_k: int

    def __post_init__(self) -> None:
        if self.nprobe < 1:
            raise ValidationError(f"nprobe must be >= 1, got {self.nprobe}")
        if self.top_k < 1:
            raise ValidationError(f"top_k must be >= 1, got {self.top_k}")


def default_nlist(n_vectors: int) -> int:
    """Desk-scale default: min(2048, ceil(sqrt(n)))."""
    return max(1, min(2048, math.isqrt(max(n_vectors, 1) - 1) + 1))


def default_nprobe(nlist: int) -> int:
    return max(1, math.ceil(nlist / 16))


def _as_id_matrix(embeddings: Mapping[str, np.ndarray]) -> tuple[tuple[str, ...], np.ndarray]:
    if not embeddings:
        raise ValidationError("no vectors to index")
    ids = tuple(sorted(embeddings))
    dim = len(embeddings[ids[0]])
    matrix = np.zeros((len(ids), dim), dtype=np.float64)
    for row, doc_id in enumerate(ids):
        vec = np.asarray(embeddings[doc_id], dtype=np.float64)
        if vec.ndim != 1 or len(vec) != dim:
            raise ValidationError(
                f"dimension mismatch for {doc_id!r}: got {vec.shape}, expected ({dim},)"
            )
        if not np.all(np.isfinite(vec)):
            raise ValidationError(f"non-finite values in embedding for {doc_id!r}")
        matrix[row] = vec
    return ids, matrix


def _row_distances(matrix: np.ndarray, rows: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Exact L2 distance of each selected row to the query.

    Row-local arithmetic: the float result for a row depends only on that
    row's values, never on which other rows are in the batch. This is what
    makes IVF-with-all-cells bitwise equal to the flat scan.
    """
    diff = matrix[rows] - query
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


@dataclass(frozen=True)
class FlatIndex:
    ids: tuple[str, ...]
    matrix: np.ndarray  # (n, dim) float64, rows in ascending id order

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.ids)


def build_flat(embeddings: Mapping[str, np.ndarray]) -> FlatIndex:
    ids, matrix = _as_id_matrix(embeddings)
    return FlatIndex(ids=ids, matrix=matrix)


def _check_query(query: np.ndarray, dimension: int) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if len(q) != dimension:
        raise ValidationError(f"query dimension {len(q)} != index dimension {dimension}")
    return q


def _rank_rows(
    ids: Sequence[str],
    matrix: np.ndarray,
    rows: np.ndarray,
    query: np.ndarray,
    top_k: int,
    query_id: str,
) -> RankedList:
    distances = _row_distances(matrix, rows, query)
    # lexsort: primary key distance, secondary the (already ascending-id) row order
    order = np.lexsort((rows, distances))[:top_k]
    entries = tuple(
        RankedEntry(ids[rows[idx]], rank + 1, -float(distances[idx]))
        for rank, idx in enumerate(order)
    )
    return RankedList(query_id, entries, SOURCE_VECTOR)


def search_flat(
    index: FlatIndex, query: np.ndarray, top_k: int, query_id: str = ""
) -> RankedList:
    """Exact L2 nearest neighbors; ties broken by ascending doc_id."""
    q = _check_query(query, index.dimension)
    rows = np.arange(len(index.ids))
    return _rank_rows(index.ids, index.matrix, rows, q, top_k, query_id)


@dataclass(frozen=True)
class IvfFlatIndex:
    ids: tuple[str, ...]
    matrix: np.ndarray
    centroids: np.ndarray  # (nlist, dim)
    assignments: np.ndarray  # (n,) cell per row
    params: IvfParams  # nlist here is the effective (possibly clamped) value
    clamped: bool = False

    @property
    def dimension(self) -> int:
        return self.matrix.shape[1]

    @property
    def nlist(self) -> int:
        return self.centroids.shape[0]

    def cell_members(self, cell: int) -> np.ndarray:
        return np.nonzero(self.assignments == cell)[0]


def _assign_cells(matrix: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # Squared distances suffice for argmin; ties resolve to the lowest cell.
    sq = (
        np.einsum("ij,ij->i", matrix, matrix)[:, None]
        - 2.0 * matrix @ centroids.T
        + np.einsum("ij,ij->i", centroids, centroids)[None, :]
    )
    return np.argmin(sq, axis=1)


def build_ivf(embeddings: Mapping[str, np.ndarray], params: IvfParams) -> IvfFlatIndex:
    """Partition vectors into nlist cells with seeded Lloyd's k-means.

    nlist is clamped to the vector count when larger (recorded on the
    index). Initial centroids are sampled without replacement; a cell left
    empty after an update is re-seeded with the farthest member of the
    largest cell. Deterministic for a fixed seed.
    """
    ids, matrix = _as_id_matrix(embeddings)
    n = len(ids)
    nlist = min(params.nlist, n)
    clamped = nlist != params.nlist
    rng = np.random.default_rng(params.seed)
    init_rows = np.sort(rng.choice(n, size=nlist, replace=False))
    centroids = matrix[init_rows].copy()

    assignments = _assign_cells(matrix, centroids)
    for _ in range(params.kmeans_iters):
        counts = np.bincount(assignments, minlength=nlist)
        for cell in range(nlist):
            if counts[cell] > 0:
                centroids[cell] = matrix[assignments == cell].mean(axis=0)
        for cell in np.nonzero(counts == 0)[0]:
            donor = int(np.argmax(counts))
            members = np.nonzero(assignments == donor)[0]
            dist = _row_distances(matrix, members, centroids[donor])
            far = members[int(np.argmax(dist))]
            centroids[cell] = matrix[far]
            assignments[far] = cell
            counts[donor] -= 1
            counts[cell] += 1
        assignments = _assign_cells(matrix, centroids)

    effective = replace(params, nlist=nlist)
    return IvfFlatIndex(
        ids=ids,
        matrix=matrix,
        centroids=centroids,
        assignments=assignments,
        params=effective,
        clamped=clamped,
    )


def search_ivf(
    index: IvfFlatIndex, query: np.ndarray, params: SearchParams, query_id: str = ""
) -> RankedList:
    """Scan the nprobe cells nearest to the query; exact L2 inside them."""
    if params.nprobe > index.nlist:
        raise ValidationError(
            f"nprobe {params.nprobe} out of range 1..{index.nlist}"
        )
    q = _check_query(query, index.dimension)
    centroid_rows = np.arange(index.nlist)
    centroid_dist = _row_distances(index.centroids, centroid_rows, q)
    probe = np.lexsort((centroid_rows, centroid_dist))[: params.nprobe]
    mask = np.isin(index.assignments, probe)
    rows = np.nonzero(mask)[0]
    if len(rows) == 0:
        return RankedList(query_id, (), SOURCE_VECTOR)
    return _rank_rows(index.ids, index.matrix, rows, q, params.top_k, query_id)


def save_vector_index(index: IvfFlatIndex, path: str | Path) -> None:
    meta = {
        "format": VECTOR_FORMAT,
        "version": VECTOR_VERSION,
        "dimension": index.dimension,
        "nlist": index.params.nlist,
        "kmeans_iters": index.params.kmeans_iters,
        "seed": index.params.seed,
        "clamped": index.clamped,
    }
    np.savez(
        path,
        ids=np.array(index.ids, dtype=object),
        matrix=index.matrix,
        centroids=index.centroids,
        assignments=index.assignments,
        meta=json.dumps(meta),
    )


def load_vector_index(path: str | Path) -> IvfFlatIndex:
    try:
        data = np.load(path, allow_pickle=True)
    except Exception as exc:  # np.load raises a zoo of types on bad files
        raise ValidationError(f"cannot read vector index {path}: {exc}") from exc
    meta = json.loads(str(data["meta"]))
    if meta.get("format") != VECTOR_FORMAT or meta.get("version") != VECTOR_VERSION:
        raise ValidationError(f"{path}: not a v{VECTOR_VERSION} {VECTOR_FORMAT} file")
    params = IvfParams(nlist=meta["nlist"], kmeans_iters=meta["kmeans_iters"], seed=meta["seed"])
    return IvfFlatIndex(
        ids=tuple(str(i) for i in data["ids"]),
        matrix=np.asarray(data["matrix"], dtype=np.float64),
        centroids=np.asarray(data["centroids"], dtype=np.float64),
        assignments=np.asarray(data["assignments"], dtype=np.int64),
        params=params,
        clamped=bool(meta["clamped"]),
    )


def flat_view(index: IvfFlatIndex) -> FlatIndex:
    """Flat (exact) index sharing the IVF index's vectors."""
    return FlatIndex(ids=index.ids, matrix=index.matrix)
