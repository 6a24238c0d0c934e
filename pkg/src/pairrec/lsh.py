"""Approximate k-nearest-neighbor search by random binary projections.

Items are hashed into 2^p buckets by the sign pattern of p random
hyperplane projections; a kNN query scans only the query's bucket. With the
default p=3 the index has 8 buckets, so a query touches about |I|/8 items.
Queries whose bucket holds fewer than k neighbors return short lists; the
failure rate is measured, not hidden.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .similarity import cosine_to_rows, normalize_rows


@dataclass
class ProjectionIndex:
    planes: np.ndarray
    vectors: np.ndarray
    buckets: dict[int, np.ndarray]
    seed: int
    ids: tuple[str, ...] | None = None

    def signature(self, v) -> int:
        bits = np.asarray(self.planes @ np.asarray(v, dtype=float) >= 0.0)
        # exactly-zero dots hash as 1 via >=; deterministic tie rule
        return int(sum(1 << j for j, b in enumerate(bits) if b))

    def bucket_of(self, v) -> np.ndarray:
        return self.buckets.get(self.signature(v), np.empty(0, dtype=int))

    def __len__(self) -> int:
        return self.vectors.shape[0]


def _bucket_keys(planes: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    bits = vectors @ planes.T >= 0.0
    weights = 1 << np.arange(planes.shape[0])
    return bits @ weights


def build_index(vectors, p: int = 3, seed: int = 0, ids=None) -> ProjectionIndex:
    """Hash vectors into 2^p buckets using seeded Gaussian unit planes."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim != 2 or vectors.shape[0] == 0:
        raise ValueError("vectors must be a non-empty 2-d array")
    if p < 1:
        raise ValueError(f"plane count must be >= 1, got {p}")
    if ids is not None and len(ids) != vectors.shape[0]:
        raise ValueError("ids length must match vector count")
    rng = np.random.default_rng(seed)
    planes = normalize_rows(rng.standard_normal((p, vectors.shape[1])))
    keys = _bucket_keys(planes, vectors)
    buckets = {
        int(key): np.flatnonzero(keys == key) for key in np.unique(keys)
    }
    return ProjectionIndex(
        planes=planes,
        vectors=vectors,
        buckets=buckets,
        seed=seed,
        ids=tuple(ids) if ids is not None else None,
    )


def rebucket(index: ProjectionIndex, new_vectors) -> ProjectionIndex:
    """Re-index different vectors under the same planes (same bucket geometry)."""
    new_vectors = np.asarray(new_vectors, dtype=float)
    if new_vectors.shape != index.vectors.shape:
        raise ValueError(
            f"expected vectors of shape {index.vectors.shape}, got {new_vectors.shape}"
        )
    keys = _bucket_keys(index.planes, new_vectors)
    buckets = {int(key): np.flatnonzero(keys == key) for key in np.unique(keys)}
    return ProjectionIndex(
        planes=index.planes,
        vectors=new_vectors,
        buckets=buckets,
        seed=index.seed,
        ids=index.ids,
    )


def knn(index: ProjectionIndex, query, k: int, exclude: int | None = None):
    """Up to k bucket neighbors of ``query`` by descending cosine.

    Ties break on ascending dense index. Pass ``exclude`` with the query
    item's own dense index when the query is an indexed item. May return
    fewer than k results (an LSH failure); callers decide what to do then.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    query = np.asarray(query, dtype=float)
    if not np.all(np.isfinite(query)):
        raise ValueError("query must be finite")
    if len(index) == 0:
        raise ValueError("index is empty")
    members = index.bucket_of(query)
    if exclude is not None:
        members = members[members != exclude]
    if members.size == 0:
        return []
    cos = cosine_to_rows(index.vectors[members], query)
    order = np.lexsort((members, -cos))[:k]
    if index.ids is None:
        return [(int(members[i]), float(cos[i])) for i in order]
    return [(index.ids[members[i]], float(cos[i])) for i in order]


def failure_rate(index: ProjectionIndex, queries, k: int, excludes=None) -> float:
    """Fraction of queries whose bucket yields fewer than k neighbors."""
    queries = np.asarray(queries, dtype=float)
    if queries.ndim != 2 or queries.shape[0] == 0:
        raise ValueError("queries must be a non-empty 2-d array")
    if excludes is None:
        excludes = [None] * queries.shape[0]
    failures = sum(
        1 for q, e in zip(queries, excludes) if len(knn(index, q, k, exclude=e)) < k
    )
    return failures / queries.shape[0]
