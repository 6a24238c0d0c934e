"""Non-negative item embeddings from tag memberships.

Items are embedded by factorizing the binary item-tag matrix M ≈ W·H with
multiplicative updates on the squared Frobenius objective; the rows of W are
the item vectors. Items without tags get the zero vector.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .io import format_floats, parse_floats
from .model import Catalog

logger = logging.getLogger(__name__)

EPS = 1e-12


def tag_matrix(catalog: Catalog) -> sp.csr_matrix:
    """Binary item-by-tag membership matrix in catalog/vocab order.

    The vocabulary is built from tags in use, so no column is all-zero.
    """
    rows, cols = [], []
    for i, item in enumerate(catalog.ids):
        for tag in catalog.tags_of(item):
            rows.append(i)
            cols.append(catalog.tag_index[tag])
    data = np.ones(len(rows))
    return sp.csr_matrix(
        (data, (rows, cols)), shape=(len(catalog), len(catalog.vocab))
    )


@dataclass
class NMFResult:
    W: np.ndarray
    H: np.ndarray
    objective: list[float]
    iterations: int

    @property
    def vectors(self) -> np.ndarray:
        return self.W


def nmf_factorize(
    M, d: int, max_iters: int = 500, tol: float = 1e-6, seed: int = 0
) -> NMFResult:
    """Factorize M ≈ W·H (both non-negative), returning item factors W.

    Multiplicative updates on ||M - WH||_F^2, seeded uniform(0,1] init
    scaled by mean(M). Stops at max_iters or when the relative objective
    decrease falls below tol. The per-iteration objective sequence is
    non-increasing up to float round-off.
    """
    if sp.issparse(M):
        M = M.toarray()
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.size == 0:
        raise ValueError("tag matrix must be a non-empty 2-d array")
    if np.any(M < 0):
        raise ValueError("tag matrix must be non-negative")
    n, t = M.shape
    if not 1 <= d <= min(n, t):
        raise ValueError(f"d must lie in [1, {min(n, t)}], got {d}")

    rng = np.random.default_rng(seed)
    scale = M.mean()
    if scale <= 0:
        raise ValueError("tag matrix has no non-zero entries")
    # 1 - random() is uniform on (0, 1]; strictly positive init keeps the
    # multiplicative updates from locking entries at zero
    W = scale * (1.0 - rng.random((n, d)))
    H = scale * (1.0 - rng.random((d, t)))

    objective: list[float] = []
    prev = np.inf
    iterations = 0
    for iterations in range(1, max_iters + 1):
        H *= (W.T @ M) / (W.T @ W @ H + EPS)
        W *= (M @ H.T) / (W @ (H @ H.T) + EPS)
        f = float(np.linalg.norm(M - W @ H) ** 2)
        objective.append(f)
        if prev - f < tol * max(prev, EPS):
            break
        prev = f

    zero_rows = ~M.any(axis=1)
    W[zero_rows] = 0.0
    return NMFResult(W=W, H=H, objective=objective, iterations=iterations)


def save_vectors(path, ids, W) -> None:
    W = np.asarray(W, dtype=float)
    if len(ids) != W.shape[0]:
        raise ValueError(f"{len(ids)} ids for {W.shape[0]} vector rows")
    from .io import write_lines

    write_lines(path, (f"{i}\t{format_floats(row)}" for i, row in zip(ids, W)))


def load_vectors(path, expected_dim: int | None = None, catalog: Catalog | None = None):
    """Read an ``id<TAB>f1,...,fd`` vector file.

    Returns (ids, matrix). Rows must share one dimension; negative entries
    are allowed (external embeddings) but logged as non-NMF. With a catalog,
    rows are reordered to catalog order and must cover it exactly.
    """
    ids: list[str] = []
    rows: list[list[float]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected id<TAB>floats")
            values = parse_floats(parts[1])
            if rows and len(values) != len(rows[0]):
                raise ValueError(
                    f"line {lineno}: ragged row of length {len(values)}, "
                    f"expected {len(rows[0])}"
                )
            ids.append(parts[0])
            rows.append(values)
    if not rows:
        raise ValueError(f"no vectors in {path}")
    W = np.asarray(rows, dtype=float)
    if expected_dim is not None and W.shape[1] != expected_dim:
        raise ValueError(f"vectors have d={W.shape[1]}, expected {expected_dim}")
    if np.any(W < 0):
        logger.warning("vector file %s has negative entries (non-NMF source)", path)
    if catalog is not None:
        index = {i: k for k, i in enumerate(ids)}
        missing = [i for i in catalog.ids if i not in index]
        extra = [i for i in ids if i not in catalog]
        if missing or extra:
            raise ValueError(
                f"vector file does not match catalog (missing {missing[:3]}, "
                f"extra {extra[:3]})"
            )
        order = [index[i] for i in catalog.ids]
        return list(catalog.ids), W[order]
    return ids, W
