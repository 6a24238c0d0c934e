"""Cosine helpers shared by the index, densifier, optimizer, and walker.

Convention used throughout: the cosine of a zero vector with anything is 0.
Items without tags factorize to the zero vector, and a zero similarity keeps
them out of every similarity edge without special-casing callers.
"""

from __future__ import annotations

import numpy as np


def norms(X: np.ndarray) -> np.ndarray:
    return np.linalg.norm(X, axis=-1)


def normalize_rows(X: np.ndarray) -> np.ndarray:
    """Rows scaled to unit length; zero rows stay zero."""
    X = np.asarray(X, dtype=float)
    n = np.linalg.norm(X, axis=-1, keepdims=True)
    return np.divide(X, n, out=np.zeros_like(X), where=n > 0)


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def cosine_matrix(A: np.ndarray, B: np.ndarray | None = None) -> np.ndarray:
    """Pairwise cosines between rows of A and rows of B (default A)."""
    An = normalize_rows(A)
    Bn = An if B is None else normalize_rows(B)
    return An @ Bn.T


def cosine_to_rows(X: np.ndarray, q) -> np.ndarray:
    """Cosine of one query vector against every row of X."""
    q = np.asarray(q, dtype=float)
    nq = np.linalg.norm(q)
    if nq == 0.0:
        return np.zeros(X.shape[0])
    return normalize_rows(X) @ (q / nq)
