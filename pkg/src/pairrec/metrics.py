"""Ranking metrics over binary relevance."""

from __future__ import annotations

import math


def _check_k(k: int) -> None:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")


def precision_at_k(ranked, relevant, k: int) -> float:
    _check_k(k)
    if not ranked:
        return 0.0
    top = ranked[:k]
    return sum(1 for item in top if item in relevant) / k


def map_at_k(ranked, relevant, k: int) -> float:
    """Mean average precision, normalized by min(k, |relevant|)."""
    _check_k(k)
    if not ranked or not relevant:
        return 0.0
    hits = 0
    total = 0.0
    for rank, item in enumerate(ranked[:k], start=1):
        if item in relevant:
            hits += 1
            total += hits / rank
    return total / min(k, len(relevant))


def ndcg_at_k(ranked, relevant, k: int) -> float:
    """Binary-gain nDCG with 1/log2(rank + 1) discounts.

    The ideal ranking is an all-relevant prefix of length min(k, |relevant|).
    """
    _check_k(k)
    if not ranked or not relevant:
        return 0.0
    dcg = sum(
        1.0 / math.log2(rank + 1)
        for rank, item in enumerate(ranked[:k], start=1)
        if item in relevant
    )
    ideal = sum(
        1.0 / math.log2(rank + 1) for rank in range(1, min(k, len(relevant)) + 1)
    )
    return dcg / ideal
