"""Densify sparse pair feedback with pseudo-items and label propagation.

Each explicitly rated pair becomes a pseudo-item (element-wise geometric
mean of the two item vectors). Its k nearest items, found through the LSH
index, generate unlabeled candidate pairs. All of one user's pseudo-items,
labeled and unlabeled, form one propagation problem over a clipped-cosine
affinity graph; iterating Y <- D^-1 W Y with labeled rows clamped spreads
the +1/-1 ratings to soft labels on the candidates.

The affinity matrix is only materialized on request. Pseudo-vectors are
non-negative, so clipping is a no-op and W = V~ V~^T minus its diagonal for
unit-normalized rows V~; the iteration runs as V~ (V~^T Y) - s * Y in
O(n d) per step, which keeps per-user problems with thousands of candidate
nodes cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lsh import ProjectionIndex, knn
from .model import EXPLICIT, PROPAGATED, FeedbackMatrix, PairFeedback
from .similarity import normalize_rows

LABEL_FLOOR = 0.05


@dataclass(frozen=True)
class PseudoItem:
    pair: tuple[str, str]
    vector: np.ndarray


def pseudo_vector(v_i, v_j) -> np.ndarray:
    v_i = np.asarray(v_i, dtype=float)
    v_j = np.asarray(v_j, dtype=float)
    if v_i.shape != v_j.shape:
        raise ValueError(f"dimension mismatch: {v_i.shape} vs {v_j.shape}")
    if np.any(v_i < 0) or np.any(v_j < 0):
        raise ValueError("geometric mean requires non-negative vectors")
    return np.sqrt(v_i * v_j)


def make_pseudo_item(v_i, v_j, pair: tuple[str, str] = ("", "")) -> PseudoItem:
    """Pseudo-item for a pair: element-wise geometric mean of the parents."""
    return PseudoItem(pair=pair, vector=pseudo_vector(v_i, v_j))


def canonical_pair(a: str, b: str, order: dict) -> tuple[str, str]:
    return (a, b) if order[a] <= order[b] else (b, a)


def candidate_pairs(
    labeled_pair: tuple[str, str],
    index: ProjectionIndex,
    k: int = 10,
    exclude=(),
) -> set[tuple[str, str]]:
    """Unordered item pairs from the pseudo-item's k-nearest neighborhood.

    Pairs already rated by the user go in ``exclude`` (any orientation) and
    are dropped. Short neighbor lists (LSH failures) yield fewer pairs.
    """
    if index.ids is None:
        raise ValueError("candidate_pairs needs an index built with ids")
    order = {item: i for i, item in enumerate(index.ids)}
    a, b = labeled_pair
    v = pseudo_vector(index.vectors[order[a]], index.vectors[order[b]])
    neighbors = [item for item, _ in knn(index, v, k)]
    excluded = {frozenset(p) for p in exclude}
    out = set()
    for x in range(len(neighbors)):
        for y in range(x + 1, len(neighbors)):
            if neighbors[x] == neighbors[y]:
                continue
            if frozenset((neighbors[x], neighbors[y])) in excluded:
                continue
            out.add(canonical_pair(neighbors[x], neighbors[y], order))
    return out


@dataclass
class PropagationProblem:
    """One user's label-propagation instance.

    Node order is labeled pseudo-items first, then unlabeled. ``W`` may be
    supplied explicitly (small instances, tests); otherwise the clipped
    cosine affinity is applied implicitly from the node vectors.
    """

    user: str
    labeled: list[tuple[PseudoItem, float]]
    unlabeled: list[PseudoItem]
    W: np.ndarray | None = None

    def __post_init__(self):
        if not self.labeled:
            raise ValueError("propagation needs at least one labeled node")
        for _, label in self.labeled:
            if abs(label) != 1.0:
                raise ValueError(f"labeled nodes carry hard labels, got {label!r}")
        if self.W is not None:
            n = self.size
            W = np.asarray(self.W, dtype=float)
            if W.shape != (n, n):
                raise ValueError(f"W must be {n}x{n}, got {W.shape}")
            if np.any(W < 0) or not np.allclose(W, W.T) or np.any(np.diag(W) != 0):
                raise ValueError("W must be symmetric, non-negative, zero-diagonal")
            self.W = W
        else:
            if np.any(self.node_vectors() < 0):
                raise ValueError(
                    "implicit affinity requires non-negative vectors; pass W"
                )

    @property
    def size(self) -> int:
        return len(self.labeled) + len(self.unlabeled)

    def node_vectors(self) -> np.ndarray:
        return np.asarray(
            [p.vector for p, _ in self.labeled] + [p.vector for p in self.unlabeled]
        )

    def affinity(self) -> np.ndarray:
        """The explicit affinity matrix: cosine clipped at 0, zero diagonal."""
        if self.W is not None:
            return self.W
        V = normalize_rows(self.node_vectors())
        W = np.clip(V @ V.T, 0.0, None)
        np.fill_diagonal(W, 0.0)
        return W

    def pairs(self) -> list[tuple[str, str]]:
        return [p.pair for p, _ in self.labeled] + [p.pair for p in self.unlabeled]


def _propagate_labels(
    problem: PropagationProblem, max_iters: int, tol: float
) -> np.ndarray:
    n = problem.size
    n_l = len(problem.labeled)
    y_l = np.array([label for _, label in problem.labeled])
    Y = np.zeros(n)
    Y[:n_l] = y_l

    if problem.W is not None:
        W = problem.W
        rowsum = W.sum(axis=1)

        def step(Y):
            return W @ Y
    else:
        V = normalize_rows(problem.node_vectors())
        s = np.einsum("ij,ij->i", V, V)  # 1 on real rows, 0 on zero rows
        colsum = V.sum(axis=0)
        rowsum = V @ colsum - s

        def step(Y):
            return V @ (V.T @ Y) - s * Y

    live = rowsum > 1e-12
    peak = np.max(np.abs(Y))
    for _ in range(max_iters):
        Y_new = np.zeros(n)
        np.divide(step(Y), rowsum, out=Y_new, where=live)
        Y_new = np.clip(Y_new, -1.0, 1.0)
        Y_new[:n_l] = y_l
        new_peak = np.max(np.abs(Y_new))
        if new_peak > peak + 1e-9:
            raise RuntimeError("label magnitude grew; affinity matrix is invalid")
        peak = new_peak
        delta = np.max(np.abs(Y_new - Y))
        Y = Y_new
        if delta < tol:
            break
    Y[~live] = 0.0
    Y[:n_l] = y_l
    return Y


def propagate(
    problem: PropagationProblem,
    max_iters: int = 100,
    tol: float = 1e-6,
    label_floor: float = LABEL_FLOOR,
) -> FeedbackMatrix:
    """Run label propagation and assemble the densified feedback matrix.

    Explicit entries pass through untouched; unlabeled pairs keep their
    propagated soft label when its magnitude reaches ``label_floor``.
    """
    Y = _propagate_labels(problem, max_iters, tol)
    out = FeedbackMatrix(problem.user)
    for (pseudo, label) in problem.labeled:
        out.add(PairFeedback(pseudo.pair[0], pseudo.pair[1], label, source=EXPLICIT))
    n_l = len(problem.labeled)
    for pseudo, label in zip(problem.unlabeled, Y[n_l:]):
        if abs(label) >= label_floor:
            out.add(
                PairFeedback(
                    pseudo.pair[0], pseudo.pair[1], float(label), source=PROPAGATED
                )
            )
    return out


def densify_user(
    feedback: FeedbackMatrix,
    vectors,
    index: ProjectionIndex,
    k: int = 10,
    max_iters: int = 100,
    tol: float = 1e-6,
    label_floor: float = LABEL_FLOOR,
) -> FeedbackMatrix:
    """Expand one user's explicit pair feedback into a densified matrix.

    ``vectors`` maps item id to its embedding. A user with no pair feedback
    gets an empty result (the item-level-only configuration).
    """
    explicit = [fb for fb in feedback if fb.source == EXPLICIT]
    if not explicit:
        return FeedbackMatrix(feedback.user)
    if index.ids is None:
        raise ValueError("densify_user needs an index built with ids")
    order = {item: i for i, item in enumerate(index.ids)}

    explicit_pairs = [(fb.rec, fb.other) for fb in explicit]
    candidates: set[tuple[str, str]] = set()
    for pair in explicit_pairs:
        candidates |= candidate_pairs(pair, index, k, exclude=explicit_pairs)

    labeled = [
        (make_pseudo_item(vectors[fb.rec], vectors[fb.other], pair=(fb.rec, fb.other)),
         fb.label)
        for fb in explicit
    ]
    unlabeled = [
        make_pseudo_item(vectors[a], vectors[b], pair=(a, b))
        for a, b in sorted(candidates, key=lambda p: (order[p[0]], order[p[1]]))
    ]
    problem = PropagationProblem(feedback.user, labeled, unlabeled)
    return propagate(problem, max_iters=max_iters, tol=tol, label_floor=label_floor)
