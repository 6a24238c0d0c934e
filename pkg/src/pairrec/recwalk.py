"""Random-walk recommendation over a heterogeneous user-item graph.

The graph has one node per user and per item. Interaction edges connect a
user to every item in their history; similarity edges connect item pairs
whose vector cosine clears a threshold. A walk step follows interaction
edges with probability beta and similarity edges otherwise, where the
similarity block is made row-stochastic by max-row-sum normalization plus
a diagonal completion, and users are similar only to themselves.

Personalized PageRank with restart probability alpha scores all nodes from
a seed node. Recommendations read the item scores from a walk seeded at
the user; explanation scores for a recommendation are walks seeded at each
history item, read off at the recommendation.

Learned preference vectors come back into the walk by translating every
item vector by w_u and rebuilding a per-user similarity block S_u over the
same LSH buckets geometry; the interaction block is untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .lsh import ProjectionIndex, rebucket
from .model import IdTable, ProfileStore, UnknownIdError
from .similarity import cosine_matrix, cosine_to_rows
from . import io


@dataclass(frozen=True)
class WalkConfig:
    alpha: float = 0.15
    beta: float = 0.1
    max_iters: int = 500
    tol: float = 1e-10

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")


@dataclass
class RecSlate:
    user: str
    recs: list[tuple[str, float]]
    explanations: dict[str, list[tuple[str, float]]] = field(default_factory=dict)
    rand: dict[str, list[tuple[str, float]]] = field(default_factory=dict)


class InteractionGraph:
    """Immutable user-item graph: interactions A, similarity S, vectors."""

    def __init__(self, users: IdTable, items: IdTable, A, S, vectors, threshold: float,
                 index: ProjectionIndex | None = None):
        self.users = users
        self.items = items
        self.A = sp.csr_matrix(A, shape=(len(users), len(items)))
        self.S = sp.csr_matrix(S, shape=(len(items), len(items)))
        self.vectors = np.asarray(vectors, dtype=float)
        self.threshold = threshold
        self.index = index
        if self.vectors.shape[0] != len(items):
            raise ValueError("one vector row per item required")

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_nodes(self) -> int:
        return self.n_users + self.n_items

    def user_node(self, user: str) -> int:
        return self.users.index_of(user)

    def item_node(self, item: str) -> int:
        return self.n_users + self.items.index_of(item)

    def history_indices(self, user: str) -> np.ndarray:
        return self.A[self.users.index_of(user)].indices


def similarity_edges(vectors, threshold: float, index: ProjectionIndex | None = None):
    """Thresholded cosine similarity as a symmetric sparse matrix.

    With an index, candidates are generated per LSH bucket (cross-bucket
    pairs are missed by design); without one, all pairs are scanned.
    """
    vectors = np.asarray(vectors, dtype=float)
    n = vectors.shape[0]
    if index is None:
        groups = [np.arange(n)]
    else:
        groups = [index.buckets[key] for key in sorted(index.buckets)]
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for members in groups:
        if len(members) < 2:
            continue
        C = cosine_matrix(vectors[members])
        np.fill_diagonal(C, -np.inf)
        for a, b in zip(*np.nonzero(C >= threshold)):
            rows.append(int(members[a]))
            cols.append(int(members[b]))
            vals.append(float(C[a, b]))
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def build_graph(
    profiles: ProfileStore,
    vectors,
    threshold: float = 0.7,
    index: ProjectionIndex | None = None,
) -> InteractionGraph:
    """Assemble A from likes and S from thresholded vector cosines."""
    users = profiles.users
    items = profiles.catalog.items
    vectors = np.asarray(vectors, dtype=float)
    rows, cols = [], []
    for profile in profiles:
        u = users.index_of(profile.user)
        for item in profile.history:
            rows.append(u)
            cols.append(items.index_of(item))
    A = sp.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(len(users), len(items))
    )
    S = similarity_edges(vectors, threshold, index)
    return InteractionGraph(users, items, A, S, vectors, threshold, index)


def _row_normalized_with_self_loops(B: sp.spmatrix) -> sp.csr_matrix:
    B = sp.csr_matrix(B)
    rowsum = np.asarray(B.sum(axis=1)).ravel()
    zero = rowsum == 0
    inv = np.divide(1.0, rowsum, out=np.zeros_like(rowsum), where=~zero)
    return sp.diags(inv) @ B + sp.diags(zero.astype(float))


def transition_matrix(
    G: InteractionGraph, beta: float, S_override: sp.spmatrix | None = None
) -> sp.csr_matrix:
    """Row-stochastic walk matrix P = beta * H + (1 - beta) * M.

    H is the row-normalized bipartite interaction adjacency over all nodes
    (interaction-less rows self-loop). M is block-diagonal: identity on
    users; on items S' is scaled by its max row sum nu and completed on the
    diagonal, which keeps relative similarity magnitudes while making rows
    stochastic. An empty S' degenerates to the identity.
    """
    n_u, n_i = G.A.shape
    B = sp.bmat([[None, G.A], [G.A.T, None]], format="csr")
    H = _row_normalized_with_self_loops(B)

    S = G.S if S_override is None else sp.csr_matrix(S_override)
    if S.shape != (n_i, n_i):
        raise ValueError(f"S must be {n_i}x{n_i}, got {S.shape}")
    rowsum = np.asarray(S.sum(axis=1)).ravel()
    nu = rowsum.max() if S.nnz else 0.0
    if nu == 0.0:
        M_I = sp.identity(n_i, format="csr")
    else:
        M_I = S / nu + sp.diags(1.0 - rowsum / nu)
    M = sp.block_diag((sp.identity(n_u, format="csr"), M_I), format="csr")
    return (beta * H + (1.0 - beta) * M).tocsr()


def _check_stochastic(P: sp.spmatrix) -> sp.csr_matrix:
    P = sp.csr_matrix(P)
    rowsum = np.asarray(P.sum(axis=1)).ravel()
    if P.nnz and P.data.min() < 0:
        raise ValueError("walk matrix has negative entries")
    if np.max(np.abs(rowsum - 1.0)) > 1e-9:
        raise ValueError("walk matrix rows must sum to 1")
    return P


def ppr_many(
    P: sp.spmatrix,
    sources,
    alpha: float,
    max_iters: int = 500,
    tol: float = 1e-10,
) -> np.ndarray:
    """Personalized PageRank from several seed nodes at once.

    Power iteration on pi = alpha * e + (1 - alpha) * pi P, one column per
    source; returns an array of shape (len(sources), n_nodes).
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    P = _check_stochastic(P)
    n = P.shape[0]
    sources = np.asarray(list(sources), dtype=int)
    E = np.zeros((n, len(sources)))
    E[sources, np.arange(len(sources))] = 1.0
    PT = P.T.tocsr()
    Pi = E.copy()
    for _ in range(max_iters):
        nxt = alpha * E + (1.0 - alpha) * (PT @ Pi)
        delta = np.abs(nxt - Pi).sum(axis=0).max()
        Pi = nxt
        if delta < tol:
            break
    return Pi.T


def ppr(P, source: int, alpha: float, max_iters: int = 500, tol: float = 1e-10):
    """Score vector of one seed node (see ppr_many)."""
    return ppr_many(P, [source], alpha, max_iters, tol)[0]


def user_similarity_matrix(
    vectors, w_u, threshold: float = 0.7, index: ProjectionIndex | None = None
) -> sp.csr_matrix:
    """Similarity edges after translating every item vector by w_u.

    The threshold is reapplied, so feedback can both create and remove
    edges. Bucket geometry (the planes) is reused when an index is given.
    """
    w_u = np.asarray(w_u, dtype=float)
    if not np.all(np.isfinite(w_u)):
        raise ValueError("preference vector must be finite")
    translated = np.asarray(vectors, dtype=float) + w_u
    moved = rebucket(index, translated) if index is not None else None
    return similarity_edges(translated, threshold, moved)


class Walker:
    """PPR engine over one graph, caching score vectors per (S-version, seed).

    S_override variants (per-user similarity blocks) are keyed by a caller
    token so repeated walks in one round reuse their power iterations.
    """

    def __init__(self, graph: InteractionGraph, config: WalkConfig = WalkConfig()):
        self.graph = graph
        self.config = config
        self._transitions: dict[object, sp.csr_matrix] = {}
        self._scores: dict[tuple[object, int], np.ndarray] = {}

    def transition(self, s_key: object = "base", S_override=None) -> sp.csr_matrix:
        if s_key not in self._transitions:
            self._transitions[s_key] = transition_matrix(
                self.graph, self.config.beta, S_override
            )
        return self._transitions[s_key]

    def scores(self, sources, s_key: object = "base", S_override=None) -> np.ndarray:
        """PPR rows for the requested seed nodes, cache-backed."""
        P = self.transition(s_key, S_override)
        sources = list(sources)
        missing = [s for s in sources if (s_key, s) not in self._scores]
        if missing:
            fresh = ppr_many(
                P, missing, self.config.alpha, self.config.max_iters, self.config.tol
            )
            for s, row in zip(missing, fresh):
                self._scores[(s_key, s)] = row
        return np.asarray([self._scores[(s_key, s)] for s in sources])

    def recommend(
        self, user: str, n: int = 5, s_key: object = "base", S_override=None,
        exclude=(),
    ) -> RecSlate:
        """Top-n items by PPR from the user, never repeating the history.

        ``exclude`` drops further items (already-rated ones, for instance).
        """
        G = self.graph
        history = G.history_indices(user)
        if history.size == 0:
            raise ValueError(f"empty history for user {user!r}")
        pi = self.scores([G.user_node(user)], s_key, S_override)[0]
        item_scores = pi[G.n_users :].copy()
        item_scores[history] = -np.inf
        for item in exclude:
            item_scores[G.items.index_of(item)] = -np.inf
        order = np.lexsort((np.arange(G.n_items), -item_scores))[:n]
        recs = [
            (G.items.id_of(int(i)), float(item_scores[i]))
            for i in order
            if item_scores[i] > 0.0  # unreached items are not recommendations
        ]
        return RecSlate(user=user, recs=recs)

    def explain(
        self, user: str, rec: str, k: int = 5, s_key: object = "base", S_override=None
    ) -> list[tuple[str, float]]:
        """Top-k history items by their walk contribution to the rec."""
        G = self.graph
        history = G.history_indices(user)
        if rec not in G.items:
            raise UnknownIdError(f"unknown item: {rec!r}")
        if int(G.items.index_of(rec)) in set(history.tolist()):
            raise ValueError(f"{rec!r} is in the history of user {user!r}")
        sources = [G.n_users + int(i) for i in history]
        contrib = self.scores(sources, s_key, S_override)[:, G.item_node(rec)]
        order = np.lexsort((history, -contrib))[:k]
        return [
            (G.items.id_of(int(history[i])), float(contrib[i])) for i in order
        ]

    def rand_items(self, user: str, rec: str, k: int = 5) -> list[tuple[str, float]]:
        """The k history items least similar to the rec, ascending cosine."""
        G = self.graph
        history = G.history_indices(user)
        cos = cosine_to_rows(
            G.vectors[history], G.vectors[G.items.index_of(rec)]
        )
        order = np.lexsort((history, cos))[:k]
        return [(G.items.id_of(int(history[i])), float(cos[i])) for i in order]

    def recommend_with_feedback(
        self, user: str, w_u, n: int = 5, s_key: object = None
    ) -> RecSlate:
        """Recommend over the user's translated similarity block S_u."""
        key = s_key if s_key is not None else ("feedback", user)
        S_u = None
        if key not in self._transitions:
            S_u = user_similarity_matrix(
                self.graph.vectors, w_u, self.graph.threshold, self.graph.index
            )
        return self.recommend(user, n, s_key=key, S_override=S_u)

    def full_slate(
        self, user: str, n: int = 5, k_exp: int = 5, k_rand: int = 5,
        s_key: object = "base", S_override=None,
    ) -> RecSlate:
        """Recommendations with their explanation and least-similar lists."""
        slate = self.recommend(user, n, s_key, S_override)
        for item, _ in slate.recs:
            slate.explanations[item] = self.explain(user, item, k_exp, s_key, S_override)
            slate.rand[item] = self.rand_items(user, item, k_rand)
        return slate


def save_graph(path, G: InteractionGraph) -> None:
    """Dump interaction and similarity edges as TSV records."""
    lines = []
    for u in range(G.n_users):
        user = G.users.id_of(u)
        for i in G.A[u].indices:
            lines.append(io.encode_like(user, G.items.id_of(int(i))))
    upper = sp.triu(G.S, k=1).tocoo()
    for i, j, v in zip(upper.row, upper.col, upper.data):
        lines.append(io.encode_sim(G.items.id_of(int(i)), G.items.id_of(int(j)), v))
    io.write_lines(path, lines)


def load_graph(
    path, users: IdTable, items: IdTable, vectors, threshold: float = 0.7
) -> InteractionGraph:
    """Rebuild a graph from dumped edges (inverse of save_graph)."""
    a_rows, a_cols = [], []
    s_rows, s_cols, s_vals = [], [], []
    for record in io.iter_records(path):
        if record.kind == "like":
            user, item = record.fields
            a_rows.append(users.index_of(user))
            a_cols.append(items.index_of(item))
        elif record.kind == "sim":
            i, j, cos = record.fields
            a, b = items.index_of(i), items.index_of(j)
            s_rows += [a, b]
            s_cols += [b, a]
            s_vals += [float(cos), float(cos)]
        else:
            raise ValueError(f"unexpected record in graph file: {record.kind!r}")
    n_u, n_i = len(users), len(items)
    A = sp.csr_matrix((np.ones(len(a_rows)), (a_rows, a_cols)), shape=(n_u, n_i))
    S = sp.csr_matrix((s_vals, (s_rows, s_cols)), shape=(n_i, n_i))
    return InteractionGraph(users, items, A, S, vectors, threshold)
