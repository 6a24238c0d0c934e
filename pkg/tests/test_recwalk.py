import numpy as np
import pytest
import scipy.sparse as sp

from pairrec.lsh import build_index
from pairrec.model import IdTable, ProfileStore, register_catalog
from pairrec.prefopt import OptimizerConfig, learn_preference
from pairrec.model import FeedbackMatrix, PairFeedback
from pairrec.recwalk import (
    RecSlate,
    WalkConfig,
    Walker,
    build_graph,
    load_graph,
    ppr,
    ppr_many,
    save_graph,
    similarity_edges,
    transition_matrix,
    user_similarity_matrix,
)


def dense_ppr(P, source, alpha):
    """Closed-form PPR by dense linear solve."""
    P = np.asarray(P.todense() if sp.issparse(P) else P, dtype=float)
    n = P.shape[0]
    e = np.zeros(n)
    e[source] = 1.0
    return np.linalg.solve((np.eye(n) - (1.0 - alpha) * P).T, alpha * e)


def make_store(histories, vectors_by_item):
    items = [(item, []) for item in vectors_by_item]
    catalog = register_catalog(items)
    users = IdTable(list(histories), kind="user")
    store = ProfileStore(users, catalog)
    for user, liked in histories.items():
        for item in liked:
            store.record_item_feedback(user, item, liked=True)
    vectors = np.asarray([vectors_by_item[i] for i in catalog.ids], dtype=float)
    return store, vectors


def toy_graph():
    # u likes a; b is tied to a by the only similarity edge; c is isolated
    store, vectors = make_store(
        {"u": ["a"]},
        {"a": [1.0, 0.0], "b": [0.8, 0.6], "c": [0.0, 1.0]},
    )
    return build_graph(store, vectors, threshold=0.7)


def test_walk_config_validation():
    with pytest.raises(ValueError):
        WalkConfig(alpha=0.0)
    with pytest.raises(ValueError):
        WalkConfig(alpha=1.0)
    with pytest.raises(ValueError):
        WalkConfig(beta=-0.1)
    assert WalkConfig(beta=1.0).beta == 1.0


def test_similarity_edges_threshold():
    V = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    S = similarity_edges(V, threshold=0.7)
    assert S[0, 1] == 0.0  # orthogonal
    assert S[0, 2] == pytest.approx(1.0)  # duplicate vectors
    assert S[2, 0] == pytest.approx(1.0)
    assert S.diagonal().sum() == 0.0


def test_graph_matrices():
    G = toy_graph()
    assert G.A.shape == (1, 3)
    assert G.A[0, G.items.index_of("a")] == 1.0
    assert G.A.nnz == 1
    assert G.S[G.items.index_of("a"), G.items.index_of("b")] == pytest.approx(0.8)
    assert G.S.nnz == 2


def test_transition_hand_computed_two_item_block():
    # single similarity edge of weight c: rowsums are (c, c), nu = c, so the
    # item block is the pure swap with empty diagonal
    store, vectors = make_store(
        {"u": ["a"]}, {"a": [1.0, 0.0], "b": [0.8, 0.6]}
    )
    G = build_graph(store, vectors, threshold=0.7)
    P = transition_matrix(G, beta=0.0)
    items0 = G.n_users
    block = P[items0:, items0:].toarray()
    assert np.allclose(block, [[0.0, 1.0], [1.0, 0.0]])


def test_transition_hand_computed_asymmetric_rowsums():
    G = toy_graph()  # edges: (a,b)=0.8 only; c has rowsum 0 -> self-loop 1
    P = transition_matrix(G, beta=0.0)
    i = {x: G.n_users + G.items.index_of(x) for x in "abc"}
    assert P[i["a"], i["b"]] == pytest.approx(1.0)
    assert P[i["b"], i["a"]] == pytest.approx(1.0)
    assert P[i["c"], i["c"]] == pytest.approx(1.0)


def test_transition_beta_one_is_pure_interaction():
    store, vectors = make_store(
        {"u": ["a"]}, {"a": [1.0, 0.0], "b": [0.0, 1.0]}
    )
    G = build_graph(store, vectors, threshold=0.7)
    assert G.S.nnz == 0
    P = transition_matrix(G, beta=1.0)
    # u <-> a alternate; b self-loops (no interactions, no similarity used)
    want = np.array(
        [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]
    )
    assert np.allclose(P.toarray(), want)


def test_transition_rows_stochastic_random_graphs():
    rng_master = np.random.default_rng(0)
    for seed in range(8):
        rng = np.random.default_rng(seed)
        n_users, n_items = int(rng.integers(2, 6)), int(rng.integers(3, 12))
        vectors_by_item = {
            f"i{k}": np.abs(rng.standard_normal(4)) for k in range(n_items)
        }
        histories = {
            f"u{k}": [
                f"i{j}"
                for j in range(n_items)
                if rng.random() < 0.4
            ]
            for k in range(n_users)
        }
        store, vectors = make_store(histories, vectors_by_item)
        G = build_graph(store, vectors, threshold=0.7)
        beta = float(rng_master.random())
        P = transition_matrix(G, beta=beta)
        rowsum = np.asarray(P.sum(axis=1)).ravel()
        assert np.max(np.abs(rowsum - 1.0)) <= 1e-12


def test_ppr_single_node():
    P = sp.identity(1, format="csr")
    assert np.allclose(ppr(P, 0, alpha=0.15), [1.0])


def test_ppr_matches_dense_solve_three_nodes():
    P = sp.csr_matrix(
        np.array([[0.0, 0.5, 0.5], [1.0, 0.0, 0.0], [0.2, 0.3, 0.5]])
    )
    got = ppr(P, 0, alpha=0.15, max_iters=500, tol=1e-14)
    want = dense_ppr(P, 0, alpha=0.15)
    assert np.max(np.abs(got - want)) <= 1e-8
    assert got.sum() == pytest.approx(1.0, abs=1e-9)


def test_ppr_alpha_one_is_pure_restart():
    P = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(ppr(P, 1, alpha=1.0), [0.0, 1.0])


def test_ppr_rejects_non_stochastic():
    bad = sp.csr_matrix(np.array([[0.5, 0.2], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="sum to 1"):
        ppr(bad, 0, alpha=0.15)


def test_ppr_oracle_on_random_graphs():
    # full-pipeline transition matrices, graphs up to 50 nodes
    for seed in range(5):
        rng = np.random.default_rng(seed + 30)
        n_users, n_items = int(rng.integers(3, 10)), int(rng.integers(10, 40))
        vectors_by_item = {
            f"i{k}": np.abs(rng.standard_normal(6)) for k in range(n_items)
        }
        histories = {
            f"u{k}": [f"i{j}" for j in range(n_items) if rng.random() < 0.3]
            for k in range(n_users)
        }
        store, vectors = make_store(histories, vectors_by_item)
        G = build_graph(store, vectors, threshold=0.7)
        P = transition_matrix(G, beta=0.1)
        for source in (0, n_users, n_users + n_items - 1):
            got = ppr(P, source, alpha=0.15, max_iters=2000, tol=1e-14)
            want = dense_ppr(P, source, alpha=0.15)
            assert np.max(np.abs(got - want)) <= 1e-8


def test_ppr_many_matches_single():
    G = toy_graph()
    P = transition_matrix(G, beta=0.1)
    many = ppr_many(P, [0, 1, 2], alpha=0.15, tol=1e-14)
    for row, source in zip(many, [0, 1, 2]):
        assert np.allclose(row, ppr(P, source, alpha=0.15, tol=1e-14))


def test_recommend_top1_matches_oracle():
    G = toy_graph()
    walker = Walker(G, WalkConfig(alpha=0.15, beta=0.1, tol=1e-14))
    slate = walker.recommend("u", n=2)
    P = transition_matrix(G, beta=0.1)
    pi = dense_ppr(P, G.user_node("u"), alpha=0.15)
    scores = pi[G.n_users :].copy()
    scores[G.history_indices("u")] = -np.inf
    best = int(np.argmax(scores))
    assert slate.recs[0][0] == G.items.id_of(best) == "b"
    assert slate.recs[0][1] > slate.recs[-1][1] or len(slate.recs) == 1


def test_recommend_excludes_history_and_orders():
    store, vectors = make_store(
        {"u": ["a", "b"]},
        {"a": [1.0, 0.0], "b": [0.9, 0.1], "c": [0.85, 0.2], "d": [0.0, 1.0]},
    )
    G = build_graph(store, vectors, threshold=0.7)
    walker = Walker(G)
    slate = walker.recommend("u", n=10)
    rec_items = [i for i, _ in slate.recs]
    assert "a" not in rec_items and "b" not in rec_items
    scores = [s for _, s in slate.recs]
    assert scores == sorted(scores, reverse=True)


def test_recommend_cold_user_errors():
    store, vectors = make_store(
        {"u": ["a"], "cold": []}, {"a": [1.0, 0.0], "b": [0.0, 1.0]}
    )
    G = build_graph(store, vectors, threshold=0.7)
    with pytest.raises(ValueError, match="empty history"):
        Walker(G).recommend("cold")


def test_recommend_everything_liked_gives_empty_slate():
    store, vectors = make_store(
        {"u": ["a", "b"]}, {"a": [1.0, 0.0], "b": [0.0, 1.0]}
    )
    G = build_graph(store, vectors, threshold=0.7)
    assert Walker(G).recommend("u", n=5).recs == []


def test_recommend_stays_in_reachable_component():
    store, vectors = make_store(
        {"u1": ["a"], "u2": ["b"]},
        {"a": [1.0, 0.0], "b": [0.0, 1.0], "c": [0.0, 0.9]},
    )
    G = build_graph(store, vectors, threshold=0.7)
    walker = Walker(G, WalkConfig(beta=1.0))
    slate = walker.recommend("u1", n=5)
    # with beta=1 the walk never leaves u1's component {u1, a}
    assert slate.recs == []


def test_explain_singleton_history():
    G = toy_graph()
    got = Walker(G).explain("u", "b", k=5)
    assert [i for i, _ in got] == ["a"]


def test_explain_disconnected_contribution_zero():
    store, vectors = make_store(
        {"u": ["a", "d"]},
        {"a": [1.0, 0.0], "b": [0.9, 0.3], "d": [0.0, 1.0]},
    )
    G = build_graph(store, vectors, threshold=0.7)
    got = Walker(G, WalkConfig(beta=0.0, tol=1e-14)).explain("u", "b", k=5)
    assert got[0][0] == "a"
    assert got[-1][0] == "d"
    assert got[-1][1] == 0.0


def test_explain_ordering_matches_oracle():
    store, vectors = make_store(
        {"u": ["a", "b", "c"]},
        {
            "a": [1.0, 0.0, 0.0],
            "b": [0.8, 0.6, 0.0],
            "c": [0.0, 0.2, 1.0],
            "r": [0.9, 0.43, 0.0],
            "z": [0.0, 1.0, 0.1],
        },
    )
    G = build_graph(store, vectors, threshold=0.7)
    cfg = WalkConfig(alpha=0.15, beta=0.1, tol=1e-14)
    got = Walker(G, cfg).explain("u", "r", k=3)
    P = transition_matrix(G, beta=0.1)
    rec_node = G.item_node("r")
    want = []
    for item in ["a", "b", "c"]:
        pi = dense_ppr(P, G.item_node(item), alpha=0.15)
        want.append((item, pi[rec_node]))
    want.sort(key=lambda t: (-t[1], G.items.index_of(t[0])))
    assert [i for i, _ in got] == [i for i, _ in want]
    for (_, g), (_, w) in zip(got, want):
        assert g == pytest.approx(w, abs=1e-8)


def test_rand_items_hand_case():
    store, vectors = make_store(
        {"u": ["a", "b", "c", "d"]},
        {
            "a": [1.0, 0.0],
            "b": [0.8, 0.6],
            "c": [0.0, 1.0],
            "d": [0.6, 0.8],
            "r": [1.0, 0.0],
        },
    )
    G = build_graph(store, vectors, threshold=2.0)  # no S edges needed
    got = Walker(G).rand_items("u", "r", k=4)
    # cosines to r=(1,0): a=1.0, b=0.8, c=0.0, d=0.6 -> ascending c, d, b, a
    assert [i for i, _ in got] == ["c", "d", "b", "a"]
    assert got[0][1] == pytest.approx(0.0)
    assert got[-1][0] == "a" and got[-1][1] == pytest.approx(1.0)


def test_rand_items_whole_history_when_k_matches():
    G = toy_graph()
    got = Walker(G).rand_items("u", "b", k=5)
    assert len(got) == 1


def test_user_similarity_zero_translation_is_identity():
    rng = np.random.default_rng(4)
    V = np.abs(rng.standard_normal((25, 6)))
    idx = build_index(V, p=3, seed=4, ids=[f"i{k}" for k in range(25)])
    S = similarity_edges(V, 0.7, idx)
    S_u = user_similarity_matrix(V, np.zeros(6), 0.7, idx)
    assert (S != S_u).nnz == 0


def test_user_similarity_translation_creates_edge():
    V = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert similarity_edges(V, 0.7).nnz == 0
    S_u = user_similarity_matrix(V, np.array([3.0, 3.0]), 0.7)
    assert S_u[0, 1] >= 0.7
    assert S_u[0, 1] == S_u[1, 0]
    assert S_u.diagonal().sum() == 0.0


def test_feedback_zero_w_slate_identical():
    G = toy_graph()
    walker = Walker(G, WalkConfig(tol=1e-14))
    base = walker.recommend("u", n=3)
    fed = walker.recommend_with_feedback("u", np.zeros(2), n=3)
    assert fed.recs == base.recs


def test_negative_feedback_removes_supported_rec():
    G = toy_graph()
    cfg = WalkConfig(alpha=0.15, beta=0.1, tol=1e-14)
    walker = Walker(G, cfg)
    before = walker.recommend("u", n=1)
    assert before.recs[0][0] == "b"

    fm = FeedbackMatrix("u")
    fm.add(PairFeedback("b", "a", -1.0))
    vectors = {i: G.vectors[G.items.index_of(i)] for i in G.items.ids}
    pref = learn_preference(
        fm, vectors, OptimizerConfig(gamma=0.1, lr=0.05, epochs=500, seed=0)
    )
    a, b = vectors["a"] + pref.w, vectors["b"] + pref.w
    cos = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
    assert cos < 0.7  # the lone supporting edge is gone after learning

    after = walker.recommend_with_feedback("u", pref.w, n=1)
    assert not after.recs or after.recs[0][0] != "b"

    # oracle check on the updated walk
    S_u = user_similarity_matrix(G.vectors, pref.w, 0.7)
    P_u = transition_matrix(G, beta=0.1, S_override=S_u)
    pi = dense_ppr(P_u, G.user_node("u"), alpha=0.15)
    assert pi.sum() == pytest.approx(1.0, abs=1e-9)
    scores = pi[G.n_users :].copy()
    scores[G.history_indices("u")] = -np.inf
    assert G.items.id_of(int(np.argmax(scores))) != "b" or np.max(scores) <= 0


def test_full_slate_shapes():
    store, vectors = make_store(
        {"u": ["a", "b"]},
        {
            "a": [1.0, 0.0],
            "b": [0.9, 0.2],
            "c": [0.85, 0.25],
            "d": [0.8, 0.3],
        },
    )
    G = build_graph(store, vectors, threshold=0.7)
    slate = Walker(G).full_slate("u", n=2, k_exp=2, k_rand=2)
    assert len(slate.recs) == 2
    for item, _ in slate.recs:
        exp_items = [i for i, _ in slate.explanations[item]]
        assert set(exp_items) <= {"a", "b"}
        assert len(slate.rand[item]) == 2


def test_walker_cache_reuses_score_vectors():
    G = toy_graph()
    walker = Walker(G)
    walker.recommend("u", n=1)
    key = ("base", G.user_node("u"))
    first = walker._scores[key]
    walker.recommend("u", n=1)
    assert walker._scores[key] is first


def test_graph_dump_roundtrip(tmp_path):
    store, vectors = make_store(
        {"u": ["a", "b"], "v": ["b"]},
        {"a": [1.0, 0.0], "b": [0.9, 0.2], "c": [0.0, 1.0]},
    )
    G = build_graph(store, vectors, threshold=0.7)
    path = tmp_path / "graph.tsv"
    save_graph(path, G)
    back = load_graph(path, G.users, G.items, vectors, threshold=0.7)
    assert (G.A != back.A).nnz == 0
    assert np.allclose(G.S.toarray(), back.S.toarray())
