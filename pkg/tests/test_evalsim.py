import numpy as np
import pytest

from pairrec.embed import nmf_factorize, tag_matrix
from pairrec.lsh import build_index
from pairrec.model import IdTable, ProfileStore, register_catalog
from pairrec.recwalk import WalkConfig, Walker, build_graph
from pairrec.simulate import (
    CONFIGURATIONS,
    ExperimentConfig,
    Phase2Log,
    SimulatedUser,
    generate_population,
    pair_matrix,
    phase1_histories,
    results_table,
    run_experiment,
    run_phase2,
    run_phase3,
    synthetic_catalog,
)


@pytest.fixture(scope="module")
def small_world():
    """A compact seeded pipeline shared by the slow-path tests."""
    items, truth = synthetic_catalog(150, seed=3)
    catalog = register_catalog(items)
    vectors = nmf_factorize(tag_matrix(catalog), d=20, seed=3).W
    index = build_index(vectors, p=3, seed=3, ids=catalog.ids)
    population = generate_population(vectors, truth, n_users=4, seed=3)
    histories = phase1_histories(population, vectors, catalog, n_likes=8, top_pool=20)
    users = IdTable([sim.user for sim in population], kind="user")
    store = ProfileStore(users, catalog)
    for user, liked in histories.items():
        for item in liked:
            store.record_item_feedback(user, item, liked=True)
    graph = build_graph(store, vectors, 0.7, index)
    walker = Walker(graph, WalkConfig())
    return catalog, vectors, index, population, histories, store, walker


def test_synthetic_catalog_shape_and_determinism():
    items, truth = synthetic_catalog(80, seed=5)
    again, truth2 = synthetic_catalog(80, seed=5)
    assert items == again and truth == truth2
    assert len(items) == len(truth) == 80
    for (item, tags), (kind, style, theme) in zip(items, truth):
        assert kind in ("broad", "niche")
        assert len(tags) == len(set(tags))
        if kind == "broad":
            assert theme is None
            assert all(tag.startswith(f"s{style:02d}") for tag in tags)
        else:
            assert theme is not None
            assert any(tag.startswith(f"h{theme:02d}") for tag in tags)


def test_simulated_user_utility_and_likes():
    w = np.zeros(4)
    w[1] = 2.0
    sim = SimulatedUser(user="u", w_star=w, tau_item=0.9, tau_pair=0.5)
    assert sim.utility(w) == pytest.approx(1.0)
    assert sim.utility(3.0 * w) == pytest.approx(1.0)
    assert sim.utility(np.zeros(4)) == 0.0
    assert sim.likes(w)
    assert not sim.likes(np.array([1.0, 0.0, 0.0, 0.0]))


def test_pair_verdict_keys_on_dominant_shared_coordinate():
    w = np.array([0.1, 0.9, 0.1, 0.1])
    sim = SimulatedUser(user="u", w_star=w, tau_item=0.5, tau_pair=0.5)
    strong = np.array([0.2, 1.0, 0.0, 0.0])
    also_strong = np.array([0.1, 0.8, 0.3, 0.0])
    weak_overlap = np.array([1.0, 0.0, 0.9, 0.0])
    weak_partner = np.array([0.9, 0.1, 1.0, 0.2])
    assert sim.pair_verdict(strong, also_strong) == 1.0
    assert sim.pair_verdict(weak_overlap, weak_partner) == -1.0


def test_generate_population_thresholds_are_quantiles():
    items, truth = synthetic_catalog(150, seed=3)
    catalog = register_catalog(items)
    vectors = nmf_factorize(tag_matrix(catalog), d=20, seed=3).W
    population = generate_population(
        vectors, truth, n_users=5, seed=3, relevant_quantile=0.9, pair_quantile=0.8
    )
    assert [sim.user for sim in population] == [f"u{i:02d}" for i in range(5)]
    unit = vectors / np.maximum(
        np.linalg.norm(vectors, axis=1, keepdims=True), 1e-12
    )
    for sim in population:
        utilities = unit @ (sim.w_star / np.linalg.norm(sim.w_star))
        assert sim.tau_item == pytest.approx(float(np.quantile(utilities, 0.9)))
        assert sim.tau_pair == pytest.approx(float(np.quantile(sim.w_star, 0.8)))


def test_phase1_histories_come_from_top_pool(small_world):
    catalog, vectors, _, population, histories, _, _ = small_world
    unit = vectors / np.maximum(
        np.linalg.norm(vectors, axis=1, keepdims=True), 1e-12
    )
    for sim in population:
        liked = histories[sim.user]
        assert len(liked) == len(set(liked)) == 8
        utilities = unit @ (sim.w_star / np.linalg.norm(sim.w_star))
        pool = set(np.lexsort((np.arange(len(utilities)), -utilities))[:20])
        assert {catalog.index_of(item) for item in liked} <= pool


def test_phase2_verdict_counts_and_rand_from_history(small_world):
    _, _, _, population, histories, _, walker = small_world
    logs = run_phase2(population, walker, ExperimentConfig(n_recs=10))
    for sim in population:
        log = logs[sim.user]
        assert len(log.recs) <= 10
        assert set(log.item_verdicts) == set(log.recs)
        for rec in log.recs:
            assert len(log.exp_pairs[rec]) == 5
            assert len(log.rand_pairs[rec]) <= 5
            for other, label in log.exp_pairs[rec] + log.rand_pairs[rec]:
                assert label in (-1.0, 1.0)
            rand_partners = {other for other, _ in log.rand_pairs[rec]}
            assert rand_partners <= set(histories[sim.user])
        assert log.n_pair_verdicts <= 10 * 10


def test_phase2_is_deterministic(small_world):
    _, _, _, population, _, _, walker = small_world
    one = run_phase2(population, walker, ExperimentConfig(n_recs=8))
    two = run_phase2(population, walker, ExperimentConfig(n_recs=8))
    for user in one:
        assert one[user].recs == two[user].recs
        assert one[user].exp_pairs == two[user].exp_pairs
        assert one[user].rand_pairs == two[user].rand_pairs


def test_pair_matrix_slices_top_pairs(small_world):
    _, _, _, population, _, _, walker = small_world
    logs = run_phase2(population, walker, ExperimentConfig(n_recs=6))
    log = logs[population[0].user]
    for top in (1, 3, 5):
        fm = pair_matrix(log, "exp", top)
        assert fm.m == sum(min(top, len(log.exp_pairs[r])) for r in log.recs)


def test_experiment_config_rejects_unknown_name():
    with pytest.raises(ValueError):
        ExperimentConfig(configuration="PairwiseMagic")


def test_phase3_requires_pair_logs(small_world):
    _, vectors, index, population, _, store, _ = small_world
    with pytest.raises(ValueError):
        run_phase3(population, store, vectors, index, {}, configurations=("PairExp5",))


def _silent_logs(logs):
    """Strip every verdict, keeping the slates: feedback-free phase 2."""
    return {
        user: Phase2Log(
            user=user,
            recs=list(log.recs),
            item_verdicts={},
            exp_pairs={rec: [] for rec in log.recs},
            rand_pairs={rec: [] for rec in log.recs},
        )
        for user, log in logs.items()
    }


def test_itemlevel_equals_pairexp5_without_pair_labels(small_world):
    _, vectors, index, population, _, store, walker = small_world
    logs = _silent_logs(run_phase2(population, walker, ExperimentConfig(n_recs=6)))
    outcomes = run_phase3(
        population, store, vectors, index, logs,
        configurations=("ItemLevel", "PairExp5"), n_recs=6,
    )
    assert outcomes["ItemLevel"].rankings == outcomes["PairExp5"].rankings


def test_phase3_without_feedback_reproduces_phase2(small_world):
    _, vectors, index, population, _, store, walker = small_world
    logs = run_phase2(population, walker, ExperimentConfig(n_recs=6))
    empty = {
        user: Phase2Log(user=user, recs=[], item_verdicts={},
                        exp_pairs={}, rand_pairs={})
        for user in logs
    }
    outcomes = run_phase3(
        population, store, vectors, index, empty,
        configurations=("ItemLevel", "PairExp5"), n_recs=6,
    )
    for user, log in logs.items():
        assert outcomes["ItemLevel"].rankings[user] == log.recs
        assert outcomes["PairExp5"].rankings[user] == log.recs


def test_phase3_outcomes_score_all_cutoffs(small_world):
    _, vectors, index, population, _, store, walker = small_world
    logs = run_phase2(population, walker, ExperimentConfig(n_recs=8))
    outcomes = run_phase3(
        population, store, vectors, index, logs,
        configurations=CONFIGURATIONS, n_recs=8,
    )
    assert set(outcomes) == set(CONFIGURATIONS)
    keys = {(m, k) for m in ("P", "MAP", "nDCG") for k in (3, 5, 10)}
    for outcome in outcomes.values():
        assert set(outcome.means) == keys
        assert all(0.0 <= v <= 1.0 for v in outcome.means.values())
        assert set(outcome.p_values) == keys
    assert all(p == 1.0 for p in outcomes["ItemLevel"].p_values.values())


def test_results_table_shape(small_world):
    _, vectors, index, population, _, store, walker = small_world
    logs = run_phase2(population, walker, ExperimentConfig(n_recs=8))
    outcomes = run_phase3(
        population, store, vectors, index, logs,
        configurations=CONFIGURATIONS, n_recs=8,
    )
    table = results_table(outcomes)
    lines = table.splitlines()
    assert len(lines) == 1 + 7
    assert lines[0].split("\t")[0] == "configuration"
    assert len(lines[0].split("\t")) == 1 + 9
    for line in lines[1:]:
        assert len(line.split("\t")) == 1 + 9
    csv = results_table(outcomes, sep=",")
    assert csv.splitlines()[0].count(",") == 9


def test_run_experiment_is_deterministic():
    one = run_experiment(seed=11, n_users=3, n_items=120, n_likes=6, n_recs=8)
    two = run_experiment(seed=11, n_users=3, n_items=120, n_likes=6, n_recs=8)
    assert one.outcomes.keys() == two.outcomes.keys()
    for name in one.outcomes:
        assert one.outcomes[name].rankings == two.outcomes[name].rankings
        assert one.outcomes[name].means == two.outcomes[name].means
