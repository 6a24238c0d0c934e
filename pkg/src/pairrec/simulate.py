"""Simulated-user experiments over the full feedback loop.

A simulated user has a hidden taste direction w*. They like an item when
its vector points close enough to w*, and they judge a (rec, explanation)
pair by the pair's dominant shared coordinate: +1 when w* is strong there,
-1 otherwise. That makes pair verdicts carry coordinate-level information
about w* that item verdicts only expose in aggregate.

The harness replays the study protocol: build profiles from top-utility
items (phase 1), collect item and pair verdicts on a recommendation slate
with explanation and least-similar pairings (phase 2), then re-recommend
under each feedback configuration and score against the hidden ground
truth (phase 3).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .densify import densify_user
from .embed import nmf_factorize, tag_matrix
from .lsh import ProjectionIndex, build_index
from .metrics import map_at_k, ndcg_at_k, precision_at_k
from .model import (
    Catalog,
    FeedbackMatrix,
    IdTable,
    PairFeedback,
    ProfileStore,
    register_catalog,
)
from .prefopt import OptimizerConfig, learn_preference
from .recwalk import WalkConfig, Walker, build_graph, user_similarity_matrix
from .similarity import normalize_rows

logger = logging.getLogger(__name__)

CONFIGURATIONS = (
    "ItemLevel",
    "PairExp1",
    "PairExp3",
    "PairExp5",
    "PairRand5",
    "ItemPairExp5",
    "ItemPairRand5",
)

# (pair source, how many pairs per rec, item-level edges too?)
_CONFIG_RULES = {
    "ItemLevel": (None, 0, True),
    "PairExp1": ("exp", 1, False),
    "PairExp3": ("exp", 3, False),
    "PairExp5": ("exp", 5, False),
    "PairRand5": ("rand", 5, False),
    "ItemPairExp5": ("exp", 5, True),
    "ItemPairRand5": ("rand", 5, True),
}

METRICS = {"P": precision_at_k, "MAP": map_at_k, "nDCG": ndcg_at_k}


@dataclass(frozen=True)
class ExperimentConfig:
    configuration: str = "PairExp5"
    n_recs: int = 30
    k_exp: int = 5
    cutoffs: tuple[int, ...] = (3, 5, 10)

    def __post_init__(self):
        if self.configuration not in CONFIGURATIONS:
            raise ValueError(f"unknown configuration: {self.configuration!r}")


@dataclass(frozen=True)
class SimulatedUser:
    """Ground-truth rater: hidden direction w* plus decision thresholds."""

    user: str
    w_star: np.ndarray
    tau_item: float
    tau_pair: float
    seed: int = 0

    def utility(self, v) -> float:
        v = np.asarray(v, dtype=float)
        nv = np.linalg.norm(v)
        nw = np.linalg.norm(self.w_star)
        if nv == 0.0 or nw == 0.0:
            return 0.0
        return float(v @ self.w_star / (nv * nw))

    def likes(self, v) -> bool:
        return self.utility(v) > self.tau_item

    def pair_verdict(self, v_i, v_j) -> float:
        """+1 iff w* is strong on the pair's dominant shared coordinate."""
        shared = np.minimum(np.asarray(v_i, float), np.asarray(v_j, float))
        t_star = int(np.argmax(shared))
        return 1.0 if self.w_star[t_star] > self.tau_pair else -1.0


def synthetic_catalog(
    n_items: int = 600,
    n_styles: int = 10,
    n_themes: int = 10,
    tags_per_factor: int = 8,
    broad_fraction: float = 0.6,
    broad_tags: int = 6,
    niche_mix: tuple[int, int] = (5, 6),
    seed: int = 0,
):
    """Items tagged through a latent style x theme model.

    Mainstream items are defined by production style alone, so same-style
    pairs form near-duplicate cliques. Niche items pair a style with a
    theme; theme-sharing niche pairs land just below a 0.7 cosine, only
    crossing it after a taste-aligned translation. Returns (items, truth)
    where truth[i] = (kind, style, theme) in item order, theme None for
    mainstream items.
    """
    rng = np.random.default_rng(seed)
    style_tags = [
        [f"s{s:02d}t{t}" for t in range(tags_per_factor)] for s in range(n_styles)
    ]
    theme_tags = [
        [f"h{h:02d}t{t}" for t in range(tags_per_factor)] for h in range(n_themes)
    ]

    def draw(tags, n):
        return [tags[t] for t in sorted(rng.choice(len(tags), size=n, replace=False))]

    items = []
    truth = []
    for i in range(n_items):
        style = int(rng.integers(n_styles))
        if rng.random() < broad_fraction:
            own = draw(style_tags[style], broad_tags)
            truth.append(("broad", style, None))
        else:
            theme = int(rng.integers(n_themes))
            own = draw(style_tags[style], niche_mix[0])
            own += draw(theme_tags[theme], niche_mix[1])
            truth.append(("niche", style, theme))
        items.append((f"m{i:04d}", own))
    return items, truth


def generate_population(
    vectors,
    truth,
    n_users: int = 25,
    seed: int = 0,
    n_anchors: int = 3,
    relevant_quantile: float = 0.97,
    pair_quantile: float = 0.95,
) -> list[SimulatedUser]:
    """Users anchored on niche items of one theme: w* is the mean anchor.

    Anchoring on theme carriers puts the taste direction on a theme
    coordinate, which base similarity edges (style-driven) do not follow.
    Anchors are drawn from distinct styles so no single style dominates
    the taste. The raters know the construction; the recommender never
    sees it.
    """
    vectors = np.asarray(vectors, dtype=float)
    rng = np.random.default_rng(seed)
    unit = normalize_rows(vectors)
    themes = sorted({theme for _, _, theme in truth if theme is not None})
    by_theme = {
        theme: [
            i for i, (kind, _, h) in enumerate(truth) if kind == "niche" and h == theme
        ]
        for theme in themes
    }
    population = []
    for u in range(n_users):
        theme = themes[int(rng.integers(len(themes)))]
        pool = list(by_theme[theme])
        rng.shuffle(pool)
        anchors, seen = [], set()
        for i in pool:
            if truth[i][1] not in seen:
                anchors.append(i)
                seen.add(truth[i][1])
            if len(anchors) == n_anchors:
                break
        w_star = vectors[anchors].mean(axis=0)
        utilities = unit @ (w_star / np.linalg.norm(w_star))
        population.append(
            SimulatedUser(
                user=f"u{u:02d}",
                w_star=w_star,
                tau_item=float(np.quantile(utilities, relevant_quantile)),
                tau_pair=float(np.quantile(w_star, pair_quantile)),
                seed=int(rng.integers(0, 2**31)),
            )
        )
    return population


def phase1_histories(
    population, vectors, catalog: Catalog, n_likes: int = 15, top_pool: int = 45
) -> dict[str, list[str]]:
    """Seeded likes per user, sampled from their top-utility pool."""
    vectors = np.asarray(vectors, dtype=float)
    unit = normalize_rows(vectors)
    out = {}
    for sim in population:
        rng = np.random.default_rng(sim.seed)
        utilities = unit @ (sim.w_star / np.linalg.norm(sim.w_star))
        pool = np.lexsort((np.arange(len(utilities)), -utilities))[:top_pool]
        liked = rng.choice(pool, size=min(n_likes, len(pool)), replace=False)
        out[sim.user] = [catalog.id_of(int(i)) for i in sorted(liked)]
    return out


@dataclass
class Phase2Log:
    user: str
    recs: list[str]
    item_verdicts: dict[str, bool]
    exp_pairs: dict[str, list[tuple[str, float]]]
    rand_pairs: dict[str, list[tuple[str, float]]]

    @property
    def n_pair_verdicts(self) -> int:
        return sum(len(v) for v in self.exp_pairs.values()) + sum(
            len(v) for v in self.rand_pairs.values()
        )


def run_phase2(
    population, walker: Walker, config: ExperimentConfig = ExperimentConfig()
) -> dict[str, Phase2Log]:
    """Collect item and pair verdicts on each user's full slate."""
    G = walker.graph
    logs = {}
    for sim in population:
        slate = walker.full_slate(
            sim.user, n=config.n_recs, k_exp=config.k_exp, k_rand=config.k_exp
        )
        vec = lambda item: G.vectors[G.items.index_of(item)]
        recs = [item for item, _ in slate.recs]
        logs[sim.user] = Phase2Log(
            user=sim.user,
            recs=recs,
            item_verdicts={item: sim.likes(vec(item)) for item in recs},
            exp_pairs={
                item: [
                    (other, sim.pair_verdict(vec(item), vec(other)))
                    for other, _ in slate.explanations[item]
                ]
                for item in recs
            },
            rand_pairs={
                item: [
                    (other, sim.pair_verdict(vec(item), vec(other)))
                    for other, _ in slate.rand[item]
                ]
                for item in recs
            },
        )
    return logs


def pair_matrix(log: Phase2Log, source: str, top: int) -> FeedbackMatrix:
    """Explicit pair feedback from a phase-2 log, top pairs per rec."""
    pairs = log.exp_pairs if source == "exp" else log.rand_pairs
    fm = FeedbackMatrix(log.user)
    for rec in log.recs:
        for other, label in pairs[rec][:top]:
            fm.add(PairFeedback(rec, other, label))
    return fm


@dataclass
class ConfigOutcome:
    name: str
    rankings: dict[str, list[str]]
    per_user: dict[tuple[str, int], list[float]] = field(default_factory=dict)
    means: dict[tuple[str, int], float] = field(default_factory=dict)
    p_values: dict[tuple[str, int], float] = field(default_factory=dict)


def _score_outcome(outcome: ConfigOutcome, relevant, users, cutoffs) -> None:
    for metric, fn in METRICS.items():
        for k in cutoffs:
            values = [fn(outcome.rankings[u], relevant[u], k) for u in users]
            outcome.per_user[(metric, k)] = values
            outcome.means[(metric, k)] = float(np.mean(values))


def _wilcoxon(x, y) -> float:
    diffs = np.asarray(x) - np.asarray(y)
    if not np.any(diffs):
        return 1.0
    return float(stats.wilcoxon(x, y).pvalue)


def run_phase3(
    population,
    store: ProfileStore,
    vectors,
    index: ProjectionIndex,
    logs: dict[str, Phase2Log],
    configurations=CONFIGURATIONS,
    walk: WalkConfig = WalkConfig(),
    opt: OptimizerConfig = OptimizerConfig(),
    threshold: float = 0.7,
    densify_k: int = 10,
    n_recs: int = 30,
    cutoffs: tuple[int, ...] = (3, 5, 10),
) -> dict[str, ConfigOutcome]:
    """Re-recommend under each configuration and score against ground truth.

    Every configuration excludes each user's history and all phase-2 recs
    from both candidates and the relevant set, so results compare on the
    same footing.
    """
    vectors = np.asarray(vectors, dtype=float)
    catalog = store.catalog
    users = [sim.user for sim in population]
    sims = {sim.user: sim for sim in population}
    vector_map = {item: vectors[i] for i, item in enumerate(catalog.ids)}
    unit = normalize_rows(vectors)

    needed = {
        rule[:2]
        for name, rule in _CONFIG_RULES.items()
        if name in configurations and rule[0] is not None
    }
    for name in configurations:
        if name not in _CONFIG_RULES:
            raise ValueError(f"unknown configuration: {name!r}")
        if _CONFIG_RULES[name][0] is not None and not logs:
            raise ValueError(f"configuration {name} needs pair feedback logs")

    excluded = {
        u: set(store.history(u)) | set(logs[u].recs) if u in logs else set(store.history(u))
        for u in users
    }
    relevant = {}
    for u in users:
        sim = sims[u]
        utilities = unit @ (sim.w_star / np.linalg.norm(sim.w_star))
        relevant[u] = {
            catalog.id_of(i)
            for i in np.flatnonzero(utilities > sim.tau_item)
            if catalog.id_of(i) not in excluded[u]
        }

    # learned preference vectors, shared between plain and item+ variants
    weights: dict[tuple[str, str, int], np.ndarray] = {}
    for source, top in sorted(needed):
        for u in users:
            fm = pair_matrix(logs[u], source, top)
            if fm.m == 0:
                weights[(u, source, top)] = np.zeros(vectors.shape[1])
                continue
            dense = densify_user(fm, vector_map, index, k=densify_k)
            pref = learn_preference(dense, vector_map, opt)
            weights[(u, source, top)] = pref.w

    base_graph = build_graph(store, vectors, threshold, index)
    item_store = None
    item_graph = None
    if any(_CONFIG_RULES[name][2] for name in configurations):
        item_store = ProfileStore(store.users, catalog)
        for u in users:
            for item in store.history(u):
                item_store.record_item_feedback(u, item, liked=True)
            if u in logs:
                for item, liked in logs[u].item_verdicts.items():
                    item_store.record_item_feedback(u, item, liked=liked)
        item_graph = build_graph(item_store, vectors, threshold, index)

    walkers = {False: Walker(base_graph, walk)}
    if item_graph is not None:
        walkers[True] = Walker(item_graph, walk)

    outcomes: dict[str, ConfigOutcome] = {}
    for name in configurations:
        source, top, with_items = _CONFIG_RULES[name]
        walker = walkers[with_items]
        rankings = {}
        for u in users:
            if source is None:
                slate = walker.recommend(u, n_recs, exclude=excluded[u])
            else:
                w_u = weights[(u, source, top)]
                S_u = user_similarity_matrix(vectors, w_u, threshold, index)
                slate = walker.recommend(
                    u, n_recs, s_key=(name, u), S_override=S_u, exclude=excluded[u]
                )
            rankings[u] = [item for item, _ in slate.recs]
        outcome = ConfigOutcome(name=name, rankings=rankings)
        _score_outcome(outcome, relevant, users, cutoffs)
        outcomes[name] = outcome

    if "ItemLevel" in outcomes:
        baseline = outcomes["ItemLevel"]
        for name, outcome in outcomes.items():
            for key, values in outcome.per_user.items():
                outcome.p_values[key] = (
                    1.0
                    if name == "ItemLevel"
                    else _wilcoxon(values, baseline.per_user[key])
                )
    return outcomes


@dataclass
class ExperimentResult:
    seed: int
    outcomes: dict[str, ConfigOutcome]
    logs: dict[str, Phase2Log]
    n_items: int
    n_users: int


def run_experiment(
    seed: int = 0,
    n_users: int = 25,
    n_items: int = 600,
    d: int = 20,
    n_likes: int = 15,
    configurations=CONFIGURATIONS,
    walk: WalkConfig = WalkConfig(),
    opt: OptimizerConfig = OptimizerConfig(),
    threshold: float = 0.7,
    planes: int = 3,
    n_recs: int = 30,
    cutoffs: tuple[int, ...] = (3, 5, 10),
) -> ExperimentResult:
    """One seeded end-to-end run: catalog, vectors, phases 1 to 3."""
    items, truth = synthetic_catalog(n_items, seed=seed)
    catalog = register_catalog(items)
    vectors = nmf_factorize(tag_matrix(catalog), d=d, seed=seed).W
    index = build_index(vectors, p=planes, seed=seed, ids=catalog.ids)
    population = generate_population(vectors, truth, n_users=n_users, seed=seed)
    histories = phase1_histories(population, vectors, catalog, n_likes=n_likes)

    users = IdTable([sim.user for sim in population], kind="user")
    store = ProfileStore(users, catalog)
    for user, liked in histories.items():
        for item in liked:
            store.record_item_feedback(user, item, liked=True)

    graph = build_graph(store, vectors, threshold, index)
    walker = Walker(graph, walk)
    logs = run_phase2(population, walker, ExperimentConfig(n_recs=n_recs))
    outcomes = run_phase3(
        population,
        store,
        vectors,
        index,
        logs,
        configurations=configurations,
        walk=walk,
        opt=opt,
        threshold=threshold,
        n_recs=n_recs,
        cutoffs=cutoffs,
    )
    return ExperimentResult(
        seed=seed,
        outcomes=outcomes,
        logs=logs,
        n_items=n_items,
        n_users=n_users,
    )


def results_table(
    outcomes: dict[str, ConfigOutcome], cutoffs=(3, 5, 10), sep: str = "\t"
) -> str:
    """The metrics table as delimited text, one configuration per row."""
    header = ["configuration"] + [
        f"{metric}@{k}" for metric in METRICS for k in cutoffs
    ]
    lines = [sep.join(header)]
    for name, outcome in outcomes.items():
        cells = [name] + [
            f"{outcome.means[(metric, k)]:.4f}" for metric in METRICS for k in cutoffs
        ]
        lines.append(sep.join(cells))
    return "\n".join(lines)
