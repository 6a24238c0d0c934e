"""HTTP surface for interactive feedback sessions.

One session per user: a versioned slate of recommendations, each with its
top explanation items and the tag intersection that justifies the pairing.
Ratings are accepted only against the served version and hit the event log
before they touch memory, so a crashed process replays to the same state.
Relearning densifies the user's pair feedback, fits a preference vector,
and swaps in a reranked slate atomically.
"""

from dataclasses import dataclass

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .config import PipelineConfig
from .densify import densify_user
from .embed import nmf_factorize, tag_matrix
from .lsh import build_index
from .model import PairFeedback, UnknownIdError
from .prefopt import OptimizerConfig, learn_preference
from .recwalk import RecSlate, WalkConfig, Walker, build_graph
from .store import Workspace

SLATE_SIZE = 5
EXPLANATIONS = 5

SERVING = "serving"
RELEARNING = "relearning"


@dataclass
class Session:
    """Mutable per-user serving state; the slate snapshot is immutable."""

    user: str
    version: int
    slate: RecSlate
    state: str = SERVING
    pending_pairs: int = 0  # ratings taken since the last relearn
    relearns: int = 0


class ItemRating(BaseModel):
    version: int
    item: str
    liked: bool


class PairRating(BaseModel):
    version: int
    rec: str
    other: str
    label: float


class Engine:
    """Pipeline state behind the endpoints: vectors, graph, sessions."""

    def __init__(self, workspace: Workspace, config: PipelineConfig = PipelineConfig()):
        self.workspace = workspace
        self.config = config
        self.walk = WalkConfig(alpha=config.alpha, beta=config.beta)
        self.opt = OptimizerConfig(gamma=config.gamma, lr=config.lr)
        try:
            self.vectors = workspace.load_vectors(expected_dim=config.d)
        except FileNotFoundError:
            self.vectors = nmf_factorize(
                tag_matrix(workspace.catalog), d=config.d
            ).W
            workspace.save_vectors(self.vectors)
        ids = workspace.catalog.ids
        self.vector_map = {i: self.vectors[row] for row, i in enumerate(ids)}
        self.index = build_index(self.vectors, p=config.buckets, ids=ids)
        self.sessions: dict[str, Session] = {}
        self._walker: Walker | None = None

    def walker(self) -> Walker:
        if self._walker is None:
            graph = build_graph(
                self.workspace.profile_store(),
                self.vectors,
                self.config.threshold,
                self.index,
            )
            self._walker = Walker(graph, self.walk)
        return self._walker

    def invalidate(self) -> None:
        self._walker = None

    def _require_user(self, user: str) -> None:
        if user not in self.workspace.users:
            raise HTTPException(404, f"unknown user: {user}")

    def compute_slate(self, user: str) -> RecSlate:
        """Walk from the user, through S_u when a preference is on file."""
        walker = self.walker()
        pref = self.workspace.pref(user)
        if pref is None or not pref[0].any():
            return walker.full_slate(
                user, n=SLATE_SIZE, k_exp=EXPLANATIONS, k_rand=EXPLANATIONS
            )
        key = ("feedback", user)
        slate = walker.recommend_with_feedback(user, pref[0], n=SLATE_SIZE, s_key=key)
        for item, _ in slate.recs:
            slate.explanations[item] = walker.explain(
                user, item, EXPLANATIONS, s_key=key
            )
            slate.rand[item] = walker.rand_items(user, item, EXPLANATIONS)
        return slate

    def session(self, user: str) -> Session:
        self._require_user(user)
        if user not in self.sessions:
            try:
                slate = self.compute_slate(user)
            except ValueError as err:  # no liked history, nothing to walk from
                raise HTTPException(404, str(err)) from err
            self.sessions[user] = Session(user=user, version=1, slate=slate)
        return self.sessions[user]

    def check_version(self, session: Session, version: int) -> None:
        if version != session.version:
            raise HTTPException(
                409, f"stale slate version {version}, serving {session.version}"
            )

    def relearn(self, user: str) -> dict:
        session = self.session(user)
        feedback = self.workspace.pair_feedback(user)
        if feedback.m == 0:
            return {"user": user, "version": session.version, "noop": True}
        session.state = RELEARNING
        try:
            dense = densify_user(
                feedback, self.vector_map, self.index, k=self.config.k
            )
            pref = learn_preference(dense, self.vector_map, self.opt)
            self.workspace.save_pref(user, pref.w, pref.objective)
            self.invalidate()  # new likes and a new S_u both need a fresh walk
            slate = self.compute_slate(user)
        finally:
            session.state = SERVING
        session.slate = slate
        session.version += 1
        session.pending_pairs = 0
        session.relearns += 1
        return {
            "user": user,
            "version": session.version,
            "noop": False,
            "objective": pref.objective,
            "densified": dense.m,
        }

    def metrics(self, user: str) -> dict:
        session = self.session(user)
        events = self.workspace.item_events(user)
        labels = [fb.label for fb in self.workspace.pair_feedback(user)]
        return {
            "user": user,
            "version": session.version,
            "state": session.state,
            "counts": {
                "item_like": sum(1 for _, liked in events if liked),
                "item_dislike": sum(1 for _, liked in events if not liked),
                "pair_like": sum(1 for l in labels if l > 0),
                "pair_dislike": sum(1 for l in labels if l < 0),
            },
            "pending_pairs": session.pending_pairs,
            "relearns": session.relearns,
        }


def slate_payload(engine: Engine, session: Session) -> dict:
    catalog = engine.workspace.catalog
    cards = []
    for item, score in session.slate.recs:
        rec_tags = set(catalog.tags_of(item))
        rows = [
            {
                "item": other,
                "shared": sorted(rec_tags & set(catalog.tags_of(other))),
                "score": weight,
            }
            for other, weight in session.slate.explanations.get(item, [])
        ]
        cards.append(
            {
                "item": item,
                "tags": list(catalog.tags_of(item)),
                "score": score,
                "explanations": rows,
            }
        )
    return {
        "user": session.user,
        "version": session.version,
        "state": session.state,
        "recs": cards,
    }


def create_app(
    workspace: Workspace, config: PipelineConfig = PipelineConfig()
) -> FastAPI:
    app = FastAPI(title="pairrec")
    engine = Engine(workspace, config)
    app.state.engine = engine

    @app.get("/users/{user}/slate")
    def get_slate(user: str) -> dict:
        return slate_payload(engine, engine.session(user))

    @app.post("/users/{user}/feedback/item")
    def post_item(user: str, rating: ItemRating) -> dict:
        session = engine.session(user)
        engine.check_version(session, rating.version)
        try:
            engine.workspace.record_item(user, rating.item, liked=rating.liked)
        except UnknownIdError as err:
            raise HTTPException(404, str(err)) from err
        engine.invalidate()  # the interaction graph grew a row entry
        return {"user": user, "version": session.version, "recorded": True}

    @app.post("/users/{user}/feedback/pair")
    def post_pair(user: str, rating: PairRating) -> dict:
        session = engine.session(user)
        engine.check_version(session, rating.version)
        if rating.label not in (-1.0, 1.0):
            raise HTTPException(422, f"label must be -1 or +1, got {rating.label}")
        try:
            engine.workspace.record_pair(
                user, PairFeedback(rating.rec, rating.other, rating.label)
            )
        except UnknownIdError as err:
            raise HTTPException(404, str(err)) from err
        except ValueError as err:
            raise HTTPException(422, str(err)) from err
        session.pending_pairs += 1
        return {"user": user, "version": session.version, "recorded": True}

    @app.post("/users/{user}/relearn")
    def post_relearn(user: str) -> dict:
        return engine.relearn(user)

    @app.get("/users/{user}/metrics")
    def get_metrics(user: str) -> dict:
        return engine.metrics(user)

    return app
