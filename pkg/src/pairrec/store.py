"""Event-sourced workspace: the on-disk state behind the service and CLI.

Layout under one root directory:

    catalog.tsv     item records, written once at ingest
    vectors.tsv     latest factorization snapshot (id + d floats)
    feedback.log    append-only like/dislike/pair events, replay order
    prefs.tsv       per-user learned-vector snapshots, last one wins

Every mutation appends to the log before touching memory, so reopening
the directory replays to exactly the state that was live before a crash.
Derived artifacts (densified matrices, graphs, walks) are recomputed,
never persisted.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from . import io
from .embed import load_vectors, save_vectors
from .model import (
    Catalog,
    FeedbackMatrix,
    IdTable,
    PairFeedback,
    ProfileStore,
    UnknownIdError,
    UserId,
)

CATALOG_FILE = "catalog.tsv"
VECTORS_FILE = "vectors.tsv"
FEEDBACK_LOG = "feedback.log"
PREFS_FILE = "prefs.tsv"


class Workspace:
    """One experiment's durable state, owned by a single writer."""

    def __init__(self, root, catalog: Catalog):
        self.root = Path(root)
        self.catalog = catalog
        self._users: list[UserId] = []
        self._items: dict[UserId, list[tuple[str, bool]]] = {}
        self._pairs: dict[UserId, FeedbackMatrix] = {}
        self._prefs: dict[UserId, tuple[np.ndarray, float]] = {}

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def create(cls, root, catalog: Catalog) -> "Workspace":
        root = Path(root)
        if (root / CATALOG_FILE).exists():
            raise FileExistsError(f"workspace already initialized: {root}")
        root.mkdir(parents=True, exist_ok=True)
        io.save_catalog(root / CATALOG_FILE, catalog)
        return cls(root, catalog)

    @classmethod
    def open(cls, root) -> "Workspace":
        root = Path(root)
        catalog_path = root / CATALOG_FILE
        if not catalog_path.exists():
            raise FileNotFoundError(f"no workspace at {root}")
        ws = cls(root, io.load_catalog(catalog_path))
        log = root / FEEDBACK_LOG
        if log.exists():
            for record in io.iter_records(log):
                ws._replay(record)
        prefs = root / PREFS_FILE
        if prefs.exists():
            for record in io.iter_records(prefs):
                user, raw_w, raw_obj = record.fields
                ws._prefs[user] = (
                    np.array(io.parse_floats(raw_w)),
                    float(raw_obj),
                )
        return ws

    def _replay(self, record: io.Record) -> None:
        if record.kind in ("like", "dislike"):
            user, item = record.fields
            self._apply_item(user, item, record.kind == "like")
        elif record.kind == "pair":
            user, feedback = io.decode_pair(record)
            self._apply_pair(user, feedback)
        else:
            raise ValueError(f"unexpected record in feedback log: {record.kind!r}")

    # -- mutations ---------------------------------------------------------

    def _require_item(self, item: str) -> None:
        if item not in self.catalog:
            raise UnknownIdError(f"unknown item: {item!r}")

    def _touch_user(self, user: UserId) -> None:
        if user not in self._items:
            self._users.append(user)
            self._items[user] = []
            self._pairs[user] = FeedbackMatrix(user)

    def _apply_item(self, user: UserId, item: str, liked: bool) -> None:
        self._require_item(item)
        self._touch_user(user)
        self._items[user].append((item, liked))

    def _apply_pair(self, user: UserId, feedback: PairFeedback) -> None:
        self._require_item(feedback.rec)
        self._require_item(feedback.other)
        self._touch_user(user)
        self._pairs[user].add(feedback)

    def record_item(self, user: UserId, item: str, liked: bool) -> None:
        """Validate, append to the log, then apply in memory."""
        self._require_item(item)
        encode = io.encode_like if liked else io.encode_dislike
        io.append_line(self.root / FEEDBACK_LOG, encode(user, item))
        self._apply_item(user, item, liked)

    def record_pair(self, user: UserId, feedback: PairFeedback) -> None:
        self._require_item(feedback.rec)
        self._require_item(feedback.other)
        self._touch_user(user)
        # probe first so a rejected rating never reaches the log
        self._pairs[user].add(feedback)
        io.append_line(self.root / FEEDBACK_LOG, io.encode_pair(user, feedback))

    def save_pref(self, user: UserId, w, objective: float) -> None:
        w = np.asarray(w, dtype=float)
        io.append_line(self.root / PREFS_FILE, io.encode_pref(user, w, objective))
        self._prefs[user] = (w, float(objective))

    def save_vectors(self, W) -> None:
        save_vectors(self.root / VECTORS_FILE, self.catalog.ids, W)

    # -- views -------------------------------------------------------------

    @property
    def users(self) -> tuple[UserId, ...]:
        return tuple(self._users)

    def load_vectors(self, expected_dim: int | None = None):
        path = self.root / VECTORS_FILE
        if not path.exists():
            raise FileNotFoundError(f"no vectors snapshot in {self.root}")
        _, W = load_vectors(path, expected_dim=expected_dim, catalog=self.catalog)
        return W

    def item_events(self, user: UserId) -> tuple[tuple[str, bool], ...]:
        return tuple(self._items.get(user, ()))

    def pair_feedback(self, user: UserId) -> FeedbackMatrix:
        if user not in self._pairs:
            raise UnknownIdError(f"unknown user: {user!r}")
        return self._pairs[user]

    def pref(self, user: UserId):
        return self._prefs.get(user)

    def profile_store(self) -> ProfileStore:
        """Replay item events into a fresh ProfileStore."""
        store = ProfileStore(IdTable(self._users, kind="user"), self.catalog)
        for user in self._users:
            for item, liked in self._items[user]:
                store.record_item_feedback(user, item, liked=liked)
        return store

    def state_signature(self):
        """Everything the log determines, in one comparable value."""
        return (
            tuple(self._users),
            {u: tuple(events) for u, events in self._items.items()},
            {
                u: tuple(sorted((fb.rec, fb.other, fb.label, fb.source) for fb in fm))
                for u, fm in self._pairs.items()
            },
            {
                u: (tuple(np.asarray(w).tolist()), obj)
                for u, (w, obj) in self._prefs.items()
            },
        )
