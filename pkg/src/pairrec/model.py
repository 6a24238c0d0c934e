"""Identifier tables, user profiles, and the sparse pair-feedback container.

Items and users live in disjoint namespaces, each backed by a dense 0-based
index so that vectors and matrices can be addressed positionally. Item-level
likes build the interaction history; item-level dislikes go to a ledger only
(a graph walker has no use for a missing edge, but the counts matter for
reporting). Pair-level feedback is a sparse signed matrix per user.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

ItemId = str
UserId = str

EXPLICIT = "explicit"
PROPAGATED = "propagated"

_FORBIDDEN_ID_CHARS = ("\t", "\n", "\r")


class DuplicateIdError(ValueError):
    """An identifier was registered twice."""


class UnknownIdError(ValueError):
    """An identifier is not registered in its table."""


def _check_id(raw: str, kind: str) -> str:
    if not isinstance(raw, str) or not raw:
        raise ValueError(f"{kind} must be a non-empty string, got {raw!r}")
    if any(c in raw for c in _FORBIDDEN_ID_CHARS):
        raise ValueError(f"{kind} {raw!r} contains tab or newline")
    return raw


class IdTable:
    """Bijection between opaque string ids and dense, contiguous 0-based indices."""

    def __init__(self, ids=(), kind: str = "id"):
        self.kind = kind
        self._ids: list[str] = []
        self._index: dict[str, int] = {}
        for raw in ids:
            self.add(raw)

    def add(self, raw: str) -> int:
        _check_id(raw, self.kind)
        if raw in self._index:
            raise DuplicateIdError(f"duplicate {self.kind}: {raw!r}")
        self._index[raw] = len(self._ids)
        self._ids.append(raw)
        return self._index[raw]

    def index_of(self, raw: str) -> int:
        try:
            return self._index[raw]
        except KeyError:
            raise UnknownIdError(f"unknown {self.kind}: {raw!r}") from None

    def id_of(self, index: int) -> str:
        return self._ids[index]

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(self._ids)

    def __contains__(self, raw) -> bool:
        return raw in self._index

    def __len__(self) -> int:
        return len(self._ids)


class Catalog:
    """Item table plus per-item tag sets and the tag vocabulary.

    Dense item indices follow registration order; the tag vocabulary is the
    sorted union of all tags, so two items sharing a tag share its index.
    """

    def __init__(self, items):
        items = list(items)
        if not items:
            raise ValueError("catalog requires at least one item")
        self.items = IdTable(kind="item")
        self._tags: list[tuple[str, ...]] = []
        vocab: set[str] = set()
        for item_id, tags in items:
            self.items.add(item_id)
            clean = []
            for t in tags:
                _check_id(t, "tag")
                if "," in t:
                    raise ValueError(f"tag {t!r} contains a comma")
                clean.append(t)
            self._tags.append(tuple(clean))
            vocab.update(clean)
        self.vocab: tuple[str, ...] = tuple(sorted(vocab))
        self.tag_index: dict[str, int] = {t: i for i, t in enumerate(self.vocab)}

    def index_of(self, item: ItemId) -> int:
        return self.items.index_of(item)

    def id_of(self, index: int) -> ItemId:
        return self.items.id_of(index)

    def tags_of(self, item: ItemId) -> tuple[str, ...]:
        return self._tags[self.items.index_of(item)]

    @property
    def ids(self) -> tuple[ItemId, ...]:
        return self.items.ids

    def __contains__(self, item) -> bool:
        return item in self.items

    def __len__(self) -> int:
        return len(self.items)


def register_catalog(items) -> Catalog:
    """Build a Catalog from (item_id, tag_list) pairs.

    Rejects an empty list and duplicate ids (the error names the offender).
    """
    return Catalog(items)


@dataclass
class UserProfile:
    """One user's liked-item history plus the dislike ledger.

    ``history`` is an ordered set: likes are idempotent. ``dislikes`` is an
    append-only event list; a dislike never removes a history item.
    """

    user: UserId
    history: list[ItemId] = field(default_factory=list)
    dislikes: list[ItemId] = field(default_factory=list)

    def __post_init__(self):
        self._seen = set(self.history)

    def like(self, item: ItemId) -> None:
        if item not in self._seen:
            self._seen.add(item)
            self.history.append(item)
            if item in self.dislikes:
                logger.warning(
                    "user %s likes %s which they previously disliked", self.user, item
                )

    def dislike(self, item: ItemId) -> None:
        self.dislikes.append(item)
        if item in self._seen:
            logger.warning(
                "user %s dislikes %s which is in their history; history kept",
                self.user,
                item,
            )

    def __contains__(self, item) -> bool:
        return item in self._seen


class ProfileStore:
    """Profiles for a fixed user table, validated against a catalog."""

    def __init__(self, users: IdTable, catalog: Catalog):
        self.users = users
        self.catalog = catalog
        self._profiles: dict[UserId, UserProfile] = {
            u: UserProfile(u) for u in users.ids
        }

    def record_item_feedback(self, user: UserId, item: ItemId, liked: bool) -> UserProfile:
        """Apply one like/dislike. Likes extend the history (idempotently);
        dislikes only grow the ledger."""
        if user not in self.users:
            raise UnknownIdError(f"unknown user: {user!r}")
        if item not in self.catalog:
            raise UnknownIdError(f"unknown item: {item!r}")
        profile = self._profiles[user]
        if liked:
            profile.like(item)
        else:
            profile.dislike(item)
        return profile

    def profile(self, user: UserId) -> UserProfile:
        if user not in self._profiles:
            raise UnknownIdError(f"unknown user: {user!r}")
        return self._profiles[user]

    def history(self, user: UserId) -> tuple[ItemId, ...]:
        return tuple(self.profile(user).history)

    def __iter__(self):
        return iter(self._profiles.values())


@dataclass(frozen=True)
class PairFeedback:
    """A signed rating on an ordered (recommendation, other-item) pair.

    Explicit ratings are exactly +1 or -1 (0 is encoded by absence);
    propagated ratings carry a soft label in [-1, 1].
    """

    rec: ItemId
    other: ItemId
    label: float
    source: str = EXPLICIT

    def __post_init__(self):
        if self.rec == self.other:
            raise ValueError(f"pair rates an item against itself: {self.rec!r}")
        if self.source not in (EXPLICIT, PROPAGATED):
            raise ValueError(f"unknown feedback source: {self.source!r}")
        if not math.isfinite(self.label) or not -1.0 <= self.label <= 1.0:
            raise ValueError(f"label must lie in [-1, 1], got {self.label!r}")
        if self.source == EXPLICIT and abs(self.label) != 1.0:
            raise ValueError(f"explicit labels must be +1 or -1, got {self.label!r}")


class FeedbackMatrix:
    """Sparse per-user map of ordered item pairs to signed labels.

    At most one entry per ordered pair; the reversed orientation of an
    existing pair is rejected (downstream consumers treat pairs
    symmetrically). Re-rating the same ordered pair overwrites, last wins.
    ``m`` counts entries with a non-zero label and is maintained
    incrementally.
    """

    def __init__(self, user: UserId):
        self.user = user
        self._entries: dict[tuple[ItemId, ItemId], PairFeedback] = {}
        self._m = 0

    def add(self, feedback: PairFeedback, overwrite: bool = True) -> None:
        key = (feedback.rec, feedback.other)
        reversed_key = (feedback.other, feedback.rec)
        if reversed_key in self._entries:
            raise ValueError(
                f"pair ({feedback.other!r}, {feedback.rec!r}) already rated; "
                "reversed duplicate rejected"
            )
        old = self._entries.get(key)
        if old is not None:
            if not overwrite:
                raise ValueError(f"pair {key!r} already rated")
            if old.label != 0.0:
                self._m -= 1
        self._entries[key] = feedback
        if feedback.label != 0.0:
            self._m += 1

    def get(self, rec: ItemId, other: ItemId):
        return self._entries.get((rec, other))

    @property
    def m(self) -> int:
        return self._m

    def __iter__(self):
        return iter(self._entries.values())

    def __len__(self) -> int:
        return len(self._entries)

    def __bool__(self) -> bool:
        return bool(self._entries)
