"""Ratings and item-feature ingestion, plus the train/test and profile/look-ahead splits."""

from __future__ import annotations

import csv
import io
import logging
import math
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping

import numpy as np

from .errors import ParseError, ValidationError

log = logging.getLogger(__name__)

MIN_USER_RATINGS = 5


@dataclass(frozen=True)
class Rating:
    user_id: str
    item_id: str
    value: float
    timestamp: int | None = None


@dataclass
class RatingTable:
    ratings: list[Rating]
    scale: tuple[float, float]

    def __len__(self) -> int:
        return len(self.ratings)

    def user_ids(self) -> list[str]:
        return sorted({r.user_id for r in self.ratings})

    def by_user(self) -> dict[str, list[Rating]]:
        """Ratings grouped per user, in input order."""
        out: dict[str, list[Rating]] = defaultdict(list)
        for r in self.ratings:
            out[r.user_id].append(r)
        return dict(out)


@dataclass(frozen=True)
class Item:
    item_id: str
    title: str
    features: frozenset[str]


class ItemCatalog:
    """Items keyed by id, with a CSR item x feature incidence matrix.

    Items and features are indexed in lexicographic id order, so "lowest
    index" and "lexicographically smallest id" coincide everywhere.
    """

    def __init__(self, items: Iterable[Item]):
        self.items: dict[str, Item] = {}
        for item in items:
            if item.item_id in self.items:
                raise ValidationError(f"duplicate item_id {item.item_id!r}")
            if not item.features:
                raise ValidationError(f"item {item.item_id!r} has no features")
            self.items[item.item_id] = item
        self.feature_universe: frozenset[str] = frozenset().union(
            *(it.features for it in self.items.values())
        )
        self.item_ids: list[str] = sorted(self.items)
        self.feature_ids: list[str] = sorted(self.feature_universe)
        self.item_index = {iid: n for n, iid in enumerate(self.item_ids)}
        self.feature_index = {f: n for n, f in enumerate(self.feature_ids)}

        indptr = [0]
        indices: list[int] = []
        for iid in self.item_ids:
            indices.extend(sorted(self.feature_index[f] for f in self.items[iid].features))
            indptr.append(len(indices))
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, item_id: object) -> bool:
        return item_id in self.items

    def __getitem__(self, item_id: str) -> Item:
        return self.items[item_id]

    def features_of(self, item_id: str) -> frozenset[str]:
        return self.items[item_id].features


@dataclass
class SimulatedUser:
    user_id: str
    trainset_pos: set[str]
    trainset_neg: set[str]
    avg_rtg: float
    lookahead: dict[str, float]
    profile_ratings: dict[str, float] = field(default_factory=dict)

    @property
    def profile_items(self) -> set[str]:
        return self.trainset_pos | self.trainset_neg

    def positive_lookahead(self) -> list[str]:
        """Look-ahead items rated at or above the user's average, sorted by id."""
        return sorted(i for i, v in self.lookahead.items() if v >= self.avg_rtg)


def _text_stream(source: IO | str | bytes) -> IO[str]:
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, str):
        return io.StringIO(source)
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8")


def load_ratings(source: IO | str | bytes, scale: tuple[float, float]) -> RatingTable:
    """Parse ``user_id,item_id,rating[,timestamp]`` CSV.

    ``source`` may be a text/binary stream or the CSV content itself.
    """
    r_min, r_max = scale
    if not r_min < r_max:
        raise ValidationError(f"invalid rating scale {scale!r}")
    reader = csv.reader(_text_stream(source))
    header = next(reader, None)
    if header is None:
        raise ParseError("ratings file is empty (missing header)", line=1)
    header = [h.strip() for h in header]
    if header[:3] != ["user_id", "item_id", "rating"] or len(header) > 4 or (
        len(header) == 4 and header[3] != "timestamp"
    ):
        raise ParseError(f"unexpected ratings header {header!r}", line=1)

    ratings: list[Rating] = []
    seen: set[tuple[str, str]] = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) not in (3, 4):
            raise ParseError(f"expected 3 or 4 fields, got {len(row)}", line=lineno)
        user, item = row[0].strip(), row[1].strip()
        if not user or not item:
            raise ParseError("empty user_id or item_id", line=lineno)
        try:
            value = float(row[2])
            ts = int(row[3]) if len(row) == 4 and row[3].strip() else None
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        if not (r_min <= value <= r_max) or math.isnan(value):
            raise ValidationError(
                f"line {lineno}: rating {value} outside scale [{r_min}, {r_max}]"
            )
        if (user, item) in seen:
            raise ValidationError(f"line {lineno}: duplicate rating for ({user}, {item})")
        seen.add((user, item))
        ratings.append(Rating(user, item, value, ts))
    return RatingTable(ratings, (float(r_min), float(r_max)))


def load_items(source: IO | str | bytes) -> ItemCatalog:
    """Parse ``item_id,title,features`` CSV with ``|``-separated features."""
    reader = csv.reader(_text_stream(source))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["item_id", "title", "features"]:
        raise ParseError(f"unexpected items header {header!r}", line=1)
    items: list[Item] = []
    seen: set[str] = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", line=lineno)
        iid = row[0].strip()
        if not iid:
            raise ParseError("empty item_id", line=lineno)
        if iid in seen:
            raise ValidationError(f"line {lineno}: duplicate item_id {iid!r}")
        seen.add(iid)
        feats = frozenset(f.strip() for f in row[2].split("|") if f.strip())
        if not feats:
            raise ValidationError(f"line {lineno}: item {iid!r} has an empty feature list")
        items.append(Item(iid, row[1], feats))
    return ItemCatalog(items)


def split_users(
    ratings: RatingTable, train_fraction: float = 0.8, seed: int = 0
) -> tuple[list[str], list[str]]:
    """Seeded uniform split of users into (train, test) id lists, each sorted."""
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    users = ratings.user_ids()
    if len(users) < 2:
        raise ValidationError(f"need at least 2 users to split, got {len(users)}")
    n_train = math.floor(train_fraction * len(users) + 0.5)
    n_train = min(max(n_train, 1), len(users) - 1)
    order = np.random.default_rng(seed).permutation(len(users))
    train = sorted(users[i] for i in order[:n_train])
    test = sorted(users[i] for i in order[n_train:])
    return train, test


def split_user_history(
    user_ratings: list[Rating], profile_fraction: float = 0.8
) -> SimulatedUser | None:
    """Chronological profile/look-ahead split of one user's ratings.

    Returns ``None`` (and logs a warning) for users with fewer than
    ``MIN_USER_RATINGS`` ratings or whose split leaves an empty look-ahead.
    """
    if not 0.0 < profile_fraction < 1.0:
        raise ValidationError(f"profile_fraction must be in (0, 1), got {profile_fraction}")
    if not user_ratings:
        return None
    uid = user_ratings[0].user_id
    n = len(user_ratings)
    if n < MIN_USER_RATINGS:
        log.warning("skipping user %s: %d ratings (< %d)", uid, n, MIN_USER_RATINGS)
        return None
    # stable sort: missing timestamps keep input order
    if all(r.timestamp is not None for r in user_ratings):
        ordered = sorted(user_ratings, key=lambda r: (r.timestamp, r.item_id))
    else:
        ordered = list(user_ratings)
    n_profile = math.ceil(profile_fraction * n - 1e-9)  # guard 0.7*10 -> 7.000...01
    if n_profile >= n:
        log.warning("skipping user %s: empty look-ahead after split", uid)
        return None
    profile = ordered[:n_profile]
    values = [r.value for r in profile]
    avg = statistics.mean(values)
    pos = {r.item_id for r in profile if r.value >= avg}
    neg = {r.item_id for r in profile if r.value < avg}
    return SimulatedUser(
        user_id=uid,
        trainset_pos=pos,
        trainset_neg=neg,
        avg_rtg=avg,
        lookahead={r.item_id: r.value for r in ordered[n_profile:]},
        profile_ratings={r.item_id: r.value for r in profile},
    )


def build_test_users(
    ratings: RatingTable, test_user_ids: Iterable[str], profile_fraction: float = 0.8
) -> list[SimulatedUser]:
    grouped = ratings.by_user()
    users = []
    for uid in sorted(test_user_ids):
        su = split_user_history(grouped.get(uid, []), profile_fraction)
        if su is not None:
            users.append(su)
    return users


def normalize(value: float, scale: tuple[float, float]) -> float:
    r_min, r_max = scale
    return (value - r_min) / (r_max - r_min)


def restrict_to_catalog(ratings: RatingTable, catalog: Mapping | ItemCatalog) -> RatingTable:
    """Drop ratings of items the catalog does not know, with a warning."""
    kept = [r for r in ratings.ratings if r.item_id in catalog]
    dropped = len(ratings.ratings) - len(kept)
    if dropped:
        log.warning("dropped %d ratings of items missing from the catalog", dropped)
    return RatingTable(kept, ratings.scale)
