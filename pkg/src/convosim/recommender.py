"""Recommender contract plus the bundled baseline and random stub.

Any object implementing :class:`Recommender` can be plugged into the
simulator.  Only :meth:`Recommender.recommend` is abstract; feature
elicitation and explanations have default implementations built on it.
"""

from __future__ import annotations

import abc
import math
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .dataset import Item, ItemCatalog, RatingTable
from .errors import PoolExhausted
from .profile import UserProfile

DEFAULT_K = 5
DEFAULT_E = 4
DEFAULT_ELICITATION_POOL = 50


@dataclass(frozen=True)
class RecList:
    ranked: tuple[str, ...]
    k: int

    def __iter__(self):
        return iter(self.ranked)

    def __len__(self) -> int:
        return len(self.ranked)


@dataclass(frozen=True)
class Explanation:
    item_id: str
    supporting_features: tuple[tuple[str, float], ...]


def eligible_mask(profile: UserProfile, catalog: ItemCatalog, ignored: Iterable[str]) -> np.ndarray:
    mask = np.ones(len(catalog), dtype=bool)
    for iid in profile.rated_items:
        idx = catalog.item_index.get(iid)
        if idx is not None:
            mask[idx] = False
    for iid in ignored:
        idx = catalog.item_index.get(iid)
        if idx is not None:
            mask[idx] = False
    return mask


def binary_entropy(count: int, n: int) -> float:
    """Entropy in bits of a yes/no split with ``count`` of ``n`` on one side.

    Computed on the minority side so that H(c/n) and H((n-c)/n) are the same float.
    """
    c = min(count, n - count)
    if c <= 0:
        return 0.0
    p = c / n
    q = (n - c) / n
    return -p * math.log2(p) - q * math.log2(q)


def elicit_feature(
    candidates: Iterable[str], catalog: ItemCatalog, already_asked: Iterable[str] = ()
) -> str | None:
    """Feature whose presence best splits ``candidates`` (max binary entropy).

    Ties go to the smallest feature id. Returns ``None`` when no unasked
    feature splits the candidates.
    """
    rows = np.fromiter(
        sorted(catalog.item_index[c] for c in set(candidates)), dtype=np.int64
    )
    n = rows.shape[0]
    if n == 0:
        return None
    counts = _kernels.feature_counts(catalog.indptr, catalog.indices, rows, len(catalog.feature_ids))
    asked = set(already_asked)
    best, best_h = None, 0.0
    # feature_ids is sorted, so strict > keeps the lexicographically first on ties
    for idx, f in enumerate(catalog.feature_ids):
        c = int(counts[idx])
        if c == 0 or f in asked:
            continue
        h = binary_entropy(c, n)
        if h > best_h:
            best, best_h = f, h
    return best


def explain(profile: UserProfile, item: Item, e: int = DEFAULT_E) -> Explanation:
    """Top-``e`` profiled features of ``item``, by descending weight (ties by id)."""
    if e < 1:
        raise ValueError("e must be positive")
    feats = [(f, profile.weights[f]) for f in item.features if f in profile.weights]
    feats.sort(key=lambda fw: (-fw[1], fw[0]))
    return Explanation(item.item_id, tuple(feats[:e]))


def top_k(scores: np.ndarray, mask: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` best eligible scores, ties broken by lower index."""
    idx = np.flatnonzero(mask)
    if idx.shape[0] == 0:
        return idx
    order = np.lexsort((idx, -scores[idx]))
    return idx[order[:k]]


class Recommender(abc.ABC):
    """Contract the simulator drives.

    Implementations must never return an item from ``profile.rated_items``
    or ``ignored``, and must raise :class:`PoolExhausted` when nothing is
    eligible. They must be deterministic given their arguments.
    """

    name = "abstract"

    def fit(self, train: RatingTable, catalog: ItemCatalog) -> None:
        """Optional hook for global models trained on the training users."""

    @abc.abstractmethod
    def recommend(
        self, profile: UserProfile, catalog: ItemCatalog, ignored: Iterable[str], k: int
    ) -> RecList:
        ...

    def elicit(
        self,
        profile: UserProfile,
        catalog: ItemCatalog,
        ignored: Iterable[str],
        already_asked: Iterable[str],
        pool: int = DEFAULT_ELICITATION_POOL,
    ) -> str | None:
        try:
            candidates = self.recommend(profile, catalog, ignored, pool)
        except PoolExhausted:
            return None
        return elicit_feature(candidates.ranked, catalog, already_asked)

    def explain(self, profile: UserProfile, item: Item, e: int = DEFAULT_E) -> Explanation:
        return explain(profile, item, e)


class ContentBasedRecommender(Recommender):
    """Scores an item by the mean profile weight over its features.

    Features missing from the profile count at the profile's average weight.
    """

    name = "content"

    def scores(self, profile: UserProfile, catalog: ItemCatalog) -> np.ndarray:
        weights = profile.dense(catalog)
        return _kernels.item_scores(catalog.indptr, catalog.indices, weights)

    def recommend(self, profile, catalog, ignored, k):
        if k < 1:
            raise ValueError("k must be positive")
        mask = eligible_mask(profile, catalog, ignored)
        if not mask.any():
            raise PoolExhausted("no eligible items left")
        best = top_k(self.scores(profile, catalog), mask, k)
        return RecList(tuple(catalog.item_ids[i] for i in best), k)


class RandomRecommender(Recommender):
    """Uniformly random eligible items; a floor for comparisons and a contract test.

    The draw is seeded from ``seed`` and the current rated/ignored sets, so
    the stub is stateless and replays identically.
    """

    name = "random"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def _rng(self, profile: UserProfile, ignored: Sequence[str] | Iterable[str]) -> np.random.Generator:
        key = "\x1f".join(sorted(profile.rated_items)) + "\x1e" + "\x1f".join(sorted(ignored))
        return np.random.default_rng([self.seed, zlib.crc32(key.encode("utf-8"))])

    def recommend(self, profile, catalog, ignored, k):
        if k < 1:
            raise ValueError("k must be positive")
        ignored = list(ignored)
        mask = eligible_mask(profile, catalog, ignored)
        idx = np.flatnonzero(mask)
        if idx.shape[0] == 0:
            raise PoolExhausted("no eligible items left")
        picked = self._rng(profile, ignored).permutation(idx)[:k]
        return RecList(tuple(catalog.item_ids[i] for i in picked), k)


RECOMMENDERS = {
    "content": ContentBasedRecommender,
    "random": RandomRecommender,
}


def make_recommender(name: str, seed: int = 0) -> Recommender:
    if name == "random":
        return RandomRecommender(seed)
    if name in RECOMMENDERS:
        return RECOMMENDERS[name]()
    raise ValueError(f"unknown recommender {name!r}; choose from {sorted(RECOMMENDERS)}")
