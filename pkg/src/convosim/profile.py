"""Feature-weight user profiles.

A feature's weight is the mean normalised rating of the items carrying it.
Per-feature observation counts are kept so that folding in more items is an
exact incremental mean. Explicit preferences overwrite a weight with the
profile's current maximum (liked) or minimum (disliked) weight.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .dataset import ItemCatalog, normalize
from .errors import ValidationError


@dataclass
class UserProfile:
    weights: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    sums: dict[str, float] = field(default_factory=dict)
    rated_items: set[str] = field(default_factory=set)
    feature_universe: frozenset[str] | None = None
    min_w: float = 0.0
    avg_w: float = 0.0
    max_w: float = 0.0

    def __post_init__(self) -> None:
        for f, w in self.weights.items():
            self.counts.setdefault(f, 1)
            self.sums.setdefault(f, w * self.counts[f])
        self.refresh()

    @classmethod
    def from_weights(
        cls, weights: Mapping[str, float], feature_universe: Iterable[str] | None = None
    ) -> "UserProfile":
        """Profile with given weights, each counted as a single observation."""
        universe = frozenset(feature_universe) if feature_universe is not None else None
        return cls(weights=dict(weights), feature_universe=universe)

    def refresh(self) -> None:
        """Recompute min/avg/max from the weight map."""
        if not self.weights:
            self.min_w = self.avg_w = self.max_w = 0.0
            return
        values = list(self.weights.values())
        self.min_w = min(values)
        self.max_w = max(values)
        # statistics.mean is exact, so equal weights give avg == min == max
        self.avg_w = statistics.mean(values)

    def __len__(self) -> int:
        return len(self.weights)

    def weight(self, feature: str, default: float | None = None) -> float | None:
        return self.weights.get(feature, default)

    def dense(self, catalog: ItemCatalog, fill: float | None = None) -> np.ndarray:
        """Weights as a vector over ``catalog.feature_ids``; gaps take ``fill`` (avg_w)."""
        fill = self.avg_w if fill is None else fill
        vec = np.full(len(catalog.feature_ids), fill, dtype=np.float64)
        for f, w in self.weights.items():
            idx = catalog.feature_index.get(f)
            if idx is not None:
                vec[idx] = w
        return vec

    def copy(self) -> "UserProfile":
        return UserProfile(
            weights=dict(self.weights),
            counts=dict(self.counts),
            sums=dict(self.sums),
            rated_items=set(self.rated_items),
            feature_universe=self.feature_universe,
        )

    def to_dict(self) -> dict:
        return {
            "weights": {f: self.weights[f] for f in sorted(self.weights)},
            "min_w": self.min_w,
            "avg_w": self.avg_w,
            "max_w": self.max_w,
        }


@dataclass(frozen=True)
class FeaturePartition:
    neg_feat: list[tuple[str, float]]
    pos_feat: list[tuple[str, float]]


def build_user_profile(
    items: Mapping[str, float] | Iterable[tuple[str, float]],
    catalog: ItemCatalog,
    scale: tuple[float, float],
) -> UserProfile:
    """Build a profile from ``(item_id, raw rating)`` pairs."""
    pairs = list(items.items()) if isinstance(items, Mapping) else list(items)
    if not pairs:
        raise ValidationError("cannot build a profile from zero items")
    profile = UserProfile(feature_universe=catalog.feature_universe)
    relevance = {}
    for iid, value in pairs:
        if iid not in catalog:
            raise ValidationError(f"item {iid!r} is not in the catalog")
        relevance[iid] = normalize(value, scale)
    return update_profile_items(profile, relevance.keys(), relevance, catalog)


def classify_features(profile: UserProfile) -> FeaturePartition:
    """Split features at the average weight: below is negative, the rest positive.

    Negative features are sorted ascending by weight and positive ones
    descending. Equal weights are ordered by feature id.
    """
    avg = profile.avg_w
    neg = [(f, w) for f, w in profile.weights.items() if w < avg]
    pos = [(f, w) for f, w in profile.weights.items() if w >= avg]
    neg.sort(key=lambda fw: (fw[1], fw[0]))
    pos.sort(key=lambda fw: (-fw[1], fw[0]))
    return FeaturePartition(neg, pos)


def update_profile_items(
    profile: UserProfile,
    items: Iterable[str],
    ratings: Mapping[str, float],
    catalog: ItemCatalog,
) -> UserProfile:
    """Fold items into the feature means at the given normalised relevance.

    Mutates and returns ``profile``. Raises if any item was already consumed.
    """
    items = sorted(set(items))
    dup = [i for i in items if i in profile.rated_items]
    if dup:
        raise ValidationError(f"items already rated by this profile: {dup}")
    for iid in items:
        if iid not in catalog:
            raise ValidationError(f"item {iid!r} is not in the catalog")
        rel = float(ratings[iid])
        for f in catalog.features_of(iid):
            n = profile.counts.get(f, 0) + 1
            total = profile.sums.get(f, 0.0) + rel
            profile.counts[f] = n
            profile.sums[f] = total
            profile.weights[f] = total / n
        profile.rated_items.add(iid)
    if items:
        profile.refresh()
    return profile


def update_profile_features(
    profile: UserProfile, fp: str | None = None, fn: str | None = None
) -> UserProfile:
    """Anchor ``fp`` at the pre-call maximum weight and ``fn`` at the pre-call minimum."""
    if fp is None and fn is None:
        raise ValidationError("update_profile_features needs fp or fn")
    universe = profile.feature_universe
    for f in (fp, fn):
        if f is not None and universe is not None and f not in universe:
            raise ValidationError(f"feature {f!r} is not in the catalog")
    hi, lo = profile.max_w, profile.min_w
    if not profile.weights:
        hi, lo = 1.0, 0.0
    for f, value in ((fp, hi), (fn, lo)):
        if f is None:
            continue
        # the anchored value replaces the running mean but keeps its count
        n = max(profile.counts.get(f, 0), 1)
        profile.weights[f] = value
        profile.counts[f] = n
        profile.sums[f] = value * n
    profile.refresh()
    return profile
