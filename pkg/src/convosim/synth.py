"""Synthetic datasets with planted preferences, and MovieLens-100k conversion.

Each synthetic user likes a small random subset of features.  Users mostly
rate items carrying a liked feature (people watch what they like), and the
rating grows with the share of the item's features the user likes.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

ML100K_GENRES = (
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy", "Crime",
    "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror", "Musical", "Mystery",
    "Romance", "Sci-Fi", "Thriller", "War", "Western",
)


def generate_synthetic(
    n_users: int = 50,
    n_items: int = 200,
    n_features: int = 20,
    seed: int = 0,
    liked_features: int = 3,
    min_ratings: int = 15,
    max_ratings: int = 40,
    max_item_features: int = 4,
    focus: float = 0.8,
    noise: float = 0.5,
) -> tuple[list[tuple[str, str, int, int]], list[tuple[str, str, list[str]]]]:
    """Return ``(ratings, items)`` rows.

    ``focus`` is the probability that a rated item is drawn from the items
    carrying at least one liked feature.
    """
    if n_users < 2 or n_items < 1 or n_features < 1:
        raise ValueError("need >= 2 users, >= 1 item and >= 1 feature")
    rng = np.random.default_rng(seed)
    width = len(str(max(n_features - 1, 1)))
    features = [f"f{j:0{width}d}" for j in range(n_features)]
    iw = len(str(n_items))
    items = []
    item_feats = []
    for i in range(n_items):
        n_f = int(rng.integers(1, min(max_item_features, n_features) + 1))
        fs = sorted(rng.choice(n_features, size=n_f, replace=False).tolist())
        item_feats.append(set(fs))
        items.append((f"i{i:0{iw}d}", f"Item {i}", [features[j] for j in fs]))

    uw = len(str(n_users))
    ratings = []
    for u in range(n_users):
        liked = set(rng.choice(n_features, size=min(liked_features, n_features), replace=False).tolist())
        liked_items = [i for i in range(n_items) if item_feats[i] & liked]
        other_items = [i for i in range(n_items) if not item_feats[i] & liked]
        n_r = int(rng.integers(min_ratings, max_ratings + 1))
        n_r = min(n_r, n_items)
        chosen: list[int] = []
        seen: set[int] = set()
        while len(chosen) < n_r:
            pool = liked_items if (rng.random() < focus and liked_items) or not other_items else other_items
            i = int(pool[int(rng.integers(len(pool)))])
            if i not in seen:
                seen.add(i)
                chosen.append(i)
        stamps = np.sort(rng.choice(10 * n_r * 1000, size=n_r, replace=False)) + 1_000_000
        for i, ts in zip(chosen, stamps):
            share = len(item_feats[i] & liked) / len(item_feats[i])
            value = int(np.clip(np.rint(1 + 4 * share + rng.normal(0, noise)), 1, 5))
            ratings.append((f"u{u:0{uw}d}", items[i][0], value, int(ts)))
    return ratings, items


def ratings_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["user_id", "item_id", "rating", "timestamp"])
    w.writerows(rows)
    return buf.getvalue()


def items_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["item_id", "title", "features"])
    for iid, title, feats in rows:
        w.writerow([iid, title, "|".join(feats)])
    return buf.getvalue()


def write_dataset(out_dir: str | Path, ratings, items) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rp, ip = out / "ratings.csv", out / "items.csv"
    rp.write_text(ratings_csv(ratings), encoding="utf-8")
    ip.write_text(items_csv(items), encoding="utf-8")
    return rp, ip


# --------------------------------------------------------------------------
# MovieLens 100k
# --------------------------------------------------------------------------

def convert_movielens_100k(ml_dir: str | Path, out_dir: str | Path) -> tuple[Path, Path]:
    """Convert ``u.data`` / ``u.item`` into the ratings and items CSV formats.

    Equivalent shell one-liners are given in the README.
    """
    ml = Path(ml_dir)
    ratings = []
    with open(ml / "u.data", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                u, i, r, ts = line.split("\t")
                ratings.append((u, i, int(r), int(ts)))
    items = []
    with open(ml / "u.item", encoding="latin-1") as fh:
        for line in fh:
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("|")
            flags = parts[-len(ML100K_GENRES):]
            genres = [g for g, flag in zip(ML100K_GENRES, flags) if flag == "1"] or ["unknown"]
            items.append((parts[0], parts[1], genres))
    return write_dataset(out_dir, ratings, items)


def generate_movielens_like(
    out_dir: str | Path,
    seed: int = 0,
    n_users: int = 943,
    n_items: int = 1682,
    n_ratings: int = 100_000,
) -> Path:
    """Write ``u.data``/``u.item`` files with the MovieLens-100k layout and size.

    Every user has at least 20 ratings, as in the real dataset. Genre
    preferences are planted the same way as in :func:`generate_synthetic`.
    """
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_g = len(ML100K_GENRES) - 1  # "unknown" only for genre-less items
    item_genres = []
    for _ in range(n_items):
        k = int(rng.choice([1, 1, 2, 2, 3, 4]))
        item_genres.append(set((rng.choice(n_g, size=k, replace=False) + 1).tolist()))
    # heavy-tailed activity, each user >= 20
    extra = rng.pareto(1.5, size=n_users)
    counts = 20 + np.floor(extra / extra.sum() * (n_ratings - 20 * n_users)).astype(int)
    counts = np.minimum(counts, n_items // 2)
    deficit = n_ratings - int(counts.sum())
    while deficit > 0:
        u = int(rng.integers(n_users))
        if counts[u] < n_items // 2:
            counts[u] += 1
            deficit -= 1
    popularity = rng.zipf(1.3, size=n_items).astype(float)
    popularity = np.minimum(popularity, 500.0)

    lines = []
    for u in range(n_users):
        liked = set((rng.choice(n_g, size=3, replace=False) + 1).tolist())
        affinity = np.array([len(g & liked) / len(g) for g in item_genres])
        p = popularity * (0.2 + affinity)
        p /= p.sum()
        chosen = rng.choice(n_items, size=int(counts[u]), replace=False, p=p)
        stamps = np.sort(rng.integers(874_724_710, 893_286_638, size=len(chosen)))
        for i, ts in zip(chosen, stamps):
            value = int(np.clip(np.rint(1.5 + 3.5 * affinity[i] + rng.normal(0, 0.8)), 1, 5))
            lines.append(f"{u + 1}\t{i + 1}\t{value}\t{int(ts)}\n")
    (out / "u.data").write_text("".join(lines), encoding="utf-8")

    item_lines = []
    for i, g in enumerate(item_genres):
        flags = ["1" if j in g else "0" for j in range(len(ML100K_GENRES))]
        item_lines.append(f"{i + 1}|Movie {i + 1} (1995)|01-Jan-1995||http://example.invalid/{i + 1}|"
                          + "|".join(flags) + "\n")
    (out / "u.item").write_text("".join(item_lines), encoding="latin-1")
    return out
