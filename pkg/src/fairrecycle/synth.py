"""Seeded synthetic dataset generators.

Each generator writes files in the corresponding public distribution
format so the regular loaders consume them unchanged. Interactions come
from a clustered taste model with a popularity skew, which gives the
matrix-factorization provider real structure to learn. Intended for
offline environments and CI; real dataset files are drop-in
replacements.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

_MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun",
           "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")


def _user_degrees(rng, n_users: int, n_interactions: int, min_degree: int) -> np.ndarray:
    """Heavily skewed per-user activity (many light users, a long tail of
    heavy ones) scaled to sum exactly to n_interactions."""
    prop = rng.lognormal(mean=0.0, sigma=0.85, size=n_users)
    deg = np.maximum(min_degree, np.round(prop * n_interactions / prop.sum()).astype(int))
    # settle rounding drift one unit at a time, never below the floor
    drift = int(deg.sum()) - n_interactions
    order = rng.permutation(n_users)
    idx = 0
    while drift != 0:
        u = order[idx % n_users]
        if drift > 0 and deg[u] > min_degree:
            deg[u] -= 1
            drift -= 1
        elif drift < 0:
            deg[u] += 1
            drift += 1
        idx += 1
    return deg


def _clustered_interactions(
    rng,
    n_users: int,
    n_items: int,
    n_interactions: int,
    n_clusters: int,
    noise: float,
    min_degree: int,
    appeal_sigma: float = 0.35,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample distinct (user, item) pairs from block-structured tastes.

    Items are partitioned into near-equal taste clusters; each user
    belongs to one cluster and consumes its items weighted by a mild
    lognormal per-item appeal, plus a small out-of-cluster noise share.
    Item interaction counts then spread moderately around the catalog
    mean, so a count threshold near that mean splits every neighborhood
    instead of carving off a popular core, and item-to-item
    recommendations keep whole clusters reachable instead of collapsing
    into hub items.
    """
    perm = rng.permutation(n_items)
    item_cluster = np.empty(n_items, dtype=int)
    for c, chunk in enumerate(np.array_split(perm, n_clusters)):
        item_cluster[chunk] = c
    cluster_items = [np.flatnonzero(item_cluster == c) for c in range(n_clusters)]
    appeal = rng.lognormal(0.0, appeal_sigma, size=n_items)

    degrees = _user_degrees(rng, n_users, n_interactions, min_degree)
    # users spread evenly over clusters so no cluster is starved
    user_cluster = np.repeat(np.arange(n_clusters), -(-n_users // n_clusters))[:n_users]
    rng.shuffle(user_cluster)

    users_out, items_out = [], []
    all_items = np.arange(n_items)
    for u in range(n_users):
        home = int(user_cluster[u])
        deg = min(int(degrees[u]), n_items)
        n_noise = min(rng.binomial(deg, noise), n_items - len(cluster_items[home]))
        n_main = deg - n_noise
        # heavy users spill over into further clusters instead of
        # shrinking, so the interaction total stays exact
        picks_parts = []
        taken = 0
        for hop in range(n_clusters):
            block = cluster_items[(home + hop) % n_clusters]
            take = min(n_main - taken, len(block))
            if take <= 0:
                break
            w = appeal[block] / appeal[block].sum()
            picks_parts.append(rng.choice(block, size=take, replace=False, p=w))
            taken += take
        picks = np.concatenate(picks_parts)
        if n_noise:
            outside = np.setdiff1d(all_items, picks, assume_unique=False)
            picks = np.concatenate([picks, rng.choice(outside, size=n_noise, replace=False)])
        users_out.extend([u + 1] * len(picks))
        items_out.extend((picks + 1).tolist())
    return np.asarray(users_out), np.asarray(items_out)


def generate_movielens_like(
    out_dir: str | Path,
    n_users: int = 943,
    n_items: int = 1682,
    n_interactions: int = 100_000,
    n_clusters: int = 11,
    noise: float = 0.03,
    min_degree: int = 20,
    old_fraction: float = 0.4,
    seed: int = 0,
) -> Path:
    """Write ``u.data`` and ``u.item`` in MovieLens100k layout."""
    rng = np.random.default_rng([seed, 100])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    users, items = _clustered_interactions(
        rng, n_users, n_items, n_interactions, n_clusters,
        noise, min_degree,
    )
    ratings = rng.integers(1, 6, size=len(users))
    stamps = rng.integers(874_000_000, 893_000_000, size=len(users))
    with open(out / "u.data", "w", encoding="utf-8") as fh:
        for u, i, r, t in zip(users, items, ratings, stamps):
            fh.write(f"{u}\t{i}\t{r}\t{t}\n")

    genre_flags = rng.integers(0, 2, size=(n_items, 19))
    with open(out / "u.item", "w", encoding="latin-1") as fh:
        for i in range(1, n_items + 1):
            if rng.random() < old_fraction:
                year = int(rng.integers(1930, 1990))
            else:
                year = int(rng.integers(1990, 1999))
            month = _MONTHS[rng.integers(0, 12)]
            day = int(rng.integers(1, 29))
            title = f"Item {i} ({year})"
            date = f"{day:02d}-{month}-{year}"
            url = f"http://example.invalid/item/{i}"
            flags = "|".join(str(x) for x in genre_flags[i - 1])
            fh.write(f"{i}|{title}|{date}||{url}|{flags}\n")
    return out


def generate_adult_like(out_path: str | Path, n_rows: int = 3000, seed: int = 0) -> Path:
    """Write a comma-separated census-style file with the columns the
    loader consumes (plus fillers in the standard positions)."""
    rng = np.random.default_rng([seed, 200])
    path = Path(out_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for _ in range(n_rows):
            age = int(rng.integers(17, 90))
            edu_num = int(np.clip(rng.normal(10, 2.6), 1, 16))
            sex = "Female" if rng.random() < 0.33 else "Male"
            gain = 0 if rng.random() < 0.9 else int(rng.integers(1, 99_999))
            # income loosely tied to education and gain so labels are learnable
            p_high = 1.0 / (1.0 + np.exp(-(0.45 * (edu_num - 10) + (gain > 0) * 2.0 - 1.2)))
            income = ">50K" if rng.random() < p_high else "<=50K"
            edu_name = f"Grade{edu_num}"
            fh.write(
                f"{age}, Private, {int(rng.integers(10_000, 999_999))}, {edu_name}, "
                f"{edu_num}, Never-married, Other-service, Not-in-family, White, {sex}, "
                f"{gain}, 0, 40, United-States, {income}\n"
            )
    return path


def generate_lastfm_like(
    out_dir: str | Path,
    n_users: int = 600,
    n_items: int = 900,
    n_interactions: int = 40_000,
    seed: int = 0,
) -> Path:
    """Write ``user_artists.dat`` in hetrec layout (header + tab rows)."""
    rng = np.random.default_rng([seed, 300])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    users, items = _clustered_interactions(
        rng, n_users, n_items, n_interactions,
        n_clusters=8, noise=0.03, min_degree=15,
    )
    weights = rng.integers(1, 5000, size=len(users))
    with open(out / "user_artists.dat", "w", encoding="utf-8") as fh:
        fh.write("userID\tartistID\tweight\n")
        for u, i, w in zip(users, items, weights):
            fh.write(f"{u}\t{i}\t{w}\n")
    return out
