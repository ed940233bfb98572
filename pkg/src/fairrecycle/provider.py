"""Stand-ins for the service's item-to-item recommender.

Two model families: pairwise-ranking matrix factorization trained on
implicit feedback (item similarity = inner product of item factors), and
nearest neighbors over standardized numeric features. Both expose the
same query surface: top-K lists with deterministic tie-breaking, and a
full score vector for the oracle baseline.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import CountingProvider, TrainingDivergedError
from .datasets import FeatureTable, InteractionSet

log = logging.getLogger(__name__)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ---------------------------------------------------------------------------
# pairwise-ranking matrix factorization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BprConfig:
    factors: int = 64
    learning_rate: float = 0.05
    regularization: float = 0.002
    epochs: int = 300
    batch_size: int = 4096
    init_scale: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.factors < 1:
            raise ValueError("factors must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


@dataclass
class MFModel:
    """Learned factors; row 0 of each matrix is an unused placeholder so
    ids index rows directly."""

    user_factors: np.ndarray
    item_factors: np.ndarray
    config: BprConfig
    epoch_losses: list[float] = field(default_factory=list)

    @property
    def n_users(self) -> int:
        return self.user_factors.shape[0] - 1

    @property
    def n_items(self) -> int:
        return self.item_factors.shape[0] - 1

    def scores(self, item: int) -> np.ndarray:
        """Inner products of ``item`` against all items; index j-1 holds item j."""
        return self.item_factors[1:] @ self.item_factors[item]


def train_bpr(train: InteractionSet, config: BprConfig) -> MFModel:
    """Fit factors by stochastic gradient steps on sampled
    (user, positive, negative) triples; one epoch samples as many triples
    as there are training interactions. Deterministic given the seed.
    """
    if len(train) == 0:
        raise ValueError("training set is empty")
    m, n, d = train.n_users, train.n_items, config.factors
    rng = np.random.default_rng(config.seed)
    P = rng.normal(0.0, config.init_scale, size=(m + 1, d))
    Q = rng.normal(0.0, config.init_scale, size=(n + 1, d))
    P[0] = 0.0
    Q[0] = 0.0

    # membership mask for negative sampling; dense is fine at desk scale
    if (m + 1) * (n + 1) <= 80_000_000:
        seen = np.zeros((m + 1, n + 1), dtype=bool)
        seen[train.users, train.items] = True

        def is_seen(u: np.ndarray, j: np.ndarray) -> np.ndarray:
            return seen[u, j]
    else:
        pairs = set(zip(train.users.tolist(), train.items.tolist()))

        def is_seen(u: np.ndarray, j: np.ndarray) -> np.ndarray:
            return np.fromiter(
                ((a, b) in pairs for a, b in zip(u.tolist(), j.tolist())),
                dtype=bool, count=len(u),
            )

    lr, reg = config.learning_rate, config.regularization
    n_train = len(train)
    losses: list[float] = []
    for epoch in range(config.epochs):
        sample = rng.integers(0, n_train, size=n_train)
        loss_sum = 0.0
        for lo in range(0, n_train, config.batch_size):
            idx = sample[lo:lo + config.batch_size]
            u = train.users[idx]
            i = train.items[idx]
            j = rng.integers(1, n + 1, size=len(idx))
            for _ in range(10):
                bad = is_seen(u, j)
                if not bad.any():
                    break
                j[bad] = rng.integers(1, n + 1, size=int(bad.sum()))
            ok = ~is_seen(u, j)
            u, i, j = u[ok], i[ok], j[ok]
            if len(u) == 0:
                continue

            pu, qi, qj = P[u], Q[i], Q[j]
            x = np.einsum("bd,bd->b", pu, qi - qj)
            g = _sigmoid(-x)
            np.add.at(P, u, lr * (g[:, None] * (qi - qj) - reg * pu))
            np.add.at(Q, i, lr * (g[:, None] * pu - reg * qi))
            np.add.at(Q, j, lr * (-g[:, None] * pu - reg * qj))
            loss_sum += float(np.logaddexp(0.0, -x).sum())

        epoch_loss = loss_sum / n_train
        losses.append(epoch_loss)
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(f"non-finite loss at epoch {epoch + 1}")
        if (epoch + 1) % 50 == 0:
            log.debug("epoch %d/%d loss %.4f", epoch + 1, config.epochs, epoch_loss)

    return MFModel(user_factors=P, item_factors=Q, config=config, epoch_losses=losses)


# ---------------------------------------------------------------------------
# nearest-neighbor provider over numeric features
# ---------------------------------------------------------------------------


@dataclass
class KnnProviderModel:
    """Standardized feature matrix; similarity = negated Euclidean distance."""

    features_std: np.ndarray  # (n + 1, d), row 0 unused
    mean: np.ndarray
    std: np.ndarray

    @property
    def n_items(self) -> int:
        return self.features_std.shape[0] - 1

    def scores(self, item: int) -> np.ndarray:
        diff = self.features_std[1:] - self.features_std[item]
        return -np.sqrt(np.einsum("nd,nd->n", diff, diff))


def fit_knn(features: FeatureTable) -> KnnProviderModel:
    """Standardize features to zero mean / unit variance; constant
    columns keep their raw value (std clamped to 1)."""
    x = features.features
    if not np.isfinite(x).all():
        raise ValueError("features contain non-finite values")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    n, d = x.shape
    z = np.zeros((n + 1, d))
    z[1:] = (x - mean) / std
    return KnnProviderModel(features_std=z, mean=mean, std=std)


# ---------------------------------------------------------------------------
# queries shared by both model families
# ---------------------------------------------------------------------------


def item_topk(model, item: int, k: int) -> tuple[int, ...]:
    """The k best-scoring items for ``item``, never including ``item``
    itself; ties broken by ascending item id."""
    n = model.n_items
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the catalog size {n}")
    if not 1 <= item <= n:
        raise ValueError(f"item out of catalog: {item}")
    scores = np.asarray(model.scores(item), dtype=np.float64).copy()
    scores[item - 1] = -np.inf
    order = np.argsort(-scores, kind="stable")[:k]
    return tuple(int(j) + 1 for j in order)


def full_scores(model, item: int) -> np.ndarray:
    """Raw score vector (length n) of every item against ``item``."""
    n = model.n_items
    if not 1 <= item <= n:
        raise ValueError(f"item out of catalog: {item}")
    return np.asarray(model.scores(item), dtype=np.float64)


def make_provider(model, k: int) -> CountingProvider:
    """Wrap a trained model behind the access-counting boundary.

    Rows are computed on demand and memoized inside the provider, so
    repeated queries are cheap without changing the access accounting.
    """
    memo: dict[int, tuple[int, ...]] = {}

    def topk_fn(item: int) -> tuple[int, ...]:
        hit = memo.get(item)
        if hit is None:
            hit = memo[item] = item_topk(model, item, k)
        return hit

    return CountingProvider(
        topk_fn=topk_fn,
        n_items=model.n_items,
        k=k,
        scores_fn=lambda item: full_scores(model, item),
    )


# ---------------------------------------------------------------------------
# model snapshots (text; floats round-trip exactly via repr-precision)
# ---------------------------------------------------------------------------


def _fmt_row(row: np.ndarray) -> str:
    return " ".join(f"{x:.17g}" for x in row)


def save_model(model, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        if isinstance(model, MFModel):
            c = model.config
            fh.write("kind bpr\n")
            fh.write(f"factors {c.factors}\n")
            fh.write(f"learning_rate {c.learning_rate:.17g}\n")
            fh.write(f"regularization {c.regularization:.17g}\n")
            fh.write(f"epochs {c.epochs}\n")
            fh.write(f"batch_size {c.batch_size}\n")
            fh.write(f"init_scale {c.init_scale:.17g}\n")
            fh.write(f"seed {c.seed}\n")
            fh.write(f"n_users {model.n_users}\n")
            fh.write(f"n_items {model.n_items}\n")
            fh.write("user_factors\n")
            for r in range(1, model.n_users + 1):
                fh.write(_fmt_row(model.user_factors[r]) + "\n")
            fh.write("item_factors\n")
            for r in range(1, model.n_items + 1):
                fh.write(_fmt_row(model.item_factors[r]) + "\n")
        elif isinstance(model, KnnProviderModel):
            fh.write("kind knn\n")
            fh.write(f"n_items {model.n_items}\n")
            fh.write(f"dim {model.features_std.shape[1]}\n")
            fh.write("mean " + _fmt_row(model.mean) + "\n")
            fh.write("std " + _fmt_row(model.std) + "\n")
            fh.write("features\n")
            for r in range(1, model.n_items + 1):
                fh.write(_fmt_row(model.features_std[r]) + "\n")
        else:
            raise TypeError(f"cannot snapshot model of type {type(model).__name__}")


def load_model(path: str | Path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty model snapshot")
    header: dict[str, str] = {}
    pos = 0
    while pos < len(lines) and lines[pos] not in ("user_factors", "features"):
        key, _, value = lines[pos].partition(" ")
        header[key] = value
        pos += 1

    kind = header.get("kind")
    if kind == "bpr":
        n_users = int(header["n_users"])
        n_items = int(header["n_items"])
        d = int(header["factors"])
        config = BprConfig(
            factors=d,
            learning_rate=float(header["learning_rate"]),
            regularization=float(header["regularization"]),
            epochs=int(header["epochs"]),
            batch_size=int(header["batch_size"]),
            init_scale=float(header["init_scale"]),
            seed=int(header["seed"]),
        )
        assert lines[pos] == "user_factors"
        pos += 1
        P = np.zeros((n_users + 1, d))
        for r in range(1, n_users + 1):
            P[r] = [float(x) for x in lines[pos].split()]
            pos += 1
        assert lines[pos] == "item_factors"
        pos += 1
        Q = np.zeros((n_items + 1, d))
        for r in range(1, n_items + 1):
            Q[r] = [float(x) for x in lines[pos].split()]
            pos += 1
        return MFModel(user_factors=P, item_factors=Q, config=config)
    if kind == "knn":
        n_items = int(header["n_items"])
        d = int(header["dim"])
        mean = np.asarray([float(x) for x in header["mean"].split()])
        std = np.asarray([float(x) for x in header["std"].split()])
        assert lines[pos] == "features"
        pos += 1
        z = np.zeros((n_items + 1, d))
        for r in range(1, n_items + 1):
            z[r] = [float(x) for x in lines[pos].split()]
            pos += 1
        return KnnProviderModel(features_std=z, mean=mean, std=std)
    raise ValueError(f"{path}: unknown model kind {kind!r}")
