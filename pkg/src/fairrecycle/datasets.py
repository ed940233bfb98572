"""Dataset loading and preparation.

Loaders accept the standard public distribution formats:

* MovieLens100k style: ``u.data`` (tab-separated ``user item rating ts``)
  and ``u.item`` (pipe-separated item metadata with a release date).
* Adult census style: comma-separated records (``adult.data``).
* LastFM hetrec style: ``user_artists.dat`` (tab-separated with header).

All ids are re-indexed to dense ``1..m`` / ``1..n`` ranges; the raw ids
are kept so results can be mapped back.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import AttributeTable

log = logging.getLogger(__name__)

PROTECTED = "protected"
OTHER = "other"


class DataError(RuntimeError):
    """A dataset file is missing or malformed."""


# ---------------------------------------------------------------------------
# interaction sets
# ---------------------------------------------------------------------------


@dataclass
class InteractionSet:
    """Deduplicated (user, item, weight) triples over dense id ranges."""

    users: np.ndarray
    items: np.ndarray
    weights: np.ndarray
    n_users: int
    n_items: int
    raw_user_ids: tuple = ()
    raw_item_ids: tuple = ()
    _by_user: dict[int, np.ndarray] | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.users)

    def pairs(self) -> set[tuple[int, int]]:
        return set(zip(self.users.tolist(), self.items.tolist()))

    def item_counts(self) -> np.ndarray:
        """Interactions per item, indexed by item id (slot 0 unused)."""
        return np.bincount(self.items, minlength=self.n_items + 1)

    def user_counts(self) -> np.ndarray:
        return np.bincount(self.users, minlength=self.n_users + 1)

    def items_of_user(self, user: int) -> np.ndarray:
        if self._by_user is None:
            order = np.argsort(self.users, kind="stable")
            by_user: dict[int, np.ndarray] = {}
            bounds = np.searchsorted(self.users[order], np.arange(1, self.n_users + 2))
            for u in range(1, self.n_users + 1):
                by_user[u] = self.items[order[bounds[u - 1]:bounds[u]]]
            self._by_user = by_user
        return self._by_user[int(user)]


def _dense_index(raw: np.ndarray) -> tuple[np.ndarray, tuple]:
    """Map raw ids to 1..n in ascending raw-id order; returns (dense, raws)."""
    uniq, inverse = np.unique(raw, return_inverse=True)
    return inverse.astype(np.int64) + 1, tuple(uniq.tolist())


def _build_interactions(
    raw_users: list,
    raw_items: list,
    weights: list,
    catalog_raw_items: list | None = None,
) -> InteractionSet:
    seen: set[tuple] = set()
    ku, ki, kw = [], [], []
    for u, i, w in zip(raw_users, raw_items, weights):
        if (u, i) in seen:
            continue
        seen.add((u, i))
        ku.append(u)
        ki.append(i)
        kw.append(w)

    dense_users, raw_user_ids = _dense_index(np.asarray(ku))
    if catalog_raw_items is not None:
        raw_item_ids = tuple(sorted(set(catalog_raw_items)))
        index = {r: d + 1 for d, r in enumerate(raw_item_ids)}
        try:
            dense_items = np.asarray([index[r] for r in ki], dtype=np.int64)
        except KeyError as exc:
            raise DataError(f"interaction references item {exc.args[0]} absent from metadata")
    else:
        dense_items, raw_item_ids = _dense_index(np.asarray(ki))

    return InteractionSet(
        users=dense_users,
        items=dense_items,
        weights=np.asarray(kw, dtype=np.float64),
        n_users=len(raw_user_ids),
        n_items=len(raw_item_ids),
        raw_user_ids=raw_user_ids,
        raw_item_ids=raw_item_ids,
    )


# ---------------------------------------------------------------------------
# group rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GroupRule:
    """How the protected group is derived from item metadata.

    kind is one of ``year_threshold`` (released before ``year``),
    ``interaction_threshold`` (fewer than ``count`` interactions) or
    ``column_value`` (group equals a metadata column, e.g. sex).
    """

    kind: str
    year: int = 1990
    count: int = 50
    column: str = "sex"

    _KINDS = ("year_threshold", "interaction_threshold", "column_value")

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown group rule kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "GroupRule":
        """Parse CLI spellings: oldness, popularity, year:Y, count:C, column:NAME."""
        text = text.strip()
        if text == "oldness":
            return cls("year_threshold")
        if text == "popularity":
            return cls("interaction_threshold")
        if ":" in text:
            head, _, arg = text.partition(":")
            if head == "year":
                return cls("year_threshold", year=int(arg))
            if head == "count":
                return cls("interaction_threshold", count=int(arg))
            if head == "column":
                return cls("column_value", column=arg)
        raise ValueError(f"cannot parse group rule {text!r}")

    def short_name(self) -> str:
        if self.kind == "year_threshold":
            return f"year<{self.year}"
        if self.kind == "interaction_threshold":
            return f"count<{self.count}"
        return f"column:{self.column}"


def popularity_groups(inter: InteractionSet, threshold: int) -> AttributeTable:
    """Items with fewer than ``threshold`` interactions are protected.

    Counted on whatever interaction set is passed in; pass the training
    split to keep held-out data out of the attribute assignment.
    """
    counts = inter.item_counts()
    codes = np.where(counts[: inter.n_items + 1] < threshold, 0, 1).astype(np.int16)
    codes[0] = -1  # slot 0 is not an item
    labels = (PROTECTED, OTHER)
    return AttributeTable(labels=labels, codes=codes)


def year_groups(years: dict[int, int | None], n_items: int, threshold: int) -> AttributeTable:
    """Items released before ``threshold`` are protected; unknown years
    fall into the other group (logged)."""
    groups = {}
    unknown = 0
    for item in range(1, n_items + 1):
        y = years.get(item)
        if y is None:
            unknown += 1
            groups[item] = OTHER
        else:
            groups[item] = PROTECTED if y < threshold else OTHER
    if unknown:
        log.warning("%d items have no release year; assigned to %r", unknown, OTHER)
    return AttributeTable.from_mapping(groups, n_items)


# ---------------------------------------------------------------------------
# MovieLens-format loader
# ---------------------------------------------------------------------------


@dataclass
class MovieMeta:
    """Per-item metadata parsed from the pipe-separated file."""

    titles: dict[int, str]
    years: dict[int, int | None]


def _parse_item_file(path: Path) -> MovieMeta:
    titles: dict[int, str] = {}
    years: dict[int, int | None] = {}
    try:
        text = path.read_text(encoding="latin-1")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("|")
        if len(fields) < 3:
            raise DataError(f"{path}: line {lineno}: expected at least 3 pipe-separated fields")
        try:
            item = int(fields[0])
        except ValueError:
            raise DataError(f"{path}: line {lineno}: bad item id {fields[0]!r}")
        titles[item] = fields[1]
        date = fields[2].strip()
        if date:
            try:
                years[item] = int(date[-4:])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: bad release date {date!r}")
        else:
            years[item] = None
    if not titles:
        raise DataError(f"{path}: no items found")
    return MovieMeta(titles=titles, years=years)


def load_movielens(path: str | Path, rule: GroupRule) -> tuple[InteractionSet, AttributeTable]:
    """Load a MovieLens100k-layout directory and assign groups by ``rule``.

    The popularity rule is applied to the interactions loaded here; when
    a split is involved, recompute with :func:`popularity_groups` on the
    training portion instead.
    """
    root = Path(path)
    ratings_path = root / "u.data"
    item_path = root / "u.item"
    meta = _parse_item_file(item_path)

    raw_users, raw_items, weights = [], [], []
    try:
        text = ratings_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {ratings_path}: {exc}")
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise DataError(f"{ratings_path}: line {lineno}: expected 4 tab-separated fields")
        try:
            raw_users.append(int(fields[0]))
            raw_items.append(int(fields[1]))
            weights.append(float(fields[2]))
        except ValueError:
            raise DataError(f"{ratings_path}: line {lineno}: non-numeric record")
    if not raw_users:
        raise DataError(f"{ratings_path}: no interactions found")

    inter = _build_interactions(raw_users, raw_items, weights, catalog_raw_items=list(meta.titles))

    if rule.kind == "year_threshold":
        dense_years = {
            d + 1: meta.years[raw] for d, raw in enumerate(inter.raw_item_ids)
        }
        attrs = year_groups(dense_years, inter.n_items, rule.year)
    elif rule.kind == "interaction_threshold":
        attrs = popularity_groups(inter, rule.count)
    else:
        raise ValueError(f"group rule {rule.kind} not applicable to this dataset")
    return inter, attrs


def item_years(path: str | Path, inter: InteractionSet) -> dict[int, int | None]:
    """Release year per dense item id, for re-deriving year-based groups."""
    meta = _parse_item_file(Path(path) / "u.item")
    return {d + 1: meta.years[raw] for d, raw in enumerate(inter.raw_item_ids)}


# ---------------------------------------------------------------------------
# Adult-format loader
# ---------------------------------------------------------------------------


@dataclass
class FeatureTable:
    """Numeric person features (age, education years, capital gain)."""

    features: np.ndarray  # (n, 3)
    feature_names: tuple[str, ...] = ("age", "education_num", "capital_gain")

    @property
    def n_items(self) -> int:
        return self.features.shape[0]


@dataclass
class LabelTable:
    """Boolean outcome per item, indexed by item id (slot 0 unused)."""

    values: np.ndarray

    @property
    def n_items(self) -> int:
        return self.values.shape[0] - 1

    def label_of(self, item: int) -> bool:
        return bool(self.values[item])


# column offsets in the comma-separated record
_ADULT_AGE, _ADULT_EDU_NUM, _ADULT_SEX, _ADULT_GAIN, _ADULT_INCOME = 0, 4, 9, 10, 14


def load_adult(path: str | Path) -> tuple[FeatureTable, AttributeTable, LabelTable]:
    """Load an Adult-format file: features, sex groups, income labels.

    Unparseable records are skipped with a logged count.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")

    rows, sexes, labels = [], [], []
    skipped = 0
    for line in text.splitlines():
        line = line.strip().rstrip(".")
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) < _ADULT_INCOME + 1:
            skipped += 1
            continue
        try:
            age = float(fields[_ADULT_AGE])
            edu = float(fields[_ADULT_EDU_NUM])
            gain = float(fields[_ADULT_GAIN])
        except ValueError:
            skipped += 1
            continue
        sex = fields[_ADULT_SEX]
        income = fields[_ADULT_INCOME]
        if sex not in ("Female", "Male") or income not in (">50K", "<=50K"):
            skipped += 1
            continue
        rows.append((age, edu, gain))
        sexes.append(sex)
        labels.append(income == ">50K")
    if skipped:
        log.warning("%s: skipped %d unparseable records", path, skipped)
    if not rows:
        raise DataError(f"{path}: no usable records")

    n = len(rows)
    features = FeatureTable(features=np.asarray(rows, dtype=np.float64))
    attrs = AttributeTable.from_mapping({i + 1: sexes[i] for i in range(n)}, n)
    label_values = np.zeros(n + 1, dtype=bool)
    label_values[1:] = labels
    return features, attrs, LabelTable(values=label_values)


# ---------------------------------------------------------------------------
# LastFM-format loader
# ---------------------------------------------------------------------------


def load_lastfm(path: str | Path, rule: GroupRule) -> tuple[InteractionSet, AttributeTable]:
    """Load a hetrec-style ``user_artists.dat`` (tab-separated, header row)."""
    path = Path(path)
    if path.is_dir():
        path = path / "user_artists.dat"
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")
    raw_users, raw_items, weights = [], [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if lineno == 1 and not line.split("\t")[0].isdigit():
            continue  # header
        fields = line.split("\t")
        if len(fields) != 3:
            raise DataError(f"{path}: line {lineno}: expected 3 tab-separated fields")
        try:
            raw_users.append(int(fields[0]))
            raw_items.append(int(fields[1]))
            weights.append(float(fields[2]))
        except ValueError:
            raise DataError(f"{path}: line {lineno}: non-numeric record")
    if not raw_users:
        raise DataError(f"{path}: no interactions found")
    inter = _build_interactions(raw_users, raw_items, weights)
    if rule.kind != "interaction_threshold":
        raise ValueError("only the interaction-count rule applies to this dataset")
    return inter, popularity_groups(inter, rule.count)


def load_amazon(path: str | Path, rule: GroupRule):
    """Loader stub for the large review-corpus format (one JSON record per
    line with reviewerID/asin fields). Not exercised at desk scale."""
    raise NotImplementedError(
        "amazon-format loading is documented but intentionally not implemented; "
        "the corpus is too large for desk-scale runs"
    )


# ---------------------------------------------------------------------------
# k-core filtering
# ---------------------------------------------------------------------------


def extract_k_core(inter: InteractionSet, k: int) -> InteractionSet:
    """Iteratively drop users and items with fewer than k interactions
    until both minimum degrees are >= k. Ids are re-densified."""
    if k < 1:
        raise ValueError("k must be >= 1")
    users = inter.users.copy()
    items = inter.items.copy()
    weights = inter.weights.copy()
    raw_u = np.asarray(inter.raw_user_ids, dtype=object)
    raw_i = np.asarray(inter.raw_item_ids, dtype=object)

    while True:
        if len(users) == 0:
            raise DataError("k-core is empty")
        u_deg = np.bincount(users)
        i_deg = np.bincount(items)
        keep = (u_deg[users] >= k) & (i_deg[items] >= k)
        if keep.all():
            break
        users, items, weights = users[keep], items[keep], weights[keep]

    # re-densify ids, preserving raw identities
    uniq_u = np.unique(users)
    uniq_i = np.unique(items)
    u_map = np.zeros(users.max() + 1, dtype=np.int64)
    u_map[uniq_u] = np.arange(1, len(uniq_u) + 1)
    i_map = np.zeros(items.max() + 1, dtype=np.int64)
    i_map[uniq_i] = np.arange(1, len(uniq_i) + 1)
    return InteractionSet(
        users=u_map[users],
        items=i_map[items],
        weights=weights,
        n_users=len(uniq_u),
        n_items=len(uniq_i),
        raw_user_ids=tuple(raw_u[uniq_u - 1].tolist()) if len(raw_u) else (),
        raw_item_ids=tuple(raw_i[uniq_i - 1].tolist()) if len(raw_i) else (),
    )


# ---------------------------------------------------------------------------
# train/test split
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    """Per-user holdout: ``test_fraction`` of each user's interactions."""

    test_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")


def split_train_test(inter: InteractionSet, spec: SplitSpec) -> tuple[InteractionSet, InteractionSet]:
    """Seeded per-user split; every user keeps at least one training
    interaction. Train and test partition the input exactly."""
    is_test = np.zeros(len(inter), dtype=bool)
    order = np.argsort(inter.users, kind="stable")
    bounds = np.searchsorted(inter.users[order], np.arange(1, inter.n_users + 2))
    for u in range(1, inter.n_users + 1):
        rows = order[bounds[u - 1]:bounds[u]]
        deg = len(rows)
        if deg <= 1:
            continue
        n_test = min(int(spec.test_fraction * deg), deg - 1)
        if n_test == 0:
            continue
        rng = np.random.default_rng([spec.seed, u])
        picked = rng.permutation(deg)[:n_test]
        is_test[rows[picked]] = True

    def subset(mask: np.ndarray) -> InteractionSet:
        return replace(
            inter,
            users=inter.users[mask],
            items=inter.items[mask],
            weights=inter.weights[mask],
            _by_user=None,
        )

    return subset(~is_test), subset(is_test)


# ---------------------------------------------------------------------------
# normalized text snapshots
# ---------------------------------------------------------------------------


def write_snapshot(inter: InteractionSet, attrs: AttributeTable, out_dir: str | Path) -> None:
    """Write the space-separated text snapshot: interactions.txt holds
    ``user item weight`` lines, groups.txt holds ``item group`` lines."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = sorted(zip(inter.users.tolist(), inter.items.tolist(), inter.weights.tolist()))
    with open(out / "interactions.txt", "w", encoding="utf-8") as fh:
        for u, i, w in rows:
            fh.write(f"{u} {i} {w:g}\n")
    with open(out / "groups.txt", "w", encoding="utf-8") as fh:
        for item in range(1, attrs.n_items + 1):
            fh.write(f"{item} {attrs.group_of(item)}\n")


def read_snapshot(src_dir: str | Path) -> tuple[InteractionSet, AttributeTable]:
    src = Path(src_dir)
    groups: dict[int, str] = {}
    for lineno, line in enumerate((src / "groups.txt").read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 2:
            raise DataError(f"groups.txt: line {lineno}: expected 'item group'")
        groups[int(fields[0])] = fields[1]
    n_items = max(groups)
    attrs = AttributeTable.from_mapping(groups, n_items)

    users, items, weights = [], [], []
    for lineno, line in enumerate(
        (src / "interactions.txt").read_text(encoding="utf-8").splitlines(), 1
    ):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 3:
            raise DataError(f"interactions.txt: line {lineno}: expected 'user item weight'")
        users.append(int(fields[0]))
        items.append(int(fields[1]))
        weights.append(float(fields[2]))
    inter = InteractionSet(
        users=np.asarray(users, dtype=np.int64),
        items=np.asarray(items, dtype=np.int64),
        weights=np.asarray(weights, dtype=np.float64),
        n_users=int(max(users)),
        n_items=n_items,
        raw_user_ids=tuple(range(1, int(max(users)) + 1)),
        raw_item_ids=tuple(range(1, n_items + 1)),
    )
    return inter, attrs
