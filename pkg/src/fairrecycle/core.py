"""Shared domain types for user-side re-ranking of recommendation lists.

Conventions used across the package:

* Items are integers ``1..n`` for a catalog of size ``n``.
* A recommendation list is a tuple of exactly ``k`` distinct item ids.
* Group labels are short strings; every item in the catalog maps to
  exactly one group.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np


class InfeasibleError(RuntimeError):
    """No list of length k can satisfy the per-group minimum."""


class TrainingDivergedError(RuntimeError):
    """Model training produced a non-finite loss."""


# ---------------------------------------------------------------------------
# recommendation lists
# ---------------------------------------------------------------------------


def validate_rec_list(
    items: Sequence[int],
    k: int | None = None,
    n_items: int | None = None,
) -> tuple[int, ...]:
    """Check list-shape invariants and return the list as a tuple.

    Raises ValueError on duplicates, wrong length, or out-of-catalog ids.
    """
    out = tuple(int(j) for j in items)
    if k is not None and len(out) != k:
        raise ValueError(f"recommendation list has length {len(out)}, expected {k}")
    if len(set(out)) != len(out):
        raise ValueError("recommendation list contains duplicate items")
    if n_items is not None:
        for j in out:
            if not 1 <= j <= n_items:
                raise ValueError(f"item {j} out of catalog [1..{n_items}]")
    return out


# ---------------------------------------------------------------------------
# attribute table
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AttributeTable:
    """Total map from catalog items to discrete group labels.

    ``codes[i]`` is the index into ``labels`` for item ``i``; slot 0 is
    unused so items can be used as indices directly.
    """

    labels: tuple[str, ...]
    codes: np.ndarray

    def __post_init__(self) -> None:
        if len(self.labels) < 1:
            raise ValueError("at least one group label is required")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate group labels")
        if self.codes.ndim != 1 or self.codes.shape[0] < 2:
            raise ValueError("codes must cover a non-empty catalog")
        body = self.codes[1:]
        if body.min() < 0 or body.max() >= len(self.labels):
            raise ValueError("group code out of range")

    @classmethod
    def from_mapping(cls, groups: Mapping[int, str], n_items: int) -> "AttributeTable":
        """Build a table from an item -> label mapping covering 1..n_items."""
        labels = tuple(sorted(set(groups.values())))
        index = {a: c for c, a in enumerate(labels)}
        codes = np.full(n_items + 1, -1, dtype=np.int16)
        for item, label in groups.items():
            if not 1 <= int(item) <= n_items:
                raise ValueError(f"item {item} out of catalog [1..{n_items}]")
            codes[int(item)] = index[label]
        if (codes[1:] < 0).any():
            missing = int(np.argmax(codes[1:] < 0)) + 1
            raise ValueError(f"item {missing} has no group assignment")
        return cls(labels=labels, codes=codes)

    @property
    def n_items(self) -> int:
        return self.codes.shape[0] - 1

    def group_of(self, item: int) -> str:
        if not 1 <= item <= self.n_items:
            raise ValueError(f"item {item} out of catalog [1..{self.n_items}]")
        return self.labels[self.codes[item]]

    def counts(self, items: Iterable[int]) -> dict[str, int]:
        """Group histogram of ``items``; every label is present in the result."""
        out = {a: 0 for a in self.labels}
        for j in items:
            out[self.group_of(j)] += 1
        return out

    def items_in_group(self, label: str) -> np.ndarray:
        """Ascending item ids belonging to ``label``."""
        code = self.labels.index(label)
        return np.flatnonzero(self.codes == code)


# ---------------------------------------------------------------------------
# fairness feasibility
# ---------------------------------------------------------------------------


def feasible_add(
    counts: Mapping[str, int],
    group_of_j: str,
    tau: int,
    k: int,
    current_len: int,
) -> bool:
    """Can one item of ``group_of_j`` join the list without making any
    other group's minimum unreachable?

    True iff the remaining deficit of the other groups fits in the
    ``k - current_len - 1`` slots that stay open after the addition.
    """
    need = 0
    for label, c in counts.items():
        if label != group_of_j:
            d = tau - c
            if d > 0:
                need += d
    return need <= k - current_len - 1


# ---------------------------------------------------------------------------
# search state and its running invariant
# ---------------------------------------------------------------------------

_violation_lock = threading.Lock()
_invariant_violations = 0


def invariant_violations() -> int:
    """Number of group-deficit invariant violations observed so far."""
    return _invariant_violations


def reset_invariant_violations() -> None:
    global _invariant_violations
    with _violation_lock:
        _invariant_violations = 0


def check_deficit_invariant(counts: Mapping[str, int], tau: int, k: int, result_len: int) -> None:
    """Assert that the total outstanding group deficit still fits in the
    remaining slots. Called after every accepted item; a violation means
    a feasibility check was skipped or wrong.
    """
    global _invariant_violations
    deficit = sum(max(0, tau - c) for c in counts.values())
    if deficit > k - result_len:
        with _violation_lock:
            _invariant_violations += 1
        raise AssertionError(
            f"group deficit {deficit} exceeds remaining {k - result_len} slots"
        )


@dataclass
class SearchState:
    """Mutable state of the constrained list-building search."""

    result: list[int]
    counts: dict[str, int]
    stack: list[int]
    cursor: int
    expanded: set[int] = field(default_factory=set)
    _members: set[int] = field(default_factory=set)

    @classmethod
    def fresh(cls, labels: Sequence[str], cursor: int) -> "SearchState":
        return cls(result=[], counts={a: 0 for a in labels}, stack=[], cursor=cursor)

    def __contains__(self, item: int) -> bool:
        return item in self._members

    def accept(self, item: int, group: str, tau: int, k: int) -> None:
        """Append ``item``; the caller must have passed feasible_add."""
        self.result.append(item)
        self._members.add(item)
        self.counts[group] += 1
        check_deficit_invariant(self.counts, tau, k, len(self.result))


# ---------------------------------------------------------------------------
# algorithm configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlgoConfig:
    """Knobs of the constrained search.

    tau is the per-group minimum (0 disables the constraint), l_max caps
    how many list lookups a single recommendation may expand.
    """

    k: int
    tau: int = 0
    l_max: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.l_max < 1:
            raise ValueError("l_max must be >= 1")


# ---------------------------------------------------------------------------
# response cache
# ---------------------------------------------------------------------------


class RecCache:
    """Locally stored item -> top-K lists, i.e. the slice of the
    provider's recommendation graph the user has actually seen.

    Absent keys are reported as None, never as a sentinel list.
    """

    def __init__(self) -> None:
        self._entries: dict[int, tuple[int, ...]] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, item: int) -> bool:
        return int(item) in self._entries

    def keys(self) -> list[int]:
        return sorted(self._entries)

    def record(self, item: int, rec_list: Sequence[int]) -> None:
        """Store (or idempotently overwrite) the list shown for ``item``."""
        self._entries[int(item)] = validate_rec_list(rec_list)

    def lookup(self, item: int) -> tuple[int, ...] | None:
        return self._entries.get(int(item))

    # -- persistence: one line per entry, "<item> <rec1> ... <recK>" --

    def dump_lines(self) -> list[str]:
        return [
            " ".join(str(x) for x in (item, *self._entries[item]))
            for item in sorted(self._entries)
        ]

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.dump_lines()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RecCache":
        cache = cls()
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) < 2:
                raise ValueError(f"{path}: line {lineno}: expected item and its list")
            cache.record(int(fields[0]), [int(x) for x in fields[1:]])
        return cache


# ---------------------------------------------------------------------------
# counted provider boundary
# ---------------------------------------------------------------------------


class CountingProvider:
    """Access-counting wrapper around a deterministic top-K recommender.

    Every ``topk`` call costs exactly one unit of ``access_count``.
    Full score reads (used by the oracle baseline only) are tallied in
    ``score_access_count`` so the two kinds of access stay separable.
    Counter updates are lock-protected and safe under concurrent use.
    """

    def __init__(
        self,
        topk_fn: Callable[[int], Sequence[int]],
        n_items: int,
        k: int,
        scores_fn: Callable[[int], np.ndarray] | None = None,
    ) -> None:
        self._topk_fn = topk_fn
        self._scores_fn = scores_fn
        self.n_items = int(n_items)
        self.k = int(k)
        self._lock = threading.Lock()
        self._access_count = 0
        self._score_access_count = 0

    @property
    def access_count(self) -> int:
        return self._access_count

    @property
    def score_access_count(self) -> int:
        return self._score_access_count

    def _check_item(self, item: int) -> int:
        item = int(item)
        if not 1 <= item <= self.n_items:
            raise ValueError(f"item out of catalog: {item}")
        return item

    def topk(self, item: int) -> tuple[int, ...]:
        """The provider's list for ``item``; bumps access_count by one."""
        item = self._check_item(item)
        with self._lock:
            self._access_count += 1
        return validate_rec_list(self._topk_fn(item), k=self.k, n_items=self.n_items)

    def full_scores(self, item: int) -> np.ndarray:
        """Scores of every catalog item against ``item`` (index j-1 holds
        item j); bumps score_access_count, not access_count."""
        if self._scores_fn is None:
            raise RuntimeError("provider does not expose full scores")
        item = self._check_item(item)
        with self._lock:
            self._score_access_count += 1
        scores = np.asarray(self._scores_fn(item), dtype=np.float64)
        if scores.shape != (self.n_items,):
            raise ValueError(f"score vector has shape {scores.shape}, expected ({self.n_items},)")
        return scores
