"""User-side re-rankers.

All four share the same group-minimum constraint: a list of length k
must contain at least tau items of every group. An item may join the
list only while the other groups' outstanding minimums still fit into
the slots that remain (see :func:`fairrecycle.core.feasible_add`), which
is what makes every completed list satisfy the minimums.

* :func:`recommend_from_cache` builds the list from the session cache
  alone: a depth-first search over the cached lists, zero provider
  queries.
* :func:`recommend_live` is the identical search querying the provider
  directly, one access per expanded item.
* :func:`rerank_by_scores` greedily filters a full score ranking; it
  stands in for a best-case baseline with provider-internal access.
* :func:`rerank_within_list` greedily filters one list in place and
  reports infeasibility when the list alone cannot meet the minimums.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Collection, Sequence

import numpy as np

from .core import (
    AlgoConfig,
    AttributeTable,
    CountingProvider,
    InfeasibleError,
    RecCache,
    SearchState,
    feasible_add,
)


@dataclass(frozen=True)
class RecOutcome:
    """A built list plus the effort accounting behind it."""

    items: tuple[int, ...]
    expansions: int
    fallback_items: int
    provider_cost: int


def _check_config(attrs: AttributeTable, cfg: AlgoConfig) -> None:
    if cfg.tau * len(attrs.labels) > cfg.k:
        raise ValueError(
            f"tau={cfg.tau} over {len(attrs.labels)} groups cannot fit in k={cfg.k}"
        )


def _fallback_fill(
    state: SearchState,
    attrs: AttributeTable,
    cfg: AlgoConfig,
    history: frozenset[int],
    rng: np.random.Generator,
) -> int:
    """Fill the remaining slots with random eligible catalog items.

    Uniform rejection sampling keeps the usual behavior; after 50*k
    failed draws it switches to a deterministic sweep (deficit groups
    first, ascending id) so the call always terminates. Raises
    InfeasibleError when no completion exists.
    """
    k, tau = cfg.k, cfg.tau
    n = attrs.n_items
    added = 0

    draws = 0
    while len(state.result) < k and draws < 50 * k:
        draws += 1
        j = int(rng.integers(1, n + 1))
        if j in state or j in history:
            continue
        group = attrs.group_of(j)
        if feasible_add(state.counts, group, tau, k, len(state.result)):
            state.accept(j, group, tau, k)
            added += 1

    if len(state.result) < k:
        for label in attrs.labels:
            for j in attrs.items_in_group(label):
                if state.counts[label] >= tau or len(state.result) >= k:
                    break
                j = int(j)
                if j in state or j in history:
                    continue
                if feasible_add(state.counts, label, tau, k, len(state.result)):
                    state.accept(j, label, tau, k)
                    added += 1
        for j in range(1, n + 1):
            if len(state.result) >= k:
                break
            if j in state or j in history:
                continue
            group = attrs.group_of(j)
            if feasible_add(state.counts, group, tau, k, len(state.result)):
                state.accept(j, group, tau, k)
                added += 1

    if len(state.result) < k:
        raise InfeasibleError("infeasible fairness constraint")
    return added


def _constrained_search(
    fetch: Callable[[int], Sequence[int] | None],
    source: int,
    attrs: AttributeTable,
    cfg: AlgoConfig,
    history: Collection[int],
    rng: np.random.Generator,
) -> tuple[tuple[int, ...], int, int]:
    """Depth-first search over recommendation lists under the group
    constraint.

    The cursor starts at ``source``. Expanding a cursor means reading
    its list once: each member joins the result when it is new, outside
    the history, and feasible; then all members are pushed onto the
    stack in reverse rank order so rank 1 is tried next. Cursors whose
    list is unavailable, or that were expanded before, are skipped by
    popping the stack. At most ``cfg.l_max`` cursors are expanded; any
    slots still open afterwards are filled by the random fallback.
    """
    _check_config(attrs, cfg)
    k, tau = cfg.k, cfg.tau
    hist = frozenset(int(h) for h in history)
    state = SearchState.fresh(attrs.labels, cursor=int(source))
    expansions = 0

    for _ in range(cfg.l_max):
        rec: Sequence[int] | None = None
        while True:
            if state.cursor not in state.expanded:
                rec = fetch(state.cursor)
                if rec is not None:
                    break
            if not state.stack:
                break
            state.cursor = state.stack.pop()
        if rec is None:
            break  # nothing reachable is left to expand

        state.expanded.add(state.cursor)
        expansions += 1
        for j in rec:
            j = int(j)
            if j not in state and j not in hist:
                group = attrs.group_of(j)
                if feasible_add(state.counts, group, tau, k, len(state.result)):
                    state.accept(j, group, tau, k)
            if len(state.result) == k:
                return tuple(state.result), expansions, 0
        for j in reversed(rec):
            state.stack.append(int(j))

    fallback_items = _fallback_fill(state, attrs, cfg, hist, rng)
    return tuple(state.result), expansions, fallback_items


def recommend_from_cache(
    cache: RecCache,
    source: int,
    attrs: AttributeTable,
    cfg: AlgoConfig,
    history: Collection[int],
    rng: np.random.Generator,
) -> RecOutcome:
    """Build a constrained list for ``source`` from the cache alone.

    Never touches the provider; uncached items encountered during the
    search are simply skipped.
    """
    items, expansions, fallback = _constrained_search(
        cache.lookup, source, attrs, cfg, history, rng
    )
    return RecOutcome(items=items, expansions=expansions,
                      fallback_items=fallback, provider_cost=0)


def recommend_live(
    provider: CountingProvider,
    source: int,
    attrs: AttributeTable,
    cfg: AlgoConfig,
    history: Collection[int],
    rng: np.random.Generator,
) -> RecOutcome:
    """Same search as :func:`recommend_from_cache` but each expanded
    cursor queries the provider, costing one access."""
    before = provider.access_count
    items, expansions, fallback = _constrained_search(
        provider.topk, source, attrs, cfg, history, rng
    )
    return RecOutcome(items=items, expansions=expansions,
                      fallback_items=fallback,
                      provider_cost=provider.access_count - before)


def rerank_by_scores(
    scores: np.ndarray,
    attrs: AttributeTable,
    cfg: AlgoConfig,
    history: Collection[int] = (),
    source: int | None = None,
) -> tuple[int, ...]:
    """Greedy constrained selection over a full score vector.

    Items are visited in descending score (ties by ascending id),
    skipping ``source`` and the history; each is added when feasible.
    """
    _check_config(attrs, cfg)
    n = attrs.n_items
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (n,):
        raise ValueError(f"score vector has shape {scores.shape}, expected ({n},)")
    k, tau = cfg.k, cfg.tau
    hist = frozenset(int(h) for h in history)
    state = SearchState.fresh(attrs.labels, cursor=0)
    order = np.argsort(-scores, kind="stable")
    for pos in order:
        j = int(pos) + 1
        if j == source or j in hist:
            continue
        group = attrs.group_of(j)
        if feasible_add(state.counts, group, tau, k, len(state.result)):
            state.accept(j, group, tau, k)
            if len(state.result) == k:
                return tuple(state.result)
    raise InfeasibleError("infeasible fairness constraint")


def rerank_within_list(
    items: Sequence[int],
    attrs: AttributeTable,
    cfg: AlgoConfig,
) -> tuple[int, ...] | None:
    """Greedy constrained selection restricted to one list.

    Returns None when the list alone cannot reach k items under the
    constraint; with tau=0 the input comes back unchanged. This is the
    weakest strategy and exists to measure how often pure in-list
    postprocessing fails.
    """
    _check_config(attrs, cfg)
    k, tau = cfg.k, cfg.tau
    state = SearchState.fresh(attrs.labels, cursor=0)
    for j in items:
        j = int(j)
        if j in state:
            continue
        group = attrs.group_of(j)
        if feasible_add(state.counts, group, tau, k, len(state.result)):
            state.accept(j, group, tau, k)
            if len(state.result) == k:
                return tuple(state.result)
    return None
