"""Simulated browsing sessions.

A session is a random walk that follows the provider's recommendations:
every first visit to an item queries the provider once and records the
returned list in the local cache; revisits are cache hits and do not
extend the history. The walk therefore leaves behind exactly the data a
user-side re-ranker gets for free: the visited items and their lists.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import CountingProvider, RecCache


@dataclass
class SessionTrace:
    """Outcome of one simulated session."""

    history: tuple[int, ...]
    cache: RecCache
    provider_cost: int


def simulate_session(
    provider: CountingProvider,
    start: int,
    length: int,
    seed,
    max_steps: int | None = None,
) -> SessionTrace:
    """Walk the recommendation graph from ``start`` until ``length``
    distinct items have been visited.

    Each step moves to a uniformly random member of the current item's
    list. The walk is capped at ``max_steps`` moves (default 50x length)
    in case the reachable region is smaller than ``length``, so the
    history may come up short on degenerate graphs.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    rng = np.random.default_rng(seed)
    cap = max_steps if max_steps is not None else 50 * length

    cache = RecCache()
    history: list[int] = []
    seen: set[int] = set()
    before = provider.access_count
    current = int(start)
    for _ in range(cap):
        if current not in seen:
            seen.add(current)
            history.append(current)
            rec = provider.topk(current)
            cache.record(current, rec)
        else:
            rec = cache.lookup(current)
        if len(history) >= length:
            break
        current = int(rec[rng.integers(len(rec))])
    return SessionTrace(
        history=tuple(history),
        cache=cache,
        provider_cost=provider.access_count - before,
    )


def pick_source(trace: SessionTrace) -> int:
    """The item the user is currently viewing: the last one visited.
    Its list is guaranteed to be cached."""
    if not trace.history:
        raise ValueError("empty trace has no source item")
    return trace.history[-1]


def save_trace(trace: SessionTrace, path: str | Path) -> None:
    """Cache file format plus a header line listing the visit order."""
    lines = ["# history: " + " ".join(str(i) for i in trace.history)]
    lines.extend(trace.cache.dump_lines())
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_trace(path: str | Path) -> SessionTrace:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("# history:"):
        raise ValueError(f"{path}: missing history header")
    history = tuple(int(x) for x in text[0].split(":", 1)[1].split())
    cache = RecCache()
    for line in text[1:]:
        if not line.strip():
            continue
        fields = line.split()
        cache.record(int(fields[0]), [int(x) for x in fields[1:]])
    return SessionTrace(history=history, cache=cache, provider_cost=len(cache))
