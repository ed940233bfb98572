"""Offline evaluation metrics and the per-run report.

Ranking quality is scored against each user's held-out items over the
full catalog (no sampled negatives); report means are arithmetic means
over users.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Collection, Sequence

from .core import AttributeTable
from .datasets import LabelTable


def ndcg_at_k(rec: Sequence[int], relevant: Collection[int], k: int) -> float:
    """Binary-gain normalized discounted cumulative gain.

    Gain 1/log2(rank+1) for each relevant item in the list, normalized
    by the best achievable prefix; 0.0 when nothing is relevant.
    """
    if len(rec) != k:
        raise ValueError(f"list has length {len(rec)}, expected {k}")
    if not relevant:
        return 0.0
    rel = set(relevant)
    dcg = sum(1.0 / math.log2(pos + 1) for pos, item in enumerate(rec, 1) if item in rel)
    ideal = sum(1.0 / math.log2(pos + 1) for pos in range(1, min(k, len(rel)) + 1))
    return dcg / ideal


def recall_at_k(rec: Sequence[int], relevant: Collection[int], k: int) -> float:
    """Fraction of the relevant items that made it into the list."""
    if len(rec) != k:
        raise ValueError(f"list has length {len(rec)}, expected {k}")
    if not relevant:
        return 0.0
    rel = set(relevant)
    return sum(1 for item in rec if item in rel) / len(rel)


def label_match_accuracy(rec: Sequence[int], labels: LabelTable, query: int) -> float:
    """Fraction of the list sharing the query item's label."""
    if not rec:
        return 0.0
    want = labels.label_of(query)
    return sum(1 for item in rec if labels.label_of(item) == want) / len(rec)


def group_counts(rec: Sequence[int], attrs: AttributeTable) -> dict[str, int]:
    """Per-group counts over the list; every group label is present."""
    return attrs.counts(rec)


# ---------------------------------------------------------------------------
# run report
# ---------------------------------------------------------------------------

CSV_COLUMNS = (
    "algorithm", "ndcg", "recall", "accuracy", "mean_cost",
    "min_group_count", "fallback_rate", "infeasible_rate",
)


@dataclass
class AlgoStats:
    """Aggregated results of one algorithm over the evaluated users."""

    algorithm: str
    ndcg: float | None
    recall: float | None
    accuracy: float | None
    mean_cost: float
    median_cost: float
    max_cost: float
    min_group_count: int
    fallback_rate: float
    infeasible_rate: float
    mean_expansions: float = 0.0
    median_expansions: float = 0.0
    max_expansions: int = 0
    overhead_violations: int = 0
    users_evaluated: int = 0


@dataclass
class RunReport:
    """Everything one experiment run produced, plus its provenance."""

    dataset: str
    group_rule: str
    walk_len: int
    n_users: int
    config: dict[str, str] = field(default_factory=dict)
    seeds: dict[str, int] = field(default_factory=dict)
    rows: list[AlgoStats] = field(default_factory=list)

    def row(self, algorithm: str) -> AlgoStats:
        for r in self.rows:
            if r.algorithm == algorithm:
                return r
        raise KeyError(algorithm)


def _cell(value: float | None, fmt: str = "{:.6f}") -> str:
    if value is None:
        return ""
    return fmt.format(value)


def report_to_csv(report: RunReport) -> str:
    """Deterministic CSV, one row per algorithm."""
    lines = [",".join(CSV_COLUMNS)]
    for r in report.rows:
        lines.append(",".join([
            r.algorithm,
            _cell(r.ndcg),
            _cell(r.recall),
            _cell(r.accuracy),
            _cell(r.mean_cost, "{:.2f}"),
            str(r.min_group_count),
            _cell(r.fallback_rate, "{:.4f}"),
            _cell(r.infeasible_rate, "{:.4f}"),
        ]))
    return "\n".join(lines) + "\n"


def report_to_table(report: RunReport) -> str:
    """Human-readable aligned-column view of the same rows."""
    headers = ["algorithm", "ndcg", "recall", "accuracy", "cost",
               "min_grp", "fallback", "infeasible"]
    body = []
    for r in report.rows:
        body.append([
            r.algorithm,
            _cell(r.ndcg, "{:.4f}") or "-",
            _cell(r.recall, "{:.4f}") or "-",
            _cell(r.accuracy, "{:.4f}") or "-",
            _cell(r.mean_cost, "{:.2f}"),
            str(r.min_group_count),
            _cell(r.fallback_rate, "{:.4f}"),
            _cell(r.infeasible_rate, "{:.4f}"),
        ])
    widths = [max(len(h), *(len(row[c]) for row in body)) if body else len(h)
              for c, h in enumerate(headers)]
    def fmt_line(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    head = [
        f"dataset={report.dataset} rule={report.group_rule} "
        f"walk_len={report.walk_len} users={report.n_users}",
        fmt_line(headers),
        "-" * (sum(widths) + 2 * (len(widths) - 1)),
    ]
    return "\n".join(head + [fmt_line(row) for row in body]) + "\n"
