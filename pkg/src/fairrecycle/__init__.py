"""fairrecycle: group-constrained re-ranking of cached recommendation
lists, plus the benchmark harness that compares it against live-query
and full-knowledge baselines."""

from .core import (
    AlgoConfig,
    AttributeTable,
    CountingProvider,
    InfeasibleError,
    RecCache,
    feasible_add,
    invariant_violations,
    reset_invariant_violations,
)
from .algorithms import (
    RecOutcome,
    recommend_from_cache,
    recommend_live,
    rerank_by_scores,
    rerank_within_list,
)
from .session import SessionTrace, pick_source, simulate_session
from .metrics import (
    RunReport,
    group_counts,
    label_match_accuracy,
    ndcg_at_k,
    recall_at_k,
)

__version__ = "0.1.0"

__all__ = [
    "AlgoConfig",
    "AttributeTable",
    "CountingProvider",
    "InfeasibleError",
    "RecCache",
    "RecOutcome",
    "RunReport",
    "SessionTrace",
    "feasible_add",
    "group_counts",
    "invariant_violations",
    "label_match_accuracy",
    "ndcg_at_k",
    "pick_source",
    "recall_at_k",
    "recommend_from_cache",
    "recommend_live",
    "rerank_by_scores",
    "rerank_within_list",
    "reset_invariant_violations",
    "simulate_session",
]
