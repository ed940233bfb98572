"""Figure rendering for run reports and sweeps.

Uses the object-oriented matplotlib API with the Agg canvas so figures
render headlessly straight to files, next to the CSV output.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .metrics import RunReport

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _new_figure(width: float = 8.0, ncols: int = 1):
    fig = Figure(figsize=(width, width * _GOLDEN / max(ncols, 1) * 0.9))
    FigureCanvasAgg(fig)
    axes = fig.subplots(1, ncols)
    return fig, axes


def render_report_figure(report: RunReport, path: str | Path) -> Path:
    """Bar panels: ranking quality per algorithm, and mean access cost."""
    fig, (ax_perf, ax_cost) = _new_figure(9.0, ncols=2)
    algos = [r.algorithm for r in report.rows]
    x = np.arange(len(algos))

    have_rank = any(r.ndcg is not None for r in report.rows)
    if have_rank:
        ndcg = [r.ndcg if r.ndcg is not None else 0.0 for r in report.rows]
        recall = [r.recall if r.recall is not None else 0.0 for r in report.rows]
        ax_perf.bar(x - 0.2, ndcg, width=0.4, label=f"nDCG@{_k_of(report)}")
        ax_perf.bar(x + 0.2, recall, width=0.4, label=f"recall@{_k_of(report)}")
    else:
        acc = [r.accuracy if r.accuracy is not None else 0.0 for r in report.rows]
        ax_perf.bar(x, acc, width=0.5, label="label accuracy")
    ax_perf.set_xticks(x)
    ax_perf.set_xticklabels(algos, rotation=20)
    ax_perf.set_ylabel("score")
    ax_perf.legend(frameon=False)
    ax_perf.spines["top"].set_visible(False)
    ax_perf.spines["right"].set_visible(False)

    cost = [r.mean_cost for r in report.rows]
    ax_cost.bar(x, cost, width=0.5, color="#888888")
    ax_cost.set_xticks(x)
    ax_cost.set_xticklabels(algos, rotation=20)
    ax_cost.set_ylabel("mean item-page accesses")
    ax_cost.spines["top"].set_visible(False)
    ax_cost.spines["right"].set_visible(False)

    fig.suptitle(f"{report.dataset} ({report.group_rule}), {report.n_users} users")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    return path


def render_sweep_figure(
    lengths: Sequence[int],
    reports: Sequence[RunReport],
    algorithm: str,
    path: str | Path,
) -> Path:
    """Line plot of ranking quality versus session length."""
    fig, ax = _new_figure(6.5)
    ndcg = [rep.row(algorithm).ndcg for rep in reports]
    recall = [rep.row(algorithm).recall for rep in reports]
    if any(v is not None for v in ndcg):
        ax.plot(lengths, ndcg, marker="o", label="nDCG")
    if any(v is not None for v in recall):
        ax.plot(lengths, recall, marker="s", label="recall")
    ax.set_xlabel("session length (distinct items visited)")
    ax.set_ylabel("score")
    ax.set_title(f"{algorithm}: quality vs. history length")
    ax.legend(frameon=False)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    return path


def _k_of(report: RunReport) -> str:
    return report.config.get("k", "K")
