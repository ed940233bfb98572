"""Experiment orchestration: datasets, provider, sessions, recommenders,
metrics, wired into seeded, reproducible runs.

A run evaluates every enabled algorithm from the same source item,
history and cache per evaluation unit, then aggregates means over
units. Two evaluation protocols exist:

* interaction datasets (movielens/lastfm layouts): one unit per dataset
  user; the session starts at a random training item of that user and
  the query is the last item visited; quality is nDCG/recall against
  the user's held-out items.
* labeled-item datasets (adult layout): one unit per query item; the
  session starts at the query item itself (so its list is cached) and
  quality is label-match accuracy.
"""

from __future__ import annotations

import logging
import statistics
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import algorithms as algo
from . import datasets as ds
from . import provider as prov
from .core import AlgoConfig, CountingProvider, InfeasibleError
from .metrics import (
    AlgoStats,
    RunReport,
    group_counts,
    label_match_accuracy,
    ndcg_at_k,
    recall_at_k,
    report_to_csv,
    report_to_table,
)
from .session import pick_source, simulate_session

log = logging.getLogger(__name__)

KNOWN_ALGORITHMS = ("provider", "naive", "recycle", "live", "oracle")
_ALGO_TAG = {name: i + 1 for i, name in enumerate(KNOWN_ALGORITHMS)}

_DATASET_KINDS = ("movielens", "lastfm", "adult", "snapshot")


class StageError(RuntimeError):
    """An experiment stage failed; carries the stage name for the CLI."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage={stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "movielens"
    data_dir: str = "data"
    group_rule: str = "popularity"
    provider_kind: str = "bpr"
    k: int = 10
    tau: int = 5
    walk_len: int = 100
    l_max: int = 50
    test_fraction: float = 0.2
    k_core: int = 0
    sample_users: int = 0  # 0 = evaluate everyone
    algorithms: tuple[str, ...] = KNOWN_ALGORITHMS
    seed: int = 0
    bpr: prov.BprConfig = field(default_factory=prov.BprConfig)

    def validate(self) -> None:
        if self.dataset not in _DATASET_KINDS:
            raise ValueError(f"unknown dataset kind {self.dataset!r}")
        if self.provider_kind not in ("bpr", "knn"):
            raise ValueError(f"unknown provider kind {self.provider_kind!r}")
        if self.k < 1 or self.tau < 0 or self.l_max < 1 or self.walk_len < 1:
            raise ValueError("k, l_max, walk_len must be >= 1 and tau >= 0")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")
        for name in self.algorithms:
            if name not in KNOWN_ALGORITHMS:
                raise ValueError(f"unknown algorithm {name!r}")
        if self.dataset != "adult":
            ds.GroupRule.parse(self.group_rule)

    # -- line-oriented "key = value" round-trip --

    def to_dict(self) -> dict[str, str]:
        out: dict[str, str] = {}
        for f in fields(self):
            if f.name == "bpr":
                continue
            value = getattr(self, f.name)
            if f.name == "algorithms":
                value = ",".join(value)
            out[f.name] = str(value)
        for f in fields(self.bpr):
            out[f"bpr_{f.name}"] = str(getattr(self.bpr, f.name))
        return out

    def to_text(self) -> str:
        return "\n".join(f"{k} = {v}" for k, v in self.to_dict().items()) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        raw: dict[str, str] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"config line {lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            raw[key.strip()] = value.strip()
        kwargs: dict = {}
        bpr_kwargs: dict = {}
        field_types = {f.name: f.type for f in fields(cls)}
        bpr_types = {f.name: f.type for f in fields(prov.BprConfig)}
        for key, value in raw.items():
            if key.startswith("bpr_"):
                name = key[4:]
                if name not in bpr_types:
                    raise ValueError(f"unknown config key {key!r}")
                bpr_kwargs[name] = _coerce(value, bpr_types[name])
            else:
                if key not in field_types:
                    raise ValueError(f"unknown config key {key!r}")
                if key == "algorithms":
                    kwargs[key] = tuple(x.strip() for x in value.split(",") if x.strip())
                else:
                    kwargs[key] = _coerce(value, field_types[key])
        if bpr_kwargs:
            kwargs["bpr"] = prov.BprConfig(**bpr_kwargs)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def _coerce(value: str, type_name) -> object:
    name = str(type_name)
    if "int" in name:
        return int(value)
    if "float" in name:
        return float(value)
    return value


# ---------------------------------------------------------------------------
# prepared inputs shared across runs (and across sweep lengths)
# ---------------------------------------------------------------------------


@dataclass
class PreparedExperiment:
    config: ExperimentConfig
    attrs: object  # AttributeTable
    provider: CountingProvider
    model: object
    units: list[tuple[int, int, set[int] | None]]  # (unit id, start item, relevant)
    labels: ds.LabelTable | None = None
    n_items: int = 0


def prepare_experiment(cfg: ExperimentConfig, model=None) -> PreparedExperiment:
    """Load data, derive groups, train (or reuse) the provider, and lay
    out the evaluation units. Everything downstream is deterministic
    given the config seed."""
    cfg.validate()
    data_dir = Path(cfg.data_dir)

    if cfg.dataset == "adult":
        return _prepare_adult(cfg, data_dir, model)

    try:
        rule = ds.GroupRule.parse(cfg.group_rule)
        if cfg.dataset == "movielens":
            inter, attrs = ds.load_movielens(data_dir, rule)
        elif cfg.dataset == "lastfm":
            inter, attrs = ds.load_lastfm(data_dir, rule)
        else:
            inter, attrs = ds.read_snapshot(data_dir)
        if cfg.k_core > 0:
            inter = ds.extract_k_core(inter, cfg.k_core)
            if rule.kind == "year_threshold" and cfg.dataset == "movielens":
                attrs = ds.year_groups(
                    ds.item_years(data_dir, inter), inter.n_items, rule.year
                )
    except (ds.DataError, OSError, ValueError) as exc:
        raise StageError("datasets", str(exc))

    try:
        split = ds.SplitSpec(test_fraction=cfg.test_fraction, seed=cfg.seed)
        train, test = ds.split_train_test(inter, split)
        # popularity-style groups are recounted on the training split so
        # held-out interactions never leak into the attribute assignment
        if cfg.dataset != "snapshot" and rule.kind == "interaction_threshold":
            attrs = ds.popularity_groups(train, rule.count)
    except (ds.DataError, ValueError) as exc:
        raise StageError("datasets", str(exc))

    try:
        if model is None:
            log.info("training provider on %d interactions", len(train))
            model = prov.train_bpr(train, replace(cfg.bpr, seed=cfg.seed))
        provider = prov.make_provider(model, cfg.k)
    except Exception as exc:
        raise StageError("provider", str(exc))

    users = list(range(1, inter.n_users + 1))
    if 0 < cfg.sample_users < len(users):
        rng = np.random.default_rng([cfg.seed, 5])
        users = sorted(rng.choice(users, size=cfg.sample_users, replace=False).tolist())

    relevant: dict[int, set[int]] = {u: set() for u in users}
    for u, i in zip(test.users.tolist(), test.items.tolist()):
        if u in relevant:
            relevant[u].add(i)

    units = []
    for u in users:
        pool = train.items_of_user(u)
        if len(pool) == 0:
            continue
        rng = np.random.default_rng([cfg.seed, 3, u])
        start = int(pool[rng.integers(len(pool))])
        units.append((u, start, relevant[u]))

    return PreparedExperiment(
        config=cfg, attrs=attrs, provider=provider, model=model,
        units=units, labels=None, n_items=inter.n_items,
    )


def _prepare_adult(cfg: ExperimentConfig, data_dir: Path, model=None) -> PreparedExperiment:
    try:
        path = data_dir / "adult.data" if data_dir.is_dir() else data_dir
        features, attrs, labels = ds.load_adult(path)
    except (ds.DataError, OSError) as exc:
        raise StageError("datasets", str(exc))
    try:
        if model is None:
            model = prov.fit_knn(features)
        provider = prov.make_provider(model, cfg.k)
    except Exception as exc:
        raise StageError("provider", str(exc))

    items = list(range(1, features.n_items + 1))
    if 0 < cfg.sample_users < len(items):
        rng = np.random.default_rng([cfg.seed, 5])
        items = sorted(rng.choice(items, size=cfg.sample_users, replace=False).tolist())
    units = [(i, i, None) for i in items]
    return PreparedExperiment(
        config=cfg, attrs=attrs, provider=provider, model=model,
        units=units, labels=labels, n_items=features.n_items,
    )


# ---------------------------------------------------------------------------
# the run itself
# ---------------------------------------------------------------------------


class _Accumulator:
    def __init__(self, name: str):
        self.name = name
        self.ndcg: list[float] = []
        self.recall: list[float] = []
        self.accuracy: list[float] = []
        self.cost: list[float] = []
        self.expansions: list[int] = []
        self.fallback_used = 0
        self.infeasible = 0
        self.attempted = 0
        self.min_group = None
        self.overhead_violations = 0

    def stats(self) -> AlgoStats:
        done = len(self.cost)
        return AlgoStats(
            algorithm=self.name,
            ndcg=statistics.fmean(self.ndcg) if self.ndcg else None,
            recall=statistics.fmean(self.recall) if self.recall else None,
            accuracy=statistics.fmean(self.accuracy) if self.accuracy else None,
            mean_cost=statistics.fmean(self.cost) if self.cost else 0.0,
            median_cost=statistics.median(self.cost) if self.cost else 0.0,
            max_cost=max(self.cost) if self.cost else 0.0,
            min_group_count=self.min_group if self.min_group is not None else 0,
            fallback_rate=self.fallback_used / done if done else 0.0,
            infeasible_rate=self.infeasible / self.attempted if self.attempted else 0.0,
            mean_expansions=statistics.fmean(self.expansions) if self.expansions else 0.0,
            median_expansions=statistics.median(self.expansions) if self.expansions else 0.0,
            max_expansions=max(self.expansions) if self.expansions else 0,
            overhead_violations=self.overhead_violations,
            users_evaluated=done,
        )


def run_prepared(prep: PreparedExperiment, walk_len: int | None = None) -> RunReport:
    """Evaluate all units of a prepared experiment; fresh sessions are
    simulated for the requested walk length."""
    cfg = prep.config
    length = walk_len if walk_len is not None else cfg.walk_len
    acfg = AlgoConfig(k=cfg.k, tau=cfg.tau, l_max=cfg.l_max, seed=cfg.seed)
    if cfg.tau * len(prep.attrs.labels) > cfg.k:
        raise StageError(
            "config", f"tau={cfg.tau} over {len(prep.attrs.labels)} groups exceeds k={cfg.k}"
        )
    provider = prep.provider
    attrs = prep.attrs
    item_level = prep.labels is not None

    accs = {name: _Accumulator(name) for name in cfg.algorithms}
    for unit, start, relevant in prep.units:
        try:
            trace = simulate_session(
                provider, start, length, seed=[cfg.seed, 7, length, unit]
            )
            source = start if item_level else pick_source(trace)
            history = trace.history
            prov_list = trace.cache.lookup(source)

            for name in cfg.algorithms:
                acc = accs[name]
                acc.attempted += 1
                rng = np.random.default_rng([cfg.seed, 11, length, unit, _ALGO_TAG[name]])
                before = provider.access_count
                expansions = 0
                fallback = 0
                if name == "provider":
                    items = prov_list
                elif name == "naive":
                    items = algo.rerank_within_list(prov_list, attrs, acfg)
                    if items is None:
                        acc.infeasible += 1
                        continue
                elif name == "recycle":
                    out = algo.recommend_from_cache(
                        trace.cache, source, attrs, acfg, history, rng
                    )
                    items, expansions, fallback = out.items, out.expansions, out.fallback_items
                elif name == "live":
                    out = algo.recommend_live(
                        provider, source, attrs, acfg, history, rng
                    )
                    items, expansions, fallback = out.items, out.expansions, out.fallback_items
                else:  # oracle
                    scores = provider.full_scores(source)
                    items = algo.rerank_by_scores(scores, attrs, acfg, history, source)
                delta = provider.access_count - before
                if name == "recycle" and delta != 0:
                    acc.overhead_violations += 1

                acc.cost.append(1.0 + delta)
                acc.expansions.append(expansions)
                if fallback:
                    acc.fallback_used += 1
                counts = group_counts(items, attrs)
                low = min(counts.values())
                acc.min_group = low if acc.min_group is None else min(acc.min_group, low)
                if item_level:
                    acc.accuracy.append(label_match_accuracy(items, prep.labels, source))
                else:
                    acc.ndcg.append(ndcg_at_k(items, relevant, cfg.k))
                    acc.recall.append(recall_at_k(items, relevant, cfg.k))
        except InfeasibleError:
            raise StageError(
                "evaluate",
                f"unit={unit} seed={cfg.seed}: infeasible fairness constraint",
            )
        except StageError:
            raise
        except Exception as exc:
            raise StageError("evaluate", f"unit={unit} seed={cfg.seed}: {exc}")

    report = RunReport(
        dataset=cfg.dataset,
        group_rule=cfg.group_rule if cfg.dataset != "adult" else "column:sex",
        walk_len=length,
        n_users=len(prep.units),
        config=cfg.to_dict(),
        seeds={"master": cfg.seed},
        rows=[accs[name].stats() for name in cfg.algorithms],
    )
    return report


def run_experiment(cfg: ExperimentConfig, model=None) -> RunReport:
    """Prepare and evaluate one full run."""
    prep = prepare_experiment(cfg, model=model)
    report = run_prepared(prep)
    log.info("run complete: %d units, %d algorithms", len(prep.units), len(cfg.algorithms))
    return report


def sweep_history_length(
    cfg: ExperimentConfig,
    lengths: list[int],
    model=None,
) -> list[RunReport]:
    """One run per session length over a shared split and provider."""
    if not lengths or any(x < 1 for x in lengths):
        raise StageError("config", "lengths must be non-empty, each >= 1")
    prep = prepare_experiment(cfg, model=model)
    reports = []
    for length in lengths:
        log.info("sweep: session length %d", length)
        reports.append(run_prepared(prep, walk_len=length))
    return reports


# ---------------------------------------------------------------------------
# emission: delimited output plus rendered figures
# ---------------------------------------------------------------------------


def emit_report(
    report: RunReport,
    out_dir: str | Path,
    basename: str = "report",
    figure: bool = True,
) -> dict[str, Path]:
    """Write the CSV and aligned-table views (byte-deterministic for a
    given report), a resolved-config copy, and the rendered figure."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        csv_path = out / f"{basename}.csv"
        csv_path.write_text(report_to_csv(report), encoding="utf-8")
        paths["csv"] = csv_path
        table_path = out / f"{basename}.txt"
        table_path.write_text(report_to_table(report), encoding="utf-8")
        paths["table"] = table_path
        config_path = out / "config.txt"
        config_path.write_text(
            "\n".join(f"{k} = {v}" for k, v in report.config.items()) + "\n",
            encoding="utf-8",
        )
        paths["config"] = config_path
        if figure:
            from .figures import render_report_figure

            paths["figure"] = render_report_figure(report, out / f"{basename}.png")
        return paths
    except OSError as exc:
        raise StageError("report", f"cannot write to {out}: {exc}")


def emit_sweep(
    lengths: list[int],
    reports: list[RunReport],
    out_dir: str | Path,
    algorithm: str = "recycle",
    figure: bool = True,
) -> dict[str, Path]:
    """Write per-metric two-column CSVs, a combined CSV, and the figure."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        rows = [(length, rep.row(algorithm)) for length, rep in zip(lengths, reports)]

        for metric in ("ndcg", "recall"):
            lines = [f"length,{metric}"]
            for length, row in rows:
                value = getattr(row, metric)
                lines.append(f"{length},{'' if value is None else f'{value:.6f}'}")
            p = out / f"sweep_{metric}.csv"
            p.write_text("\n".join(lines) + "\n", encoding="utf-8")
            paths[metric] = p

        lines = ["length,ndcg,recall,accuracy,mean_cost,fallback_rate"]
        for length, row in rows:
            cells = [str(length)]
            for value, fmt in ((row.ndcg, "{:.6f}"), (row.recall, "{:.6f}"),
                               (row.accuracy, "{:.6f}"), (row.mean_cost, "{:.2f}"),
                               (row.fallback_rate, "{:.4f}")):
                cells.append("" if value is None else fmt.format(value))
            lines.append(",".join(cells))
        combined = out / "sweep.csv"
        combined.write_text("\n".join(lines) + "\n", encoding="utf-8")
        paths["combined"] = combined

        if figure:
            from .figures import render_sweep_figure

            paths["figure"] = render_sweep_figure(
                lengths, reports, algorithm, out / "sweep.png"
            )
        return paths
    except OSError as exc:
        raise StageError("report", f"cannot write to {out}: {exc}")
