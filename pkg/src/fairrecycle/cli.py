"""Command-line interface.

Subcommands: prepare-data, train-provider, run, sweep, report. All runs
are seeded; outputs are delimited text plus rendered figures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import bench, datasets as ds, provider as prov, synth
from .bench import ExperimentConfig, StageError

log = logging.getLogger(__name__)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", default="movielens",
                   choices=("movielens", "lastfm", "adult", "snapshot"))
    p.add_argument("--data-dir", default="data", help="directory with the raw files")
    p.add_argument("--group-rule", default="popularity",
                   help="oldness | popularity | year:Y | count:C | column:NAME")
    p.add_argument("--k", type=int, default=10, help="recommendation list length")
    p.add_argument("--tau", type=int, default=5, help="per-group minimum (0 disables)")
    p.add_argument("--lmax", type=int, default=50, help="search expansion cap")
    p.add_argument("--walk-len", type=int, default=100, help="session length")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--algorithms", default=",".join(bench.KNOWN_ALGORITHMS))
    p.add_argument("--sample-users", type=int, default=0,
                   help="evaluate a random sample of this size (0 = everyone)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--config", default=None, help="key = value config file; flags override")
    p.add_argument("--epochs", type=int, default=None, help="override provider training epochs")
    p.add_argument("--no-figure", action="store_true", help="skip figure rendering")


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig()
    cfg = replace(
        cfg,
        dataset=args.dataset,
        data_dir=args.data_dir,
        group_rule=args.group_rule,
        provider_kind="knn" if args.dataset == "adult" else "bpr",
        k=args.k,
        tau=args.tau,
        l_max=args.lmax,
        walk_len=args.walk_len,
        seed=args.seed,
        sample_users=args.sample_users,
        algorithms=tuple(x.strip() for x in args.algorithms.split(",") if x.strip()),
    )
    if args.epochs is not None:
        cfg = replace(cfg, bpr=replace(cfg.bpr, epochs=args.epochs))
    cfg.validate()
    return cfg


def cmd_prepare_data(args) -> int:
    data_dir = Path(args.data_dir)
    if args.synthesize:
        if args.dataset == "movielens":
            synth.generate_movielens_like(data_dir, seed=args.seed)
        elif args.dataset == "adult":
            synth.generate_adult_like(data_dir / "adult.data", seed=args.seed)
        elif args.dataset == "lastfm":
            synth.generate_lastfm_like(data_dir, seed=args.seed)
        else:
            raise StageError("datasets", f"cannot synthesize dataset {args.dataset!r}")
        print(f"synthesized {args.dataset} files in {data_dir}")

    rule = ds.GroupRule.parse(args.group_rule)
    if args.dataset == "movielens":
        inter, attrs = ds.load_movielens(data_dir, rule)
    elif args.dataset == "lastfm":
        inter, attrs = ds.load_lastfm(data_dir, rule)
    elif args.dataset == "adult":
        features, attrs, labels = ds.load_adult(data_dir / "adult.data")
        print(f"loaded {features.n_items} records; groups: {attrs.labels}")
        return 0
    else:
        raise StageError("datasets", "snapshot input needs no preparation")
    out = Path(args.out)
    ds.write_snapshot(inter, attrs, out)
    print(
        f"loaded {inter.n_users} users, {inter.n_items} items, "
        f"{len(inter)} interactions; snapshot written to {out}"
    )
    return 0


def cmd_train_provider(args) -> int:
    cfg = _config_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.dataset == "adult":
        features, _, _ = ds.load_adult(Path(args.data_dir) / "adult.data")
        model = prov.fit_knn(features)
    else:
        rule = ds.GroupRule.parse(args.group_rule)
        if args.dataset == "movielens":
            inter, _ = ds.load_movielens(args.data_dir, rule)
        elif args.dataset == "lastfm":
            inter, _ = ds.load_lastfm(args.data_dir, rule)
        else:
            inter, _ = ds.read_snapshot(args.data_dir)
        train, _ = ds.split_train_test(
            inter, ds.SplitSpec(test_fraction=cfg.test_fraction, seed=cfg.seed)
        )
        model = prov.train_bpr(train, replace(cfg.bpr, seed=cfg.seed))
    path = out / "provider_model.txt"
    prov.save_model(model, path)
    print(f"provider model written to {path}")
    return 0


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    model = prov.load_model(args.provider_snapshot) if args.provider_snapshot else None
    report = bench.run_experiment(cfg, model=model)
    paths = bench.emit_report(report, args.out, figure=not args.no_figure)
    print((Path(paths["table"])).read_text(encoding="utf-8"))
    print(f"outputs written to {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    lengths = [int(x) for x in args.lengths.split(",") if x.strip()]
    model = prov.load_model(args.provider_snapshot) if args.provider_snapshot else None
    reports = bench.sweep_history_length(cfg, lengths, model=model)
    out = Path(args.out)
    for length, rep in zip(lengths, reports):
        bench.emit_report(rep, out / f"len{length}", figure=False)
    paths = bench.emit_sweep(lengths, reports, out, figure=not args.no_figure)
    print(f"sweep over lengths {lengths} written to {out}")
    for length, rep in zip(lengths, reports):
        row = rep.row("recycle")
        ndcg = f"{row.ndcg:.4f}" if row.ndcg is not None else "-"
        print(f"  length {length:4d}: ndcg {ndcg}")
    return 0


def cmd_report(args) -> int:
    from .figures import render_report_figure
    from .metrics import AlgoStats, RunReport, report_to_table

    rows = []
    lines = Path(args.input).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    for line in lines[1:]:
        if not line.strip():
            continue
        cells = dict(zip(header, line.split(",")))
        rows.append(AlgoStats(
            algorithm=cells["algorithm"],
            ndcg=float(cells["ndcg"]) if cells.get("ndcg") else None,
            recall=float(cells["recall"]) if cells.get("recall") else None,
            accuracy=float(cells["accuracy"]) if cells.get("accuracy") else None,
            mean_cost=float(cells["mean_cost"]),
            median_cost=0.0,
            max_cost=0.0,
            min_group_count=int(cells["min_group_count"]),
            fallback_rate=float(cells["fallback_rate"]),
            infeasible_rate=float(cells["infeasible_rate"]),
        ))
    report = RunReport(dataset=args.dataset, group_rule="-", walk_len=0,
                       n_users=0, rows=rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = report_to_table(report)
    (out / "report.txt").write_text(table, encoding="utf-8")
    if not args.no_figure:
        render_report_figure(report, out / "report.png")
    print(table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairrecycle",
        description="Group-constrained re-ranking of cached recommendation "
                    "lists, with a reproducible benchmark harness.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare-data", help="load raw files and write a text snapshot")
    _add_common(p)
    p.add_argument("--synthesize", action="store_true",
                   help="first generate seeded synthetic raw files in --data-dir")
    p.set_defaults(func=cmd_prepare_data)

    p = sub.add_parser("train-provider", help="train the provider model and snapshot it")
    _add_common(p)
    p.set_defaults(func=cmd_train_provider)

    p = sub.add_parser("run", help="run one full experiment")
    _add_common(p)
    p.add_argument("--provider-snapshot", default=None,
                   help="reuse a trained provider model instead of retraining")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run the session-length sweep")
    _add_common(p)
    p.add_argument("--lengths", default="10,25,50,100")
    p.add_argument("--provider-snapshot", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="re-render table and figure from a report CSV")
    p.add_argument("--input", required=True, help="path to a report.csv")
    p.add_argument("--out", default="out")
    p.add_argument("--dataset", default="-")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ds.DataError, ValueError, OSError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
