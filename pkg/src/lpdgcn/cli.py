"""Command-line front end.

Every experiment subcommand takes an optional key=value config file plus
repeatable -o key=value overrides, prints the effective configuration,
then runs. Exit codes: 0 success, 1 runtime failure, 2 usage errors.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .config import (RunConfig, config_lines, load_dataset, load_run_config,
                     to_hyper, to_model_config)
from .data import make_batch, one_hot_features
from .gradcheck import finite_difference_check
from .harness import (ablate, cross_validate, emit_ablation_report,
                      emit_cv_report, emit_sweep_report, emit_train_report,
                      format_results_table, sweep, train_fold)
from .model import forward_pass, init_params, named_parameters
from .stats import rank_sum_test
from .synth import fixture_pair


def _add_common(sub):
    sub.add_argument("--config", default=None, help="key=value config file")
    sub.add_argument("-o", "--override", action="append", default=[],
                     metavar="KEY=VALUE", help="override a config key (repeatable)")


def _effective(args, defaults: RunConfig | None = None) -> RunConfig:
    cfg = load_run_config(args.config, args.override, defaults)
    print("effective config:")
    for line in config_lines(cfg):
        print(f"  {line}")
    return cfg


def cmd_inspect(args) -> int:
    cfg = _effective(args)
    ds = load_dataset(cfg)
    counts = ", ".join(str(c) for c in ds.class_counts())
    nodes = [g.node_count for g in ds.graphs]
    edges = [g.edge_count for g in ds.graphs]
    print(f"dataset: {ds.name}")
    print(f"graphs: {len(ds.graphs)}")
    print(f"classes: {ds.num_classes} (counts: {counts})")
    print(f"node labels: {ds.num_node_labels}")
    print(f"feature width: {ds.feature_dim}")
    print(f"avg nodes: {np.mean(nodes):.2f}")
    print(f"avg edges: {np.mean(edges):.2f}")
    return 0


def cmd_gradcheck(args) -> int:
    defaults = RunConfig(hidden=8, readout_dim=8, dropout=0.0, dtype="float64")
    cfg = _effective(args, defaults)
    ds = one_hot_features(fixture_pair())
    batch = make_batch(ds.graphs)
    mc = to_model_config(cfg, ds)
    params = init_params(mc, cfg.seed)
    named = named_parameters(params)
    # settle the normalizer running statistics, then check the eval path,
    # where every parameter direction is live (train-mode normalization
    # cancels constant shifts exactly, which starves central differences)
    for _ in range(10):
        forward_pass(batch, params, mc, mode="train")

    def f():
        return forward_pass(batch, params, mc, mode="eval").loss

    err = finite_difference_check(f, [t for _, t in named])
    print(f"max relative gradient error over {len(named)} parameter groups: {err:.3e}")
    if err <= 1e-4:
        print("gradcheck: OK")
        return 0
    print("gradcheck: FAILED (tolerance 1e-4)")
    return 1


def cmd_train(args) -> int:
    cfg = _effective(args)
    ds = load_dataset(cfg)
    report = train_fold(ds, list(range(len(ds.graphs))), [], to_model_config(cfg, ds),
                        to_hyper(cfg), label=cfg.variant)
    emit_train_report(cfg.out_dir, report)
    print(f"final train accuracy: {report.train_acc[-1]:.4f}")
    print(f"reports written to {cfg.out_dir}")
    return 0


def cmd_cv(args) -> int:
    cfg = _effective(args)
    ds = load_dataset(cfg)
    report = cross_validate(ds, to_model_config(cfg, ds), to_hyper(cfg),
                            k=cfg.folds, jobs=cfg.jobs, label=cfg.variant)
    emit_cv_report(cfg.out_dir, report)
    print(format_results_table([(report.label, report.mean, report.std)]), end="")
    print(f"reports written to {cfg.out_dir}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _effective(args)
    ds = load_dataset(cfg)
    reports = ablate(ds, to_model_config(cfg, ds), to_hyper(cfg),
                     k=cfg.folds, jobs=cfg.jobs)
    emit_ablation_report(cfg.out_dir, reports)
    rows = [(v, r.mean, r.std) for v, r in reports.items()]
    print(format_results_table(rows), end="")
    print(f"reports written to {cfg.out_dir}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _effective(args)
    ds = load_dataset(cfg)
    points = sweep(ds, to_model_config(cfg, ds), to_hyper(cfg), args.param,
                   k=cfg.folds, jobs=cfg.jobs)
    emit_sweep_report(cfg.out_dir, args.param, points)
    print(format_results_table([(f"{args.param}={v:g}", r.mean, r.std)
                                for v, r in points]), end="")
    print(f"reports written to {cfg.out_dir}")
    return 0


def cmd_compare(args) -> int:
    samples = []
    for path in (args.summary_a, args.summary_b):
        with open(path) as fh:
            obj = json.load(fh)
        if "fold_accuracies" not in obj:
            raise ValueError(f"{path}: not a cross-validation summary "
                             "(missing fold_accuracies)")
        samples.append([float(v) for v in obj["fold_accuracies"]])
    p = rank_sum_test(samples[0], samples[1])
    print(f"sample a: n={len(samples[0])}, mean={np.mean(samples[0]):.4f}")
    print(f"sample b: n={len(samples[1])}, mean={np.mean(samples[1]):.4f}")
    print(f"rank-sum p-value: {p:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpdgcn",
        description="Graph classification experiments: dense connections, "
                    "global context, reconstruction regularization.")
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("inspect", help="print dataset statistics")
    _add_common(sub)
    sub.set_defaults(func=cmd_inspect)

    sub = subs.add_parser("gradcheck",
                          help="verify model gradients on a tiny fixture")
    _add_common(sub)
    sub.set_defaults(func=cmd_gradcheck)

    sub = subs.add_parser("train", help="train once on the full dataset")
    _add_common(sub)
    sub.set_defaults(func=cmd_train)

    sub = subs.add_parser("cv", help="stratified k-fold cross-validation")
    _add_common(sub)
    sub.set_defaults(func=cmd_cv)

    sub = subs.add_parser("ablate",
                          help="cross-validate the full model and 3 ablations")
    _add_common(sub)
    sub.set_defaults(func=cmd_ablate)

    sub = subs.add_parser("sweep", help="cross-validate along a parameter grid")
    sub.add_argument("param", choices=("lam", "dropout"))
    _add_common(sub)
    sub.set_defaults(func=cmd_sweep)

    sub = subs.add_parser("compare",
                          help="rank-sum test between two cv summary.json files")
    sub.add_argument("summary_a")
    sub.add_argument("summary_b")
    sub.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # uniform one-line diagnostics, exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
