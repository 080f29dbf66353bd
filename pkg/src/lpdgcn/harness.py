"""Training loops, k-fold evaluation, ablations, sweeps, and report files.

Reproducibility contract: every stochastic choice (fold deal, epoch
shuffles, dropout masks, parameter init) derives from the experiment seed
through sha256, keyed by fold and epoch. JSON summaries exclude wall-clock
fields, so two runs with one config produce byte-identical summaries; the
per-epoch CSV curves carry the timings instead.
"""
from __future__ import annotations

import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .autodiff import Tape, backward
from .data import Dataset, make_batch, stratified_folds
from .model import (ModelConfig, config_for_variant, forward_pass, init_params,
                    named_parameters)
from .optim import AdamState, Hyper, adam_step, lr_at_epoch
from .seeding import derive_seed

LAMBDA_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 2.0, 5.0, 10.0)
DROPOUT_GRID = (0.0, 0.1, 0.3, 0.5, 0.7, 0.9)

ABLATION_VARIANTS = ("full", "nolfr", "nodc", "nogca")

CSV_HEADER = "epoch,loss_total,loss_gc,loss_lfr,train_acc,lr,seconds"


@dataclass(eq=False)
class TrainReport:
    fold_id: int
    seed: int
    label: str
    config: dict
    hyper: dict
    loss_total: list = field(default_factory=list)
    loss_gc: list = field(default_factory=list)
    loss_lfr: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    test_acc: list = field(default_factory=list)
    final_test_acc: float | None = None
    best_test_acc: float | None = None
    alpha_max_dev: float = 0.0
    alpha_min: float = float("inf")
    params: object = None  # final parameters, never serialized


@dataclass(eq=False)
class CVReport:
    label: str
    k: int
    seed: int
    fold_sizes: list
    fold_accuracies: list
    best_accuracies: list
    mean: float
    std: float
    alpha_max_dev: float
    alpha_min: float
    config: dict
    hyper: dict
    fold_reports: list = field(default_factory=list)  # never serialized


def _alpha_stats(art) -> tuple:
    if art.alpha is None:
        return 0.0, float("inf")
    av = np.asarray(art.alpha.values, dtype=np.float64)
    return float(np.abs(av.sum(axis=1) - 1.0).max()), float(av.min())


def evaluate(graphs: list, params, config: ModelConfig,
             eval_batch_size: int = 64) -> tuple:
    """Eval-mode accuracy and per-graph mean losses over graphs, plus
    attention-weight diagnostics (max per-graph deviation of sum(alpha)
    from 1, min single weight)."""
    correct = 0
    sums = {"total": 0.0, "gc": 0.0, "lfr": 0.0}
    dev, amin = 0.0, float("inf")
    for lo in range(0, len(graphs), eval_batch_size):
        batch = make_batch(graphs[lo:lo + eval_batch_size])
        art = forward_pass(batch, params, config, mode="eval")
        pred = np.argmax(art.class_logits.values, axis=1)
        correct += int((pred == batch.labels).sum())
        sums["total"] += float(art.loss.values)
        sums["gc"] += float(art.loss_gc.values)
        if art.loss_lfr is not None:
            sums["lfr"] += float(art.loss_lfr.values)
        d, m = _alpha_stats(art)
        dev, amin = max(dev, d), min(amin, m)
    losses = {k: v / len(graphs) for k, v in sums.items()}
    return correct / len(graphs), losses, dev, amin


def _epoch_batches(train_idx: np.ndarray, batch_size: int,
                   rng: np.random.Generator) -> list:
    order = train_idx[rng.permutation(len(train_idx))]
    chunks = [order[lo:lo + batch_size] for lo in range(0, len(order), batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) < 2:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def train_fold(ds: Dataset, train_idx, test_idx, config: ModelConfig,
               hyper: Hyper, fold_id: int = 0, label: str = "run") -> TrainReport:
    train_idx = np.asarray(sorted(train_idx), dtype=np.int64)
    test_idx = np.asarray(sorted(test_idx), dtype=np.int64)
    if np.intersect1d(train_idx, test_idx).size:
        raise ValueError("train and test indices overlap")
    if len(train_idx) < 2:
        raise ValueError("need at least 2 training graphs")
    # the loop owns the regularization knobs; mirror them into the model config
    cfg = replace(config, lam=hyper.lam, dropout_p=hyper.dropout_p)
    params = init_params(cfg, derive_seed(hyper.seed, "init", fold_id))
    named = named_parameters(params)
    adam = AdamState.for_params(named)
    report = TrainReport(fold_id=fold_id, seed=hyper.seed, label=label,
                         config=asdict(cfg), hyper=asdict(hyper))
    train_graphs = [ds.graphs[i] for i in train_idx]
    test_graphs = [ds.graphs[i] for i in test_idx]
    t0 = time.perf_counter()
    for epoch in range(hyper.epochs):
        lr = lr_at_epoch(hyper, epoch)
        shuffle_rng = np.random.default_rng(derive_seed(hyper.seed, "shuffle",
                                                        fold_id, epoch))
        drop_rng = np.random.default_rng(derive_seed(hyper.seed, "dropout",
                                                     fold_id, epoch))
        for chunk in _epoch_batches(train_idx, hyper.batch_size, shuffle_rng):
            batch = make_batch([ds.graphs[i] for i in chunk])
            with Tape() as tape:
                art = forward_pass(batch, params, cfg, mode="train", rng=drop_rng)
            grads = backward(tape, art.loss)
            adam_step(named, grads, adam, lr)
            d, m = _alpha_stats(art)
            report.alpha_max_dev = max(report.alpha_max_dev, d)
            report.alpha_min = min(report.alpha_min, m)
        # curves record the end-of-epoch eval-mode state: deterministic
        # given the parameters, free of dropout-mask noise
        acc, losses, d, m = evaluate(train_graphs, params, cfg)
        report.loss_total.append(losses["total"])
        report.loss_gc.append(losses["gc"])
        report.loss_lfr.append(losses["lfr"])
        report.lr.append(lr)
        report.train_acc.append(acc)
        report.alpha_max_dev = max(report.alpha_max_dev, d)
        report.alpha_min = min(report.alpha_min, m)
        if len(test_graphs):
            acc, _, d, m = evaluate(test_graphs, params, cfg)
            report.test_acc.append(acc)
            report.alpha_max_dev = max(report.alpha_max_dev, d)
            report.alpha_min = min(report.alpha_min, m)
        report.seconds.append(time.perf_counter() - t0)
    if report.test_acc:
        report.final_test_acc = report.test_acc[-1]
        report.best_test_acc = max(report.test_acc)
    report.params = params
    return report


def _fold_worker(payload):
    ds, config, hyper, fold_id, train_idx, test_idx, label = payload
    rep = train_fold(ds, train_idx, test_idx, config, hyper,
                     fold_id=fold_id, label=label)
    rep.params = None  # keep worker results light
    return fold_id, rep


def cross_validate(ds: Dataset, config: ModelConfig, hyper: Hyper,
                   k: int = 10, jobs: int = 1, label: str = "full") -> CVReport:
    plan = stratified_folds(ds, k, hyper.seed)
    all_idx = set(range(len(ds.graphs)))
    payloads = []
    for fold_id, test in enumerate(plan.folds):
        train = sorted(all_idx - set(test))
        payloads.append((ds, config, hyper, fold_id, train, test, label))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_fold_worker, payloads))
        results.sort(key=lambda r: r[0])
        reports = [rep for _, rep in results]
    else:
        reports = [train_fold(ds, p[4], p[5], config, hyper, fold_id=p[3],
                              label=label) for p in payloads]
    accs = [r.final_test_acc for r in reports]
    return CVReport(
        label=label, k=k, seed=hyper.seed,
        fold_sizes=[len(f) for f in plan.folds],
        fold_accuracies=accs,
        best_accuracies=[r.best_test_acc for r in reports],
        mean=float(np.mean(accs)),
        std=float(np.std(accs, ddof=1)),
        alpha_max_dev=max(r.alpha_max_dev for r in reports),
        alpha_min=min(r.alpha_min for r in reports),
        config=asdict(replace(config, lam=hyper.lam, dropout_p=hyper.dropout_p)),
        hyper=asdict(hyper),
        fold_reports=reports,
    )


def ablate(ds: Dataset, config: ModelConfig, hyper: Hyper,
           k: int = 10, jobs: int = 1) -> dict:
    """Cross-validate the full model and the three single-ingredient
    removals under one shared fold plan and seed."""
    out = {}
    for variant in ABLATION_VARIANTS:
        out[variant] = cross_validate(ds, config_for_variant(config, variant),
                                      hyper, k=k, jobs=jobs, label=variant)
    return out


def sweep(ds: Dataset, config: ModelConfig, hyper: Hyper, param: str,
          values=None, k: int = 10, jobs: int = 1) -> list:
    if param == "lam":
        values = LAMBDA_GRID if values is None else values
        make = lambda v: replace(hyper, lam=float(v))
    elif param == "dropout":
        values = DROPOUT_GRID if values is None else values
        make = lambda v: replace(hyper, dropout_p=float(v))
    else:
        raise ValueError(f"unknown sweep parameter {param!r}")
    out = []
    for v in values:
        label = f"{param}={float(v):g}"
        out.append((float(v), cross_validate(ds, config, make(v),
                                             k=k, jobs=jobs, label=label)))
    return out


# ---------------------------------------------------------------------------
# report files


def cv_summary(report: CVReport) -> dict:
    """JSON-safe summary; no wall-clock fields, so reruns are byte-identical."""
    return {
        "label": report.label,
        "k": report.k,
        "seed": report.seed,
        "fold_sizes": list(report.fold_sizes),
        "fold_accuracies": [float(a) for a in report.fold_accuracies],
        "best_accuracies": [float(a) for a in report.best_accuracies],
        "mean_accuracy": float(report.mean),
        "std_accuracy": float(report.std),
        "alpha_max_dev": float(report.alpha_max_dev),
        "alpha_min": (None if report.alpha_min == float("inf")
                      else float(report.alpha_min)),
        "config": report.config,
        "hyper": report.hyper,
    }


def train_summary(report: TrainReport) -> dict:
    return {
        "label": report.label,
        "fold_id": report.fold_id,
        "seed": report.seed,
        "epochs": len(report.loss_total),
        "loss_total": report.loss_total,
        "loss_gc": report.loss_gc,
        "loss_lfr": report.loss_lfr,
        "train_acc": report.train_acc,
        "lr": report.lr,
        "test_acc": report.test_acc,
        "final_train_acc": report.train_acc[-1] if report.train_acc else None,
        "final_test_acc": report.final_test_acc,
        "best_test_acc": report.best_test_acc,
        "alpha_max_dev": float(report.alpha_max_dev),
        "alpha_min": (None if report.alpha_min == float("inf")
                      else float(report.alpha_min)),
        "config": report.config,
        "hyper": report.hyper,
    }


def write_json(obj, path: str):
    with open(path, "wb") as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=2).encode() + b"\n")


def write_train_csv(report: TrainReport, path: str):
    rows = [CSV_HEADER]
    for e in range(len(report.loss_total)):
        rows.append(",".join([
            str(e),
            repr(report.loss_total[e]),
            repr(report.loss_gc[e]),
            repr(report.loss_lfr[e]),
            repr(report.train_acc[e]),
            repr(report.lr[e]),
            f"{report.seconds[e]:.6f}",
        ]))
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")


def format_results_table(rows: list, title: str = "accuracy") -> str:
    """rows: (label, mean, std) triples; accuracies printed as percent."""
    width = max([len(r[0]) for r in rows] + [len("method")])
    lines = [f"{'method'.ljust(width)}  {title}"]
    for label, mean, std in rows:
        lines.append(f"{label.ljust(width)}  {100 * mean:.1f}+-{100 * std:.1f}")
    return "\n".join(lines) + "\n"


def emit_train_report(out_dir: str, report: TrainReport):
    os.makedirs(out_dir, exist_ok=True)
    write_train_csv(report, os.path.join(out_dir, "train.csv"))
    write_json(train_summary(report), os.path.join(out_dir, "summary.json"))
    final = report.train_acc[-1] if report.train_acc else float("nan")
    with open(os.path.join(out_dir, "results.txt"), "w") as fh:
        fh.write(f"label: {report.label}\nfinal_train_acc: {final:.4f}\n")


def emit_cv_report(out_dir: str, report: CVReport):
    curves = os.path.join(out_dir, "curves")
    os.makedirs(curves, exist_ok=True)
    for rep in report.fold_reports:
        write_train_csv(rep, os.path.join(curves, f"fold_{rep.fold_id}.csv"))
    write_json(cv_summary(report), os.path.join(out_dir, "summary.json"))
    with open(os.path.join(out_dir, "results.txt"), "w") as fh:
        fh.write(format_results_table([(report.label, report.mean, report.std)]))


def emit_ablation_report(out_dir: str, reports: dict):
    os.makedirs(out_dir, exist_ok=True)
    for variant, rep in reports.items():
        curves = os.path.join(out_dir, variant)
        os.makedirs(curves, exist_ok=True)
        for fr in rep.fold_reports:
            write_train_csv(fr, os.path.join(curves, f"fold_{fr.fold_id}.csv"))
    write_json({v: cv_summary(r) for v, r in reports.items()},
               os.path.join(out_dir, "summary.json"))
    order = [v for v in ("nolfr", "nodc", "nogca", "full") if v in reports]
    rows = [(v, reports[v].mean, reports[v].std) for v in order]
    with open(os.path.join(out_dir, "results.txt"), "w") as fh:
        fh.write(format_results_table(rows))


def emit_sweep_report(out_dir: str, param: str, points: list):
    os.makedirs(out_dir, exist_ok=True)
    for value, rep in points:
        curves = os.path.join(out_dir, f"{param}_{value:g}")
        os.makedirs(curves, exist_ok=True)
        for fr in rep.fold_reports:
            write_train_csv(fr, os.path.join(curves, f"fold_{fr.fold_id}.csv"))
    write_json({f"{value:g}": cv_summary(rep) for value, rep in points},
               os.path.join(out_dir, "summary.json"))
    lines = [f"{param},mean_accuracy,std_accuracy"]
    for value, rep in points:
        lines.append(f"{value:g},{repr(rep.mean)},{repr(rep.std)}")
    with open(os.path.join(out_dir, "sweep.csv"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(os.path.join(out_dir, "results.txt"), "w") as fh:
        fh.write(format_results_table([(f"{param}={v:g}", r.mean, r.std)
                                       for v, r in points]))
