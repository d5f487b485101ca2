"""Command-line front end.

Subcommands: ``gen-synthetic`` (write a synthetic corpus), ``train`` (batch
fit and convergence trace), ``active-run`` (active-learning experiments over
folds and seed repetitions, with per-run and aggregated CSV output),
``evaluate`` (score saved weights on a labeled set) and ``verify`` (run the
brute-force self-checks).

Options may come from a flat key=value config file (``--config``); explicit
command-line flags win over the file, the file wins over built-in defaults,
and unknown keys in the file are rejected.  Exit codes: 0 success, 1
validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import bruteforce
from .active_loop import RunConfig, run, write_queries
from .data import (
    cross_validation_splits,
    dataset_from_truth,
    generate_synthetic,
    load_dataset,
    load_truth,
    mask_labels,
    select_bags,
    write_features,
    write_labels,
    Bag,
)
from .metrics import aggregate_runs, evaluate, write_aggregate, write_curve
from .model import load_weights, save_weights
from .training import TrainConfig, full_gd, write_trace

REQUIRED = object()

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_bool(text: str, key: str) -> bool:
    low = text.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ValueError(f"config key {key!r}: expected a boolean, got {text!r}")


def read_config(path) -> dict[str, str]:
    pairs: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key=value'")
            key, value = line.split("=", 1)
            key = key.strip()
            if key in pairs:
                raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
            pairs[key] = value.strip()
    return pairs


def _register(parser: argparse.ArgumentParser, spec: dict) -> None:
    parser.add_argument("--config", default=None, help="flat key=value config file")
    for key, (typ, _default, help_) in spec.items():
        flag = "--" + key.replace("_", "-")
        dest = "lam" if key == "lambda" else key
        if typ is bool:
            parser.add_argument(flag, dest=dest, action="store_const", const=True,
                                default=None, help=help_)
        else:
            parser.add_argument(flag, dest=dest, type=typ, default=None, help=help_)


def _resolve(args, spec: dict) -> dict:
    file_pairs = read_config(args.config) if args.config else {}
    unknown = sorted(set(file_pairs) - set(spec))
    if unknown:
        raise ValueError(f"unknown config key {unknown[0]!r}")
    out = {}
    for key, (typ, default, _help) in spec.items():
        dest = "lam" if key == "lambda" else key
        value = getattr(args, dest)
        if value is None and key in file_pairs:
            raw = file_pairs[key]
            value = _parse_bool(raw, key) if typ is bool else typ(raw)
        if value is None:
            value = default
        if value is REQUIRED:
            raise ValueError(f"missing required option --{key.replace('_', '-')}")
        out[dest] = value
    return out


def _derived_seed(master: int, *path: int) -> int:
    return int(np.random.SeedSequence([master, *path]).generate_state(1)[0])


def _standardize(train_bags: list[Bag], *bag_lists: list[Bag]):
    stacked = np.vstack([b.instances for b in train_bags])
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    std = np.where(std > 0, std, 1.0)

    def apply(bags):
        return [Bag(id=b.id, instances=(b.instances - mean) / std) for b in bags]

    return (mean, std), [apply(bags) for bags in (train_bags, *bag_lists)]


# -- gen-synthetic ------------------------------------------------------------

GEN_SPEC = {
    "bags": (int, 50, "number of bags"),
    "classes": (int, 4, "number of classes"),
    "dim": (int, 8, "feature dimension"),
    "min_bag_size": (int, 2, "smallest bag size"),
    "max_bag_size": (int, 5, "largest bag size"),
    "separation": (float, 2.0, "scale of the generating weights"),
    "seed": (int, 0, "generator seed"),
    "out": (str, REQUIRED, "output directory"),
}


def cmd_gen(args) -> int:
    cfg = _resolve(args, GEN_SPEC)
    sample = generate_synthetic(
        cfg["bags"], cfg["classes"], cfg["dim"],
        bag_size_range=(cfg["min_bag_size"], cfg["max_bag_size"]),
        separation=cfg["separation"], seed=cfg["seed"],
    )
    os.makedirs(cfg["out"], exist_ok=True)
    write_features(os.path.join(cfg["out"], "features.csv"), sample.bags)
    write_labels(os.path.join(cfg["out"], "labels.csv"), sample.truth.ids, sample.truth.labels)
    n_inst = sum(b.size for b in sample.bags)
    print(f"wrote {cfg['bags']} bags ({n_inst} instances, d={cfg['dim']}, C={cfg['classes']}) to {cfg['out']}")
    return 0


# -- train ---------------------------------------------------------------------

TRAIN_SPEC = {
    "features": (str, REQUIRED, "features file (bag_id,f1,...,fd per instance)"),
    "labels": (str, REQUIRED, "labels file (bag_id,y1,...,yC with y in {-1,0,1})"),
    "lambda": (float, 1e-3, "quadratic penalty weight"),
    "max_epochs": (int, 2000, "epoch cap"),
    "grad_tol": (float, 1e-6, "gradient-norm stopping tolerance"),
    "standardize": (bool, False, "z-score features before training"),
    "out": (str, REQUIRED, "output directory"),
}


def cmd_train(args) -> int:
    cfg = _resolve(args, TRAIN_SPEC)
    ds = load_dataset(cfg["features"], cfg["labels"])
    os.makedirs(cfg["out"], exist_ok=True)
    if cfg["standardize"]:
        (mean, std), [bags] = _standardize(ds.bags)
        ds = type(ds)(bags, ds.labels)
        with open(os.path.join(cfg["out"], "scaling.csv"), "w", encoding="utf-8") as fh:
            fh.write("feature,mean,std\n")
            for j, (m, s) in enumerate(zip(mean, std), start=1):
                fh.write(f"{j},{float(m)!r},{float(s)!r}\n")
    tcfg = TrainConfig(lam=cfg["lam"], max_epochs=cfg["max_epochs"], grad_tol=cfg["grad_tol"])
    w, trace = full_gd(ds, tcfg, np.zeros((ds.num_classes, ds.feature_dim)))
    save_weights(os.path.join(cfg["out"], "weights.csv"), w)
    write_trace(os.path.join(cfg["out"], "trace.csv"), trace)
    epoch, obj, gnorm = trace[-1]
    print(f"trained for {epoch} epochs: objective {obj:.6f}, gradient norm {gnorm:.3e}")
    return 0


# -- active-run -----------------------------------------------------------------

ACTIVE_SPEC = {
    "features": (str, None, "features file (omit to generate synthetic data)"),
    "labels": (str, None, "ground-truth labels file with values in {0,1}"),
    "bags": (int, 50, "synthetic: number of bags"),
    "classes": (int, 4, "synthetic: number of classes"),
    "dim": (int, 8, "synthetic: feature dimension"),
    "min_bag_size": (int, 2, "synthetic: smallest bag size"),
    "max_bag_size": (int, 5, "synthetic: largest bag size"),
    "separation": (float, 2.0, "synthetic: scale of the generating weights"),
    "criterion": (str, "egl-pair", "egl-pair, unc-pair, rand-pair, bag-then-label or bag-all"),
    "mode": (str, "pair-sgd", "model update per query: full-gd, pair-sgd or bag-sgd"),
    "queries": (int, 0, "query budget per run"),
    "folds": (int, 2, "cross-validation folds (>= 2)"),
    "seeds": (int, 1, "seed repetitions per fold"),
    "lambda": (float, 1e-3, "quadratic penalty weight"),
    "c_prime": (float, 1.0, "SGD step-size numerator"),
    "c_dprime": (float, 1.0, "SGD step-size offset"),
    "threshold": (float, 0.5, "prediction threshold"),
    "k": (float, 1.0, "whole-bag cost divisor (bag query costs C/k)"),
    "init_fraction": (float, 0.05, "fraction of training bags fully labeled at start"),
    "eval_every": (float, 5.0, "cost units between metric snapshots"),
    "steps_per_query": (int, 1, "SGD steps per query"),
    "max_epochs": (int, 2000, "epoch cap for full-GD (re)training"),
    "grad_tol": (float, 1e-6, "gradient-norm stopping tolerance"),
    "standardize": (bool, False, "z-score features per fold"),
    "subset_accuracy": (bool, False, "also record exact-match accuracy"),
    "seed": (int, 0, "master seed"),
    "out": (str, REQUIRED, "output directory"),
}


def cmd_active_run(args) -> int:
    cfg = _resolve(args, ACTIVE_SPEC)
    if (cfg["features"] is None) != (cfg["labels"] is None):
        raise ValueError("give both --features and --labels, or neither for synthetic data")
    if cfg["features"] is not None:
        bags, truth = load_truth(cfg["features"], cfg["labels"])
    else:
        sample = generate_synthetic(
            cfg["bags"], cfg["classes"], cfg["dim"],
            bag_size_range=(cfg["min_bag_size"], cfg["max_bag_size"]),
            separation=cfg["separation"], seed=_derived_seed(cfg["seed"], 0, 0, 9),
        )
        bags, truth = sample.bags, sample.truth

    tcfg = TrainConfig(lam=cfg["lam"], c_prime=cfg["c_prime"], c_dprime=cfg["c_dprime"],
                       max_epochs=cfg["max_epochs"], grad_tol=cfg["grad_tol"],
                       steps_per_query=cfg["steps_per_query"])
    os.makedirs(cfg["out"], exist_ok=True)
    splits = cross_validation_splits(truth, cfg["folds"], seed=_derived_seed(cfg["seed"], 0, 0, 1))

    curves = []
    for fold, (train_ids, test_ids) in enumerate(splits):
        train_bags, train_truth = select_bags(bags, truth, train_ids)
        test_bags, test_truth = select_bags(bags, truth, test_ids)
        if cfg["standardize"]:
            _, [train_bags, test_bags] = _standardize(train_bags, test_bags)
        test_ds = dataset_from_truth(test_bags, test_truth)
        for rep in range(cfg["seeds"]):
            train_ds = mask_labels(train_truth, train_bags, fraction=cfg["init_fraction"],
                                   seed=_derived_seed(cfg["seed"], fold, rep, 2))
            rcfg = RunConfig(criterion=cfg["criterion"], mode=cfg["mode"], queries=cfg["queries"],
                             eval_every=cfg["eval_every"], threshold=cfg["threshold"], k=cfg["k"],
                             seed=_derived_seed(cfg["seed"], fold, rep, 3), train=tcfg,
                             include_subset_accuracy=cfg["subset_accuracy"])
            result = run(train_ds, train_truth, test_ds, rcfg)
            write_queries(os.path.join(cfg["out"], f"queries_f{fold}_s{rep}.csv"), result.records)
            write_curve(os.path.join(cfg["out"], f"curves_f{fold}_s{rep}.csv"), result.curve)
            curves.append(result.curve)

    costs, means, stds = aggregate_runs(curves)
    write_aggregate(os.path.join(cfg["out"], "curves_mean.csv"), costs, means, stds)
    print(f"completed {len(curves)} runs ({cfg['folds']} folds x {cfg['seeds']} seeds); "
          f"aggregate in {os.path.join(cfg['out'], 'curves_mean.csv')}")
    return 0


# -- evaluate -------------------------------------------------------------------

EVAL_SPEC = {
    "features": (str, REQUIRED, "features file"),
    "labels": (str, REQUIRED, "full labels file with values in {0,1}"),
    "weights": (str, REQUIRED, "saved weight matrix"),
    "scaling": (str, None, "scaling.csv written by train --standardize"),
    "threshold": (float, 0.5, "prediction threshold"),
    "subset_accuracy": (bool, False, "also report exact-match accuracy"),
    "out": (str, None, "optional CSV to write the metric row to"),
}


def _load_scaling(path):
    mean, std = [], []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("feature,"):
            raise ValueError(f"{path}: not a scaling file")
        for line in fh:
            _, m, s = line.strip().split(",")
            mean.append(float(m))
            std.append(float(s))
    return np.array(mean), np.array(std)


def cmd_evaluate(args) -> int:
    cfg = _resolve(args, EVAL_SPEC)
    bags, truth = load_truth(cfg["features"], cfg["labels"])
    if cfg["scaling"]:
        mean, std = _load_scaling(cfg["scaling"])
        bags = [Bag(id=b.id, instances=(b.instances - mean) / std) for b in bags]
    w = load_weights(cfg["weights"])
    ds = dataset_from_truth(bags, truth)
    row = evaluate(w, ds, cfg["threshold"], include_subset=cfg["subset_accuracy"])
    parts = [f"bag_accuracy={row.bag_accuracy:.6f}", f"hamming_loss={row.hamming_loss:.6f}",
             f"avg_precision={row.avg_precision:.6f}", f"one_error={row.one_error:.6f}"]
    if cfg["subset_accuracy"]:
        parts.append(f"subset_accuracy={row.subset_accuracy:.6f}")
    print(" ".join(parts))
    if cfg["out"]:
        write_curve(cfg["out"], [row])
    return 0


# -- verify ---------------------------------------------------------------------

VERIFY_SPEC = {
    "samples": (int, 200, "random cases per property"),
    "seed": (int, 0, "seed for the random cases"),
    "max_states": (int, bruteforce.DEFAULT_MAX_STATES, "enumeration budget"),
}


def cmd_verify(args) -> int:
    cfg = _resolve(args, VERIFY_SPEC)
    results = bruteforce.run_suite(samples=cfg["samples"], seed=cfg["seed"],
                                   max_states=cfg["max_states"])
    for res in results:
        print(res.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="miml-al",
        description="Active learning for multi-instance multi-label data with incomplete labels.",
    )
    sub = parser.add_subparsers(dest="command")
    for name, spec, fn, help_ in (
        ("gen-synthetic", GEN_SPEC, cmd_gen, "generate a synthetic corpus"),
        ("train", TRAIN_SPEC, cmd_train, "batch-train a model and write weights plus trace"),
        ("active-run", ACTIVE_SPEC, cmd_active_run, "run active-learning experiments"),
        ("evaluate", EVAL_SPEC, cmd_evaluate, "score saved weights on a labeled set"),
        ("verify", VERIFY_SPEC, cmd_verify, "run the brute-force self-checks"),
    ):
        p = sub.add_parser(name, help=help_)
        _register(p, spec)
        p.set_defaults(cmd=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if not hasattr(args, "cmd"):
        parser.print_help()
        return 1
    try:
        return args.cmd(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything else is a runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
