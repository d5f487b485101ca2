"""Bag-level evaluation for multi-label predictions.

Four headline numbers per evaluation point:

* bag accuracy    — mean Jaccard similarity between predicted and true
                    positive label sets (1 when both are empty);
* hamming loss    — fraction of (bag, class) cells predicted wrongly;
* average precision — mean, over bags, of the label-ranking average
                    precision of the true positives under the probability
                    ranking;
* one-error       — fraction of bags whose single top-ranked class is not
                    truly positive.

Bags without any true positive class are skipped for average precision and
one-error (both are undefined there) but still count for hamming loss and
bag accuracy.  Ranking ties break toward the smaller class index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import MimlDataset
from .model import predict_matrix

METRIC_FIELDS = ("bag_accuracy", "hamming_loss", "avg_precision", "one_error")


@dataclass
class MetricsRow:
    cost: float
    bag_accuracy: float
    hamming_loss: float
    avg_precision: float
    one_error: float
    subset_accuracy: float | None = None


def _ranking(probs: np.ndarray) -> np.ndarray:
    """rank[c] = 1-based position of class c when sorted by probability
    descending, class index ascending on ties."""
    C = probs.shape[0]
    order = np.lexsort((np.arange(C), -probs))
    rank = np.empty(C, dtype=int)
    rank[order] = np.arange(1, C + 1)
    return rank


def evaluate_probs(probs: np.ndarray, labels: np.ndarray, threshold: float = 0.5,
                   cost: float = 0.0, include_subset: bool = False) -> MetricsRow:
    """Score a (B, C) matrix of presence probabilities against {0, 1} labels."""
    probs = np.asarray(probs, dtype=float)
    Y = np.asarray(labels)
    if probs.ndim != 2 or probs.shape != Y.shape:
        raise ValueError("probs and labels must be matching 2-D arrays")
    if probs.shape[0] == 0:
        raise ValueError("empty test set")
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    pred = (probs > threshold).astype(np.int8)

    hamming = float(np.mean(pred != Y))

    jaccard = []
    subset = []
    ap_vals = []
    one_err = []
    for b0 in range(Y.shape[0]):
        true_pos = set(np.flatnonzero(Y[b0] == 1))
        pred_pos = set(np.flatnonzero(pred[b0] == 1))
        union = true_pos | pred_pos
        jaccard.append(1.0 if not union else len(true_pos & pred_pos) / len(union))
        subset.append(1.0 if np.array_equal(pred[b0], Y[b0]) else 0.0)
        if not true_pos:
            continue
        rank = _ranking(probs[b0])
        one_err.append(0.0 if int(np.argmin(rank)) in true_pos else 1.0)
        precisions = []
        for c0 in true_pos:
            r = rank[c0]
            precisions.append(sum(1 for j in true_pos if rank[j] <= r) / r)
        ap_vals.append(float(np.mean(precisions)))

    return MetricsRow(
        cost=cost,
        bag_accuracy=float(np.mean(jaccard)),
        hamming_loss=hamming,
        avg_precision=float(np.mean(ap_vals)) if ap_vals else 1.0,
        one_error=float(np.mean(one_err)) if one_err else 0.0,
        subset_accuracy=float(np.mean(subset)) if include_subset else None,
    )


def evaluate(w: np.ndarray, test: MimlDataset, threshold: float = 0.5,
             cost: float = 0.0, include_subset: bool = False) -> MetricsRow:
    """Score the model on a fully labeled test set."""
    if test.num_bags == 0:
        raise ValueError("empty test set")
    if not test.is_fully_labeled():
        raise ValueError("test set must be fully labeled")
    _, probs = predict_matrix(w, test.bags, threshold)
    return evaluate_probs(probs, test.labels, threshold, cost=cost, include_subset=include_subset)


def aggregate_runs(runs: list[list[MetricsRow]]) -> tuple[np.ndarray, dict, dict]:
    """Pointwise mean and sample standard deviation across repeated runs.

    Runs may have different cost grids; each is aligned onto the union grid
    by carrying its last observed row forward.  Returns (costs, means, stds)
    with one array per metric name.
    """
    if not runs:
        raise ValueError("no runs to aggregate")
    grid = sorted({row.cost for run in runs for row in run})
    costs = np.array(grid, dtype=float)
    values = {name: np.empty((len(runs), len(grid))) for name in METRIC_FIELDS}
    for r, run in enumerate(runs):
        if not run:
            raise ValueError("a run has no metric rows")
        run = sorted(run, key=lambda row: row.cost)
        i = 0
        current = run[0]
        for j, cost in enumerate(grid):
            while i < len(run) and run[i].cost <= cost + 1e-12:
                current = run[i]
                i += 1
            for name in METRIC_FIELDS:
                values[name][r, j] = getattr(current, name)
    means = {name: values[name].mean(axis=0) for name in METRIC_FIELDS}
    ddof = 1 if len(runs) > 1 else 0
    stds = {name: values[name].std(axis=0, ddof=ddof) for name in METRIC_FIELDS}
    return costs, means, stds


def write_curve(path, rows: list[MetricsRow]) -> None:
    """Learning-curve CSV: cost plus the four metrics (and subset accuracy
    when it was computed)."""
    include_subset = bool(rows) and rows[0].subset_accuracy is not None
    header = "cost,bag_accuracy,hamming_loss,avg_precision,one_error"
    if include_subset:
        header += ",subset_accuracy"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            cells = [row.cost, row.bag_accuracy, row.hamming_loss, row.avg_precision, row.one_error]
            if include_subset:
                cells.append(row.subset_accuracy)
            fh.write(",".join(repr(float(v)) for v in cells) + "\n")


def write_aggregate(path, costs: np.ndarray, means: dict, stds: dict) -> None:
    header = "cost," + ",".join(f"{name}_mean,{name}_std" for name in METRIC_FIELDS)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for j, cost in enumerate(costs):
            cells = [float(cost)]
            for name in METRIC_FIELDS:
                cells.extend([float(means[name][j]), float(stds[name][j])])
            fh.write(",".join(repr(v) for v in cells) + "\n")
