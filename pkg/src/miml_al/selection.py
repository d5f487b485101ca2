"""Query strategies over the pool of unlabeled (bag, class) pairs.

Two pair criteria drive the main approach:

* expected gradient length: the expectation, over the two possible answers,
  of the norm of the log-likelihood gradient the answered pair would add;
* uncertainty: 2 * p * (1 - p) of the modeled presence probability, maximal
  at p = 0.5.

Three baselines mirror common alternatives: uniformly random pairs, a
bag-then-label rule (pick a bag by cardinality gap times unqueried fraction,
then its least certain class), and whole-bag querying by mean uncertainty.

All scoring is read-only; ties break toward the lexicographically smallest
(bag, class).  Indices are 1-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import MimlDataset, _instances
from .model import LOG_CEIL, LOG_FLOOR, bag_positive_probs
from .objective import _bag_tables, _grad_log_marginal

PAIR_CRITERIA = ("egl", "uncertainty", "random")
CRITERION_NAMES = ("egl-pair", "unc-pair", "rand-pair", "bag-then-label", "bag-all")


@dataclass
class PairScore:
    bag: int
    cls: int
    score: float


@dataclass
class SelectionResult:
    kind: str                           # "pair" or "bag"
    pair: tuple[int, int] | None = None
    bag: int | None = None
    score: float = float("nan")
    cost_units: float = 1.0


def _egl_scores_for_bag(w: np.ndarray, bag, classes0, num_labeled: int) -> np.ndarray:
    """Expected-gradient-length scores for the given 0-based classes of one bag."""
    X = _instances(bag)
    log_p, log_q = _bag_tables(np.asarray(w, dtype=float), X)
    out = np.empty(len(classes0))
    denom = float(num_labeled + 1)
    for j, t0 in enumerate(classes0):
        a = float(np.clip(log_q[:, t0].sum(), LOG_FLOOR, LOG_CEIL))
        p0 = np.exp(a)
        p1 = -np.expm1(a)
        g0 = _grad_log_marginal(log_p, log_q, X, t0, 0)
        g1 = _grad_log_marginal(log_p, log_q, X, t0, 1)
        out[j] = (p1 * float(np.linalg.norm(g1)) + p0 * float(np.linalg.norm(g0))) / denom
    return out


def egl_pair_score(w: np.ndarray, bag, c: int, num_labeled: int) -> float:
    """Expected norm of the gradient contribution pair (bag, c) would add,
    averaged over both possible answers and scaled by 1 / (|L| + 1)."""
    return float(_egl_scores_for_bag(w, bag, [c - 1], num_labeled)[0])


def uncertainty_pair_score(w: np.ndarray, bag, c: int) -> float:
    """2 p (1 - p) of the presence probability; peaks at p = 0.5."""
    p = float(bag_positive_probs(w, bag)[c - 1])
    return 2.0 * p * (1.0 - p)


def _candidate_classes(ds: MimlDataset, b0: int) -> np.ndarray:
    return np.flatnonzero(ds.labels[b0] == -1)


def _argmax_pair(scored) -> tuple[tuple[int, int], float]:
    """First strict maximum over (bag, class, score) triples emitted in
    lexicographic order, which realizes the tie rule."""
    best = None
    best_score = -np.inf
    for b, c, s in scored:
        if s > best_score:
            best_score = s
            best = (b, c)
    return best, best_score


def _scored_candidates(ds: MimlDataset, w: np.ndarray, criterion: str, candidates):
    num_labeled = ds.num_available()
    for b0, cls0 in candidates:
        bagobj = ds.bags[b0]
        if criterion == "egl":
            vals = _egl_scores_for_bag(w, bagobj, cls0, num_labeled)
        else:
            p = bag_positive_probs(w, bagobj)[cls0]
            vals = 2.0 * p * (1.0 - p)
        for c0, s in zip(cls0, vals):
            yield b0 + 1, int(c0) + 1, float(s)


def _open_candidates(ds: MimlDataset):
    candidates = [(b0, _candidate_classes(ds, b0)) for b0 in range(ds.num_bags)]
    return [(b0, cls0) for b0, cls0 in candidates if cls0.size]


def score_pool(ds: MimlDataset, w: np.ndarray, criterion: str) -> list[PairScore]:
    """Score every unlabeled pair under 'egl' or 'uncertainty', in
    lexicographic (bag, class) order."""
    if criterion not in ("egl", "uncertainty"):
        raise ValueError(f"criterion must be 'egl' or 'uncertainty', got {criterion!r}")
    return [PairScore(bag=b, cls=c, score=s)
            for b, c, s in _scored_candidates(ds, w, criterion, _open_candidates(ds))]


def select_pair(ds: MimlDataset, w: np.ndarray, criterion: str, rng=None) -> SelectionResult:
    """Pick the next (bag, class) pair to query from the unlabeled pool."""
    if criterion not in PAIR_CRITERIA:
        raise ValueError(f"criterion must be one of {PAIR_CRITERIA}, got {criterion!r}")
    candidates = _open_candidates(ds)
    if not candidates:
        raise ValueError("no unlabeled pairs left to select from")

    if criterion == "random":
        if rng is None:
            raise ValueError("the random criterion needs an rng or seed")
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        pairs = [(b0 + 1, int(c0) + 1) for b0, cls0 in candidates for c0 in cls0]
        b, c = pairs[int(rng.integers(len(pairs)))]
        return SelectionResult(kind="pair", pair=(b, c), cost_units=1.0)

    (b, c), score = _argmax_pair(_scored_candidates(ds, w, criterion, candidates))
    return SelectionResult(kind="pair", pair=(b, c), score=score, cost_units=1.0)


def average_label_cardinality(ds: MimlDataset) -> float:
    """Mean positive-label count over fully labeled bags; C / 2 when none exist."""
    full = ~np.any(ds.labels == -1, axis=1)
    if not np.any(full):
        return ds.num_classes / 2.0
    return float(np.mean(np.sum(ds.labels[full] == 1, axis=1)))


def select_bag_then_label(ds: MimlDataset, w: np.ndarray,
                          avg_cardinality: float | None = None) -> SelectionResult:
    """Two-stage baseline: score each bag by |predicted positives - average
    cardinality| times its unqueried-class fraction, then pick the unlabeled
    class of the winning bag whose presence probability is closest to 0.5."""
    if avg_cardinality is None:
        avg_cardinality = average_label_cardinality(ds)
    C = ds.num_classes
    best = None
    best_score = -np.inf
    best_probs = None
    for b0 in range(ds.num_bags):
        cls0 = _candidate_classes(ds, b0)
        if cls0.size == 0:
            continue
        probs = bag_positive_probs(w, ds.bags[b0])
        predicted = int(np.sum(probs > 0.5))
        score = abs(predicted - avg_cardinality) * (cls0.size / C)
        if score > best_score:
            best_score = score
            best = (b0, cls0)
            best_probs = probs
    if best is None:
        raise ValueError("no bag has unlabeled classes")
    b0, cls0 = best
    dist = np.abs(best_probs[cls0] - 0.5)
    c0 = int(cls0[int(np.argmin(dist))])  # argmin keeps the smallest class on ties
    return SelectionResult(kind="pair", pair=(b0 + 1, c0 + 1), score=best_score, cost_units=1.0)


def select_bag_all(ds: MimlDataset, w: np.ndarray, k: float = 1.0) -> SelectionResult:
    """Whole-bag baseline: the bag whose unlabeled classes have the highest
    mean uncertainty; answering costs C / k pair-query units."""
    if k < 1:
        raise ValueError("k must be >= 1")
    best = None
    best_score = -np.inf
    for b0 in range(ds.num_bags):
        cls0 = _candidate_classes(ds, b0)
        if cls0.size == 0:
            continue
        p = bag_positive_probs(w, ds.bags[b0])[cls0]
        score = float(np.mean(2.0 * p * (1.0 - p)))
        if score > best_score:
            best_score = score
            best = b0
    if best is None:
        raise ValueError("no bag has unlabeled classes")
    return SelectionResult(kind="bag", bag=best + 1, score=best_score,
                           cost_units=ds.num_classes / k)


def select(ds: MimlDataset, w: np.ndarray, criterion: str, rng=None, k: float = 1.0) -> SelectionResult:
    """Dispatch on the public criterion names used by the command line."""
    if criterion == "egl-pair":
        return select_pair(ds, w, "egl")
    if criterion == "unc-pair":
        return select_pair(ds, w, "uncertainty")
    if criterion == "rand-pair":
        return select_pair(ds, w, "random", rng=rng)
    if criterion == "bag-then-label":
        return select_bag_then_label(ds, w)
    if criterion == "bag-all":
        return select_bag_all(ds, w, k=k)
    raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERION_NAMES}")
