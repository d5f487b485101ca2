"""Probabilistic core: instance-level multinomial logistic model with OR-rule
bag aggregation.

An instance's class posterior is a softmax over per-class linear scores.  A
bag is positive for class t exactly when at least one instance carries latent
class t, so the bag-negative probability factorizes over instances:

    P(bag negative for t) = prod_i P(instance i not in class t)

All of this is computed in log space.  The central quantity is the
log bag-negative probability ("a" below), the sum over instances of
log P(instance not in class t); both exp(a) and 1 - exp(a) are kept strictly
inside (0, 1) by clamping a into [log(eps), log(1 - eps)].
"""

from __future__ import annotations

import numpy as np

from .data import _instances

PROB_FLOOR = 1e-12
LOG_FLOOR = float(np.log(PROB_FLOOR))
LOG_CEIL = float(np.log1p(-PROB_FLOOR))


def scores(w: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Per-class linear scores, one row per instance: X @ w.T."""
    return X @ np.asarray(w, dtype=float).T


def row_logsumexp(Z: np.ndarray) -> np.ndarray:
    """Row-wise log(sum(exp))), shifted by the row maximum."""
    m = Z.max(axis=1)
    return m + np.log(np.exp(Z - m[:, None]).sum(axis=1))


def excluded_logsumexp(Z: np.ndarray) -> np.ndarray:
    """out[i, t] = log sum_{k != t} exp(Z[i, k]), computed without cancellation.

    For columns other than the row maximum, the sum shifted by the row max
    retains the max's own term of exactly 1, so subtracting one exponential
    cannot cancel to zero.  Excluding the max column itself is re-shifted by
    the second-largest score.
    """
    n, C = Z.shape
    rows = np.arange(n)
    m1 = Z.max(axis=1)
    i1 = Z.argmax(axis=1)
    E = np.exp(Z - m1[:, None])
    S = E.sum(axis=1)
    diff = S[:, None] - E
    diff[rows, i1] = 1.0  # placeholder; the max column is overwritten below
    out = m1[:, None] + np.log(diff)
    Z2 = Z.copy()
    Z2[rows, i1] = -np.inf
    m2 = Z2.max(axis=1)
    out[rows, i1] = m2 + np.log(np.exp(Z2 - m2[:, None]).sum(axis=1))
    return out


def log_posteriors(w: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Log class posteriors, one row per instance."""
    Z = scores(w, X)
    return Z - row_logsumexp(Z)[:, None]


def instance_posterior(w: np.ndarray, x) -> np.ndarray:
    """Class-membership probabilities of a single instance (softmax of scores)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("x must be a single feature vector")
    w = np.asarray(w, dtype=float)
    if w.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: w is {w.shape}, x has length {x.shape[0]}")
    return np.exp(log_posteriors(w, x[None, :])[0])


def log_prob_not_class(w: np.ndarray, x, t: int) -> float:
    """log P(instance label != t) for 1-based class t, without forming 1 - p_t."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    C = w.shape[0]
    if not 1 <= t <= C:
        raise ValueError(f"class index {t} out of range 1..{C}")
    Z = scores(w, x[None, :])
    return float(excluded_logsumexp(Z)[0, t - 1] - row_logsumexp(Z)[0])


def clamp_log(a: float) -> float:
    """Clamp a log-probability so both exp(a) and 1 - exp(a) stay in (0, 1)."""
    return float(min(max(a, LOG_FLOOR), LOG_CEIL))


def one_minus_exp(a) -> float | np.ndarray:
    """Stable 1 - exp(a) for a <= 0."""
    return -np.expm1(a)


def bag_class_logprobs(w: np.ndarray, bag) -> np.ndarray:
    """Log bag-negative probability for every class at once (clamped), shape (C,)."""
    X = _instances(bag)
    Z = scores(w, X)
    log_q = excluded_logsumexp(Z) - row_logsumexp(Z)[:, None]
    return np.clip(log_q.sum(axis=0), LOG_FLOOR, LOG_CEIL)


def bag_class_logprob(w: np.ndarray, bag, t: int) -> float:
    """Sum over instances of log P(instance != t); exp of it is the
    probability that class t is absent from the bag."""
    a = bag_class_logprobs(w, bag)
    C = a.shape[0]
    if not 1 <= t <= C:
        raise ValueError(f"class index {t} out of range 1..{C}")
    return float(a[t - 1])


def bag_class_prob_positive(w: np.ndarray, bag, t: int) -> float:
    """Probability that class t is present in the bag, strictly inside (0, 1)."""
    return float(one_minus_exp(bag_class_logprob(w, bag, t)))


def bag_positive_probs(w: np.ndarray, bag) -> np.ndarray:
    """Presence probability for every class of one bag, shape (C,)."""
    return one_minus_exp(bag_class_logprobs(w, bag))


def predict_bag(w: np.ndarray, bag, threshold: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Thresholded presence labels plus the ranking scores (the probabilities)."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    probs = bag_positive_probs(w, bag)
    return (probs > threshold).astype(np.int8), probs


def predict_matrix(w: np.ndarray, bags, threshold: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Stacked predictions/probabilities for a list of bags, shapes (B, C)."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    probs = np.stack([bag_positive_probs(w, bag) for bag in bags])
    return (probs > threshold).astype(np.int8), probs


# -- weight serialization: one line per class, "c,w_c1,...,w_cd" --------------


def save_weights(path, w: np.ndarray) -> None:
    w = np.asarray(w, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        for c, row in enumerate(w, start=1):
            fh.write(f"{c}," + ",".join(repr(float(v)) for v in row) + "\n")


def load_weights(path) -> np.ndarray:
    rows = {}
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            c = int(parts[0])
            vals = [float(tok) for tok in parts[1:]]
            if dim is None:
                dim = len(vals)
            elif len(vals) != dim:
                raise ValueError(f"{path}:{lineno}: ragged weight row")
            if c in rows:
                raise ValueError(f"{path}:{lineno}: duplicate class {c}")
            rows[c] = vals
    C = len(rows)
    if sorted(rows) != list(range(1, C + 1)):
        raise ValueError(f"{path}: class indices must be contiguous 1..{C}")
    return np.array([rows[c] for c in range(1, C + 1)], dtype=float)
