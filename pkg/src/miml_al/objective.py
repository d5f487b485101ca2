"""Marginal-likelihood objective over available bag-class labels, and its
exact gradients.

The loss of one labeled (bag, class) pair is the negative log of the modeled
probability of the observed label: -a for a negative label and -log(1 - e^a)
for a positive one, where a is the log bag-negative probability.  The full
objective averages pair losses over all available labels and adds an optional
quadratic penalty (lam / 2) * ||w||^2.

Losses and gradients here use the raw (unclamped) log bag-negative
probability so that they agree with enumeration and finite differences
arbitrarily deep into the tails; only the positive-label branch, which
diverges as the modeled presence probability collapses to zero, is guarded by
capping a at log(1 - eps).  The presentation-level probabilities in the model
module keep their two-sided clamp.

Gradients are computed in a form that never divides by 1 - p_t in linear
space: the coefficient of instance i on class c is

    p_t * p_c / q        for c != t   (q = P(instance not in t), p_c / q <= 1)
    -p_t                 for c == t

which is the derivative of sum_i log q_i; the positive-label case rescales it
by -P(absent) / P(present).
"""

from __future__ import annotations

import numpy as np

from .data import MimlDataset, _instances
from .model import (
    LOG_CEIL,
    excluded_logsumexp,
    row_logsumexp,
    scores,
)


def _log1mexp(a: float) -> float:
    """log(1 - exp(a)) for a < 0, switching forms at -log(2)."""
    if a > -0.6931471805599453:
        return float(np.log(-np.expm1(a)))
    return float(np.log1p(-np.exp(a)))


def _bag_tables(w: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-instance log posteriors and log not-class probabilities, both (n, C)."""
    Z = scores(w, X)
    lse = row_logsumexp(Z)
    return Z - lse[:, None], excluded_logsumexp(Z) - lse[:, None]


def _pair_loss_from_tables(log_q: np.ndarray, t0: int, label: int) -> float:
    a = float(log_q[:, t0].sum())
    if label == 0:
        return -a
    return -_log1mexp(min(a, LOG_CEIL))


def _grad_log_marginal(log_p: np.ndarray, log_q: np.ndarray, X: np.ndarray, t0: int, y: int) -> np.ndarray:
    """Gradient of log P(bag label for class t0 equals y), shape (C, d)."""
    p_t = np.exp(log_p[:, t0])
    masked = log_p.copy()
    masked[:, t0] = -np.inf  # column t0 is set directly; masking avoids overflow in the ratio
    coef = p_t[:, None] * np.exp(masked - log_q[:, [t0]])
    coef[:, t0] = -p_t
    grad = coef.T @ X
    if y == 0:
        return grad
    a = min(float(log_q[:, t0].sum()), LOG_CEIL)
    return -np.exp(a - _log1mexp(a)) * grad


def _check_label(label: int) -> int:
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")
    return int(label)


def _check_class(c: int, C: int) -> int:
    if not 1 <= c <= C:
        raise ValueError(f"class index {c} out of range 1..{C}")
    return c - 1


def pair_loss(w: np.ndarray, bag, c: int, label: int) -> float:
    """Negative log-likelihood of observing ``label`` for class c of one bag."""
    w = np.asarray(w, dtype=float)
    X = _instances(bag)
    _, log_q = _bag_tables(w, X)
    return _pair_loss_from_tables(log_q, _check_class(c, w.shape[0]), _check_label(label))


def pair_gradient(w: np.ndarray, bag, c: int, label: int, lam: float = 0.0) -> np.ndarray:
    """Gradient of pair_loss plus the quadratic-penalty term lam * w."""
    w = np.asarray(w, dtype=float)
    X = _instances(bag)
    log_p, log_q = _bag_tables(w, X)
    g = -_grad_log_marginal(log_p, log_q, X, _check_class(c, w.shape[0]), _check_label(label))
    if lam:
        g = g + lam * w
    return g


def bag_gradient(w: np.ndarray, bag, labeled, lam: float = 0.0) -> np.ndarray:
    """Summed pair-loss gradient over a bag's available (class, value) labels,
    with the penalty term lam * w added once."""
    labeled = list(labeled)
    if not labeled:
        raise ValueError("bag has no available labels")
    w = np.asarray(w, dtype=float)
    X = _instances(bag)
    log_p, log_q = _bag_tables(w, X)
    g = np.zeros_like(w)
    for c, value in labeled:
        g -= _grad_log_marginal(log_p, log_q, X, _check_class(c, w.shape[0]), _check_label(value))
    if lam:
        g = g + lam * w
    return g


def logprob_gradient_for_label(w: np.ndarray, bag, c: int, y: int) -> np.ndarray:
    """Gradient of the log-probability of outcome y for pair (bag, c).

    This is the ascent direction of the hypothetical log-likelihood term the
    pair would add if revealed with value y; it equals minus the
    unregularized pair-loss gradient.
    """
    w = np.asarray(w, dtype=float)
    X = _instances(bag)
    log_p, log_q = _bag_tables(w, X)
    return _grad_log_marginal(log_p, log_q, X, _check_class(c, w.shape[0]), _check_label(y))


def mml_objective(w: np.ndarray, ds: MimlDataset, lam: float = 0.0) -> float:
    """Mean pair loss over all available labels plus (lam / 2) * ||w||^2.

    Bags without available labels contribute nothing; with no available
    labels at all only the penalty remains.
    """
    w = np.asarray(w, dtype=float)
    total = 0.0
    count = 0
    for bi, bag in enumerate(ds.bags):
        row = ds.labels[bi]
        labeled0 = np.flatnonzero(row != -1)
        if labeled0.size == 0:
            continue
        _, log_q = _bag_tables(w, bag.instances)
        for t0 in labeled0:
            total += _pair_loss_from_tables(log_q, int(t0), int(row[t0]))
            count += 1
    value = total / count if count else 0.0
    if lam:
        value += 0.5 * lam * float(np.sum(w * w))
    return value


def mml_gradient(w: np.ndarray, ds: MimlDataset, lam: float = 0.0) -> np.ndarray:
    """Exact gradient of mml_objective, shape (C, d)."""
    w = np.asarray(w, dtype=float)
    g = np.zeros_like(w)
    count = 0
    for bi, bag in enumerate(ds.bags):
        row = ds.labels[bi]
        labeled0 = np.flatnonzero(row != -1)
        if labeled0.size == 0:
            continue
        log_p, log_q = _bag_tables(w, bag.instances)
        for t0 in labeled0:
            g -= _grad_log_marginal(log_p, log_q, bag.instances, int(t0), int(row[t0]))
            count += 1
    if count:
        g /= count
    if lam:
        g = g + lam * w
    return g
