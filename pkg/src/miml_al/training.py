"""Parameter fitting: full-batch gradient descent with backtracking line
search, and online projected SGD in two granularities (single queried pair,
or the full bag containing it).

The SGD step size decreases as c' / (lam * k + c''), and every step is
projected onto the sphere of radius tau = sqrt((2 / lam) * max(log C,
max_bag_size / (C - 1))), which contains the optimum of the regularized
objective for any data.  With lam = 0 the radius is undefined and projection
is disabled.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import MimlDataset
from .objective import bag_gradient, mml_gradient, mml_objective, pair_gradient

MODES = ("full-gd", "pair-sgd", "bag-sgd")


@dataclass
class TrainConfig:
    lam: float = 1e-3             # quadratic penalty weight
    c_prime: float = 1.0          # step-size numerator
    c_dprime: float = 1.0         # step-size offset
    max_epochs: int = 2000
    grad_tol: float = 1e-6
    backtrack_shrink: float = 0.5
    backtrack_slope: float = 1e-4
    mode: str = "full-gd"
    steps_per_query: int = 1      # online updates per query
    sgd_regularized: bool = True  # include lam * w in the online gradients
    reset_schedule: bool = False  # restart the step counter at every query

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.c_prime <= 0:
            raise ValueError("c_prime must be > 0")
        if self.c_dprime < 0:
            raise ValueError("c_dprime must be >= 0")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be > 0")
        if not 0.0 < self.backtrack_shrink < 1.0:
            raise ValueError("backtrack_shrink must be in (0, 1)")
        if not 0.0 < self.backtrack_slope < 1.0:
            raise ValueError("backtrack_slope must be in (0, 1)")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.steps_per_query < 1:
            raise ValueError("steps_per_query must be >= 1")


def compute_tau(lam: float, num_classes: int, max_bag_size: int) -> float:
    """Radius of the sphere guaranteed to contain the regularized optimum.

    Depends only on (lam, C, largest bag size), never on the feature values.
    """
    if lam <= 0:
        raise ValueError("the projection radius requires lam > 0")
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    if max_bag_size < 1:
        raise ValueError("max_bag_size must be >= 1")
    bound = max(np.log(num_classes), max_bag_size / (num_classes - 1))
    return float(np.sqrt(2.0 / lam * bound))


def project(w: np.ndarray, tau: float) -> np.ndarray:
    """Scale w onto the sphere of radius tau when it lies outside."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    norm = float(np.linalg.norm(w))
    if norm <= tau:
        return w
    return w * (tau / norm)


@dataclass
class SgdState:
    """Online-update state: current weights, step counter, projection radius."""

    w: np.ndarray
    k: int = 1
    tau: float | None = None

    @classmethod
    def start(cls, w: np.ndarray, cfg: TrainConfig, num_classes: int, max_bag_size: int) -> "SgdState":
        if cfg.lam > 0:
            tau = compute_tau(cfg.lam, num_classes, max_bag_size)
        else:
            tau = None
            warnings.warn("lam = 0: projection disabled (radius undefined)", stacklevel=2)
        return cls(w=np.array(w, dtype=float), k=1, tau=tau)


def sgd_step(state: SgdState, g: np.ndarray, cfg: TrainConfig) -> SgdState:
    """One projected step with step size c' / (lam * k + c'')."""
    denom = cfg.lam * state.k + cfg.c_dprime
    if denom == 0:
        raise ValueError("step-size schedule is undefined with lam = 0 and c_dprime = 0")
    eta = cfg.c_prime / denom
    w = state.w - eta * g
    if state.tau is not None:
        w = project(w, state.tau)
    state.w = w
    state.k += 1
    return state


def online_update(state: SgdState, b: int, queried_class: int, revealed_label: int,
                  ds: MimlDataset, cfg: TrainConfig) -> SgdState:
    """Update after one query on bag b (1-based): a pair-gradient step
    (pair-sgd) or a step on the whole queried bag's available labels
    (bag-sgd), repeated steps_per_query times with the gradient recomputed at
    each new iterate."""
    bag = ds.bags[b - 1]
    lam_g = cfg.lam if cfg.sgd_regularized else 0.0
    if cfg.mode == "pair-sgd":
        grad = lambda w: pair_gradient(w, bag, queried_class, revealed_label, lam_g)
    elif cfg.mode == "bag-sgd":
        labeled = ds.labeled_entries(b)
        grad = lambda w: bag_gradient(w, bag, labeled, lam_g)
    else:
        raise ValueError("online_update requires an SGD mode; use full_gd for full retraining")
    for _ in range(cfg.steps_per_query):
        state = sgd_step(state, grad(state.w), cfg)
    return state


def full_gd(ds: MimlDataset, cfg: TrainConfig, w_init: np.ndarray) -> tuple[np.ndarray, list[tuple[int, float, float]]]:
    """Full-batch descent with Armijo backtracking from unit step.

    Returns the final weights and a trace of (epoch, objective, grad_norm)
    rows; the objective is non-increasing along the trace.
    """
    w = np.array(w_init, dtype=float)
    f = mml_objective(w, ds, cfg.lam)
    if not np.isfinite(f):
        raise ValueError("non-finite objective at the initial point")
    trace: list[tuple[int, float, float]] = []
    for epoch in range(cfg.max_epochs + 1):
        g = mml_gradient(w, ds, cfg.lam)
        gnorm = float(np.linalg.norm(g))
        trace.append((epoch, f, gnorm))
        if gnorm <= cfg.grad_tol or epoch == cfg.max_epochs:
            break
        eta = 1.0
        gsq = gnorm * gnorm
        accepted = False
        while eta > 1e-20:
            w_new = w - eta * g
            f_new = mml_objective(w_new, ds, cfg.lam)
            if not np.isfinite(f_new):
                raise ValueError("non-finite objective during line search")
            if f_new <= f - cfg.backtrack_slope * eta * gsq:
                accepted = True
                break
            eta *= cfg.backtrack_shrink
        if not accepted:
            break  # no admissible step at floating-point resolution
        w, f = w_new, f_new
    return w, trace


def sgd_epochs(ds: MimlDataset, cfg: TrainConfig, w_init: np.ndarray,
               seed: int = 0) -> tuple[np.ndarray, list[tuple[int, float, float]]]:
    """Epoch-style SGD over a static dataset (pair-sgd or bag-sgd mode).

    Each epoch visits every available label once: pair-sgd shuffles the
    labeled pairs, bag-sgd shuffles the bags that carry labels.  The step
    counter runs across epochs so the schedule keeps decreasing.
    """
    if cfg.mode not in ("pair-sgd", "bag-sgd"):
        raise ValueError("sgd_epochs requires an SGD mode")
    rng = np.random.default_rng(seed)
    lam_g = cfg.lam if cfg.sgd_regularized else 0.0
    state = SgdState.start(w_init, cfg, ds.num_classes, ds.max_bag_size)

    pairs = sorted(ds.available_pairs())
    bags_with_labels = sorted({b for b, _ in pairs})
    if not pairs:
        return np.array(w_init, dtype=float), [(0, mml_objective(w_init, ds, cfg.lam), 0.0)]

    trace = [(0, mml_objective(state.w, ds, cfg.lam), float(np.linalg.norm(mml_gradient(state.w, ds, cfg.lam))))]
    for epoch in range(1, cfg.max_epochs + 1):
        if cfg.mode == "pair-sgd":
            for idx in rng.permutation(len(pairs)):
                b, c = pairs[idx]
                bag = ds.bags[b - 1]
                v = int(ds.labels[b - 1, c - 1])
                state = sgd_step(state, pair_gradient(state.w, bag, c, v, lam_g), cfg)
        else:
            for idx in rng.permutation(len(bags_with_labels)):
                b = bags_with_labels[idx]
                bag = ds.bags[b - 1]
                state = sgd_step(state, bag_gradient(state.w, bag, ds.labeled_entries(b), lam_g), cfg)
        f = mml_objective(state.w, ds, cfg.lam)
        gnorm = float(np.linalg.norm(mml_gradient(state.w, ds, cfg.lam)))
        trace.append((epoch, f, gnorm))
    return state.w, trace


def train(ds: MimlDataset, cfg: TrainConfig, w_init: np.ndarray | None = None,
          seed: int = 0) -> tuple[np.ndarray, list[tuple[int, float, float]]]:
    """Fit weights with the configured mode, starting from zeros by default."""
    if w_init is None:
        w_init = np.zeros((ds.num_classes, ds.feature_dim))
    if cfg.mode == "full-gd":
        return full_gd(ds, cfg, w_init)
    return sgd_epochs(ds, cfg, w_init, seed=seed)


def write_trace(path, trace) -> None:
    """Convergence trace CSV: epoch,objective,grad_norm at full precision."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,objective,grad_norm\n")
        for epoch, obj, gnorm in trace:
            fh.write(f"{epoch},{float(obj)!r},{float(gnorm)!r}\n")
