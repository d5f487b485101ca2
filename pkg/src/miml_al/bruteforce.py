"""Independent brute-force oracles: exact marginals by enumerating every joint
assignment of instance classes, the joint single-bag log-likelihood, and
central finite-difference gradients.

These deliberately avoid the closed forms used elsewhere so that agreement
between the two routes is meaningful.  Enumeration refuses instances whose
state space C^n exceeds a budget.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import model as _model
from . import objective as _objective
from .data import Bag, MimlDataset, _instances

DEFAULT_MAX_STATES = 100_000
FD_STEP = 1e-5
FD_REL_TOL = 1e-5
FD_ABS_TOL = 1e-8


def _enumerate_states(w: np.ndarray, X: np.ndarray, max_states: int) -> tuple[np.ndarray, np.ndarray]:
    """All joint instance labelings (0-based) and their probabilities."""
    n = X.shape[0]
    C = np.asarray(w).shape[0]
    total = C**n
    if total > max_states:
        raise ValueError(f"enumeration budget exceeded: {C}^{n} = {total} > {max_states}")
    probs = np.exp(_model.log_posteriors(np.asarray(w, dtype=float), X))
    states = np.array(list(itertools.product(range(C), repeat=n)), dtype=int)
    joint = probs[np.arange(n)[None, :], states].prod(axis=1)
    return states, joint


def bruteforce_marginal(w: np.ndarray, bag, t: int, y: int, max_states: int = DEFAULT_MAX_STATES) -> float:
    """P(bag label for class t equals y), summed over every joint labeling."""
    if y not in (0, 1):
        raise ValueError(f"y must be 0 or 1, got {y}")
    X = _instances(bag)
    C = np.asarray(w).shape[0]
    if not 1 <= t <= C:
        raise ValueError(f"class index {t} out of range 1..{C}")
    states, joint = _enumerate_states(w, X, max_states)
    contains = (states == (t - 1)).any(axis=1)
    p_pos = float(joint[contains].sum())
    return p_pos if y == 1 else float(joint[~contains].sum())


def bruteforce_joint_loglik(w: np.ndarray, bag, labeled, max_states: int = DEFAULT_MAX_STATES) -> float:
    """Log-probability of a bag's available labels, jointly over all classes.

    ``labeled`` holds (class, value) pairs; an empty set yields 0 (the total
    probability of an unconstrained bag is 1).
    """
    labeled = list(labeled)
    X = _instances(bag)
    C = np.asarray(w).shape[0]
    for c, v in labeled:
        if not 1 <= c <= C:
            raise ValueError(f"class index {c} out of range 1..{C}")
        if v not in (0, 1):
            raise ValueError(f"label value must be 0 or 1, got {v}")
    if not labeled:
        return 0.0
    states, joint = _enumerate_states(w, X, max_states)
    keep = np.ones(states.shape[0], dtype=bool)
    for c, v in labeled:
        contains = (states == (c - 1)).any(axis=1)
        keep &= contains if v == 1 else ~contains
    return float(np.log(joint[keep].sum()))


def finite_diff_gradient(fn, w: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of a scalar function of the weight matrix."""
    if step <= 0:
        raise ValueError("step must be positive")
    w = np.asarray(w, dtype=float)
    g = np.zeros_like(w)
    it = np.nditer(w, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        wp = w.copy()
        wp[idx] += step
        wm = w.copy()
        wm[idx] -= step
        fp, fm = fn(wp), fn(wm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError("non-finite function evaluation in finite differences")
        g[idx] = (fp - fm) / (2.0 * step)
    return g


def max_relative_error(approx: np.ndarray, exact: np.ndarray, abs_tol: float = FD_ABS_TOL) -> float:
    """Worst elementwise |approx - exact| / max(|exact|, abs_tol / rel)."""
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    denom = np.maximum(np.abs(exact), abs_tol / FD_REL_TOL)
    return float(np.max(np.abs(approx - exact) / denom))


def fd_conditioned(w: np.ndarray, bag, labeled, min_presence: float = 1e-3) -> bool:
    """Whether central differences of the given pair losses are numerically
    meaningful at the default step.

    The positive-label loss behaves like -log(p) in the presence probability
    p, so its finite-difference noise grows like 1/p; once p falls below
    roughly 1e-4, roundoff in the objective crosses the 1e-5 relative
    tolerance even though the analytic gradient is exact.  Samplers that
    compare gradients against finite differences should redraw cases that
    fail this predicate.
    """
    for c, v in labeled:
        if v == 1 and _model.bag_class_prob_positive(w, bag, c) < min_presence:
            return False
    return True


# -- self-check suite ---------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tol: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: worst discrepancy {self.worst:.3e} (tolerance {self.tol:.1e})"


def _random_case(rng, max_classes=4, max_bag=6, max_dim=8) -> tuple[np.ndarray, Bag]:
    C = int(rng.integers(2, max_classes + 1))
    n = int(rng.integers(1, max_bag + 1))
    d = int(rng.integers(1, max_dim + 1))
    w = rng.uniform(-2.0, 2.0, size=(C, d))
    bag = Bag(id="chk", instances=rng.standard_normal((n, d)))
    return w, bag


def _random_dataset(rng, num_bags=3, max_classes=4, max_bag=4, max_dim=6) -> MimlDataset:
    C = int(rng.integers(2, max_classes + 1))
    d = int(rng.integers(1, max_dim + 1))
    bags = [
        Bag(id=f"b{i}", instances=rng.standard_normal((int(rng.integers(1, max_bag + 1)), d)))
        for i in range(num_bags)
    ]
    labels = rng.integers(-1, 2, size=(num_bags, C)).astype(np.int8)
    return MimlDataset(bags, labels)


def run_suite(samples: int = 200, seed: int = 0, max_states: int = DEFAULT_MAX_STATES) -> list[CheckResult]:
    """Cross-check the closed forms against the brute-force oracles.

    Returns one result per property; each records its worst observed
    discrepancy.  Gradient checks look up the checked functions on the
    objective module at call time, so a substituted implementation is caught.
    """
    rng = np.random.default_rng(seed)
    results = []

    worst = 0.0
    for _ in range(samples):
        w, bag = _random_case(rng)
        t = int(rng.integers(1, w.shape[0] + 1))
        closed = _model.bag_class_prob_positive(w, bag, t)
        for y, ref in ((1, bruteforce_marginal(w, bag, t, 1, max_states)),
                       (0, bruteforce_marginal(w, bag, t, 0, max_states))):
            val = closed if y == 1 else 1.0 - closed
            worst = max(worst, abs(val - ref))
    results.append(CheckResult("closed-form marginal vs enumeration", worst <= 1e-10, worst, 1e-10))

    worst = 0.0
    for _ in range(samples):
        w, bag = _random_case(rng)
        t = int(rng.integers(1, w.shape[0] + 1))
        label = int(rng.integers(0, 2))
        loss = _objective.pair_loss(w, bag, t, label)
        ref = -np.log(bruteforce_marginal(w, bag, t, label, max_states))
        worst = max(worst, abs(loss - ref))
    results.append(CheckResult("pair loss vs enumerated marginal", worst <= 1e-10, worst, 1e-10))

    worst = 0.0
    for _ in range(samples):
        w, bag = _random_case(rng)
        t = int(rng.integers(1, w.shape[0] + 1))
        probs = [bruteforce_marginal(w, bag, t, y, max_states) for y in (0, 1)]
        worst = max(worst, abs(sum(probs) - 1.0))
    results.append(CheckResult("enumerated marginals sum to one", worst <= 1e-12, worst, 1e-12))

    grad_samples = max(10, samples // 4)

    def draw_pair_case():
        while True:
            w, bag = _random_case(rng, max_classes=4, max_bag=4, max_dim=5)
            t = int(rng.integers(1, w.shape[0] + 1))
            label = int(rng.integers(0, 2))
            if fd_conditioned(w, bag, [(t, label)]):
                return w, bag, t, label

    def draw_bag_case():
        while True:
            w, bag = _random_case(rng, max_classes=4, max_bag=4, max_dim=5)
            C = w.shape[0]
            k = int(rng.integers(1, C + 1))
            classes = rng.choice(C, size=k, replace=False) + 1
            labeled = [(int(c), int(rng.integers(0, 2))) for c in classes]
            if fd_conditioned(w, bag, labeled):
                return w, bag, labeled

    def draw_dataset_case():
        while True:
            ds = _random_dataset(rng)
            w = rng.uniform(-1.5, 1.5, size=(ds.num_classes, ds.feature_dim))
            ok = all(
                fd_conditioned(w, ds.bags[b0],
                               [(int(c0) + 1, int(ds.labels[b0, c0]))
                                for c0 in np.flatnonzero(ds.labels[b0] != -1)])
                for b0 in range(ds.num_bags)
            )
            if ok:
                return ds, w

    worst = 0.0
    for _ in range(grad_samples):
        w, bag, t, label = draw_pair_case()
        lam = float(rng.choice([0.0, 0.1]))
        g = _objective.pair_gradient(w, bag, t, label, lam)
        fd = finite_diff_gradient(
            lambda wv: _objective.pair_loss(wv, bag, t, label) + 0.5 * lam * float(np.sum(wv * wv)), w
        )
        worst = max(worst, max_relative_error(fd, g))
    results.append(CheckResult("pair gradient vs finite differences", worst <= FD_REL_TOL, worst, FD_REL_TOL))

    worst = 0.0
    for _ in range(grad_samples):
        rng_ds, w = draw_dataset_case()
        lam = float(rng.choice([0.0, 0.1]))
        g = _objective.mml_gradient(w, rng_ds, lam)
        fd = finite_diff_gradient(lambda wv: _objective.mml_objective(wv, rng_ds, lam), w)
        worst = max(worst, max_relative_error(fd, g))
    results.append(CheckResult("full gradient vs finite differences", worst <= FD_REL_TOL, worst, FD_REL_TOL))

    worst = 0.0
    for _ in range(grad_samples):
        w, bag, labeled = draw_bag_case()
        g = _objective.bag_gradient(w, bag, labeled, 0.0)
        fd = finite_diff_gradient(
            lambda wv: sum(_objective.pair_loss(wv, bag, c, v) for c, v in labeled), w
        )
        worst = max(worst, max_relative_error(fd, g))
    results.append(CheckResult("bag gradient vs finite differences", worst <= FD_REL_TOL, worst, FD_REL_TOL))

    worst = 0.0
    for _ in range(grad_samples):
        w, bag, t, y = draw_pair_case()
        g = _objective.logprob_gradient_for_label(w, bag, t, y)
        fd = finite_diff_gradient(lambda wv: -_objective.pair_loss(wv, bag, t, y), w)
        worst = max(worst, max_relative_error(fd, g))
    results.append(
        CheckResult("outcome log-probability gradient vs finite differences", worst <= FD_REL_TOL, worst, FD_REL_TOL)
    )

    worst = 0.0
    for _ in range(samples):
        w, bag = _random_case(rng)
        t = int(rng.integers(1, w.shape[0] + 1))
        v = int(rng.integers(0, 2))
        joint = bruteforce_joint_loglik(w, bag, [(t, v)], max_states)
        ref = float(np.log(bruteforce_marginal(w, bag, t, v, max_states)))
        worst = max(worst, abs(joint - ref))
    results.append(CheckResult("joint likelihood single-label reduction", worst <= 1e-12, worst, 1e-12))

    return results
