"""The query/reveal/update cycle against a simulated oracle.

Starting from a partially labeled training set, the loop trains an initial
model by full gradient descent, then repeats: pick a query with the
configured criterion, reveal the answer(s) from the ground truth, update the
index sets, and update the model (one online SGD step, or a warm-started full
retrain).  Test-set metrics are recorded whenever the cumulative query cost
advances by ``eval_every`` units, and always at the end.

Costs are counted in bag-class units: a pair query costs 1, a whole-bag query
costs C / k.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import MimlDataset, OracleTruth
from .metrics import MetricsRow, evaluate
from .selection import CRITERION_NAMES, SelectionResult, select
from .training import SgdState, TrainConfig, full_gd, online_update


@dataclass
class RunConfig:
    criterion: str = "egl-pair"
    mode: str = "pair-sgd"        # model update per query: full-gd, pair-sgd, bag-sgd
    queries: int = 0
    eval_every: float = 5.0       # cost units between metric snapshots
    threshold: float = 0.5
    k: float = 1.0                # whole-bag cost divisor: a bag query costs C / k
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    include_subset_accuracy: bool = False

    def __post_init__(self):
        if self.criterion not in CRITERION_NAMES:
            raise ValueError(f"criterion must be one of {CRITERION_NAMES}, got {self.criterion!r}")
        if self.mode not in ("full-gd", "pair-sgd", "bag-sgd"):
            raise ValueError(f"unknown update mode {self.mode!r}")
        if self.queries < 0:
            raise ValueError("queries must be >= 0")
        if self.eval_every <= 0:
            raise ValueError("eval_every must be > 0")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class QueryRecord:
    q: int
    selection: SelectionResult
    revealed: list[tuple[tuple[int, int], int]]
    cumulative_cost: float


@dataclass
class RunResult:
    records: list[QueryRecord]
    curve: list[MetricsRow]
    weights: np.ndarray


def simulated_oracle(oracle: OracleTruth, b: int, c: int) -> int:
    """Ground-truth answer for pair (b, c); pure and repeatable."""
    return oracle.value(b, c)


def _validate(train: MimlDataset, oracle: OracleTruth, test: MimlDataset, cfg: RunConfig) -> None:
    if train.num_bags != oracle.num_bags or train.num_classes != oracle.num_classes:
        raise ValueError("training set and oracle truth disagree in shape")
    if test.num_classes != train.num_classes or test.feature_dim != train.feature_dim:
        raise ValueError("test set disagrees with the training set in classes or features")
    known = train.labels != -1
    if np.any(train.labels[known] != oracle.labels[known]):
        raise ValueError("already-revealed training labels contradict the oracle truth")
    if cfg.criterion == "bag-all":
        pool = int(np.sum(np.any(train.labels == -1, axis=1)))
    else:
        pool = train.num_unavailable()
    if cfg.queries > pool:
        raise ValueError(f"query budget {cfg.queries} exceeds the available pool of {pool}")


def run(train: MimlDataset, oracle: OracleTruth, test: MimlDataset, cfg: RunConfig) -> RunResult:
    """Run the full active-learning loop; deterministic given the seeds."""
    _validate(train, oracle, test, cfg)
    ds = train.copy()
    C = ds.num_classes

    init_cfg = replace(cfg.train, mode="full-gd")
    w0 = np.zeros((C, ds.feature_dim))
    w, _ = full_gd(ds, init_cfg, w0)

    sgd_cfg = cfg.train if cfg.train.mode == cfg.mode else replace(cfg.train, mode=cfg.mode)
    if cfg.mode == "full-gd":
        state = SgdState(w=w)  # plain carrier; no projection state needed
    else:
        state = SgdState.start(w, sgd_cfg, C, ds.max_bag_size)

    rng = np.random.default_rng(cfg.seed)
    records: list[QueryRecord] = []
    curve = [evaluate(state.w, test, cfg.threshold, cost=0.0,
                      include_subset=cfg.include_subset_accuracy)]
    cost = 0.0
    last_eval = 0.0

    for q in range(1, cfg.queries + 1):
        sel = select(ds, state.w, cfg.criterion, rng=rng, k=cfg.k)
        revealed: list[tuple[tuple[int, int], int]] = []
        if sel.kind == "pair":
            b, c = sel.pair
            value = simulated_oracle(oracle, b, c)
            ds.reveal(b, c, value)
            revealed.append(((b, c), value))
        else:
            b = sel.bag
            for c in ds.unlabeled_classes(b):
                value = simulated_oracle(oracle, b, c)
                ds.reveal(b, c, value)
                revealed.append(((b, c), value))
        cost += sel.cost_units

        if cfg.mode == "full-gd":
            state.w, _ = full_gd(ds, init_cfg, state.w)
        else:
            if cfg.train.reset_schedule:
                state.k = 1
            # a whole-bag answer always applies as one bag-gradient step
            step_mode = "bag-sgd" if sel.kind == "bag" else cfg.mode
            step_cfg = sgd_cfg if sgd_cfg.mode == step_mode else replace(sgd_cfg, mode=step_mode)
            (bq, cq), vq = revealed[0]
            state = online_update(state, bq, cq, vq, ds, step_cfg)

        records.append(QueryRecord(q=q, selection=sel, revealed=revealed, cumulative_cost=cost))
        if cost - last_eval >= cfg.eval_every - 1e-9:
            curve.append(evaluate(state.w, test, cfg.threshold, cost=cost,
                                  include_subset=cfg.include_subset_accuracy))
            last_eval = cost

    if cfg.queries > 0 and cost > last_eval + 1e-9:
        curve.append(evaluate(state.w, test, cfg.threshold, cost=cost,
                              include_subset=cfg.include_subset_accuracy))
    return RunResult(records=records, curve=curve, weights=state.w)


def write_queries(path, records: list[QueryRecord]) -> None:
    """Query-log CSV: q,kind,bag,class,score,revealed,cost.

    Pair rows carry the revealed value directly; whole-bag rows leave the
    class cell empty and list the answers as 'c=v' entries joined by ';'.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("q,kind,bag,class,score,revealed,cost\n")
        for rec in records:
            sel = rec.selection
            if sel.kind == "pair":
                b, c = sel.pair
                cls = str(c)
                revealed = str(rec.revealed[0][1])
            else:
                b = sel.bag
                cls = ""
                revealed = ";".join(f"{c}={v}" for (_, c), v in rec.revealed)
            score = "" if np.isnan(sel.score) else repr(float(sel.score))
            fh.write(f"{rec.q},{sel.kind},{b},{cls},{score},{revealed},{repr(float(rec.cumulative_cost))}\n")
