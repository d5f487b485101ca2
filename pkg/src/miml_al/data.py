"""Data model for multi-instance multi-label (MIML) learning with incomplete labels.

A sample ("bag") is a set of instance feature vectors sharing one label
vector.  Each of the C class labels of a bag is tri-state: 0 (absent),
1 (present) or -1 (unknown).  The pairs (bag, class) whose label is known
form the available index set L; the rest form the unavailable set U, which
is the pool that active-learning queries draw from.

Bag indices and class indices are 1-based at every public interface; the
first bag is bag 1 and the first class is class 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NEGATIVE = 0
POSITIVE = 1
UNKNOWN = -1

_VALID_TRISTATE = (-1, 0, 1)


@dataclass
class Bag:
    """One bag: an opaque id and an (n_instances, n_features) float matrix."""

    id: str
    instances: np.ndarray

    def __post_init__(self):
        self.instances = np.asarray(self.instances, dtype=float)
        if self.instances.ndim != 2:
            raise ValueError(f"bag {self.id!r}: instances must be a 2-D array")
        if self.instances.shape[0] < 1:
            raise ValueError(f"bag {self.id!r}: empty bag")
        if not np.all(np.isfinite(self.instances)):
            raise ValueError(f"bag {self.id!r}: non-finite feature value")

    @property
    def size(self) -> int:
        return self.instances.shape[0]

    @property
    def dim(self) -> int:
        return self.instances.shape[1]


def _instances(bag) -> np.ndarray:
    """Accept a Bag or a raw (n, d) array wherever a bag is expected."""
    if isinstance(bag, Bag):
        return bag.instances
    x = np.asarray(bag, dtype=float)
    if x.ndim != 2:
        raise ValueError("a bag must be a Bag or a 2-D (n_instances, n_features) array")
    return x


def validate_bags(bags: list) -> list[Bag]:
    """Coerce a list of Bag/array entries to Bag objects with a uniform dimension."""
    if len(bags) == 0:
        raise ValueError("need at least one bag")
    out = []
    for i, b in enumerate(bags):
        out.append(b if isinstance(b, Bag) else Bag(id=f"b{i}", instances=np.asarray(b, dtype=float)))
    d = out[0].dim
    for b in out:
        if b.dim != d:
            raise ValueError(f"bag {b.id!r}: feature dimension {b.dim} != {d}")
    return out


def validate_label_matrix(labels, n_bags: int | None = None, allow_unknown: bool = True) -> np.ndarray:
    """Validate a (B, C) tri-state label matrix and return it as int8."""
    y = np.asarray(labels)
    if y.ndim != 2:
        raise ValueError("labels must be a 2-D (n_bags, n_classes) array")
    if n_bags is not None and y.shape[0] != n_bags:
        raise ValueError(f"labels have {y.shape[0]} rows, expected {n_bags}")
    if y.shape[1] < 2:
        raise ValueError("need at least 2 classes")
    allowed = _VALID_TRISTATE if allow_unknown else (0, 1)
    if not np.all(np.isin(y, allowed)):
        raise ValueError(f"invalid label value: entries must be in {set(allowed)}")
    return y.astype(np.int8)


class MimlDataset:
    """Bags plus a tri-state (B, C) label matrix.

    Mutable only through :meth:`reveal`, which moves exactly one (bag, class)
    pair from the unavailable set U to the available set L.  Everything else
    treats the dataset as read-only, so snapshots may be shared freely.
    """

    def __init__(self, bags: list, labels):
        self.bags = validate_bags(bags)
        self.labels = validate_label_matrix(labels, n_bags=len(self.bags))

    # -- shape ------------------------------------------------------------

    @property
    def num_bags(self) -> int:
        return len(self.bags)

    @property
    def num_classes(self) -> int:
        return self.labels.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.bags[0].dim

    @property
    def max_bag_size(self) -> int:
        return max(b.size for b in self.bags)

    # -- index-set bookkeeping (all indices 1-based) ----------------------

    def available_pairs(self) -> set[tuple[int, int]]:
        rows, cols = np.nonzero(self.labels != UNKNOWN)
        return {(int(b) + 1, int(c) + 1) for b, c in zip(rows, cols)}

    def unavailable_pairs(self) -> set[tuple[int, int]]:
        rows, cols = np.nonzero(self.labels == UNKNOWN)
        return {(int(b) + 1, int(c) + 1) for b, c in zip(rows, cols)}

    def num_available(self) -> int:
        return int(np.sum(self.labels != UNKNOWN))

    def num_unavailable(self) -> int:
        return int(np.sum(self.labels == UNKNOWN))

    def available_classes(self, b: int) -> list[int]:
        return [int(c) + 1 for c in np.flatnonzero(self.labels[self._bag_index(b)] != UNKNOWN)]

    def positive_classes(self, b: int) -> list[int]:
        return [int(c) + 1 for c in np.flatnonzero(self.labels[self._bag_index(b)] == POSITIVE)]

    def negative_classes(self, b: int) -> list[int]:
        return [int(c) + 1 for c in np.flatnonzero(self.labels[self._bag_index(b)] == NEGATIVE)]

    def unlabeled_classes(self, b: int) -> list[int]:
        return [int(c) + 1 for c in np.flatnonzero(self.labels[self._bag_index(b)] == UNKNOWN)]

    def labeled_entries(self, b: int) -> list[tuple[int, int]]:
        """(class, value) pairs of the bag's currently available labels."""
        row = self.labels[self._bag_index(b)]
        return [(int(c) + 1, int(row[c])) for c in np.flatnonzero(row != UNKNOWN)]

    def is_fully_labeled(self) -> bool:
        return not np.any(self.labels == UNKNOWN)

    def _bag_index(self, b: int) -> int:
        if not 1 <= b <= self.num_bags:
            raise ValueError(f"bag index {b} out of range 1..{self.num_bags}")
        return b - 1

    def _class_index(self, c: int) -> int:
        if not 1 <= c <= self.num_classes:
            raise ValueError(f"class index {c} out of range 1..{self.num_classes}")
        return c - 1

    # -- mutation ----------------------------------------------------------

    def reveal(self, b: int, c: int, value: int) -> "MimlDataset":
        """Set the label of pair (b, c), which must currently be unknown."""
        bi, ci = self._bag_index(b), self._class_index(c)
        if value not in (0, 1):
            raise ValueError(f"revealed value must be 0 or 1, got {value}")
        if self.labels[bi, ci] != UNKNOWN:
            raise ValueError(f"pair ({b}, {c}) is already labeled")
        self.labels[bi, ci] = value
        return self

    def copy(self) -> "MimlDataset":
        out = MimlDataset.__new__(MimlDataset)
        out.bags = self.bags
        out.labels = self.labels.copy()
        return out


def derive_index_sets(ds: MimlDataset) -> tuple[set, set]:
    """The available/unavailable (bag, class) index sets, 1-based."""
    return ds.available_pairs(), ds.unavailable_pairs()


def reveal_label(ds: MimlDataset, b: int, c: int, value: int) -> MimlDataset:
    return ds.reveal(b, c, value)


@dataclass
class OracleTruth:
    """Complete {0, 1} ground-truth labels replayed by the simulated oracle."""

    ids: list[str]
    labels: np.ndarray

    def __post_init__(self):
        self.labels = validate_label_matrix(self.labels, n_bags=len(self.ids), allow_unknown=False)

    @property
    def num_bags(self) -> int:
        return len(self.ids)

    @property
    def num_classes(self) -> int:
        return self.labels.shape[1]

    def value(self, b: int, c: int) -> int:
        if not 1 <= b <= self.num_bags:
            raise ValueError(f"bag index {b} out of range 1..{self.num_bags}")
        if not 1 <= c <= self.num_classes:
            raise ValueError(f"class index {c} out of range 1..{self.num_classes}")
        return int(self.labels[b - 1, c - 1])

    def subset(self, ids: list[str]) -> "OracleTruth":
        pos = {bid: i for i, bid in enumerate(self.ids)}
        idx = [pos[bid] for bid in ids]
        return OracleTruth(ids=list(ids), labels=self.labels[idx])


def dataset_from_truth(bags: list[Bag], truth: OracleTruth) -> MimlDataset:
    """A fully labeled dataset carrying the oracle's labels."""
    return MimlDataset(bags, truth.labels.copy())


# -- file ingestion ---------------------------------------------------------
#
# Features file: one line per instance, "bag_id,f1,...,fd", no header.
# Labels file:   one line per bag,      "bag_id,y1,...,yC" with y in {-1,0,1}
#                (oracle-truth files restrict y to {0,1}).


def _read_features(path) -> tuple[list[str], dict[str, list[list[float]]]]:
    order: list[str] = []
    rows: dict[str, list[list[float]]] = {}
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected 'bag_id,f1,...,fd'")
            bid = parts[0]
            try:
                feats = [float(tok) for tok in parts[1:]]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric feature value") from None
            if dim is None:
                dim = len(feats)
            elif len(feats) != dim:
                raise ValueError(f"{path}:{lineno}: ragged feature row ({len(feats)} values, expected {dim})")
            if bid not in rows:
                order.append(bid)
                rows[bid] = []
            rows[bid].append(feats)
    if not order:
        raise ValueError(f"{path}: no instances found")
    return order, rows


def _read_labels(path, allowed: tuple[int, ...]) -> dict[str, list[int]]:
    out: dict[str, list[int]] = {}
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: expected 'bag_id,y1,...,yC'")
            bid = parts[0]
            if bid in out:
                raise ValueError(f"{path}:{lineno}: duplicate labels row for bag {bid!r}")
            try:
                vals = [int(tok) for tok in parts[1:]]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: invalid label value {parts[1:]}") from None
            for v in vals:
                if v not in allowed:
                    raise ValueError(f"{path}:{lineno}: invalid label value {v}")
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ValueError(f"{path}:{lineno}: ragged label row")
            out[bid] = vals
    if not out:
        raise ValueError(f"{path}: no label rows found")
    return out


def _match_ids(order: list[str], rows: dict, label_rows: dict, features_path, labels_path):
    missing_labels = [bid for bid in order if bid not in label_rows]
    if missing_labels:
        raise ValueError(f"bag {missing_labels[0]!r} present in {features_path} but not in {labels_path}")
    extra = [bid for bid in label_rows if bid not in rows]
    if extra:
        raise ValueError(f"bag {extra[0]!r} present in {labels_path} but not in {features_path}")


def load_dataset(features_path, labels_path) -> MimlDataset:
    """Load a (possibly incompletely labeled) dataset from the two text files.

    Bags appear in first-appearance order of the features file; the feature
    dimension and the number of classes are inferred from the files.
    """
    order, rows = _read_features(features_path)
    label_rows = _read_labels(labels_path, allowed=_VALID_TRISTATE)
    _match_ids(order, rows, label_rows, features_path, labels_path)
    bags = [Bag(id=bid, instances=np.array(rows[bid], dtype=float)) for bid in order]
    labels = np.array([label_rows[bid] for bid in order], dtype=np.int8)
    return MimlDataset(bags, labels)


def load_truth(features_path, labels_path) -> tuple[list[Bag], OracleTruth]:
    """Load bags plus an oracle-truth label matrix (values restricted to {0, 1})."""
    order, rows = _read_features(features_path)
    label_rows = _read_labels(labels_path, allowed=(0, 1))
    _match_ids(order, rows, label_rows, features_path, labels_path)
    bags = [Bag(id=bid, instances=np.array(rows[bid], dtype=float)) for bid in order]
    truth = OracleTruth(ids=order, labels=np.array([label_rows[bid] for bid in order], dtype=np.int8))
    return bags, truth


def write_features(path, bags: list[Bag]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for bag in bags:
            for row in bag.instances:
                fh.write(bag.id + "," + ",".join(repr(float(v)) for v in row) + "\n")


def write_labels(path, ids: list[str], labels: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for bid, row in zip(ids, labels):
            fh.write(bid + "," + ",".join(str(int(v)) for v in row) + "\n")


# -- masking and synthetic data ----------------------------------------------


def mask_labels(
    truth: OracleTruth,
    bags: list[Bag],
    fraction: float | None = None,
    count: int | None = None,
    seed: int = 0,
) -> MimlDataset:
    """Hide all labels except those of a seeded random choice of fully labeled bags.

    Exactly one of ``fraction`` / ``count`` selects how many bags keep their
    complete label vector; every other entry becomes unknown.
    """
    B = truth.num_bags
    if (fraction is None) == (count is None):
        raise ValueError("specify exactly one of fraction or count")
    if fraction is not None:
        if not 0.0 <= fraction <= 1.0:
            raise ValueError(f"fraction must be in [0, 1], got {fraction}")
        count = int(round(fraction * B))
    if not 0 <= count <= B:
        raise ValueError(f"count must be in [0, {B}], got {count}")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(B, size=count, replace=False)
    labels = np.full_like(truth.labels, UNKNOWN)
    labels[chosen] = truth.labels[chosen]
    return MimlDataset(bags, labels)


@dataclass
class SyntheticSample:
    """A generated corpus: bags, complete truth, its fully labeled dataset,
    the latent per-instance class labels (1-based), and the weights used."""

    bags: list[Bag] = field(repr=False)
    truth: OracleTruth = field(repr=False)
    dataset: MimlDataset = field(repr=False)
    instance_labels: list[np.ndarray] = field(repr=False)
    weights: np.ndarray = field(repr=False)


def generate_synthetic(
    num_bags: int,
    num_classes: int,
    feature_dim: int,
    bag_size_range: tuple[int, int] = (2, 5),
    w_true: np.ndarray | None = None,
    separation: float = 2.0,
    seed: int = 0,
) -> SyntheticSample:
    """Sample a synthetic MIML corpus.

    Instance features are standard normal; each instance draws a latent class
    from the multinomial logistic model under ``w_true`` (drawn as
    ``separation * N(0, 1)`` when not given); a bag is positive for a class
    exactly when one of its instances carries that latent class.
    """
    lo, hi = bag_size_range
    if lo < 1 or hi < lo:
        raise ValueError(f"invalid bag size range {bag_size_range}")
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    rng = np.random.default_rng(seed)
    if w_true is None:
        w_true = separation * rng.standard_normal((num_classes, feature_dim))
    else:
        w_true = np.asarray(w_true, dtype=float)
        if w_true.shape != (num_classes, feature_dim):
            raise ValueError(f"w_true must have shape ({num_classes}, {feature_dim}), got {w_true.shape}")

    width = len(str(max(num_bags - 1, 1)))
    bags, latents, label_rows = [], [], []
    for b in range(num_bags):
        n = int(rng.integers(lo, hi + 1))
        X = rng.standard_normal((n, feature_dim))
        scores = X @ w_true.T
        scores -= scores.max(axis=1, keepdims=True)
        probs = np.exp(scores)
        probs /= probs.sum(axis=1, keepdims=True)
        # inverse-CDF draw per instance keeps generation reproducible
        u = rng.random(n)
        latent0 = (u[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)
        latent0 = np.minimum(latent0, num_classes - 1)
        row = np.zeros(num_classes, dtype=np.int8)
        row[np.unique(latent0)] = 1
        bags.append(Bag(id=f"b{b:0{width}d}", instances=X))
        latents.append(latent0 + 1)
        label_rows.append(row)

    truth = OracleTruth(ids=[b.id for b in bags], labels=np.array(label_rows, dtype=np.int8))
    return SyntheticSample(
        bags=bags,
        truth=truth,
        dataset=dataset_from_truth(bags, truth),
        instance_labels=latents,
        weights=w_true,
    )


def cross_validation_splits(truth: OracleTruth, folds: int, seed: int = 0) -> list[tuple[tuple, tuple]]:
    """Seeded partition of the bag ids into ``folds`` (train, test) splits.

    Every bag lands in exactly one test split and split sizes differ by at
    most one.
    """
    B = truth.num_bags
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if folds > B:
        raise ValueError(f"folds ({folds}) cannot exceed the number of bags ({B})")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(B)
    splits = []
    for f in range(folds):
        test_idx = sorted(int(i) for i in perm[f::folds])
        test = tuple(truth.ids[i] for i in test_idx)
        test_set = set(test_idx)
        train = tuple(truth.ids[i] for i in range(B) if i not in test_set)
        splits.append((train, test))
    return splits


def select_bags(bags: list[Bag], truth: OracleTruth, ids) -> tuple[list[Bag], OracleTruth]:
    """Restrict a corpus to the given bag ids (in the given order)."""
    pos = {b.id: i for i, b in enumerate(bags)}
    missing = [bid for bid in ids if bid not in pos]
    if missing:
        raise ValueError(f"unknown bag id {missing[0]!r}")
    picked = [bags[pos[bid]] for bid in ids]
    return picked, truth.subset(list(ids))
