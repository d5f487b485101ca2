"""Scikit-learn style front end for the bag-level classifier.

``MimlClassifier`` follows the estimator protocol (``fit`` / ``predict`` /
``predict_proba`` / ``get_params``) so it slots into pipelines, cloning and
grid search.  X is a list of bags — each an (n_instances, n_features) array —
and y is a (n_bags, n_classes) matrix with entries 1 (present), 0 (absent)
or -1 (unknown); unknown cells simply do not contribute to training.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .data import Bag, MimlDataset, validate_bags, validate_label_matrix
from .metrics import evaluate
from .model import predict_matrix
from .training import TrainConfig, train


class MimlClassifier(BaseEstimator):
    """Instance-level multinomial model with OR-rule bag aggregation.

    Parameters
    ----------
    lam : quadratic penalty weight.
    mode : "full-gd" (batch descent with line search), "pair-sgd" or
        "bag-sgd" (projected SGD sweeps over the available labels).
    threshold : presence-probability cutoff used by ``predict``.
    max_epochs, grad_tol : stopping rules for the optimizer.
    c_prime, c_dprime : SGD step-size constants, eta_k = c' / (lam k + c'').
    standardize : z-score features using statistics of the training bags.
    random_state : seed for the SGD visit order.
    """

    def __init__(self, lam=1e-3, mode="full-gd", threshold=0.5, max_epochs=2000,
                 grad_tol=1e-6, c_prime=1.0, c_dprime=1.0, standardize=False,
                 random_state=0):
        self.lam = lam
        self.mode = mode
        self.threshold = threshold
        self.max_epochs = max_epochs
        self.grad_tol = grad_tol
        self.c_prime = c_prime
        self.c_dprime = c_dprime
        self.standardize = standardize
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        return TrainConfig(lam=self.lam, mode=self.mode, max_epochs=self.max_epochs,
                           grad_tol=self.grad_tol, c_prime=self.c_prime,
                           c_dprime=self.c_dprime)

    def fit(self, X, y):
        bags = validate_bags(list(X))
        labels = validate_label_matrix(y, n_bags=len(bags))
        if self.standardize:
            stacked = np.vstack([b.instances for b in bags])
            self.feature_mean_ = stacked.mean(axis=0)
            std = stacked.std(axis=0)
            self.feature_std_ = np.where(std > 0, std, 1.0)
            bags = self._scaled(bags)
        else:
            self.feature_mean_ = None
            self.feature_std_ = None
        ds = MimlDataset(bags, labels)
        self.weights_, self.trace_ = train(ds, self._train_config(), seed=self.random_state)
        self.n_classes_ = ds.num_classes
        self.n_features_ = ds.feature_dim
        return self

    def _scaled(self, bags: list[Bag]) -> list[Bag]:
        if self.feature_mean_ is None:
            return bags
        return [Bag(id=b.id, instances=(b.instances - self.feature_mean_) / self.feature_std_)
                for b in bags]

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise NotFittedError("this MimlClassifier instance is not fitted yet")

    def _prepared(self, X) -> list[Bag]:
        bags = validate_bags(list(X))
        if bags[0].dim != self.n_features_:
            raise ValueError(f"bags have {bags[0].dim} features, expected {self.n_features_}")
        return self._scaled(bags)

    def predict_proba(self, X) -> np.ndarray:
        """Per-bag presence probabilities, shape (n_bags, n_classes)."""
        self._check_fitted()
        _, probs = predict_matrix(self.weights_, self._prepared(X), self.threshold)
        return probs

    def predict(self, X) -> np.ndarray:
        """Thresholded presence labels, shape (n_bags, n_classes)."""
        self._check_fitted()
        pred, _ = predict_matrix(self.weights_, self._prepared(X), self.threshold)
        return pred

    def score(self, X, y) -> float:
        """Bag accuracy: mean Jaccard similarity of positive label sets."""
        self._check_fitted()
        bags = self._prepared(X)
        ds = MimlDataset(bags, validate_label_matrix(y, n_bags=len(bags), allow_unknown=False))
        return evaluate(self.weights_, ds, self.threshold).bag_accuracy
