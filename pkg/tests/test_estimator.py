"""The scikit-learn style estimator wrapper."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from miml_al.data import generate_synthetic
from miml_al.estimator import MimlClassifier


def corpus(seed=0, B=20, C=3, d=4):
    sample = generate_synthetic(B, C, d, (2, 4), seed=seed)
    bags = [b.instances for b in sample.bags]
    return bags, np.asarray(sample.truth.labels), sample


class TestProtocol:
    def test_get_set_params_roundtrip(self):
        est = MimlClassifier(lam=0.01, mode="bag-sgd")
        params = est.get_params()
        assert params["lam"] == 0.01 and params["mode"] == "bag-sgd"
        est.set_params(threshold=0.3)
        assert est.threshold == 0.3

    def test_clone(self):
        est = MimlClassifier(lam=0.05, max_epochs=10)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_not_fitted_error(self):
        bags, _, _ = corpus()
        with pytest.raises(NotFittedError):
            MimlClassifier().predict(bags)

    def test_fit_returns_self(self):
        bags, Y, _ = corpus(B=8)
        est = MimlClassifier(max_epochs=20)
        assert est.fit(bags, Y) is est


class TestFitPredict:
    def test_shapes_and_ranges(self):
        bags, Y, _ = corpus(B=15)
        est = MimlClassifier(max_epochs=60).fit(bags, Y)
        probs = est.predict_proba(bags)
        pred = est.predict(bags)
        assert probs.shape == (15, 3) and pred.shape == (15, 3)
        assert np.all((probs > 0) & (probs < 1))
        assert set(np.unique(pred)) <= {0, 1}
        assert est.weights_.shape == (3, 4)

    def test_learns_something(self):
        bags, Y, _ = corpus(B=40, seed=3)
        est = MimlClassifier(max_epochs=200).fit(bags, Y)
        assert est.score(bags, Y) > MimlClassifier(max_epochs=0).fit(bags, Y).score(bags, Y)

    def test_accepts_tristate_labels(self):
        bags, Y, _ = corpus(B=10)
        Y = Y.astype(int).copy()
        Y[::2, 0] = -1
        est = MimlClassifier(max_epochs=20).fit(bags, Y)
        assert est.weights_.shape == (3, 4)

    def test_sgd_modes_fit(self):
        bags, Y, _ = corpus(B=10)
        for mode in ("pair-sgd", "bag-sgd"):
            est = MimlClassifier(mode=mode, max_epochs=5, random_state=1).fit(bags, Y)
            assert np.all(np.isfinite(est.weights_))

    def test_feature_dim_checked_at_predict(self):
        bags, Y, _ = corpus(B=6)
        est = MimlClassifier(max_epochs=10).fit(bags, Y)
        with pytest.raises(ValueError, match="features"):
            est.predict([np.zeros((2, 7))])

    def test_bad_labels_rejected(self):
        bags, Y, _ = corpus(B=6)
        bad = Y.astype(int).copy()
        bad[0, 0] = 5
        with pytest.raises(ValueError, match="invalid label value"):
            MimlClassifier().fit(bags, bad)


class TestStandardize:
    def test_scaling_stored_and_applied(self):
        bags, Y, _ = corpus(B=12, seed=5)
        shifted = [b * 10.0 + 100.0 for b in bags]
        est = MimlClassifier(max_epochs=50, standardize=True).fit(shifted, Y)
        assert est.feature_mean_ is not None
        probs = est.predict_proba(shifted)
        assert np.all(np.isfinite(probs))

    def test_standardized_matches_prescaled_fit(self):
        bags, Y, _ = corpus(B=12, seed=6)
        stacked = np.vstack(bags)
        mean, std = stacked.mean(axis=0), stacked.std(axis=0)
        prescaled = [(b - mean) / std for b in bags]
        a = MimlClassifier(max_epochs=40, standardize=True).fit(bags, Y)
        b = MimlClassifier(max_epochs=40).fit(prescaled, Y)
        np.testing.assert_allclose(a.weights_, b.weights_, atol=1e-10)
