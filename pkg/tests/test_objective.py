"""Pair losses, the averaged objective, and every gradient against central
finite differences."""

import numpy as np
import pytest

from miml_al.bruteforce import bruteforce_marginal, finite_diff_gradient, max_relative_error
from miml_al.data import Bag, MimlDataset
from miml_al.objective import (
    bag_gradient,
    logprob_gradient_for_label,
    mml_gradient,
    mml_objective,
    pair_gradient,
    pair_loss,
)


def random_bag(rng, C=None, n=None, d=None):
    C = C or int(rng.integers(2, 5))
    n = n or int(rng.integers(1, 5))
    d = d or int(rng.integers(1, 6))
    w = rng.uniform(-1.5, 1.5, size=(C, d))
    return w, Bag("r", rng.standard_normal((n, d)))


def random_dataset(rng, num_bags=3):
    C = int(rng.integers(2, 5))
    d = int(rng.integers(1, 5))
    bags = [Bag(f"b{i}", rng.standard_normal((int(rng.integers(1, 4)), d))) for i in range(num_bags)]
    labels = rng.integers(-1, 2, size=(num_bags, C))
    return MimlDataset(bags, labels), rng.uniform(-1.5, 1.5, size=(C, d))


class TestPairLoss:
    def test_negative_label_uniform(self):
        """Zero weights, C=2, two instances, label absent: -2 log(1/2)."""
        w = np.zeros((2, 3))
        bag = Bag("b", np.ones((2, 3)))
        assert pair_loss(w, bag, 1, 0) == pytest.approx(2 * np.log(2), abs=1e-12)
        assert pair_loss(w, bag, 1, 0) == pytest.approx(1.3862943611198906, abs=1e-10)

    def test_positive_label_uniform(self):
        """Same setup, label present: -log(3/4)."""
        w = np.zeros((2, 3))
        bag = Bag("b", np.ones((2, 3)))
        assert pair_loss(w, bag, 1, 1) == pytest.approx(-np.log(0.75), abs=1e-12)
        assert pair_loss(w, bag, 1, 1) == pytest.approx(0.2876820724517809, abs=1e-10)

    def test_matches_enumerated_marginal(self):
        rng = np.random.default_rng(10)
        for _ in range(60):
            w, bag = random_bag(rng)
            c = int(rng.integers(1, w.shape[0] + 1))
            label = int(rng.integers(0, 2))
            ref = -np.log(bruteforce_marginal(w, bag, c, label))
            assert abs(pair_loss(w, bag, c, label) - ref) < 1e-10

    def test_non_negative(self):
        rng = np.random.default_rng(11)
        for _ in range(60):
            w, bag = random_bag(rng)
            c = int(rng.integers(1, w.shape[0] + 1))
            assert pair_loss(w, bag, c, int(rng.integers(0, 2))) >= 0.0

    def test_label_validated(self):
        with pytest.raises(ValueError, match="label"):
            pair_loss(np.zeros((2, 1)), Bag("b", [[1.0]]), 1, 2)


class TestMmlObjective:
    def test_no_labels_means_only_penalty(self):
        ds = MimlDataset([Bag("a", [[1.0, 0.0]])], np.array([[-1, -1]]))
        assert mml_objective(np.ones((2, 2)), ds, 0.0) == 0.0
        assert mml_objective(np.ones((2, 2)), ds, 2.0) == pytest.approx(4.0)

    def test_single_labeled_pair(self):
        rng = np.random.default_rng(12)
        w, bag = random_bag(rng, C=3)
        ds = MimlDataset([bag], np.array([[-1, 1, -1]]))
        assert mml_objective(w, ds, 0.0) == pytest.approx(pair_loss(w, bag, 2, 1), abs=1e-14)

    def test_zero_weight_bound(self):
        """At w=0 the unregularized objective never exceeds
        max(log C, max bag size / (C - 1))."""
        rng = np.random.default_rng(13)
        for _ in range(30):
            ds, w = random_dataset(rng)
            C = ds.num_classes
            bound = max(np.log(C), ds.max_bag_size / (C - 1))
            assert mml_objective(np.zeros_like(w), ds, 0.0) <= bound + 1e-12

    def test_non_negative(self):
        rng = np.random.default_rng(14)
        for _ in range(30):
            ds, w = random_dataset(rng)
            assert mml_objective(w, ds, 0.0) >= 0.0
            assert mml_objective(w, ds, 0.5) >= 0.0


class TestMmlGradient:
    def test_zero_without_labels(self):
        ds = MimlDataset([Bag("a", [[1.0, 0.0]])], np.array([[-1, -1]]))
        np.testing.assert_array_equal(mml_gradient(np.zeros((2, 2)), ds, 0.0), np.zeros((2, 2)))

    def test_finite_differences(self):
        rng = np.random.default_rng(15)
        for _ in range(25):
            ds, w = random_dataset(rng)
            lam = float(rng.choice([0.0, 0.01, 0.5]))
            g = mml_gradient(w, ds, lam)
            fd = finite_diff_gradient(lambda wv: mml_objective(wv, ds, lam), w)
            assert max_relative_error(fd, g) < 1e-5

    def test_rows_sum_to_zero_without_penalty(self):
        """Softmax shift invariance: class-gradient rows cancel."""
        rng = np.random.default_rng(16)
        for _ in range(25):
            ds, w = random_dataset(rng)
            g = mml_gradient(w, ds, 0.0)
            np.testing.assert_allclose(g.sum(axis=0), 0.0, atol=1e-8)


class TestPairGradient:
    def test_finite_differences(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            w, bag = random_bag(rng)
            c = int(rng.integers(1, w.shape[0] + 1))
            label = int(rng.integers(0, 2))
            lam = float(rng.choice([0.0, 0.1]))
            g = pair_gradient(w, bag, c, label, lam)
            fd = finite_diff_gradient(
                lambda wv: pair_loss(wv, bag, c, label) + 0.5 * lam * float(np.sum(wv * wv)), w
            )
            assert max_relative_error(fd, g) < 1e-5

    def test_saturated_positive_is_stationary(self):
        """A positive label the model already saturates on yields a
        negligible gradient (the absence probability sits on the floor)."""
        w = np.array([[60.0], [-60.0]])
        bag = Bag("b", np.ones((3, 1)))
        g = pair_gradient(w, bag, 1, 1, 0.0)
        assert float(np.linalg.norm(g)) < 1e-8

    def test_single_pair_matches_scaled_full_gradient(self):
        rng = np.random.default_rng(18)
        w, bag = random_bag(rng, C=3)
        ds = MimlDataset([bag], np.array([[-1, 0, -1]]))
        full = mml_gradient(w, ds, 0.0)
        single = pair_gradient(w, bag, 2, 0, 0.0)
        np.testing.assert_allclose(single, full * 1.0, atol=1e-12)


class TestBagGradient:
    def test_single_label_equals_pair(self):
        rng = np.random.default_rng(19)
        w, bag = random_bag(rng, C=4)
        g_bag = bag_gradient(w, bag, [(3, 1)], 0.2)
        g_pair = pair_gradient(w, bag, 3, 1, 0.2)
        np.testing.assert_allclose(g_bag, g_pair, atol=1e-15)

    def test_finite_differences(self):
        rng = np.random.default_rng(20)
        for _ in range(30):
            w, bag = random_bag(rng)
            C = w.shape[0]
            count = int(rng.integers(1, C + 1))
            classes = rng.choice(C, size=count, replace=False) + 1
            labeled = [(int(c), int(rng.integers(0, 2))) for c in classes]
            g = bag_gradient(w, bag, labeled, 0.0)
            fd = finite_diff_gradient(lambda wv: sum(pair_loss(wv, bag, c, v) for c, v in labeled), w)
            assert max_relative_error(fd, g) < 1e-5

    def test_empty_labels_rejected(self):
        with pytest.raises(ValueError, match="no available labels"):
            bag_gradient(np.zeros((2, 1)), Bag("b", [[1.0]]), [], 0.0)

    def test_rows_sum_to_zero_without_penalty(self):
        rng = np.random.default_rng(21)
        w, bag = random_bag(rng, C=3)
        g = bag_gradient(w, bag, [(1, 0), (3, 1)], 0.0)
        np.testing.assert_allclose(g.sum(axis=0), 0.0, atol=1e-8)


class TestLogprobGradientForLabel:
    def test_sign_identity(self):
        """Equals minus the unregularized pair-loss gradient, exactly."""
        rng = np.random.default_rng(22)
        for _ in range(20):
            w, bag = random_bag(rng)
            c = int(rng.integers(1, w.shape[0] + 1))
            y = int(rng.integers(0, 2))
            np.testing.assert_array_equal(
                logprob_gradient_for_label(w, bag, c, y), -pair_gradient(w, bag, c, y, 0.0)
            )

    def test_finite_differences(self):
        rng = np.random.default_rng(23)
        for _ in range(30):
            w, bag = random_bag(rng)
            c = int(rng.integers(1, w.shape[0] + 1))
            y = int(rng.integers(0, 2))
            g = logprob_gradient_for_label(w, bag, c, y)
            fd = finite_diff_gradient(lambda wv: -pair_loss(wv, bag, c, y), w)
            assert max_relative_error(fd, g) < 1e-5

    def test_outcome_gradients_oppose(self):
        """In the symmetric two-class configuration the two outcome gradients
        never point the same way."""
        rng = np.random.default_rng(24)
        for _ in range(20):
            d = int(rng.integers(1, 5))
            w = np.zeros((2, d))
            bag = Bag("b", rng.standard_normal((int(rng.integers(1, 4)), d)))
            g0 = logprob_gradient_for_label(w, bag, 1, 0)
            g1 = logprob_gradient_for_label(w, bag, 1, 1)
            assert float(np.sum(g0 * g1)) <= 1e-12


class TestDecomposition:
    def test_full_gradient_is_mean_of_pair_gradients(self):
        rng = np.random.default_rng(25)
        for _ in range(15):
            ds, w = random_dataset(rng)
            lam = 0.3
            total = np.zeros_like(w)
            count = 0
            for b0 in range(ds.num_bags):
                for c0 in np.flatnonzero(ds.labels[b0] != -1):
                    total += pair_gradient(w, ds.bags[b0], int(c0) + 1, int(ds.labels[b0, c0]), 0.0)
                    count += 1
            if count == 0:
                continue
            expected = total / count + lam * w
            np.testing.assert_allclose(mml_gradient(w, ds, lam), expected, atol=1e-10)
