"""Ridge and SVR predictors, MAPE and Kendall tau."""

import math

import numpy as np
import pytest

from cimnet.predict import (IllConditionedError, RidgeModel, TargetTransform,
                            evaluate_predictor, fit_ridge, fit_svr_linear,
                            kendall_tau, mape, ridge_lambda_cv)


class TestRidge:
    def test_exact_linear_data_no_penalty(self):
        model = fit_ridge(np.array([[1.0], [2.0]]), np.array([2.0, 4.0]),
                          lam=0.0)
        assert model.weights[0] == pytest.approx(2.0)
        assert model.bias == pytest.approx(0.0, abs=1e-12)

    def test_penalized_two_point_fit(self):
        # hand-solved centered normal equations: w = 2/3, b = 2
        model = fit_ridge(np.array([[1.0], [2.0]]), np.array([2.0, 4.0]),
                          lam=1.0)
        assert model.weights[0] == pytest.approx(2.0 / 3.0)
        assert model.bias == pytest.approx(2.0)

    def test_huge_lambda_predicts_mean(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 4))
        y = rng.normal(size=50) + 3.0
        model = fit_ridge(X, y, lam=1e9)
        assert np.linalg.norm(model.weights) < 1e-6
        assert np.allclose(model.predict(X), y.mean(), atol=1e-4)

    def test_singular_at_zero_lambda(self):
        # one-hot segments are collinear with the bias, singular when lam=0
        X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(IllConditionedError):
            fit_ridge(X, np.array([1.0, 2.0, 1.0, 2.0]), lam=0.0)

    def test_stationarity_of_solution(self):
        rng = np.random.default_rng(1)
        for trial in range(20):
            n, d = int(rng.integers(20, 120)), int(rng.integers(2, 12))
            X = rng.normal(size=(n, d))
            y = rng.normal(size=n)
            lam = float(rng.choice([0.1, 1.0, 10.0]))
            model = fit_ridge(X, y, lam=lam)
            resid = X @ model.weights + model.bias - y
            grad_w = 2.0 * (X.T @ resid) + 2.0 * lam * model.weights
            grad_b = 2.0 * resid.sum()
            assert math.hypot(np.linalg.norm(grad_w), grad_b) <= 1e-8

    def test_log_transform_round_trip(self):
        X = np.array([[0.0], [1.0], [2.0]])
        y = np.array([1.0, 10.0, 100.0])
        model = fit_ridge(X, y, lam=0.0, transform=TargetTransform.LOG)
        assert np.allclose(model.predict(X), y, rtol=1e-9)

    def test_log_transform_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            fit_ridge(np.array([[1.0]]), np.array([0.0]),
                      transform=TargetTransform.LOG)

    def test_json_round_trip(self):
        model = fit_ridge(np.array([[1.0], [2.0]]), np.array([2.0, 4.0]),
                          lam=1.0)
        doc = model.to_json(schema_hash="abc123")
        restored = RidgeModel.from_json(doc)
        assert np.allclose(restored.weights, model.weights)
        assert doc["genome_schema_hash"] == "abc123"

    def test_lambda_cv_prefers_small_on_clean_data(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(200, 5))
        y = X @ np.arange(1.0, 6.0) + 0.5
        lam = ridge_lambda_cv(X, y, grid=(0.01, 10.0), folds=5, seed=0)
        assert lam == 0.01


class TestSvr:
    def test_linear_data_inside_tube(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(120, 3))
        y = X @ np.array([1.0, -2.0, 0.5]) + 1.0
        model = fit_svr_linear(X, y, c=10.0, epsilon=0.05, epochs=80, seed=0)
        resid = model.predict(X) - y
        # near-zero epsilon-insensitive loss at the optimum
        y_scale = y.std()
        hinge = np.maximum(0.0, np.abs(resid) / y_scale - 0.05)
        assert hinge.mean() < 0.05

    def test_huge_epsilon_zeroes_weights(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(60, 4))
        y = rng.normal(size=60)
        model = fit_svr_linear(X, y, c=1.0, epsilon=1e6, epochs=30, seed=0)
        assert np.linalg.norm(model.weights) < 1e-3

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(40, 3))
        y = rng.normal(size=40)
        m1 = fit_svr_linear(X, y, seed=9)
        m2 = fit_svr_linear(X, y, seed=9)
        assert np.array_equal(m1.weights, m2.weights)

    def test_validates_hyperparameters(self):
        X, y = np.zeros((2, 1)), np.zeros(2)
        with pytest.raises(ValueError):
            fit_svr_linear(X, y, c=0.0)
        with pytest.raises(ValueError):
            fit_svr_linear(X, y, epsilon=-1.0)


class TestMape:
    def test_zero_error(self):
        assert mape(np.array([3.0, 4.0]), np.array([3.0, 4.0])) == 0.0

    def test_hand_example(self):
        assert mape(np.array([100.0, 200.0]),
                    np.array([110.0, 180.0])) == pytest.approx(10.0)

    def test_scale_invariance(self):
        y = np.array([10.0, 20.0, 30.0])
        p = np.array([12.0, 18.0, 33.0])
        assert mape(7 * y, 7 * p) == pytest.approx(mape(y, p))

    def test_zero_ground_truth_rejected(self):
        with pytest.raises(ValueError):
            mape(np.array([0.0, 1.0]), np.array([1.0, 1.0]))


def brute_force_tau(x, y):
    """Independent O(n^2) pair-counting reference."""
    n = len(x)
    cmd = 0
    ties_x = 0
    ties_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = int(x[i] > x[j]) - int(x[i] < x[j])
            dy = int(y[i] > y[j]) - int(y[i] < y[j])
            cmd += dx * dy
            ties_x += dx == 0
            ties_y += dy == 0
    n0 = n * (n - 1) // 2
    return cmd / math.sqrt(float(n0 - ties_x) * float(n0 - ties_y))


class TestKendallTau:
    def test_identical_orderings(self):
        assert kendall_tau(np.arange(10.0), np.arange(10.0)) == 1.0

    def test_reversed(self):
        assert kendall_tau(np.arange(10.0), -np.arange(10.0)) == -1.0

    def test_hand_example(self):
        tau = kendall_tau(np.array([1.0, 2, 3, 4]), np.array([1.0, 3, 2, 4]))
        assert tau == pytest.approx(4.0 / 6.0)

    def test_constant_vector_rejected(self):
        with pytest.raises(ValueError):
            kendall_tau(np.ones(5), np.arange(5.0))

    def test_matches_brute_force_with_ties(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            n = int(rng.integers(2, 40))
            x = rng.integers(0, 6, size=n).astype(float)
            y = rng.integers(0, 6, size=n).astype(float)
            if np.all(x == x[0]) or np.all(y == y[0]):
                continue
            assert kendall_tau(x, y) == brute_force_tau(x, y)

    def test_matches_scipy(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        rng = np.random.default_rng(7)
        for _ in range(20):
            x = rng.integers(0, 10, size=30).astype(float)
            y = rng.integers(0, 10, size=30).astype(float)
            if np.all(x == x[0]) or np.all(y == y[0]):
                continue
            ref = scipy_stats.kendalltau(x, y).statistic
            assert kendall_tau(x, y) == pytest.approx(ref, abs=1e-12)


class TestEvaluatePredictor:
    def _pool(self, n=600):
        rng = np.random.default_rng(8)
        X = rng.integers(0, 2, size=(n, 12)).astype(float)
        y = np.exp(X @ rng.normal(size=12) * 0.3 + 5.0
                   + rng.normal(size=n) * 0.02)
        return X, y

    def test_curve_structure(self):
        X, y = self._pool()
        curve = evaluate_predictor(X, y, train_sizes=(50, 100, 200),
                                   trials=4, test_size=100)
        assert [e.n_train for e in curve] == [50, 100, 200]
        assert all(e.n_test == 100 for e in curve)

    def test_more_data_helps(self):
        X, y = self._pool()
        curve = evaluate_predictor(X, y, train_sizes=(50, 400), trials=6,
                                   test_size=150)
        assert curve[-1].mape <= curve[0].mape + 1.0

    def test_pool_too_small(self):
        X, y = self._pool(120)
        with pytest.raises(ValueError):
            evaluate_predictor(X, y, train_sizes=(200,), trials=2,
                               test_size=50)
