import numpy as np
import pytest

from flowguard.boosting import GradientBoostedTrees, log_loss, sigmoid
from flowguard.errors import InsufficientDataError


def test_gradient_hessian_values():
    # For logistic loss, g = p - y and h = p (1 - p); at p = 0.5, y = 1
    # that is g = -0.5, h = 0.25. Exercised through a one-row, one-round fit
    # with a balanced prior (base margin 0 gives p = 0.5 on every row).
    X = np.array([[0.0], [1.0]])
    y = np.array([0, 1])
    model = GradientBoostedTrees(n_rounds=1, max_depth=1, learning_rate=1.0,
                                 reg_lambda=0.0).fit(X, y)
    assert model.base_score_ == 0.0
    root = model.trees_[0]
    # Leaf weight is -G/(H + lambda); the y=1 leaf has G = -0.5, H = 0.25.
    right = root.right if X[1, 0] > root.threshold else root.left
    assert right.value == pytest.approx(-(-0.5) / 0.25)


def test_single_leaf_moves_toward_majority():
    # All-positive-leaning data: a depth-limited stump's leaves move margins
    # in the direction of sum(y - p).
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 2))
    y = np.array([1] * 40 + [0] * 10)
    model = GradientBoostedTrees(n_rounds=1, max_depth=1, reg_lambda=0.0).fit(X, y)
    p0 = sigmoid(np.full(50, model.base_score_))
    g_sum = np.sum(y - p0)
    outputs = model.decision_function(X) - model.base_score_
    assert np.sign(np.sum(outputs)) == np.sign(g_sum) or np.allclose(outputs, 0)


def test_train_log_loss_non_increasing():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(300, 2))
    y = (X[:, 0] + X[:, 1] > 0).astype(int)
    model = GradientBoostedTrees(n_rounds=30, max_depth=3, learning_rate=0.3).fit(X, y)
    losses = np.array(model.train_log_loss_)
    assert losses.size == 30
    assert np.all(np.diff(losses) <= 1e-9)


def test_log_loss_matches_direct_formula():
    rng = np.random.default_rng(2)
    y = rng.integers(0, 2, 40).astype(float)
    p = rng.uniform(0.01, 0.99, 40)
    direct = -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))
    assert log_loss(y, p) == pytest.approx(direct, abs=1e-12)


def test_probabilities_in_open_interval():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(200, 3))
    y = (X[:, 0] > 0).astype(int)
    model = GradientBoostedTrees(n_rounds=50, max_depth=4).fit(X, y)
    p = model.predict_proba(X)[:, 1]
    assert np.all(p > 0.0) and np.all(p < 1.0)


def test_base_score_is_prior_log_odds():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(100, 2))
    y = np.array([1] * 25 + [0] * 75)
    model = GradientBoostedTrees(n_rounds=1).fit(X, y)
    assert model.base_score_ == pytest.approx(np.log(0.25 / 0.75))


def test_single_class_errors():
    X = np.ones((10, 2))
    with pytest.raises(InsufficientDataError):
        GradientBoostedTrees().fit(X, np.zeros(10, dtype=int))


def test_deterministic():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(120, 3))
    y = (X[:, 1] > 0.2).astype(int)
    a = GradientBoostedTrees(n_rounds=10, random_state=9).fit(X, y)
    b = GradientBoostedTrees(n_rounds=10, random_state=9).fit(X, y)
    assert [t.to_dict() for t in a.trees_] == [t.to_dict() for t in b.trees_]


def test_separable_data_reaches_high_accuracy():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(400, 2))
    y = (X[:, 0] - X[:, 1] > 0).astype(int)
    model = GradientBoostedTrees(n_rounds=40, max_depth=3).fit(X, y)
    assert np.mean(model.predict(X) == y) > 0.97
