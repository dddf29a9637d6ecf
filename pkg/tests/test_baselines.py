import numpy as np
import pytest

from conftest import two_clusters
from pumine import baselines
from pumine.errors import DataError
from pumine.evaluation import auc


def _pm5(n=500, seed=0):
    r = np.random.default_rng(seed)
    y = (r.random(n) < 0.5).astype(np.int64)
    X = r.standard_normal((n, 1)) + np.where(y == 1, 5.0, -5.0)[:, None]
    return X, y


# ------------------------------------------------------------ naive Bayes


def test_nb_separates_clusters():
    X, y = _pm5()
    p = baselines.nb_predict(baselines.nb_train(X, y), X)
    assert np.mean((p >= 0.5) == y) >= 0.99


def test_nb_constant_feature_keeps_ranking():
    X, y = two_clusters(400, gap=1.0)
    p1 = baselines.nb_predict(baselines.nb_train(X, y), X)
    Xc = np.column_stack([X, np.full(400, 3.0)])
    p2 = baselines.nb_predict(baselines.nb_train(Xc, y), Xc)
    assert np.array_equal(np.argsort(p1, kind="stable"), np.argsort(p2, kind="stable"))


def test_nb_all_missing_row_gives_prior():
    X, y = two_clusters(300)
    model = baselines.nb_train(X, y)
    p = baselines.nb_predict(model, np.full((1, 3), np.nan))
    assert p[0] == pytest.approx(y.mean(), abs=1e-12)


def test_nb_variance_floor_and_finite():
    X = np.array([[1.0, 0.0], [1.0, 5.0], [1.0, 10.0], [1.0, 15.0]])
    y = np.array([0, 0, 1, 1])
    model = baselines.nb_train(X, y)
    assert np.all(model.var >= 1e-9 * np.var(X[:, 1]))
    p = baselines.nb_predict(model, np.array([[1e6, 7.0], [-1e6, 1e3]]))
    assert np.all(np.isfinite(p))


def test_nb_single_class():
    with pytest.raises(DataError):
        baselines.nb_train(np.zeros((3, 1)), np.zeros(3))


# ------------------------------------------------------------------ trees


def test_tree_recovers_threshold_bin():
    x = np.arange(100, dtype=float)
    y = (x >= 37).astype(int)
    model = baselines.tree_train(x[:, None], y, max_depth=1, min_leaf=1)
    t = model.trees[0]
    assert t.feature[0] == 0
    # exhaustive oracle: the only zero-impurity cut is between 36 and 37
    b36 = model.mapper.transform(np.array([[36.0], [37.0]]))[0]
    assert t.threshold[0] == b36[0] and b36[1] == b36[0] + 1
    assert np.array_equal(baselines.tree_predict(model, x[:, None]), y.astype(float))


def test_tree_depth_zero_base_rate():
    X, y = two_clusters(200)
    p = baselines.tree_predict(baselines.tree_train(X, y, max_depth=0), X)
    assert np.all(p == y.mean())


def test_pure_node_stops():
    X, y = _pm5(200)
    model = baselines.tree_train(X, y, min_leaf=1)
    assert model.trees[0].n_leaves == 2


def test_forest_single_tree_equals_decision_tree():
    X, y = two_clusters(600, seed=4, gap=1.0)
    X[::9, 2] = np.nan
    t = baselines.tree_train(X, y)
    f = baselines.forest_train(X, y, num_trees=1, feature_fraction=None, bootstrap=False, seed=99)
    assert np.array_equal(baselines.tree_predict(t, X), baselines.forest_predict(f, X))
    a, b = t.trees[0], f.trees[0]
    for k in ("feature", "threshold", "missing_left", "left", "right", "value", "gain", "count"):
        assert np.array_equal(getattr(a, k), getattr(b, k))


def test_forest_separable_and_range():
    X, y = two_clusters(800, seed=2, gap=4.0)
    model = baselines.forest_train(X, y, num_trees=30, seed=1)
    p = baselines.forest_predict(model, X)
    assert auc(p, y) >= 0.99
    assert p.min() >= 0.0 and p.max() <= 1.0


def test_forest_seeded_reproducible():
    X, y = two_clusters(300, gap=1.0)
    a = baselines.forest_train(X, y, num_trees=5, seed=3)
    b = baselines.forest_train(X, y, num_trees=5, seed=3)
    assert np.array_equal(baselines.forest_predict(a, X), baselines.forest_predict(b, X))


# -------------------------------------------------------------- logistic


def test_lr_zero_iterations():
    X, y = two_clusters(100)
    model = baselines.lr_train(X, y, iters=0)
    assert np.all(model.weights == 0) and model.bias == 0
    assert np.all(baselines.lr_predict(model, X) == 0.5)


def test_lr_separable_1d():
    x = np.linspace(-3, 3, 200)
    y = (x > 0.3).astype(int)
    p = baselines.lr_predict(baselines.lr_train(x[:, None], y), x[:, None])
    assert auc(p, y) == 1.0


def test_lr_gradient_finite_differences(rng):
    Z = rng.standard_normal((50, 4))
    y = rng.integers(0, 2, 50).astype(float)
    eps = 1e-6
    for _ in range(50):
        w = rng.standard_normal(4)
        b = float(rng.standard_normal())
        _, dw, db = baselines.lr_loss_grad(w, b, Z, y, 0.3)
        for j in range(4):
            e = np.zeros(4)
            e[j] = eps
            fd = (baselines.lr_loss_grad(w + e, b, Z, y, 0.3)[0] - baselines.lr_loss_grad(w - e, b, Z, y, 0.3)[0])
            assert abs(fd / (2 * eps) - dw[j]) < 1e-5
        fdb = (baselines.lr_loss_grad(w, b + eps, Z, y, 0.3)[0] - baselines.lr_loss_grad(w, b - eps, Z, y, 0.3)[0])
        assert abs(fdb / (2 * eps) - db) < 1e-5


def test_lr_loss_non_increasing_and_missing_handled():
    X, y = two_clusters(300, gap=1.0)
    X[::5, 0] = np.nan
    model = baselines.lr_train(X, y, lr=5.0)
    h = model.loss_history
    assert all(b <= a for a, b in zip(h, h[1:]))
    assert np.all(np.isfinite(baselines.lr_predict(model, X)))


# ------------------------------------------------------- shared properties


LEARNERS = [
    (baselines.nb_train, baselines.nb_predict),
    (baselines.tree_train, baselines.tree_predict),
    (lambda X, y: baselines.forest_train(X, y, num_trees=10), baselines.forest_predict),
    (baselines.lr_train, baselines.lr_predict),
]


@pytest.mark.parametrize("fit,predict", LEARNERS)
def test_probabilities_and_row_order(fit, predict):
    X, y = two_clusters(300, seed=11, gap=1.0)
    model = fit(X, y)
    p = predict(model, X)
    assert p.min() >= 0.0 and p.max() <= 1.0
    perm = np.random.default_rng(1).permutation(300)
    assert np.array_equal(predict(model, X[perm]), p[perm])
    with pytest.raises(DataError):
        predict(model, np.zeros((2, 7)))


@pytest.mark.parametrize("fit,predict", LEARNERS)
def test_model_round_trip(tmp_path, fit, predict):
    X, y = two_clusters(200, seed=5, gap=1.0)
    model = fit(X, y)
    baselines.save_model(model, tmp_path / "m.json")
    again = baselines.load_model(tmp_path / "m.json")
    assert np.array_equal(predict(model, X), predict(again, X))
