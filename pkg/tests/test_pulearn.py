import numpy as np
import pytest

from pumine import gbdt, pulearn
from pumine.errors import DataError
from pumine.evaluation import auc, derive_seeds
from pumine.synth import SynthSpec, generate, numeric_matrix

SMALL = gbdt.GBDTParams(num_trees=15, max_leaves=4, min_data_in_leaf=5)


def _pu(n=1500, rate=0.2, c=1.0, sep=3.0, seed=0):
    d = generate(SynthSpec(n_rows=n, positive_rate=rate, censor_c=c, class_sep=sep, n_categorical=0, seed=seed))
    X, names = numeric_matrix(d.train)
    ids = d.train["id"].values
    data = pulearn.PUDataset.from_labels(X, ids, d.pu_labels, names)
    hidden = d.true_labels[d.pu_labels == 0]  # truth for the unlabeled rows
    return data, hidden


def test_dataset_validation():
    with pytest.raises(DataError):
        pulearn.PUDataset(np.zeros((2, 2)), ["a", "b"], np.zeros((3, 3)), ["c", "d", "e"])
    with pytest.raises(DataError):
        pulearn.PUDataset(np.zeros((2, 2)), ["a", "b"], np.zeros((2, 2)), ["b", "c"])


def test_bagging_single_round_reduces_to_one_model():
    data, _ = _pu(600)
    res = pulearn.bagging_pu(data, SMALL, rounds=1, seed=7)
    (s,) = derive_seeds(7, 1)
    r = np.random.default_rng(s)
    n_u, n_p = data.unlabeled.shape[0], data.positives.shape[0]
    drawn = np.zeros(n_u, bool)
    drawn[r.choice(n_u, n_p, replace=False)] = True
    X = np.vstack([data.positives, data.unlabeled[drawn]])
    y = np.r_[np.ones(n_p, int), np.zeros(drawn.sum(), int)]
    expect = gbdt.predict(gbdt.train(SMALL.replace(seed=s), X, y), data.unlabeled)
    assert np.array_equal(res.scores[~drawn], expect[~drawn])
    assert np.array_equal(res.fallback, drawn)
    assert np.array_equal(res.oob_rounds, (~drawn).astype(int))


def test_bagging_recovers_hidden_positives():
    data, hidden = _pu(2000, rate=0.2, c=0.5)
    res = pulearn.bagging_pu(data, SMALL, rounds=50, seed=0)
    assert res.scores.min() >= 0 and res.scores.max() <= 1
    assert res.scores[hidden == 1].mean() - res.scores[hidden == 0].mean() >= 0.2
    assert not res.fallback.any()
    o = res.ranking
    s = res.scores[o]
    assert np.all(s[:-1] >= s[1:])


def test_bagging_precision_at_k():
    data, hidden = _pu(4000, rate=0.05, c=0.5)
    res = pulearn.bagging_pu(data, SMALL, rounds=20, seed=1)
    k = int(hidden.sum())
    prec = hidden[res.ranking[:k]].mean()
    assert prec >= 3 * hidden.mean()


def test_bagging_deterministic():
    data, _ = _pu(600)
    a = pulearn.bagging_pu(data, SMALL, rounds=5, seed=3)
    b = pulearn.bagging_pu(data, SMALL, rounds=5, seed=3)
    assert np.array_equal(a.scores, b.scores) and np.array_equal(a.ranked_ids, b.ranked_ids)


def test_bagging_parallel_matches_serial(threads):
    data, _ = _pu(600)
    threads(1)
    a = pulearn.bagging_pu(data, SMALL, rounds=6, seed=2)
    threads(4)
    b = pulearn.bagging_pu(data, SMALL, rounds=6, seed=2)
    assert np.array_equal(a.scores, b.scores)


def test_bagging_errors():
    data, _ = _pu(600)
    with pytest.raises(ValueError):
        pulearn.bagging_pu(data, SMALL, rounds=0)
    few = pulearn.PUDataset(data.positives[:9], data.positive_ids[:9], data.unlabeled, data.unlabeled_ids)
    with pytest.raises(DataError):
        pulearn.bagging_pu(few, SMALL)


def test_more_rounds_less_variance():
    data, _ = _pu(500, rate=0.2, c=0.5, sep=1.0)
    params = gbdt.GBDTParams(num_trees=5, max_leaves=4, min_data_in_leaf=5)

    def spread(rounds):
        runs = np.array([pulearn.bagging_pu(data, params, rounds=rounds, seed=s).scores for s in range(20)])
        return runs.var(axis=0).mean()

    assert spread(100) <= spread(10)


def test_spy_separable_reliable_negatives_clean():
    data, hidden = _pu(2000, rate=0.2, c=1.0, sep=8.0)
    res = pulearn.spy_two_step(data, SMALL, seed=0)
    assert res.method == "spy"
    assert res.reliable_negatives.sum() >= data.positives.shape[0]
    assert not np.any(res.reliable_negatives & (hidden == 1))


def test_spy_censored_ranks_hidden_first():
    data, hidden = _pu(3000, rate=0.2, c=0.5, sep=8.0)
    res = pulearn.spy_two_step(data, SMALL, seed=0)
    rn = res.reliable_negatives
    # spies below the 5% quantile let a few hidden positives through
    assert 1 - hidden[rn].mean() >= 0.98
    assert auc(res.scores, hidden) > 0.99


def test_spy_quantile_zero_is_maximal():
    data, _ = _pu(1500, rate=0.2, c=0.5, sep=2.0)
    r0 = pulearn.spy_two_step(data, SMALL, spy_quantile=0.0, seed=4)
    r5 = pulearn.spy_two_step(data, SMALL, spy_quantile=0.05, seed=4)
    if r0.method == "spy" and r5.method == "spy":
        assert r0.spy_threshold <= r5.spy_threshold
        assert r0.reliable_negatives.sum() <= r5.reliable_negatives.sum()


def test_spy_errors_and_fallback():
    data, _ = _pu(600)
    with pytest.raises(DataError):
        pulearn.spy_two_step(data, SMALL, spy_frac=1.0)
    with pytest.raises(DataError):
        pulearn.spy_two_step(data, SMALL, spy_frac=0.01)
    # identical distributions leave few rows below the spy threshold
    r = np.random.default_rng(0)
    P = r.standard_normal((300, 2))
    U = r.standard_normal((400, 2))
    d = pulearn.PUDataset(P, [f"p{i}" for i in range(300)], U, [f"u{i}" for i in range(400)])
    with pytest.warns(RuntimeWarning):
        res = pulearn.spy_two_step(d, SMALL, spy_quantile=0.0, seed=0, fallback_rounds=3)
    assert res.method == "spy_fallback_bagging" and res.warnings


def test_calibrate_separable_near_one():
    data, _ = _pu(2000, rate=0.3, c=1.0, sep=8.0)
    assert pulearn.calibrate_prior(data, gbdt.GBDTParams()) > 0.95


def test_calibrate_half_censoring():
    data, _ = _pu(6000, rate=0.3, c=0.5, sep=4.0)
    c = pulearn.calibrate_prior(data, gbdt.GBDTParams(num_trees=50), seed=0)
    assert 0.35 <= c <= 0.65


def test_calibrate_errors_and_clamp():
    data, _ = _pu(600)
    few = pulearn.PUDataset(data.positives[:20], data.positive_ids[:20], data.unlabeled, data.unlabeled_ids)
    with pytest.raises(DataError):
        pulearn.calibrate_prior(few, SMALL, holdout_frac=0.1)
    with pytest.raises(DataError):
        pulearn.calibrate_prior(data, SMALL, holdout_frac=1.0)
    assert pulearn.clamp_c(0.0) == 1e-6 and pulearn.clamp_c(3.0) == 1.0
    res = pulearn.PUResult(np.array(["a", "b"]), np.array([0.0, 0.5]), np.zeros(2, int), np.zeros(2, bool), "x",
                           c=pulearn.clamp_c(0.0))
    assert res.calibrated().tolist() == [0.0, 1.0]
    with pytest.raises(ValueError):
        pulearn.PUResult(np.array(["a"]), np.array([0.1]), np.zeros(1, int), np.zeros(1, bool), "x").calibrated()


def _result(ids, scores):
    n = len(ids)
    return pulearn.PUResult(np.array(ids), np.array(scores, float), np.zeros(n, int), np.zeros(n, bool), "x")


def test_rank_top_k_rules(tmp_path):
    res = _result(["c", "a", "b", "d"], [0.5, 0.9, 0.5, 0.1])
    assert pulearn.rank_top_k(res, 1).ids == ["a"]
    top = pulearn.rank_top_k(res, 3)
    assert top.ids == ["a", "b", "c"] and not top.short_list
    full = pulearn.rank_top_k(res, 10)
    assert full.short_list and len(full.ids) == 4
    with pytest.raises(ValueError):
        pulearn.rank_top_k(res, 0)
    pulearn.write_ranking(top, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "id,score,rank" and lines[1] == "a,0.9,1" and lines[3] == "c,0.5,3"


def test_rank_top_k_deterministic(rng):
    ids = [f"id{i:03d}" for i in range(200)]
    scores = rng.integers(0, 5, 200) / 4
    a = pulearn.rank_top_k(_result(ids, scores), 50)
    perm = rng.permutation(200)
    b = pulearn.rank_top_k(_result([ids[i] for i in perm], scores[perm]), 50)
    assert a == b
