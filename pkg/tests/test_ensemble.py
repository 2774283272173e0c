from dataclasses import replace

import numpy as np
import pytest

from notchbench.ensemble import (
    Ensemble,
    EnsembleParams,
    bootstrap_sample,
    default_mtry,
    fit_bagged,
    fit_random_forest,
    predict_ensemble,
    tree_rng,
    variable_importance,
)
from notchbench.errors import BadParams, NoOOB


def blobs(n=200, p=6, seed=0, informative=(0,)):
    rng = np.random.default_rng(seed)
    y = rng.integers(1, 4, size=n)
    X = rng.normal(size=(n, p))
    for j in informative:
        X[:, j] += 3.0 * y
    return X, y


def test_default_mtry():
    assert default_mtry(20) == 5
    assert default_mtry(16) == 4
    assert default_mtry(1) == 1


def test_bootstrap_oob_is_complement():
    sample, oob = bootstrap_sample(50, 50, np.random.default_rng(0))
    assert len(sample) == 50
    assert set(oob.tolist()) == set(range(50)) - set(sample.tolist())


def test_oob_fraction_matches_formula():
    N = n = 100
    expected = (1 - 1 / N) ** n
    fr = [len(bootstrap_sample(N, n, np.random.default_rng([7, b]))[1]) / N for b in range(2000)]
    assert np.mean(fr) == pytest.approx(expected, abs=0.01)


def test_bagging_beats_chance_and_is_deterministic():
    X, y = blobs()
    params = EnsembleParams(n_trees=15, seed=3)
    a = fit_bagged(X[:150], y[:150], params)
    b = fit_bagged(X[:150], y[:150], params)
    assert np.array_equal(a.predict(X[150:]), b.predict(X[150:]))
    assert np.mean(a.predict(X[150:]) == y[150:]) > 0.8


def test_parallel_fit_matches_serial():
    X, y = blobs()
    params = EnsembleParams(n_trees=8, seed=5, mtry=2)
    a = fit_random_forest(X, y, params)
    b = fit_random_forest(X, y, replace(params, n_jobs=4))
    for ta, tb in zip(a.trees, b.trees):
        assert np.array_equal(ta.feature, tb.feature) and np.array_equal(ta.threshold, tb.threshold)


def test_rf_with_all_features_equals_bagging():
    X, y = blobs(seed=9)
    p = X.shape[1]
    bdt = fit_bagged(X, y, EnsembleParams(n_trees=10, seed=42))
    rf = fit_random_forest(X, y, EnsembleParams(n_trees=10, seed=42, mtry=p))
    T = np.random.default_rng(1).normal(size=(100, p)) * 4
    assert np.array_equal(bdt.predict(T), rf.predict(T))


def test_fewer_features_changes_trees():
    X, y = blobs(seed=9)
    bdt = fit_bagged(X, y, EnsembleParams(n_trees=5, seed=42))
    rf = fit_random_forest(X, y, EnsembleParams(n_trees=5, seed=42, mtry=1))
    assert any(not np.array_equal(a.feature, b.feature) for a, b in zip(bdt.trees, rf.trees))


def test_tie_break_across_trees():
    from notchbench.cart import fit_tree

    X = np.array([[0.0], [1.0]])
    t_low = fit_tree(X, np.array([3, 3]), classes=[3, 6])
    t_high = fit_tree(X, np.array([6, 6]), classes=[3, 6])
    e = Ensemble(trees=(t_high, t_low), oob=((), ()), params=EnsembleParams(n_trees=2),
                 classes=np.array([3, 6]), n_features=1)
    assert e.predict(np.array([[0.5]]))[0] == 3


def test_importance_finds_the_informative_feature():
    X, y = blobs(n=300, p=5, seed=4, informative=(2,))
    e = fit_random_forest(X, y, EnsembleParams(n_trees=20, seed=1))
    imp = variable_importance(e, X, y, seed=0)
    assert imp.shape == (5,)
    assert int(np.argmax(imp)) == 2
    assert np.array_equal(imp, variable_importance(e, X, y, seed=0))


def test_importance_without_oob_rows():
    X, y = blobs(n=30)
    e = fit_bagged(X, y, EnsembleParams(n_trees=3, resample=False))
    with pytest.raises(NoOOB):
        variable_importance(e, X, y)


def test_bad_params():
    X, y = blobs(n=20)
    with pytest.raises(BadParams):
        fit_bagged(X, y, EnsembleParams(n_trees=0))
    with pytest.raises(BadParams):
        fit_random_forest(X, y, EnsembleParams(mtry=0))
    with pytest.raises(BadParams):
        fit_random_forest(X, y, EnsembleParams(mtry=7))


def test_round_trip_and_single_predict():
    X, y = blobs(n=60)
    e = fit_random_forest(X, y, EnsembleParams(n_trees=4, seed=2))
    again = Ensemble.from_dict(e.to_dict())
    assert np.array_equal(e.predict(X), again.predict(X))
    assert predict_ensemble(e, X[0]) == e.predict(X[:1])[0]


def test_tree_streams_are_independent_of_order():
    a = tree_rng(5, 3).integers(0, 10 ** 9, size=4)
    b = tree_rng(5, 3).integers(0, 10 ** 9, size=4)
    c = tree_rng(5, 4).integers(0, 10 ** 9, size=4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def twelve_points():
    rng = np.random.default_rng(1)
    return rng.normal(size=(12, 2)), rng.integers(1, 4, size=12)


def test_bootstrap_single_index():
    sample, oob = bootstrap_sample(1, 3, np.random.default_rng(0))
    assert sample.tolist() == [0, 0, 0] and len(oob) == 0


def test_bootstrap_is_seeded():
    a, _ = bootstrap_sample(20, 20, np.random.default_rng(4))
    b, _ = bootstrap_sample(20, 20, np.random.default_rng(4))
    assert np.array_equal(a, b)


def test_one_tree_without_resampling_is_plain_cart():
    from notchbench.cart import fit_tree

    X, y = twelve_points()
    e = fit_bagged(X, y, EnsembleParams(n_trees=1, resample=False))
    t = fit_tree(X, y)
    assert np.array_equal(e.trees[0].feature, t.feature)
    assert np.array_equal(e.trees[0].threshold, t.threshold)
    grid = np.random.default_rng(2).normal(size=(50, 2))
    assert np.array_equal(e.predict(grid), t.predict(grid))


def test_twenty_five_trees_fit_the_twelve_points():
    X, y = twelve_points()
    for fit in (fit_bagged, fit_random_forest):
        e = fit(X, y, EnsembleParams(n_trees=25, seed=0))
        assert np.array_equal(e.predict(X), y)


def test_vote_vectors():
    from notchbench.cart import fit_tree

    X = np.array([[0.0]])
    const = {c: fit_tree(X, np.array([c]), classes=[4, 7]) for c in (4, 7)}

    def ens(*labels):
        trees = tuple(const[c] for c in labels)
        return Ensemble(trees=trees, oob=tuple(() for _ in trees), params=EnsembleParams(n_trees=len(trees)),
                        classes=np.array([4, 7]), n_features=1)

    assert ens(4, 4, 7).predict(X)[0] == 4
    assert ens(7, 4).predict(X)[0] == 4
    assert ens(7).predict(X)[0] == 7


def test_constant_feature_has_zero_importance():
    X, y = blobs(n=150, p=4, seed=2)
    X[:, 3] = 1.5
    e = fit_random_forest(X, y, EnsembleParams(n_trees=10, seed=0))
    assert abs(variable_importance(e, X, y)[3]) <= 1e-12
