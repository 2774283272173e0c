"""Bagged decision trees and random forests over :mod:`notchbench.cart` trees."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .cart import DecisionTree, fit_tree
from .errors import BadParams, DimensionMismatch, EmptyDataset, NoOOB


@dataclass(frozen=True)
class EnsembleParams:
    n_trees: int = 100
    sample_size: int | None = None      # None means n = N
    mtry: int | None = None             # None means all p features (bagging)
    min_samples_split: int = 2
    max_depth: int | None = None
    seed: int = 0
    resample: bool = True               # False: every tree sees the full training set
    n_jobs: int = 1

    def validate(self, n_rows: int, n_features: int) -> None:
        if self.n_trees < 1:
            raise BadParams("n_trees must be at least 1")
        n = n_rows if self.sample_size is None else self.sample_size
        if not 1 <= n <= n_rows:
            raise BadParams(f"sample_size={n} must lie in 1..{n_rows}")
        m = n_features if self.mtry is None else self.mtry
        if not 1 <= m <= n_features:
            raise BadParams(f"mtry={m} must lie in 1..{n_features}")


def default_mtry(p: int) -> int:
    return max(1, math.ceil(math.sqrt(p)))


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    """Independent stream per tree, so fit order never changes results."""
    return np.random.default_rng([int(seed), int(tree_index)])


def bootstrap_sample(N: int, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """``n`` draws with replacement from ``0..N-1`` plus the never-drawn indices."""
    if n < 1:
        raise BadParams("bootstrap sample size must be at least 1")
    if N < 1:
        raise EmptyDataset("cannot bootstrap from an empty set")
    sample = rng.integers(0, N, size=n)
    drawn = np.zeros(N, dtype=bool)
    drawn[sample] = True
    return sample, np.flatnonzero(~drawn)


@dataclass(frozen=True, eq=False)
class Ensemble:
    trees: tuple[DecisionTree, ...]
    oob: tuple[np.ndarray, ...]
    params: EnsembleParams
    classes: np.ndarray
    n_features: int

    def votes(self, X: np.ndarray) -> np.ndarray:
        """Vote matrix of shape (rows, classes); each row sums to the tree count."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.zeros((len(X), len(self.classes)), dtype=np.int64)
        rows = np.arange(len(X))
        for tree in self.trees:
            out[rows, np.searchsorted(self.classes, tree.predict(X))] += 1
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        # argmax takes the first maximum: ties go to the smaller class index.
        return self.classes[np.argmax(self.votes(X), axis=1)]

    def to_dict(self) -> dict:
        return {
            "trees": [t.to_dict() for t in self.trees],
            "oob": [o.tolist() for o in self.oob],
            "params": {k: getattr(self.params, k) for k in self.params.__dataclass_fields__},
            "classes": self.classes.tolist(),
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Ensemble:
        return cls(
            trees=tuple(DecisionTree.from_dict(t) for t in d["trees"]),
            oob=tuple(np.array(o, dtype=np.int64) for o in d["oob"]),
            params=EnsembleParams(**d["params"]),
            classes=np.array(d["classes"], dtype=np.int64),
            n_features=int(d["n_features"]),
        )


def _fit_ensemble(X: np.ndarray, y: np.ndarray, params: EnsembleParams) -> Ensemble:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyDataset("cannot fit an ensemble on an empty training set")
    N, p = X.shape
    params.validate(N, p)
    n = N if params.sample_size is None else params.sample_size
    mtry = p if params.mtry is None else params.mtry
    classes = np.unique(y)

    def grow(b: int) -> tuple[DecisionTree, np.ndarray]:
        rng = tree_rng(params.seed, b)
        if params.resample:
            sample, oob = bootstrap_sample(N, n, rng)
        else:
            sample, oob = np.arange(N), np.zeros(0, dtype=np.int64)
        tree = fit_tree(
            X[sample], y[sample],
            min_samples_split=params.min_samples_split,
            max_depth=params.max_depth,
            feature_subset_size=mtry,
            rng=rng,
            classes=classes,
        )
        return tree, oob

    if params.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=params.n_jobs) as pool:
            grown = list(pool.map(grow, range(params.n_trees)))
    else:
        grown = [grow(b) for b in range(params.n_trees)]
    return Ensemble(
        trees=tuple(t for t, _ in grown),
        oob=tuple(o for _, o in grown),
        params=params,
        classes=classes,
        n_features=p,
    )


def fit_bagged(X: np.ndarray, y: np.ndarray, params: EnsembleParams = EnsembleParams()) -> Ensemble:
    """Bagged decision trees: every node considers all features."""
    return _fit_ensemble(X, y, replace(params, mtry=None))


def fit_random_forest(X: np.ndarray, y: np.ndarray, params: EnsembleParams = EnsembleParams()) -> Ensemble:
    """Random forest: each node draws ``mtry`` candidate features (default ceil(sqrt(p)))."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyDataset("cannot fit an ensemble on an empty training set")
    if params.mtry is None:
        params = replace(params, mtry=default_mtry(X.shape[1]))
    if params.mtry < 1:
        raise BadParams(f"mtry={params.mtry} must be at least 1")
    return _fit_ensemble(X, y, params)


def predict_ensemble(e: Ensemble, x: np.ndarray) -> int:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("predict_ensemble takes a single feature vector")
    return int(e.predict(x[None, :])[0])


def variable_importance(e: Ensemble, X: np.ndarray, y: np.ndarray, seed: int = 0) -> np.ndarray:
    """Permutation importance on out-of-bag rows.

    For feature ``j`` the score is the mean over trees of the drop in that
    tree's OOB accuracy after shuffling column ``j`` among its OOB rows.
    Trees with an empty OOB set are skipped.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[1] != e.n_features:
        raise DimensionMismatch(f"expected {e.n_features} features, got {X.shape[1]}")
    usable = [(b, t, o) for b, (t, o) in enumerate(zip(e.trees, e.oob)) if len(o)]
    if not usable:
        raise NoOOB("every tree's out-of-bag set is empty")
    p = e.n_features
    scores = np.zeros(p)
    for b, tree, oob in usable:
        Xo, yo = X[oob], y[oob]
        base = float(np.mean(tree.predict(Xo) == yo))
        rng = np.random.default_rng([int(seed), b])
        for j in range(p):
            Xp = Xo.copy()
            Xp[:, j] = Xo[rng.permutation(len(oob)), j]
            scores[j] += base - float(np.mean(tree.predict(Xp) == yo))
    return scores / len(usable)
