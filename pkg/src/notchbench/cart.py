"""CART classification trees: Gini splits, grown deep, never pruned."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BadParams, DimensionMismatch, EmptyDataset, EmptyNode

# Slack for float comparisons between weighted impurities.
_IMPURITY_EPS = 1e-12


@dataclass(frozen=True)
class SplitRule:
    """Send a row left iff ``x[feature_index] <= threshold``."""

    feature_index: int
    threshold: float


def gini(counts: Sequence[float] | np.ndarray) -> float:
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise EmptyNode("gini impurity of an empty node is undefined")
    p = counts / total
    return float(1.0 - np.dot(p, p))


def _split_scores(X: np.ndarray, Y: np.ndarray, features: np.ndarray):
    """Weighted child impurity for every boundary of every candidate feature.

    Returns ``(scores, sorted_values)`` with ``scores[pos, f]`` the weighted
    Gini of splitting between sorted positions ``pos`` and ``pos + 1`` of
    feature ``features[f]``; boundaries between equal values score ``inf``.
    """
    n = X.shape[0]
    Xf = X[:, features]
    order = np.argsort(Xf, axis=0, kind="stable")
    xs = np.take_along_axis(Xf, order, axis=0)
    left = np.cumsum(Y[order], axis=0)[:-1]          # (n-1, f, C)
    right = Y.sum(axis=0) - left
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    scores = (n_left - (left ** 2).sum(axis=-1) / n_left
              + n_right - (right ** 2).sum(axis=-1) / n_right) / n
    scores[xs[1:] <= xs[:-1]] = np.inf
    return scores, xs


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    candidate_features: Sequence[int] | None = None,
) -> SplitRule | None:
    """Best Gini split among ``candidate_features`` (default: all).

    Thresholds are midpoints between consecutive distinct values. Ties go to
    the lower feature index, then the lower threshold. Returns ``None`` when
    no candidate split strictly lowers impurity.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyDataset("best_split needs at least one row")
    classes, codes = np.unique(y, return_inverse=True)
    Y = np.eye(len(classes))[codes]
    features = np.arange(X.shape[1]) if candidate_features is None else np.asarray(sorted(candidate_features))
    return _best_split(X, Y, features)


def _best_split(X: np.ndarray, Y: np.ndarray, features: np.ndarray, require_gain: bool = True) -> SplitRule | None:
    n = X.shape[0]
    if n < 2 or len(features) == 0:
        return None
    parent = gini(Y.sum(axis=0))
    if parent <= 0.0:
        return None
    scores, xs = _split_scores(X, Y, features)
    best = scores.min()
    if not np.isfinite(best) or (require_gain and best >= parent - _IMPURITY_EPS):
        return None
    # Feature-major scan so the lowest feature index, then lowest threshold, wins ties.
    hits = (scores <= best + _IMPURITY_EPS).T
    f, pos = divmod(int(np.argmax(hits.ravel())), n - 1)
    lo, hi = xs[pos, f], xs[pos + 1, f]
    threshold = lo + (hi - lo) / 2.0
    if not lo <= threshold < hi:
        threshold = lo
    return SplitRule(int(features[f]), float(threshold))


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """Array-backed binary tree.

    Node ``i`` is a leaf when ``feature[i] == -1``; leaves predict
    ``value[i]`` and keep their training class counts in ``counts[i]``
    (columns follow ``classes``).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    counts: np.ndarray
    classes: np.ndarray
    n_features: int
    min_samples_split: int = 2
    max_depth: int | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            node, d = stack.pop()
            if self.feature[node] < 0:
                best = max(best, d)
            else:
                stack.append((int(self.left[node]), d + 1))
                stack.append((int(self.right[node]), d + 1))
        return best

    def rules(self) -> list[SplitRule | None]:
        return [None if f < 0 else SplitRule(int(f), float(t)) for f, t in zip(self.feature, self.threshold)]

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                break
            r, nd = rows[inner], node[inner]
            go_left = X[r, feat[inner]] <= self.threshold[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "counts": self.counts.tolist(),
            "classes": self.classes.tolist(),
            "n_features": self.n_features,
            "min_samples_split": self.min_samples_split,
            "max_depth": self.max_depth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> DecisionTree:
        n_classes = len(d["classes"])
        return cls(
            feature=np.array(d["feature"], dtype=np.int64),
            threshold=np.array(d["threshold"], dtype=float),
            left=np.array(d["left"], dtype=np.int64),
            right=np.array(d["right"], dtype=np.int64),
            value=np.array(d["value"], dtype=np.int64),
            counts=np.array(d["counts"], dtype=np.int64).reshape(-1, n_classes),
            classes=np.array(d["classes"], dtype=np.int64),
            n_features=int(d["n_features"]),
            min_samples_split=int(d["min_samples_split"]),
            max_depth=d["max_depth"],
        )


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    *,
    min_samples_split: int = 2,
    max_depth: int | None = None,
    feature_subset_size: int | None = None,
    rng: np.random.Generator | None = None,
    classes: Sequence[int] | None = None,
) -> DecisionTree:
    """Grow an unpruned CART tree on integer class labels ``y``.

    With ``feature_subset_size < p`` each node draws that many distinct
    candidate features from ``rng`` (random-forest mode). When it equals
    ``p`` no draw happens at all, so the result does not depend on ``rng``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyDataset("cannot fit a tree on an empty training set")
    if len(y) != len(X):
        raise DimensionMismatch("X and y differ in length")
    n, p = X.shape
    mtry = p if feature_subset_size is None else int(feature_subset_size)
    if not 1 <= mtry <= p:
        raise BadParams(f"feature_subset_size={mtry} must lie in 1..{p}")
    if min_samples_split < 2:
        raise BadParams("min_samples_split must be at least 2")
    if max_depth is not None and max_depth < 0:
        raise BadParams("max_depth must be non-negative")
    if mtry < p and rng is None:
        raise BadParams("feature subsampling needs an rng")

    cls = np.unique(y) if classes is None else np.asarray(sorted(set(classes)), dtype=np.int64)
    codes = np.searchsorted(cls, y)
    if (codes >= len(cls)).any() or (cls[np.minimum(codes, len(cls) - 1)] != y).any():
        raise BadParams("labels outside the declared classes")
    Y = np.eye(len(cls))[codes]
    all_features = np.arange(p)

    feature, threshold, left, right, value, counts = [], [], [], [], [], []

    def new_node(rows: np.ndarray) -> int:
        c = Y[rows].sum(axis=0).astype(np.int64)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        # argmax returns the first maximum: ties go to the better rating.
        value.append(int(cls[int(np.argmax(c))]))
        counts.append(c)
        return len(feature) - 1

    root = new_node(np.arange(n))
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        c = counts[node]
        if (c > 0).sum() <= 1 or len(rows) < min_samples_split:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        if mtry < p:
            feats = np.sort(rng.choice(p, size=mtry, replace=False))
        else:
            feats = all_features
        # Zero-gain splits are kept (XOR-shaped nodes), so consistent data is always memorised.
        rule = _best_split(X[rows], Y[rows][:, c > 0], feats, require_gain=False)
        if rule is None:
            continue
        mask = X[rows, rule.feature_index] <= rule.threshold
        lnode = new_node(rows[mask])
        rnode = new_node(rows[~mask])
        feature[node] = rule.feature_index
        threshold[node] = rule.threshold
        left[node], right[node] = lnode, rnode
        # Right pushed first so the left subtree is expanded first (fixes rng order).
        stack.append((rnode, rows[~mask], depth + 1))
        stack.append((lnode, rows[mask], depth + 1))

    return DecisionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.int64),
        counts=np.array(counts, dtype=np.int64).reshape(len(feature), len(cls)),
        classes=cls,
        n_features=p,
        min_samples_split=min_samples_split,
        max_depth=max_depth,
    )


def predict_tree(tree: DecisionTree, x: Sequence[float] | np.ndarray) -> int:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("predict_tree takes a single feature vector")
    return int(tree.predict(x[None, :])[0])
