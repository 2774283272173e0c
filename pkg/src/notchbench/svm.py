"""Soft-margin kernel SVMs solved in the dual, plus multiclass decompositions.

The binary solver minimises ``0.5 a'Qa - e'a`` subject to ``0 <= a <= C`` and
``y'a = 0`` with ``Q_ij = y_i y_j K(x_i, x_j)``. It is an SMO-style pairwise
method: each step picks the maximally KKT-violating pair, solves the
two-variable problem in closed form and clips it to the box.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Union

import numpy as np

from .errors import BadParams, DimensionMismatch, ModeMismatch, SingleClass

logger = logging.getLogger(__name__)

SV_EPS = 1e-12
_TAU = 1e-12


@dataclass(frozen=True)
class Kernel:
    """``linear``, ``rbf``, ``polynomial`` or ``sigmoid``.

    polynomial: ``(gamma x.z + coef0) ** degree``;
    sigmoid: ``tanh(gamma x.z + coef0)``; rbf: ``exp(-gamma |x - z|^2)``.
    """

    kind: str = "rbf"
    gamma: float = 1.0
    coef0: float = 0.0
    degree: int = 3

    def __post_init__(self):
        if self.kind not in ("linear", "rbf", "polynomial", "sigmoid"):
            raise BadParams(f"unknown kernel {self.kind!r}")
        if self.kind in ("rbf", "polynomial", "sigmoid") and not self.gamma > 0:
            raise BadParams("gamma must be positive")
        if self.kind == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise BadParams("polynomial degree must be an integer >= 1")

    def matrix(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if A.shape[1] != B.shape[1]:
            raise DimensionMismatch(f"kernel inputs have {A.shape[1]} and {B.shape[1]} features")
        if self.kind == "rbf":
            sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
            return np.exp(-self.gamma * np.maximum(sq, 0.0))
        dot = A @ B.T
        if self.kind == "linear":
            return dot
        if self.kind == "polynomial":
            return (self.gamma * dot + self.coef0) ** int(self.degree)
        return np.tanh(self.gamma * dot + self.coef0)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "gamma": self.gamma, "coef0": self.coef0, "degree": self.degree}


def kernel_eval(k: Kernel, x, z) -> float:
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape:
        raise DimensionMismatch(f"kernel inputs have shapes {x.shape} and {z.shape}")
    if k.kind == "rbf":
        d = x - z
        return float(np.exp(-k.gamma * (d @ d)))
    dot = float(x @ z)
    if k.kind == "linear":
        return dot
    if k.kind == "polynomial":
        return float((k.gamma * dot + k.coef0) ** int(k.degree))
    return float(np.tanh(k.gamma * dot + k.coef0))


@dataclass(frozen=True, eq=False)
class BinarySVMModel:
    support_vectors: np.ndarray
    support_labels: np.ndarray      # +1 / -1
    alphas: np.ndarray
    b: float
    kernel: Kernel
    C: float
    support_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    converged: bool = True
    n_iter: int = 0

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        if len(self.alphas) == 0:
            return np.full(len(X), self.b)
        return self.kernel.matrix(X, self.support_vectors) @ (self.alphas * self.support_labels) + self.b

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.decision(X) >= 0, 1, -1)

    def to_dict(self) -> dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "support_labels": self.support_labels.tolist(),
            "alphas": self.alphas.tolist(),
            "b": self.b,
            "kernel": self.kernel.to_dict(),
            "C": self.C,
            "support_index": self.support_index.tolist(),
            "converged": self.converged,
            "n_iter": self.n_iter,
            "n_features": self.n_features,
        }

    @classmethod
    def from_dict(cls, d: dict) -> BinarySVMModel:
        return cls(
            support_vectors=np.array(d["support_vectors"], dtype=float).reshape(len(d["alphas"]), d["n_features"]),
            support_labels=np.array(d["support_labels"], dtype=float),
            alphas=np.array(d["alphas"], dtype=float),
            b=float(d["b"]),
            kernel=Kernel(**d["kernel"]),
            C=float(d["C"]),
            support_index=np.array(d["support_index"], dtype=np.int64),
            converged=bool(d["converged"]),
            n_iter=int(d["n_iter"]),
        )


@dataclass(frozen=True)
class ConstantClassifier:
    """Stand-in for a binary problem whose training rows carry one label."""

    label: int      # +1 / -1
    n_features: int

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        return np.full(len(X), float(self.label))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.full(len(np.atleast_2d(X)), self.label, dtype=np.int64)

    def to_dict(self) -> dict:
        return {"label": self.label, "n_features": self.n_features}

    @classmethod
    def from_dict(cls, d: dict) -> ConstantClassifier:
        return cls(int(d["label"]), int(d["n_features"]))


BinaryClassifier = Union[BinarySVMModel, ConstantClassifier]


def dual_objective(alpha: np.ndarray, y: np.ndarray, K: np.ndarray) -> float:
    """``0.5 a'Qa - sum(a)`` with ``Q = (y y') * K``."""
    v = alpha * y
    return float(0.5 * v @ K @ v - alpha.sum())


def _solve_dual(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_iter: int):
    n = len(y)
    alpha = np.zeros(n)
    grad = -np.ones(n)          # gradient of the dual objective: Q a - e
    Kd = np.diag(K)
    it = 0
    converged = False
    while it < max_iter:
        yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        j = int(np.flatnonzero(low)[np.argmin(yg[low])])
        if yg[i] - yg[j] <= tol:
            converged = True
            break
        it += 1
        quad = Kd[i] + Kd[j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = _TAU
        # Step t along direction y_i e_i - y_j e_j keeps y'a fixed.
        t = (yg[i] - yg[j]) / quad
        # Move along y_i e_i - y_j e_j; the box caps t through either variable.
        ai, aj = alpha[i], alpha[j]
        s = y[i] * ai + y[j] * aj
        lim_i = (C - ai) if y[i] > 0 else ai
        lim_j = aj if y[j] > 0 else (C - aj)
        if t >= lim_i and lim_i <= lim_j:
            new_i = C if y[i] > 0 else 0.0
            new_j = y[j] * (s - y[i] * new_i)
        elif t >= lim_j:
            new_j = 0.0 if y[j] > 0 else C
            new_i = y[i] * (s - y[j] * new_j)
        else:
            new_i = ai + y[i] * t
            new_j = y[j] * (s - y[i] * new_i)
        alpha[i] = min(max(new_i, 0.0), C)
        alpha[j] = min(max(new_j, 0.0), C)
        di, dj = alpha[i] - ai, alpha[j] - aj
        grad += y * (K[:, i] * y[i] * di + K[:, j] * y[j] * dj)
    return alpha, grad, converged, it


def _bias(alpha: np.ndarray, grad: np.ndarray, y: np.ndarray, C: float) -> float:
    yg = -y * grad
    free = (alpha > SV_EPS * C) & (alpha < C * (1 - 1e-12))
    if free.any():
        return float(yg[free].mean())
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    hi = yg[up].max() if up.any() else yg[low].min()
    lo = yg[low].min() if low.any() else yg[up].max()
    return float((hi + lo) / 2.0)


def fit_binary_svm(
    X: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    kernel: Kernel | None = None,
    tol: float = 1e-3,
    max_passes: int = 1000,
) -> BinaryClassifier:
    """Fit on labels in {-1, +1}.

    If only one label is present a :class:`ConstantClassifier` is returned.
    ``max_passes`` caps the number of pair updates at ``max_passes * n``;
    hitting the cap logs a warning and returns the current iterate.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y) or len(X) == 0:
        raise DimensionMismatch("X must be a non-empty (n, p) array matching y")
    if not np.isin(y, (-1.0, 1.0)).all():
        raise BadParams("binary SVM labels must be -1 or +1")
    if not C > 0:
        raise BadParams("C must be positive")
    kernel = kernel or Kernel("rbf", gamma=1.0 / X.shape[1])
    labels = np.unique(y)
    if len(labels) == 1:
        return ConstantClassifier(int(labels[0]), X.shape[1])

    K = kernel.matrix(X, X)
    alpha, grad, converged, n_iter = _solve_dual(K, y, float(C), tol, max_passes * len(y))
    if not converged:
        logger.warning("SVM solver stopped after %d pair updates without meeting tol=%g", n_iter, tol)
    b = _bias(alpha, grad, y, float(C))
    sv = np.flatnonzero(alpha > SV_EPS)
    return BinarySVMModel(
        support_vectors=X[sv].copy(),
        support_labels=y[sv].copy(),
        alphas=alpha[sv].copy(),
        b=b,
        kernel=kernel,
        C=float(C),
        support_index=sv,
        converged=converged,
        n_iter=n_iter,
    )


def decision_value(model: BinaryClassifier, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("decision_value takes a single feature vector")
    return float(model.decision(x[None, :])[0])


def kkt_violations(model: BinaryClassifier, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-row KKT violation of a fitted model on its training rows.

    Rows with alpha = 0 need ``y f >= 1``, free rows ``y f == 1``, rows at the
    bound C need ``y f <= 1``; the returned value is how far each row misses.
    """
    if isinstance(model, ConstantClassifier):
        return np.zeros(len(X))
    y = np.asarray(y, dtype=float)
    margin = y * model.decision(X)
    alpha = np.zeros(len(y))
    alpha[model.support_index] = model.alphas
    C = model.C
    at_zero = alpha <= SV_EPS * C
    at_c = alpha >= C * (1 - 1e-12)
    free = ~at_zero & ~at_c
    out = np.zeros(len(y))
    out[at_zero] = np.maximum(0.0, 1.0 - margin[at_zero])
    out[at_c] = np.maximum(0.0, margin[at_c] - 1.0)
    out[free] = np.abs(margin[free] - 1.0)
    return out


# --------------------------------------------------------------------------
# Multiclass
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MulticlassSVM:
    """``models`` is keyed by ``(a, b)`` class pairs with ``a < b`` oriented
    as +1 (one-vs-one), or by class (one-vs-all)."""

    mode: str
    classes: np.ndarray
    models: dict
    n_features: int

    def decision_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        return np.column_stack([self.models[k].decision(X) for k in self.models])

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        if self.mode == "one_vs_all":
            D = np.column_stack([self.models[int(c)].decision(X) for c in self.classes])
            return self.classes[np.argmax(D, axis=1)]
        votes = np.zeros((len(X), len(self.classes)), dtype=np.int64)
        pos = {int(c): i for i, c in enumerate(self.classes)}
        rows = np.arange(len(X))
        for (a, b), model in self.models.items():
            winner = np.where(model.decision(X) >= 0, pos[a], pos[b])
            votes[rows, winner] += 1
        return self.classes[np.argmax(votes, axis=1)]

    def to_dict(self) -> dict:
        if self.mode == "one_vs_one":
            items = [[list(k), _binary_to_dict(m)] for k, m in self.models.items()]
        else:
            items = [[k, _binary_to_dict(m)] for k, m in self.models.items()]
        return {"mode": self.mode, "classes": self.classes.tolist(), "n_features": self.n_features, "models": items}

    @classmethod
    def from_dict(cls, d: dict) -> MulticlassSVM:
        models = {}
        for key, md in d["models"]:
            models[tuple(key) if isinstance(key, list) else int(key)] = _binary_from_dict(md)
        return cls(d["mode"], np.array(d["classes"], dtype=np.int64), models, int(d["n_features"]))


def _binary_to_dict(m: BinaryClassifier) -> dict:
    kind = "constant" if isinstance(m, ConstantClassifier) else "svm"
    return {"kind": kind, **m.to_dict()}


def _binary_from_dict(d: dict) -> BinaryClassifier:
    d = dict(d)
    kind = d.pop("kind")
    return ConstantClassifier.from_dict(d) if kind == "constant" else BinarySVMModel.from_dict(d)


def _run(jobs, n_jobs: int):
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(lambda f: f(), jobs))
    return [f() for f in jobs]


def fit_ovo(
    X: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    kernel: Kernel | None = None,
    tol: float = 1e-3,
    max_passes: int = 1000,
    n_jobs: int = 1,
) -> MulticlassSVM:
    """One binary model per pair of classes present in ``y``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    classes = np.unique(y)
    if len(classes) < 2:
        raise SingleClass("one-vs-one needs at least two classes")
    kernel = kernel or Kernel("rbf", gamma=1.0 / X.shape[1])
    pairs = [(int(a), int(b)) for a, b in combinations(classes, 2)]

    def job(a: int, b: int):
        rows = (y == a) | (y == b)
        yy = np.where(y[rows] == a, 1.0, -1.0)
        return lambda: fit_binary_svm(X[rows], yy, C, kernel, tol, max_passes)

    fitted = _run([job(a, b) for a, b in pairs], n_jobs)
    return MulticlassSVM("one_vs_one", classes, dict(zip(pairs, fitted)), X.shape[1])


def fit_ova(
    X: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    kernel: Kernel | None = None,
    tol: float = 1e-3,
    max_passes: int = 1000,
    n_jobs: int = 1,
) -> MulticlassSVM:
    """One binary model per class: that class +1, every other class -1."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    classes = np.unique(y)
    if len(classes) < 2:
        raise SingleClass("one-vs-all needs at least two classes")
    kernel = kernel or Kernel("rbf", gamma=1.0 / X.shape[1])

    def job(c: int):
        yy = np.where(y == c, 1.0, -1.0)
        return lambda: fit_binary_svm(X, yy, C, kernel, tol, max_passes)

    fitted = _run([job(int(c)) for c in classes], n_jobs)
    return MulticlassSVM("one_vs_all", classes, {int(c): m for c, m in zip(classes, fitted)}, X.shape[1])


def predict_ovo(m: MulticlassSVM, x) -> int:
    if m.mode != "one_vs_one":
        raise ModeMismatch(f"model is {m.mode}, not one_vs_one")
    return int(m.predict(np.asarray(x, dtype=float)[None, :])[0])


def predict_ova(m: MulticlassSVM, x) -> int:
    if m.mode != "one_vs_all":
        raise ModeMismatch(f"model is {m.mode}, not one_vs_all")
    return int(m.predict(np.asarray(x, dtype=float)[None, :])[0])
