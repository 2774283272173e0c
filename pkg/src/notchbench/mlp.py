"""One-hidden-layer perceptron with logistic units, trained by online backprop.

The loss is half the squared error against one-hot targets. Weight updates
follow the delta rule: ``w += eta * delta * input_activation`` with output
deltas ``(t - y) * y * (1 - y)`` and hidden deltas backpropagated through the
output weights.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import BadParams, DimensionMismatch, EmptyDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MLPParams:
    hidden: int = 32
    learning_rate: float = 0.1
    epochs: int = 500
    patience: int = 25
    seed: int = 0
    init_range: float = 0.5

    def validate(self) -> None:
        if self.hidden < 1:
            raise BadParams("hidden units must be at least 1")
        if self.learning_rate <= 0:
            raise BadParams("learning_rate must be positive")
        if self.epochs < 1:
            raise BadParams("epochs must be at least 1")
        if self.patience < 0:
            raise BadParams("patience must be non-negative")


def logistic(z: np.ndarray) -> np.ndarray:
    # Overflow-free form of e^z / (1 + e^z).
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True, eq=False)
class MLPModel:
    w1: np.ndarray      # (m, l)
    b1: np.ndarray      # (m,)
    w2: np.ndarray      # (n_out, m)
    b2: np.ndarray      # (n_out,)
    classes: np.ndarray

    @property
    def n_inputs(self) -> int:
        return self.w1.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.w2.shape[0]

    @property
    def n_parameters(self) -> int:
        return self.w1.size + self.b1.size + self.w2.size + self.b2.size

    def flat(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    def with_flat(self, theta: np.ndarray) -> MLPModel:
        m, l = self.w1.shape
        n = self.w2.shape[0]
        i = 0
        w1 = theta[i:i + m * l].reshape(m, l); i += m * l
        b1 = theta[i:i + m]; i += m
        w2 = theta[i:i + n * m].reshape(n, m); i += n * m
        b2 = theta[i:i + n]
        return MLPModel(w1.copy(), b1.copy(), w2.copy(), b2.copy(), self.classes)

    def outputs(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_inputs:
            raise DimensionMismatch(f"expected {self.n_inputs} inputs, got {X.shape[1]}")
        H = logistic(X @ self.w1.T + self.b1)
        return logistic(H @ self.w2.T + self.b2)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.classes[np.argmax(self.outputs(X), axis=1)]

    def to_dict(self) -> dict:
        return {
            "w1": self.w1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": self.b2.tolist(),
            "classes": self.classes.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> MLPModel:
        n_in = len(d["w1"][0]) if d["w1"] else 0
        return cls(
            w1=np.array(d["w1"], dtype=float).reshape(len(d["b1"]), n_in),
            b1=np.array(d["b1"], dtype=float),
            w2=np.array(d["w2"], dtype=float).reshape(len(d["b2"]), len(d["b1"])),
            b2=np.array(d["b2"], dtype=float),
            classes=np.array(d["classes"], dtype=np.int64),
        )


def parameter_count(l: int, m: int, n: int) -> int:
    return (l + 1) * m + (m + 1) * n


def init_model(l: int, m: int, classes, seed: int = 0, init_range: float = 0.5) -> MLPModel:
    classes = np.asarray(classes, dtype=np.int64)
    n = len(classes)
    rng = np.random.default_rng(seed)
    u = lambda *shape: rng.uniform(-init_range, init_range, size=shape)
    return MLPModel(w1=u(m, l), b1=u(m), w2=u(n, m), b2=u(n), classes=classes)


def zero_model(l: int, m: int, n: int) -> MLPModel:
    return MLPModel(np.zeros((m, l)), np.zeros(m), np.zeros((n, m)), np.zeros(n), np.arange(1, n + 1))


def forward(model: MLPModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hidden and output activations for a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_inputs,):
        raise DimensionMismatch(f"expected {model.n_inputs} inputs, got shape {x.shape}")
    h = logistic(model.w1 @ x + model.b1)
    y = logistic(model.w2 @ h + model.b2)
    return h, y


def loss(y: np.ndarray, target: np.ndarray) -> float:
    y = np.asarray(y, dtype=float)
    target = np.asarray(target, dtype=float)
    if y.shape != target.shape:
        raise DimensionMismatch(f"outputs {y.shape} vs target {target.shape}")
    d = target - y
    return 0.5 * float(d @ d)


def backprop(model: MLPModel, x: np.ndarray, target: np.ndarray):
    """Loss and its gradient w.r.t. (w1, b1, w2, b2) for one sample."""
    h, y = forward(model, x)
    delta_out = (target - y) * y * (1.0 - y)                 # = -dL/d(net_out)
    delta_hid = h * (1.0 - h) * (model.w2.T @ delta_out)     # = -dL/d(net_hid)
    grads = (
        -np.outer(delta_hid, x),
        -delta_hid,
        -np.outer(delta_out, h),
        -delta_out,
    )
    return loss(y, target), grads


def one_hot(y: np.ndarray, classes: np.ndarray) -> np.ndarray:
    codes = np.searchsorted(classes, y)
    return np.eye(len(classes))[codes]


def train_epoch(
    model: MLPModel, X: np.ndarray, targets: np.ndarray, eta: float, rng: np.random.Generator
) -> tuple[MLPModel, float]:
    """One shuffled pass of per-sample updates; returns the new model and the
    mean per-sample loss seen during the pass."""
    w1, b1, w2, b2 = model.w1.copy(), model.b1.copy(), model.w2.copy(), model.b2.copy()
    total = 0.0
    order = rng.permutation(len(X))
    for i in order:
        x, t = X[i], targets[i]
        h = logistic(w1 @ x + b1)
        y = logistic(w2 @ h + b2)
        e = t - y
        total += 0.5 * float(e @ e)
        delta_out = e * y * (1.0 - y)
        delta_hid = h * (1.0 - h) * (w2.T @ delta_out)
        w2 += eta * np.outer(delta_out, h)
        b2 += eta * delta_out
        w1 += eta * np.outer(delta_hid, x)
        b1 += eta * delta_hid
    return MLPModel(w1, b1, w2, b2, model.classes), total / max(len(X), 1)


def gradient_check(model: MLPModel, x: np.ndarray, target: np.ndarray, step: float = 1e-5) -> float:
    """Largest relative gap between backprop and central-difference gradients."""
    _, grads = backprop(model, x, target)
    analytic = np.concatenate([g.ravel() for g in grads])
    theta = model.flat()
    numeric = np.empty_like(theta)
    for i in range(len(theta)):
        orig = theta[i]
        theta[i] = orig + step
        up = loss(forward(model.with_flat(theta), x)[1], target)
        theta[i] = orig - step
        down = loss(forward(model.with_flat(theta), x)[1], target)
        theta[i] = orig
        numeric[i] = (up - down) / (2 * step)
    rel = np.abs(analytic - numeric) / np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float(rel.max())


def _accuracy(model: MLPModel, X: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(model.predict(X) == y))


def fit_mlp(
    X: np.ndarray,
    y: np.ndarray,
    X_val: np.ndarray | None = None,
    y_val: np.ndarray | None = None,
    params: MLPParams = MLPParams(),
    classes=None,
) -> MLPModel:
    """Train with early stopping on validation accuracy.

    The initial model counts as epoch 0. Training stops once ``patience``
    consecutive epochs fail to beat the best validation accuracy, and the best
    snapshot is returned. Without a validation set, training accuracy is
    monitored instead.
    """
    params.validate()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyDataset("cannot fit an MLP on an empty training set")
    classes = np.unique(y) if classes is None else np.asarray(sorted(set(classes)), dtype=np.int64)
    targets = one_hot(y, classes)
    if X_val is None or len(X_val) == 0:
        X_val, y_val = X, y
    else:
        X_val = np.asarray(X_val, dtype=float)
        y_val = np.asarray(y_val, dtype=np.int64)

    model = init_model(X.shape[1], params.hidden, classes, seed=params.seed, init_range=params.init_range)
    rng = np.random.default_rng([params.seed, 1])
    best, best_acc = model, _accuracy(model, X_val, y_val)
    stale = 0
    for epoch in range(1, params.epochs + 1):
        model, mean_loss = train_epoch(model, X, targets, params.learning_rate, rng)
        acc = _accuracy(model, X_val, y_val)
        if acc > best_acc:
            best, best_acc, stale = model, acc, 0
        else:
            stale += 1
            if stale > params.patience:
                logger.debug("early stop at epoch %d (best val acc %.4f)", epoch, best_acc)
                break
        if best_acc >= 1.0:
            break
    return best


def predict_mlp(model: MLPModel, x: np.ndarray) -> int:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("predict_mlp takes a single feature vector")
    return int(model.predict(x[None, :])[0])
