"""Plugin predictors: multinomial logistic regression over Y, A, or their product.

A single joint predictor over (A, Y) suffices for every criterion here, since
the label marginal, attribute marginal, and label-given-attribute conditional
all derive from it; ``joint_to_marginals`` performs that decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1.0
    epochs: int = 400
    l2: float = 1e-4
    seed: int = 0


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray  # (d + 1) x classes, bias in the last row
    mean: np.ndarray  # feature standardization, applied at predict time
    scale: np.ndarray
    config: TrainConfig
    num_classes: int
    loss_history: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if not np.all(np.isfinite(self.weights)):
            raise InvalidArgumentError("model weights must be finite")


def _design(features, mean, scale):
    x = (np.asarray(features, dtype=float) - mean) / scale
    return np.hstack([x, np.ones((x.shape[0], 1))])


def loss_and_grad(w_flat, xb, y_onehot, l2):
    """Mean cross-entropy with L2 on non-bias rows; returns (loss, flat gradient)."""
    n, d1 = xb.shape
    ncls = y_onehot.shape[1]
    w = w_flat.reshape(d1, ncls)
    logits = xb @ w
    logits -= logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(logits).sum(axis=1))
    loss = float((logz - (logits * y_onehot).sum(axis=1)).mean())
    probs = np.exp(logits - logz[:, None])
    grad = xb.T @ (probs - y_onehot) / n
    penalty = w.copy()
    penalty[-1] = 0.0  # bias row is not regularized
    loss += 0.5 * l2 * float((penalty ** 2).sum())
    grad += l2 * penalty
    return loss, grad.ravel()


def fit(features, labels, config: TrainConfig = None, num_classes: int = None) -> LogisticModel:
    """Full-batch gradient descent with step halving on any loss increase.

    Deterministic given the config (initialization is zero, the objective is
    convex); the per-epoch loss sequence is non-increasing by construction.
    """
    config = config or TrainConfig()
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=int)
    if x.ndim != 2 or x.shape[0] != y.shape[0] or x.shape[0] < 1:
        raise InvalidArgumentError("features must be n x d aligned with labels, n >= 1")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("features contain NaN/Inf")
    if np.any(y < 0):
        raise InvalidArgumentError("labels must be nonnegative integers")
    ncls = int(y.max()) + 1 if num_classes is None else int(num_classes)
    if np.any(y >= ncls):
        raise InvalidArgumentError(f"label out of range [0, {ncls})")

    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    xb = _design(x, mean, scale)
    y1h = np.zeros((x.shape[0], ncls))
    y1h[np.arange(x.shape[0]), y] = 1.0

    w = np.zeros(xb.shape[1] * ncls)
    lr = config.learning_rate
    loss, grad = loss_and_grad(w, xb, y1h, config.l2)
    history = [loss]
    for _ in range(config.epochs):
        for _ in range(60):
            trial = w - lr * grad
            new_loss, new_grad = loss_and_grad(trial, xb, y1h, config.l2)
            if new_loss <= loss + 1e-12:
                break
            lr *= 0.5
        else:  # pragma: no cover - step size underflow
            break
        w, loss, grad = trial, new_loss, new_grad
        history.append(loss)
        if np.abs(grad).max() < 1e-10:
            break
    return LogisticModel(weights=w.reshape(xb.shape[1], ncls), mean=mean, scale=scale,
                         config=config, num_classes=ncls, loss_history=tuple(history))


def predict_proba(model: LogisticModel, features) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.mean.shape[0]:
        raise InvalidArgumentError(
            f"features must be n x {model.mean.shape[0]}, got {x.shape}"
        )
    logits = _design(x, model.mean, model.scale) @ model.weights
    logits -= logits.max(axis=1, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs


def accuracy(model: LogisticModel, features, labels) -> float:
    pred = predict_proba(model, features).argmax(axis=1)
    return float((pred == np.asarray(labels, dtype=int)).mean())


def joint_to_marginals(f_AY, num_attrs: int, num_classes: int):
    """Split a joint (A, Y) predictor into (f_A, f_Y, f_Y_given_AX).

    Rows of ``f_AY`` are distributions over (a, y) pairs flattened a-major.
    Zero-mass cells produce uniform conditionals.
    """
    f = np.asarray(f_AY, dtype=float)
    n = f.shape[0]
    if f.ndim != 2 or f.shape[1] != num_attrs * num_classes:
        raise InvalidArgumentError(
            f"f_AY must be n x {num_attrs * num_classes}, got {f.shape}"
        )
    joint = f.reshape(n, num_attrs, num_classes)
    f_a = joint.sum(axis=2)
    f_y = joint.sum(axis=1)
    denom = f_a[:, :, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(denom > 0, joint / np.where(denom > 0, denom, 1.0),
                        1.0 / num_classes)
    return f_a, f_y, cond
