"""Small classifiers over flat parameter vectors with analytic gradients."""
from __future__ import annotations

import logging

import numpy as np
from scipy.special import log_softmax, softmax

from ..errors import InvalidArgumentError, NumericError

logger = logging.getLogger(__name__)


def _uniform(rng: np.random.Generator, fan_in: int, size) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=size)


class Model:
    """Cross-entropy classifier whose parameters live in one flat vector."""

    name = "model"

    def __init__(self, feature_dim: int, num_classes: int):
        if feature_dim < 1 or num_classes < 1:
            raise InvalidArgumentError(f"invalid model shape: {feature_dim} features, {num_classes} classes")
        self.feature_dim = feature_dim
        self.num_classes = num_classes

    @property
    def num_params(self) -> int:
        raise NotImplementedError

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def logits(self, params: np.ndarray, features: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def loss_and_grad(self, params: np.ndarray, features: np.ndarray,
                      labels: np.ndarray) -> tuple[float, np.ndarray]:
        raise NotImplementedError

    def loss(self, params: np.ndarray, features: np.ndarray, labels: np.ndarray) -> float:
        return cross_entropy_loss(self.logits(params, features), labels)

    def _check(self, params: np.ndarray) -> None:
        if params.shape != (self.num_params,):
            raise InvalidArgumentError(f"{self.name} expects {self.num_params} parameters, got {params.shape}")


def cross_entropy_loss(logits: np.ndarray, labels: np.ndarray) -> float:
    log_probs = log_softmax(logits, axis=1)
    loss = float(-log_probs[np.arange(labels.size), labels].mean())
    if not np.isfinite(loss):
        raise NumericError("non-finite cross-entropy loss")
    return loss


def _output_delta(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(mean cross-entropy) / d(logits)."""
    delta = softmax(logits, axis=1)
    delta[np.arange(labels.size), labels] -= 1.0
    return delta / labels.size


class SoftmaxRegression(Model):
    """Multinomial logistic regression: logits = X W + b."""

    name = "softmax"

    @property
    def num_params(self) -> int:
        return self.feature_dim * self.num_classes + self.num_classes

    def _unpack(self, params):
        d, c = self.feature_dim, self.num_classes
        return params[:d * c].reshape(d, c), params[d * c:]

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        return _uniform(rng, self.feature_dim, self.num_params)

    def logits(self, params, features):
        self._check(params)
        W, b = self._unpack(params)
        return features @ W + b

    def loss_and_grad(self, params, features, labels):
        logits = self.logits(params, features)
        loss = cross_entropy_loss(logits, labels)
        delta = _output_delta(logits, labels)
        return loss, np.concatenate([(features.T @ delta).ravel(), delta.sum(axis=0)])


class TanhMLP(Model):
    """One hidden tanh layer: logits = tanh(X W1 + b1) W2 + b2."""

    name = "mlp"

    def __init__(self, feature_dim: int, num_classes: int, hidden_units: int = 32):
        super().__init__(feature_dim, num_classes)
        if hidden_units < 1:
            raise InvalidArgumentError(f"hidden_units must be >= 1, got {hidden_units}")
        self.hidden_units = hidden_units

    @property
    def num_params(self) -> int:
        d, h, c = self.feature_dim, self.hidden_units, self.num_classes
        return d * h + h + h * c + c

    def _unpack(self, params):
        d, h, c = self.feature_dim, self.hidden_units, self.num_classes
        i = 0
        W1 = params[i:i + d * h].reshape(d, h)
        i += d * h
        b1 = params[i:i + h]
        i += h
        W2 = params[i:i + h * c].reshape(h, c)
        i += h * c
        return W1, b1, W2, params[i:]

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        d, h, c = self.feature_dim, self.hidden_units, self.num_classes
        return np.concatenate([
            _uniform(rng, d, d * h), _uniform(rng, d, h),
            _uniform(rng, h, h * c), _uniform(rng, h, c),
        ])

    def _forward(self, params, features):
        self._check(params)
        W1, b1, W2, b2 = self._unpack(params)
        hidden = np.tanh(features @ W1 + b1)
        return hidden, hidden @ W2 + b2

    def logits(self, params, features):
        return self._forward(params, features)[1]

    def loss_and_grad(self, params, features, labels):
        W2 = self._unpack(params)[2]
        hidden, logits = self._forward(params, features)
        loss = cross_entropy_loss(logits, labels)
        delta = _output_delta(logits, labels)
        back = (delta @ W2.T) * (1.0 - hidden ** 2)
        grad = np.concatenate([
            (features.T @ back).ravel(), back.sum(axis=0),
            (hidden.T @ delta).ravel(), delta.sum(axis=0),
        ])
        return loss, grad


def build_model(kind: str, feature_dim: int, num_classes: int, hidden_units: int = 32) -> Model:
    if kind == "softmax":
        return SoftmaxRegression(feature_dim, num_classes)
    if kind == "mlp":
        return TanhMLP(feature_dim, num_classes, hidden_units)
    raise InvalidArgumentError(f"unknown model kind {kind!r}; expected 'softmax' or 'mlp'")
