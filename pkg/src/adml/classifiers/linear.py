"""Plain linear decision functions and model averaging."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, EmptyList


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).ravel()
        self.bias = float(self.bias)
        if not (np.all(np.isfinite(self.weights)) and np.isfinite(self.bias)):
            raise ValueError("linear model has non-finite parameters")

    def score(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.weights.size:
            raise DimensionMismatch(
                f"expected {self.weights.size} features, got {x.shape[-1]}")
        return x @ self.weights + self.bias

    def predict(self, x):
        s = self.score(x)
        return np.where(s >= 0, 1, -1)   # ties break to +1


def average_linear_models(models) -> LinearModel:
    """Elementwise mean of weights and biases."""
    models = list(models)
    if not models:
        raise EmptyList("cannot average zero models")
    p = models[0].weights.size
    for m in models[1:]:
        if m.weights.size != p:
            raise DimensionMismatch("models have different dimensions")
    w = np.mean([m.weights for m in models], axis=0)
    b = float(np.mean([m.bias for m in models]))
    return LinearModel(w, b)
