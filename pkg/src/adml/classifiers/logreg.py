"""L2-regularized logistic regression.

Objective (bias unpenalized, larger C = less regularization, mirroring the
SVM convention):

    F(w, b) = 0.5 * ||w||^2 + C * sum_i log(1 + exp(-y_i (w.x_i + b)))

Minimized with L-BFGS on an analytically supplied gradient, followed by a
Newton polish when the gradient has not reached tolerance (the Hessian is
p+1 square, so polishing is reserved for moderate feature counts).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from ..errors import DimensionMismatch, NonFinite, SingleClass

GRAD_TOL = 1e-6
MAX_ITER = 1000
_NEWTON_MAX_P = 4000


@dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float
    C: float
    grad_norm: float = 0.0
    converged: bool = True

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)


def _objective_grad(theta, x, y, C):
    w, b = theta[:-1], theta[-1]
    margins = y * (x @ w + b)
    # log(1 + exp(-m)) via logaddexp keeps large |m| finite
    loss = np.logaddexp(0.0, -margins).sum()
    obj = 0.5 * w @ w + C * loss
    s = expit(-margins)                  # d loss / d margin = -s
    gw = w - C * (x.T @ (y * s))
    gb = -C * np.sum(y * s)
    return obj, np.concatenate([gw, [gb]])


def logreg_objective(weights, bias, x, y, C) -> float:
    theta = np.concatenate([np.asarray(weights, dtype=np.float64), [bias]])
    return _objective_grad(theta, np.asarray(x, np.float64),
                           np.asarray(y, np.float64), C)[0]


def logreg_gradient(weights, bias, x, y, C) -> np.ndarray:
    theta = np.concatenate([np.asarray(weights, dtype=np.float64), [bias]])
    return _objective_grad(theta, np.asarray(x, np.float64),
                           np.asarray(y, np.float64), C)[1]


def _newton_polish(theta, x, y, C, max_steps=50):
    n, p = x.shape
    for _ in range(max_steps):
        obj, grad = _objective_grad(theta, x, y, C)
        if np.max(np.abs(grad)) <= GRAD_TOL:
            break
        w, b = theta[:-1], theta[-1]
        margins = y * (x @ w + b)
        s = expit(-margins)
        d = C * s * (1.0 - s)            # per-sample Hessian weights
        xd = x * d[:, None]
        h = np.empty((p + 1, p + 1))
        h[:p, :p] = x.T @ xd + np.eye(p)
        h[:p, p] = xd.sum(axis=0)
        h[p, :p] = h[:p, p]
        h[p, p] = d.sum()
        try:
            step = np.linalg.solve(h, grad)
        except np.linalg.LinAlgError:
            step = grad
        # backtracking line search; near the optimum the objective change
        # sits below float resolution, so allow increases within rounding
        slack = 1e-12 * (1.0 + abs(obj))
        t = 1.0
        while t > 1e-12:
            cand = theta - t * step
            new_obj = _objective_grad(cand, x, y, C)[0]
            if new_obj <= obj + slack:
                theta = cand
                break
            t *= 0.5
        else:
            break
    return theta


def train_logreg(features, labels, C, grad_tol=GRAD_TOL,
                 max_iter=MAX_ITER) -> LogRegModel:
    x = np.asarray(getattr(features, "values", features), dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.shape[0] != y.size:
        raise DimensionMismatch(f"{x.shape[0]} rows vs {y.size} labels")
    if not (np.any(y == 1) and np.any(y == -1)):
        raise SingleClass("training labels contain a single class")
    if C <= 0:
        raise ValueError("C must be positive")

    theta0 = np.zeros(x.shape[1] + 1)
    res = minimize(_objective_grad, theta0, args=(x, y, C), jac=True,
                   method="L-BFGS-B",
                   options={"maxiter": max_iter, "gtol": 1e-9, "ftol": 1e-15})
    theta = res.x
    grad = _objective_grad(theta, x, y, C)[1]
    gnorm = float(np.max(np.abs(grad)))
    if gnorm > grad_tol and x.shape[1] <= _NEWTON_MAX_P:
        theta = _newton_polish(theta, x, y, C)
        grad = _objective_grad(theta, x, y, C)[1]
        gnorm = float(np.max(np.abs(grad)))
    if not np.all(np.isfinite(theta)):
        raise NonFinite("logistic regression produced non-finite parameters")
    converged = gnorm <= grad_tol
    if not converged:
        warnings.warn(f"logreg stopped with gradient inf-norm {gnorm:.3e}",
                      RuntimeWarning)
    return LogRegModel(theta[:-1], float(theta[-1]), float(C), gnorm, converged)


def predict_logreg(model: LogRegModel, x):
    """Returns (score, probability, label); ties in sign break to +1."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.weights.size:
        raise DimensionMismatch(
            f"expected {model.weights.size} features, got {x.shape[-1]}")
    score = x @ model.weights + model.bias
    prob = expit(score)
    label = np.where(score >= 0, 1, -1)
    return score, prob, label
