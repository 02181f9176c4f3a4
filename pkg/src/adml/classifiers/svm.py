"""Soft-margin linear SVM solved in the dual over a precomputed Gram matrix.

Maximizes  sum(alpha) - 0.5 * alpha' (yy' * K) alpha  subject to
0 <= alpha_i <= C and sum(alpha_i y_i) = 0, by SMO-style pairwise coordinate
ascent with most-violating-pair working-set selection. Cost per update is
O(n), so training scales with the number of subjects, not features.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionMismatch, LengthMismatch, NonPsdGram, SingleClass
from .linear import LinearModel

DEFAULT_TOL = 1e-6          # stopping threshold on the maximal KKT violation
MAX_PAIR_UPDATES = 10 ** 6


@dataclass
class SvmDualModel:
    alpha: np.ndarray
    train_labels: np.ndarray
    bias: float
    C: float
    converged: bool = True

    @property
    def support_indices(self):
        return np.flatnonzero(self.alpha > 0)


def train_svm_dual(gram, labels, C, tol=DEFAULT_TOL,
                   max_pair_updates=MAX_PAIR_UPDATES) -> SvmDualModel:
    k = np.asarray(getattr(gram, "values", gram), dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    n = y.size
    if k.shape != (n, n):
        raise DimensionMismatch(f"gram shape {k.shape} vs {n} labels")
    if not (np.any(y == 1) and np.any(y == -1)):
        raise SingleClass("training labels contain a single class")
    if C <= 0:
        raise ValueError("C must be positive")

    diag = np.diag(k)
    trace = max(float(diag.sum()), 1e-300)
    alpha = np.zeros(n)
    grad = -np.ones(n)                 # gradient of 0.5 a'Qa - 1'a at a=0
    yg = -y * grad                     # selection scores
    up = np.empty(n, dtype=bool)
    low = np.empty(n, dtype=bool)

    converged = False
    prev_obj = 0.0
    for _ in range(max_pair_updates):
        np.logical_or((y > 0) & (alpha < C), (y < 0) & (alpha > 0), out=up)
        np.logical_or((y > 0) & (alpha > 0), (y < 0) & (alpha < C), out=low)
        i = int(np.argmax(np.where(up, yg, -np.inf)))
        j = int(np.argmin(np.where(low, yg, np.inf)))
        m_up, m_low = yg[i], yg[j]
        if m_up - m_low <= tol:
            converged = True
            break

        quad = diag[i] + diag[j] - 2.0 * k[i, j]
        if quad < -1e-8 * trace:
            raise NonPsdGram(f"negative curvature {quad} along pair ({i}, {j})")
        quad = max(quad, 1e-12 * max(trace, 1.0))
        d = (m_up - m_low) / quad

        # box-clip the step: a_i moves by +y_i*d, a_j by -y_j*d
        d_max = min(
            (C - alpha[i]) if y[i] > 0 else alpha[i],
            alpha[j] if y[j] > 0 else (C - alpha[j]),
        )
        d = min(d, d_max)
        if d <= 0:
            converged = True   # numerically stuck at the boundary
            break
        dai = y[i] * d
        daj = -y[j] * d
        alpha[i] += dai
        alpha[j] += daj
        grad += (y * y[i] * k[:, i]) * dai + (y * y[j] * k[:, j]) * daj
        np.multiply(y, grad, out=yg)
        np.negative(yg, out=yg)

        if __debug__:
            obj = 0.5 * (alpha.sum() - alpha @ grad)
            assert obj >= prev_obj - 1e-9 * max(1.0, abs(prev_obj)), \
                "dual objective decreased"
            prev_obj = obj

    if not converged:
        warnings.warn("SVM pair-update cap reached before KKT tolerance",
                      RuntimeWarning)

    # snap negligible coordinates onto the box
    eps = 1e-12 * max(C, 1.0)
    alpha[alpha < eps] = 0.0
    alpha[alpha > C - eps] = C

    # bias: average over unbounded support vectors, else midpoint of the
    # interval implied by the bound constraints
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        b = float(np.mean(yg[free]))
    else:
        # recompute the sets from the snapped alpha; with both classes
        # present and sum(alpha*y) = 0 neither set can be empty
        np.logical_or((y > 0) & (alpha < C), (y < 0) & (alpha > 0), out=up)
        np.logical_or((y > 0) & (alpha > 0), (y < 0) & (alpha < C), out=low)
        b = float(0.5 * (np.max(yg[up]) + np.min(yg[low])))
    return SvmDualModel(alpha, y.astype(np.int64), b, float(C), converged)


def dual_objective(gram, labels, alpha) -> float:
    k = np.asarray(getattr(gram, "values", gram), dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    a = np.asarray(alpha, dtype=np.float64)
    q = (y[:, None] * y[None, :]) * k
    return float(a.sum() - 0.5 * a @ q @ a)


def predict_svm(model: SvmDualModel, kernel_row):
    """Decision score(s) for kernel rows against the training set.

    kernel_row may be a single row (n_train,) or a block (m, n_train) from
    cross_gram. Label = sign(score) with ties to +1.
    """
    row = np.asarray(kernel_row, dtype=np.float64)
    if row.shape[-1] != model.alpha.size:
        raise LengthMismatch(
            f"kernel row length {row.shape[-1]} != n_train {model.alpha.size}")
    return row @ (model.alpha * model.train_labels) + model.bias


def svm_labels(scores):
    return np.where(np.asarray(scores) >= 0, 1, -1)


def reconstruct_weights(model: SvmDualModel, train_features) -> LinearModel:
    """Primal weights w = sum_i alpha_i y_i x_i, bias copied from the dual."""
    x = np.asarray(getattr(train_features, "values", train_features), dtype=np.float64)
    if x.shape[0] != model.alpha.size:
        raise DimensionMismatch(
            f"{x.shape[0]} feature rows vs {model.alpha.size} dual coefficients")
    w = x.T @ (model.alpha * model.train_labels)
    return LinearModel(w, model.bias)
