"""Random forest of CART trees for binary labels in {-1, +1}.

Each tree is grown on a bootstrap sample with Gini-impurity splits; at each
node max_features candidate features are drawn without replacement, and more
are drawn only if none of them admits a useful split (so an impure node with
separable points never degenerates into a leaf). Trees grow until pure or
fewer than two samples. Each tree has its own RNG stream derived from
(seed, tree index), so results do not depend on growth order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import BadMaxFeatures, DimensionMismatch, SingleClass
from ..seeding import mix_seed


@dataclass
class TreeNode:
    feature: int = -1            # -1 marks a leaf
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    votes_neg: int = 0
    votes_pos: int = 0

    @property
    def is_leaf(self):
        return self.feature < 0

    def vote(self):
        return 1 if self.votes_pos >= self.votes_neg else -1


@dataclass
class ForestModel:
    trees: list
    n_features: int
    n_trees: int
    max_features: int
    seed: int


def resolve_max_features(spec, p: int) -> int:
    """Accepts an absolute count or the symbolic names used in manifests."""
    if isinstance(spec, str):
        if spec == "sqrt":
            return int(np.ceil(np.sqrt(p)))
        if spec == "quarter":
            return int(np.ceil(p / 4))
        if spec == "half":
            return int(np.ceil(p / 2))
        if spec == "all":
            return p
        raise BadMaxFeatures(f"unknown max_features spec {spec!r}")
    mf = int(spec)
    if not 1 <= mf <= p:
        raise BadMaxFeatures(f"max_features {mf} outside [1, {p}]")
    return mf


def _gini_split_gain(values, labels):
    """Best (threshold, gain) for one feature, or None if no valid split.

    gain is the decrease in weighted Gini impurity relative to the parent.
    Thresholds are midpoints between consecutive distinct sorted values.
    """
    order = np.argsort(values, kind="mergesort")
    v = values[order]
    pos = (labels[order] > 0).astype(np.float64)
    n = v.size
    cum_pos = np.cumsum(pos)
    total_pos = cum_pos[-1]
    # candidate boundary after position i (1-based count on the left)
    left_n = np.arange(1, n, dtype=np.float64)
    left_pos = cum_pos[:-1]
    right_n = n - left_n
    right_pos = total_pos - left_pos
    valid = v[1:] > v[:-1]
    if not np.any(valid):
        return None
    pl = left_pos / left_n
    pr = right_pos / right_n
    child = left_n * 2 * pl * (1 - pl) + right_n * 2 * pr * (1 - pr)
    p_all = total_pos / n
    parent = n * 2 * p_all * (1 - p_all)
    gain = (parent - child) / n
    gain[~valid] = -np.inf
    best = int(np.argmax(gain))
    if gain[best] <= 0:
        return None
    threshold = 0.5 * (v[best] + v[best + 1])
    return threshold, float(gain[best])


def _grow(x, y, rng, max_features):
    n = y.size
    n_pos = int(np.sum(y > 0))
    n_neg = n - n_pos
    if n < 2 or n_pos == 0 or n_neg == 0:
        return TreeNode(votes_neg=n_neg, votes_pos=n_pos)
    p = x.shape[1]
    feature_order = rng.permutation(p)
    best = None
    for rank, f in enumerate(feature_order):
        split = _gini_split_gain(x[:, f], y)
        if split is not None:
            threshold, gain = split
            if best is None or gain > best[2]:
                best = (int(f), threshold, gain)
        if rank + 1 >= max_features and best is not None:
            break
    if best is None:
        return TreeNode(votes_neg=n_neg, votes_pos=n_pos)
    f, threshold, _ = best
    mask = x[:, f] <= threshold
    node = TreeNode(feature=f, threshold=threshold,
                    votes_neg=n_neg, votes_pos=n_pos)
    node.left = _grow(x[mask], y[mask], rng, max_features)
    node.right = _grow(x[~mask], y[~mask], rng, max_features)
    return node


def train_forest(features, labels, n_trees, max_features, seed) -> ForestModel:
    x = np.asarray(getattr(features, "values", features), dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.shape[0] != y.size:
        raise DimensionMismatch(f"{x.shape[0]} rows vs {y.size} labels")
    if not (np.any(y == 1) and np.any(y == -1)):
        raise SingleClass("training labels contain a single class")
    if n_trees < 1:
        raise ValueError(f"n_trees must be >= 1, got {n_trees}")
    mf = resolve_max_features(max_features, x.shape[1])
    n = y.size
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng(mix_seed(seed, t))
        boot = rng.integers(0, n, size=n)
        trees.append(_grow(x[boot], y[boot], rng, mf))
    return ForestModel(trees, x.shape[1], int(n_trees), mf, int(seed))


def _tree_vote(node, x):
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.vote()


def predict_forest(model: ForestModel, x):
    """Returns (label, score) where score = fraction of trees voting +1.

    Vote ties break to +1. Accepts one sample (p,) or a batch (m, p).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.n_features:
        raise DimensionMismatch(
            f"expected {model.n_features} features, got {x.shape[1]}")
    scores = np.empty(x.shape[0])
    for i, row in enumerate(x):
        pos = sum(1 for t in model.trees if _tree_vote(t, row) > 0)
        scores[i] = pos / len(model.trees)
    labels = np.where(scores >= 0.5, 1, -1)
    if single:
        return int(labels[0]), float(scores[0])
    return labels, scores
