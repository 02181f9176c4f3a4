"""Stratified split planning.

All strategies derive the RNG of split i by mixing the master seed with the
split index, so a plan is identical no matter in which order its splits are
generated or consumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFraction, KTooLarge
from .seeding import STREAM_OUTER_SPLIT, mix_seed


@dataclass(frozen=True)
class SplitPlan:
    strategy: str                 # kfold | repeated_kfold | repeated_shuffle
    splits: tuple                 # of (train_indices, test_indices) int64 arrays
    master_seed: int

    @property
    def n_splits(self):
        return len(self.splits)


def _class_indices(labels):
    y = np.asarray(labels)
    classes = np.unique(y)
    if classes.size != 2:
        raise ValueError(f"expected exactly 2 classes, got {classes.tolist()}")
    return y, [np.flatnonzero(y == c) for c in classes]


def stratified_kfold(labels, k, seed) -> SplitPlan:
    """Per-class shuffled round-robin fold assignment; test folds partition all."""
    y, per_class = _class_indices(labels)
    min_count = min(idx.size for idx in per_class)
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > min_count:
        raise KTooLarge(f"k={k} exceeds minority class count {min_count}")
    rng = np.random.default_rng(mix_seed(seed, STREAM_OUTER_SPLIT))
    shuffled = [rng.permutation(idx) for idx in per_class]
    splits = []
    for f in range(k):
        test = np.sort(np.concatenate([s[f::k] for s in shuffled]))
        train = np.setdiff1d(np.arange(y.size), test)
        splits.append((train.astype(np.int64), test.astype(np.int64)))
    return SplitPlan("kfold", tuple(splits), int(seed))


def repeated_stratified_kfold(labels, k, n_repeats, seed) -> SplitPlan:
    splits = []
    for r in range(n_repeats):
        plan = stratified_kfold(labels, k, mix_seed(seed, r))
        splits.extend(plan.splits)
    return SplitPlan("repeated_kfold", tuple(splits), int(seed))


def _per_class_test_counts(per_class_sizes, test_fraction):
    """round() per class, then one +-1 correction to hit the global test size.

    The corrected class is the one whose rounding error has the right sign,
    which keeps every class within 1 of its exact proportional share.
    """
    exact = [test_fraction * c for c in per_class_sizes]
    counts = [int(round(e)) for e in exact]
    target = int(round(test_fraction * sum(per_class_sizes)))
    diff = target - sum(counts)
    errors = [c - e for c, e in zip(counts, exact)]
    while diff != 0:
        step = 1 if diff > 0 else -1
        pick = int(np.argmin(errors)) if diff > 0 else int(np.argmax(errors))
        counts[pick] += step
        errors[pick] += step
        diff -= step
    return counts


def _one_shuffle_split(per_class, test_fraction, rng):
    """Returns (train_indices_in_rng_order, test_indices_sorted)."""
    counts = _per_class_test_counts([c.size for c in per_class], test_fraction)
    train_parts, test_parts = [], []
    for idx, n_test in zip(per_class, counts):
        if n_test < 1 or n_test >= idx.size:
            raise DegenerateFraction(
                f"class of size {idx.size} would put {n_test} samples in test")
        order = rng.permutation(idx)
        test_parts.append(order[:n_test])
        train_parts.append(order[n_test:])
    test = np.sort(np.concatenate(test_parts)).astype(np.int64)
    train_ordered = [t.astype(np.int64) for t in train_parts]
    return train_ordered, test


def stratified_shuffle_splits(labels, n_iterations, test_fraction, seed) -> SplitPlan:
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if n_iterations < 1:
        raise ValueError("n_iterations must be >= 1")
    _, per_class = _class_indices(labels)
    splits = []
    for i in range(n_iterations):
        rng = np.random.default_rng(mix_seed(seed, STREAM_OUTER_SPLIT + i))
        train_ordered, test = _one_shuffle_split(per_class, test_fraction, rng)
        train = np.sort(np.concatenate(train_ordered))
        splits.append((train, test))
    return SplitPlan("repeated_shuffle", tuple(splits), int(seed))


def shuffle_split_train_orders(labels, n_iterations, test_fraction, seed):
    """Per-split per-class training indices in RNG order.

    Used to build nested training-set prefixes for learning curves; prefix
    construction must agree exactly with stratified_shuffle_splits for the
    same seed, so both call the same underlying draw.
    """
    _, per_class = _class_indices(labels)
    out = []
    for i in range(n_iterations):
        rng = np.random.default_rng(mix_seed(seed, STREAM_OUTER_SPLIT + i))
        train_ordered, test = _one_shuffle_split(per_class, test_fraction, rng)
        out.append((train_ordered, test))
    return out
