import numpy as np
import pytest

from adml.errors import DegenerateFraction, KTooLarge
from adml.splits import (
    repeated_stratified_kfold,
    shuffle_split_train_orders,
    stratified_kfold,
    stratified_shuffle_splits,
)


def _check_split_hygiene(labels, train, test, test_fraction=None):
    y = np.asarray(labels)
    n = y.size
    assert np.intersect1d(train, test).size == 0
    assert np.union1d(train, test).size == train.size + test.size
    assert np.all((train >= 0) & (train < n)) and np.all((test >= 0) & (test < n))
    for part in (train, test):
        classes = np.unique(y[part])
        assert set(classes) == {-1, 1}
    if test_fraction is not None:
        for c in (-1, 1):
            exact = test_fraction * np.sum(y == c)
            got = np.sum(y[test] == c)
            assert abs(got - exact) <= 1.0


def test_kfold_partitions_and_stratifies(rng):
    y = np.array([-1] * 13 + [1] * 9)
    plan = stratified_kfold(y, 4, seed=11)
    all_test = np.concatenate([t for _, t in plan.splits])
    assert np.array_equal(np.sort(all_test), np.arange(y.size))
    for train, test in plan.splits:
        _check_split_hygiene(y, train, test)
        # round-robin keeps per-class fold sizes within 1
        for c in (-1, 1):
            sizes = [np.sum(y[t] == c) for _, t in plan.splits]
            assert max(sizes) - min(sizes) <= 1


def test_kfold_k_too_large():
    y = np.array([-1] * 10 + [1] * 3)
    with pytest.raises(KTooLarge):
        stratified_kfold(y, 4, seed=0)


def test_repeated_kfold_counts():
    y = np.array([-1, 1] * 10)
    plan = repeated_stratified_kfold(y, 5, 3, seed=2)
    assert plan.n_splits == 15
    # repeats use different shuffles
    assert not np.array_equal(plan.splits[0][1], plan.splits[5][1])


def test_shuffle_split_hygiene(rng):
    y = np.array([-1] * 17 + [1] * 23)
    plan = stratified_shuffle_splits(y, 50, 0.3, seed=5)
    assert plan.n_splits == 50
    for train, test in plan.splits:
        _check_split_hygiene(y, train, test, test_fraction=0.3)
        assert test.size == round(0.3 * y.size)


def test_shuffle_split_degenerate_fraction():
    y = np.array([-1] * 2 + [1] * 50)
    with pytest.raises(DegenerateFraction):
        stratified_shuffle_splits(y, 1, 0.05, seed=0)


def test_plans_are_schedule_independent():
    y = np.array([-1] * 12 + [1] * 12)
    p1 = stratified_shuffle_splits(y, 20, 0.25, seed=9)
    p2 = stratified_shuffle_splits(y, 20, 0.25, seed=9)
    for (tr1, te1), (tr2, te2) in zip(p1.splits, p2.splits):
        np.testing.assert_array_equal(tr1, tr2)
        np.testing.assert_array_equal(te1, te2)
    # a shorter plan is a prefix of a longer one with the same seed
    p3 = stratified_shuffle_splits(y, 5, 0.25, seed=9)
    for (tr1, te1), (tr3, te3) in zip(p1.splits, p3.splits):
        np.testing.assert_array_equal(tr1, tr3)
        np.testing.assert_array_equal(te1, te3)


def test_train_orders_agree_with_shuffle_splits():
    y = np.array([-1] * 15 + [1] * 21)
    plan = stratified_shuffle_splits(y, 10, 0.3, seed=4)
    orders = shuffle_split_train_orders(y, 10, 0.3, seed=4)
    for (train, test), (train_ordered, test_o) in zip(plan.splits, orders):
        np.testing.assert_array_equal(test, test_o)
        np.testing.assert_array_equal(
            np.sort(np.concatenate(train_ordered)), train)


def test_different_seeds_differ():
    y = np.array([-1] * 20 + [1] * 20)
    p1 = stratified_shuffle_splits(y, 1, 0.3, seed=1)
    p2 = stratified_shuffle_splits(y, 1, 0.3, seed=2)
    assert not np.array_equal(p1.splits[0][1], p2.splits[0][1])
