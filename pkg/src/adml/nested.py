"""Nested cross-validation, learning curves, class balancing, and
cross-dataset evaluation.

Protocol per outer split: an inner stratified k-fold runs on the outer
training set; every grid point is trained on each inner-training part and
scored by balanced accuracy on the inner-validation part; each inner fold's
best model is kept and the kept models are averaged (in primal form) into
the outer model, which is then evaluated once on the outer test set. Random
forests cannot be averaged elementwise, so the per-fold winning
hyperparameters are resolved by majority vote and a single forest is
retrained on the full outer training set.

All training computations see only outer-training rows; the Gram matrix is
sliced train x train for fitting, and held-out subjects are scored through
the primal weights (identical to kernel scoring for a linear kernel).
"""

from __future__ import annotations

import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .classifiers import (
    LinearModel,
    average_linear_models,
    train_forest,
    train_logreg,
    train_svm_dual,
)
from .classifiers.forest import predict_forest, resolve_max_features
from .errors import DescriptorMismatch, FractionTooSmall, InnerFoldDegenerate, KTooLarge
from .metrics import MetricsRecord, compute_metrics
from .seeding import (
    STREAM_BALANCE,
    STREAM_FOREST_RETRAIN,
    STREAM_INNER_FOLDS,
    mix_seed,
    rng_for,
)
from .splits import (
    SplitPlan,
    repeated_stratified_kfold,
    shuffle_split_train_orders,
    stratified_kfold,
    stratified_shuffle_splits,
)

CLASSIFIER_KINDS = ("svm", "logreg", "forest")
DEFAULT_FRACTIONS = tuple(round(0.1 * i, 1) for i in range(1, 11))


def default_grid(classifier_kind):
    if classifier_kind in ("svm", "logreg"):
        return tuple({"C": 10.0 ** e} for e in range(-6, 3))
    if classifier_kind == "forest":
        return tuple({"n_trees": nt, "max_features": mf}
                     for nt in (50, 100, 250, 500)
                     for mf in ("sqrt", "quarter", "half", "all"))
    raise ValueError(f"unknown classifier kind {classifier_kind!r}")


@dataclass(frozen=True)
class CvConfig:
    strategy: str = "repeated_shuffle"      # kfold | repeated_kfold | repeated_shuffle
    n_iterations: int = 250
    test_fraction: float = 0.3
    k: int = 5                              # outer k for the kfold strategies
    n_repeats: int = 10                     # for repeated_kfold
    inner_k: int = 10
    grid: tuple = ()                        # empty = classifier default
    master_seed: int = 0
    selection_mode: str = "per_fold_average"  # or "score_average"
    standardize: bool = False

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.inner_k < 2:
            raise ValueError("inner_k must be >= 2")
        if self.selection_mode not in ("per_fold_average", "score_average"):
            raise ValueError(f"unknown selection mode {self.selection_mode!r}")


@dataclass(frozen=True)
class ExperimentResult:
    plan: SplitPlan
    subject_ids: tuple
    per_split_metrics: tuple                # MetricsRecord per split
    predictions: tuple                      # (subject_id, split, true, pred, score)
    selected_params: tuple                  # dict per split
    summary: dict                           # metric -> (mean, sd); sd is ddof=0
    averaged_model: LinearModel | None      # across outer splits; None for forests
    warnings: tuple = ()


def make_split_plan(labels, config: CvConfig) -> SplitPlan:
    if config.strategy == "repeated_shuffle":
        return stratified_shuffle_splits(labels, config.n_iterations,
                                         config.test_fraction, config.master_seed)
    if config.strategy == "kfold":
        return stratified_kfold(labels, config.k, config.master_seed)
    if config.strategy == "repeated_kfold":
        return repeated_stratified_kfold(labels, config.k, config.n_repeats,
                                         config.master_seed)
    raise ValueError(f"unknown strategy {config.strategy!r}")


def _canonical_grid(grid, classifier_kind, n_features):
    """Sorted so that np.argmax tie-breaks toward stronger regularization
    (smaller C) or the smaller forest."""
    grid = list(grid) if grid else list(default_grid(classifier_kind))
    if classifier_kind in ("svm", "logreg"):
        return sorted(grid, key=lambda g: g["C"])
    return sorted(grid, key=lambda g: (g["n_trees"],
                                       resolve_max_features(g["max_features"],
                                                            n_features)))


def _balanced_accuracy(y_true, y_pred):
    pos = y_true == 1
    sens = np.mean(y_pred[pos] == 1)
    spec = np.mean(y_pred[~pos] == -1)
    return 0.5 * (sens + spec)


class _Engine:
    """Trains one classifier kind against a fixed feature matrix.

    Fits are addressed by global row indices; standardization statistics,
    when enabled, come from the fitted rows only and are folded into the
    returned model so that scoring always happens in raw feature space.
    """

    def __init__(self, classifier_kind, x, y, gram=None, standardize=False,
                 audit=None):
        if classifier_kind not in CLASSIFIER_KINDS:
            raise ValueError(f"unknown classifier kind {classifier_kind!r}")
        self.kind = classifier_kind
        self.x = np.asarray(getattr(x, "values", x), dtype=np.float64)
        self.y = np.asarray(y, dtype=np.int64)
        self.standardize = standardize
        self.audit = audit
        if gram is not None:
            gram = np.asarray(getattr(gram, "values", gram), dtype=np.float64)
        if classifier_kind == "svm" and gram is None and not standardize:
            gram = self.x @ self.x.T
        self.gram = gram

    @property
    def n_features(self):
        return self.x.shape[1]

    def _notify(self, split_index, stage, indices):
        if self.audit is not None:
            self.audit(split_index, stage, np.asarray(indices))

    def _standardized(self, train_idx, split_index):
        xt = self.x[train_idx]
        mu = xt.mean(axis=0)
        sd = xt.std(axis=0)
        sd = np.where(sd < 1e-12, 1.0, sd)
        self._notify(split_index, "standardize", train_idx)
        return (xt - mu) / sd, mu, sd

    def fit(self, train_idx, params, split_index, fit_seed=0):
        """Returns a fitted model scoring raw feature rows, plus a warning list."""
        train_idx = np.asarray(train_idx)
        self._notify(split_index, f"fit-{self.kind}", train_idx)
        yt = self.y[train_idx]
        notes = []
        if self.kind == "svm":
            if self.standardize:
                xt, mu, sd = self._standardized(train_idx, split_index)
                k = xt @ xt.T
            else:
                xt, mu, sd = self.x[train_idx], None, None
                k = self.gram[np.ix_(train_idx, train_idx)]
            model = train_svm_dual(k, yt, params["C"])
            if not model.converged:
                notes.append(f"svm C={params['C']}: pair-update cap reached")
            w = xt.T @ (model.alpha * model.train_labels)
            b = model.bias
            if self.standardize:
                w = w / sd
                b = b - float(w @ mu)
            return LinearModel(w, b), notes
        if self.kind == "logreg":
            if self.standardize:
                xt, mu, sd = self._standardized(train_idx, split_index)
            else:
                xt, mu, sd = self.x[train_idx], None, None
            model = train_logreg(xt, yt, params["C"])
            if not model.converged:
                notes.append(f"logreg C={params['C']}: gradient norm "
                             f"{model.grad_norm:.2e} above tolerance")
            w, b = model.weights, model.bias
            if self.standardize:
                w = w / sd
                b = b - float(w @ mu)
            return LinearModel(w, b), notes
        # forest
        if self.standardize:
            xt, mu, sd = self._standardized(train_idx, split_index)
        else:
            xt, mu, sd = self.x[train_idx], None, None
        model = train_forest(xt, yt, params["n_trees"], params["max_features"],
                             fit_seed)
        return _FittedForest(model, mu, sd), notes


@dataclass
class _FittedForest:
    model: object
    mu: np.ndarray | None
    sd: np.ndarray | None

    def decision(self, rows):
        if self.mu is not None:
            rows = (rows - self.mu) / self.sd
        labels, scores = predict_forest(self.model, rows)
        return scores, labels


def _decision(model, rows):
    if isinstance(model, LinearModel):
        s = model.score(rows)
        return s, np.where(s >= 0, 1, -1)
    return model.decision(rows)


def _majority_params(chosen, grid):
    """Most frequent grid index; ties break toward the smaller index
    (stronger regularization / smaller forest under canonical grid order)."""
    counts = Counter(chosen)
    best = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
    return best[0]


def _select_and_fit(engine, train_idx, split_index, config, grid):
    """Inner-loop hyperparameter selection on train_idx only.

    Returns (outer model, chosen params dict, warning list).
    """
    train_idx = np.asarray(train_idx)
    y_train = engine.y[train_idx]
    inner_seed = mix_seed(config.master_seed, STREAM_INNER_FOLDS + split_index)
    try:
        inner_plan = stratified_kfold(y_train, config.inner_k, inner_seed)
    except KTooLarge as e:
        raise InnerFoldDegenerate(str(e)) from e

    notes = []
    fold_scores = np.empty((len(inner_plan.splits), len(grid)))
    fold_models = [[None] * len(grid) for _ in inner_plan.splits]
    for f, (itr, ival) in enumerate(inner_plan.splits):
        fit_rows = train_idx[itr]
        val_rows = train_idx[ival]
        for g, params in enumerate(grid):
            fit_seed = mix_seed(config.master_seed,
                                STREAM_INNER_FOLDS + split_index * 1009 + f * 31 + g)
            model, w = engine.fit(fit_rows, params, split_index, fit_seed)
            notes.extend(w)
            scores, labels = _decision(model, engine.x[val_rows])
            fold_scores[f, g] = _balanced_accuracy(engine.y[val_rows], labels)
            fold_models[f][g] = model

    if config.selection_mode == "score_average":
        best = int(np.argmax(fold_scores.mean(axis=0)))
        chosen = grid[best]
        retrain_seed = mix_seed(config.master_seed,
                                STREAM_FOREST_RETRAIN + split_index)
        outer_model, w = engine.fit(train_idx, chosen, split_index, retrain_seed)
        notes.extend(w)
        return outer_model, chosen, notes

    best_per_fold = [int(np.argmax(fold_scores[f])) for f in range(fold_scores.shape[0])]
    chosen_idx = _majority_params(best_per_fold, grid)
    chosen = grid[chosen_idx]
    if engine.kind == "forest":
        retrain_seed = mix_seed(config.master_seed,
                                STREAM_FOREST_RETRAIN + split_index)
        outer_model, w = engine.fit(train_idx, chosen, split_index, retrain_seed)
        notes.extend(w)
        return outer_model, chosen, notes
    selected = [fold_models[f][g] for f, g in enumerate(best_per_fold)]
    return average_linear_models(selected), chosen, notes


def _run_outer_split(engine, train_idx, test_idx, split_index, config, grid):
    outer_model, chosen, notes = _select_and_fit(engine, train_idx, split_index,
                                                 config, grid)
    scores, labels = _decision(outer_model, engine.x[test_idx])
    record = compute_metrics(engine.y[test_idx], labels, scores)
    return record, labels, scores, chosen, outer_model, notes


def _worker_count():
    raw = os.environ.get("ADML_WORKERS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 1
    return max(1, n)


def _map_splits(fn, n_splits):
    workers = _worker_count()
    if workers == 1:
        return [fn(i) for i in range(n_splits)]
    results = [None] * n_splits
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for i, out in zip(range(n_splits), pool.map(fn, range(n_splits))):
            results[i] = out
    return results


def _summarize(per_split_metrics):
    summary = {}
    for m in MetricsRecord.FIELDS:
        vals = np.array([getattr(r, m) for r in per_split_metrics])
        summary[m] = (float(vals.mean()), float(vals.std(ddof=0)))
    return summary


def nested_cv(features, labels, classifier_kind, config: CvConfig,
              gram=None, subject_ids=None, audit=None) -> ExperimentResult:
    """Full nested cross-validation of one classifier over a feature matrix.

    `gram` may carry a precomputed linear-kernel matrix over all rows; it is
    sliced per split. Reported SD is the uncorrected sample SD over splits,
    which underestimates the true variance of the estimator.
    """
    y = np.asarray(labels, dtype=np.int64)
    engine = _Engine(classifier_kind, features, y, gram=gram,
                     standardize=config.standardize, audit=audit)
    if subject_ids is None:
        sids = getattr(features, "subject_ids", None)
        subject_ids = tuple(sids) if sids is not None else tuple(
            f"row-{i:04d}" for i in range(y.size))
    grid = _canonical_grid(config.grid, classifier_kind, engine.n_features)
    plan = make_split_plan(y, config)

    def run(i):
        train_idx, test_idx = plan.splits[i]
        return _run_outer_split(engine, train_idx, test_idx, i, config, grid)

    outcomes = _map_splits(run, plan.n_splits)

    per_split, predictions, selected, models, warns = [], [], [], [], []
    for i, (record, labels_i, scores_i, chosen, model, notes) in enumerate(outcomes):
        per_split.append(record)
        selected.append(chosen)
        warns.extend(f"split {i}: {n}" for n in notes)
        test_idx = plan.splits[i][1]
        for t, yl, yp, sc in zip(test_idx, y[test_idx], labels_i, scores_i):
            predictions.append((subject_ids[t], i, int(yl), int(yp), float(sc)))
        if isinstance(model, LinearModel):
            models.append(model)

    averaged = average_linear_models(models) if models else None
    return ExperimentResult(
        plan=plan,
        subject_ids=tuple(subject_ids),
        per_split_metrics=tuple(per_split),
        predictions=tuple(predictions),
        selected_params=tuple(selected),
        summary=_summarize(per_split),
        averaged_model=averaged,
        warnings=tuple(warns),
    )


# --- learning curves ----------------------------------------------------------


@dataclass(frozen=True)
class LearningCurvePoint:
    fraction: float
    mean_balanced_accuracy: float | None
    sd_balanced_accuracy: float | None
    n_splits_used: int
    skipped: bool


@dataclass(frozen=True)
class LearningCurveResult:
    points: tuple
    per_split: dict                         # fraction -> list of balanced accuracies


def learning_curve(features, labels, classifier_kind, config: CvConfig,
                   fractions=DEFAULT_FRACTIONS, gram=None,
                   audit=None) -> LearningCurveResult:
    """Balanced accuracy as a function of training-set size.

    Per shuffle split, training subsets are stratified nested prefixes of the
    shuffled training order (a smaller fraction's subjects are contained in
    every larger fraction's), and every subset is evaluated on the same test
    set. Fractions whose subsets cannot feed the inner k-fold are reported as
    skipped, never silently filled.
    """
    fractions = tuple(fractions)
    if any(not 0.0 < f <= 1.0 for f in fractions):
        raise FractionTooSmall("fractions must lie in (0, 1]")
    if list(fractions) != sorted(fractions):
        raise ValueError("fractions must be sorted ascending")
    y = np.asarray(labels, dtype=np.int64)
    engine = _Engine(classifier_kind, features, y, gram=gram,
                     standardize=config.standardize, audit=audit)
    grid = _canonical_grid(config.grid, classifier_kind, engine.n_features)
    orders = shuffle_split_train_orders(y, config.n_iterations,
                                        config.test_fraction, config.master_seed)

    def run(i):
        train_ordered, test_idx = orders[i]
        out = {}
        for f in fractions:
            prefixes = []
            ok = True
            for cls_order in train_ordered:
                m = int(round(f * cls_order.size))
                if m < config.inner_k:
                    ok = False
                    break
                prefixes.append(cls_order[:m])
            if not ok:
                out[f] = None
                continue
            subset = np.sort(np.concatenate(prefixes))
            record, *_ = _run_outer_split(engine, subset, test_idx, i, config, grid)
            out[f] = record.balanced_accuracy
        return out

    split_outputs = _map_splits(run, len(orders))

    per_split = {f: [o[f] for o in split_outputs if o[f] is not None]
                 for f in fractions}
    points = []
    for f in fractions:
        vals = per_split[f]
        if vals:
            arr = np.array(vals)
            points.append(LearningCurvePoint(f, float(arr.mean()),
                                             float(arr.std(ddof=0)),
                                             len(vals), False))
        else:
            points.append(LearningCurvePoint(f, None, None, 0, True))
    return LearningCurveResult(tuple(points), per_split)


# --- class balancing ------------------------------------------------------------


def balance_classes(labels, seed):
    """Downsample the majority class to the minority count; returns sorted indices."""
    y = np.asarray(labels)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size != 2:
        raise ValueError("balance_classes needs exactly two classes")
    n_min = int(counts.min())
    rng = rng_for(seed, STREAM_BALANCE)
    keep = []
    for c, n in zip(classes, counts):
        idx = np.flatnonzero(y == c)
        if n > n_min:
            idx = rng.permutation(idx)[:n_min]
        keep.append(idx)
    return np.sort(np.concatenate(keep)).astype(np.int64)


# --- cross-dataset evaluation ----------------------------------------------------


def cross_dataset_eval(train_features, train_labels, test_features, test_labels,
                       classifier_kind, config: CvConfig, audit=None):
    """Train (with inner CV selection) on one dataset, test once on another.

    There is no outer CV, hence a single MetricsRecord and no empirical SD.
    """
    d_train = getattr(train_features, "descriptor", None)
    d_test = getattr(test_features, "descriptor", None)
    if d_train != d_test:
        raise DescriptorMismatch("train and test feature descriptors differ")
    y_train = np.asarray(train_labels, dtype=np.int64)
    y_test = np.asarray(test_labels, dtype=np.int64)
    engine = _Engine(classifier_kind, train_features, y_train,
                     standardize=config.standardize, audit=audit)
    grid = _canonical_grid(config.grid, classifier_kind, engine.n_features)
    train_idx = np.arange(y_train.size)
    model, chosen, notes = _select_and_fit(engine, train_idx, 0, config, grid)
    x_test = np.asarray(getattr(test_features, "values", test_features),
                        dtype=np.float64)
    scores, labels = _decision(model, x_test)
    record = compute_metrics(y_test, labels, scores)
    predictions = tuple(
        (i, int(yl), int(yp), float(sc))
        for i, (yl, yp, sc) in enumerate(zip(y_test, labels, scores)))
    return record, predictions, chosen, model
