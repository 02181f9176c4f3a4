import numpy as np
import pytest

from adml.classifiers import (
    LinearModel,
    predict_forest,
    predict_logreg,
    predict_svm,
    train_forest,
    train_logreg,
    train_svm_dual,
)
from adml.errors import IoFailure
from adml.model_io import load_model, save_model


def test_linear_roundtrip_is_exact(tmp_path, rng):
    model = LinearModel(rng.standard_normal(17), float(rng.standard_normal()))
    path = tmp_path / "linear.txt"
    save_model(model, path)
    back = load_model(path)
    np.testing.assert_array_equal(back.weights, model.weights)
    assert back.bias == model.bias


def test_svm_roundtrip_preserves_predictions(tmp_path, rng):
    x = rng.standard_normal((12, 4))
    y = np.array([-1, 1] * 6)
    model = train_svm_dual(x @ x.T, y, 1.0)
    path = tmp_path / "svm.txt"
    save_model(model, path)
    back = load_model(path)
    np.testing.assert_array_equal(back.alpha, model.alpha)
    np.testing.assert_array_equal(back.train_labels, model.train_labels)
    assert back.bias == model.bias and back.C == model.C
    probe = rng.standard_normal((5, 4)) @ x.T
    np.testing.assert_array_equal(predict_svm(back, probe),
                                  predict_svm(model, probe))


def test_logreg_roundtrip(tmp_path, rng):
    x = rng.standard_normal((20, 3))
    y = np.where(x[:, 0] > 0, 1, -1)
    model = train_logreg(x, y, 1.0)
    path = tmp_path / "logreg.txt"
    save_model(model, path)
    back = load_model(path)
    probe = rng.standard_normal((7, 3))
    for got, want in zip(predict_logreg(back, probe),
                         predict_logreg(model, probe)):
        np.testing.assert_array_equal(got, want)


def test_forest_roundtrip(tmp_path, rng):
    x = rng.standard_normal((25, 5))
    y = np.array([-1, 1] * 12 + [1])
    model = train_forest(x, y, 7, "sqrt", seed=13)
    path = tmp_path / "forest.txt"
    save_model(model, path)
    back = load_model(path)
    assert (back.n_trees, back.n_features, back.max_features, back.seed) == \
        (model.n_trees, model.n_features, model.max_features, model.seed)
    probe = rng.standard_normal((30, 5))
    np.testing.assert_array_equal(predict_forest(back, probe)[1],
                                  predict_forest(model, probe)[1])


def test_format_is_stable_text(tmp_path):
    model = LinearModel(np.array([0.25, -1.5]), 0.125)
    path = tmp_path / "m.txt"
    save_model(model, path)
    text = path.read_text(encoding="utf-8")
    assert text.splitlines()[0] == "adml-model 1"
    assert "kind: linear" in text
    assert "array weights 2" in text
    # saving twice is byte-identical
    save_model(model, tmp_path / "m2.txt")
    assert text == (tmp_path / "m2.txt").read_text(encoding="utf-8")


def test_bad_file_rejected(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("not a model\n", encoding="utf-8")
    with pytest.raises(IoFailure):
        load_model(path)


def test_unknown_type_rejected(tmp_path):
    with pytest.raises(TypeError):
        save_model(object(), tmp_path / "x.txt")
