import csv
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from adml.errors import DescriptorMismatch, EmptyDistribution
from adml.features import RegionList, VoxelIndexMap
from adml.classifiers import LinearModel
from adml.features import FeatureMatrix
from adml.nested import CvConfig, nested_cv
from adml.nifti import read_nifti
from adml.report import (
    emit_boxplot_svg,
    emit_reports,
    emit_single_metrics,
    emit_weight_volume,
    quartiles,
)
from adml.volume import LabelVolume

from conftest import make_mask
from oracles import quantile_sort_oracle


def _read_tsv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


@pytest.fixture(scope="module")
def small_result():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((30, 4))
    y = np.array([-1] * 15 + [1] * 15)
    x[:, 0] = y * (1 + np.abs(x[:, 0]))
    feats = FeatureMatrix(x, tuple(f"s{i:02d}" for i in range(30)),
                          VoxelIndexMap("g", np.arange(4)))
    config = CvConfig(n_iterations=6, test_fraction=0.3, inner_k=3,
                      master_seed=1, grid=({"C": 1.0},))
    return nested_cv(feats, y, "svm", config)


def test_emit_reports_tables(tmp_path, small_result):
    emit_reports(small_result, tmp_path)
    metrics = _read_tsv(tmp_path / "metrics_per_split.tsv")
    assert len(metrics) == 6
    for i, (row, rec) in enumerate(zip(metrics, small_result.per_split_metrics)):
        assert int(row["split"]) == i
        assert float(row["balanced_accuracy"]) == rec.balanced_accuracy
        assert int(row["tp"]) == rec.tp
        assert row["selected_params"] == "C=1.0"

    summary = {r["metric"]: (float(r["mean"]), float(r["sd"]))
               for r in _read_tsv(tmp_path / "summary.tsv")}
    assert summary == small_result.summary

    preds = _read_tsv(tmp_path / "subject_predictions.tsv")
    assert len(preds) == len(small_result.predictions)
    assert float(preds[0]["score"]) == small_result.predictions[0][4]

    splits = _read_tsv(tmp_path / "splits.tsv")
    assert len(splits) == 6
    train0 = splits[0]["train_ids"].split(",")
    test0 = splits[0]["test_ids"].split(",")
    assert not set(train0) & set(test0)
    assert len(train0) + len(test0) == 30


def test_reports_are_rerun_identical(tmp_path, small_result):
    emit_reports(small_result, tmp_path / "a")
    emit_reports(small_result, tmp_path / "b")
    for name in ("metrics_per_split.tsv", "subject_predictions.tsv",
                 "summary.tsv", "splits.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == \
            (tmp_path / "b" / name).read_bytes()


def test_emit_single_metrics(tmp_path, small_result):
    record = small_result.per_split_metrics[0]
    emit_single_metrics(record, {"C": 0.1}, tmp_path)
    rows = _read_tsv(tmp_path / "metrics.tsv")
    assert len(rows) == 1
    assert float(rows[0]["auc"]) == record.auc
    assert "sd" not in rows[0]


def test_weight_volume_voxel_painting(tmp_path, rng):
    mask = make_mask(rng.random((4, 4, 4)) > 0.5)
    indices = np.flatnonzero(mask.included.ravel(order="F"))
    model = LinearModel(rng.standard_normal(indices.size), 0.0)
    desc = VoxelIndexMap("g", indices)
    out = tmp_path / "w.nii.gz"
    emit_weight_volume(model, desc, mask, out)
    back = read_nifti(out)
    flat = back.data.ravel(order="F")
    np.testing.assert_allclose(flat[indices],
                               model.weights.astype(np.float32), atol=0)
    others = np.setdiff1d(np.arange(64), indices)
    assert np.all(flat[others] == 0)


def test_weight_volume_regional_painting(tmp_path):
    labels = np.zeros((3, 3, 3), dtype=np.int32)
    labels[0] = 1
    labels[2] = 4
    atlas = LabelVolume(labels, (1.0, 1.0, 1.0), np.eye(4))
    model = LinearModel(np.array([0.5, -2.0]), 0.0)
    desc = RegionList((1, 4), (9, 9))
    out = tmp_path / "w.nii.gz"
    emit_weight_volume(model, desc, atlas, out)
    back = read_nifti(out)
    assert np.all(back.data[labels == 1] == 0.5)
    assert np.all(back.data[labels == 4] == -2.0)
    assert np.all(back.data[labels == 0] == 0.0)


def test_weight_volume_mismatch_rejected(tmp_path, rng):
    mask = make_mask(np.ones((2, 2, 2), dtype=bool))
    model = LinearModel(np.ones(3), 0.0)
    with pytest.raises(DescriptorMismatch):
        emit_weight_volume(model, VoxelIndexMap("g", np.arange(8)), mask,
                           tmp_path / "w.nii.gz")


def test_quartiles_match_sort_oracle(rng):
    for _ in range(50):
        v = rng.standard_normal(int(rng.integers(2, 40)))
        q1, med, q3 = quartiles(v)
        assert q1 == pytest.approx(quantile_sort_oracle(v, 0.25), abs=1e-12)
        assert med == pytest.approx(quantile_sort_oracle(v, 0.50), abs=1e-12)
        assert q3 == pytest.approx(quantile_sort_oracle(v, 0.75), abs=1e-12)
        assert q1 <= med <= q3


def test_boxplot_svg_well_formed(tmp_path, rng):
    dists = {
        "accuracy": rng.random(40),
        "balanced_accuracy": np.concatenate([rng.random(38), [5.0, -3.0]]),
    }
    out = tmp_path / "box.svg"
    emit_boxplot_svg(dists, out)
    root = ET.fromstring(out.read_text(encoding="utf-8"))
    assert root.tag.endswith("svg")
    tags = [el.tag.split("}")[-1] for el in root.iter()]
    assert tags.count("rect") == 2          # one box per metric
    assert tags.count("circle") >= 2        # the planted outliers
    assert tags.count("text") == 2


def test_boxplot_empty_distribution_rejected(tmp_path):
    with pytest.raises(EmptyDistribution):
        emit_boxplot_svg({"a": []}, tmp_path / "box.svg")
