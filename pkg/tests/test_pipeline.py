import json

import numpy as np
import pytest

from adml.errors import InnerFoldDegenerate, PipelineError
from adml.pipeline import run_experiment
from adml.synthetic import SyntheticSpec, generate_synthetic_dataset


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    spec = SyntheticSpec(n_per_class=(10, 10), dims=(6, 6, 6),
                         n_informative_voxels=20, effect_vector_norm=4.0, seed=1)
    return generate_synthetic_dataset(spec, root / "ds")


def _write_manifest(tmp_path, dataset, **overrides):
    doc = {
        "dataset_root": str(dataset),
        "task": {"name": "cn_vs_ad",
                 "group_a": {"label": "CN"},
                 "group_b": {"label": "AD"}},
        "features": {"type": "voxel", "mask_path": str(dataset / "mask.nii.gz")},
        "classifier": {"kind": "svm", "grid": [0.01, 1.0]},
        "validation": {"n_iterations": 4, "inner_k": 3, "master_seed": 7},
        "output_dir": str(tmp_path / "out"),
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(doc.get(key), dict):
            doc[key].update(value)
        else:
            doc[key] = value
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def test_run_experiment_outputs(tmp_path, dataset):
    manifest = _write_manifest(tmp_path, dataset)
    exp_dir = run_experiment(manifest)
    assert exp_dir == tmp_path / "out" / "experiment-cn_vs_ad"
    for name in ("metrics_per_split.tsv", "subject_predictions.tsv",
                 "summary.tsv", "splits.tsv", "manifest_resolved.json",
                 "weights.nii.gz"):
        assert (exp_dir / name).exists(), name
    resolved = json.loads((exp_dir / "manifest_resolved.json").read_text())
    assert resolved["validation"]["n_iterations"] == 4
    assert resolved["classifier"]["grid"] == [{"C": 0.01}, {"C": 1.0}]
    assert "participants.tsv" in resolved["input_hashes"]
    assert any(k.endswith("T1w.nii.gz") for k in resolved["input_hashes"])


def test_gram_cache_created_and_reused(tmp_path, dataset):
    manifest = _write_manifest(tmp_path, dataset)
    run_experiment(manifest)
    cache_dir = tmp_path / "out" / "cache"
    caches = list(cache_dir.glob("gram-*.bin"))
    assert len(caches) == 1
    stamp = caches[0].stat().st_mtime_ns
    exp = run_experiment(manifest)          # rerun hits the cache
    assert caches[0].stat().st_mtime_ns == stamp
    assert (exp / "summary.tsv").exists()


def test_reruns_are_byte_identical(tmp_path, dataset):
    (tmp_path / "r1").mkdir()
    (tmp_path / "r2").mkdir()
    m1 = _write_manifest(tmp_path / "r1", dataset,
                         output_dir=str(tmp_path / "r1" / "out"))
    m2 = _write_manifest(tmp_path / "r2", dataset,
                         output_dir=str(tmp_path / "r2" / "out"))
    e1 = run_experiment(m1)
    e2 = run_experiment(m2)
    for name in ("metrics_per_split.tsv", "subject_predictions.tsv",
                 "summary.tsv", "splits.tsv", "weights.nii.gz"):
        assert (e1 / name).read_bytes() == (e2 / name).read_bytes(), name


def test_failing_stage_is_named_and_cleaned_up(tmp_path, dataset):
    # inner_k larger than the outer-training minority count fails inside
    # nested_cv, after the experiment directory was created
    manifest = _write_manifest(tmp_path, dataset,
                               validation={"n_iterations": 4, "inner_k": 10,
                                           "master_seed": 7})
    with pytest.raises(PipelineError) as err:
        run_experiment(manifest)
    assert err.value.stage == "nested_cv"
    assert isinstance(err.value.cause, InnerFoldDegenerate)
    assert not (tmp_path / "out" / "experiment-cn_vs_ad").exists()


def test_early_failure_has_no_output(tmp_path, dataset):
    manifest = _write_manifest(tmp_path, dataset,
                               dataset_root=str(dataset / "nowhere"))
    with pytest.raises(PipelineError) as err:
        run_experiment(manifest)
    assert err.value.stage == "load_dataset"
    assert not (tmp_path / "out").exists()


def test_balance_classes_path(tmp_path, tmp_path_factory):
    root = tmp_path_factory.mktemp("unbalanced")
    spec = SyntheticSpec(n_per_class=(14, 8), dims=(5, 5, 5),
                         n_informative_voxels=10, effect_vector_norm=4.0, seed=2)
    ds = generate_synthetic_dataset(spec, root / "ds")
    manifest = _write_manifest(tmp_path, ds, balance_classes=True)
    exp = run_experiment(manifest)
    splits = (exp / "splits.tsv").read_text(encoding="utf-8").splitlines()[1:]
    subjects = set()
    for line in splits:
        _, train_ids, test_ids = line.split("\t")
        subjects.update(train_ids.split(","))
        subjects.update(test_ids.split(","))
    assert len(subjects) == 16      # 8 + 8 after downsampling
