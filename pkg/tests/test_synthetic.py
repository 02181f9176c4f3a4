import numpy as np
import pytest
from scipy.stats import norm

from adml.dataset import GroupSpec, TaskSpec, load_dataset, select_cohort
from adml.errors import SpecInvalid
from adml.synthetic import SyntheticSpec, generate_synthetic_dataset, synthetic_arrays


def _spec(**overrides):
    base = dict(n_per_class=(30, 30), dims=(6, 6, 6), n_informative_voxels=10,
                effect_vector_norm=2.0, seed=7)
    base.update(overrides)
    return SyntheticSpec(**base)


def test_arrays_shapes_and_labels():
    vols, labels, informative = synthetic_arrays(_spec())
    assert vols.shape == (60, 6, 6, 6)
    assert np.sum(labels == -1) == 30 and np.sum(labels == 1) == 30
    assert informative.size == 10
    assert np.all(np.diff(informative) > 0)
    assert np.all(informative < 216)


def test_effect_magnitude_and_placement():
    spec = _spec(n_per_class=(4000, 4000), dims=(4, 4, 2),
                 n_informative_voxels=8, effect_vector_norm=2.0, seed=3)
    vols, labels, informative = synthetic_arrays(spec)
    flat = vols.reshape(vols.shape[0], -1, order="F")   # x-fastest linear indexing
    diff = flat[labels == 1].mean(axis=0) - flat[labels == -1].mean(axis=0)
    delta = 2.0 / np.sqrt(8)
    np.testing.assert_allclose(diff[informative], delta, atol=0.06)
    others = np.setdiff1d(np.arange(flat.shape[1]), informative)
    np.testing.assert_allclose(diff[others], 0.0, atol=0.06)
    # total effect-vector norm
    assert np.linalg.norm(np.where(np.isin(np.arange(32), informative),
                                   delta, 0.0)) == pytest.approx(2.0)


def test_bayes_balanced_accuracy_matches_lda_oracle():
    # Phi(norm/2): project large samples onto the true shift direction and
    # classify at the midpoint, the Bayes rule for equal covariances
    spec = _spec(n_per_class=(20000, 20000), dims=(4, 4, 4),
                 n_informative_voxels=16, effect_vector_norm=2.0, seed=11)
    vols, labels, informative = synthetic_arrays(spec)
    flat = vols.reshape(vols.shape[0], -1, order="F")
    w = np.zeros(64)
    w[informative] = 1.0 / np.sqrt(16)        # unit vector along the shift
    proj = flat @ w                           # N(0,1) vs N(norm, 1)
    pred = np.where(proj > 0.5 * 2.0, 1, -1)  # midpoint threshold

    sens = np.mean(pred[labels == 1] == 1)
    spec_ = np.mean(pred[labels == -1] == -1)
    ba = 0.5 * (sens + spec_)
    assert ba == pytest.approx(norm.cdf(1.0), abs=0.01)
    assert norm.cdf(1.0) == pytest.approx(0.8413, abs=5e-5)


def test_generation_is_byte_deterministic(tmp_path):
    spec = _spec(n_per_class=(3, 3), dims=(4, 4, 4))
    a = generate_synthetic_dataset(spec, tmp_path / "a")
    b = generate_synthetic_dataset(spec, tmp_path / "b")
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (a / rel).read_bytes() == (b / rel).read_bytes()


def test_generated_tree_loads_and_selects(tmp_path):
    spec = _spec(n_per_class=(4, 5), dims=(4, 4, 4))
    root = generate_synthetic_dataset(spec, tmp_path / "ds")
    index = load_dataset(root)
    assert len(index.participants) == 9
    cohort = select_cohort(index, TaskSpec("t", GroupSpec("CN"), GroupSpec("AD")))
    assert cohort.count(-1) == 4 and cohort.count(+1) == 5
    assert (root / "mask.nii.gz").exists()


def test_spec_validation():
    with pytest.raises(SpecInvalid):
        _spec(n_per_class=(0, 5))
    with pytest.raises(SpecInvalid):
        _spec(dims=(4, 4))
    with pytest.raises(SpecInvalid):
        _spec(n_informative_voxels=1000)
    with pytest.raises(SpecInvalid):
        _spec(effect_vector_norm=-1.0)
