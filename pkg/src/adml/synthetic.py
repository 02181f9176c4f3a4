"""Synthetic BIDS-lite dataset generation for desk-scale experiments.

Each subject gets one baseline T1w volume of standard-normal noise; subjects
of the positive class have a fixed shift added at a set of informative
voxels, with the shift vector's Euclidean norm controlled by the spec. For a
linear read-out the Bayes-optimal balanced accuracy is Phi(norm / 2).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SpecInvalid
from .nifti import write_nifti
from .seeding import STREAM_SYNTH, mix_seed
from .volume import BinaryMask, Volume3D


@dataclass(frozen=True)
class SyntheticSpec:
    n_per_class: tuple            # (n_negative, n_positive)
    dims: tuple                   # (nx, ny, nz)
    n_informative_voxels: int
    effect_vector_norm: float
    seed: int
    voxel_size_mm: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if len(self.n_per_class) != 2 or any(n < 1 for n in self.n_per_class):
            raise SpecInvalid(f"bad n_per_class {self.n_per_class}")
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise SpecInvalid(f"bad dims {self.dims}")
        total = int(np.prod(self.dims))
        if not 0 <= self.n_informative_voxels <= total:
            raise SpecInvalid(
                f"n_informative_voxels {self.n_informative_voxels} exceeds {total}")
        if self.effect_vector_norm < 0:
            raise SpecInvalid("effect_vector_norm must be >= 0")


def synthetic_arrays(spec: SyntheticSpec):
    """Returns (volumes 4D array [subject, x, y, z], labels in {-1,+1},
    informative linear indices). Deterministic in spec.seed."""
    rng = np.random.default_rng(mix_seed(spec.seed, STREAM_SYNTH))
    total = int(np.prod(spec.dims))
    informative = np.sort(rng.choice(total, size=spec.n_informative_voxels,
                                     replace=False)) if spec.n_informative_voxels else np.array([], dtype=np.int64)
    delta = (spec.effect_vector_norm / np.sqrt(spec.n_informative_voxels)
             if spec.n_informative_voxels else 0.0)
    n_neg, n_pos = spec.n_per_class
    labels = np.array([-1] * n_neg + [1] * n_pos, dtype=np.int64)
    vols = np.empty((n_neg + n_pos,) + tuple(spec.dims))
    shift = np.zeros(total)
    shift[informative] = delta
    shift3d = shift.reshape(spec.dims, order="F")
    for s in range(labels.size):
        noise = rng.standard_normal(spec.dims)
        vols[s] = noise + (shift3d if labels[s] == 1 else 0.0)
    return vols, labels, informative.astype(np.int64)


def generate_synthetic_dataset(spec: SyntheticSpec, out_root) -> Path:
    """Write the BIDS-lite tree plus an all-true analysis mask at the root."""
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    vols, labels, _ = synthetic_arrays(spec)
    affine = np.diag(list(spec.voxel_size_mm) + [1.0])

    lines = ["participant_id\tsex\tage_baseline\tdiagnosis_baseline"
             "\tamyloid_tracer\tamyloid_suvr\n"]
    for s, label in enumerate(labels):
        pid = f"sub-{s + 1:04d}"
        dx = "AD" if label == 1 else "CN"
        lines.append(f"{pid}\tunknown\t70.0\t{dx}\tn/a\tn/a\n")
        subdir = out_root / pid
        anat = subdir / "ses-M00" / "anat"
        anat.mkdir(parents=True, exist_ok=True)
        (subdir / f"{pid}_sessions.tsv").write_text(
            "session_id\tmonths_from_baseline\tdiagnosis\tmmse\tcdr_global\n"
            f"ses-M00\t0\t{dx}\tn/a\tn/a\n", encoding="utf-8")
        write_nifti(Volume3D(vols[s], spec.voxel_size_mm, affine),
                    anat / f"{pid}_ses-M00_T1w.nii.gz")
    (out_root / "participants.tsv").write_text("".join(lines), encoding="utf-8")

    mask = BinaryMask(np.ones(spec.dims, dtype=bool), spec.voxel_size_mm, affine)
    write_nifti(Volume3D(mask.included.astype(np.float64), spec.voxel_size_mm,
                         affine), out_root / "mask.nii.gz")
    return out_root
