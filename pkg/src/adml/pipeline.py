"""Experiment orchestration: manifest -> output directory tree.

Pipeline: load dataset -> select cohort (-> balance) -> smoothing (-> SUVR
for PET with a reference mask) -> feature extraction -> (Gram for SVM,
cached by content hash) -> nested CV -> reports and weight volume. The
resolved-manifest snapshot is written before the cross-validation runs; on
any failure the partially written experiment directory is removed and the
error resurfaces with the failing stage named.
"""

from __future__ import annotations

import hashlib
import json
import shutil
from pathlib import Path

import numpy as np

from . import nifti
from .dataset import load_dataset, select_cohort
from .errors import AdmlError, GridMismatch, PipelineError
from .features import (
    compute_gram,
    content_hash,
    extract_regional_features,
    extract_voxel_features,
    load_gram_cache,
    save_gram_cache,
)
from .manifest import Manifest, load_manifest, resolved_document
from .nested import balance_classes, nested_cv
from .report import emit_reports, emit_weight_volume
from .volume import BinaryMask, LabelVolume, Volume3D, gaussian_smooth, suvr_normalize


def _file_hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class _Stage:
    """Context manager that tags failures with the pipeline stage name."""

    def __init__(self, name, cleanup_dir=None):
        self.name = name
        self.cleanup_dir = cleanup_dir

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, PipelineError):
            if self.cleanup_dir is not None and self.cleanup_dir.exists():
                shutil.rmtree(self.cleanup_dir, ignore_errors=True)
            raise PipelineError(self.name, exc) from exc
        if exc is not None and self.cleanup_dir is not None and self.cleanup_dir.exists():
            shutil.rmtree(self.cleanup_dir, ignore_errors=True)
        return False


def _read_mask(path) -> BinaryMask:
    return nifti.read_mask_nifti(path)


def _read_atlas(path) -> LabelVolume:
    vol = nifti.read_nifti(path)
    if isinstance(vol, Volume3D):
        vol = LabelVolume(np.rint(vol.data).astype(np.int32),
                          vol.voxel_size_mm, vol.affine)
    return vol


def run_experiment(manifest_path) -> Path:
    with _Stage("manifest"):
        manifest = load_manifest(manifest_path)

    exp_dir = manifest.output_dir / f"experiment-{manifest.task.name}"

    with _Stage("load_dataset"):
        index = load_dataset(manifest.dataset_root)

    with _Stage("select_cohort"):
        cohort = select_cohort(index, manifest.task,
                               required_modalities=(manifest.modality,))
        subject_ids = list(cohort.participant_ids)
        labels = np.array(cohort.labels, dtype=np.int64)

    if manifest.balance_classes:
        with _Stage("balance_classes"):
            keep = balance_classes(labels, manifest.cv.master_seed)
            subject_ids = [subject_ids[i] for i in keep]
            labels = labels[keep]

    input_hashes = {"participants.tsv": _file_hash(manifest.dataset_root / "participants.tsv")}

    with _Stage("volumes"):
        suvr_mask = None
        if manifest.suvr_reference_mask_path is not None:
            suvr_mask = _read_mask(manifest.suvr_reference_mask_path)
            input_hashes["suvr_reference_mask"] = _file_hash(
                manifest.suvr_reference_mask_path)
        volumes = []
        for pid in subject_ids:
            stsv = manifest.dataset_root / pid / f"{pid}_sessions.tsv"
            input_hashes[f"{pid}/sessions.tsv"] = _file_hash(stsv)
            path = index.baseline_session(pid).image_paths[manifest.modality]
            input_hashes[f"{pid}/{path.name}"] = _file_hash(path)
            vol = nifti.read_nifti(path)
            if isinstance(vol, LabelVolume):
                raise GridMismatch(f"{path} holds labels, expected a scalar volume")
            vol = gaussian_smooth(vol, manifest.fwhm_mm)
            if manifest.modality == "FDG-PET" and suvr_mask is not None:
                vol = suvr_normalize(vol, suvr_mask)
            volumes.append(vol)

    with _Stage("features"):
        if manifest.feature_type == "voxel":
            mask = _read_mask(manifest.mask_path)
            input_hashes["mask"] = _file_hash(manifest.mask_path)
            feats = extract_voxel_features(volumes, mask, subject_ids=subject_ids)
            reference_grid = mask
        else:
            atlas = _read_atlas(manifest.atlas_path)
            input_hashes["atlas"] = _file_hash(manifest.atlas_path)
            feats = extract_regional_features(volumes, atlas,
                                              subject_ids=subject_ids)
            reference_grid = atlas

    gram = None
    if manifest.classifier_kind == "svm" and not manifest.standardize:
        with _Stage("gram"):
            cache_dir = manifest.output_dir / "cache"
            cache_dir.mkdir(parents=True, exist_ok=True)
            ghash = content_hash(feats.values, ",".join(subject_ids))
            cache_file = cache_dir / f"gram-{ghash[:16]}.bin"
            cached = load_gram_cache(cache_file, expect_hash=ghash)
            if cached is not None:
                gram = cached[0]
            else:
                gram = compute_gram(feats).values
                save_gram_cache(cache_file, gram, ghash)

    exp_dir.mkdir(parents=True, exist_ok=True)
    with _Stage("resolved_manifest", cleanup_dir=exp_dir):
        doc = resolved_document(manifest, input_hashes)
        (exp_dir / "manifest_resolved.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    with _Stage("nested_cv", cleanup_dir=exp_dir):
        result = nested_cv(feats, labels, manifest.classifier_kind, manifest.cv,
                           gram=gram, subject_ids=subject_ids)

    with _Stage("reports", cleanup_dir=exp_dir):
        emit_reports(result, exp_dir)
        if result.averaged_model is not None:
            emit_weight_volume(result.averaged_model, feats.descriptor,
                               reference_grid, exp_dir / "weights.nii.gz")
        if result.warnings:
            (exp_dir / "warnings.txt").write_text(
                "\n".join(result.warnings) + "\n", encoding="utf-8")
    return exp_dir
