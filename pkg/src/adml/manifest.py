"""Experiment manifest: a single JSON document, strictly validated.

Unknown keys anywhere in the document are errors. Relative paths resolve
against the manifest file's directory. `resolve()` materializes every
default so the snapshot written next to the results is self-contained.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .dataset import MODALITIES, GroupSpec, TaskSpec
from .errors import ManifestError
from .nested import CvConfig, default_grid

_TOP_KEYS = {"dataset_root", "task", "modality", "features", "classifier",
             "validation", "balance_classes", "output_dir"}
_TASK_KEYS = {"name", "group_a", "group_b"}
_GROUP_KEYS = {"label", "amyloid"}
_FEATURE_KEYS = {"type", "mask_path", "atlas_path", "fwhm_mm",
                 "suvr_reference_mask_path", "standardize"}
_CLASSIFIER_KEYS = {"kind", "grid"}
_VALIDATION_KEYS = {"strategy", "n_iterations", "test_fraction", "k",
                    "n_repeats", "inner_k", "master_seed", "selection_mode"}
_LABELS = {"CN", "AD", "MCI", "sMCI", "pMCI"}
_AMYLOID = {"positive", "negative", "any"}


@dataclass(frozen=True)
class Manifest:
    dataset_root: Path
    task: TaskSpec
    modality: str
    feature_type: str                   # voxel | regional
    mask_path: Path | None
    atlas_path: Path | None
    fwhm_mm: float
    suvr_reference_mask_path: Path | None
    standardize: bool
    classifier_kind: str
    grid: tuple
    cv: CvConfig
    balance_classes: bool
    output_dir: Path


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ManifestError(f"{where} must be a JSON object")
    unknown = set(obj) - allowed
    if unknown:
        raise ManifestError(f"unknown keys in {where}: {sorted(unknown)}")


def _group(obj, where):
    _check_keys(obj, _GROUP_KEYS, where)
    label = obj.get("label")
    if label not in _LABELS:
        raise ManifestError(f"{where}: bad label {label!r}")
    amyloid = obj.get("amyloid", "any")
    if amyloid not in _AMYLOID:
        raise ManifestError(f"{where}: bad amyloid constraint {amyloid!r}")
    return GroupSpec(label, amyloid)


def _normalize_grid(raw, kind):
    if raw is None:
        return ()
    if not isinstance(raw, list) or not raw:
        raise ManifestError("classifier.grid must be a nonempty list")
    grid = []
    for entry in raw:
        if kind in ("svm", "logreg"):
            if isinstance(entry, (int, float)) and entry > 0:
                grid.append({"C": float(entry)})
            else:
                raise ManifestError(f"bad C grid entry {entry!r}")
        else:
            _check_keys(entry, {"n_trees", "max_features"}, "forest grid entry")
            nt = entry.get("n_trees")
            mf = entry.get("max_features")
            if not isinstance(nt, int) or nt < 1:
                raise ManifestError(f"bad n_trees {nt!r}")
            if not (isinstance(mf, int) and mf >= 1
                    or mf in ("sqrt", "quarter", "half", "all")):
                raise ManifestError(f"bad max_features {mf!r}")
            grid.append({"n_trees": nt, "max_features": mf})
    return tuple(grid)


def load_manifest(path) -> Manifest:
    path = Path(path)
    base = path.parent
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ManifestError(f"cannot parse manifest {path}: {e}") from e
    _check_keys(doc, _TOP_KEYS, "manifest")
    for key in ("dataset_root", "task", "features", "classifier", "output_dir"):
        if key not in doc:
            raise ManifestError(f"manifest missing required key {key!r}")

    task_doc = doc["task"]
    _check_keys(task_doc, _TASK_KEYS, "task")
    try:
        task = TaskSpec(task_doc.get("name", "unnamed"),
                        _group(task_doc["group_a"], "task.group_a"),
                        _group(task_doc["group_b"], "task.group_b"))
    except (KeyError, ValueError) as e:
        raise ManifestError(f"bad task: {e}") from e

    modality = doc.get("modality", "T1w")
    if modality not in MODALITIES:
        raise ManifestError(f"bad modality {modality!r}")

    feat = doc["features"]
    _check_keys(feat, _FEATURE_KEYS, "features")
    ftype = feat.get("type")
    if ftype not in ("voxel", "regional"):
        raise ManifestError(f"features.type must be voxel or regional, got {ftype!r}")
    mask_path = feat.get("mask_path")
    atlas_path = feat.get("atlas_path")
    if (mask_path is None) == (atlas_path is None):
        raise ManifestError("exactly one of mask_path / atlas_path must be set")
    if ftype == "voxel" and mask_path is None:
        raise ManifestError("voxel features require mask_path")
    if ftype == "regional" and atlas_path is None:
        raise ManifestError("regional features require atlas_path")
    fwhm = float(feat.get("fwhm_mm", 0.0))
    if fwhm < 0:
        raise ManifestError("fwhm_mm must be >= 0")
    suvr_ref = feat.get("suvr_reference_mask_path")
    standardize = bool(feat.get("standardize", False))

    clf = doc["classifier"]
    _check_keys(clf, _CLASSIFIER_KEYS, "classifier")
    kind = clf.get("kind")
    if kind not in ("svm", "logreg", "forest"):
        raise ManifestError(f"bad classifier kind {kind!r}")
    grid = _normalize_grid(clf.get("grid"), kind)

    val = doc.get("validation", {})
    _check_keys(val, _VALIDATION_KEYS, "validation")
    try:
        cv = CvConfig(
            strategy=val.get("strategy", "repeated_shuffle"),
            n_iterations=int(val.get("n_iterations", 250)),
            test_fraction=float(val.get("test_fraction", 0.3)),
            k=int(val.get("k", 5)),
            n_repeats=int(val.get("n_repeats", 10)),
            inner_k=int(val.get("inner_k", 10)),
            grid=grid,
            master_seed=int(val.get("master_seed", 0)),
            selection_mode=val.get("selection_mode", "per_fold_average"),
            standardize=standardize,
        )
    except ValueError as e:
        raise ManifestError(f"bad validation block: {e}") from e

    def _resolve(p):
        return None if p is None else (base / p).resolve()

    return Manifest(
        dataset_root=_resolve(doc["dataset_root"]),
        task=task,
        modality=modality,
        feature_type=ftype,
        mask_path=_resolve(mask_path),
        atlas_path=_resolve(atlas_path),
        fwhm_mm=fwhm,
        suvr_reference_mask_path=_resolve(suvr_ref),
        standardize=standardize,
        classifier_kind=kind,
        grid=grid,
        cv=cv,
        balance_classes=bool(doc.get("balance_classes", False)),
        output_dir=_resolve(doc["output_dir"]),
    )


def resolved_document(manifest: Manifest, input_hashes: dict) -> dict:
    """Fully materialized snapshot, including content hashes of every input."""
    return {
        "dataset_root": str(manifest.dataset_root),
        "task": {
            "name": manifest.task.name,
            "group_a": asdict(manifest.task.group_a),
            "group_b": asdict(manifest.task.group_b),
        },
        "modality": manifest.modality,
        "features": {
            "type": manifest.feature_type,
            "mask_path": str(manifest.mask_path) if manifest.mask_path else None,
            "atlas_path": str(manifest.atlas_path) if manifest.atlas_path else None,
            "fwhm_mm": manifest.fwhm_mm,
            "suvr_reference_mask_path": (str(manifest.suvr_reference_mask_path)
                                         if manifest.suvr_reference_mask_path else None),
            "standardize": manifest.standardize,
        },
        "classifier": {
            "kind": manifest.classifier_kind,
            "grid": list(manifest.grid) if manifest.grid else list(
                default_grid(manifest.classifier_kind)),
        },
        "validation": {
            "strategy": manifest.cv.strategy,
            "n_iterations": manifest.cv.n_iterations,
            "test_fraction": manifest.cv.test_fraction,
            "k": manifest.cv.k,
            "n_repeats": manifest.cv.n_repeats,
            "inner_k": manifest.cv.inner_k,
            "master_seed": manifest.cv.master_seed,
            "selection_mode": manifest.cv.selection_mode,
        },
        "balance_classes": manifest.balance_classes,
        "output_dir": str(manifest.output_dir),
        "input_hashes": dict(sorted(input_hashes.items())),
    }
