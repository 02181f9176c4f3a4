"""Feature extraction and linear-kernel Gram computation.

Rows of a FeatureMatrix follow cohort order; columns follow the descriptor
(masked voxels in x-fastest linear order, or atlas regions by ascending id).
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, EmptyMask, EmptyRegion, GridMismatch, IoFailure
from .nifti import read_nifti
from .volume import BinaryMask, LabelVolume, Volume3D, grids_compatible

GRAM_MAGIC = b"GRAM1"


def content_hash(*chunks) -> str:
    h = hashlib.sha256()
    for c in chunks:
        if isinstance(c, str):
            c = c.encode("utf-8")
        elif isinstance(c, np.ndarray):
            c = np.ascontiguousarray(c).tobytes()
        h.update(c)
    return h.hexdigest()


def mask_hash(mask: BinaryMask) -> str:
    return content_hash(str(mask.dims), str(mask.voxel_size_mm),
                        mask.included.astype(np.uint8))


def atlas_hash(atlas: LabelVolume) -> str:
    return content_hash(str(atlas.dims), str(atlas.voxel_size_mm), atlas.labels)


@dataclass(frozen=True)
class VoxelIndexMap:
    grid_id: str                  # content hash of the mask
    indices: np.ndarray           # strictly increasing x-fastest linear indices

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.size == 0:
            raise EmptyMask("voxel index map is empty")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("voxel indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return int(self.indices.size)

    def __eq__(self, other):
        return (isinstance(other, VoxelIndexMap)
                and self.grid_id == other.grid_id
                and np.array_equal(self.indices, other.indices))


@dataclass(frozen=True)
class RegionList:
    ids: tuple                    # ascending positive region ids
    voxel_counts: tuple
    names: tuple | None = None
    grid_id: str = ""

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("region ids must be unique")
        if any(i <= 0 for i in self.ids):
            raise ValueError("region ids must be positive")

    def __len__(self):
        return len(self.ids)


@dataclass
class FeatureMatrix:
    values: np.ndarray            # (n_subjects, n_features) float64
    subject_ids: tuple
    descriptor: object            # VoxelIndexMap | RegionList

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("feature matrix must be 2D")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature matrix contains non-finite values")
        if len(self.subject_ids) != self.values.shape[0]:
            raise DimensionMismatch("subject_ids length != row count")
        if len(self.descriptor) != self.values.shape[1]:
            raise DimensionMismatch("descriptor length != feature count")

    @property
    def n_subjects(self):
        return self.values.shape[0]

    @property
    def n_features(self):
        return self.values.shape[1]


@dataclass
class GramMatrix:
    values: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.values, dtype=np.float64)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise ValueError("Gram matrix must be square")
        if not np.allclose(k, k.T, atol=1e-10, rtol=0.0):
            raise ValueError("Gram matrix not symmetric within 1e-10")
        k = 0.5 * (k + k.T)
        eigs = np.linalg.eigvalsh(k)
        trace = max(float(np.trace(k)), 1e-300)
        if eigs[0] < -1e-8 * trace:
            raise ValueError(f"Gram matrix not PSD: min eigenvalue {eigs[0]}")
        self.values = k

    @property
    def n(self):
        return self.values.shape[0]


def _as_volume(item) -> Volume3D:
    if isinstance(item, Volume3D):
        return item
    vol = read_nifti(item)
    if isinstance(vol, LabelVolume):
        vol = Volume3D(vol.labels.astype(np.float64), vol.voxel_size_mm, vol.affine)
    return vol


def extract_voxel_features(volumes, mask: BinaryMask, subject_ids=None) -> FeatureMatrix:
    """One row per subject: volume values at masked voxels, x-fastest order.

    `volumes` may hold Volume3D objects or paths to NIfTI files.
    """
    if mask.n_included == 0:
        raise EmptyMask("analysis mask includes no voxels")
    flat_mask = mask.included.ravel(order="F")
    indices = np.flatnonzero(flat_mask)
    rows = []
    for item in volumes:
        vol = _as_volume(item)
        if not grids_compatible(vol, mask):
            raise GridMismatch("volume grid differs from mask grid")
        rows.append(vol.data.ravel(order="F")[indices])
    values = np.vstack(rows) if rows else np.empty((0, indices.size))
    if subject_ids is None:
        subject_ids = tuple(f"row-{i:04d}" for i in range(values.shape[0]))
    return FeatureMatrix(values, tuple(subject_ids),
                         VoxelIndexMap(mask_hash(mask), indices))


def extract_regional_features(volumes, atlas: LabelVolume,
                              subject_ids=None, region_names=None) -> FeatureMatrix:
    """One feature per atlas region: mean signal over that region's voxels."""
    flat_labels = atlas.labels.ravel(order="F")
    region_ids = np.unique(flat_labels)
    region_ids = region_ids[region_ids > 0]
    if region_ids.size == 0:
        raise EmptyRegion("atlas has no nonzero regions")
    groups = [np.flatnonzero(flat_labels == r) for r in region_ids]
    for r, g in zip(region_ids, groups):
        if g.size == 0:
            raise EmptyRegion(f"region {int(r)} has no voxels")
    rows = []
    for item in volumes:
        vol = _as_volume(item)
        if not grids_compatible(vol, atlas):
            raise GridMismatch("volume grid differs from atlas grid")
        flat = vol.data.ravel(order="F")
        rows.append(np.array([flat[g].mean() for g in groups]))
    values = np.vstack(rows) if rows else np.empty((0, region_ids.size))
    if subject_ids is None:
        subject_ids = tuple(f"row-{i:04d}" for i in range(values.shape[0]))
    descriptor = RegionList(tuple(int(r) for r in region_ids),
                            tuple(int(g.size) for g in groups),
                            names=tuple(region_names) if region_names else None,
                            grid_id=atlas_hash(atlas))
    return FeatureMatrix(values, tuple(subject_ids), descriptor)


def compute_gram(features) -> GramMatrix:
    """Linear-kernel Gram matrix K[i, j] = <row_i, row_j>."""
    x = features.values if isinstance(features, FeatureMatrix) else np.asarray(features)
    return GramMatrix(x @ x.T)


def cross_gram(features_train, features_test) -> np.ndarray:
    """Rectangular kernel block B[t, i] = <test_row_t, train_row_i>."""
    xtr = features_train.values if isinstance(features_train, FeatureMatrix) else np.asarray(features_train)
    xte = features_test.values if isinstance(features_test, FeatureMatrix) else np.asarray(features_test)
    if xtr.shape[1] != xte.shape[1]:
        raise DimensionMismatch(
            f"feature counts differ: {xtr.shape[1]} vs {xte.shape[1]}")
    return xte @ xtr.T


# --- Gram cache ---------------------------------------------------------------


def save_gram_cache(path, gram: np.ndarray, input_hash: str):
    """Binary cache: magic, hash length, hash, n, then n*n little-endian float64."""
    k = np.asarray(gram, dtype="<f8")
    n = k.shape[0]
    blob = (GRAM_MAGIC + struct.pack("<I", len(input_hash))
            + input_hash.encode("ascii") + struct.pack("<Q", n)
            + np.ascontiguousarray(k).tobytes())
    try:
        Path(path).write_bytes(blob)
    except OSError as e:
        raise IoFailure(f"cannot write gram cache {path}: {e}") from e


def load_gram_cache(path, expect_hash=None):
    """Returns (gram, input_hash) or None if absent/mismatched."""
    path = Path(path)
    if not path.exists():
        return None
    raw = path.read_bytes()
    if raw[:5] != GRAM_MAGIC:
        return None
    hlen = struct.unpack("<I", raw[5:9])[0]
    stored = raw[9:9 + hlen].decode("ascii")
    if expect_hash is not None and stored != expect_hash:
        return None
    off = 9 + hlen
    n = struct.unpack("<Q", raw[off:off + 8])[0]
    k = np.frombuffer(raw[off + 8:off + 8 + 8 * n * n], dtype="<f8").reshape(n, n)
    return k.copy(), stored
