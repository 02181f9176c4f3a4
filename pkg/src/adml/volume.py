"""Volume value types and the in-scope volume operations.

All volumes live on a registered 3D grid. Data is stored internally as
float64 arrays of shape (nx, ny, nz) indexed [x, y, z]; linear voxel indices
are x-fastest (Fortran order), matching the on-disk NIfTI layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve1d

from .errors import (
    GridMismatch,
    NegativeFwhm,
    OutOfRangeProbability,
    ZeroReferenceMean,
)

AFFINE_ATOL = 1e-4  # grid compatibility tolerance on affines
DEFAULT_TISSUE_THRESHOLD = 0.3


def _check_grid_fields(data, voxel_size_mm, affine):
    if data.ndim != 3:
        raise ValueError(f"expected 3D data, got shape {data.shape}")
    voxel_size_mm = tuple(float(v) for v in voxel_size_mm)
    if len(voxel_size_mm) != 3 or any(v <= 0 for v in voxel_size_mm):
        raise ValueError(f"bad voxel sizes {voxel_size_mm}")
    affine = np.asarray(affine, dtype=np.float64)
    if affine.shape != (4, 4):
        raise ValueError("affine must be 4x4")
    if not np.array_equal(affine[3], [0.0, 0.0, 0.0, 1.0]):
        raise ValueError("affine last row must be (0,0,0,1)")
    return voxel_size_mm, affine


@dataclass
class Volume3D:
    """Scalar volume on a registered grid. Treated as immutable after construction."""

    data: np.ndarray          # float64, shape (nx, ny, nz)
    voxel_size_mm: tuple
    affine: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.voxel_size_mm, self.affine = _check_grid_fields(
            self.data, self.voxel_size_mm, self.affine)
        if not np.all(np.isfinite(self.data)):
            raise ValueError("volume contains non-finite values")

    @property
    def dims(self):
        return self.data.shape


@dataclass
class LabelVolume:
    """Atlas parcellation: nonnegative integer labels, 0 = background."""

    labels: np.ndarray        # integer, shape (nx, ny, nz)
    voxel_size_mm: tuple
    affine: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if not np.issubdtype(self.labels.dtype, np.integer):
            raise ValueError("labels must be integers")
        self.labels = self.labels.astype(np.int32)
        self.voxel_size_mm, self.affine = _check_grid_fields(
            self.labels, self.voxel_size_mm, self.affine)
        if np.any(self.labels < 0):
            raise ValueError("labels must be nonnegative")
        if not np.any(self.labels > 0):
            raise ValueError("atlas has no nonzero label")

    @property
    def dims(self):
        return self.labels.shape


@dataclass
class BinaryMask:
    included: np.ndarray      # bool, shape (nx, ny, nz)
    voxel_size_mm: tuple
    affine: np.ndarray

    def __post_init__(self):
        self.included = np.asarray(self.included).astype(bool)
        self.voxel_size_mm, self.affine = _check_grid_fields(
            self.included, self.voxel_size_mm, self.affine)

    @property
    def dims(self):
        return self.included.shape

    @property
    def n_included(self):
        return int(self.included.sum())


def _grid_of(vol):
    arr = getattr(vol, "data", None)
    if arr is None:
        arr = getattr(vol, "labels", None)
    if arr is None:
        arr = vol.included
    return arr.shape, vol.voxel_size_mm, vol.affine


def grids_compatible(a, b) -> bool:
    """Same dims, same voxel sizes, affines equal within 1e-4 absolute."""
    da, va, aa = _grid_of(a)
    db, vb, ab = _grid_of(b)
    return (da == db and va == vb
            and bool(np.all(np.abs(aa - ab) <= AFFINE_ATOL)))


def require_same_grid(a, b, what="volumes"):
    if not grids_compatible(a, b):
        raise GridMismatch(f"{what} are not on the same grid")


def fwhm_to_sigma(fwhm: float) -> float:
    return fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))


def gaussian_kernel_1d(sigma_vox: float) -> np.ndarray:
    """Discrete Gaussian, truncated at radius ceil(4*sigma), renormalized to sum 1."""
    radius = int(math.ceil(4.0 * sigma_vox))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(offsets ** 2) / (2.0 * sigma_vox ** 2))
    return w / w.sum()


def gaussian_smooth(volume: Volume3D, fwhm_mm: float) -> Volume3D:
    """Separable 3D Gaussian smoothing with zero-padding at the boundary.

    fwhm_mm = 0 returns the input data unchanged (bit-exact). The per-axis
    sigma in voxels accounts for anisotropic voxel sizes. Zero-padding means
    a constant volume is no longer constant within one kernel radius of the
    boundary; callers that need edge constancy must pad their inputs.
    """
    if fwhm_mm < 0:
        raise NegativeFwhm(f"fwhm must be >= 0, got {fwhm_mm}")
    if fwhm_mm == 0:
        return Volume3D(volume.data.copy(), volume.voxel_size_mm, volume.affine)
    sigma_mm = fwhm_to_sigma(fwhm_mm)
    out = volume.data
    for axis in range(3):
        sigma_vox = sigma_mm / volume.voxel_size_mm[axis]
        kernel = gaussian_kernel_1d(sigma_vox)
        out = convolve1d(out, kernel, axis=axis, mode="constant", cval=0.0)
    return Volume3D(out, volume.voxel_size_mm, volume.affine)


def suvr_normalize(volume: Volume3D, reference_mask: BinaryMask) -> Volume3D:
    """Divide every voxel by the mean intensity over the reference region."""
    require_same_grid(volume, reference_mask, "volume and reference mask")
    if reference_mask.n_included == 0:
        raise ZeroReferenceMean("reference mask is empty")
    mean = float(volume.data[reference_mask.included].mean())
    if abs(mean) < 1e-12:
        raise ZeroReferenceMean(f"reference mean {mean} too close to zero")
    return Volume3D(volume.data / mean, volume.voxel_size_mm, volume.affine)


def brain_mask_from_tissues(gm: Volume3D, wm: Volume3D, csf: Volume3D,
                            threshold: float = DEFAULT_TISSUE_THRESHOLD) -> BinaryMask:
    """Include voxels where the summed tissue probabilities exceed the threshold."""
    require_same_grid(gm, wm, "tissue maps")
    require_same_grid(gm, csf, "tissue maps")
    if not (0.0 < threshold < 3.0):
        raise ValueError(f"threshold must lie in (0, 3), got {threshold}")
    for name, vol in (("gm", gm), ("wm", wm), ("csf", csf)):
        lo, hi = float(vol.data.min()), float(vol.data.max())
        if lo < -1e-6 or hi > 1.5:
            raise OutOfRangeProbability(
                f"{name} values outside [0, 1] tolerance: min={lo}, max={hi}")
    total = gm.data + wm.data + csf.data
    return BinaryMask(total > threshold, gm.voxel_size_mm, gm.affine)
