"""Minimal NIfTI-1 single-file reader/writer.

Supports the subset this harness needs: little-endian `.nii` / `.nii.gz`,
3D images, datatypes uint8 / int16 / int32 / float32 / float64 on read,
float32 (scalar) or int32 (labels) on write, sform affine. scl_slope and
scl_inter are applied on read. Gzipped output is written with mtime=0 so
identical volumes produce identical bytes.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .errors import BadMagic, IoFailure, NotThreeDimensional, UnsupportedDatatype
from .volume import LabelVolume, Volume3D

HEADER_SIZE = 348
VOX_OFFSET = 352

_DTYPES = {
    2: np.dtype("<u1"),
    4: np.dtype("<i2"),
    8: np.dtype("<i4"),
    16: np.dtype("<f4"),
    64: np.dtype("<f8"),
}
_INT_CODES = {2, 4, 8}


def _open_read(path):
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def read_header(path) -> dict:
    """Parse and validate the 348-byte header; returns a field dict."""
    try:
        raw = _open_read(path)
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    if len(raw) < HEADER_SIZE:
        raise BadMagic(f"{path}: file shorter than a NIfTI-1 header")
    magic = raw[344:348]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise BadMagic(f"{path}: magic {magic!r} is not a NIfTI-1 magic")
    sizeof_hdr = struct.unpack("<i", raw[:4])[0]
    if sizeof_hdr != HEADER_SIZE:
        raise BadMagic(f"{path}: not little-endian NIfTI-1 (sizeof_hdr={sizeof_hdr})")
    dim = struct.unpack("<8h", raw[40:56])
    datatype, bitpix = struct.unpack("<2h", raw[70:74])
    pixdim = struct.unpack("<8f", raw[76:108])
    vox_offset, scl_slope, scl_inter = struct.unpack("<3f", raw[108:120])
    sform_code = struct.unpack("<h", raw[254:256])[0]
    srow = np.frombuffer(raw[280:328], dtype="<f4").reshape(3, 4)
    ndim = dim[0]
    if ndim < 3 or any(d > 1 for d in dim[4:4 + max(0, ndim - 3)]):
        raise NotThreeDimensional(f"{path}: dim={dim}")
    shape = tuple(int(d) for d in dim[1:4])
    if any(d < 1 for d in shape):
        raise NotThreeDimensional(f"{path}: bad dims {shape}")
    if datatype not in _DTYPES:
        raise UnsupportedDatatype(f"{path}: datatype code {datatype}")
    affine = np.eye(4)
    if sform_code >= 1:
        affine[:3, :] = srow.astype(np.float64)
    else:
        affine[0, 0], affine[1, 1], affine[2, 2] = pixdim[1], pixdim[2], pixdim[3]
    return {
        "shape": shape,
        "datatype": datatype,
        "bitpix": bitpix,
        "voxel_size_mm": tuple(float(abs(p)) for p in pixdim[1:4]),
        "vox_offset": int(vox_offset) if vox_offset else VOX_OFFSET,
        "scl_slope": float(scl_slope),
        "scl_inter": float(scl_inter),
        "affine": affine,
        "raw": raw,
    }


def read_nifti(path):
    """Read a volume; returns LabelVolume for integer data, Volume3D otherwise."""
    hdr = read_header(path)
    raw = hdr["raw"]
    shape = hdr["shape"]
    dtype = _DTYPES[hdr["datatype"]]
    n = int(np.prod(shape))
    start = hdr["vox_offset"]
    end = start + n * dtype.itemsize
    if len(raw) < end:
        raise IoFailure(f"{path}: truncated data section")
    flat = np.frombuffer(raw[start:end], dtype=dtype)
    data = flat.reshape(shape, order="F").astype(np.float64)
    slope, inter = hdr["scl_slope"], hdr["scl_inter"]
    scaled = slope not in (0.0, 1.0) or inter != 0.0
    if scaled:
        data = data * (slope if slope != 0.0 else 1.0) + inter
    if hdr["datatype"] in _INT_CODES and not scaled:
        return LabelVolume(data.astype(np.int32), hdr["voxel_size_mm"], hdr["affine"])
    return Volume3D(data, hdr["voxel_size_mm"], hdr["affine"])


def _build_header(shape, voxel_size_mm, affine, datatype, bitpix) -> bytes:
    hdr = bytearray(HEADER_SIZE)
    struct.pack_into("<i", hdr, 0, HEADER_SIZE)
    struct.pack_into("<8h", hdr, 40, 3, shape[0], shape[1], shape[2], 1, 1, 1, 1)
    struct.pack_into("<2h", hdr, 70, datatype, bitpix)
    struct.pack_into("<8f", hdr, 76, 1.0,
                     voxel_size_mm[0], voxel_size_mm[1], voxel_size_mm[2],
                     1.0, 1.0, 1.0, 1.0)
    struct.pack_into("<3f", hdr, 108, float(VOX_OFFSET), 1.0, 0.0)
    struct.pack_into("<2h", hdr, 252, 0, 1)  # qform_code=0, sform_code=1
    aff = np.asarray(affine, dtype=np.float64)
    struct.pack_into("<12f", hdr, 280, *aff[:3, :].ravel().tolist())
    hdr[344:348] = b"n+1\x00"
    return bytes(hdr)


def write_nifti(volume, path):
    """Write a Volume3D as float32 or a LabelVolume as int32 (little-endian)."""
    path = Path(path)
    if isinstance(volume, LabelVolume):
        arr = volume.labels.astype("<i4")
        datatype, bitpix = 8, 32
    else:
        if not np.all(np.isfinite(volume.data)):
            raise ValueError("refusing to write non-finite values")
        arr = volume.data.astype("<f4")
        datatype, bitpix = 16, 32
    hdr = _build_header(volume.dims, volume.voxel_size_mm, volume.affine,
                        datatype, bitpix)
    payload = hdr + b"\x00" * (VOX_OFFSET - HEADER_SIZE) + arr.ravel(order="F").tobytes()
    try:
        if path.suffix == ".gz":
            buf = gzip.compress(payload, mtime=0)
            path.write_bytes(buf)
        else:
            path.write_bytes(payload)
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def write_mask_nifti(mask, path):
    """Store a BinaryMask as a 0/1 int32 label-style file."""
    arr = mask.included.astype(np.int32)
    vol = Volume3D(arr.astype(np.float64), mask.voxel_size_mm, mask.affine)
    write_nifti(vol, path)


def read_mask_nifti(path):
    from .volume import BinaryMask
    vol = read_nifti(path)
    arr = vol.data if isinstance(vol, Volume3D) else vol.labels
    return BinaryMask(np.asarray(arr) > 0.5, vol.voxel_size_mm, vol.affine)
