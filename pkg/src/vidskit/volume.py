"""Gzip-compressed single-file NIfTI-1 (``.nii.gz``) reader and writer for label masks.

Only what masks and synthetic images need: 3-D grids of uint8 (datatype 2),
with int16 (datatype 4) accepted on read and saturated into 0..255.
Orientation is written as the identity scaled by voxel spacing and ignored
on read.

Voxel arrays are indexed ``data[x, y, z]``. On disk the x index varies
fastest, which is the NIfTI storage order, so files agree with other
NIfTI tools.
"""

from __future__ import annotations

import gzip
import os
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import VidsError

HEADER_SIZE = 348
DATA_OFFSET = 352
MAGIC = b"n+1\x00"
DT_UINT8 = 2
DT_INT16 = 4
_BITPIX = {DT_UINT8: 8, DT_INT16: 16}
_DTYPE = {DT_UINT8: "u1", DT_INT16: "i2"}
_XYZT_MM = 2


class VolumeError(VidsError):
    pass


class NotGzip(VolumeError):
    pass


class BadMagic(VolumeError):
    pass


class UnsupportedDatatype(VolumeError):
    pass


class TruncatedData(VolumeError):
    pass


class IoFailure(VolumeError):
    pass


class DimsMismatch(VidsError, ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LabelVolume:
    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    saturated: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError(f"volume must be 3-D with positive dims, got shape {data.shape}")
        if data.dtype != np.uint8:
            if data.size and (data.min() < 0 or data.max() > 255):
                raise ValueError("voxel values must fit in uint8")
            data = data.astype(np.uint8)
        if len(self.spacing) != 3 or any(not s > 0 for s in self.spacing):
            raise ValueError(f"spacing must be three positive reals, got {self.spacing}")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.data.shape)

    @property
    def voxels(self) -> np.ndarray:
        """Flat voxel payload in on-disk order (x fastest)."""
        return self.data.ravel(order="F")

    @classmethod
    def from_voxels(cls, dims, voxels, spacing=(1.0, 1.0, 1.0)) -> LabelVolume:
        voxels = np.asarray(voxels, dtype=np.uint8)
        if voxels.size != int(np.prod(dims)):
            raise ValueError(f"{voxels.size} voxels do not fill dims {tuple(dims)}")
        return cls(voxels.reshape(tuple(dims), order="F"), spacing)

    def is_binary(self) -> bool:
        return bool(np.all(self.data <= 1))

    def count(self) -> int:
        return int(np.count_nonzero(self.data))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelVolume):
            return NotImplemented
        return (
            self.dims == other.dims
            and np.array_equal(self.data, other.data)
            and np.allclose(self.spacing, other.spacing, rtol=1e-6, atol=0)
        )


@dataclass(frozen=True)
class VolumeHeader:
    dims: tuple[int, int, int]
    datatype: int
    bitpix: int
    spacing: tuple[float, float, float]
    data_offset: int
    little_endian: bool = True


def encode_header(dims, spacing, datatype: int = DT_UINT8) -> bytes:
    """Pack a little-endian NIfTI-1 header plus the 4-byte empty extension block."""
    nx, ny, nz = (int(d) for d in dims)
    sx, sy, sz = (float(s) for s in spacing)
    hdr = bytearray(HEADER_SIZE)
    struct.pack_into("<i", hdr, 0, HEADER_SIZE)
    hdr[38] = ord("r")
    struct.pack_into("<8h", hdr, 40, 3, nx, ny, nz, 1, 1, 1, 1)
    struct.pack_into("<hh", hdr, 70, datatype, _BITPIX[datatype])
    struct.pack_into("<8f", hdr, 76, 1.0, sx, sy, sz, 1.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, float(DATA_OFFSET))
    struct.pack_into("<ff", hdr, 112, 1.0, 0.0)
    hdr[123] = _XYZT_MM
    # qform and sform both say "scanner", identity rotation scaled by spacing
    struct.pack_into("<hh", hdr, 252, 1, 1)
    struct.pack_into("<4f", hdr, 280, sx, 0.0, 0.0, 0.0)
    struct.pack_into("<4f", hdr, 296, 0.0, sy, 0.0, 0.0)
    struct.pack_into("<4f", hdr, 312, 0.0, 0.0, sz, 0.0)
    hdr[344:348] = MAGIC
    return bytes(hdr) + b"\x00" * (DATA_OFFSET - HEADER_SIZE)


def decode_header(raw: bytes) -> VolumeHeader:
    if len(raw) < HEADER_SIZE:
        raise TruncatedData(f"header needs {HEADER_SIZE} bytes, got {len(raw)}")
    if struct.unpack_from("<i", raw, 0)[0] == HEADER_SIZE:
        end = "<"
    elif struct.unpack_from(">i", raw, 0)[0] == HEADER_SIZE:
        end = ">"
    else:
        raise BadMagic("header size field is not 348 in either byte order")
    if raw[344:348] != MAGIC:
        raise BadMagic(f"magic is {raw[344:348]!r}, expected {MAGIC!r}")

    dim = struct.unpack_from(end + "8h", raw, 40)
    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise BadMagic(f"dim[0] = {ndim} is outside 1..7")
    extent = list(dim[1 : ndim + 1]) + [1] * (3 - ndim)
    if any(n > 1 for n in extent[3:]):
        raise UnsupportedDatatype(f"only 3-D volumes are supported, got dims {extent}")
    if any(n < 1 for n in extent):
        raise BadMagic(f"non-positive dimension in {extent}")
    datatype, bitpix = struct.unpack_from(end + "hh", raw, 70)
    if datatype not in _BITPIX:
        raise UnsupportedDatatype(f"datatype code {datatype} (only 2 and 4 are supported)")
    if bitpix != _BITPIX[datatype]:
        raise BadMagic(f"bitpix {bitpix} disagrees with datatype {datatype}")
    pixdim = struct.unpack_from(end + "8f", raw, 76)
    spacing = tuple(abs(p) if p else 1.0 for p in pixdim[1:4])
    offset = int(struct.unpack_from(end + "f", raw, 108)[0])
    if offset < DATA_OFFSET:
        raise BadMagic(f"vox_offset {offset} is below {DATA_OFFSET}")
    return VolumeHeader(tuple(extent[:3]), datatype, bitpix, spacing, offset, end == "<")


def _gunzip(raw: bytes, path) -> bytes:
    if raw[:2] != b"\x1f\x8b":
        raise NotGzip(f"{path}: not a gzip stream")
    try:
        return gzip.decompress(raw)
    except EOFError as exc:
        raise TruncatedData(f"{path}: gzip stream ends early") from exc
    except (gzip.BadGzipFile, zlib.error) as exc:
        raise NotGzip(f"{path}: corrupt gzip stream ({exc})") from exc


def read_volume(path: str | os.PathLike) -> LabelVolume:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    payload = _gunzip(raw, path)
    hdr = decode_header(payload)
    n = hdr.dims[0] * hdr.dims[1] * hdr.dims[2]
    nbytes = n * hdr.bitpix // 8
    body = payload[hdr.data_offset : hdr.data_offset + nbytes]
    if len(body) < nbytes:
        raise TruncatedData(f"{path}: expected {nbytes} data bytes, found {len(body)}")
    dtype = np.dtype(_DTYPE[hdr.datatype]).newbyteorder("<" if hdr.little_endian else ">")
    values = np.frombuffer(body, dtype=dtype, count=n)
    saturated = False
    if hdr.datatype == DT_INT16:
        clipped = np.clip(values, 0, 255)
        saturated = bool(np.any(clipped != values))
        values = clipped
    data = values.astype(np.uint8).reshape(hdr.dims, order="F")
    return LabelVolume(data, hdr.spacing, saturated)


def encode_volume(v: LabelVolume) -> bytes:
    """Gzip bytes of ``v``; mtime is pinned so identical volumes give identical files."""
    payload = encode_header(v.dims, v.spacing) + v.voxels.tobytes()
    return gzip.compress(payload, compresslevel=6, mtime=0)


def write_volume(v: LabelVolume, path: str | os.PathLike) -> None:
    try:
        Path(path).write_bytes(encode_volume(v))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
