"""Self-describing compressed bitstream: header, mask channel, payload.

Layout (all little-endian):

==========  ====  =====================================================
magic       4s    ``STRA``
version     u16   format version (1)
ndim        u8    axes including a trailing time axis when present
norm        u8    0 = strict max-norm bounds, 1 = best-effort rms
time_axis   u8    1 when the last axis stacks timesteps
r_bz        u8    buffer width in next-coarser spacings
backend     u8    lossless byte-compressor id (0 = zlib)
dtype_code  u8    source sample type for ratio accounting (0 f64, 1 f32)
levels      u8    decomposition levels of the padded grid
reserved    u8
dims        u32*  padded node counts
orig_dims   u32*  pre-padding node counts
spacing     f64*  per-axis grid spacing
tau0/tau1   f64   region / background error bounds
c_peak      f64   calibrated peak response factor (sizes the bins)
c_decay     f64   calibrated decay scale factor (buffer-zone math)
mask_len    u64   mask channel byte count
payload_len u64   payload channel byte count
checksum    u32   crc32 of the whole blob with this field zeroed
==========  ====  =====================================================

The mask channel is the run-length-encoded label grid, the payload the
canonical-Huffman coefficient stream; both pass through the lossless
backend.  Decoding rebuilds bin widths and per-level protected sets from the
header and labels alone, so streams are portable and bit-stable.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from strata.encoding import decode_symbols, encode_symbols, rle_decode, rle_encode
from strata.grid import build_hierarchy
from strata.quantize import QuantizedPyramid, region_bin_widths
from strata.regions import NORM_MAX, NORM_RMS, BoundMap, RegionMask
from strata.response import DecayCalibration

__all__ = [
    "ChecksumError",
    "CompressedBlob",
    "FormatError",
    "decode",
    "encode",
]

MAGIC = b"STRA"
VERSION = 1
BACKEND_ZLIB = 0
DTYPE_CODES = {"float64": 0, "float32": 1}
DTYPE_SIZES = {0: 8, 1: 4}

_FIXED = struct.Struct("<4sH8B")


class FormatError(ValueError):
    """Malformed or truncated bitstream."""


class ChecksumError(FormatError):
    """Bitstream checksum mismatch."""


@dataclass(frozen=True)
class CompressedBlob:
    """Parsed blob: header fields plus the two encoded channels."""

    dims: tuple[int, ...]
    orig_dims: tuple[int, ...]
    spacing: tuple[float, ...]
    levels: int
    bounds: BoundMap
    c_peak: float
    c_decay: float
    time_axis: bool
    dtype_code: int
    mask_bytes: bytes
    payload_bytes: bytes
    backend: int = BACKEND_ZLIB
    stats: object | None = field(default=None, compare=False)
    _wire: bytes | None = field(default=None, compare=False, repr=False)

    @property
    def nbytes(self) -> int:
        return len(self.to_bytes())

    def source_nbytes(self) -> int:
        """Byte count of the original (unpadded) samples at the source dtype."""
        return int(np.prod(self.orig_dims)) * DTYPE_SIZES[self.dtype_code]

    def compression_ratio(self) -> float:
        return self.source_nbytes() / self.nbytes

    def header_bytes(self, checksum: int = 0) -> bytes:
        d = len(self.dims)
        norm_code = 0 if self.bounds.norm == NORM_MAX else 1
        head = _FIXED.pack(
            MAGIC,
            VERSION,
            d,
            norm_code,
            1 if self.time_axis else 0,
            self.bounds.r_bz,
            self.backend,
            self.dtype_code,
            self.levels,
            0,
        )
        head += struct.pack(f"<{d}I", *self.dims)
        head += struct.pack(f"<{d}I", *self.orig_dims)
        head += struct.pack(f"<{d}d", *self.spacing)
        head += struct.pack(
            "<5d2QI",
            self.bounds.tau0,
            self.bounds.tau1,
            self.c_peak,
            self.c_decay,
            0.0,  # spare
            len(self.mask_bytes),
            len(self.payload_bytes),
            checksum,
        )
        return head

    def to_bytes(self) -> bytes:
        if self._wire is None:
            body = self.header_bytes(0) + self.mask_bytes + self.payload_bytes
            crc = zlib.crc32(body)
            object.__setattr__(
                self, "_wire", self.header_bytes(crc) + self.mask_bytes + self.payload_bytes
            )
        return self._wire

    @classmethod
    def from_bytes(cls, data: bytes) -> "CompressedBlob":
        if len(data) < _FIXED.size:
            raise FormatError("blob shorter than the fixed header")
        magic, version, d, norm_code, time_axis, r_bz, backend, dtype_code, levels, _ = (
            _FIXED.unpack_from(data, 0)
        )
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        if not 1 <= d <= 3 or norm_code > 1 or dtype_code not in DTYPE_SIZES:
            raise FormatError("corrupt header fields")
        pos = _FIXED.size
        try:
            dims = struct.unpack_from(f"<{d}I", data, pos)
            pos += 4 * d
            orig = struct.unpack_from(f"<{d}I", data, pos)
            pos += 4 * d
            spacing = struct.unpack_from(f"<{d}d", data, pos)
            pos += 8 * d
            tau0, tau1, c_peak, c_decay, _spare, mask_len, payload_len, crc = (
                struct.unpack_from("<5d2QI", data, pos)
            )
            pos += struct.calcsize("<5d2QI")
        except struct.error as exc:
            raise FormatError("truncated header") from exc
        if len(data) != pos + mask_len + payload_len:
            raise FormatError(
                f"length mismatch: {len(data)} != {pos + mask_len + payload_len}"
            )
        blob = cls(
            dims=tuple(dims),
            orig_dims=tuple(orig),
            spacing=tuple(spacing),
            levels=levels,
            bounds=BoundMap(tau0, tau1, r_bz, NORM_MAX if norm_code == 0 else NORM_RMS),
            c_peak=c_peak,
            c_decay=c_decay,
            time_axis=bool(time_axis),
            dtype_code=dtype_code,
            mask_bytes=bytes(data[pos : pos + mask_len]),
            payload_bytes=bytes(data[pos + mask_len :]),
            backend=backend,
        )
        expect = zlib.crc32(blob.header_bytes(0) + blob.mask_bytes + blob.payload_bytes)
        if expect != crc:
            raise ChecksumError(f"checksum mismatch: {crc:#x} != {expect:#x}")
        return blob


def _pack_channel(raw: bytes, backend: int) -> bytes:
    if backend != BACKEND_ZLIB:
        raise FormatError(f"unknown lossless backend {backend}")
    return zlib.compress(raw, 6)


def _unpack_channel(data: bytes, backend: int) -> bytes:
    if backend != BACKEND_ZLIB:
        raise FormatError(f"unknown lossless backend {backend}")
    try:
        return zlib.decompress(data)
    except zlib.error as exc:
        raise FormatError("lossless backend stream corrupt") from exc


def encode(
    qpyr: QuantizedPyramid,
    mask: RegionMask,
    bounds: BoundMap,
    calibration: DecayCalibration,
    *,
    orig_dims=None,
    time_axis: bool = False,
    dtype_code: int = 0,
    backend: int = BACKEND_ZLIB,
) -> CompressedBlob:
    """Serialize a quantized pyramid and its region mask into a blob."""
    hierarchy = qpyr.hierarchy
    if mask.dims != hierarchy.dims:
        raise ValueError("mask dims do not match pyramid dims")
    mask_bytes = _pack_channel(rle_encode(mask.labels), backend)
    payload = _pack_channel(encode_symbols(qpyr.qcoeffs), backend)
    return CompressedBlob(
        dims=hierarchy.dims,
        orig_dims=tuple(orig_dims) if orig_dims is not None else hierarchy.dims,
        spacing=hierarchy.spacing,
        levels=hierarchy.levels,
        bounds=bounds,
        c_peak=calibration.c_peak,
        c_decay=calibration.c_decay,
        time_axis=time_axis,
        dtype_code=dtype_code,
        mask_bytes=mask_bytes,
        payload_bytes=payload,
    )


def decode(blob: CompressedBlob | bytes) -> tuple[QuantizedPyramid, RegionMask]:
    """Rebuild the quantized pyramid and mask from a blob (exact inverse)."""
    if isinstance(blob, (bytes, bytearray, memoryview)):
        blob = CompressedBlob.from_bytes(bytes(blob))
    hierarchy = build_hierarchy(blob.dims, blob.spacing)
    if hierarchy.levels != blob.levels:
        raise FormatError("level count inconsistent with dims")
    n = int(np.prod(blob.dims))
    labels = rle_decode(_unpack_channel(blob.mask_bytes, blob.backend), n)
    mask = RegionMask(labels.reshape(blob.dims))
    symbols = decode_symbols(_unpack_channel(blob.payload_bytes, blob.backend))
    if symbols.size != n:
        raise FormatError(f"payload carries {symbols.size} coefficients, expected {n}")
    cal = DecayCalibration(
        ndim=len(blob.dims),
        c_peak=blob.c_peak,
        c_decay=blob.c_decay,
        decay_ratio=0.0,
        slope=0.0,
    )
    bins = region_bin_widths(blob.bounds, cal, hierarchy.levels)
    node_class = np.where(mask.protected(), 0, 1).astype(np.uint8)
    qpyr = QuantizedPyramid(
        symbols.reshape(blob.dims), bins, node_class, hierarchy
    )
    return qpyr, mask
