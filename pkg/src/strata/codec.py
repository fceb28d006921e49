"""Public compress/decompress pipeline over temporal stacks.

Consecutive timesteps are stacked as a trailing unit-spacing axis before
decomposition, so temporal redundancy is captured by the same multilevel
transform that handles space; region detection then runs in the joint
spatiotemporal domain.  With a single slice the pipeline degenerates to pure
spatial compression.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from strata import blob as blobmod
from strata.detect import DEFAULT_REFINEMENT, RefinementConfig, coefficient_heatmap, detect_rois
from strata.grid import MAX_DIMS, Field, build_hierarchy, crop_to_original, pad_to_dyadic
from strata.quantize import dequantize, quantize
from strata.regions import NORM_MAX, NORM_RMS, BoundMap, RegionMask, dilate_buffer
from strata.response import default_calibration
from strata.transform import decompose, recompose

__all__ = [
    "CodecConfig",
    "CompressStats",
    "TemporalStack",
    "compress",
    "decompress",
]


@dataclass(frozen=True)
class TemporalStack:
    """T >= 1 equal-shape field slices stacked along a trailing time axis."""

    values: np.ndarray
    spacing: tuple[float, ...]

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, order="C")
        if values.ndim < 2:
            raise ValueError("stack needs at least one spatial axis plus time")
        spacing = tuple(float(h) for h in self.spacing)
        if len(spacing) != values.ndim - 1:
            raise ValueError("spacing covers the spatial axes only")
        if any(h <= 0 for h in spacing):
            raise ValueError("spacings must be positive")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "spacing", spacing)

    @property
    def n_steps(self) -> int:
        return self.values.shape[-1]

    @property
    def spatial_dims(self) -> tuple[int, ...]:
        return self.values.shape[:-1]

    @classmethod
    def from_slices(cls, slices) -> "TemporalStack":
        fields = list(slices)
        if not fields:
            raise ValueError("need at least one slice")
        first = fields[0]
        for f in fields[1:]:
            if f.dims != first.dims or f.spacing != first.spacing:
                raise ValueError("slices must share dims and spacing")
        return cls(np.stack([f.values for f in fields], axis=-1), first.spacing)

    def slice_field(self, t: int) -> Field:
        return Field(self.values[..., t], self.spacing)

    def joint_field(self) -> Field:
        """The stack as one field; the time axis is dropped when T == 1."""
        if self.n_steps == 1:
            return Field(self.values[..., 0], self.spacing)
        if self.values.ndim > MAX_DIMS:
            raise ValueError(
                f"joint space would have {self.values.ndim} axes; at most {MAX_DIMS} supported"
            )
        return Field(self.values, self.spacing + (1.0,))


@dataclass(frozen=True)
class CodecConfig:
    """Compression parameters: bounds, buffer width, detection layers.

    ``tau1`` is a request; the encoder caps it by the buffer-zone decay law.
    A precomputed ``mask`` (region labels on the unpadded or padded grid)
    skips detection, e.g. to reuse regions found on a companion variable.
    """

    tau0: float
    tau1: float = float("inf")
    r_bz: int = 2
    norm: str = NORM_MAX
    refinement: RefinementConfig = DEFAULT_REFINEMENT
    mask: RegionMask | None = None
    dtype_code: int = 0

    def __post_init__(self):
        if self.tau0 <= 0:
            raise ValueError("tau0 must be positive")
        if self.tau1 < self.tau0:
            raise ValueError(f"requested tau1 {self.tau1} is tighter than tau0 {self.tau0}")
        if self.norm not in (NORM_MAX, NORM_RMS):
            raise ValueError(f"unknown norm mode {self.norm!r}")


@dataclass
class CompressStats:
    """Timing and outcome bookkeeping for one compress call."""

    total_seconds: float = 0.0
    detect_seconds: float = 0.0
    achieved_cr: float = 0.0
    protected_fraction: float = 0.0
    rms_measured: tuple[float, float] | None = None

    @property
    def detect_overhead_frac(self) -> float:
        return self.detect_seconds / self.total_seconds if self.total_seconds else 0.0


def _pad_mask(mask: RegionMask, target_dims) -> RegionMask:
    if mask.dims == tuple(target_dims):
        return mask
    pad = [(0, t - n) for t, n in zip(target_dims, mask.dims)]
    if any(p < 0 for _, p in pad):
        raise ValueError(f"mask dims {mask.dims} exceed padded dims {tuple(target_dims)}")
    return RegionMask(np.pad(mask.labels, pad, mode="edge"))


def compress(stack: TemporalStack, config: CodecConfig) -> blobmod.CompressedBlob:
    """Run the full pipeline: pad, decompose, detect, dilate, quantize, encode."""
    t_start = time.perf_counter()
    joint = stack.joint_field()
    time_axis = stack.n_steps > 1
    calibration = default_calibration(joint.ndim)

    padded = pad_to_dyadic(joint)
    hierarchy = build_hierarchy(padded.dims, padded.spacing)
    pyramid = decompose(padded, hierarchy)

    t_detect = time.perf_counter()
    if config.mask is not None:
        mask = _pad_mask(config.mask, padded.dims)
        mask = dilate_buffer(mask, config.r_bz, hierarchy)
    else:
        heat = coefficient_heatmap(pyramid)
        mask = detect_rois(heat, config.refinement)
        mask = dilate_buffer(mask, config.r_bz, hierarchy)
    detect_seconds = time.perf_counter() - t_detect

    bounds = BoundMap.create(
        config.tau0, config.tau1, config.r_bz, calibration.c_decay, config.norm
    )
    qpyr = quantize(pyramid, mask, bounds, calibration)
    blob = blobmod.encode(
        qpyr,
        mask,
        bounds,
        calibration,
        orig_dims=joint.orig_dims,
        time_axis=time_axis,
        dtype_code=config.dtype_code,
    )

    wire = blob.to_bytes()
    stats = CompressStats(
        total_seconds=time.perf_counter() - t_start,
        detect_seconds=detect_seconds,
        protected_fraction=float(mask.protected().mean()),
    )
    stats.achieved_cr = blob.source_nbytes() / len(wire)
    if config.norm == NORM_RMS:
        stats.rms_measured = _measure_rms(stack, blob, mask)
    blob = replace(blob, stats=stats)
    return blob


def _measure_rms(stack: TemporalStack, blob: blobmod.CompressedBlob, mask: RegionMask):
    """Post-hoc per-class rms of the reconstruction error (best-effort mode)."""
    rebuilt = decompress(blob)
    err = rebuilt.values - stack.values
    if stack.n_steps == 1:
        err = err[..., 0]
    trimmed = mask.labels[tuple(slice(0, n) for n in err.shape)]
    prot = trimmed != 0

    def rms(sel):
        return float(np.sqrt(np.mean(err[sel] ** 2))) if sel.any() else 0.0

    return (rms(prot), rms(~prot))


def decompress(blob: blobmod.CompressedBlob | bytes) -> TemporalStack:
    """Decode, dequantize, recompose, crop, unstack."""
    if isinstance(blob, (bytes, bytearray, memoryview)):
        blob = blobmod.CompressedBlob.from_bytes(bytes(blob))
    qpyr, _mask = blobmod.decode(blob)
    rebuilt = recompose(dequantize(qpyr))
    rebuilt = crop_to_original(Field(rebuilt.values, blob.spacing, blob.orig_dims))
    values = rebuilt.values
    if not blob.time_axis:
        values = values[..., np.newaxis]
        spacing = blob.spacing
    else:
        spacing = blob.spacing[:-1]
    return TemporalStack(values, spacing)
