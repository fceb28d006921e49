"""Region masks, buffer-zone dilation, and the background error-bound cap.

Quantization noise injected outside a region of interest decays by a factor
of (2 + sqrt(3)) per next-coarser grid spacing while propagating inward, so a
shell of protected nodes ``r_bz`` coarse spacings wide suppresses background
leakage by ``c_decay * (2 + sqrt(3))**-r_bz``.  The same law caps how loose
the background bound may be relative to the region bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from strata.backend import kernels
from strata.grid import GridHierarchy
from strata.response import DECAY_BASE

__all__ = [
    "BACKGROUND",
    "BUFFER",
    "ROI",
    "BoundMap",
    "NORM_MAX",
    "NORM_RMS",
    "RegionMask",
    "derive_tau1",
    "dilate_buffer",
]

BACKGROUND, BUFFER, ROI = 0, 1, 2

NORM_MAX = "max"
NORM_RMS = "rms"


@dataclass(frozen=True)
class RegionMask:
    """Per-finest-node labels: 0 background, 1 buffer, 2 region of interest.

    Because every finest node belongs to exactly one level's detail set, the
    label grid fully determines the per-level protected coefficient sets:
    a coefficient is protected iff its node label is nonzero.
    """

    labels: np.ndarray

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if labels.max(initial=0) > ROI:
            raise ValueError("labels must be in {0, 1, 2}")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.labels.shape

    def roi(self) -> np.ndarray:
        return self.labels == ROI

    def protected(self) -> np.ndarray:
        """Nodes compressed at the tight bound (region plus buffer)."""
        return self.labels != BACKGROUND

    def protected_at_level(self, hierarchy: GridHierarchy, level: int) -> np.ndarray:
        """Protected flags restricted to the level's detail-set nodes."""
        return self.protected() & (hierarchy.node_levels() == level)

    @classmethod
    def from_roi(cls, roi: np.ndarray) -> "RegionMask":
        return cls(np.where(roi, ROI, BACKGROUND).astype(np.uint8))

    @classmethod
    def all_roi(cls, dims) -> "RegionMask":
        return cls(np.full(dims, ROI, dtype=np.uint8))

    @classmethod
    def empty(cls, dims) -> "RegionMask":
        return cls(np.zeros(dims, dtype=np.uint8))


def _cheb_distance_to_roi(roi: np.ndarray) -> np.ndarray:
    """Chebyshev index distance from every node to the nearest ROI node."""
    shape3 = (1,) * (3 - roi.ndim) + roi.shape
    dist = np.empty(roi.size, dtype=np.int32)
    kernels.cheb_distance(
        np.ascontiguousarray(roi, dtype=np.uint8).ravel(), dist, *shape3
    )
    return dist.reshape(roi.shape)


def dilate_buffer(mask: RegionMask, r_bz: int, hierarchy: GridHierarchy) -> RegionMask:
    """Label as buffer every node within ``r_bz`` next-coarser spacings of the
    region of interest, evaluated at each node's own level.

    A level-``l`` node is protected when its Chebyshev distance to the ROI is
    at most ``r_bz * 2**(levels - l + 1)`` finest-grid steps (the next-coarser
    spacing of its level); coarser nodes therefore get geometrically wider
    shells.  Level-0 nodes use twice the level-0 stride.  Idempotent for a
    fixed ``r_bz``: buffer labels are derived from ROI labels only.
    """
    if r_bz < 0:
        raise ValueError("buffer width must be nonnegative")
    if mask.dims != hierarchy.dims:
        raise ValueError("mask dims do not match hierarchy dims")
    roi = mask.roi()
    labels = np.where(roi, ROI, BACKGROUND).astype(np.uint8)
    if r_bz == 0 or not roi.any():
        return RegionMask(labels)
    dist = _cheb_distance_to_roi(roi)
    lut = np.minimum(
        r_bz * (1 << (hierarchy.levels - np.arange(hierarchy.levels + 1, dtype=np.int64) + 1)),
        1 << 30,
    ).astype(np.int32)
    radius = lut[hierarchy.node_levels()]
    labels[(dist <= radius) & ~roi] = BUFFER
    return RegionMask(labels)


def derive_tau1(tau0: float, r_bz: int, c_d: float, requested_tau1: float) -> float:
    """Cap the background bound so ROI leakage stays within the region bound.

    Returns ``min(requested_tau1, (2+sqrt(3))**r_bz * tau0 / c_d)``, floored
    at ``tau0`` (the background is never compressed tighter than the region).
    """
    if tau0 <= 0:
        raise ValueError("tau0 must be positive")
    if r_bz < 0:
        raise ValueError("buffer width must be nonnegative")
    if c_d <= 0:
        raise ValueError("decay scale must be positive")
    cap = DECAY_BASE**r_bz * tau0 / c_d
    return max(tau0, min(float(requested_tau1), cap))


@dataclass(frozen=True)
class BoundMap:
    """Absolute error bounds per region class plus the buffer width.

    ``tau0`` applies to region-of-interest and buffer nodes, ``tau1`` to the
    background.  ``norm`` is "max" (strict pointwise bound) or "rms"
    (best-effort target, verified post hoc).
    """

    tau0: float
    tau1: float
    r_bz: int
    norm: str = NORM_MAX

    def __post_init__(self):
        if self.tau0 <= 0 or self.tau1 <= 0:
            raise ValueError("error bounds must be positive")
        if self.tau1 < self.tau0:
            raise ValueError("background bound must not be tighter than the region bound")
        if self.r_bz < 0:
            raise ValueError("buffer width must be nonnegative")
        if self.norm not in (NORM_MAX, NORM_RMS):
            raise ValueError(f"unknown norm mode {self.norm!r}")

    @classmethod
    def create(cls, tau0, requested_tau1, r_bz, c_d, norm=NORM_MAX) -> "BoundMap":
        """Build a bound map with the background cap enforced."""
        tau1 = derive_tau1(tau0, r_bz, c_d, requested_tau1)
        return cls(float(tau0), tau1, int(r_bz), norm)

    def leakage_allowance(self, c_d: float) -> float:
        """Worst-case background-noise contribution at a protected node."""
        return c_d * self.tau1 * DECAY_BASE**-self.r_bz
