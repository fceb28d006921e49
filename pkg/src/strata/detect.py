"""Critical-region detection from multilevel coefficient magnitudes.

Coefficient magnitude at a detail node measures local data variation at that
node's scale, so a finest-grid heatmap of per-level magnitudes is a free
by-product of compression that doubles as a feature indicator.  Detection
runs one or more refinement layers over the heatmap: each layer bins the
active area, tags bins scoring at or above a global percentile, then rescues
bins inside every parent cell the global pass missed entirely.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from strata.backend import kernels
from strata.grid import Field, GridHierarchy
from strata.regions import ROI, RegionMask
from strata.transform import CoeffPyramid

__all__ = [
    "DEFAULT_REFINEMENT",
    "LayerSpec",
    "RefinementConfig",
    "coefficient_heatmap",
    "detect_rois",
]


@dataclass(frozen=True)
class LayerSpec:
    """One refinement layer: bin width in nodes per axis plus the global and
    per-cell local percentile thresholds (nearest-rank rule)."""

    bin_width: int
    global_pct: float
    local_pct: float

    def __post_init__(self):
        if self.bin_width < 1:
            raise ValueError("bin width must be >= 1")
        for p in (self.global_pct, self.local_pct):
            if not 0 < p < 100:
                raise ValueError(f"percentiles must lie in (0, 100), got {p}")


@dataclass(frozen=True)
class RefinementConfig:
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("need at least one refinement layer")
        widths = [s.bin_width for s in layers]
        if any(a < b for a, b in zip(widths, widths[1:])):
            raise ValueError("bin widths must be nonincreasing across layers")
        object.__setattr__(self, "layers", layers)


# Defaults are tunable; coarse-then-fine widths with a falling global bar.
DEFAULT_REFINEMENT = RefinementConfig((LayerSpec(4, 90.0, 50.0), LayerSpec(2, 75.0, 50.0)))


# ---------------------------------------------------------------------------
# Heatmap


@functools.lru_cache(maxsize=64)
def _axis_tables(n: int, stride: int):
    """Per finest index along one axis: nearest multiple of ``stride`` and
    nearest odd multiple (ties toward the lower index), whether the nearest
    multiple is odd, and the extra distance of flipping to the odd one."""
    y = np.arange(n, dtype=np.int64)
    r = y % stride
    down = y - r
    m = np.where(r <= stride - r, down, down + stride)
    e = np.minimum(r, stride - r)
    r2 = y % (2 * stride)
    base = y - r2
    o = base + stride
    f = np.abs(r2 - stride)
    tie = (r2 == 0) & (base >= stride)
    o = np.where(tie, base - stride, o)
    m_odd = ((m // stride) % 2 == 1).astype(np.uint8)
    for arr in (m, o):
        arr.flags.writeable = False
    return m, o, np.ascontiguousarray(f - e), m_odd


def _nearest_detail_flat(dims: tuple, levels: int, level: int) -> np.ndarray:
    """Flat finest index of the nearest level-``level`` detail node for every
    finest node (Chebyshev index distance; ties toward lower indexes; when
    the nearest lattice node is coarse, the cheapest single axis flips to its
    nearest odd multiple)."""
    s = 2 ** (levels - level)
    d = len(dims)
    per_axis = [_axis_tables(n, s) for n in dims]

    def bcast(arr, axis):
        shape = [1] * d
        shape[axis] = len(arr)
        return arr.reshape(shape)

    any_odd = np.zeros(dims, dtype=bool)
    for a, (_, _, _, m_odd) in enumerate(per_axis):
        any_odd |= bcast(m_odd.astype(bool), a)
    best = np.broadcast_to(bcast(per_axis[0][2], 0), dims).copy()
    flip = np.zeros(dims, dtype=np.uint8)
    for a in range(1, d):
        extra = bcast(per_axis[a][2], a)
        closer = extra < best
        flip[closer] = a
        best = np.minimum(best, extra)

    flat = np.zeros(dims, dtype=np.int64)
    stride_flat = np.cumprod((dims + (1,))[::-1])[::-1][1:]
    for a, (m, o, _, _) in enumerate(per_axis):
        coord = np.where(any_odd | (flip != a), bcast(m, a), bcast(o, a))
        flat += coord * stride_flat[a]
    return flat


@functools.lru_cache(maxsize=8)
def _level_maps(dims: tuple, levels: int) -> np.ndarray:
    """Nearest-detail index maps for all levels >= 1, laid out (nodes, levels)."""
    cols = [
        _nearest_detail_flat(dims, levels, level).ravel()
        for level in range(1, levels + 1)
    ]
    out = np.ascontiguousarray(np.stack(cols, axis=1), dtype=np.int32)
    out.flags.writeable = False
    return out


def coefficient_heatmap(pyramid: CoeffPyramid) -> Field:
    """Finest-grid field of the largest nearby detail magnitude across levels.

    For each node and each level >= 1 the magnitude of the nearest detail
    coefficient is taken; the heatmap is the maximum over levels.  Level-0
    values are excluded (they carry the coarse mean, not variation).
    """
    hierarchy = pyramid.hierarchy
    mag = np.abs(np.ascontiguousarray(pyramid.coeffs)).ravel()
    heat = np.empty(hierarchy.dims)
    idx = _level_maps(hierarchy.dims, hierarchy.levels)
    kernels.gather_max(mag, idx, heat.reshape(-1))
    return Field(heat, hierarchy.spacing)


# ---------------------------------------------------------------------------
# Two-step refinement

def _nearest_rank(values: np.ndarray, pct: float) -> float:
    """Nearest-rank percentile of an (unsorted) value array."""
    rank = min(max(math.ceil(pct / 100.0 * len(values)), 1), len(values))
    return float(np.partition(values, rank - 1)[rank - 1])


def _grid_scores(H: np.ndarray, width: int) -> np.ndarray:
    """Per-bin sums over the regular whole-domain partition (partial bins at
    the high boundary).  Axis-by-axis strided accumulation, no padding copy."""
    if width == 1:
        return H.astype(float, copy=True)
    out = H
    for axis in range(H.ndim):
        moved = np.moveaxis(out, axis, -1)
        nb = -(-moved.shape[-1] // width)
        acc = np.zeros(moved.shape[:-1] + (nb,))
        for j in range(width):
            seg = moved[..., j::width]
            acc[..., : seg.shape[-1]] += seg
        out = np.moveaxis(acc, -1, axis)
    return out


def _group_pad(grid: np.ndarray, factors, fill) -> np.ndarray:
    """Reshape a bin grid into (cells..., group...) blocks, padding ragged
    boundary cells with ``fill``; group axes become the trailing axes."""
    d = grid.ndim
    nc = [-(-n // g) for n, g in zip(grid.shape, factors)]
    padded = np.full([c * g for c, g in zip(nc, factors)], fill, dtype=grid.dtype)
    padded[tuple(slice(0, n) for n in grid.shape)] = grid
    shape = []
    for c, g in zip(nc, factors):
        shape.extend([c, g])
    interleaved = padded.reshape(shape)
    order = list(range(0, 2 * d, 2)) + list(range(1, 2 * d, 2))
    return interleaved.transpose(order).reshape(tuple(nc) + (-1,))


def _expand_cells(cell_grid: np.ndarray, factors, out_shape) -> np.ndarray:
    """Inverse layout of `_group_pad` for per-cell scalars: broadcast each
    cell value onto its member bins."""
    out = cell_grid
    for axis, g in enumerate(factors):
        out = np.repeat(out, g, axis=axis)
    return out[tuple(slice(0, n) for n in out_shape)]


def _update_layer(scores: np.ndarray, active: np.ndarray, factors, spec: LayerSpec) -> np.ndarray:
    """Global + local update over a regular bin grid.

    ``active`` flags the bins belonging to the current refinement area;
    parent cells are ``factors``-sized groups of bins.  Returns the tagged
    bin grid.
    """
    flat_active = scores[active]
    if flat_active.size == 0:
        return np.zeros_like(active)
    thr_g = _nearest_rank(flat_active, spec.global_pct)
    tagged = active & (scores >= thr_g) & (scores > 0)

    # Cells with at least one active bin but no globally tagged bin rescue
    # their top local_pct bins.
    cells_tagged = _group_pad(tagged, factors, False).any(axis=-1)
    cells_active = _group_pad(active, factors, False).any(axis=-1)
    rescue = cells_active & ~cells_tagged
    if rescue.any():
        grouped = _group_pad(np.where(active, scores, -np.inf), factors, -np.inf)
        counts = (grouped > -np.inf).sum(axis=-1)
        ranks = np.ceil(spec.local_pct / 100.0 * counts).astype(np.int64)
        ranks = np.clip(ranks, 1, np.maximum(counts, 1))
        ordered = np.sort(grouped, axis=-1)  # -inf pads sort first
        pick = np.clip(ordered.shape[-1] - counts + ranks - 1, 0, ordered.shape[-1] - 1)
        thr_l = np.take_along_axis(ordered, pick[..., None], axis=-1)[..., 0]
        thr_map = _expand_cells(np.where(rescue, thr_l, np.inf), factors, scores.shape)
        tagged |= active & (scores >= thr_map) & (scores > 0)
    return tagged


def detect_rois(heat: Field, config: RefinementConfig = DEFAULT_REFINEMENT) -> RegionMask:
    """Two-step mesh-refinement detection over a coefficient heatmap.

    Per layer: bins scoring at or above the global nearest-rank percentile of
    all active bins are tagged; then every parent cell with no tagged bin
    rescues its bins at or above the cell-local percentile.  Zero-score bins
    are never tagged, so a zero field yields an empty mask.  Tagged bins are
    re-partitioned by the next layer (parent cells for the first layer are
    2-per-axis groups of bins); nodes of the final tagged bins become the
    region of interest.

    When each layer's width divides the previous one's, all sub-bins align to
    a global regular grid and the whole update runs vectorized; otherwise a
    per-box path partitions every tagged bin from its own low corner.
    """
    H = np.abs(heat.values)
    widths = [s.bin_width for s in config.layers]
    if all(a % b == 0 for a, b in zip(widths, widths[1:])):
        return _detect_aligned(H, config)
    return _detect_boxes(H, config)


def _detect_aligned(H: np.ndarray, config: RefinementConfig) -> RegionMask:
    d = H.ndim
    widths = [s.bin_width for s in config.layers]

    # One direct binning at the finest width; coarser layers fold it upward.
    base = _grid_scores(H, widths[-1])
    grids = {widths[-1]: base}
    for w in sorted(set(widths[:-1]), reverse=True):
        g = w // widths[-1]
        grids[w] = _group_pad(base, (g,) * d, 0.0).sum(axis=-1)

    spec = config.layers[0]
    scores = grids[spec.bin_width]
    tagged = _update_layer(scores, np.ones(scores.shape, dtype=bool), (2,) * d, spec)
    prev_width = spec.bin_width

    for spec in config.layers[1:]:
        g = prev_width // spec.bin_width
        scores = grids[spec.bin_width]
        active = _expand_cells(tagged, (g,) * d, scores.shape)
        tagged = _update_layer(scores, active, (g,) * d, spec)
        prev_width = spec.bin_width

    labels = np.where(
        _expand_cells(tagged, (prev_width,) * d, H.shape), ROI, 0
    ).astype(np.uint8)
    return RegionMask(labels)


def _partition_box(box, width: int):
    """Sub-boxes of ``width`` nodes per axis from the box's low corner."""
    axes = [range(lo, hi, width) for lo, hi in box]
    out = []
    for mi in np.ndindex(*[len(a) for a in axes]):
        out.append(
            tuple((axes[a][i], min(axes[a][i] + width, box[a][1])) for a, i in enumerate(mi))
        )
    return out


def _update_cells(cells: dict, spec: LayerSpec) -> list:
    """Per-box variant of the global-then-local update; returns tagged boxes."""
    all_scores = np.array([s for bins in cells.values() for _, s in bins])
    thr_g = _nearest_rank(all_scores, spec.global_pct)
    tagged = []
    for key in sorted(cells):
        bins = cells[key]
        hit = [box for box, s in bins if s >= thr_g and s > 0]
        if not hit:
            thr_l = _nearest_rank(np.array([s for _, s in bins]), spec.local_pct)
            hit = [box for box, s in bins if s >= thr_l and s > 0]
        tagged.extend(hit)
    return tagged


def _detect_boxes(H: np.ndarray, config: RefinementConfig) -> RegionMask:
    spec = config.layers[0]
    grid = _grid_scores(H, spec.bin_width)
    cells: dict[tuple, list] = {}
    for mi in np.ndindex(*grid.shape):
        box = tuple(
            (i * spec.bin_width, min((i + 1) * spec.bin_width, H.shape[a]))
            for a, i in enumerate(mi)
        )
        cells.setdefault(tuple(i // 2 for i in mi), []).append((box, float(grid[mi])))
    tagged = _update_cells(cells, spec)

    for spec in config.layers[1:]:
        cells = {}
        for parent in tagged:
            cells[parent] = [
                (box, float(H[tuple(slice(lo, hi) for lo, hi in box)].sum()))
                for box in _partition_box(parent, spec.bin_width)
            ]
        tagged = _update_cells(cells, spec)

    labels = np.zeros(H.shape, dtype=np.uint8)
    for box in tagged:
        labels[tuple(slice(lo, hi) for lo, hi in box)] = ROI
    return RegionMask(labels)
