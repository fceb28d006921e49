"""Impulse responses of the inverse transform and the decay calibration.

A unit value placed on a single multilevel coefficient recomposes into an
oscillatory footprint whose magnitude falls off geometrically with the node
distance measured in next-coarser grid spacings; the per-spacing attenuation
factor is 1/(2 + sqrt(3)).  Calibration measures footprints and derives two
bounding constants:

``c_peak``
    bounds |footprint| * base**distance over distances 0..5, dominated by the
    self-response at the impulse node.  Sizes the quantizer's error budget.
``c_decay``
    the same bound restricted to distances 1..5 — the dimension-dependent
    scale factor of the propagation law.  Strictly decreasing from 1D to 3D,
    which is what makes region-adaptive bounds more aggressive in higher
    dimensions.  Used for the background-bound cap and buffer-zone math.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from strata.grid import Field, build_hierarchy
from strata.transform import CoeffPyramid, recompose

__all__ = [
    "DECAY_BASE",
    "DecayCalibration",
    "calibrate",
    "default_calibration",
    "impulse_response",
]

DECAY_BASE = 2.0 + math.sqrt(3.0)

# Safety factor on the measured peak ratios; covers node placements not
# sampled during calibration.
SAFETY_FACTOR = 1.25

# Grids used for the per-dimension cached calibration: large enough to fit
# distance-5 rings on at least two levels per dimension.
CANONICAL_DIMS = {
    1: (4097,),
    2: (257, 257),
    3: (65, 65, 65),
}

MAX_RING = 5


def impulse_response(dims, level: int, node, spacing=None) -> Field:
    """Recompose a pyramid that is zero except for a unit value at ``node``.

    ``node`` (finest-grid index tuple) must belong to the detail set of
    ``level``.  The result is the per-node error footprint of a unit
    quantization error on that coefficient.
    """
    hierarchy = build_hierarchy(dims, spacing)
    node = tuple(int(i) for i in node)
    if len(node) != hierarchy.ndim:
        raise ValueError("node arity does not match dims")
    if hierarchy.node_level(node) != level:
        raise ValueError(f"node {node} is not in the level-{level} detail set")
    coeffs = np.zeros(hierarchy.dims)
    coeffs[node] = 1.0
    return recompose(CoeffPyramid(coeffs, hierarchy))


def ring_amplitudes(values: np.ndarray, node, step: int, kmax: int = MAX_RING) -> np.ndarray:
    """Max |values| on Chebyshev rings of radius k*step around ``node``, k=0..kmax."""
    cheb = _cheb_index_distance(values.shape, node)
    out = np.zeros(kmax + 1)
    for k in range(kmax + 1):
        sel = cheb == k * step
        if sel.any():
            out[k] = np.abs(values[sel]).max()
    return out


def _cheb_index_distance(shape, node) -> np.ndarray:
    cheb = np.zeros(shape, dtype=np.int64)
    for axis, n in enumerate(shape):
        d = np.abs(np.arange(n) - node[axis])
        s = [1] * len(shape)
        s[axis] = n
        cheb = np.maximum(cheb, d.reshape(s))
    return cheb


@dataclass(frozen=True)
class DecayCalibration:
    """Measured decay constants for one data dimensionality."""

    ndim: int
    c_peak: float
    c_decay: float
    decay_ratio: float
    slope: float
    rings: dict = field(repr=False, default_factory=dict)


def _sample_nodes(hierarchy, level):
    """Detail nodes probed per level: interior and near-boundary placements,
    all-odd and mixed-parity (mixed nodes have the fattest tails in >= 2D)."""
    s = hierarchy.stride(level)
    d = hierarchy.ndim

    def clamp_odd(j, n):
        top = (n - 1) // s
        j = max(1, min(j, top - 1))
        return j if j % 2 == 1 else j - 1

    interior = tuple(clamp_odd((n - 1) // 2 // s, n) * s for n in hierarchy.dims)
    nodes = [interior, (s,) * d]
    if d > 1:
        for base in (interior, (s,) * d):
            mixed = list(base)
            for a in range(1, d):
                j = base[a] // s
                mixed[a] = (j - 1) * s if j >= 1 else (j + 1) * s
            nodes.append(tuple(mixed))
    # drop duplicates, keep order
    return list(dict.fromkeys(nodes))


def calibrate(dims, levels=None) -> DecayCalibration:
    """Measure impulse footprints on ``dims`` and derive the scale factors.

    ``levels`` defaults to every level whose distance-5 ring fits inside the
    grid from a centered node.  Deterministic: no randomness anywhere.
    """
    hierarchy = build_hierarchy(dims)
    half = min((n - 1) // 2 for n in hierarchy.dims)
    if levels is None:
        levels = [
            l
            for l in range(1, hierarchy.levels + 1)
            if MAX_RING * 2 ** (hierarchy.levels - l + 1) <= half
        ]
    if not levels:
        raise ValueError(f"dims {tuple(dims)} too small to fit a distance-{MAX_RING} ring")

    peak = 0.0
    tail = 0.0
    ring_table = {}
    log_amp = []
    for level in levels:
        step = 2 ** (hierarchy.levels - level + 1)  # next-coarser spacing, finest units
        for pick, node in enumerate(_sample_nodes(hierarchy, level)):
            resp = impulse_response(dims, level, node).values
            cheb = _cheb_index_distance(resp.shape, node)
            band = cheb <= MAX_RING * step
            ratios = np.abs(resp[band]) * DECAY_BASE ** (cheb[band] / step)
            peak = max(peak, float(ratios.max()))
            tail = max(tail, float(ratios[cheb[band] >= step].max()))
            if pick == 0:  # slope fit on the fully interior all-odd node
                amps = ring_amplitudes(resp, node, step)
                ring_table[level] = amps
                log_amp.append(np.log(np.maximum(amps[1:], 1e-300)))

    ks = np.tile(np.arange(1, MAX_RING + 1), len(log_amp))
    slope = np.polyfit(ks, np.concatenate(log_amp), 1)[0]
    return DecayCalibration(
        ndim=hierarchy.ndim,
        c_peak=SAFETY_FACTOR * peak,
        c_decay=SAFETY_FACTOR * tail,
        decay_ratio=float(np.exp(slope)),
        slope=float(slope),
        rings=ring_table,
    )


_CACHE: dict[int, DecayCalibration] = {}


def default_calibration(ndim: int) -> DecayCalibration:
    """Cached calibration on the canonical grid for ``ndim`` in 1..3."""
    if ndim not in CANONICAL_DIMS:
        raise ValueError(f"no canonical calibration grid for {ndim} dims")
    if ndim not in _CACHE:
        _CACHE[ndim] = calibrate(CANONICAL_DIMS[ndim])
    return _CACHE[ndim]
