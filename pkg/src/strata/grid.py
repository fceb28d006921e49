"""Uniform-grid field containers, dyadic padding, and the nested level hierarchy.

A field lives on ``2**k + 1`` nodes per axis (after padding).  The hierarchy
indexes levels ``0..levels`` where ``levels`` is the finest grid; level
``l - 1`` keeps every second node of level ``l`` along every axis.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Field",
    "GridHierarchy",
    "MAX_DIMS",
    "build_hierarchy",
    "crop_to_original",
    "pad_to_dyadic",
]

MAX_DIMS = 3


def next_dyadic(n: int) -> int:
    """Smallest 2**k + 1 >= n with k >= 1."""
    k = 1
    while 2**k + 1 < n:
        k += 1
    return 2**k + 1


def is_dyadic(n: int) -> bool:
    return n >= 3 and (n - 1) & (n - 2) == 0


@dataclass(frozen=True)
class Field:
    """A d-dimensional (1 <= d <= 3) float64 sample array on a uniform grid.

    ``orig_dims`` records the node counts before dyadic padding so a padded
    field can be cropped back exactly; it defaults to the actual shape.
    Instances are immutable (the value buffer is marked read-only) and safe
    to share across threads.
    """

    values: np.ndarray
    spacing: tuple[float, ...]
    orig_dims: tuple[int, ...] | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, order="C")
        if not 1 <= values.ndim <= MAX_DIMS:
            raise ValueError(f"field must have 1..{MAX_DIMS} axes, got {values.ndim}")
        if any(n < 2 for n in values.shape):
            raise ValueError(f"every axis needs >= 2 nodes, got shape {values.shape}")
        spacing = tuple(float(h) for h in self.spacing)
        if len(spacing) != values.ndim:
            raise ValueError("spacing length must match the number of axes")
        if any(h <= 0 for h in spacing):
            raise ValueError(f"spacings must be positive, got {spacing}")
        orig = self.orig_dims
        orig = values.shape if orig is None else tuple(int(n) for n in orig)
        if len(orig) != values.ndim or any(o < 1 or o > n for o, n in zip(orig, values.shape)):
            raise ValueError(f"orig_dims {orig} incompatible with shape {values.shape}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "orig_dims", orig)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim


def pad_to_dyadic(field: Field) -> Field:
    """Pad every axis to the smallest 2**k + 1 >= n by edge replication.

    Replication (rather than mirroring or zero fill) keeps the padded field
    constant along the new nodes, so padding adds no detail coefficients of
    its own beyond the original boundary values.
    """
    target = tuple(next_dyadic(n) for n in field.dims)
    if target == field.dims:
        return Field(field.values, field.spacing, field.orig_dims)
    pad = [(0, t - n) for t, n in zip(target, field.dims)]
    padded = np.pad(field.values, pad, mode="edge")
    return Field(padded, field.spacing, field.dims)


def crop_to_original(field: Field) -> Field:
    """Return the leading ``orig_dims`` block; exact inverse of pad_to_dyadic."""
    if field.orig_dims == field.dims:
        return field
    block = field.values[tuple(slice(0, n) for n in field.orig_dims)]
    return Field(block, field.spacing)


@dataclass(frozen=True)
class GridHierarchy:
    """Nested dyadic subgrids of a field with per-axis counts 2**k_a + 1.

    The joint level count is ``min_a k_a``: every axis halves at every level,
    so axes with more refinement stop above their own 2-node floor.  Finest
    indices of the level-``l`` nodes are the multiples of ``2**(levels - l)``
    along every axis.
    """

    dims: tuple[int, ...]
    spacing: tuple[float, ...]
    levels: int

    @property
    def ndim(self) -> int:
        return len(self.dims)

    def stride(self, level: int) -> int:
        """Finest-index step between level-``level`` nodes."""
        return 2 ** (self.levels - level)

    def level_shape(self, level: int) -> tuple[int, ...]:
        s = self.stride(level)
        return tuple((n - 1) // s + 1 for n in self.dims)

    def level_spacing(self, level: int) -> tuple[float, ...]:
        s = self.stride(level)
        return tuple(h * s for h in self.spacing)

    def axis_nodes(self, level: int, axis: int) -> np.ndarray:
        """Finest-grid indices of the level nodes along one axis."""
        return np.arange(0, self.dims[axis], self.stride(level))

    def level_view(self, array: np.ndarray, level: int) -> np.ndarray:
        s = self.stride(level)
        return array[(slice(None, None, s),) * array.ndim]

    @functools.lru_cache(maxsize=None)
    def node_levels(self) -> np.ndarray:
        """Map every finest node to the unique level whose detail set owns it.

        A node with finest index ``x`` sits in the difference set of level
        ``levels - v`` where ``v`` is the smallest 2-adic valuation of its
        index components (all-multiples-of-2**levels nodes form level 0).
        """
        val = np.full(self.dims, self.levels, dtype=np.uint8)
        for axis, n in enumerate(self.dims):
            idx = np.arange(n)
            v = np.full(n, self.levels, dtype=np.uint8)
            for b in range(self.levels):
                v[idx % (2 ** (b + 1)) == 2**b] = b
            shape = [1] * self.ndim
            shape[axis] = n
            val = np.minimum(val, v.reshape(shape))
        out = (self.levels - val).astype(np.uint8)
        out.flags.writeable = False
        return out

    def node_level(self, node: tuple[int, ...]) -> int:
        return int(self.node_levels()[tuple(node)])


def build_hierarchy(dims, spacing=None) -> GridHierarchy:
    """Build the level hierarchy for dyadic ``dims`` (each 2**k + 1, k >= 1)."""
    dims = tuple(int(n) for n in dims)
    if spacing is None:
        spacing = (1.0,) * len(dims)
    if not 1 <= len(dims) <= MAX_DIMS:
        raise ValueError(f"1..{MAX_DIMS} axes supported, got {len(dims)}")
    for n in dims:
        if not is_dyadic(n):
            raise ValueError(f"dimension {n} is not of the form 2**k + 1 with k >= 1")
    levels = min(int(n - 1).bit_length() - 1 for n in dims)
    return GridHierarchy(dims, tuple(float(h) for h in spacing), levels)
