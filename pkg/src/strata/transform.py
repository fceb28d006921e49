"""Forward/inverse multilevel decomposition.

Each level splits the current grid values into (a) detail coefficients at the
nodes dropped by the next-coarser grid — the residual against the multilinear
interpolant from the surviving nodes — and (b) corrected coarse values, where
the correction is the L2 projection of the detail function onto the coarse
multilinear space.  Multi-axis operators are compositions of 1D sweeps
(axis 0, then 1, then 2), applied identically in both directions so that
recomposition is the exact algebraic inverse.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from strata.backend import kernels
from strata.grid import Field, GridHierarchy, build_hierarchy

__all__ = [
    "CoeffPyramid",
    "decompose",
    "decompose_1d_level",
    "recompose",
]

_EVEN = slice(0, None, 2)
_ODD = slice(1, None, 2)


@dataclass(frozen=True)
class CoeffPyramid:
    """Multilevel coefficients laid out congruently with the source grid.

    The entry at a finest-grid node holds that node's detail coefficient at
    the unique level owning it; the level-0 block holds the corrected
    coarsest values.
    """

    coeffs: np.ndarray
    hierarchy: GridHierarchy

    def copy(self) -> "CoeffPyramid":
        return CoeffPyramid(self.coeffs.copy(), self.hierarchy)


def _mass_apply(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Tridiagonal mass-matrix product along ``axis`` (hat-function inner
    products on spacing ``h``: interior row h*[1/6, 2/3, 1/6], boundary rows
    use the half-hat values)."""
    a = np.moveaxis(a, axis, -1)
    out = np.empty_like(a)
    out[..., 1:-1] = h * (a[..., :-2] / 6 + 2 * a[..., 1:-1] / 3 + a[..., 2:] / 6)
    out[..., 0] = h * (a[..., 0] / 3 + a[..., 1] / 6)
    out[..., -1] = h * (a[..., -2] / 6 + a[..., -1] / 3)
    return np.moveaxis(out, -1, axis)


def _restrict(a: np.ndarray, axis: int) -> np.ndarray:
    """Transfer a load to the even-index subset with the [1/2, 1, 1/2] stencil."""
    a = np.moveaxis(a, axis, -1)
    out = a[..., _EVEN].copy()
    out[..., :-1] += 0.5 * a[..., _ODD]
    out[..., 1:] += 0.5 * a[..., _ODD]
    return np.moveaxis(out, -1, axis)


def _mass_solve(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Solve the coarse mass-matrix system along ``axis`` for every line."""
    moved = np.moveaxis(a, axis, -1)
    shape = moved.shape
    n = shape[-1]
    diag = np.full(n, 2.0 * h / 3.0)
    diag[0] = diag[-1] = h / 3.0
    off = np.full(max(n - 1, 0), h / 6.0)
    buf = np.ascontiguousarray(moved).reshape(-1, n)
    kernels.thomas_lines(off, diag, off, buf)
    return np.moveaxis(buf.reshape(shape), -1, axis)


def _apply_interpolant(view: np.ndarray, sign: float) -> None:
    """Add (sign=+1) or subtract (sign=-1) the coarse multilinear interpolant
    at every node with at least one odd index.

    Corner sources are all-even nodes, which are never written here, so the
    subset order is immaterial.
    """
    d = view.ndim
    lo = {}
    hi = {}
    for a in range(d):
        m = view.shape[a]
        lo[a] = slice(0, m - 2, 2)
        hi[a] = slice(2, None, 2)
    for bits in range(1, 2**d):
        odd_axes = [a for a in range(d) if bits >> a & 1]
        target = tuple(_ODD if bits >> a & 1 else _EVEN for a in range(d))
        acc = None
        for corner in itertools.product((0, 1), repeat=len(odd_axes)):
            idx = list(target)
            for a, side in zip(odd_axes, corner):
                idx[a] = hi[a] if side else lo[a]
            block = view[tuple(idx)]
            acc = block.copy() if acc is None else acc + block
        view[target] += (sign / 2 ** len(odd_axes)) * acc


def _detail_load(view: np.ndarray, h: tuple[float, ...]) -> np.ndarray:
    """Coarse-grid load of the detail function (zero at all-even nodes),
    computed by per-axis fine mass products followed by restriction."""
    d = view.ndim
    g = view.copy()
    g[(_EVEN,) * d] = 0.0
    for axis in range(d):
        g = _mass_apply(g, axis, h[axis])
        g = _restrict(g, axis)
    return g


def _decompose_level(view: np.ndarray, h: tuple[float, ...]) -> None:
    d = view.ndim
    _apply_interpolant(view, -1.0)
    g = _detail_load(view, h)
    for axis in range(d):
        g = _mass_solve(g, axis, 2.0 * h[axis])
    view[(_EVEN,) * d] += g


def _recompose_level(view: np.ndarray, h: tuple[float, ...]) -> None:
    d = view.ndim
    g = _detail_load(view, h)
    for axis in range(d):
        g = _mass_solve(g, axis, 2.0 * h[axis])
    view[(_EVEN,) * d] -= g
    _apply_interpolant(view, 1.0)


def decompose_1d_level(u: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Single 1D level step: returns (corrected coarse values, details).

    Details at odd nodes are the residual against midpoint interpolation;
    coarse values are the even nodes plus the solved L2 correction.
    """
    u = np.array(u, dtype=np.float64)
    if u.ndim != 1 or u.shape[0] < 3 or u.shape[0] % 2 == 0:
        raise ValueError(f"need an odd number (>= 3) of nodes, got shape {u.shape}")
    _decompose_level(u, (float(h),))
    return u[_EVEN].copy(), u[_ODD].copy()


def decompose(field: Field, hierarchy: GridHierarchy | None = None) -> CoeffPyramid:
    """Run the full multilevel decomposition of a dyadic field."""
    if hierarchy is None:
        hierarchy = build_hierarchy(field.dims, field.spacing)
    elif hierarchy.dims != field.dims:
        raise ValueError("hierarchy dims do not match field dims")
    work = np.array(field.values, dtype=np.float64)
    for level in range(hierarchy.levels, 0, -1):
        view = hierarchy.level_view(work, level)
        _decompose_level(view, hierarchy.level_spacing(level))
    return CoeffPyramid(work, hierarchy)


def recompose(pyramid: CoeffPyramid) -> Field:
    """Exact inverse of :func:`decompose`."""
    hierarchy = pyramid.hierarchy
    if tuple(pyramid.coeffs.shape) != hierarchy.dims:
        raise ValueError("coefficient shape does not match hierarchy dims")
    work = np.array(pyramid.coeffs, dtype=np.float64)
    for level in range(1, hierarchy.levels + 1):
        view = hierarchy.level_view(work, level)
        _recompose_level(view, hierarchy.level_spacing(level))
    return Field(work, hierarchy.spacing)
