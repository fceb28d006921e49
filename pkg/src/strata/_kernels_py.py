"""Pure-numpy implementations of the kernel backend.

Must stay numerically bit-identical to the compiled versions in
``_kernels.pyx``: same operation order in the tridiagonal recurrences, same
MSB-first bit layout in the entropy-coder routines.
"""

import numpy as np


def thomas_lines(lower, diag, upper, rhs):
    """Solve one tridiagonal system per row of ``rhs``, in place.

    ``lower``/``upper`` are the n-1 off-diagonals, ``diag`` the n diagonal
    entries; the same matrix applies to every row.  No pivoting: intended for
    the symmetric positive-definite mass matrices used here.
    """
    n = rhs.shape[1]
    if n == 1:
        rhs[:, 0] /= diag[0]
        return
    cp = np.empty(n - 1)
    cp[0] = upper[0] / diag[0]
    for i in range(1, n - 1):
        cp[i] = upper[i] / (diag[i] - lower[i - 1] * cp[i - 1])
    rhs[:, 0] /= diag[0]
    for i in range(1, n):
        rhs[:, i] = (rhs[:, i] - lower[i - 1] * rhs[:, i - 1]) / (
            diag[i] - lower[i - 1] * cp[i - 1]
        )
    for i in range(n - 2, -1, -1):
        rhs[:, i] -= cp[i] * rhs[:, i + 1]


def pack_codes(codes, lengths):
    """Concatenate per-item codes MSB-first into a byte array.

    ``codes[i]`` holds the ``lengths[i]`` low bits of item i.  The final byte
    is zero-padded.
    """
    lengths = lengths.astype(np.int64)
    total = int(lengths.sum())
    if total == 0:
        return np.zeros(0, dtype=np.uint8)
    starts = np.concatenate(([0], np.cumsum(lengths[:-1])))
    bits = np.zeros(total, dtype=np.uint8)
    for b in range(int(lengths.max())):
        sel = lengths > b
        shift = (lengths[sel] - 1 - b).astype(np.uint64)
        bits[starts[sel] + b] = (codes[sel] >> shift) & 1
    return np.packbits(bits)


def unpack_codes(data, n_items, first_code, count, offset):
    """Decode ``n_items`` canonical-code symbol indexes from an MSB-first stream.

    ``first_code[t]``/``count[t]``/``offset[t]`` describe the canonical code
    space for length ``t`` (index 0 unused).  Returns int64 indexes into the
    canonical symbol order.  Raises ValueError on a malformed stream.
    """
    max_len = len(first_code) - 1
    bits = np.unpackbits(data)
    out = np.empty(n_items, dtype=np.int64)
    first = first_code.tolist()
    cnt = count.tolist()
    off = offset.tolist()
    blist = bits.tolist()
    nbits = len(blist)
    pos = 0
    for i in range(n_items):
        code = 0
        t = 0
        while True:
            if pos >= nbits or t >= max_len:
                raise ValueError("truncated or malformed code stream")
            code = (code << 1) | blist[pos]
            pos += 1
            t += 1
            delta = code - first[t]
            if cnt[t] > 0 and 0 <= delta < cnt[t]:
                out[i] = off[t] + delta
                break
    return out


def gather_max(mag, idx, out):
    """out[i] = max over table rows of mag[idx[i, row]] (idx laid out (N, L))."""
    np.max(mag[idx], axis=1, out=out)


def cheb_distance(seeds, dist, n0, n1, n2):
    """Exact Chebyshev distance to the nearest nonzero seed (scipy chamfer)."""
    from scipy import ndimage

    if not seeds.any():
        dist[:] = 1 << 29
        return
    grid = seeds.reshape(n0, n1, n2) == 0
    out = ndimage.distance_transform_cdt(grid, metric="chessboard")
    dist[:] = out.astype(np.int32).ravel()
