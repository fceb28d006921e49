# Compiled kernel backend.  Mirrors _kernels_py exactly: identical operation
# order in the tridiagonal recurrences and identical MSB-first bit layout, so
# outputs are bit-for-bit interchangeable with the fallback.

import numpy as np

cimport numpy as cnp

cnp.import_array()


def thomas_lines(const double[::1] lower, const double[::1] diag, const double[::1] upper,
                 double[:, ::1] rhs):
    """Solve one tridiagonal system per row of ``rhs``, in place."""
    cdef Py_ssize_t nlines = rhs.shape[0]
    cdef Py_ssize_t n = rhs.shape[1]
    cdef Py_ssize_t i, j
    cdef double[::1] cp
    cdef double denom

    if n == 1:
        for j in range(nlines):
            rhs[j, 0] /= diag[0]
        return
    cp = np.empty(n - 1)
    cp[0] = upper[0] / diag[0]
    for i in range(1, n - 1):
        cp[i] = upper[i] / (diag[i] - lower[i - 1] * cp[i - 1])
    for j in range(nlines):
        rhs[j, 0] /= diag[0]
        for i in range(1, n):
            denom = diag[i] - lower[i - 1] * cp[i - 1]
            rhs[j, i] = (rhs[j, i] - lower[i - 1] * rhs[j, i - 1]) / denom
        for i in range(n - 2, -1, -1):
            rhs[j, i] -= cp[i] * rhs[j, i + 1]


def pack_codes(const cnp.uint64_t[::1] codes, const cnp.uint8_t[::1] lengths):
    """Concatenate per-item codes MSB-first into a byte array."""
    cdef Py_ssize_t n = codes.shape[0]
    cdef Py_ssize_t i
    cdef long long total = 0
    for i in range(n):
        total += lengths[i]
    out = np.zeros((total + 7) // 8, dtype=np.uint8)
    cdef cnp.uint8_t[::1] buf = out
    cdef unsigned long long acc = 0
    cdef int nacc = 0
    cdef int length
    cdef Py_ssize_t pos = 0
    for i in range(n):
        length = lengths[i]
        acc = (acc << length) | codes[i]
        nacc += length
        while nacc >= 8:
            nacc -= 8
            buf[pos] = <cnp.uint8_t> ((acc >> nacc) & 0xFF)
            pos += 1
    if nacc > 0:
        buf[pos] = <cnp.uint8_t> ((acc << (8 - nacc)) & 0xFF)
    return out


def unpack_codes(const cnp.uint8_t[::1] data, Py_ssize_t n_items,
                 const cnp.uint64_t[::1] first_code, const cnp.int64_t[::1] count,
                 const cnp.int64_t[::1] offset):
    """Decode canonical-code symbol indexes from an MSB-first stream."""
    cdef Py_ssize_t max_len = first_code.shape[0] - 1
    cdef Py_ssize_t nbits = data.shape[0] * 8
    out = np.empty(n_items, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    cdef Py_ssize_t i, pos = 0
    cdef unsigned long long code
    cdef long long delta
    cdef int t, bit
    for i in range(n_items):
        code = 0
        t = 0
        while True:
            if pos >= nbits or t >= max_len:
                raise ValueError("truncated or malformed code stream")
            bit = (data[pos >> 3] >> (7 - (pos & 7))) & 1
            pos += 1
            code = (code << 1) | <unsigned long long> bit
            t += 1
            delta = <long long> code - <long long> first_code[t]
            if count[t] > 0 and 0 <= delta < count[t]:
                o[i] = offset[t] + delta
                break
    return out


def gather_max(const double[::1] mag, const cnp.int32_t[:, ::1] idx,
               double[::1] out):
    """out[i] = max over table rows of mag[idx[i, row]] (idx laid out (N, L))."""
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t nlev = idx.shape[1]
    cdef Py_ssize_t i, l
    cdef double v, vmax
    for i in range(n):
        vmax = 0.0
        for l in range(nlev):
            v = mag[idx[i, l]]
            if v > vmax:
                vmax = v
        out[i] = vmax


def cheb_distance(const cnp.uint8_t[::1] seeds, cnp.int32_t[::1] dist,
                  Py_ssize_t n0, Py_ssize_t n1, Py_ssize_t n2):
    """Exact Chebyshev (chessboard) distance to the nearest nonzero seed via
    the classic two-pass chamfer sweep (interior nodes skip bounds checks)."""
    cdef Py_ssize_t i0, i1, i2, j0, j1, j2, flat, k
    cdef cnp.int32_t INF = 1 << 29
    cdef cnp.int32_t best, cand
    cdef Py_ssize_t fwd[13]
    cdef Py_ssize_t bwd[13]

    k = 0
    for j0 in range(-1, 1):
        for j1 in range(-1, 2):
            for j2 in range(-1, 2):
                if j0 < 0 or j1 < 0 or (j1 == 0 and j2 < 0):
                    fwd[k] = (j0 * n1 + j1) * n2 + j2
                    bwd[12 - k] = -fwd[k]
                    k += 1

    for flat in range(n0 * n1 * n2):
        dist[flat] = 0 if seeds[flat] else INF

    flat = 0
    for i0 in range(n0):
        for i1 in range(n1):
            for i2 in range(n2):
                best = dist[flat]
                if best != 0:
                    if i0 > 0 and 0 < i1 < n1 - 1 and 0 < i2 < n2 - 1:
                        for k in range(13):
                            cand = dist[flat + fwd[k]] + 1
                            if cand < best:
                                best = cand
                    else:
                        for j0 in range(max(i0 - 1, 0), i0 + 1):
                            for j1 in range(max(i1 - 1, 0), min(i1 + 2, n1)):
                                for j2 in range(max(i2 - 1, 0), min(i2 + 2, n2)):
                                    if j0 == i0 and (j1 > i1 or (j1 == i1 and j2 >= i2)):
                                        continue
                                    cand = dist[(j0 * n1 + j1) * n2 + j2] + 1
                                    if cand < best:
                                        best = cand
                    dist[flat] = best
                flat += 1

    flat = n0 * n1 * n2 - 1
    for i0 in range(n0 - 1, -1, -1):
        for i1 in range(n1 - 1, -1, -1):
            for i2 in range(n2 - 1, -1, -1):
                best = dist[flat]
                if best != 0:
                    if i0 < n0 - 1 and 0 < i1 < n1 - 1 and 0 < i2 < n2 - 1:
                        for k in range(13):
                            cand = dist[flat + bwd[k]] + 1
                            if cand < best:
                                best = cand
                    else:
                        for j0 in range(i0, min(i0 + 2, n0)):
                            for j1 in range(max(i1 - 1, 0), min(i1 + 2, n1)):
                                for j2 in range(max(i2 - 1, 0), min(i2 + 2, n2)):
                                    if j0 == i0 and (j1 < i1 or (j1 == i1 and j2 <= i2)):
                                        continue
                                    cand = dist[(j0 * n1 + j1) * n2 + j2] + 1
                                    if cand < best:
                                        best = cand
                    dist[flat] = best
                flat -= 1
