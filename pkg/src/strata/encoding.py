"""Canonical Huffman coding of integer symbol streams plus mask run-length
encoding.

The alphabet is the exact set of distinct values in the stream; the table
(delta-coded sorted alphabet + one length byte per symbol) travels in front
of the MSB-first code stream.  Canonical order is (code length, symbol
value), so encoder and decoder rebuild identical codes from lengths alone.
Bit packing and unpacking run on the selected kernel backend.
"""

from __future__ import annotations

import heapq

import numpy as np

from strata.backend import kernels

__all__ = [
    "decode_symbols",
    "encode_symbols",
    "rle_decode",
    "rle_encode",
]

# Keep accumulated bits within the packers' 64-bit windows.
MAX_CODE_LEN = 56


def _uvarint(value: int) -> bytes:
    out = bytearray()
    while True:
        b = value & 0x7F
        value >>= 7
        if value:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _read_uvarint(buf: memoryview, pos: int) -> tuple[int, int]:
    value = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise ValueError("truncated varint")
        b = buf[pos]
        pos += 1
        value |= (b & 0x7F) << shift
        if not b & 0x80:
            return value, pos
        shift += 7


def _zigzag(v: np.ndarray) -> np.ndarray:
    return ((v << 1) ^ (v >> 63)).astype(np.uint64)


def _unzigzag(v: int) -> int:
    return (v >> 1) ^ -(v & 1)


def huffman_code_lengths(counts: np.ndarray) -> np.ndarray:
    """Code length per symbol from its frequency (deterministic tie-breaks)."""
    n = len(counts)
    if n == 1:
        return np.array([1], dtype=np.uint8)
    heap = [(int(c), i, None) for i, c in enumerate(counts)]
    heapq.heapify(heap)
    seq = n
    while len(heap) > 1:
        a = heapq.heappop(heap)
        b = heapq.heappop(heap)
        heapq.heappush(heap, (a[0] + b[0], seq, (a, b)))
        seq += 1
    lengths = np.zeros(n, dtype=np.uint8)

    stack = [(heap[0], 0)]
    while stack:
        (count, key, children), depth = stack.pop()
        if children is None:
            lengths[key] = max(depth, 1)
        else:
            stack.append((children[0], depth + 1))
            stack.append((children[1], depth + 1))
    if lengths.max() > MAX_CODE_LEN:
        raise ValueError(f"code length {lengths.max()} exceeds {MAX_CODE_LEN}")
    return lengths


def canonical_codes(lengths: np.ndarray) -> np.ndarray:
    """Assign canonical code values to symbols sorted by (length, symbol)."""
    order = np.argsort(lengths, kind="stable")  # symbols are pre-sorted by value
    codes = np.zeros(len(lengths), dtype=np.uint64)
    code = 0
    prev = 0
    for idx in order:
        length = int(lengths[idx])
        code <<= length - prev
        prev = length
        codes[idx] = code
        code += 1
    return codes


def _decode_tables(lengths: np.ndarray):
    """first_code/count/offset per code length plus the canonical symbol order."""
    max_len = int(lengths.max())
    count = np.zeros(max_len + 1, dtype=np.int64)
    for t in lengths:
        count[t] += 1
    first = np.zeros(max_len + 1, dtype=np.uint64)
    offset = np.zeros(max_len + 1, dtype=np.int64)
    code = 0
    total = 0
    for t in range(1, max_len + 1):
        code <<= 1
        first[t] = code
        offset[t] = total
        code += int(count[t])
        total += int(count[t])
    order = np.argsort(lengths, kind="stable")
    return first, count, offset, order


def _alphabet(symbols: np.ndarray):
    """(sorted distinct values, per-item index, counts); histogram fast path
    when the value span is small, full sort otherwise."""
    vmin = int(symbols.min())
    vmax = int(symbols.max())
    span = vmax - vmin + 1
    if span <= max(4 * symbols.size, 1 << 16):
        hist = np.bincount(symbols - vmin, minlength=span)
        values = np.flatnonzero(hist)
        lookup = np.zeros(span, dtype=np.int64)
        lookup[values] = np.arange(len(values))
        return values + vmin, lookup[symbols - vmin], hist[values]
    return np.unique(symbols, return_inverse=True, return_counts=True)


def encode_symbols(symbols: np.ndarray) -> bytes:
    """Self-describing canonical-Huffman encoding of an int64 stream."""
    symbols = np.ascontiguousarray(symbols, dtype=np.int64).ravel()
    if symbols.size == 0:
        raise ValueError("empty symbol stream")
    alphabet, inverse, counts = _alphabet(symbols)
    lengths = huffman_code_lengths(counts)
    codes = canonical_codes(lengths)

    out = bytearray()
    out += _uvarint(symbols.size)
    out += _uvarint(len(alphabet))
    deltas = np.diff(alphabet, prepend=alphabet[:1] * 0)
    for z in _zigzag(deltas):
        out += _uvarint(int(z))
    out += lengths.tobytes()
    packed = kernels.pack_codes(
        codes[inverse], np.ascontiguousarray(lengths[inverse], dtype=np.uint8)
    )
    out += _uvarint(int(lengths[inverse].astype(np.int64).sum()))
    out += np.asarray(packed, dtype=np.uint8).tobytes()
    return bytes(out)


def decode_symbols(data: bytes) -> np.ndarray:
    """Inverse of :func:`encode_symbols`."""
    buf = memoryview(data)
    n, pos = _read_uvarint(buf, 0)
    asize, pos = _read_uvarint(buf, pos)
    if asize < 1:
        raise ValueError("empty alphabet")
    alphabet = np.empty(asize, dtype=np.int64)
    acc = 0
    for i in range(asize):
        z, pos = _read_uvarint(buf, pos)
        acc += _unzigzag(z)
        alphabet[i] = acc
    if pos + asize > len(buf):
        raise ValueError("truncated code-length table")
    lengths = np.frombuffer(buf[pos : pos + asize], dtype=np.uint8)
    pos += asize
    nbits, pos = _read_uvarint(buf, pos)
    nbytes = (nbits + 7) // 8
    if pos + nbytes > len(buf):
        raise ValueError("truncated payload bits")
    payload = np.frombuffer(buf[pos : pos + nbytes], dtype=np.uint8)

    first, count, offset, order = _decode_tables(lengths)
    idx = kernels.unpack_codes(np.ascontiguousarray(payload), n, first, count, offset)
    return alphabet[order[idx]]


def rle_encode(values: np.ndarray) -> bytes:
    """Byte-wise run-length encoding: (value u8, run length uvarint) pairs."""
    values = np.ascontiguousarray(values, dtype=np.uint8).ravel()
    if values.size == 0:
        return b""
    breaks = np.flatnonzero(np.diff(values)) + 1
    starts = np.concatenate(([0], breaks))
    ends = np.concatenate((breaks, [values.size]))
    out = bytearray()
    for s, e in zip(starts, ends):
        out.append(int(values[s]))
        out += _uvarint(int(e - s))
    return bytes(out)


def rle_decode(data: bytes, n: int) -> np.ndarray:
    buf = memoryview(data)
    vals = []
    runs = []
    pos = 0
    total = 0
    while pos < len(buf):
        v = buf[pos]
        run, pos = _read_uvarint(buf, pos + 1)
        vals.append(v)
        runs.append(run)
        total += run
    if total != n:
        raise ValueError(f"run lengths sum to {total}, expected {n}")
    return np.repeat(np.array(vals, dtype=np.uint8), runs)
