"""Bit-packed partition-index codes and the match-count similarity.

Layout: element ``i`` of a point occupies bits ``[i*n_b, (i+1)*n_b)`` of the
point's code stream, least-significant bit first inside little-endian 64-bit
words.  Padding bits after ``t*n_b`` are zero.

Two codes are compared word by word::

    D = a ^ b                              # zero segment <=> equal element
    M = D | D>>1 | ... | D>>(n_b-1)        # any set bit lands in the segment's low bit
    M |= segment_mask | tail_mask          # force every non-low bit (and padding) to 1
    matches += 64 - popcount(M)

For ``n_b == 1`` this reduces to ``t - popcount(a ^ b)``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .core import SUPPORTED_NB, EncodingError, FormatError, ParameterError

__all__ = [
    "PackedCodes",
    "segment_mask",
    "tail_mask",
    "words_per_point",
    "bytes_per_point",
    "compression_ratio",
    "pack",
    "unpack",
    "match_count",
    "kernel_estimate",
    "truncate",
    "scan",
    "save_codes",
    "load_codes",
]

CODE_MAGIC = b"IKEC"
CODE_VERSION = 1
_HEADER = struct.Struct("<4sHBBII")


def _check_nb(n_b: int) -> int:
    if n_b not in SUPPORTED_NB:
        raise EncodingError(f"n_b must be one of {SUPPORTED_NB}, got {n_b}")
    return int(n_b)


def words_per_point(t: int, n_b: int) -> int:
    return -(-t * _check_nb(n_b) // 64)


def bytes_per_point(t: int, n_b: int) -> int:
    return 8 * words_per_point(t, n_b)


def compression_ratio(t: int, n_b: int, d: int | None = None) -> float:
    """Size of a ``d``-dim float32 vector over the size of its code (``d`` defaults to ``t``)."""
    d = t if d is None else d
    return 4 * d / bytes_per_point(t, n_b)


def segment_mask(n_b: int) -> np.uint64:
    """All bits set except the lowest bit of each ``n_b``-bit segment (``...1010`` for n_b=2)."""
    n_b = _check_nb(n_b)
    low = 0
    for s in range(0, 64, n_b):
        low |= 1 << s
    return np.uint64(~low & 0xFFFFFFFFFFFFFFFF)


def tail_mask(t: int, n_b: int) -> np.uint64:
    """Ones on the padding bits of the final word, zero when ``t*n_b`` fills it exactly."""
    used = (t * _check_nb(n_b)) % 64
    if used == 0:
        return np.uint64(0)
    return np.uint64(~((1 << used) - 1) & 0xFFFFFFFFFFFFFFFF)


@dataclass(frozen=True)
class PackedCodes:
    """``n`` points x ``words_per_point`` uint64 words, plus the element layout."""

    data: np.ndarray
    t: int
    n_b: int

    def __post_init__(self):
        _check_nb(self.n_b)
        if self.data.dtype != np.uint64 or self.data.ndim != 2:
            raise EncodingError("code data must be a 2-D uint64 array")
        if self.data.shape[1] != words_per_point(self.t, self.n_b):
            raise EncodingError(
                f"expected {words_per_point(self.t, self.n_b)} words per point, "
                f"got {self.data.shape[1]}"
            )

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def words_per_point(self) -> int:
        return self.data.shape[1]

    @property
    def bytes_per_point(self) -> int:
        return 8 * self.data.shape[1]

    @property
    def seg_mask(self) -> np.uint64:
        return segment_mask(self.n_b)

    @property
    def tail_mask(self) -> np.uint64:
        return tail_mask(self.t, self.n_b)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, item) -> "PackedCodes":
        rows = self.data[item]
        if rows.ndim == 1:
            rows = rows[None, :]
        return PackedCodes(np.ascontiguousarray(rows), self.t, self.n_b)

    def row(self, i: int) -> np.ndarray:
        return self.data[i]

    def compatible(self, other: "PackedCodes") -> bool:
        return self.t == other.t and self.n_b == other.n_b


def pack(indices, n_b: int) -> PackedCodes:
    """Pack an ``n x t`` matrix of partition indices into ``n_b``-bit codes."""
    n_b = _check_nb(n_b)
    idx = np.asarray(indices)
    if idx.ndim == 1:
        idx = idx[None, :]
    if idx.ndim != 2:
        raise EncodingError(f"indices must be n x t, got shape {idx.shape}")
    n, t = idx.shape
    if t < 1:
        raise EncodingError("t must be >= 1")
    if idx.size and (idx.min() < 0 or idx.max() >= (1 << n_b)):
        raise EncodingError(f"index out of range for n_b={n_b}: values must lie in [0, {1 << n_b})")
    per_word = 64 // n_b
    w = words_per_point(t, n_b)
    shifts = (np.arange(per_word, dtype=np.uint64) * np.uint64(n_b))
    words = np.empty((n, w), dtype=np.uint64)
    # each element widens to 8 bytes while packing; bound that scratch to ~32 MB
    rows = max(1, (32 << 20) // (8 * w * per_word))
    for s in range(0, n, rows):
        e = min(n, s + rows)
        padded = np.zeros((e - s, w * per_word), dtype=np.uint64)
        padded[:, :t] = idx[s:e]
        padded = padded.reshape(e - s, w, per_word)
        padded <<= shifts
        words[s:e] = np.bitwise_or.reduce(padded, axis=2)
    return PackedCodes(words, t, n_b)


def unpack(codes: PackedCodes) -> np.ndarray:
    """Inverse of :func:`pack`: an ``n x t`` uint8 index matrix."""
    per_word = 64 // codes.n_b
    shifts = np.arange(per_word, dtype=np.uint64) * np.uint64(codes.n_b)
    low = np.uint64((1 << codes.n_b) - 1)
    el = (codes.data[:, :, None] >> shifts) & low
    el = el.reshape(codes.n, -1)[:, : codes.t]
    return el.astype(np.uint8)


def _as_row(code) -> np.ndarray:
    if isinstance(code, PackedCodes):
        if code.n != 1:
            raise EncodingError("expected a single code")
        return code.data[0]
    return np.ascontiguousarray(code, dtype=np.uint64).reshape(-1)


def match_count(a, b, t: int, n_b: int) -> int:
    """Number of positions ``i < t`` where the two codes hold the same element."""
    n_b = _check_nb(n_b)
    for c in (a, b):
        if isinstance(c, PackedCodes) and (c.t, c.n_b) != (t, n_b):
            raise EncodingError(f"code has t={c.t}, n_b={c.n_b}; expected t={t}, n_b={n_b}")
    a = _as_row(a)
    b = _as_row(b)
    w = words_per_point(t, n_b)
    if a.shape[0] != w or b.shape[0] != w:
        raise EncodingError(
            f"codes have {a.shape[0]} and {b.shape[0]} words, expected {w} for t={t}, n_b={n_b}"
        )
    d = a ^ b
    if n_b == 1:
        return t - int(np.bitwise_count(d).sum())
    m = d.copy()
    for s in range(1, n_b):
        m |= d >> np.uint64(s)
    m |= segment_mask(n_b)
    m[-1] |= tail_mask(t, n_b)
    return 64 * w - int(np.bitwise_count(m).sum())


def kernel_estimate(a, b, t: int, n_b: int) -> float:
    """Fraction of partitions in which the two points share a cell."""
    return match_count(a, b, t, n_b) / t


def scan(codes: PackedCodes, query) -> np.ndarray:
    """Match counts of one query code against every database code (int32, length n)."""
    q = _as_row(query)
    if q.shape[0] != codes.words_per_point:
        raise EncodingError("query code length does not match the database codes")
    if codes.n == 0:
        return np.empty(0, dtype=np.int32)
    return _kernels.scan(codes.data, q, codes.n_b, codes.seg_mask, codes.tail_mask)


def scan_pairs(a: PackedCodes, b: PackedCodes) -> np.ndarray:
    """Row-wise match counts between two equally sized code sets."""
    if not a.compatible(b) or a.n != b.n:
        raise EncodingError("code sets differ in shape or layout")
    return _kernels.scan_pairs(a.data, b.data, a.n_b, a.seg_mask, a.tail_mask)


def _aligned_neighbours(t_prime: int, n_b: int, t: int) -> tuple[int, int]:
    step = 64 // n_b
    lo = (t_prime // step) * step
    hi = min(lo + step, (t // step) * step)
    return lo, hi


def truncate(codes: PackedCodes, t_prime: int) -> PackedCodes:
    """Keep the first ``t_prime`` partitions; ``t_prime*n_b`` must be a multiple of 64."""
    if t_prime == codes.t:
        return codes
    if not 1 <= t_prime <= codes.t:
        raise ParameterError(f"t_prime must be in [1, {codes.t}], got {t_prime}")
    if (t_prime * codes.n_b) % 64:
        lo, hi = _aligned_neighbours(t_prime, codes.n_b, codes.t)
        valid = [v for v in (lo, hi) if v >= 1]
        raise ParameterError(
            f"t_prime={t_prime} is not word aligned for n_b={codes.n_b}; "
            f"nearest valid values: {', '.join(map(str, valid))}"
        )
    w = t_prime * codes.n_b // 64
    return PackedCodes(np.ascontiguousarray(codes.data[:, :w]), t_prime, codes.n_b)


def save_codes(path, codes: PackedCodes) -> None:
    """Write codes as a 16-byte ``IKEC`` header followed by little-endian words."""
    header = _HEADER.pack(CODE_MAGIC, CODE_VERSION, codes.n_b, 0, codes.t, codes.n)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(codes.data.astype("<u8", copy=False).tobytes())


def load_codes(path, mmap: bool = False) -> PackedCodes:
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated code header")
    magic, version, n_b, _, t, n = _HEADER.unpack(raw)
    if magic != CODE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {CODE_MAGIC!r}")
    if version != CODE_VERSION:
        raise FormatError(f"{path}: unsupported code file version {version}")
    if n_b not in SUPPORTED_NB or t < 1:
        raise FormatError(f"{path}: invalid header (t={t}, n_b={n_b})")
    w = words_per_point(t, n_b)
    expected = _HEADER.size + 8 * n * w
    size = path.stat().st_size
    if size != expected:
        raise FormatError(f"{path}: size {size} does not match header (expected {expected})")
    if n == 0:
        data = np.empty((0, w), dtype=np.uint64)
    elif mmap:
        data = np.memmap(path, dtype="<u8", mode="r", offset=_HEADER.size, shape=(n, w))
    else:
        data = np.fromfile(path, dtype="<u8", offset=_HEADER.size).reshape(n, w)
    return PackedCodes(np.asarray(data, dtype=np.uint64).view(np.ndarray), t, n_b)
