"""
hypervector.py

Packed bipolar hypervectors and the HDC algebra.

Conventions
- +1 <-> bit 1, -1 <-> bit 0.
- Bit j lives in word j // 64 at bit j % 64 (little-endian words); bits past D-1 are zero.
- bind is XNOR: with +1 <-> 1 the bipolar product maps to NOT(a XOR b).
- binarize: sum >= 0 -> +1 (a tie sets the bit, like the masked latch reaching TOB).

Serialization
- u32 D (little-endian) followed by ceil(D/64) little-endian u64 words.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import DomainError, FormatError, ShapeError, StateError
from .unary import masked_binarize_window

WORD_BITS = 64
ACC_DTYPE = np.int32
DIM_FIELD = struct.Struct("<I")

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


def word_count(dimension: int) -> int:
    return (dimension + WORD_BITS - 1) // WORD_BITS


def popcount(words: np.ndarray) -> np.ndarray:
    """Per-word set-bit counts (SWAR, no lookup tables)."""
    x = np.asarray(words, dtype=np.uint64)
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return ((x * _H01) >> np.uint64(56)).astype(np.int64)


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """(..., D) array of 0/1 -> (..., ceil(D/64)) uint64 words."""
    bits = np.asarray(bits)
    d = bits.shape[-1]
    packed = np.packbits(bits.astype(np.uint8, copy=False), axis=-1, bitorder="little")
    pad = word_count(d) * 8 - packed.shape[-1]
    if pad:
        widths = [(0, 0)] * (packed.ndim - 1) + [(0, pad)]
        packed = np.pad(packed, widths)
    return np.ascontiguousarray(packed).view(np.dtype("<u8")).astype(np.uint64, copy=False)


def unpack_bits(words: np.ndarray, dimension: int) -> np.ndarray:
    """(..., W) uint64 words -> (..., D) uint8 bits."""
    raw = np.ascontiguousarray(np.asarray(words, dtype=np.dtype("<u8"))).view(np.uint8)
    return np.unpackbits(raw, axis=-1, bitorder="little")[..., :dimension]


def _tail_mask(dimension: int) -> np.ndarray:
    mask = np.full(word_count(dimension), np.uint64(0xFFFFFFFFFFFFFFFF), dtype=np.uint64)
    rem = dimension % WORD_BITS
    if rem:
        mask[-1] = np.uint64((1 << rem) - 1)
    return mask


@dataclass(frozen=True, eq=False)
class PackedHypervector:
    dimension: int
    words: np.ndarray

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise DomainError(f"hypervector dimension must be >= 1 (got {self.dimension})")
        if self.words.shape != (word_count(self.dimension),):
            raise ShapeError(f"{self.words.shape[0]} words cannot hold D={self.dimension}")
        if np.any(self.words & ~_tail_mask(self.dimension)):
            raise DomainError("bits set beyond dimension D-1")
        self.words.setflags(write=False)

    @classmethod
    def from_bits(cls, bits: Sequence[int] | np.ndarray) -> "PackedHypervector":
        arr = np.asarray(bits)
        if arr.ndim != 1 or arr.size == 0:
            raise ShapeError("expected a non-empty 1-D bit array")
        if np.any((arr != 0) & (arr != 1)):
            raise DomainError("bits must be 0 or 1")
        return cls(dimension=arr.size, words=pack_bits(arr).copy())

    @classmethod
    def from_bipolar(cls, values: Sequence[int] | np.ndarray) -> "PackedHypervector":
        arr = np.asarray(values)
        if np.any((arr != 1) & (arr != -1)):
            raise DomainError("bipolar values must be -1 or +1")
        return cls.from_bits((arr > 0).astype(np.uint8))

    @classmethod
    def all_ones(cls, dimension: int) -> "PackedHypervector":
        return cls(dimension=dimension, words=_tail_mask(dimension).copy())

    def bits(self) -> np.ndarray:
        return unpack_bits(self.words, self.dimension)

    def bipolar(self) -> np.ndarray:
        return self.bits().astype(np.int32) * 2 - 1

    def bit(self, j: int) -> int:
        if not 0 <= j < self.dimension:
            raise DomainError(f"bit index {j} outside [0, {self.dimension})")
        return int((int(self.words[j // WORD_BITS]) >> (j % WORD_BITS)) & 1)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PackedHypervector):
            return NotImplemented
        return self.dimension == other.dimension and bool(np.array_equal(self.words, other.words))

    def __hash__(self) -> int:
        return hash((self.dimension, self.words.tobytes()))

    def to_bytes(self) -> bytes:
        return DIM_FIELD.pack(self.dimension) + self.words.astype("<u8").tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes, offset: int = 0) -> Tuple["PackedHypervector", int]:
        if offset + DIM_FIELD.size > len(buf):
            raise FormatError(f"truncated hypervector header at byte offset {offset}")
        (d,) = DIM_FIELD.unpack_from(buf, offset)
        offset += DIM_FIELD.size
        nbytes = word_count(d) * 8
        if d < 1 or offset + nbytes > len(buf):
            raise FormatError(f"truncated hypervector payload at byte offset {offset} (D={d})")
        words = np.frombuffer(buf, dtype="<u8", count=word_count(d), offset=offset).astype(np.uint64)
        try:
            hv = cls(dimension=d, words=words)
        except (DomainError, ShapeError) as e:
            raise FormatError(f"non-canonical hypervector at byte offset {offset}: {e}") from e
        return hv, offset + nbytes


def _same_dimension(a: PackedHypervector, b: PackedHypervector) -> None:
    if a.dimension != b.dimension:
        raise ShapeError(f"hypervector dimensions differ: {a.dimension} vs {b.dimension}")


def complement(v: PackedHypervector) -> PackedHypervector:
    return PackedHypervector(dimension=v.dimension, words=~v.words & _tail_mask(v.dimension))


def bind(a: PackedHypervector, b: PackedHypervector) -> PackedHypervector:
    _same_dimension(a, b)
    return PackedHypervector(dimension=a.dimension, words=~(a.words ^ b.words) & _tail_mask(a.dimension))


def hamming(a: PackedHypervector, b: PackedHypervector, naive: bool = False) -> int:
    _same_dimension(a, b)
    if naive:
        return sum(1 for j in range(a.dimension) if a.bit(j) != b.bit(j))
    return int(popcount(a.words ^ b.words).sum())


def cosine_similarity(a: PackedHypervector, b: PackedHypervector) -> float:
    _same_dimension(a, b)
    return (a.dimension - 2 * hamming(a, b)) / a.dimension


def hamming_matrix(a_words: np.ndarray, b_words: np.ndarray) -> np.ndarray:
    """(n, W) x (m, W) packed rows -> (n, m) Hamming distances."""
    if a_words.shape[-1] != b_words.shape[-1]:
        raise ShapeError(f"word counts differ: {a_words.shape[-1]} vs {b_words.shape[-1]}")
    x = a_words[:, None, :] ^ b_words[None, :, :]
    return popcount(x).sum(axis=-1)


def orthogonality(vectors: Sequence[PackedHypervector]) -> float:
    """Mean pairwise normalized Hamming distance; 0.5 for ideally uncorrelated vectors."""
    if len(vectors) < 2:
        raise ShapeError("orthogonality needs at least two vectors")
    for v in vectors[1:]:
        _same_dimension(vectors[0], v)
    words = np.stack([v.words for v in vectors])
    dist = hamming_matrix(words, words)
    iu = np.triu_indices(len(vectors), k=1)
    return float(dist[iu].mean() / vectors[0].dimension)


@dataclass(frozen=True, eq=False)
class AccumulatorVector:
    dimension: int
    sums: np.ndarray
    contributions: int = 0

    @classmethod
    def zeros(cls, dimension: int) -> "AccumulatorVector":
        if dimension < 1:
            raise DomainError(f"accumulator dimension must be >= 1 (got {dimension})")
        return cls(dimension=dimension, sums=np.zeros(dimension, dtype=ACC_DTYPE))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AccumulatorVector):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and self.contributions == other.contributions
            and bool(np.array_equal(self.sums, other.sums))
        )

    def __hash__(self) -> int:
        return hash((self.dimension, self.contributions, self.sums.tobytes()))

    def check_invariants(self) -> bool:
        s = self.sums.astype(np.int64)
        return bool(np.all(np.abs(s) <= self.contributions) and np.all((s - self.contributions) % 2 == 0))


def accumulate(acc: AccumulatorVector, v: PackedHypervector) -> AccumulatorVector:
    if acc.dimension != v.dimension:
        raise ShapeError(f"accumulator D={acc.dimension} vs hypervector D={v.dimension}")
    sums = acc.sums + (v.bits().astype(ACC_DTYPE) * 2 - 1)
    return AccumulatorVector(dimension=acc.dimension, sums=sums, contributions=acc.contributions + 1)


def merge(a: AccumulatorVector, b: AccumulatorVector) -> AccumulatorVector:
    if a.dimension != b.dimension:
        raise ShapeError(f"accumulator dimensions differ: {a.dimension} vs {b.dimension}")
    return AccumulatorVector(dimension=a.dimension, sums=a.sums + b.sums, contributions=a.contributions + b.contributions)


def binarize(acc: AccumulatorVector) -> PackedHypervector:
    if acc.contributions < 1:
        raise StateError("cannot binarize an empty accumulator")
    return PackedHypervector(dimension=acc.dimension, words=pack_bits(acc.sums >= 0))


def popcount_window_binarize(vectors: Sequence[PackedHypervector], j: int) -> int:
    if not vectors:
        raise ShapeError("binarization window is empty")
    for v in vectors[1:]:
        _same_dimension(vectors[0], v)
    return masked_binarize_window([v.bit(j) for v in vectors], window=len(vectors))
