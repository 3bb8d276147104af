"""
unary.py

Thermometer (unary) bit-streams, the Unary Stream Table (UST), the gate-level
unary comparator and the masked sticky-latch binarizer.

Stream layout
- An N-bit stream is held as an integer word; bit k of the word is stream
  position N-1-k, so position 0 (printed first, MSB) is the word's top bit.
- 1s are right-aligned: value v is the word (1 << v) - 1, e.g. 2 in N=7 prints 0000011.

UST
- 2^M entries of length N = 2^M, indexed 0..2^M-1. Value N itself is not stored:
  M-bit memory cannot address it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence, Tuple

from .errors import DomainError, LogicError, PreconditionError, ShapeError
from .storage import atomic_write_text

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UnaryStream:
    word: int
    length: int

    @property
    def value(self) -> int:
        return bin(self.word).count("1")

    @property
    def bits(self) -> Tuple[int, ...]:
        """Stream positions MSB-first."""
        return tuple((self.word >> (self.length - 1 - k)) & 1 for k in range(self.length))

    def is_thermometer(self) -> bool:
        return self.word >= 0 and self.word < (1 << self.length) and self.word & (self.word + 1) == 0

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "UnaryStream":
        word = 0
        for b in bits:
            if b not in (0, 1):
                raise DomainError(f"stream bit {b!r} is not 0/1")
            word = (word << 1) | b
        return cls(word=word, length=len(bits))


def encode_unary(value: int, length: int) -> UnaryStream:
    if length < 1:
        raise DomainError(f"stream length must be >= 1 (got {length})")
    if not 0 <= value <= length:
        raise DomainError(f"unary value {value} outside [0, {length}]")
    return UnaryStream(word=(1 << value) - 1, length=length)


@dataclass(frozen=True)
class UnaryStreamTable:
    entries: Tuple[UnaryStream, ...]
    quantization_bits: int

    @property
    def length(self) -> int:
        return 1 << self.quantization_bits

    def __len__(self) -> int:
        return len(self.entries)


def build_ust(quantization_bits: int) -> UnaryStreamTable:
    if not 1 <= quantization_bits <= 8:
        raise DomainError(f"UST supports 1..8 quantization bits (got {quantization_bits})")
    n = 1 << quantization_bits
    return UnaryStreamTable(entries=tuple(encode_unary(v, n) for v in range(n)), quantization_bits=quantization_bits)


def fetch_unary(table: UnaryStreamTable, value: int) -> UnaryStream:
    if not 0 <= value < len(table.entries):
        raise DomainError(f"UST index {value} outside [0, {len(table.entries) - 1}]")
    return table.entries[value]


def counter_comparator_reference(value: int, length: int) -> UnaryStream:
    """Counter + comparator generator: cycle k emits (k < value), shifted in from the right."""
    if length < 1:
        raise DomainError(f"stream length must be >= 1 (got {length})")
    if not 0 <= value <= length:
        raise DomainError(f"unary value {value} outside [0, {length}]")
    word = 0
    for k in range(length):
        if k < value:
            word |= 1 << k
    return UnaryStream(word=word, length=length)


def _require_thermometer(s: UnaryStream, name: str) -> None:
    if not s.is_thermometer():
        raise PreconditionError(f"{name} stream {s} is not a thermometer code")


def unary_min(a: UnaryStream, b: UnaryStream) -> UnaryStream:
    """Bit-wise AND; for thermometer inputs this is the smaller stream."""
    if a.length != b.length:
        raise ShapeError(f"stream lengths differ: {a.length} vs {b.length}")
    return UnaryStream(word=a.word & b.word, length=a.length)


def unary_compare_ge(data: UnaryStream, sobol: UnaryStream) -> int:
    """1 iff value(data) >= value(sobol): AND-reduce((data AND sobol) OR NOT sobol)."""
    if data.length != sobol.length:
        raise ShapeError(f"stream lengths differ: {data.length} vs {sobol.length}")
    _require_thermometer(data, "data")
    _require_thermometer(sobol, "sobol")
    full = (1 << data.length) - 1
    m = data.word & sobol.word
    o = m | (~sobol.word & full)
    return 1 if o == full else 0


@dataclass(frozen=True)
class MaskedBinarizer:
    capacity: int
    threshold: int
    counter_width: int
    mask: int
    counter: int = 0
    latch: bool = False

    @classmethod
    def for_window(cls, capacity: int) -> "MaskedBinarizer":
        if capacity < 1:
            raise DomainError(f"binarization window must hold >= 1 contribution (got {capacity})")
        tob = (capacity + 1) // 2
        width = (capacity - 1).bit_length() + 1
        return cls(capacity=capacity, threshold=tob, counter_width=width, mask=tob)

    @property
    def sign(self) -> int:
        return 1 if self.latch else 0


def masked_binarize_step(state: MaskedBinarizer, increment: int) -> MaskedBinarizer:
    if increment not in (0, 1):
        raise DomainError(f"popcount increment must be 0 or 1 (got {increment!r})")
    counter = state.counter + increment
    if counter > state.capacity:
        raise LogicError(f"popcount {counter} exceeds window capacity {state.capacity}")
    latch = state.latch or (counter & state.mask) == state.mask
    return replace(state, counter=counter, latch=latch)


def masked_binarize_window(bits: Sequence[int], window: int | None = None) -> int:
    h = len(bits)
    if h == 0 or (window is not None and h != window):
        raise ShapeError(f"binarization window holds {h} bits, expected {window if window is not None else '>= 1'}")
    state = MaskedBinarizer.for_window(h)
    for b in bits:
        state = masked_binarize_step(state, int(b))
    return state.sign


def render_ust(table: UnaryStreamTable) -> str:
    return "".join(str(s) + "\n" for s in table.entries)


def dump_ust(table: UnaryStreamTable, path: Path) -> None:
    atomic_write_text(Path(path), render_ust(table))
