"""
sobol.py

Quantized Sobol tables for uHD encoding: feature position i reads Sobol
dimension i (1-based, row-major pixel order), D points per dimension, each
point truncated to an M-bit integer.

Direction numbers
- Published Joe–Kuo text format: a header line, then one line per dimension
    d  s  a  m_1 .. m_s
  (s = primitive polynomial degree, a = its interior coefficients).
- Dimension 1 is van der Corput (every m_j = 1) and is not listed in the file.
- Without a file, the Joe–Kuo D(6) table bundled with scipy is used.

Construction
- Gray-code order: x_n = XOR of V_b over the set bits b of gray(n) = n ^ (n >> 1).
- Point 0 is the origin; skip_initial_zero takes points 1..D instead of 0..D-1.
- No scrambling, no leap.

Table export (little-endian)
- u32 H, u32 D, u32 M, then H*D bytes (row-major, one quantized scalar per byte, M <= 8).
"""

from __future__ import annotations

import functools
import logging
import math
import struct
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

import numpy as np

from .errors import CapacityError, DomainError, FormatError
from .storage import atomic_write_bytes, atomic_write_text

logger = logging.getLogger(__name__)

SOBOL_BITS = 30
MAX_QUANTIZATION_BITS = 16
TABLE_HEADER = struct.Struct("<III")


@dataclass(frozen=True)
class DirectionRecord:
    dimension: int
    degree: int
    coefficients: int
    initial: Tuple[int, ...]


VAN_DER_CORPUT = DirectionRecord(dimension=1, degree=0, coefficients=0, initial=())


@dataclass(frozen=True)
class DirectionTable:
    records: Tuple[DirectionRecord, ...]
    source: str = ""

    @property
    def capacity(self) -> int:
        return len(self.records)

    def direction_integers(self, dimension: int, bits: int = SOBOL_BITS) -> np.ndarray:
        """V_1..V_bits for one dimension, each scaled to `bits` binary digits."""
        if dimension < 1 or dimension > self.capacity:
            raise CapacityError(
                f"Sobol dimension {dimension} outside direction-number table (capacity {self.capacity})"
            )
        rec = self.records[dimension - 1]
        m = _direction_sequence(rec, bits)
        return np.array([m[j] << (bits - 1 - j) for j in range(bits)], dtype=np.uint64)

    def direction_matrix(self, dimensions: int, bits: int = SOBOL_BITS) -> np.ndarray:
        if dimensions > self.capacity:
            raise CapacityError(
                f"{dimensions} Sobol dimensions requested; direction-number table holds {self.capacity}"
            )
        return np.stack([self.direction_integers(d, bits) for d in range(1, dimensions + 1)])


def _direction_sequence(rec: DirectionRecord, bits: int) -> List[int]:
    # m_j for j = 1..bits (returned 0-indexed)
    if rec.degree == 0:
        return [1] * bits
    s, a = rec.degree, rec.coefficients
    m = list(rec.initial[:bits])
    for j in range(s, bits):
        new = m[j - s] ^ (m[j - s] << s)
        for k in range(1, s):
            if (a >> (s - 1 - k)) & 1:
                new ^= m[j - k] << k
        m.append(new)
    return m


def _check_record(rec: DirectionRecord, where: str) -> None:
    if rec.degree < 1 or len(rec.initial) != rec.degree:
        raise FormatError(f"{where}: dimension {rec.dimension} expects {rec.degree} initial direction integers")
    if rec.coefficients >= (1 << max(rec.degree - 1, 0)):
        raise FormatError(f"{where}: dimension {rec.dimension} coefficient {rec.coefficients} too wide for degree {rec.degree}")
    for j, mj in enumerate(rec.initial, start=1):
        if mj % 2 == 0 or mj >= (1 << j):
            raise FormatError(f"{where}: dimension {rec.dimension} m_{j}={mj} must be odd and < 2^{j}")


def parse_direction_numbers(lines: Iterable[str], source: str = "<text>") -> DirectionTable:
    records: List[DirectionRecord] = [VAN_DER_CORPUT]
    for lineno, raw in enumerate(lines, start=1):
        parts = raw.split()
        if not parts or not parts[0].isdigit():
            continue
        try:
            d, s, a, *m = (int(p) for p in parts)
        except ValueError as e:
            raise FormatError(f"{source}: line {lineno}: non-integer field") from e
        if d != len(records) + 1:
            raise FormatError(f"{source}: line {lineno}: expected dimension {len(records) + 1}, found {d}")
        if len(m) != s:
            raise FormatError(f"{source}: line {lineno}: degree {s} but {len(m)} direction integers")
        rec = DirectionRecord(dimension=d, degree=s, coefficients=a, initial=tuple(m))
        _check_record(rec, f"{source}: line {lineno}")
        records.append(rec)
    return DirectionTable(records=tuple(records), source=source)


def _scipy_table() -> DirectionTable:
    ref = resources.files("scipy.stats") / "_sobol_direction_numbers.npz"
    with resources.as_file(ref) as p:
        with np.load(p) as dns:
            poly = dns["poly"]
            vinit = dns["vinit"]
    records: List[DirectionRecord] = [VAN_DER_CORPUT]
    for row in range(1, poly.shape[0]):
        p_int = int(poly[row])
        s = p_int.bit_length() - 1
        a = (p_int >> 1) & ((1 << (s - 1)) - 1) if s > 1 else 0
        records.append(
            DirectionRecord(dimension=row + 1, degree=s, coefficients=a, initial=tuple(int(x) for x in vinit[row, :s]))
        )
    return DirectionTable(records=tuple(records), source="scipy:joe-kuo-6.21201")


@functools.lru_cache(maxsize=8)
def load_direction_numbers(path: Optional[str] = None) -> DirectionTable:
    if path is None:
        table = _scipy_table()
    else:
        p = Path(path)
        if not p.is_file():
            raise FormatError(f"direction-number file not found: {p}")
        with p.open("r", encoding="utf-8") as f:
            table = parse_direction_numbers(f, source=str(p))
    logger.debug("Direction numbers: %s (%d dimensions)", table.source, table.capacity)
    return table


def write_direction_numbers(path: Path, table: DirectionTable, dimensions: Optional[int] = None) -> None:
    n = table.capacity if dimensions is None else min(dimensions, table.capacity)
    lines = ["d       s       a       m_i"]
    for rec in table.records[1:n]:
        lines.append(f"{rec.dimension}\t{rec.degree}\t{rec.coefficients}\t" + " ".join(str(x) for x in rec.initial))
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


@dataclass(frozen=True)
class SobolConfig:
    dimensions: int
    points_per_dimension: int
    quantization_bits: int = 4
    skip_initial_zero: bool = True

    def __post_init__(self) -> None:
        if self.dimensions < 1:
            raise DomainError(f"dimensions must be >= 1 (got {self.dimensions})")
        if self.points_per_dimension < 1:
            raise DomainError(f"points_per_dimension must be >= 1 (got {self.points_per_dimension})")
        if not 1 <= self.quantization_bits <= MAX_QUANTIZATION_BITS:
            raise DomainError(f"quantization_bits must be 1..{MAX_QUANTIZATION_BITS} (got {self.quantization_bits})")

    @property
    def levels(self) -> int:
        return 1 << self.quantization_bits


@dataclass(frozen=True)
class SobolTable:
    values: np.ndarray
    config: SobolConfig

    def __post_init__(self) -> None:
        self.values.setflags(write=False)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def row(self, dimension: int) -> np.ndarray:
        """Quantized scalars of Sobol dimension `dimension` (1-based)."""
        return self.values[dimension - 1]

    def level_histogram(self) -> np.ndarray:
        """(H, 2^M) counts of each quantized level per row."""
        h, _ = self.values.shape
        levels = self.config.levels
        offsets = (np.arange(h, dtype=np.int64) * levels)[:, None]
        flat = (self.values.astype(np.int64) + offsets).ravel()
        return np.bincount(flat, minlength=h * levels).reshape(h, levels)


def _point_indices(num_points: int, skip_initial_zero: bool) -> np.ndarray:
    start = 1 if skip_initial_zero else 0
    if start + num_points > (1 << SOBOL_BITS):
        raise CapacityError(f"{num_points} points exceed the 2^{SOBOL_BITS}-point generator range")
    return np.arange(start, start + num_points, dtype=np.uint64)


def sobol_integers(directions: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Gray-code Sobol points as SOBOL_BITS-bit integers, shape (dims, len(indices))."""
    gray = indices ^ (indices >> np.uint64(1))
    out = np.zeros((directions.shape[0], indices.size), dtype=np.uint64)
    for b in range(directions.shape[1]):
        bit = ((gray >> np.uint64(b)) & np.uint64(1)).astype(bool)
        if bit.any():
            out ^= np.where(bit[None, :], directions[:, b : b + 1], np.uint64(0))
    return out


def generate_sobol_dimension(
    dimension_index: int,
    num_points: int,
    skip_initial_zero: bool = True,
    directions: Optional[DirectionTable] = None,
) -> np.ndarray:
    if num_points < 1:
        raise DomainError(f"num_points must be >= 1 (got {num_points})")
    table = directions or load_direction_numbers()
    v = table.direction_integers(dimension_index)[None, :]
    ints = sobol_integers(v, _point_indices(num_points, skip_initial_zero))[0]
    return ints.astype(np.float64) / float(1 << SOBOL_BITS)


def quantize_scalar(x: float, levels: int) -> int:
    if levels < 2 or levels & (levels - 1) or levels > (1 << MAX_QUANTIZATION_BITS):
        raise DomainError(f"levels must be a power of two in [2, 2^{MAX_QUANTIZATION_BITS}] (got {levels})")
    if not (0.0 <= x < 1.0) or math.isnan(x):
        raise DomainError(f"Sobol scalar {x!r} outside [0, 1)")
    return min(int(math.floor(x * levels)), levels - 1)


def build_sobol_table(config: SobolConfig, directions: Optional[DirectionTable] = None) -> SobolTable:
    table = directions or load_direction_numbers()
    v = table.direction_matrix(config.dimensions)
    ints = sobol_integers(v, _point_indices(config.points_per_dimension, config.skip_initial_zero))
    # floor(x * 2^M) == top M bits of the SOBOL_BITS-bit integer
    q = ints >> np.uint64(SOBOL_BITS - config.quantization_bits)
    dtype = np.uint8 if config.quantization_bits <= 8 else np.uint16
    logger.debug(
        "Sobol table H=%d D=%d M=%d skip_zero=%s",
        config.dimensions,
        config.points_per_dimension,
        config.quantization_bits,
        config.skip_initial_zero,
    )
    return SobolTable(values=q.astype(dtype), config=config)


def table_to_bytes(table: SobolTable) -> bytes:
    cfg = table.config
    if cfg.quantization_bits > 8:
        raise DomainError(f"flat table export stores one byte per scalar; M={cfg.quantization_bits} > 8")
    h, d = table.shape
    return TABLE_HEADER.pack(h, d, cfg.quantization_bits) + table.values.astype(np.uint8).tobytes(order="C")


def write_table(path: Path, table: SobolTable) -> int:
    data = table_to_bytes(table)
    atomic_write_bytes(Path(path), data)
    return len(data)


def read_table(path: Path, skip_initial_zero: bool = True) -> SobolTable:
    raw = Path(path).read_bytes()
    if len(raw) < TABLE_HEADER.size:
        raise FormatError(f"{path}: truncated header at byte offset {len(raw)}")
    h, d, m = TABLE_HEADER.unpack_from(raw, 0)
    expected = TABLE_HEADER.size + h * d
    if len(raw) != expected:
        raise FormatError(f"{path}: payload ends at byte offset {len(raw)}, expected {expected}")
    values = np.frombuffer(raw, dtype=np.uint8, offset=TABLE_HEADER.size).reshape(h, d).copy()
    if m < 1 or m > 8 or (values.size and int(values.max()) >= (1 << m)):
        raise FormatError(f"{path}: scalar exceeds declared M={m}")
    cfg = SobolConfig(dimensions=h, points_per_dimension=d, quantization_bits=m, skip_initial_zero=skip_initial_zero)
    return SobolTable(values=values, config=cfg)


def balance_summary(table: SobolTable) -> dict:
    hist = table.level_histogram()
    return {
        "H": int(table.shape[0]),
        "D": int(table.shape[1]),
        "M": table.config.quantization_bits,
        "expected_per_level": table.shape[1] / table.config.levels,
        "min_count": int(hist.min()),
        "max_count": int(hist.max()),
        "level_totals": [int(x) for x in hist.sum(axis=0)],
    }
