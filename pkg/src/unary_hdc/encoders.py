"""
encoders.py

Image -> hypervector encoders.

baseline
- H position hypervectors, bit = +1 iff R <= 0.5 (R uniform in [0, 1)).
- 2^n + 1 nested level hypervectors from one level_base vector (uniform in [0, D]):
  bit j of L(k) = +1 iff level_base[j] <= k * D / 2^n.
- image -> sum_i bind(L(pixel_i), P_i).
- Draw order per iteration: positions (H x D, row-major) then level_base (D).
  The iteration seed is base_seed + i.

uhd
- No position hypervectors. Pixel i owns Sobol dimension i + 1.
- bit j of pixel i's level vector = +1 iff pixel_i >= table[i][j]
  (ties give +1; "intensity smaller than the Sobol scalar -> -1").
- Three bit-identical comparator paths:
    scalar  integer compare (production)
    unary   UST thermometer streams through the gate-level comparator
    bank    precomputed H x 2^M level vectors (enabled with use_level_bank)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from .errors import CapacityError, ConfigError, DomainError, ResourceError, ShapeError
from .hypervector import AccumulatorVector, PackedHypervector, pack_bits, unpack_bits, word_count
from .sobol import SobolConfig, SobolTable, build_sobol_table, load_direction_numbers
from .unary import UnaryStreamTable, build_ust

logger = logging.getLogger(__name__)

ENCODERS = ("baseline", "uhd")
GENERATOR_KINDS = ("prng", "lfsr")
COMPARATOR_PATHS = ("scalar", "unary")

DEFAULT_LFSR_WIDTH = 32
DEFAULT_LFSR_TAPS = (32, 22, 2, 1)
DEFAULT_BANK_BUDGET = 256 * 1024 * 1024
POSITION_THRESHOLD = 0.5

# uint64 stream words bound the gate-level path
GATE_MAX_STREAM_BITS = 64


class UniformSource(Protocol):
    def random(self, size: int | Tuple[int, ...]) -> np.ndarray: ...


class Lfsr:
    """Fibonacci LFSR; each step's register value / 2^width is one uniform draw in (0, 1)."""

    def __init__(self, seed: int, width: int = DEFAULT_LFSR_WIDTH, taps: Sequence[int] = DEFAULT_LFSR_TAPS) -> None:
        if width < 16 or width > 64:
            raise ConfigError(f"LFSR width must be in [16, 64] (got {width})")
        if not taps or any(t < 1 or t > width for t in taps):
            raise ConfigError(f"LFSR taps {list(taps)} must lie in [1, {width}]")
        if max(taps) != width:
            raise ConfigError(f"LFSR taps {list(taps)} must include the register width {width}")
        self.width = width
        self.taps = tuple(taps)
        self.mask = (1 << width) - 1
        self.state = seed & self.mask or 1

    def step(self) -> int:
        sr = self.state
        bit = 0
        for t in self.taps:
            bit ^= (sr >> (t - 1)) & 1
        self.state = ((sr << 1) & self.mask) | bit
        return self.state

    def random(self, size: int | Tuple[int, ...]) -> np.ndarray:
        shape = (size,) if isinstance(size, int) else tuple(size)
        count = int(np.prod(shape, dtype=np.int64))
        scale = float(1 << self.width)
        out = np.fromiter((self.step() / scale for _ in range(count)), dtype=np.float64, count=count)
        return out.reshape(shape)


@dataclass(frozen=True)
class EncoderConfig:
    encoder: str = "uhd"
    dim: int = 1024
    quantization_bits: int = 4
    level_bits: int = 4
    seed: int = 0
    generator_kind: str = "prng"
    lfsr_width: int = DEFAULT_LFSR_WIDTH
    lfsr_taps: Tuple[int, ...] = DEFAULT_LFSR_TAPS
    comparator_path: str = "scalar"
    use_level_bank: bool = True
    level_bank_budget_bytes: int = DEFAULT_BANK_BUDGET
    skip_initial_zero: bool = True
    directions_path: str = ""

    def __post_init__(self) -> None:
        if self.encoder not in ENCODERS:
            raise ConfigError(f"unknown encoder {self.encoder!r} (expected one of {', '.join(ENCODERS)})")
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1 (got {self.dim})")
        if not 1 <= self.quantization_bits <= 8:
            raise ConfigError(f"quantization_bits must be in [1, 8] (got {self.quantization_bits})")
        if not 1 <= self.level_bits <= 8:
            raise ConfigError(f"level_bits must be in [1, 8] (got {self.level_bits})")
        if self.encoder == "baseline" and self.dim < (1 << self.level_bits):
            raise ConfigError(f"baseline needs dim >= 2^level_bits = {1 << self.level_bits} (got {self.dim})")
        if self.generator_kind not in GENERATOR_KINDS:
            raise ConfigError(f"unknown generator_kind {self.generator_kind!r}")
        if self.comparator_path not in COMPARATOR_PATHS:
            raise ConfigError(f"unknown comparator_path {self.comparator_path!r}")
        if self.level_bank_budget_bytes < 0:
            raise ConfigError("level_bank_budget_bytes must be >= 0")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0 (got {self.seed})")

    @property
    def input_bits(self) -> int:
        """Bits per pixel the encoder consumes."""
        return self.quantization_bits if self.encoder == "uhd" else self.level_bits

    def to_items(self) -> List[Tuple[str, str]]:
        items = {
            "encoder": self.encoder,
            "dim": str(self.dim),
            "quantization_bits": str(self.quantization_bits),
            "level_bits": str(self.level_bits),
            "seed": str(self.seed),
            "generator_kind": self.generator_kind,
            "lfsr_width": str(self.lfsr_width),
            "lfsr_taps": ",".join(str(t) for t in self.lfsr_taps),
            "comparator_path": self.comparator_path,
            "use_level_bank": "true" if self.use_level_bank else "false",
            "level_bank_budget_bytes": str(self.level_bank_budget_bytes),
            "skip_initial_zero": "true" if self.skip_initial_zero else "false",
            "directions_path": self.directions_path,
        }
        return sorted(items.items())

    @classmethod
    def from_items(cls, items: Dict[str, str]) -> "EncoderConfig":
        def flag(key: str, default: bool) -> bool:
            raw = items.get(key)
            if raw is None:
                return default
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ConfigError(f"{key}: expected a boolean (got {raw!r})")

        def num(key: str, default: int) -> int:
            raw = items.get(key)
            if raw is None or raw == "":
                return default
            try:
                return int(raw)
            except ValueError as e:
                raise ConfigError(f"{key}: expected an integer (got {raw!r})") from e

        taps_raw = items.get("lfsr_taps", "")
        try:
            taps = tuple(int(t) for t in taps_raw.split(",") if t.strip()) or DEFAULT_LFSR_TAPS
        except ValueError as e:
            raise ConfigError(f"lfsr_taps: expected comma-separated integers (got {taps_raw!r})") from e

        return cls(
            encoder=items.get("encoder", "uhd"),
            dim=num("dim", 1024),
            quantization_bits=num("quantization_bits", 4),
            level_bits=num("level_bits", 4),
            seed=num("seed", 0),
            generator_kind=items.get("generator_kind", "prng"),
            lfsr_width=num("lfsr_width", DEFAULT_LFSR_WIDTH),
            lfsr_taps=taps,
            comparator_path=items.get("comparator_path", "scalar"),
            use_level_bank=flag("use_level_bank", True),
            level_bank_budget_bytes=num("level_bank_budget_bytes", DEFAULT_BANK_BUDGET),
            skip_initial_zero=flag("skip_initial_zero", True),
            directions_path=items.get("directions_path", ""),
        )


def make_source(config: EncoderConfig, seed: int) -> UniformSource:
    if config.generator_kind == "lfsr":
        return Lfsr(seed, width=config.lfsr_width, taps=config.lfsr_taps)
    return np.random.default_rng(seed)


def _check_image(image: np.ndarray, features: int, bits: int) -> np.ndarray:
    img = np.asarray(image)
    if img.ndim != 1 or img.shape[0] != features:
        raise ShapeError(f"image has {img.size} pixels, encoder expects H={features}")
    if img.size and (int(img.min()) < 0 or int(img.max()) >= (1 << bits)):
        raise DomainError(f"pixel values must be {bits}-bit quantized (max {(1 << bits) - 1}, got {int(img.max())})")
    return img.astype(np.intp, copy=False)


def _check_batch(images: np.ndarray, features: int, bits: int) -> np.ndarray:
    imgs = np.asarray(images)
    if imgs.ndim != 2 or imgs.shape[1] != features:
        raise ShapeError(f"image batch shape {imgs.shape} does not match H={features}")
    if imgs.size and (int(imgs.min()) < 0 or int(imgs.max()) >= (1 << bits)):
        raise DomainError(f"pixel values must be {bits}-bit quantized (got max {int(imgs.max())})")
    return imgs.astype(np.intp, copy=False)


# ---------------------------------------------------------------------------
# baseline
# ---------------------------------------------------------------------------


def generate_position_hypervector(source: UniformSource, dimension: int) -> PackedHypervector:
    if dimension < 1:
        raise DomainError(f"dimension must be >= 1 (got {dimension})")
    return PackedHypervector.from_bits((source.random(dimension) <= POSITION_THRESHOLD).astype(np.uint8))


@dataclass(frozen=True, eq=False)
class BaselineEncoderState:
    dimension: int
    features: int
    level_bits: int
    position_bits: np.ndarray  # (H, D) uint8
    level_base: np.ndarray  # (D,) float64 in [0, D]
    seed: int
    generator_kind: str
    level_bits_table: np.ndarray = field(init=False)  # (2^n + 1, D) uint8

    def __post_init__(self) -> None:
        if self.position_bits.shape != (self.features, self.dimension):
            raise ShapeError(f"position matrix {self.position_bits.shape} != ({self.features}, {self.dimension})")
        levels = 1 << self.level_bits
        thresholds = np.arange(levels + 1, dtype=np.float64) * self.dimension / levels
        table = (self.level_base[None, :] <= thresholds[:, None]).astype(np.uint8)
        object.__setattr__(self, "level_bits_table", table)
        for arr in (self.position_bits, self.level_base, table):
            arr.setflags(write=False)

    @property
    def levels(self) -> int:
        return 1 << self.level_bits

    def position(self, i: int) -> PackedHypervector:
        if not 0 <= i < self.features:
            raise DomainError(f"position index {i} outside [0, {self.features})")
        return PackedHypervector.from_bits(self.position_bits[i])


def build_baseline_state(config: EncoderConfig, features: int, iteration: int = 0) -> BaselineEncoderState:
    if features < 1:
        raise DomainError(f"feature count must be >= 1 (got {features})")
    seed = config.seed + iteration
    source = make_source(config, seed)
    d = config.dim
    positions = (source.random((features, d)) <= POSITION_THRESHOLD).astype(np.uint8)
    level_base = source.random(d) * d
    logger.debug("baseline state: H=%d D=%d n=%d seed=%d (%s)", features, d, config.level_bits, seed, config.generator_kind)
    return BaselineEncoderState(
        dimension=d,
        features=features,
        level_bits=config.level_bits,
        position_bits=positions,
        level_base=level_base,
        seed=seed,
        generator_kind=config.generator_kind,
    )


def generate_level_hypervector(state: BaselineEncoderState, k: int) -> PackedHypervector:
    if not 0 <= k <= state.levels:
        raise DomainError(f"level {k} outside [0, {state.levels}]")
    return PackedHypervector.from_bits(state.level_bits_table[k])


def _baseline_sums(state: BaselineEncoderState, img: np.ndarray) -> np.ndarray:
    # bind is XNOR, so the bipolar sum is H - 2 * popcount(L xor P) per dimension
    mismatches = np.bitwise_xor(state.level_bits_table[img], state.position_bits).sum(axis=0, dtype=np.int32)
    return (state.features - 2 * mismatches).astype(np.int32)


def encode_image_baseline(state: BaselineEncoderState, image: np.ndarray) -> AccumulatorVector:
    img = _check_image(image, state.features, state.level_bits)
    return AccumulatorVector(dimension=state.dimension, sums=_baseline_sums(state, img), contributions=state.features)


# ---------------------------------------------------------------------------
# uhd
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class UhdEncoderState:
    table: SobolTable
    ust: UnaryStreamTable
    comparator_path: str = "scalar"
    bank: Optional[np.ndarray] = None  # (H, 2^M, W) uint64

    @property
    def features(self) -> int:
        return self.table.shape[0]

    @property
    def dimension(self) -> int:
        return self.table.shape[1]

    @property
    def quantization_bits(self) -> int:
        return self.table.config.quantization_bits

    @property
    def stream_length(self) -> int:
        return 1 << self.quantization_bits


def build_uhd_state(config: EncoderConfig, features: int) -> UhdEncoderState:
    directions = load_direction_numbers(config.directions_path or None)
    table = build_sobol_table(
        SobolConfig(
            dimensions=features,
            points_per_dimension=config.dim,
            quantization_bits=config.quantization_bits,
            skip_initial_zero=config.skip_initial_zero,
        ),
        directions,
    )
    state = UhdEncoderState(table=table, ust=build_ust(config.quantization_bits), comparator_path=config.comparator_path)
    if config.use_level_bank:
        state = replace(state, bank=precompute_level_bank(state, budget_bytes=config.level_bank_budget_bytes))
    logger.debug("uhd state: H=%d D=%d M=%d path=%s bank=%s", features, config.dim, config.quantization_bits, config.comparator_path, state.bank is not None)
    return state


def level_bank_bytes(features: int, quantization_bits: int, dimension: int) -> int:
    return features * (1 << quantization_bits) * word_count(dimension) * 8


def precompute_level_bank(state: UhdEncoderState, budget_bytes: int = DEFAULT_BANK_BUDGET) -> np.ndarray:
    required = level_bank_bytes(state.features, state.quantization_bits, state.dimension)
    if required > budget_bytes:
        raise ResourceError(
            f"level bank needs {required} bytes, budget is {budget_bytes}",
            required_bytes=required,
        )
    values = state.table.values
    bank = np.stack([pack_bits(values <= v) for v in range(state.stream_length)], axis=1)
    bank.setflags(write=False)
    return bank


def _stream_words(state: UhdEncoderState) -> np.ndarray:
    if state.stream_length > GATE_MAX_STREAM_BITS:
        raise CapacityError(f"gate-level path holds streams up to {GATE_MAX_STREAM_BITS} bits (N={state.stream_length})")
    return np.array([s.word for s in state.ust.entries], dtype=np.uint64)


def _uhd_bits_scalar(state: UhdEncoderState, img: np.ndarray) -> np.ndarray:
    return state.table.values <= img[:, None]


def _uhd_bits_unary(state: UhdEncoderState, img: np.ndarray) -> np.ndarray:
    words = _stream_words(state)
    full = np.uint64((1 << state.stream_length) - 1)
    data = words[img][:, None]
    sobol = words[state.table.values]
    out = (data & sobol) | (~sobol & full)
    return out == full


def level_bits_uhd(state: UhdEncoderState, image: np.ndarray) -> np.ndarray:
    """(H, D) bit matrix of per-pixel level vectors on the configured comparator path."""
    img = _check_image(image, state.features, state.quantization_bits)
    if state.comparator_path == "unary":
        return _uhd_bits_unary(state, img)
    return _uhd_bits_scalar(state, img)


def _uhd_sums(state: UhdEncoderState, img: np.ndarray) -> np.ndarray:
    if state.bank is not None:
        ones = unpack_bits(state.bank[np.arange(state.features), img], state.dimension).sum(axis=0, dtype=np.int32)
    elif state.comparator_path == "unary":
        ones = _uhd_bits_unary(state, img).sum(axis=0, dtype=np.int32)
    else:
        ones = _uhd_bits_scalar(state, img).sum(axis=0, dtype=np.int32)
    return (2 * ones - state.features).astype(np.int32)


def encode_image_uhd(state: UhdEncoderState, image: np.ndarray) -> AccumulatorVector:
    img = _check_image(image, state.features, state.quantization_bits)
    return AccumulatorVector(dimension=state.dimension, sums=_uhd_sums(state, img), contributions=state.features)


# ---------------------------------------------------------------------------
# encoder facade
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BaselineEncoder:
    config: EncoderConfig
    state: BaselineEncoderState
    kind: str = "baseline"

    @property
    def features(self) -> int:
        return self.state.features

    @property
    def dimension(self) -> int:
        return self.state.dimension

    def encode(self, image: np.ndarray) -> AccumulatorVector:
        return encode_image_baseline(self.state, image)

    def encode_batch(self, images: np.ndarray) -> np.ndarray:
        imgs = _check_batch(images, self.features, self.state.level_bits)
        out = np.empty((imgs.shape[0], self.dimension), dtype=np.int32)
        for r, img in enumerate(imgs):
            out[r] = _baseline_sums(self.state, img)
        return out

    def ops_per_image(self) -> Dict[str, int]:
        h, d = self.features, self.dimension
        return {"comparisons": 0, "bind_ops": h, "accumulator_updates": h * d, "memory_fetches": 2 * h}

    def generation_ops(self) -> Dict[str, int]:
        d = self.dimension
        return {"comparisons": self.features * d + (self.state.levels + 1) * d}


@dataclass(frozen=True, eq=False)
class UhdEncoder:
    config: EncoderConfig
    state: UhdEncoderState
    kind: str = "uhd"

    @property
    def features(self) -> int:
        return self.state.features

    @property
    def dimension(self) -> int:
        return self.state.dimension

    def encode(self, image: np.ndarray) -> AccumulatorVector:
        return encode_image_uhd(self.state, image)

    def encode_batch(self, images: np.ndarray) -> np.ndarray:
        imgs = _check_batch(images, self.features, self.state.quantization_bits)
        out = np.empty((imgs.shape[0], self.dimension), dtype=np.int32)
        for r, img in enumerate(imgs):
            out[r] = _uhd_sums(self.state, img)
        return out

    def ops_per_image(self) -> Dict[str, int]:
        h, d = self.features, self.dimension
        if self.state.bank is not None:
            return {"comparisons": 0, "bind_ops": 0, "accumulator_updates": h * d, "memory_fetches": h}
        fetches = h + h * d if self.state.comparator_path == "unary" else h * d
        return {"comparisons": h * d, "bind_ops": 0, "accumulator_updates": h * d, "memory_fetches": fetches}

    def generation_ops(self) -> Dict[str, int]:
        if self.state.bank is None:
            return {}
        return {"comparisons": self.features * self.dimension * self.state.stream_length}


Encoder = BaselineEncoder | UhdEncoder


def build_encoder(config: EncoderConfig, features: int, iteration: int = 0) -> Encoder:
    """Fresh encoder for one training iteration.

    The baseline encoder's config records the effective seed (base_seed + iteration),
    so rebuilding from `encoder.config` with iteration 0 reproduces the same state.
    """
    if config.encoder == "baseline":
        effective = replace(config, seed=config.seed + iteration)
        return BaselineEncoder(config=effective, state=build_baseline_state(effective, features))
    return UhdEncoder(config=config, state=build_uhd_state(config, features))


def encoder_memory_bytes(encoder: Encoder) -> Dict[str, int]:
    """Bytes each pipeline keeps resident for encoding."""
    d = encoder.dimension
    h = encoder.features
    if isinstance(encoder, BaselineEncoder):
        vec = word_count(d) * 8
        positions = h * vec
        levels = (encoder.state.levels + 1) * vec
        return {"position_vectors": positions, "level_vectors": levels, "total": positions + levels}
    m = encoder.state.quantization_bits
    n = encoder.state.stream_length
    table = (h * d * m + 7) // 8
    ust = n * ((n + 7) // 8)
    bank = 0 if encoder.state.bank is None else int(encoder.state.bank.nbytes)
    return {"sobol_table": table, "ust": ust, "level_bank": bank, "total": table + ust + bank}
