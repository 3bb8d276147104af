"""
model.py

Single-pass class-hypervector training, cosine-similarity inference,
evaluation, iteration sweeps and the model file.

Model file (little-endian)
- b"UHD1", u32 version, u32 config_len, config_len bytes of UTF-8 "key=value" lines (sorted keys)
- u32 q, u32 D, then q serialized hypervectors (see hypervector.py)

Op counters are logical pipeline counts: what the modelled hardware does per
image. The direct and histogram training paths record the same values.
"""

from __future__ import annotations

import logging
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .data import Dataset, quantize_dataset
from .encoders import Encoder, EncoderConfig, UhdEncoder, build_encoder
from .errors import ConfigError, DomainError, FormatError, LogicError, ModelMismatchError, ShapeError, TrainingError
from .hypervector import PackedHypervector, hamming_matrix, pack_bits, word_count
from .storage import atomic_write_bytes

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"UHD1"
MODEL_VERSION = 1
U32 = struct.Struct("<I")

BUNDLING_MODES = ("raw", "per_image")
SIMILARITY_MODES = ("binary", "raw")
TRAINING_PATHS = ("auto", "direct", "histogram")
SWEEP_CHECKPOINTS = (1, 5, 20, 50, 75, 100)

CHUNK_IMAGES = 256


@dataclass
class OpCounters:
    comparisons: int = 0
    bind_ops: int = 0
    accumulator_updates: int = 0
    memory_fetches: int = 0
    binarize_windows: int = 0

    def record(self, ops: Dict[str, int], times: int = 1) -> None:
        for name, value in ops.items():
            inc = value * times
            if inc < 0:
                raise LogicError(f"op counter {name} cannot decrease (increment {inc})")
            setattr(self, name, getattr(self, name) + inc)

    def merge(self, other: "OpCounters") -> None:
        self.record(asdict(other))

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


@dataclass(frozen=True)
class ModelConfig:
    bundling: str = "raw"
    similarity: str = "binary"
    training_path: str = "auto"
    workers: int = 1

    def __post_init__(self) -> None:
        if self.bundling not in BUNDLING_MODES:
            raise ConfigError(f"unknown bundling {self.bundling!r} (expected raw or per_image)")
        if self.similarity not in SIMILARITY_MODES:
            raise ConfigError(f"unknown similarity {self.similarity!r} (expected binary or raw)")
        if self.training_path not in TRAINING_PATHS:
            raise ConfigError(f"unknown training_path {self.training_path!r}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1 (got {self.workers})")


@dataclass(frozen=True, eq=False)
class ClassModel:
    classes: np.ndarray  # (q, W) uint64, packed class hypervectors
    labels: Tuple[int, ...]
    encoder_config: EncoderConfig
    dimension: int
    features: int
    quantization_bits: int

    def __post_init__(self) -> None:
        q = len(self.labels)
        if q < 2:
            raise TrainingError(f"a model needs at least 2 classes (got {q})")
        if self.classes.shape != (q, word_count(self.dimension)):
            raise ShapeError(f"class matrix {self.classes.shape} does not hold {q} vectors of D={self.dimension}")
        if self.encoder_config.dim != self.dimension:
            raise ShapeError(f"encoder dim {self.encoder_config.dim} != model D={self.dimension}")
        self.classes.setflags(write=False)

    @property
    def num_classes(self) -> int:
        return len(self.labels)

    def vector(self, c: int) -> PackedHypervector:
        return PackedHypervector(dimension=self.dimension, words=self.classes[c].copy())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ClassModel):
            return NotImplemented
        return (
            self.labels == other.labels
            and self.encoder_config == other.encoder_config
            and self.dimension == other.dimension
            and self.features == other.features
            and self.quantization_bits == other.quantization_bits
            and bool(np.array_equal(self.classes, other.classes))
        )

    def __hash__(self) -> int:
        return hash((self.labels, self.dimension, self.classes.tobytes()))


def _prepare(ds: Dataset, encoder: Encoder) -> Dataset:
    if ds.features != encoder.features:
        raise ModelMismatchError(f"{ds.name} has H={ds.features}, encoder expects H={encoder.features}")
    try:
        return quantize_dataset(ds, encoder.config.input_bits)
    except DomainError as e:
        raise ModelMismatchError(str(e)) from e


def _chunks(n: int) -> List[Tuple[int, int]]:
    return [(lo, min(lo + CHUNK_IMAGES, n)) for lo in range(0, n, CHUNK_IMAGES)]


def _map_chunks(fn, n: int, workers: int) -> list:
    spans = _chunks(n)
    if workers == 1 or len(spans) <= 1:
        return [fn(lo, hi) for lo, hi in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: fn(*s), spans))


def _class_count(ds: Dataset) -> int:
    q = ds.classes
    if q < 2:
        raise TrainingError(f"{ds.name}: training needs at least 2 classes (got {q})")
    counts = ds.class_counts()
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise TrainingError(f"{ds.name}: class {int(empty[0])} has no training images")
    return q


def _finish(sums: np.ndarray, encoder: Encoder, q: int) -> ClassModel:
    return ClassModel(
        classes=pack_bits(sums >= 0),
        labels=tuple(range(q)),
        encoder_config=encoder.config,
        dimension=encoder.dimension,
        features=encoder.features,
        quantization_bits=encoder.config.input_bits,
    )


def _record_training(counters: Optional[OpCounters], encoder: Encoder, n: int, q: int, bundling: str) -> None:
    if counters is None:
        return
    counters.record(encoder.generation_ops())
    counters.record(encoder.ops_per_image(), times=n)
    windows = q * encoder.dimension
    if bundling == "per_image":
        windows += n * encoder.dimension
    counters.record({"binarize_windows": windows})


def train_direct(ds: Dataset, encoder: Encoder, config: ModelConfig = ModelConfig(), counters: Optional[OpCounters] = None) -> ClassModel:
    ds = _prepare(ds, encoder)
    q = _class_count(ds)
    images, labels = ds.images, ds.labels

    def class_sums(lo: int, hi: int) -> np.ndarray:
        enc = encoder.encode_batch(images[lo:hi]).astype(np.int64)
        if config.bundling == "per_image":
            enc = np.where(enc >= 0, 1, -1)
        part = np.zeros((q, encoder.dimension), dtype=np.int64)
        np.add.at(part, labels[lo:hi], enc)
        return part

    parts = _map_chunks(class_sums, len(ds), config.workers)
    sums = np.sum(parts, axis=0) if parts else np.zeros((q, encoder.dimension), dtype=np.int64)
    _record_training(counters, encoder, len(ds), q, config.bundling)
    return _finish(sums, encoder, q)


def _pixel_histograms(ds: Dataset, q: int, levels: int) -> np.ndarray:
    """(q, H, levels) counts of each pixel value per class."""
    flat = ds.labels[:, None] * (ds.features * levels) + np.arange(ds.features)[None, :] * levels + ds.images
    return np.bincount(flat.ravel(), minlength=q * ds.features * levels).reshape(q, ds.features, levels)


def train_fast_histogram(ds: Dataset, encoder: Encoder, config: ModelConfig = ModelConfig(), counters: Optional[OpCounters] = None) -> ClassModel:
    """Class sums from per-class pixel histograms; bit-identical to train_direct with raw bundling."""
    if config.bundling != "raw":
        raise ConfigError("histogram training supports raw bundling only")
    ds = _prepare(ds, encoder)
    q = _class_count(ds)
    levels = 1 << encoder.config.input_bits
    hist = _pixel_histograms(ds, q, levels)
    n_c = ds.class_counts().astype(np.int64)
    sums = np.zeros((q, encoder.dimension), dtype=np.int64)

    if isinstance(encoder, UhdEncoder):
        table = encoder.state.table.values.astype(np.intp)
        # at_least[c, i, t] = images of class c whose pixel i is >= t
        at_least = np.cumsum(hist[:, :, ::-1], axis=2)[:, :, ::-1]
        for c in range(q):
            ones = np.take_along_axis(at_least[c], table, axis=1).sum(axis=0)
            sums[c] = 2 * ones - ds.features * n_c[c]
    else:
        st = encoder.state
        level_bipolar = st.level_bits_table[:levels].astype(np.int64) * 2 - 1
        pos_bipolar = st.position_bits.astype(np.int64) * 2 - 1
        for c in range(q):
            sums[c] = ((hist[c] @ level_bipolar) * pos_bipolar).sum(axis=0)

    _record_training(counters, encoder, len(ds), q, "raw")
    return _finish(sums, encoder, q)


def train(ds: Dataset, encoder: Encoder, config: ModelConfig = ModelConfig(), counters: Optional[OpCounters] = None) -> ClassModel:
    path = config.training_path
    if path == "auto":
        path = "histogram" if config.bundling == "raw" else "direct"
    t0 = time.perf_counter()
    if path == "histogram":
        model = train_fast_histogram(ds, encoder, config, counters)
    else:
        model = train_direct(ds, encoder, config, counters)
    logger.info(
        "Trained %s D=%d on %s (n=%d, %s path) in %.2fs",
        encoder.kind,
        encoder.dimension,
        ds.name,
        len(ds),
        path,
        time.perf_counter() - t0,
    )
    return model


def encoder_for(model: ClassModel) -> Encoder:
    return build_encoder(model.encoder_config, model.features)


def _decide(model: ClassModel, sums: np.ndarray, similarity: str) -> Tuple[np.ndarray, np.ndarray]:
    """(n, D) test sums -> (predicted class indices, (n, q) cosine scores); ties go to the lowest index."""
    d = model.dimension
    if similarity == "raw":
        bipolar = np.stack([model.vector(c).bipolar() for c in range(model.num_classes)]).astype(np.int64)
        dots = sums.astype(np.int64) @ bipolar.T
        norms = np.sqrt((sums.astype(np.float64) ** 2).sum(axis=1))[:, None] * np.sqrt(d)
        scores = np.divide(dots, norms, out=np.zeros(dots.shape, dtype=np.float64), where=norms > 0)
        # class vectors share one norm, so the integer dot decides
        return np.argmax(dots, axis=1), scores
    dist = hamming_matrix(pack_bits(sums >= 0), model.classes)
    return np.argmin(dist, axis=1), (d - 2 * dist) / d


def _check_input(model: ClassModel, images: np.ndarray) -> None:
    if images.shape[-1] != model.features:
        raise ModelMismatchError(f"input has H={images.shape[-1]}, model expects H={model.features}")


def predict(
    model: ClassModel,
    image: np.ndarray,
    encoder: Optional[Encoder] = None,
    similarity: str = "binary",
) -> Tuple[int, np.ndarray]:
    img = np.asarray(image)
    _check_input(model, img)
    if img.size and int(img.max()) >= (1 << model.quantization_bits):
        raise ModelMismatchError(f"pixel {int(img.max())} exceeds the model's {model.quantization_bits}-bit quantization")
    enc = encoder or encoder_for(model)
    sums = enc.encode(img).sums[None, :]
    label, scores = _decide(model, sums, similarity)
    return model.labels[int(label[0])], scores[0]


@dataclass
class EvalReport:
    accuracy: float
    correct: int
    total: int
    confusion: np.ndarray  # (q, q), rows true label, columns prediction
    counters: OpCounters = field(default_factory=OpCounters)
    seconds: float = 0.0

    def per_class_accuracy(self) -> List[Optional[float]]:
        out: List[Optional[float]] = []
        for c in range(self.confusion.shape[0]):
            row = int(self.confusion[c].sum())
            out.append(None if row == 0 else 100.0 * int(self.confusion[c, c]) / row)
        return out

    def to_dict(self) -> Dict[str, object]:
        return {
            "accuracy": self.accuracy,
            "correct": self.correct,
            "total": self.total,
            "confusion": self.confusion.tolist(),
            "per_class_accuracy": self.per_class_accuracy(),
            "counters": self.counters.to_dict(),
            "seconds": round(self.seconds, 3),
        }


def evaluate(
    model: ClassModel,
    ds: Dataset,
    encoder: Optional[Encoder] = None,
    config: ModelConfig = ModelConfig(),
) -> EvalReport:
    if len(ds) == 0:
        raise DomainError(f"{ds.name}: cannot evaluate on an empty test set")
    _check_input(model, ds.images)
    if int(ds.labels.max()) >= model.num_classes:
        raise ModelMismatchError(f"{ds.name}: label {int(ds.labels.max())} unknown to a {model.num_classes}-class model")
    enc = encoder or encoder_for(model)
    ds = _prepare(ds, enc)
    t0 = time.perf_counter()

    def decide(lo: int, hi: int) -> np.ndarray:
        return _decide(model, enc.encode_batch(ds.images[lo:hi]), config.similarity)[0]

    preds = np.concatenate(_map_chunks(decide, len(ds), config.workers))
    q = model.num_classes
    confusion = np.zeros((q, q), dtype=np.int64)
    np.add.at(confusion, (ds.labels, preds), 1)
    correct = int(np.trace(confusion))

    counters = OpCounters()
    counters.record(enc.ops_per_image(), times=len(ds))
    if config.similarity == "binary":
        counters.record({"binarize_windows": enc.dimension}, times=len(ds))

    report = EvalReport(
        accuracy=100.0 * correct / len(ds),
        correct=correct,
        total=len(ds),
        confusion=confusion,
        counters=counters,
        seconds=time.perf_counter() - t0,
    )
    logger.info("Evaluated %s on %s: %.2f%% (%d/%d)", enc.kind, ds.name, report.accuracy, correct, len(ds))
    return report


@dataclass
class SweepResult:
    encoder: str
    dimension: int
    trace: List[Tuple[int, int, float]]  # (iteration, seed, accuracy %)
    counters: OpCounters

    @property
    def accuracies(self) -> List[float]:
        return [acc for _, _, acc in self.trace]

    def averages(self) -> Dict[int, float]:
        accs = self.accuracies
        return {k: float(np.mean(accs[:k])) for k in SWEEP_CHECKPOINTS if k <= len(accs)}

    def best(self) -> Tuple[int, int, float]:
        return max(self.trace, key=lambda t: (t[2], -t[0]))

    def stddev(self) -> float:
        accs = self.accuracies
        return float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0

    def to_dict(self) -> Dict[str, object]:
        it, seed, acc = self.best()
        return {
            "encoder": self.encoder,
            "D": self.dimension,
            "trace": [{"iteration": i, "seed": s, "accuracy": a} for i, s, a in self.trace],
            "averages": {str(k): v for k, v in self.averages().items()},
            "best": {"iteration": it, "seed": seed, "accuracy": acc},
            "stddev": self.stddev(),
            "counters": self.counters.to_dict(),
        }


def iteration_sweep(
    train_ds: Dataset,
    test_ds: Dataset,
    encoder_config: EncoderConfig,
    iterations: int,
    config: ModelConfig = ModelConfig(),
) -> SweepResult:
    """Train and evaluate once per iteration i = 1..iterations with seed base_seed + i."""
    if iterations < 1:
        raise DomainError(f"iterations must be >= 1 (got {iterations})")
    counters = OpCounters()
    trace: List[Tuple[int, int, float]] = []
    cached: Optional[float] = None
    for i in range(1, iterations + 1):
        if encoder_config.encoder == "uhd" and cached is not None:
            # uHD encoding has no random state: every iteration reproduces iteration 1
            trace.append((i, encoder_config.seed, cached))
            continue
        encoder = build_encoder(encoder_config, train_ds.features, iteration=i)
        model = train(train_ds, encoder, config, counters)
        report = evaluate(model, test_ds, encoder, config)
        counters.merge(report.counters)
        trace.append((i, encoder.config.seed, report.accuracy))
        if encoder_config.encoder == "uhd":
            cached = report.accuracy
        logger.info("Sweep %s D=%d iteration %d/%d: %.2f%%", encoder.kind, encoder.dimension, i, iterations, report.accuracy)
    return SweepResult(encoder=encoder_config.encoder, dimension=encoder_config.dim, trace=trace, counters=counters)


# ---------------------------------------------------------------------------
# model file
# ---------------------------------------------------------------------------


def _config_text(model: ClassModel) -> str:
    items = dict(model.encoder_config.to_items())
    items["features"] = str(model.features)
    items["input_bits"] = str(model.quantization_bits)
    items["labels"] = ",".join(str(x) for x in model.labels)
    return "".join(f"{k}={v}\n" for k, v in sorted(items.items()))


def model_to_bytes(model: ClassModel) -> bytes:
    cfg = _config_text(model).encode("utf-8")
    out = [MODEL_MAGIC, U32.pack(MODEL_VERSION), U32.pack(len(cfg)), cfg]
    out.append(U32.pack(model.num_classes))
    out.append(U32.pack(model.dimension))
    out.extend(model.vector(c).to_bytes() for c in range(model.num_classes))
    return b"".join(out)


def save_model(path: Path, model: ClassModel) -> None:
    atomic_write_bytes(Path(path), model_to_bytes(model))


def _u32(buf: bytes, offset: int, what: str) -> Tuple[int, int]:
    if offset + U32.size > len(buf):
        raise FormatError(f"truncated model file: missing {what} at byte offset {offset}")
    return U32.unpack_from(buf, offset)[0], offset + U32.size


def model_from_bytes(buf: bytes, source: str = "<bytes>") -> ClassModel:
    if buf[:4] != MODEL_MAGIC:
        raise FormatError(f"{source}: bad magic {buf[:4]!r} at byte offset 0 (expected {MODEL_MAGIC!r})")
    version, off = _u32(buf, 4, "version")
    if version != MODEL_VERSION:
        raise FormatError(f"{source}: unsupported model version {version} at byte offset 4")
    cfg_len, off = _u32(buf, off, "config length")
    if off + cfg_len > len(buf):
        raise FormatError(f"{source}: truncated config block at byte offset {off}")
    try:
        text = buf[off : off + cfg_len].decode("utf-8")
    except UnicodeDecodeError as e:
        raise FormatError(f"{source}: config block is not UTF-8 (byte offset {off})") from e
    off += cfg_len
    items: Dict[str, str] = {}
    for line in text.splitlines():
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"{source}: malformed config line {line!r}")
        items[key] = value
    q, off = _u32(buf, off, "class count")
    d, off = _u32(buf, off, "dimension")
    vectors = []
    for _ in range(q):
        hv, off = PackedHypervector.from_bytes(buf, off)
        if hv.dimension != d:
            raise FormatError(f"{source}: class vector D={hv.dimension} != header D={d}")
        vectors.append(hv.words)
    if off != len(buf):
        raise FormatError(f"{source}: {len(buf) - off} trailing bytes at byte offset {off}")
    try:
        encoder_config = EncoderConfig.from_items(items)
        labels = tuple(int(x) for x in items["labels"].split(",") if x)
        features = int(items["features"])
        input_bits = int(items["input_bits"])
    except (ConfigError, KeyError, ValueError) as e:
        raise FormatError(f"{source}: invalid config block: {e}") from e
    if len(labels) != q:
        raise FormatError(f"{source}: {len(labels)} labels for {q} class vectors")
    words = np.stack(vectors) if vectors else np.zeros((0, word_count(max(d, 1))), dtype=np.uint64)
    try:
        return ClassModel(
            classes=words,
            labels=labels,
            encoder_config=encoder_config,
            dimension=d,
            features=features,
            quantization_bits=input_bits,
        )
    except (TrainingError, ShapeError) as e:
        raise FormatError(f"{source}: {e}") from e


def load_model(path: Path) -> ClassModel:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"model file not found: {path}")
    return model_from_bytes(path.read_bytes(), source=str(path))


def summarize_counters(baseline: OpCounters, uhd: OpCounters) -> Dict[str, Optional[float]]:
    """uHD / baseline ratio per counter (None where the baseline count is zero)."""
    out: Dict[str, Optional[float]] = {}
    for f in fields(OpCounters):
        b = getattr(baseline, f.name)
        out[f.name] = None if b == 0 else getattr(uhd, f.name) / b
    return out
