"""
data.py

Dataset ingestion for the classifiers.

IDX (MNIST distribution format, big-endian, optionally gzip-compressed)
- images: u32 magic 0x00000803, u32 n, u32 rows, u32 cols, n*rows*cols u8 pixels (row-major)
- labels: u32 magic 0x00000801, u32 n, n u8 labels

CSV
- one row per image: label,p0,p1,...,p{H-1}; pixels in [0, 255]
- an optional header row (first cell not an integer) is skipped
- colour sources must be converted to grayscale first (tools/to_grayscale_csv.py)
"""

from __future__ import annotations

import csv
import gzip
import logging
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .errors import DomainError, FormatError, TrainingError

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
IDX_WORD = struct.Struct(">I")

# (train, test) file stems of the public MNIST-format distributions
IDX_SPLITS = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass(frozen=True, eq=False)
class Dataset:
    images: np.ndarray  # (n, H) uint8
    labels: np.ndarray  # (n,) int64
    name: str = "dataset"
    bits: int = 8
    num_classes: Optional[int] = None

    def __post_init__(self) -> None:
        if self.images.ndim != 2:
            raise FormatError(f"{self.name}: images must be a 2-D (n, H) array, got shape {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise FormatError(f"{self.name}: {self.labels.shape[0]} labels for {self.images.shape[0]} images")
        if self.labels.size and int(self.labels.min()) < 0:
            raise FormatError(f"{self.name}: negative label {int(self.labels.min())}")
        if self.num_classes is not None and self.labels.size and int(self.labels.max()) >= self.num_classes:
            raise FormatError(f"{self.name}: label {int(self.labels.max())} outside [0, {self.num_classes})")
        self.images.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def features(self) -> int:
        return int(self.images.shape[1])

    @property
    def classes(self) -> int:
        if self.num_classes is not None:
            return self.num_classes
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.classes)

    def take(self, indices: np.ndarray, name: Optional[str] = None) -> "Dataset":
        return replace(
            self,
            images=self.images[indices],
            labels=self.labels[indices],
            name=name or self.name,
            num_classes=self.classes,
        )


def _open(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return path.open("rb")


def _read_idx(path: Path, magic: int, ndims: int) -> Tuple[Tuple[int, ...], bytes]:
    if not path.is_file():
        raise FormatError(f"file not found: {path}")
    with _open(path) as f:
        raw = f.read()
    header = 4 * (1 + ndims)
    if len(raw) < header:
        raise FormatError(f"{path}: truncated IDX header at byte offset {len(raw)}")
    (got,) = IDX_WORD.unpack_from(raw, 0)
    if got != magic:
        raise FormatError(f"{path}: bad magic 0x{got:08x} at byte offset 0 (expected 0x{magic:08x})")
    dims = tuple(IDX_WORD.unpack_from(raw, 4 * (k + 1))[0] for k in range(ndims))
    size = int(np.prod(dims, dtype=np.int64))
    if len(raw) - header < size:
        raise FormatError(f"{path}: payload truncated at byte offset {len(raw)} (expected {header + size})")
    if len(raw) - header > size:
        raise FormatError(f"{path}: trailing data at byte offset {header + size} ({len(raw) - header - size} extra bytes)")
    return dims, raw[header : header + size]


def load_idx(images_path: Path, labels_path: Path, name: Optional[str] = None) -> Dataset:
    images_path = Path(images_path)
    labels_path = Path(labels_path)
    (n, rows, cols), pixels = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    (n_labels,), label_bytes = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if n_labels != n:
        raise FormatError(f"{labels_path}: label count {n_labels} at byte offset 4 does not match {n} images in {images_path}")
    images = np.frombuffer(pixels, dtype=np.uint8).reshape(n, rows * cols).copy()
    labels = np.frombuffer(label_bytes, dtype=np.uint8).astype(np.int64)
    logger.info("Loaded %s: n=%d H=%d", images_path.name, n, rows * cols)
    return Dataset(images=images, labels=labels, name=name or images_path.stem)


def _int_cell(cell: str) -> Optional[int]:
    try:
        return int(cell.strip())
    except ValueError:
        return None


def load_csv(path: Path, name: Optional[str] = None) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"file not found: {path}")
    labels: List[int] = []
    rows: List[List[int]] = []
    width: Optional[int] = None
    with path.open("r", encoding="utf-8", newline="") as f:
        for rowno, row in enumerate(csv.reader(f), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if rowno == 1 and _int_cell(row[0]) is None:
                continue
            values = [_int_cell(c) for c in row]
            if any(v is None for v in values):
                bad = next(c for c, v in zip(row, values) if v is None)
                raise FormatError(f"{path}: row {rowno}: non-numeric cell {bad!r}")
            if len(values) < 2:
                raise FormatError(f"{path}: row {rowno}: expected a label and at least one pixel")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise FormatError(f"{path}: row {rowno}: {len(values) - 1} pixels, expected {width - 1}")
            pix = values[1:]
            if min(pix) < 0 or max(pix) > 255:
                raise FormatError(f"{path}: row {rowno}: pixel outside [0, 255]")
            if values[0] < 0:
                raise FormatError(f"{path}: row {rowno}: negative label {values[0]}")
            labels.append(values[0])
            rows.append(pix)
    h = (width - 1) if width else 0
    images = np.asarray(rows, dtype=np.uint8).reshape(len(rows), h)
    logger.info("Loaded %s: n=%d H=%d", path.name, len(rows), h)
    return Dataset(images=images, labels=np.asarray(labels, dtype=np.int64), name=name or path.stem)


def _find_idx(directory: Path, stem: str) -> Path:
    for candidate in (directory / stem, directory / f"{stem}.gz"):
        if candidate.is_file():
            return candidate
    raise FormatError(f"file not found: {directory / stem}[.gz]")


def split_available(path: Path, split: str, fmt: str = "idx") -> bool:
    path = Path(path)
    if path.is_file():
        return True
    if not path.is_dir():
        return False
    if fmt == "csv":
        return (path / f"{split}.csv").is_file()
    return all((path / s).is_file() or (path / f"{s}.gz").is_file() for s in IDX_SPLITS[split])


def load_split(path: Path, split: str, fmt: str = "idx") -> Dataset:
    """Load the train or test split from a dataset directory (MNIST IDX files or train.csv/test.csv)."""
    if split not in IDX_SPLITS:
        raise DomainError(f"unknown split {split!r}")
    path = Path(path)
    if not path.exists():
        raise FormatError(f"dataset path not found: {path}")
    if path.is_file():
        return load_csv(path, name=f"{path.stem}")
    if fmt == "csv":
        return load_csv(path / f"{split}.csv", name=f"{path.name}-{split}")
    images_stem, labels_stem = IDX_SPLITS[split]
    return load_idx(_find_idx(path, images_stem), _find_idx(path, labels_stem), name=f"{path.name}-{split}")


def quantize_dataset(ds: Dataset, bits: int) -> Dataset:
    """Keep the top `bits` bits of every pixel; idempotent at the same width."""
    if not 1 <= bits <= 8:
        raise DomainError(f"quantization bits must be in [1, 8] (got {bits})")
    if bits > ds.bits:
        raise DomainError(f"{ds.name} is already quantized to {ds.bits} bits; cannot widen to {bits}")
    if bits == ds.bits:
        return ds
    images = (ds.images >> (ds.bits - bits)).astype(np.uint8)
    return replace(ds, images=images, bits=bits, num_classes=ds.num_classes)


def subsample(ds: Dataset, per_class_limit: int, seed: int = 0) -> Dataset:
    """Deterministic stratified subsample; each class keeps min(limit, size) images in original order."""
    if per_class_limit < 1:
        raise DomainError(f"per_class_limit must be >= 1 (got {per_class_limit})")
    rng = np.random.default_rng(seed)
    keep: List[np.ndarray] = []
    for c in range(ds.classes):
        idx = np.flatnonzero(ds.labels == c)
        if idx.size == 0:
            raise TrainingError(f"{ds.name}: class {c} has no samples to subsample")
        if idx.size > per_class_limit:
            idx = np.sort(rng.choice(idx, size=per_class_limit, replace=False))
        keep.append(idx)
    indices = np.sort(np.concatenate(keep)) if keep else np.zeros(0, dtype=np.int64)
    return ds.take(indices, name=f"{ds.name}[{per_class_limit}/class]")
