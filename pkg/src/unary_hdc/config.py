"""
config.py

RunConfig: the sectioned key=value run configuration.

    [dataset]  path, format (idx|csv), train_limit, test_limit, subsample_seed
    [encoder]  see encoders.EncoderConfig
    [model]    bundling (raw|per_image), similarity (binary|raw), training_path (auto|direct|histogram)
    [run]      seed, workers, iterations, dims
    [output]   out_dir

File values are overridden by CLI flags; `to_ini()` emits the fully resolved
config, which reproduces its run exactly. The first entry of [run] dims is the
encoder dimension: either key fills in the other when it is absent.
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from .encoders import EncoderConfig
from .errors import ConfigError
from .model import ModelConfig

SECTIONS = ("dataset", "encoder", "model", "run", "output")
DATASET_FORMATS = ("idx", "csv")
DEFAULT_DIMS = (1024, 2048, 8192)


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


@dataclass(frozen=True)
class DatasetConfig:
    path: str = ""
    format: str = "idx"
    train_limit: int = 0  # per class, 0 = all
    test_limit: int = 0
    subsample_seed: int = 0

    def __post_init__(self) -> None:
        if self.format not in DATASET_FORMATS:
            raise ConfigError(f"dataset.format must be idx or csv (got {self.format!r})")
        if self.train_limit < 0 or self.test_limit < 0:
            raise ConfigError("dataset limits must be >= 0")


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    workers: int = field(default_factory=default_workers)
    iterations: int = 1
    dims: Tuple[int, ...] = DEFAULT_DIMS

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError(f"run.workers must be >= 1 (got {self.workers})")
        if self.iterations < 1:
            raise ConfigError(f"run.iterations must be >= 1 (got {self.iterations})")
        if not self.dims or any(d < 1 for d in self.dims):
            raise ConfigError(f"run.dims must be positive integers (got {list(self.dims)})")


@dataclass(frozen=True)
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    run: RunSection = field(default_factory=RunSection)
    out_dir: str = "out"

    def __post_init__(self) -> None:
        if self.run.dims[0] != self.encoder.dim:
            raise ConfigError(f"run.dims must lead with encoder.dim={self.encoder.dim} (got {list(self.run.dims)})")

    def model_config(self) -> ModelConfig:
        return replace(self.model, workers=self.run.workers)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp["dataset"] = {
            "path": self.dataset.path,
            "format": self.dataset.format,
            "train_limit": str(self.dataset.train_limit),
            "test_limit": str(self.dataset.test_limit),
            "subsample_seed": str(self.dataset.subsample_seed),
        }
        cp["encoder"] = dict(self.encoder.to_items())
        cp["model"] = {
            "bundling": self.model.bundling,
            "similarity": self.model.similarity,
            "training_path": self.model.training_path,
        }
        cp["run"] = {
            "seed": str(self.run.seed),
            "workers": str(self.run.workers),
            "iterations": str(self.run.iterations),
            "dims": ",".join(str(d) for d in self.run.dims),
        }
        cp["output"] = {"out_dir": self.out_dir}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"[{section}] {key}: expected an integer (got {raw!r})") from e


def parse_dims(raw: str) -> Tuple[int, ...]:
    """'1K,2K,8192' -> (1024, 2048, 8192)."""
    out = []
    for tok in raw.split(","):
        tok = tok.strip()
        if not tok:
            continue
        scale = 1
        if tok[-1] in "kK":
            tok, scale = tok[:-1], 1024
        try:
            out.append(int(tok) * scale)
        except ValueError as e:
            raise ConfigError(f"bad dimension {tok!r} in {raw!r}") from e
    if not out:
        raise ConfigError(f"no dimensions in {raw!r}")
    return tuple(out)


def leading_dims(dim: int) -> Tuple[int, ...]:
    """Default dims list with `dim` first."""
    return (dim,) + tuple(d for d in DEFAULT_DIMS if d != dim)


def _unknown(section: str, got: Dict[str, str], known: Tuple[str, ...]) -> None:
    extra = sorted(set(got) - set(known))
    if extra:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(extra)}")


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: {e}") from e
    extra = sorted(set(cp.sections()) - set(SECTIONS))
    if extra:
        raise ConfigError(f"{source}: unknown section(s): {', '.join(extra)}")

    ds = dict(cp["dataset"]) if cp.has_section("dataset") else {}
    _unknown("dataset", ds, ("path", "format", "train_limit", "test_limit", "subsample_seed"))
    dataset = DatasetConfig(
        path=ds.get("path", ""),
        format=ds.get("format", "idx"),
        train_limit=_int("dataset", "train_limit", ds.get("train_limit", "0")),
        test_limit=_int("dataset", "test_limit", ds.get("test_limit", "0")),
        subsample_seed=_int("dataset", "subsample_seed", ds.get("subsample_seed", "0")),
    )

    rn = dict(cp["run"]) if cp.has_section("run") else {}
    _unknown("run", rn, ("seed", "workers", "iterations", "dims"))
    dims = parse_dims(rn["dims"]) if "dims" in rn else None

    enc = dict(cp["encoder"]) if cp.has_section("encoder") else {}
    if "seed" not in enc and "seed" in rn:
        enc["seed"] = rn["seed"]
    if "dim" not in enc and dims is not None:
        enc["dim"] = str(dims[0])
    _unknown("encoder", enc, tuple(k for k, _ in EncoderConfig().to_items()))
    encoder = EncoderConfig.from_items(enc)
    if dims is None:
        dims = leading_dims(encoder.dim)
    elif dims[0] != encoder.dim:
        raise ConfigError(f"{source}: [encoder] dim = {encoder.dim} disagrees with [run] dims = {rn['dims']} (first entry is the encoder dimension)")

    md = dict(cp["model"]) if cp.has_section("model") else {}
    _unknown("model", md, ("bundling", "similarity", "training_path"))
    model = ModelConfig(
        bundling=md.get("bundling", "raw"),
        similarity=md.get("similarity", "binary"),
        training_path=md.get("training_path", "auto"),
    )

    run = RunSection(
        seed=_int("run", "seed", rn.get("seed", "0")),
        workers=_int("run", "workers", rn["workers"]) if "workers" in rn else default_workers(),
        iterations=_int("run", "iterations", rn.get("iterations", "1")),
        dims=dims,
    )

    out = dict(cp["output"]) if cp.has_section("output") else {}
    _unknown("output", out, ("out_dir",))
    return RunConfig(dataset=dataset, encoder=encoder, model=model, run=run, out_dir=out.get("out_dir", "out"))


def load_run_config(path: Optional[Path]) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_run_config(p.read_text(encoding="utf-8"), source=str(p))


def apply_overrides(cfg: RunConfig, **overrides: Any) -> RunConfig:
    """Apply CLI flag values (None = not given) on top of a loaded config."""
    o = {k: v for k, v in overrides.items() if v is not None}
    dataset = cfg.dataset
    if "dataset" in o:
        dataset = replace(dataset, path=str(o["dataset"]))
    if "train_limit" in o:
        dataset = replace(dataset, train_limit=o["train_limit"])
    if "test_limit" in o:
        dataset = replace(dataset, test_limit=o["test_limit"])

    run = cfg.run
    if "seed" in o:
        run = replace(run, seed=o["seed"])
    if "workers" in o:
        run = replace(run, workers=o["workers"])
    if "iters" in o:
        run = replace(run, iterations=o["iters"])
    if "dims" in o:
        run = replace(run, dims=o["dims"])

    encoder = cfg.encoder
    if "encoder" in o:
        encoder = replace(encoder, encoder=o["encoder"])
    if "dims" in o:
        encoder = replace(encoder, dim=o["dims"][0])
    if "seed" in o:
        encoder = replace(encoder, seed=o["seed"])

    return replace(cfg, dataset=dataset, run=run, encoder=encoder, out_dir=str(o.get("out", cfg.out_dir)))
