from pathlib import Path

import pytest

from unary_hdc.config import DEFAULT_DIMS, RunConfig, RunSection, apply_overrides, load_run_config, parse_dims, parse_run_config
from unary_hdc.encoders import EncoderConfig
from unary_hdc.errors import ConfigError

REPO_CONFIG = Path(__file__).resolve().parents[1] / "config"


@pytest.mark.parametrize(
    "raw,expected",
    [("1K,2K,8K", (1024, 2048, 8192)), ("1024", (1024,)), (" 512 , 2k ", (512, 2048))],
)
def test_parse_dims(raw, expected):
    assert parse_dims(raw) == expected


@pytest.mark.parametrize("raw", ["", "1M", ",", "K"])
def test_parse_dims_rejects(raw):
    with pytest.raises(ConfigError):
        parse_dims(raw)


def test_sections_and_defaults():
    cfg = parse_run_config(
        """
[dataset]
path = data/mnist
train_limit = 50

[encoder]
encoder = baseline
dim = 2048
generator_kind = lfsr

[model]
bundling = per_image

[run]
seed = 7
workers = 3
dims = 2K,8K
"""
    )
    assert cfg.dataset.path == "data/mnist"
    assert cfg.dataset.train_limit == 50
    assert cfg.encoder.encoder == "baseline"
    assert cfg.encoder.seed == 7
    assert cfg.encoder.generator_kind == "lfsr"
    assert cfg.model.bundling == "per_image"
    assert cfg.run.dims == (2048, 8192)
    assert cfg.model_config().workers == 3
    assert cfg.out_dir == "out"


def test_encoder_seed_wins_over_run_seed():
    cfg = parse_run_config("[encoder]\nseed = 3\n[run]\nseed = 9\n")
    assert cfg.encoder.seed == 3
    assert cfg.run.seed == 9


@pytest.mark.parametrize(
    "text,needle",
    [
        ("[datasets]\npath = x\n", "unknown section"),
        ("[encoder]\ndimension = 5\n", "unknown key"),
        ("[run]\nworkers = many\n", "workers"),
        ("[run]\nworkers = 0\n", "workers"),
        ("[dataset]\nformat = parquet\n", "format"),
        ("[encoder]\nencoder = quantum\n", "quantum"),
        ("no section header\n", "<config>"),
    ],
)
def test_bad_configs(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_run_config(text)


def test_to_ini_reproduces_config():
    cfg = RunConfig(encoder=EncoderConfig(encoder="baseline", dim=512, seed=4, generator_kind="lfsr"), run=RunSection(dims=(512, 1024)))
    cfg = apply_overrides(cfg, dataset="data/fashion", iters=20, workers=2, train_limit=10)
    assert parse_run_config(cfg.to_ini()) == cfg


def test_overrides():
    base = parse_run_config("[encoder]\ndim = 1024\n[run]\nseed = 1\n")
    cfg = apply_overrides(base, encoder="baseline", dims=(2048, 8192), seed=5, out="elsewhere", iters=None)
    assert cfg.encoder.encoder == "baseline"
    assert cfg.encoder.dim == 2048
    assert cfg.run.dims == (2048, 8192)
    assert cfg.encoder.seed == 5
    assert cfg.run.seed == 5
    assert cfg.run.iterations == 1
    assert cfg.out_dir == "elsewhere"
    assert apply_overrides(base) == base


def test_load_run_config(tmp_path):
    assert load_run_config(None) == RunConfig()
    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "missing.ini")


@pytest.mark.parametrize("name", ["mnist_uhd_1k.ini", "compare_mnist.ini"])
def test_shipped_configs_parse(name):
    cfg = load_run_config(REPO_CONFIG / name)
    assert cfg.dataset.path == "data/mnist"
    assert cfg.encoder.quantization_bits == 4


def test_run_dims_sets_encoder_dim():
    cfg = parse_run_config("[encoder]\nencoder = uhd\n[run]\ndims = 2K\n")
    assert cfg.encoder.dim == 2048
    assert cfg.run.dims == (2048,)
    again = parse_run_config(cfg.to_ini())
    assert again == cfg
    assert again.encoder.dim == 2048


def test_encoder_dim_leads_default_dims():
    assert parse_run_config("").run.dims == DEFAULT_DIMS
    assert parse_run_config("[encoder]\ndim = 8192\n").run.dims == (8192, 1024, 2048)
    assert parse_run_config("[encoder]\ndim = 256\n").run.dims == (256, 1024, 2048, 8192)


def test_dim_and_dims_must_agree():
    assert parse_run_config("[encoder]\ndim = 1024\n[run]\ndims = 1K,2K\n").encoder.dim == 1024
    with pytest.raises(ConfigError, match="disagrees"):
        parse_run_config("[encoder]\ndim = 1024\n[run]\ndims = 2K,8K\n")
    with pytest.raises(ConfigError, match="must lead with"):
        RunConfig(encoder=EncoderConfig(dim=512))
