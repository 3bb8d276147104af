import numpy as np
import pytest

from conftest import random_dataset
from unary_hdc.data import Dataset, load_csv, quantize_dataset
from unary_hdc.encoders import EncoderConfig, build_encoder
from unary_hdc.errors import ConfigError, DomainError, FormatError, LogicError, ModelMismatchError, TrainingError
from unary_hdc.hypervector import AccumulatorVector, PackedHypervector, binarize, hamming, merge
from unary_hdc.model import (
    ClassModel,
    ModelConfig,
    OpCounters,
    SweepResult,
    evaluate,
    iteration_sweep,
    load_model,
    model_from_bytes,
    model_to_bytes,
    predict,
    save_model,
    summarize_counters,
    train,
    train_direct,
    train_fast_histogram,
)


def uhd(dim=128, **kw):
    return EncoderConfig(encoder="uhd", dim=dim, **kw)


def baseline(dim=128, **kw):
    return EncoderConfig(encoder="baseline", dim=dim, **kw)


@pytest.mark.parametrize(
    "cfg",
    [uhd(), uhd(use_level_bank=False), uhd(comparator_path="unary", use_level_bank=False), uhd(quantization_bits=2), baseline(), baseline(generator_kind="lfsr")],
    ids=["uhd-bank", "uhd-scalar", "uhd-gate", "uhd-2bit", "baseline", "baseline-lfsr"],
)
def test_histogram_training_is_bit_identical(cfg):
    ds = random_dataset(120, 9, 4, seed=3)
    enc = build_encoder(cfg, ds.features, iteration=1)
    c_direct, c_hist = OpCounters(), OpCounters()
    direct = train_direct(ds, enc, counters=c_direct)
    fast = train_fast_histogram(ds, enc, counters=c_hist)
    assert direct == fast
    assert c_direct == c_hist


def test_class_vectors_are_binarized_class_sums():
    ds = random_dataset(30, 7, 3, seed=5)
    enc = build_encoder(uhd(dim=100), ds.features)
    model = train(ds, enc)
    q = quantize_dataset(ds, 4)
    for c in range(3):
        acc = AccumulatorVector.zeros(100)
        for img in q.images[q.labels == c]:
            acc = merge(acc, enc.encode(img))
        assert model.vector(c) == binarize(acc)


def test_per_image_bundling():
    ds = random_dataset(60, 8, 2, seed=6)
    enc = build_encoder(uhd(dim=64), ds.features)
    model = train(ds, enc, ModelConfig(bundling="per_image"))
    q = quantize_dataset(ds, 4)
    for c in range(2):
        acc = AccumulatorVector.zeros(64)
        for img in q.images[q.labels == c]:
            acc = merge(acc, AccumulatorVector(dimension=64, sums=binarize(enc.encode(img)).bipolar(), contributions=1))
        assert model.vector(c) == binarize(acc)
    with pytest.raises(ConfigError):
        train_fast_histogram(ds, enc, ModelConfig(bundling="per_image"))


@pytest.mark.parametrize("kind", ["uhd", "baseline"])
def test_training_ignores_image_order(kind):
    ds = random_dataset(80, 9, 4, seed=11)
    enc = build_encoder(EncoderConfig(encoder=kind, dim=128), ds.features, iteration=1)
    model = train(ds, enc)
    perm = np.random.default_rng(12).permutation(len(ds))
    assert train(ds.take(perm), enc) == model
    assert train_direct(ds.take(perm[::-1]), enc) == model


@pytest.mark.parametrize("kind", ["uhd", "baseline"])
def test_duplicated_training_set_gives_same_model(kind):
    ds = random_dataset(50, 7, 3, seed=13)
    enc = build_encoder(EncoderConfig(encoder=kind, dim=96), ds.features, iteration=1)
    doubled = Dataset(images=np.concatenate([ds.images, ds.images]), labels=np.concatenate([ds.labels, ds.labels]))
    assert train(doubled, enc) == train(ds, enc)


def test_identical_class_vectors_tie_to_lowest_index():
    hv = PackedHypervector.from_bits(np.random.default_rng(14).integers(0, 2, 64))
    model = ClassModel(
        classes=np.tile(hv.words, (3, 1)),
        labels=(0, 1, 2),
        encoder_config=uhd(dim=64),
        dimension=64,
        features=4,
        quantization_bits=4,
    )
    for image in (np.zeros(4, dtype=int), np.array([3, 15, 7, 0])):
        label, scores = predict(model, image)
        assert label == 0
        assert scores[0] == scores[1] == scores[2]
        assert predict(model, image, similarity="raw")[0] == 0


@pytest.mark.parametrize("kind", ["uhd", "baseline"])
def test_worker_count_does_not_change_results(kind):
    ds = random_dataset(600, 16, 5, seed=8)
    enc = build_encoder(EncoderConfig(encoder=kind, dim=128), ds.features, iteration=1)
    models = [train(ds, enc, ModelConfig(training_path="direct", workers=w)) for w in (1, 2, 8)]
    assert models[0] == models[1] == models[2]
    reports = [evaluate(models[0], ds, enc, ModelConfig(workers=w)) for w in (1, 2, 8)]
    assert len({r.correct for r in reports}) == 1
    assert all(np.array_equal(r.confusion, reports[0].confusion) for r in reports)


@pytest.mark.parametrize("kind", ["uhd", "baseline"])
def test_toy_dataset_is_separable(toy_csv, kind):
    ds = load_csv(toy_csv)
    enc = build_encoder(EncoderConfig(encoder=kind, dim=1024), ds.features, iteration=1)
    model = train(ds, enc)
    report = evaluate(model, ds, enc)
    assert report.accuracy == 100.0
    assert report.confusion.tolist() == [[2, 0, 0], [0, 2, 0], [0, 0, 2]]
    assert report.per_class_accuracy() == [100.0, 100.0, 100.0]


def test_predict(toy_csv):
    ds = quantize_dataset(load_csv(toy_csv), 4)
    enc = build_encoder(uhd(dim=512), ds.features)
    model = train(ds, enc)
    label, scores = predict(model, ds.images[4])
    assert label == 1
    assert scores.shape == (3,)
    assert scores[1] == 1.0
    assert int(np.argmax(scores)) == 1
    raw_label, raw_scores = predict(model, ds.images[5], enc, similarity="raw")
    assert raw_label == 2
    assert raw_scores[2] == max(raw_scores)
    with pytest.raises(ModelMismatchError):
        predict(model, np.array([1, 2, 3]))
    with pytest.raises(ModelMismatchError):
        predict(model, np.array([1, 2, 3, 200]))


def test_raw_similarity_uses_integer_dot():
    ds = random_dataset(90, 10, 3, seed=9)
    enc = build_encoder(uhd(dim=256), ds.features)
    model = train(ds, enc)
    q = quantize_dataset(ds, 4)
    class_bipolar = np.stack([model.vector(c).bipolar() for c in range(3)]).astype(np.int64)
    expected = np.argmax(enc.encode_batch(q.images).astype(np.int64) @ class_bipolar.T, axis=1)
    report = evaluate(model, ds, enc, ModelConfig(similarity="raw"))
    assert report.correct == int((expected == q.labels).sum())
    assert report.counters.binarize_windows == 0


def test_binary_similarity_matches_hamming():
    ds = random_dataset(45, 6, 3, seed=10)
    enc = build_encoder(baseline(dim=256), ds.features, iteration=1)
    model = train(ds, enc)
    q = quantize_dataset(ds, 4)
    correct = 0
    for img, lab in zip(q.images, q.labels):
        query = binarize(enc.encode(img))
        dist = [hamming(query, model.vector(c)) for c in range(3)]
        correct += int(int(np.argmin(dist)) == lab)
    assert evaluate(model, ds, enc).correct == correct


def test_training_errors():
    enc = build_encoder(uhd(dim=32), 3)
    one_class = Dataset(images=np.zeros((4, 3), dtype=np.uint8), labels=np.zeros(4, dtype=np.int64))
    with pytest.raises(TrainingError):
        train(one_class, enc)
    gap = Dataset(images=np.zeros((4, 3), dtype=np.uint8), labels=np.array([0, 0, 2, 2]))
    with pytest.raises(TrainingError, match="class 1"):
        train(gap, enc)
    with pytest.raises(ModelMismatchError):
        train(random_dataset(10, 4, 2), enc)


def test_evaluate_errors():
    ds = random_dataset(20, 3, 2, seed=2)
    enc = build_encoder(uhd(dim=32), 3)
    model = train(ds, enc)
    with pytest.raises(ModelMismatchError):
        evaluate(model, random_dataset(10, 4, 2), enc)
    with pytest.raises(ModelMismatchError):
        evaluate(model, random_dataset(9, 3, 3), enc)
    with pytest.raises(DomainError):
        evaluate(model, ds.take(np.zeros(0, dtype=np.int64)), enc)
    coarse = quantize_dataset(ds, 2)
    with pytest.raises(ModelMismatchError):
        evaluate(model, coarse, enc)


def test_training_counters():
    ds = random_dataset(50, 6, 2, seed=4)
    h, d, n = 6, 64, 50
    c = OpCounters()
    train(ds, build_encoder(uhd(dim=d), h), counters=c)
    assert c.to_dict() == {
        "comparisons": h * d * 16,
        "bind_ops": 0,
        "accumulator_updates": n * h * d,
        "memory_fetches": n * h,
        "binarize_windows": 2 * d,
    }
    b = OpCounters()
    train(ds, build_encoder(baseline(dim=d), h, iteration=1), ModelConfig(bundling="per_image"), counters=b)
    assert b.bind_ops == n * h
    assert b.memory_fetches == 2 * n * h
    assert b.comparisons == h * d + 17 * d
    assert b.binarize_windows == 2 * d + n * d


def test_counters_never_decrease():
    c = OpCounters()
    c.record({"comparisons": 5}, times=2)
    assert c.comparisons == 10
    with pytest.raises(LogicError):
        c.record({"comparisons": -1})
    other = OpCounters(bind_ops=3)
    c.merge(other)
    assert c.bind_ops == 3


def test_summarize_counters():
    ratios = summarize_counters(OpCounters(bind_ops=10, comparisons=4), OpCounters(bind_ops=0, comparisons=8))
    assert ratios["bind_ops"] == 0.0
    assert ratios["comparisons"] == 2.0
    assert ratios["memory_fetches"] is None


def test_eval_counters():
    ds = random_dataset(20, 5, 2, seed=3)
    enc = build_encoder(uhd(dim=64, use_level_bank=False), 5)
    report = evaluate(train(ds, enc), ds, enc)
    assert report.counters.comparisons == 20 * 5 * 64
    assert report.counters.binarize_windows == 20 * 64
    assert report.to_dict()["counters"]["comparisons"] == 20 * 5 * 64


def test_baseline_sweep_uses_offset_seeds():
    train_ds = random_dataset(40, 6, 2, seed=1)
    test_ds = random_dataset(20, 6, 2, seed=2)
    result = iteration_sweep(train_ds, test_ds, baseline(dim=64, seed=100), iterations=5)
    assert [s for _, s, _ in result.trace] == [101, 102, 103, 104, 105]
    assert [i for i, _, _ in result.trace] == [1, 2, 3, 4, 5]
    assert set(result.averages()) == {1, 5}
    assert result.averages()[5] == pytest.approx(np.mean(result.accuracies))
    again = iteration_sweep(train_ds, test_ds, baseline(dim=64, seed=100), iterations=2)
    assert again.accuracies == result.accuracies[:2]


def test_uhd_sweep_is_flat():
    train_ds = random_dataset(40, 6, 2, seed=1)
    result = iteration_sweep(train_ds, train_ds, uhd(dim=64), iterations=4)
    assert len(set(result.accuracies)) == 1
    assert result.stddev() == 0.0
    assert result.best()[0] == 1
    with pytest.raises(DomainError):
        iteration_sweep(train_ds, train_ds, uhd(dim=64), iterations=0)


def test_sweep_statistics():
    result = SweepResult(encoder="baseline", dimension=64, trace=[(1, 1, 80.0), (2, 2, 90.0), (3, 3, 90.0)], counters=OpCounters())
    assert result.best() == (2, 2, 90.0)
    assert result.stddev() == pytest.approx(np.std([80.0, 90.0, 90.0], ddof=1))
    assert result.to_dict()["best"] == {"iteration": 2, "seed": 2, "accuracy": 90.0}


def golden_model() -> ClassModel:
    return ClassModel(
        classes=np.array([[0x5A3C], [0xC3A5]], dtype=np.uint64),
        labels=(0, 1),
        encoder_config=EncoderConfig(encoder="uhd", dim=16),
        dimension=16,
        features=4,
        quantization_bits=4,
    )


def test_golden_model_file(golden_model_path):
    raw = golden_model_path.read_bytes()
    model = load_model(golden_model_path)
    assert model == golden_model()
    assert model_to_bytes(model) == raw


def test_save_load_round_trip(tmp_path):
    ds = random_dataset(30, 5, 3, seed=7)
    enc = build_encoder(baseline(dim=100, seed=4, generator_kind="lfsr"), ds.features, iteration=2)
    model = train(ds, enc)
    path = tmp_path / "m.uhd"
    save_model(path, model)
    back = load_model(path)
    assert back == model
    assert back.encoder_config.seed == 6
    assert evaluate(back, ds).correct == evaluate(model, ds, enc).correct


def test_corrupt_model_files(golden_model_path, tmp_path):
    raw = golden_model_path.read_bytes()
    with pytest.raises(FormatError, match="bad magic"):
        model_from_bytes(b"XXXX" + raw[4:])
    with pytest.raises(FormatError, match="version"):
        model_from_bytes(raw[:4] + (2).to_bytes(4, "little") + raw[8:])
    with pytest.raises(FormatError):
        model_from_bytes(raw[:-3])
    with pytest.raises(FormatError, match="trailing"):
        model_from_bytes(raw + b"\x00")
    bad = bytearray(raw)
    bad[295] = 0xFF
    with pytest.raises(FormatError, match="non-canonical"):
        model_from_bytes(bytes(bad))
    with pytest.raises(FormatError, match="model file not found"):
        load_model(tmp_path / "absent.uhd")


def test_model_needs_two_classes():
    with pytest.raises(TrainingError):
        ClassModel(
            classes=np.zeros((1, 1), dtype=np.uint64),
            labels=(0,),
            encoder_config=EncoderConfig(dim=16),
            dimension=16,
            features=4,
            quantization_bits=4,
        )
