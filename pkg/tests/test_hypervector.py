import numpy as np
import pytest

from unary_hdc.errors import DomainError, FormatError, ShapeError, StateError
from unary_hdc.hypervector import (
    AccumulatorVector,
    PackedHypervector,
    accumulate,
    bind,
    binarize,
    complement,
    cosine_similarity,
    hamming,
    merge,
    orthogonality,
    pack_bits,
    popcount,
    popcount_window_binarize,
    unpack_bits,
)


def rand_hv(rng, d):
    return PackedHypervector.from_bits(rng.integers(0, 2, d))


def test_padding_is_canonical():
    v = PackedHypervector.from_bits([1] * 70)
    assert v.words.shape == (2,)
    assert int(v.words[1]) == (1 << 6) - 1
    with pytest.raises(DomainError):
        PackedHypervector(dimension=3, words=np.array([0b1000], dtype=np.uint64))
    assert complement(v).bits().sum() == 0
    assert int(complement(PackedHypervector.from_bits([0] * 70)).words[1]) == (1 << 6) - 1


def test_bit_layout():
    v = PackedHypervector.from_bits([1, 0, 0, 1] + [0] * 60 + [1])
    assert int(v.words[0]) == 0b1001
    assert int(v.words[1]) == 1
    assert v.bit(64) == 1 and v.bit(1) == 0


def test_pack_unpack_batch():
    rng = np.random.default_rng(3)
    bits = rng.integers(0, 2, (5, 130)).astype(np.uint8)
    words = pack_bits(bits)
    assert words.shape == (5, 3)
    assert np.array_equal(unpack_bits(words, 130), bits)


def test_bind_identities():
    rng = np.random.default_rng(0)
    a, b = rand_hv(rng, 100), rand_hv(rng, 100)
    assert bind(a, a) == PackedHypervector.all_ones(100)
    assert bind(a, b) == bind(b, a)
    assert bind(a, PackedHypervector.all_ones(100)) == a
    with pytest.raises(ShapeError):
        bind(a, rand_hv(rng, 99))


@pytest.mark.parametrize("d", [64, 100])
def test_bind_is_bipolar_product(d):
    rng = np.random.default_rng(d)
    a, b = rand_hv(rng, d), rand_hv(rng, d)
    assert np.array_equal(bind(a, b).bipolar(), a.bipolar() * b.bipolar())


def test_accumulate_and_binarize():
    rng = np.random.default_rng(1)
    v = rand_hv(rng, 40)
    acc = accumulate(AccumulatorVector.zeros(40), v)
    assert binarize(acc) == v
    cancelled = accumulate(acc, complement(v))
    assert not cancelled.sums.any()
    assert cancelled.contributions == 2


def test_accumulate_matches_column_sums():
    rng = np.random.default_rng(2)
    vs = [rand_hv(rng, 32) for _ in range(5)]
    acc = AccumulatorVector.zeros(32)
    for v in vs:
        acc = accumulate(acc, v)
        assert acc.check_invariants()
    assert np.array_equal(acc.sums, np.sum([v.bipolar() for v in vs], axis=0))


def test_binarize_tie_goes_positive():
    acc = AccumulatorVector(dimension=3, sums=np.array([3, -1, 0], dtype=np.int32), contributions=3)
    assert binarize(acc).bits().tolist() == [1, 0, 1]
    with pytest.raises(StateError):
        binarize(AccumulatorVector.zeros(3))


def test_binarize_scale_invariant():
    rng = np.random.default_rng(4)
    sums = rng.integers(-9, 10, 64).astype(np.int32)
    a = AccumulatorVector(dimension=64, sums=sums, contributions=9)
    b = AccumulatorVector(dimension=64, sums=sums * 3, contributions=27)
    assert binarize(a) == binarize(b)
    assert binarize(a).bits().tolist() == (sums >= 0).astype(int).tolist()


def test_merge_is_accumulation_split():
    rng = np.random.default_rng(5)
    vs = [rand_hv(rng, 50) for _ in range(6)]
    left = right = whole = AccumulatorVector.zeros(50)
    for v in vs[:2]:
        left = accumulate(left, v)
    for v in vs[2:]:
        right = accumulate(right, v)
    for v in vs:
        whole = accumulate(whole, v)
    assert merge(left, right) == whole
    assert merge(right, left) == whole


def test_merge_is_associative():
    rng = np.random.default_rng(6)
    parts = []
    for k in (1, 3, 4):
        acc = AccumulatorVector.zeros(70)
        for _ in range(k):
            acc = accumulate(acc, rand_hv(rng, 70))
        parts.append(acc)
    a, b, c = parts
    assert merge(merge(a, b), c) == merge(a, merge(b, c))
    assert merge(merge(a, b), c) == merge(merge(c, a), b)
    assert merge(a, AccumulatorVector.zeros(70)) == a


def test_hamming_and_cosine():
    rng = np.random.default_rng(6)
    v = rand_hv(rng, 128)
    assert hamming(v, v) == 0
    assert hamming(v, complement(v)) == 128
    w = rand_hv(rng, 128)
    assert hamming(v, w) == hamming(v, w, naive=True)
    assert cosine_similarity(v, v) == 1.0
    assert cosine_similarity(v, complement(v)) == -1.0


def test_cosine_matches_dot_product():
    rng = np.random.default_rng(8)
    a, b = rand_hv(rng, 256), rand_hv(rng, 256)
    x, y = a.bipolar().astype(float), b.bipolar().astype(float)
    ref = float(x @ y / (np.linalg.norm(x) * np.linalg.norm(y)))
    assert abs(cosine_similarity(a, b) - ref) < 1e-12


def test_popcount_words():
    words = np.array([0, 1, 0xFF, 0xFFFFFFFFFFFFFFFF, 0x8000000000000001], dtype=np.uint64)
    assert popcount(words).tolist() == [0, 1, 8, 64, 2]


def test_window_binarize_tie_and_cross_path():
    one = PackedHypervector.from_bits([1, 1])
    mixed = PackedHypervector.from_bits([0, 1])
    assert popcount_window_binarize([one, one], 0) == 1
    assert popcount_window_binarize([one, mixed], 0) == 1
    rng = np.random.default_rng(9)
    vs = [rand_hv(rng, 20) for _ in range(16)]
    acc = AccumulatorVector.zeros(20)
    for v in vs:
        acc = accumulate(acc, v)
    ref = binarize(acc)
    assert [popcount_window_binarize(vs, j) for j in range(20)] == ref.bits().tolist()


def test_window_binarize_exhaustive_tiny():
    # every 4-vector window over D=3
    for code in range(1 << 12):
        bits = [(code >> k) & 1 for k in range(12)]
        vs = [PackedHypervector.from_bits(bits[3 * i : 3 * i + 3]) for i in range(4)]
        acc = AccumulatorVector.zeros(3)
        for v in vs:
            acc = accumulate(acc, v)
        assert [popcount_window_binarize(vs, j) for j in range(3)] == binarize(acc).bits().tolist()


def test_bytes_round_trip_and_errors():
    rng = np.random.default_rng(10)
    v = rand_hv(rng, 70)
    raw = v.to_bytes()
    assert len(raw) == 4 + 16
    back, end = PackedHypervector.from_bytes(raw)
    assert back == v and end == len(raw)
    with pytest.raises(FormatError):
        PackedHypervector.from_bytes(raw[:-1])
    bad = bytearray(raw)
    bad[-1] = 0xFF
    with pytest.raises(FormatError, match="non-canonical"):
        PackedHypervector.from_bytes(bytes(bad))


def test_orthogonality_of_random_vectors():
    rng = np.random.default_rng(11)
    vs = [rand_hv(rng, 10_000) for _ in range(6)]
    assert abs(orthogonality(vs) - 0.5) < 3 * 0.5 / np.sqrt(10_000)
    with pytest.raises(ShapeError):
        orthogonality(vs[:1])
