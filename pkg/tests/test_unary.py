import itertools

import numpy as np
import pytest

from unary_hdc.errors import DomainError, LogicError, PreconditionError, ShapeError
from unary_hdc.unary import (
    MaskedBinarizer,
    UnaryStream,
    build_ust,
    counter_comparator_reference,
    dump_ust,
    encode_unary,
    fetch_unary,
    masked_binarize_step,
    masked_binarize_window,
    unary_compare_ge,
    unary_min,
)


def test_encode_unary_prints_right_aligned():
    assert str(encode_unary(2, 7)) == "0000011"
    assert str(encode_unary(5, 7)) == "0011111"
    assert str(encode_unary(0, 16)) == "0" * 16
    assert encode_unary(5, 7).value == 5


def test_encode_unary_range():
    with pytest.raises(DomainError):
        encode_unary(8, 7)
    with pytest.raises(DomainError):
        encode_unary(-1, 7)


def test_ust_entries():
    ust = build_ust(4)
    assert len(ust) == 16
    assert str(fetch_unary(ust, 8)) == "0000000011111111"
    assert str(fetch_unary(ust, 15)) == "0111111111111111"
    assert fetch_unary(ust, 0).word == 0
    for v in range(16):
        assert fetch_unary(ust, v).value == v
        assert fetch_unary(ust, v) == encode_unary(v, 16)
    with pytest.raises(DomainError):
        fetch_unary(ust, 16)


@pytest.mark.parametrize("bits", [0, 9])
def test_ust_width_limits(bits):
    with pytest.raises(DomainError):
        build_ust(bits)


def test_counter_comparator_generator_agrees():
    ust = build_ust(4)
    for v in range(17):
        ref = counter_comparator_reference(v, 16)
        assert ref == encode_unary(v, 16)
        if v < 16:
            assert ref == fetch_unary(ust, v)
    assert counter_comparator_reference(5, 7).value == 5
    assert str(counter_comparator_reference(7, 7)) == "1111111"


def test_and_is_min():
    for a, b in itertools.product(range(17), repeat=2):
        m = unary_min(encode_unary(a, 16), encode_unary(b, 16))
        assert m.value == min(a, b)
        assert m.is_thermometer()


def test_comparator_worked_cases():
    assert unary_compare_ge(encode_unary(2, 7), encode_unary(5, 7)) == 0
    assert unary_compare_ge(encode_unary(5, 7), encode_unary(5, 7)) == 1


@pytest.mark.parametrize("n", [7, 16])
def test_comparator_exhaustive(n):
    for a, b in itertools.product(range(n + 1), repeat=2):
        assert unary_compare_ge(encode_unary(a, n), encode_unary(b, n)) == int(a >= b)


def test_comparator_rejects_bad_streams():
    with pytest.raises(ShapeError):
        unary_compare_ge(encode_unary(1, 7), encode_unary(1, 8))
    holey = UnaryStream.from_bits([0, 1, 0, 1])
    assert not holey.is_thermometer()
    with pytest.raises(PreconditionError):
        unary_compare_ge(holey, encode_unary(1, 4))
    with pytest.raises(PreconditionError):
        unary_compare_ge(encode_unary(1, 4), holey)


def test_binarizer_shape():
    b = MaskedBinarizer.for_window(784)
    assert b.threshold == 392
    assert b.mask == 392
    assert b.counter_width == 11
    assert MaskedBinarizer.for_window(7).threshold == 4


def test_latch_fires_at_threshold_and_sticks():
    state = MaskedBinarizer.for_window(784)
    for _ in range(392):
        state = masked_binarize_step(state, 1)
    assert state.latch
    for _ in range(392):
        state = masked_binarize_step(state, 0)
    assert state.sign == 1


def test_latch_unset_below_threshold():
    state = MaskedBinarizer.for_window(784)
    for _ in range(391):
        state = masked_binarize_step(state, 1)
    assert not state.latch
    assert state.sign == 0


def test_latch_small_window_sequence():
    state = MaskedBinarizer.for_window(4)
    seen = []
    for bit in (1, 0, 1):
        state = masked_binarize_step(state, bit)
        seen.append(state.latch)
    assert seen == [False, False, True]


def test_step_errors():
    state = MaskedBinarizer.for_window(2)
    with pytest.raises(DomainError):
        masked_binarize_step(state, 2)
    state = masked_binarize_step(masked_binarize_step(state, 1), 1)
    with pytest.raises(LogicError):
        masked_binarize_step(state, 1)


def test_window_examples():
    assert masked_binarize_window([1, 1, 1, 1, 0, 0, 0, 0]) == 1
    assert masked_binarize_window([1, 1, 1, 0, 0, 0, 0, 0]) == 0
    with pytest.raises(ShapeError):
        masked_binarize_window([1, 0, 1], window=4)
    with pytest.raises(ShapeError):
        masked_binarize_window([])


def test_window_exhaustive_small():
    for h in range(1, 13):
        tob = (h + 1) // 2
        for bits in itertools.product((0, 1), repeat=h):
            assert masked_binarize_window(list(bits)) == int(sum(bits) >= tob)


def test_window_random_orders_large():
    rng = np.random.default_rng(7)
    for h in range(2, 65):
        for c in range(h + 1):
            bits = np.array([1] * c + [0] * (h - c))
            rng.shuffle(bits)
            assert masked_binarize_window(bits.tolist()) == int(c >= (h + 1) // 2)


def test_dump_ust(tmp_path):
    path = tmp_path / "ust.txt"
    dump_ust(build_ust(2), path)
    assert path.read_text(encoding="utf-8").splitlines() == ["0000", "0001", "0011", "0111"]
