"""Exhaustive equivalence suites behind `unary-hdc selftest`."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from .hypervector import PackedHypervector, hamming
from .sobol import SobolConfig, build_sobol_table
from .unary import encode_unary, masked_binarize_window, unary_compare_ge

logger = logging.getLogger(__name__)

COMPARATOR_LENGTHS = (7, 16)
MASK_WINDOWS = range(2, 65)
MASK_ORDERINGS = 4


@dataclass(frozen=True)
class SuiteResult:
    name: str
    cases: int
    mismatches: int

    @property
    def ok(self) -> bool:
        return self.mismatches == 0


def comparator_suite(lengths: Sequence[int] = COMPARATOR_LENGTHS) -> SuiteResult:
    """Gate-level comparator vs integer a >= b for every pair of values."""
    cases = bad = 0
    for n in lengths:
        for a in range(n + 1):
            for b in range(n + 1):
                cases += 1
                if unary_compare_ge(encode_unary(a, n), encode_unary(b, n)) != int(a >= b):
                    bad += 1
    return SuiteResult("unary comparator", cases, bad)


def masking_suite(windows: Sequence[int] = MASK_WINDOWS, orderings: int = MASK_ORDERINGS, seed: int = 0) -> SuiteResult:
    """Sticky-latch output vs c >= ceil(H/2) for every count, over shuffled bit orders."""
    rng = np.random.default_rng(seed)
    cases = bad = 0
    for h in windows:
        tob = (h + 1) // 2
        for c in range(h + 1):
            bits = np.zeros(h, dtype=np.uint8)
            bits[:c] = 1
            for _ in range(orderings):
                rng.shuffle(bits)
                cases += 1
                if masked_binarize_window(bits.tolist()) != int(c >= tob):
                    bad += 1
    return SuiteResult("masked binarization", cases, bad)


def popcount_suite(dims: Sequence[int] = (1, 63, 64, 65, 200), trials: int = 8, seed: int = 0) -> SuiteResult:
    """Word popcount Hamming distance vs the per-bit loop."""
    rng = np.random.default_rng(seed)
    cases = bad = 0
    for d in dims:
        for _ in range(trials):
            a = PackedHypervector.from_bits(rng.integers(0, 2, d))
            b = PackedHypervector.from_bits(rng.integers(0, 2, d))
            cases += 1
            if hamming(a, b) != hamming(a, b, naive=True):
                bad += 1
    return SuiteResult("popcount", cases, bad)


def level_law_suite(dimension: int = 1024, bits: int = 4, rows: int = 32) -> SuiteResult:
    """hamming(L(a), L(b)) == #{j : a < t_j <= b} on Sobol rows 1..rows, all pairs a <= b."""
    table = build_sobol_table(SobolConfig(dimensions=rows, points_per_dimension=dimension, quantization_bits=bits))
    levels = 1 << bits
    cases = bad = 0
    for row in table.values:
        vectors = [PackedHypervector.from_bits((row <= v).astype(np.uint8)) for v in range(levels)]
        for a in range(levels):
            for b in range(a, levels):
                cases += 1
                expected = int(np.count_nonzero((row > a) & (row <= b)))
                if hamming(vectors[a], vectors[b]) != expected:
                    bad += 1
    return SuiteResult("uhd level similarity", cases, bad)


SUITES: List[Callable[[], SuiteResult]] = [comparator_suite, masking_suite, popcount_suite, level_law_suite]


def run_all() -> List[SuiteResult]:
    results = []
    for suite in SUITES:
        r = suite()
        logger.info("%s: %d cases, %d mismatches", r.name, r.cases, r.mismatches)
        results.append(r)
    return results
