from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from explainrank.rng import Xoshiro256StarStar


def test_reference_stream_seed_zero():
    # First outputs of SplitMix64-seeded xoshiro256** from seed 0; this
    # sequence is the cross-implementation reference and must never drift.
    r = Xoshiro256StarStar(0)
    assert [r.next_u64() for _ in range(3)] == [
        0x99EC5F36CB75F2B4,
        0xBF6E1F784956452A,
        0x1A5F849D4933E6E0,
    ]


def test_frozen_stream_seed_42():
    r = Xoshiro256StarStar(42)
    assert [r.next_u64() for _ in range(5)] == [
        0x15780B2E0C2EC716,
        0x6104D9866D113A7E,
        0xAE17533239E499A1,
        0xECB8AD4703B360A1,
        0xFDE6DC7FE2EC5E64,
    ]


def test_frozen_shuffle():
    r = Xoshiro256StarStar(42)
    items = list(range(10))
    r.shuffle(items)
    assert items == [7, 3, 8, 9, 5, 6, 4, 1, 0, 2]


@given(st.integers(min_value=0, max_value=2**64 - 1))
def test_determinism_across_instances(seed):
    a = Xoshiro256StarStar(seed)
    b = Xoshiro256StarStar(seed)
    assert [a.next_u64() for _ in range(8)] == [b.next_u64() for _ in range(8)]


@given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=1, max_value=10_000))
def test_randbelow_in_range(seed, n):
    r = Xoshiro256StarStar(seed)
    for _ in range(20):
        assert 0 <= r.randbelow(n) < n


def test_randbelow_rejects_nonpositive():
    r = Xoshiro256StarStar(1)
    with pytest.raises(ValueError):
        r.randbelow(0)


@given(st.integers(min_value=0, max_value=2**32), st.lists(st.integers(), max_size=50))
def test_shuffle_is_permutation(seed, items):
    shuffled = list(items)
    Xoshiro256StarStar(seed).shuffle(shuffled)
    assert Counter(shuffled) == Counter(items)


def test_randbelow_rough_uniformity():
    r = Xoshiro256StarStar(123)
    counts = Counter(r.randbelow(4) for _ in range(40_000))
    for bucket in range(4):
        assert abs(counts[bucket] - 10_000) < 500
