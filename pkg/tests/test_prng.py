from fractions import Fraction

import numpy as np
import pytest

from erasable_ledger.prng import XorShift64Star, splitmix64


def test_splitmix64_published_vector():
    # First output of splitmix64 from state 0 (reference C implementation).
    assert splitmix64(0) == 0xE220A8397B1DCDAF


def numpy_xorshift64star(state: int, n: int) -> list[int]:
    """Same recurrence evaluated with wrapping uint64 arithmetic."""
    x = np.uint64(state)
    out = []
    with np.errstate(over="ignore"):
        for _ in range(n):
            x ^= x >> np.uint64(12)
            x ^= x << np.uint64(25)
            x ^= x >> np.uint64(27)
            out.append(int(x * np.uint64(0x2545F4914F6CDD1D)))
    return out


@pytest.mark.parametrize("seed", [0, 1, 42, 2**64 - 1])
def test_stream_matches_wrapping_arithmetic(seed):
    rng = XorShift64Star(seed)
    expected = numpy_xorshift64star(splitmix64(seed), 100)
    assert [rng.next_u64() for _ in range(100)] == expected


def test_randint_bounds():
    rng = XorShift64Star(3)
    draws = [rng.randint(2, 5) for _ in range(2000)]
    assert set(draws) == {2, 3, 4, 5}
    assert XorShift64Star(3).randint(7, 7) == 7
    with pytest.raises(ValueError):
        rng.randint(5, 4)


def test_bernoulli():
    rng = XorShift64Star(9)
    assert not any(rng.bernoulli(Fraction(0)) for _ in range(100))
    assert all(rng.bernoulli(Fraction(1)) for _ in range(100))
    hits = sum(rng.bernoulli(Fraction(1, 4)) for _ in range(20000))
    assert 4700 < hits < 5300
