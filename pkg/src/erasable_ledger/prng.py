"""xorshift64* generator, seeded through splitmix64.

The stream is fixed by these equations so any implementation reproduces it:

    seeding (splitmix64):
        z = (seed + 0x9E3779B97F4A7C15) mod 2**64
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2**64
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB mod 2**64
        state = z ^ (z >> 31)          (replaced by 0x9E3779B97F4A7C15 if 0)

    step (xorshift64*):
        x ^= x >> 12;  x ^= (x << 25) mod 2**64;  x ^= x >> 27
        output = x * 0x2545F4914F6CDD1D mod 2**64

``random.Random`` is not used because its stream is CPython-specific.
"""

from __future__ import annotations

from fractions import Fraction

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(seed: int) -> int:
    z = (seed + GOLDEN) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


class XorShift64Star:
    def __init__(self, seed: int):
        self.state = splitmix64(seed & MASK) or GOLDEN

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & MASK

    def randint(self, lo: int, hi: int) -> int:
        """Integer in ``[lo, hi]`` by modulo reduction (bias < 2**-40 for small spans)."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        return lo + self.next_u64() % (hi - lo + 1)

    def bernoulli(self, p: Fraction) -> bool:
        """True with probability ``p``, decided exactly: ``u * den < num * 2**64``."""
        if p <= 0:
            return False
        if p >= 1:
            return True
        return self.next_u64() * p.denominator < p.numerator << 64
