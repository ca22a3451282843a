"""Portable seeded random stream.

Streams and negative-class draws must be reproducible bit-for-bit in any
language, so this module does not use numpy's generators. The algorithm is
SplitMix64 (Steele, Lea & Flood 2014):

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

all arithmetic modulo 2**64. Bounded integers use rejection sampling on the
top of the range (``randbelow``), and shuffles are Fisher-Yates from the last
index downwards.
"""

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    """SplitMix64 generator over unsigned 64-bit state."""

    def __init__(self, seed=0):
        self.state = int(seed) & _MASK

    def next_u64(self):
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def randbelow(self, n):
        """Uniform integer in ``[0, n)`` without modulo bias."""
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def permutation(self, n):
        idx = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx

    def spawn(self, key):
        """Independent child generator keyed by ``key``; parent state untouched."""
        return SplitMix64(mix_seed(self.state, key))


def mix_seed(seed, key):
    """Derive a 64-bit seed from ``(seed, key)``."""
    g = SplitMix64((int(seed) ^ ((int(key) * _GOLDEN) & _MASK)) & _MASK)
    return g.next_u64()
