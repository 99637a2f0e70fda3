"""Deterministic random streams.

The generator is xoshiro256** seeded through SplitMix64, implemented on
plain Python integers so sequences are identical on every platform and
Python build. `Rng.derive` produces statistically independent child
streams from the parent's seed and a list of integer keys; derivation
depends only on the seed, never on how much of the parent stream has
been consumed, which is what makes campaign output invariant under the
worker count.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1


def _mix64(z: int) -> int:
    # SplitMix64 finalizer.
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a SplitMix64 state; returns (output, new_state)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    return _mix64(state), state


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Rng:
    """xoshiro256** stream with SplitMix64 seeding and keyed derivation."""

    __slots__ = ("seed", "_s")

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        state = self.seed
        s = []
        for _ in range(4):
            word, state = splitmix64(state)
            s.append(word)
        if not any(s):  # all-zero state is the one invalid xoshiro state
            s[0] = 1
        self._s = s

    def derive(self, *keys: int) -> "Rng":
        """Child stream determined by (seed, keys); parent is untouched."""
        acc = _mix64(self.seed ^ 0xA0761D6478BD642F)
        for k in keys:
            acc = _mix64(acc ^ _mix64(k & _MASK64))
        return Rng(acc)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        out = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return out

    def next_float(self) -> float:
        """Uniform in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def next_int(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive."""
        if hi < lo:
            raise ValueError(f"empty integer range [{lo}, {hi}]")
        span = hi - lo + 1
        # Rejection sampling keeps the distribution exactly uniform.
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            x = self.next_u64()
            if x < limit:
                return lo + (x % span)

    def next_bool(self, p: float = 0.5) -> bool:
        return self.next_float() < p

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.next_float()

    def choice(self, seq):
        if not seq:
            raise ValueError("choice from empty sequence")
        return seq[self.next_int(0, len(seq) - 1)]

    def weighted_choice(self, items, weights):
        if len(items) != len(weights) or not items:
            raise ValueError("items and weights must be equal-length and non-empty")
        total = float(sum(weights))
        if total <= 0:
            raise ValueError("weights must sum to a positive value")
        r = self.next_float() * total
        acc = 0.0
        for item, w in zip(items, weights):
            acc += w
            if r < acc:
                return item
        return items[-1]

    def shuffle(self, seq: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.next_int(0, i)
            seq[i], seq[j] = seq[j], seq[i]
