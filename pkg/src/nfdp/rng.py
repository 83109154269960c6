"""Deterministic 64-bit RNG streams for reproducible simulation runs.

Every random decision in this package flows through a stream derived from a
master seed and a structured label, so components can run serially, in
parallel, or in isolation and still produce bit-identical results.

The construction is fixed and platform independent:

* ``mix64`` is the splitmix64 output function (xorshift/multiply avalanche).
* A stream's seed state absorbs the label words one by one:
  ``h <- mix64((h ^ word) + GOLDEN)``, starting from ``mix64(master + GOLDEN)``.
  Label parts are encoded as tagged 64-bit words (strings length-prefixed and
  packed little-endian), so distinct labels map to distinct word sequences.
* The i-th raw output of a stream seeded with state ``s`` is
  ``mix64(s + (i + 1) * GOLDEN)`` -- plain splitmix64. Because the state
  advances by a fixed increment, drawing a block of outputs is exactly
  equivalent to repeated single draws.
* Uniform doubles in [0, 1) take the top 53 bits of a raw output; standard
  normals apply the Box-Muller transform to pairs of uniforms; bounded
  integers use rejection sampling, so they are exactly uniform (no modulo
  bias).

A stream is a mutable value owned by one consumer; never share one between
threads -- derive a fresh stream per (purpose, party, round) instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15

_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

LabelPart = int | str
Label = tuple[LabelPart, ...]

_TAG_INT = 0x49  # 'I'
_TAG_STR = 0x53  # 'S'


def mix64(z: int) -> int:
    """splitmix64 finalizer: avalanche a 64-bit value."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _label_words(label: Label) -> list[int]:
    words: list[int] = []
    for part in label:
        if isinstance(part, bool):  # bool is an int subclass; reject explicitly
            raise TypeError("label parts must be int or str, not bool")
        if isinstance(part, int):
            words.append(_TAG_INT)
            words.append(part & _MASK64)
        elif isinstance(part, str):
            raw = part.encode("utf-8")
            words.append(_TAG_STR)
            words.append(len(raw))
            for i in range(0, len(raw), 8):
                words.append(int.from_bytes(raw[i : i + 8], "little"))
        else:
            raise TypeError(f"label parts must be int or str, got {type(part).__name__}")
    return words


@dataclass
class RngStream:
    """A splitmix64 stream: 64-bit state plus provenance of its derivation."""

    state: int
    origin: tuple[int, Label] = field(default=(0, ()))

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & _MASK64
        return mix64(self.state)

    def u64_block(self, count: int) -> np.ndarray:
        """Vectorized draw of ``count`` raw outputs (same values as repeated
        ``next_u64`` calls)."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        steps = np.arange(1, count + 1, dtype=np.uint64)
        z = np.uint64(self.state) + steps * np.uint64(GOLDEN)
        self.state = (self.state + count * GOLDEN) & _MASK64
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def uniform_block(self, count: int) -> np.ndarray:
        """Uniform doubles in [0, 1), 53-bit resolution."""
        return (self.u64_block(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal_block(self, count: int) -> np.ndarray:
        """Standard normals via Box-Muller on consecutive uniform pairs."""
        pairs = (count + 1) // 2
        raw = self.u64_block(2 * pairs)
        # (x >> 11) + 1 in (0, 2^53] keeps the log argument strictly positive.
        u1 = ((raw[:pairs] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (raw[pairs:] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return out[:count]

    def randbelow(self, bound: int) -> int:
        """Exactly uniform integer in [0, bound) by rejection sampling."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (2**64 // bound) * bound
        while True:
            x = self.next_u64()
            if x < limit:
                return x % bound

    def integers_block(self, count: int, bound: int) -> np.ndarray:
        """Vectorized rejection sampling of ``count`` uniform ints in [0, bound)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit_int = (2**64 // bound) * bound
        limit = None if limit_int >= 2**64 else np.uint64(limit_int)
        out = np.empty(count, dtype=np.int64)
        filled = 0
        while filled < count:
            need = count - filled
            raw = self.u64_block(need + (need >> 4) + 8)
            if limit is not None:
                raw = raw[raw < limit]
            accepted = (raw[:need] % np.uint64(bound)).astype(np.int64)
            out[filled : filled + accepted.size] = accepted
            filled += accepted.size
        return out

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        arr = np.arange(n, dtype=np.int64)
        for i in range(n - 1):
            j = i + self.randbelow(n - i)
            arr[i], arr[j] = arr[j], arr[i]
        return arr


def derive_stream(master_seed: int, label: Label | LabelPart) -> RngStream:
    """Derive the stream for ``label`` from the master seed.

    The derivation is a fixed avalanche chain (see module docstring); equal
    inputs always give equal streams, and a zero master seed is as good as
    any other.
    """
    if not isinstance(label, tuple):
        label = (label,)
    h = mix64((master_seed + GOLDEN) & _MASK64)
    for word in _label_words(label):
        h = mix64(((h ^ word) + GOLDEN) & _MASK64)
    return RngStream(state=h, origin=(master_seed, label))
