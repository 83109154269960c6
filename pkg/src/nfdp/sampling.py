"""Seeded subset selection from a party's private dataset.

This single draw is the entire privacy mechanism: a party selects its
training subset once, before any training, and keeps it fixed for the whole
run. Uniformity matters for the guarantee, so bounded integers come from
rejection sampling on the 64-bit stream rather than a modulo.

Canonical forms follow each scheme's outcome space: a without-replacement
selection is a set (indices reported ascending), a with-replacement
selection is an ordered tuple (draw order preserved).
"""

from __future__ import annotations

from dataclasses import dataclass

from .accounting import SamplingScheme
from .rng import Label, RngStream


@dataclass(frozen=True)
class SubsetSelection:
    """Indices sampled from a dataset of size n, plus how they were drawn."""

    indices: tuple[int, ...]
    scheme: SamplingScheme
    seed_path: tuple[int, Label]

    def __len__(self) -> int:
        return len(self.indices)


def sample_without_replacement(stream: RngStream, n: int, k: int) -> SubsetSelection:
    """Uniform k-subset of range(n) via partial Fisher-Yates, sorted ascending."""
    if n < 1:
        raise ValueError(f"dataset size n must be >= 1, got {n}")
    if k < 1:
        raise ValueError(f"subset size k must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"cannot draw {k} distinct indices from {n} without replacement")
    pool = list(range(n))
    for i in range(k):
        j = i + stream.randbelow(n - i)
        pool[i], pool[j] = pool[j], pool[i]
    return SubsetSelection(
        indices=tuple(sorted(pool[:k])),
        scheme=SamplingScheme.WITHOUT_REPLACEMENT,
        seed_path=stream.origin,
    )


def sample_with_replacement(stream: RngStream, n: int, k: int) -> SubsetSelection:
    """k independent uniform draws over range(n), in draw order."""
    if n < 1:
        raise ValueError(f"dataset size n must be >= 1, got {n}")
    if k < 1:
        raise ValueError(f"subset size k must be >= 1, got {k}")
    indices = tuple(stream.randbelow(n) for _ in range(k))
    return SubsetSelection(
        indices=indices,
        scheme=SamplingScheme.WITH_REPLACEMENT,
        seed_path=stream.origin,
    )


def sample_subset(stream: RngStream, n: int, k: int, scheme: SamplingScheme) -> SubsetSelection:
    if scheme is SamplingScheme.WITHOUT_REPLACEMENT:
        return sample_without_replacement(stream, n, k)
    return sample_with_replacement(stream, n, k)
