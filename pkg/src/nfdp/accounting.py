"""Closed-form privacy accounting for subsample mechanisms.

Sampling k records once from a private dataset of size n is itself a
differentially private release of the sampled subset:

* without replacement:  (ln((n+1)/(n+1-k)), k/n)
* with replacement:     (k*ln((n+1)/n), 1 - ((n-1)/n)**k)

Epsilon is stored and composed in natural-log units everywhere; base-10 is
a display conversion only (``epsilon_log10``). Mixing the two silently is
the classic reproducibility trap when comparing against published tables,
which report base-10 epsilon but natural delta.

Also provided: the component-wise privacy ordering of two budgets, basic
sequential composition, and the Gaussian noise scale needed by a
perturbation baseline to meet a target budget over T queries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

_LOG10_E = math.log10(math.e)


class SamplingScheme(Enum):
    WITHOUT_REPLACEMENT = "without"
    WITH_REPLACEMENT = "with"

    @classmethod
    def parse(cls, text: str) -> "SamplingScheme":
        for scheme in cls:
            if scheme.value == text:
                return scheme
        raise ValueError(f"unknown sampling scheme {text!r} (expected 'with' or 'without')")


class PrivacyOrdering(Enum):
    STRICTLY_MORE_PRIVATE = "strictly_more_private"
    EQUAL = "equal"
    LESS_PRIVATE = "less_private"
    INCOMPARABLE = "incomparable"


@dataclass(frozen=True)
class PrivacyBudget:
    """An (epsilon, delta) pair with epsilon in natural-log units."""

    epsilon_nat: float
    delta: float

    def __post_init__(self) -> None:
        if not (self.epsilon_nat >= 0.0):
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon_nat}")
        if not (0.0 <= self.delta <= 1.0):
            raise ValueError(f"delta must be in [0, 1], got {self.delta}")

    @property
    def epsilon_log10(self) -> float:
        """Epsilon converted to log-10 units (table display convention)."""
        return self.epsilon_nat * _LOG10_E

    @classmethod
    def from_log10(cls, epsilon_log10: float, delta: float) -> "PrivacyBudget":
        return cls(epsilon_log10 / _LOG10_E, delta)


def budget_without_replacement(n: int, k: int) -> PrivacyBudget:
    """Budget of releasing a uniform k-subset drawn without replacement.

    Returns (ln((n+1)/(n+1-k)), k/n).
    """
    if n < 1:
        raise ValueError(f"dataset size n must be >= 1, got {n}")
    if k < 1:
        raise ValueError(f"subset size k must be >= 1, got {k}")
    if k > n:
        raise ValueError(f"subset size k must be <= n for sampling without replacement, got k={k} > n={n}")
    # (n+1)/(n+1-k) = 1 + k/(n+1-k); log1p keeps small budgets accurate and
    # makes the k=1 epsilon bit-identical across both schemes.
    epsilon = math.log1p(k / (n + 1 - k))
    return PrivacyBudget(epsilon, k / n)


def budget_with_replacement(n: int, k: int) -> PrivacyBudget:
    """Budget of releasing k uniform draws taken with replacement.

    Returns (k*ln((n+1)/n), 1 - ((n-1)/n)**k). k may exceed n.
    """
    if n < 1:
        raise ValueError(f"dataset size n must be >= 1, got {n}")
    if k < 1:
        raise ValueError(f"subset size k must be >= 1, got {k}")
    epsilon = k * math.log1p(1.0 / n)
    if k == 1:
        # 1 - (n-1)/n is exactly 1/n; computing it directly keeps the two
        # schemes' budgets bit-identical in their k=1 equality case.
        delta = 1.0 / n
    else:
        delta = -math.expm1(k * math.log1p(-1.0 / n))
    return PrivacyBudget(epsilon, delta)


def more_private(a: PrivacyBudget, b: PrivacyBudget) -> PrivacyOrdering:
    """Component-wise ordering of budget ``a`` against budget ``b``."""
    de = (a.epsilon_nat > b.epsilon_nat) - (a.epsilon_nat < b.epsilon_nat)
    dd = (a.delta > b.delta) - (a.delta < b.delta)
    if de < 0 and dd < 0:
        return PrivacyOrdering.STRICTLY_MORE_PRIVATE
    if de == 0 and dd == 0:
        return PrivacyOrdering.EQUAL
    if de > 0 and dd > 0:
        return PrivacyOrdering.LESS_PRIVATE
    return PrivacyOrdering.INCOMPARABLE


def compose_basic(per_query: PrivacyBudget, queries: int) -> PrivacyBudget:
    """Basic (linear) sequential composition over ``queries`` releases."""
    if queries < 1:
        raise ValueError(f"queries must be >= 1, got {queries}")
    return PrivacyBudget(queries * per_query.epsilon_nat, min(1.0, queries * per_query.delta))


def calibrate_gaussian_sigma(target: PrivacyBudget, total_queries: int, c2: float = 1.0) -> float:
    """Gaussian noise scale for a target budget over ``total_queries`` queries.

    sigma = c2 * sqrt(T * ln(1/delta)) / epsilon, with epsilon in natural-log
    units. Undefined at epsilon = 0 or delta in {0, 1}.
    """
    if total_queries < 1:
        raise ValueError(f"total_queries must be >= 1, got {total_queries}")
    if c2 <= 0.0:
        raise ValueError(f"c2 must be positive, got {c2}")
    if target.epsilon_nat == 0.0:
        raise ValueError("sigma calibration is undefined at epsilon = 0")
    if not (0.0 < target.delta < 1.0):
        raise ValueError(f"sigma calibration requires 0 < delta < 1, got {target.delta}")
    return c2 * math.sqrt(total_queries * math.log(1.0 / target.delta)) / target.epsilon_nat


@dataclass(frozen=True)
class LdpCalibration:
    """A calibrated Gaussian perturbation: target budget, query count, scale."""

    total_queries: int
    c2: float
    target: PrivacyBudget
    sigma: float

    @classmethod
    def calibrate(cls, target: PrivacyBudget, total_queries: int, c2: float = 1.0) -> "LdpCalibration":
        sigma = calibrate_gaussian_sigma(target, total_queries, c2)
        return cls(total_queries=total_queries, c2=c2, target=target, sigma=sigma)
