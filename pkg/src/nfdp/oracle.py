"""Brute-force divergence audit of the subsample mechanisms.

Independently of the closed-form accountant, this module enumerates the
exact output distribution of subset sampling on tiny abstract datasets
{0, ..., n-1} and computes optimal hockey-stick divergences

    delta_tight(P, Q, eps) = sum_o max(0, P(o) - e^eps * Q(o)),

the largest additive slack any event needs. A claimed (epsilon, delta) holds
iff delta_tight <= delta for every neighboring pair in both orders.

Neighbors are add/remove-one-record: for a base dataset of size n the "add"
neighbor has an extra record (index n) and the "remove" neighbor lacks the
last record. Each pair is checked in both argument orders, four inequalities
total. The two orders are genuinely asymmetric -- the mechanism run on the
larger dataset places probability on outcomes the smaller one cannot
produce -- and the verdict reports the per-check tight deltas so that
structure stays visible.

Probabilities are exact rationals while every involved outcome space stays
at or below EXACT_OUTCOME_LIMIT outcomes; above that they are doubles and
verdicts allow a 1e-12 absolute slack.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .accounting import (
    PrivacyBudget,
    SamplingScheme,
    budget_with_replacement,
    budget_without_replacement,
)

Outcome = tuple[int, ...]
Prob = Union[Fraction, float]

ENUMERATION_CAP = 10**6
EXACT_OUTCOME_LIMIT = 10**4
FLOAT_SLACK = 1e-12


class EnumerationCapError(ValueError):
    """Outcome space too large to enumerate."""


def outcome_count(n: int, k: int, scheme: SamplingScheme) -> int:
    if scheme is SamplingScheme.WITHOUT_REPLACEMENT:
        return math.comb(n, k)
    return n**k


def enumerate_mechanism(
    n: int, k: int, scheme: SamplingScheme, exact: bool | None = None
) -> "OutcomeDistribution":
    """Exact uniform output distribution of sampling k from {0, ..., n-1}.

    Without replacement the outcomes are the C(n, k) sorted index tuples;
    with replacement they are all n**k ordered tuples.
    """
    if n < 1:
        raise ValueError(f"dataset size n must be >= 1, got {n}")
    if k < 1:
        raise ValueError(f"subset size k must be >= 1, got {k}")
    if scheme is SamplingScheme.WITHOUT_REPLACEMENT and k > n:
        raise ValueError(f"cannot enumerate {k}-subsets of {n} elements")
    count = outcome_count(n, k, scheme)
    if count > ENUMERATION_CAP:
        raise EnumerationCapError(
            f"outcome space has {count} elements, above the cap of {ENUMERATION_CAP}"
        )
    if exact is None:
        exact = count <= EXACT_OUTCOME_LIMIT
    if scheme is SamplingScheme.WITHOUT_REPLACEMENT:
        outcomes = tuple(itertools.combinations(range(n), k))
    else:
        outcomes = tuple(itertools.product(range(n), repeat=k))
    prob: Prob = Fraction(1, count) if exact else 1.0 / count
    return OutcomeDistribution(outcomes=outcomes, probabilities=(prob,) * count, exact=exact)


@dataclass(frozen=True)
class OutcomeDistribution:
    """Finite distribution over canonical outcomes (probabilities sum to 1)."""

    outcomes: tuple[Outcome, ...]
    probabilities: tuple[Prob, ...]
    exact: bool

    def __post_init__(self) -> None:
        if len(self.outcomes) != len(self.probabilities):
            raise ValueError("outcomes and probabilities must be parallel")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise ValueError("outcomes must be unique under the canonical form")
        if self.exact:
            total = float(sum(self.probabilities))
        else:
            total = math.fsum(self.probabilities)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1, got {total}")

    def as_dict(self) -> dict[Outcome, Prob]:
        return dict(zip(self.outcomes, self.probabilities))


def _hockey_stick(
    p: dict[Outcome, Prob], q: dict[Outcome, Prob], exp_epsilon: Prob
) -> Prob:
    """sum_o max(0, p(o) - e^eps * q(o)); outcomes missing from q count as 0."""
    zero: Prob = Fraction(0) if isinstance(exp_epsilon, Fraction) else 0.0
    total = zero
    for outcome, mass in p.items():
        gap = mass - exp_epsilon * q.get(outcome, zero)
        if gap > 0:
            total += gap
    return total


def hockey_stick_delta(
    p: OutcomeDistribution, q: OutcomeDistribution, epsilon_nat: float
) -> float:
    """Tightest delta for which (p, q) satisfy the DP inequality at epsilon."""
    if epsilon_nat < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon_nat}")
    return float(_hockey_stick(p.as_dict(), q.as_dict(), math.exp(epsilon_nat)))


def theorem_budget(n: int, k: int, scheme: SamplingScheme) -> PrivacyBudget:
    if scheme is SamplingScheme.WITHOUT_REPLACEMENT:
        return budget_without_replacement(n, k)
    return budget_with_replacement(n, k)


def theorem_claim_exact(n: int, k: int, scheme: SamplingScheme) -> tuple[Fraction, Fraction]:
    """The claimed budget as exact rationals (e^epsilon, delta)."""
    if scheme is SamplingScheme.WITHOUT_REPLACEMENT:
        return Fraction(n + 1, n + 1 - k), Fraction(k, n)
    return Fraction(n + 1, n) ** k, 1 - Fraction(n - 1, n) ** k


@dataclass(frozen=True)
class DirectionCheck:
    """One of the four DP inequalities for a claim at base size n.

    direction "add": the neighbor has one extra record (sizes n vs n+1);
    "remove": the neighbor lacks one record (n vs n-1). swapped=False puts
    the base mechanism first, HS(M(D) || M(D')); swapped=True reverses it.
    """

    direction: str
    swapped: bool
    tight_delta: Prob
    claimed_delta: Prob
    exact: bool

    @property
    def slack(self) -> Prob:
        return self.claimed_delta - self.tight_delta

    @property
    def holds(self) -> bool:
        if self.exact:
            return self.tight_delta <= self.claimed_delta
        return float(self.tight_delta) <= float(self.claimed_delta) + FLOAT_SLACK


@dataclass(frozen=True)
class ClaimVerdict:
    n: int
    k: int
    scheme: SamplingScheme
    claimed: PrivacyBudget
    checks: tuple[DirectionCheck, ...]
    skipped: tuple[str, ...]
    exact: bool

    @property
    def holds(self) -> bool:
        return all(check.holds for check in self.checks)

    def check(self, direction: str, swapped: bool) -> DirectionCheck:
        for c in self.checks:
            if c.direction == direction and c.swapped is swapped:
                return c
        raise KeyError(f"no {direction} (swapped={swapped}) check; skipped: {self.skipped}")


def verify_claim(
    n: int,
    k: int,
    scheme: SamplingScheme,
    claimed: PrivacyBudget | None = None,
    exact: bool | None = None,
) -> ClaimVerdict:
    """Audit a claimed budget against the enumerated mechanism at size n.

    With ``claimed=None`` the sampling theorem's own budget is audited, in
    exact rational arithmetic whenever the outcome spaces permit. A removed
    neighbor smaller than k cannot run the without-replacement mechanism at
    all; those checks are skipped and listed in the verdict.
    """
    counts = [outcome_count(n, k, scheme), outcome_count(n + 1, k, scheme)]
    remove_defined = n - 1 >= 1 and (
        scheme is SamplingScheme.WITH_REPLACEMENT or k <= n - 1
    )
    if remove_defined:
        counts.append(outcome_count(n - 1, k, scheme))
    if max(counts) > ENUMERATION_CAP:
        raise EnumerationCapError(
            f"outcome space has {max(counts)} elements, above the cap of {ENUMERATION_CAP}"
        )
    if exact is None:
        exact = max(counts) <= EXACT_OUTCOME_LIMIT

    if claimed is None:
        budget = theorem_budget(n, k, scheme)
        if exact:
            exp_eps, claimed_delta = theorem_claim_exact(n, k, scheme)
        else:
            exp_eps, claimed_delta = math.exp(budget.epsilon_nat), budget.delta
    else:
        budget = claimed
        if exact:
            exp_eps = Fraction(math.exp(claimed.epsilon_nat))
            claimed_delta = Fraction(claimed.delta)
        else:
            exp_eps, claimed_delta = math.exp(claimed.epsilon_nat), claimed.delta

    base = enumerate_mechanism(n, k, scheme, exact=exact).as_dict()
    added = enumerate_mechanism(n + 1, k, scheme, exact=exact).as_dict()

    checks = []
    skipped = []
    for direction, other in (("add", added), ("remove", None)):
        if direction == "remove":
            if not remove_defined:
                skipped.append(f"remove direction undefined: cannot sample {k} from {n - 1}")
                continue
            other = enumerate_mechanism(n - 1, k, scheme, exact=exact).as_dict()
        for swapped in (False, True):
            first, second = (other, base) if swapped else (base, other)
            tight = _hockey_stick(first, second, exp_eps)
            checks.append(
                DirectionCheck(
                    direction=direction,
                    swapped=swapped,
                    tight_delta=tight,
                    claimed_delta=claimed_delta,
                    exact=exact,
                )
            )
    return ClaimVerdict(
        n=n,
        k=k,
        scheme=scheme,
        claimed=budget,
        checks=tuple(checks),
        skipped=tuple(skipped),
        exact=exact,
    )


def theorem_sweep_cells(
    n_max: int = 6,
    n_min: int = 2,
    schemes: tuple[SamplingScheme, ...] = tuple(SamplingScheme),
    with_replacement_k_max: int = 6,
    with_replacement_k_max_n: int = 4,
) -> list[tuple[int, int, SamplingScheme]]:
    """The (n, k, scheme) grid audited by the default theorem sweep."""
    cells = []
    for scheme in schemes:
        for n in range(n_min, n_max + 1):
            k_top = n
            if scheme is SamplingScheme.WITH_REPLACEMENT and n <= with_replacement_k_max_n:
                k_top = max(n, with_replacement_k_max)
            for k in range(1, k_top + 1):
                cells.append((n, k, scheme))
    return cells
