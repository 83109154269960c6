import itertools
import math
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nfdp.accounting import PrivacyBudget, SamplingScheme
from nfdp.oracle import (
    EnumerationCapError,
    OutcomeDistribution,
    enumerate_mechanism,
    hockey_stick_delta,
    theorem_budget,
    theorem_claim_exact,
    theorem_sweep_cells,
    verify_claim,
)
from nfdp.rng import derive_stream
from nfdp.sampling import sample_subset

WITH = SamplingScheme.WITH_REPLACEMENT
WITHOUT = SamplingScheme.WITHOUT_REPLACEMENT


class TestEnumerate:
    def test_uniform_singletons(self):
        dist = enumerate_mechanism(3, 1, WITHOUT)
        assert dist.as_dict() == {(0,): Fraction(1, 3), (1,): Fraction(1, 3), (2,): Fraction(1, 3)}

    def test_ordered_tuples(self):
        dist = enumerate_mechanism(2, 2, WITH)
        assert dist.as_dict() == {
            (0, 0): Fraction(1, 4),
            (0, 1): Fraction(1, 4),
            (1, 0): Fraction(1, 4),
            (1, 1): Fraction(1, 4),
        }

    def test_choose_4_2(self):
        dist = enumerate_mechanism(4, 2, WITHOUT)
        assert len(dist.outcomes) == 6
        assert all(p == Fraction(1, 6) for p in dist.probabilities)

    def test_cap(self):
        with pytest.raises(EnumerationCapError):
            enumerate_mechanism(10, 8, WITH)  # 10**8 outcomes

    def test_float_mode_above_exact_limit(self):
        dist = enumerate_mechanism(7, 6, WITH)  # 117649 outcomes
        assert not dist.exact
        assert dist.probabilities[0] == pytest.approx(7.0**-6)

    def test_distribution_validation(self):
        with pytest.raises(ValueError):
            OutcomeDistribution(outcomes=((0,), (1,)), probabilities=(0.5, 0.6), exact=False)
        with pytest.raises(ValueError):
            OutcomeDistribution(outcomes=((0,), (0,)), probabilities=(0.5, 0.5), exact=False)


class TestHockeyStick:
    def test_identical_distributions_at_zero_eps(self):
        p = enumerate_mechanism(3, 2, WITHOUT)
        assert hockey_stick_delta(p, p, 0.0) == 0.0

    def test_add_one_record_singleton_draw(self):
        p = enumerate_mechanism(3, 1, WITHOUT)
        q = enumerate_mechanism(4, 1, WITHOUT)
        eps = math.log(4 / 3)
        assert hockey_stick_delta(p, q, eps) == pytest.approx(0.0, abs=1e-15)
        # reversed, all slack sits on the outcome containing the extra record
        assert hockey_stick_delta(q, p, eps) == pytest.approx(0.25, abs=1e-15)

    def test_pairs_with_extra_record(self):
        p = enumerate_mechanism(4, 2, WITHOUT)  # the dataset with the extra record
        q = enumerate_mechanism(3, 2, WITHOUT)
        assert hockey_stick_delta(p, q, math.log(2.0)) == pytest.approx(0.5, abs=1e-15)

    def test_nonincreasing_in_epsilon_and_tv_at_zero(self):
        p = enumerate_mechanism(5, 3, WITHOUT)
        q = enumerate_mechanism(6, 3, WITHOUT)
        deltas = [hockey_stick_delta(p, q, e) for e in (0.0, 0.1, 0.2, 0.5, 1.0, 2.0)]
        assert all(a >= b for a, b in zip(deltas, deltas[1:]))
        tv = sum(
            max(0.0, float(pp) - float(q.as_dict().get(o, 0)))
            for o, pp in p.as_dict().items()
        )
        assert deltas[0] == pytest.approx(tv, abs=1e-15)

    @given(eps=st.floats(min_value=0.0, max_value=5.0))
    @settings(max_examples=50)
    def test_range(self, eps):
        p = enumerate_mechanism(4, 2, WITH)
        q = enumerate_mechanism(5, 2, WITH)
        d = hockey_stick_delta(p, q, eps)
        assert 0.0 <= d <= 1.0


class TestVerifyClaim:
    def test_theorem_holds_without_replacement(self):
        verdict = verify_claim(5, 2, WITHOUT)
        assert verdict.holds
        assert verdict.exact

    def test_theorem_holds_with_replacement(self):
        verdict = verify_claim(4, 3, WITH)
        assert verdict.holds

    def test_impossible_claim_violated(self):
        verdict = verify_claim(5, 2, WITHOUT, claimed=PrivacyBudget(0.0, 0.01))
        assert not verdict.holds
        # at eps=0 the tight delta is a total-variation distance, far above 0.01
        worst = max(float(c.tight_delta) for c in verdict.checks)
        assert worst > 0.01

    def test_zero_claim_violated(self):
        verdict = verify_claim(3, 1, WITHOUT, claimed=PrivacyBudget(0.0, 0.0))
        assert not verdict.holds

    def test_four_checks_reported(self):
        verdict = verify_claim(5, 2, WITHOUT)
        assert len(verdict.checks) == 4
        assert {(c.direction, c.swapped) for c in verdict.checks} == {
            ("add", False),
            ("add", True),
            ("remove", False),
            ("remove", True),
        }

    def test_tightness_structure_without_replacement(self):
        # the mechanism run on the (n+1)-sized dataset, checked against the
        # n-sized one, has tight delta exactly k/(n+1) -- strictly below the
        # claimed k/n; the shrunken-neighbor check is exactly k/n (no slack).
        for n, k in [(4, 2), (5, 3), (6, 1), (6, 5)]:
            verdict = verify_claim(n, k, WITHOUT)
            assert verdict.exact
            assert verdict.check("add", True).tight_delta == Fraction(k, n + 1)
            assert verdict.check("add", False).tight_delta == 0
            assert verdict.check("remove", False).tight_delta == Fraction(k, n)
            assert verdict.check("remove", False).slack == 0

    def test_remove_direction_skipped_at_full_sample(self):
        verdict = verify_claim(4, 4, WITHOUT)
        assert verdict.holds
        assert len(verdict.checks) == 2
        assert verdict.skipped

    def test_slack_reported_per_direction(self):
        verdict = verify_claim(5, 2, WITHOUT)
        slack = verdict.check("add", True).slack
        assert slack == Fraction(2, 5) - Fraction(2, 6)

    def test_cap_propagates(self):
        with pytest.raises(EnumerationCapError):
            verify_claim(9, 8, WITH)


class TestTheoremSweep:
    @pytest.mark.parametrize("n,k,scheme", theorem_sweep_cells())
    def test_every_cell_holds(self, n, k, scheme):
        assert verify_claim(n, k, scheme).holds

    def test_sweep_grid_shape(self):
        cells = theorem_sweep_cells()
        assert (2, 1, WITHOUT) in cells and (6, 6, WITHOUT) in cells
        assert (2, 6, WITH) in cells and (4, 6, WITH) in cells
        assert (5, 6, WITH) not in cells

    def test_exact_claims_match_float_budgets(self):
        for n, k, scheme in theorem_sweep_cells():
            exp_eps, delta = theorem_claim_exact(n, k, scheme)
            budget = theorem_budget(n, k, scheme)
            assert math.log(float(exp_eps)) == pytest.approx(budget.epsilon_nat, rel=1e-12)
            assert float(delta) == pytest.approx(budget.delta, rel=1e-12)


class TestMonteCarloCrossCheck:
    """Tie the enumerated distributions to the actual sampler."""

    @pytest.mark.parametrize("scheme,n,k", [(WITHOUT, 4, 2), (WITH, 3, 2)])
    def test_sampler_matches_enumeration(self, scheme, n, k):
        s = derive_stream(2024, ("mc-cross", scheme.value))
        draws = 100_000
        counts = Counter(sample_subset(s, n, k, scheme).indices for _ in range(draws))
        dist = dict(enumerate_mechanism(n, k, scheme).as_dict())
        linf = max(
            abs(counts.get(o, 0) / draws - float(p)) for o, p in dist.items()
        )
        assert set(counts) <= set(dist)
        assert linf <= 0.01
