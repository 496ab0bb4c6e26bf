import math
from itertools import permutations

import numpy as np
import pytest

from opial import (
    BudgetExceededError,
    check_two3_decomposition,
    enumerate_functional,
    make_discrete,
    make_uniform_interval,
    opial_terms,
    partition_masses,
    quantize,
    theorem2_terms,
    theorem3_terms,
    weighted_opial_terms,
    wirtinger_terms,
)
from opial.oracle import region_sum_for_permutation

from conftest import random_atomic_model


def uniform_model(n):
    return quantize(make_discrete(range(1, n + 1), [1.0 / n] * n), 1)


def assert_terms_close(fast: dict, slow: dict, tol=1e-12):
    for key in set(fast) & set(slow):
        scale = max(1.0, abs(fast[key]), abs(slow[key]))
        assert abs(fast[key] - slow[key]) <= tol * scale, (key, fast[key], slow[key])


class TestEnumerateFunctional:
    def test_thm1_example(self):
        q = uniform_model(3)
        psi = np.array([1.0, 2.0, 3.0])
        fast = opial_terms(q, psi).terms
        slow = enumerate_functional(q, psi, functional="thm1-lower")
        assert_terms_close(fast, slow)

    def test_thm2_27_triples(self):
        q = uniform_model(3)
        slow = enumerate_functional(q, np.ones(3), functional="thm2", n=2)
        assert slow["lhs"] == pytest.approx(1 / 27, rel=1e-14)

    def test_single_atom(self):
        q = uniform_model(1)
        psi = np.array([2.0])
        for functional, kwargs in (
            ("thm1-lower", {}),
            ("thm1-upper", {}),
            ("thm2", {"n": 2}),
            ("thm3", {}),
        ):
            slow = enumerate_functional(q, psi, functional=functional, **kwargs)
            if functional.startswith("thm1"):
                # the only pair is the tie: lhs = |psi * psi/2| * 1
                assert slow["lhs"] == pytest.approx(2.0)
            else:
                assert slow["lhs"] == 0.0

    def test_random_equivalence_battery(self, rng):
        for _ in range(60):
            q = random_atomic_model(rng, m_max=8)
            m = q.node_count
            psi = rng.standard_normal(m)
            chi = np.abs(rng.standard_normal(m))
            assert_terms_close(
                opial_terms(q, psi, "below").terms,
                enumerate_functional(q, psi, functional="thm1-lower"),
            )
            assert_terms_close(
                opial_terms(q, psi, "above").terms,
                enumerate_functional(q, psi, functional="thm1-upper"),
            )
            for n in (1, 2, 3):
                assert_terms_close(
                    theorem2_terms(q, psi, n).terms,
                    enumerate_functional(q, psi, functional="thm2", n=n),
                )
            assert_terms_close(
                theorem3_terms(q, psi).terms,
                enumerate_functional(q, psi, functional="thm3"),
            )
            for direction, fid in (("below", "weighted-lower"), ("above", "weighted-upper")):
                assert_terms_close(
                    weighted_opial_terms(q, psi, chi, direction).terms,
                    enumerate_functional(q, psi, chi=chi, functional=fid),
                )
            centered = psi - float(np.sum(q.mass * psi))
            assert_terms_close(
                wirtinger_terms(q, centered).terms,
                enumerate_functional(q, centered, functional="wirtinger"),
            )

    def test_corollary_equivalence(self, rng):
        from opial import Distribution, corollary_split

        for _ in range(40):
            q = random_atomic_model(rng, m_max=8, m_min=2)
            psi = rng.standard_normal(q.node_count)
            cut = int(rng.integers(1, q.node_count))
            c = float(q.support[cut - 1])
            dist = Distribution(atoms=tuple(zip(q.support, q.mass)))
            fast = corollary_split(dist, psi, c, m=1).terms
            slow = enumerate_functional(q, psi, functional="corollary", c=c)
            assert_terms_close(fast, slow)

    def test_budget_enforced(self):
        q = uniform_model(8)
        with pytest.raises(BudgetExceededError, match="budget"):
            enumerate_functional(q, np.ones(8), functional="thm2", n=3, budget=100)

    def test_missing_weight_rejected(self):
        q = uniform_model(3)
        with pytest.raises(ValueError, match="chi"):
            enumerate_functional(q, np.ones(3), functional="weighted-lower")

    def test_unknown_functional(self):
        q = uniform_model(3)
        with pytest.raises(ValueError, match="oracle"):
            enumerate_functional(q, np.ones(3), functional="o9-2")


class TestPartitionMasses:
    def test_two_point_uniform(self):
        parts = partition_masses(uniform_model(2))
        assert parts.u == 0.0
        assert parts.w == pytest.approx(0.25, abs=1e-15)
        assert parts.v1 + parts.v2 == pytest.approx(0.75, abs=1e-15)
        assert parts.v1 == pytest.approx(0.375, abs=1e-15)

    def test_three_point_uniform(self):
        parts = partition_masses(uniform_model(3))
        assert parts.u == pytest.approx(2 / 9, rel=1e-14)

    def test_total_is_one(self, rng):
        for _ in range(50):
            q = random_atomic_model(rng, m_max=10)
            parts = partition_masses(q)
            assert abs(parts.total - 1.0) <= 1e-12

    def test_quantized_continuous_tie_mass_bound(self):
        m = 200
        q = quantize(make_uniform_interval(0, 1), m)
        parts = partition_masses(q, budget=10**8)
        assert parts.v1 + parts.v2 + parts.w <= 3.0 / m + 1.0 / m**2

    def test_ties_vanish_under_refinement(self):
        previous = None
        for m in (10, 40, 160):
            q = quantize(make_uniform_interval(0, 1), m)
            parts = partition_masses(q, budget=10**8)
            tie_mass = parts.v1 + parts.v2 + parts.w
            if previous is not None:
                assert tie_mass < previous
            previous = tie_mass


class TestTwo3Decomposition:
    def test_constant_total_is_one(self):
        q = uniform_model(4)
        rec = check_two3_decomposition(q, np.ones(4))
        assert rec.total == pytest.approx(1.0, abs=1e-14)

    def test_two_point_w_term(self):
        rec = check_two3_decomposition(uniform_model(2), np.ones(2))
        assert rec.w_term == pytest.approx(0.25, abs=1e-15)

    def test_u_term_matches_nested_integral(self, rng):
        # for constant |psi| the all-distinct region collapses by
        # exchangeability to 6x the strictly ordered integral, which is
        # 3! x the second-order lhs; non-constant |psi| breaks the collapse
        for _ in range(30):
            q = random_atomic_model(rng, m_max=9)
            scale = float(rng.uniform(0.5, 2.0))
            psi = scale * rng.choice([-1.0, 1.0], q.node_count)
            rec = check_two3_decomposition(q, psi)
            lhs = theorem2_terms(q, np.abs(psi), 2).terms["lhs"]
            assert rec.u_term == pytest.approx(6.0 * lhs, rel=1e-11, abs=1e-14)

    def test_reconstructs_mean_square(self, rng):
        for _ in range(100):
            q = random_atomic_model(rng, m_max=10)
            psi = rng.standard_normal(q.node_count)
            rec = check_two3_decomposition(q, psi)
            assert rec.rel_err <= 1e-12


class TestPermutationIdentity:
    def test_all_six_permutations_agree(self, rng):
        for _ in range(10):
            q = random_atomic_model(rng, m_max=7)
            psi = rng.standard_normal(q.node_count)
            sums = [
                region_sum_for_permutation(q, psi, perm)
                for perm in permutations((0, 1, 2))
            ]
            for value in sums[1:]:
                assert value == pytest.approx(sums[0], rel=1e-12, abs=1e-15)

    def test_three_distinct_permutations_explicitly(self):
        q = uniform_model(5)
        psi = np.array([1.0, -2.0, 0.5, 3.0, -1.0])
        a = region_sum_for_permutation(q, psi, (0, 1, 2))
        b = region_sum_for_permutation(q, psi, (2, 0, 1))
        c = region_sum_for_permutation(q, psi, (1, 2, 0))
        assert a == pytest.approx(b, rel=1e-13)
        assert a == pytest.approx(c, rel=1e-13)

    def test_identity_permutation_is_u_term(self, rng):
        # same collapse caveat: with constant |psi| the all-distinct region
        # integral is 6x any single permuted region sum
        q = random_atomic_model(rng, m_max=8)
        psi = 1.7 * rng.choice([-1.0, 1.0], q.node_count)
        rec = check_two3_decomposition(q, psi)
        ident = region_sum_for_permutation(q, psi, (0, 1, 2))
        assert rec.u_term == pytest.approx(6.0 * ident, rel=1e-12, abs=1e-15)
