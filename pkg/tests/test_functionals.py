import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from helpers import T, random_graph_space, random_space, random_spec
from mmspace import (
    BudgetExceeded,
    SemicharacterSpec,
    bigD,
    bigDA,
    boxplus,
    check_kappa_chain,
    chi,
    chi1,
    chi_exponent_bounds,
    chi_monte_carlo,
    delta,
    new_space,
    scale,
    trivial,
)
from mmspace.core import BoxSum
from mmspace.errors import ParseError
from mmspace.functionals import KAPPA_LOWER, KAPPA_UPPER, statistic_law

CHI1_T = 0.683940  # 0.5 + 0.5 / e


class TestSpec:
    def test_json_is_one_based(self):
        A = SemicharacterSpec(3, ((0, 2, 1.5),))
        assert A.to_dict() == {"n": 3, "a": [[1, 3, 1.5]]}
        assert SemicharacterSpec.from_dict(A.to_dict()) == A

    def test_empty(self):
        E = SemicharacterSpec.empty()
        assert E.to_dict() == {"n": 0, "a": []}
        assert SemicharacterSpec.from_dict({"n": 0, "a": []}).is_empty

    @pytest.mark.parametrize(
        "doc", [{"n": 2, "a": [[2, 1, 1.0]]}, {"n": 2, "a": [[1, 2, -1.0]]}, {"n": 2}, {"n": 2, "a": [[1, 2, 0.0]]}]
    )
    def test_rejects(self, doc):
        with pytest.raises(ParseError):
            SemicharacterSpec.from_dict(doc)


class TestChi:
    @given(st.floats(0.01, 0.99), st.floats(0.01, 10), st.floats(0.01, 5))
    @settings(max_examples=50, deadline=None)
    def test_two_point_formula(self, p, r, a):
        expect = (1 - p) ** 2 + p**2 + 2 * p * (1 - p) * math.exp(-a * r)
        assert chi(SemicharacterSpec.pair(a), T(p, r)) == pytest.approx(expect, rel=1e-12)

    def test_empty_spec(self):
        assert chi(SemicharacterSpec.empty(), random_space(np.random.default_rng(0), 4)) == 1.0

    def test_product_example(self):
        A = SemicharacterSpec.pair(1)
        assert chi(A, boxplus(T(), T())) == pytest.approx(0.467774, abs=5e-7)
        assert chi(A, T()) == pytest.approx(CHI1_T, abs=5e-7)

    @given(st.integers(0, 10**6), st.integers(1, 4), st.integers(2, 3))
    @settings(max_examples=40, deadline=None)
    def test_matches_tuple_enumeration(self, seed, n, order):
        rng = np.random.default_rng(seed)
        X = random_graph_space(rng, n)
        A = random_spec(rng, order)
        assert chi(A, X) == pytest.approx(oracles.semicharacter(A.entries, A.n, X.dist, X.weights), rel=1e-12)

    def test_positive(self):
        X = scale(1000.0, random_space(np.random.default_rng(1), 4))
        assert chi(SemicharacterSpec.pair(5), X) > 0

    def test_budget(self):
        X = random_space(np.random.default_rng(1), 50)
        with pytest.raises(BudgetExceeded):
            chi(random_spec(np.random.default_rng(0), 5), X)

    def test_unused_indices_do_not_cost(self):
        A = SemicharacterSpec(6, ((0, 1, 1.0),))
        assert chi(A, T()) == pytest.approx(CHI1_T, abs=5e-7)

    def test_factored_matches_explicit(self):
        rng = np.random.default_rng(2)
        X, Y = random_space(rng, 3), random_space(rng, 3)
        A = random_spec(rng, 3)
        S = BoxSum.from_scaled([0.5, 2.0, 0.5], [X, Y, X])
        assert chi(A, S) == pytest.approx(chi(A, S.materialize()), rel=1e-12)

    def test_statistic_law_scales(self):
        X = random_space(np.random.default_rng(3), 4)
        A = SemicharacterSpec.pair(1.3)
        v, p = statistic_law(A, X)
        assert p.sum() == pytest.approx(1.0)
        assert chi(A, scale(2.5, X)) == pytest.approx(float(p @ np.exp(-2.5 * v)), rel=1e-12)


class TestScalarGauges:
    def test_chi1_two_point(self):
        assert chi1(T()) == pytest.approx(CHI1_T, abs=5e-7)

    def test_trivial(self):
        assert bigD(trivial()) == 0
        assert delta(trivial()) == 0

    @given(st.integers(0, 10**6))
    @settings(max_examples=30, deadline=None)
    def test_additive(self, seed):
        rng = np.random.default_rng(seed)
        X, Y = random_space(rng, int(rng.integers(1, 5))), random_graph_space(rng, int(rng.integers(1, 5)))
        A = random_spec(rng, 3)
        assert bigD(boxplus(X, Y)) == pytest.approx(bigD(X) + bigD(Y), abs=1e-12)
        assert bigDA(A, boxplus(X, Y)) == pytest.approx(bigDA(A, X) + bigDA(A, Y), abs=1e-12)

    @pytest.mark.parametrize("p, d, expect", [(0.5, 1.0, 0.5), (0.3, 1.0, 0.42), (0.5, 0.2, 0.1), (0.5, 7.0, 0.5)])
    def test_delta(self, p, d, expect):
        assert delta(T(p, d)) == pytest.approx(expect, abs=1e-15)


class TestMonteCarlo:
    def test_trivial_is_exact(self):
        est = chi_monte_carlo(SemicharacterSpec.pair(1), trivial(), 100, seed=0)
        assert est.mean == 1.0 and est.stderr == 0.0

    def test_two_point(self):
        est = chi_monte_carlo(SemicharacterSpec.pair(1), T(), 100_000, seed=0)
        assert abs(est.z_score(chi1(T()))) <= 3

    def test_deterministic(self):
        X = random_space(np.random.default_rng(0), 5)
        A = random_spec(np.random.default_rng(1), 3)
        assert chi_monte_carlo(A, X, 5000, seed=9) == chi_monte_carlo(A, X, 5000, seed=9)

    def test_unbiased_on_random_spaces(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for k in range(20):
            X = random_space(rng, int(rng.integers(2, 7)))
            A = random_spec(rng, 3)
            est = chi_monte_carlo(A, X, 20_000, seed=k)
            worst = max(worst, abs(est.z_score(chi(A, X))))
        assert worst <= 4

    def test_factored_input(self):
        S = BoxSum.from_scaled([1.0] * 40, [T()] * 40)
        est = chi_monte_carlo(SemicharacterSpec.pair(1), S, 20_000, seed=1)
        assert abs(est.z_score(chi1(T()) ** 40)) <= 4


class TestExponentBounds:
    def test_half(self):
        A = SemicharacterSpec.pair(0.5)
        assert chi_exponent_bounds(A) == (1.0, 0.5)
        c1, ca = chi1(T()), chi(A, T())
        assert c1 <= ca <= c1**0.5
        assert ca == pytest.approx(0.803265, abs=5e-7)
        assert c1**0.5 == pytest.approx(0.827006, abs=5e-7)

    def test_equality_case(self):
        assert chi_exponent_bounds(SemicharacterSpec.pair(1)) == (1.0, 1.0)

    def test_triangle_spec(self):
        A = SemicharacterSpec(3, ((0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)))
        assert chi_exponent_bounds(A) == (4.0, 1.0)

    def test_sandwich_on_random_spaces(self):
        rng = np.random.default_rng(4)
        for _ in range(300):
            X = (random_space if rng.uniform() < 0.5 else random_graph_space)(rng, int(rng.integers(1, 6)))
            A = random_spec(rng, int(rng.integers(2, 4)))
            hi, lo = chi_exponent_bounds(A)
            c1, ca = chi1(X), chi(A, X)
            assert c1**hi <= ca * (1 + 1e-12)
            assert ca <= c1**lo * (1 + 1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            chi_exponent_bounds(SemicharacterSpec.empty())


class TestKappaChain:
    def test_constants(self):
        assert KAPPA_LOWER == pytest.approx(0.31606, abs=5e-6)
        assert KAPPA_UPPER == pytest.approx(1.58198, abs=5e-6)

    def test_two_point(self):
        r = check_kappa_chain(T())
        assert r.passed
        assert r.bigD == pytest.approx(0.379885, abs=5e-7)
        assert r.delta == 0.5
        assert r.lower == pytest.approx(0.12006, abs=1e-5)
        # KAPPA_UPPER * 0.379885 = 0.60097
        assert r.upper == pytest.approx(0.60097, abs=5e-6)

    def test_trivial(self):
        r = check_kappa_chain(trivial())
        assert (r.bigD, r.delta, r.lower, r.upper, r.passed) == (0.0, 0.0, 0.0, 0.0, True)

    def test_far_apart_points(self):
        X = new_space([[0, 50], [50, 0]], [0.5, 0.5])
        assert check_kappa_chain(X).passed
