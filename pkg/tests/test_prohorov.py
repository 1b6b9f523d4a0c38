import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from helpers import T, random_graph_space, random_space, random_weights
from mmspace import (
    Certificate,
    DimensionMismatch,
    TooLarge,
    boxplus,
    dgpr_lower,
    dgpr_to_trivial,
    dgpr_to_trivial_exact,
    dgpr_upper,
    new_space,
    prohorov,
    prohorov_oracle,
    trivial,
    verify_certificate,
)
from mmspace.prohorov import strassen


class TestProhorov:
    def test_equal_measures(self):
        X = random_space(np.random.default_rng(0), 5)
        assert prohorov(X.weights, X.weights, X.dist) == 0.0
        assert prohorov_oracle(X.weights, X.weights, X.dist) == 0.0

    def test_two_point_example(self):
        d = [[0, 1], [1, 0]]
        assert prohorov([0.5, 0.5], [0.8, 0.2], d) == pytest.approx(0.3, abs=1e-15)
        assert prohorov_oracle([0.5, 0.5], [0.8, 0.2], d) == pytest.approx(0.3, abs=1e-15)

    def test_close_points(self):
        # all mass moves a short distance: the answer is that distance
        d = [[0, 0.1], [0.1, 0]]
        assert prohorov([1.0 - 1e-9, 1e-9], [1e-9, 1.0 - 1e-9], d) == pytest.approx(0.1)

    @given(st.integers(0, 10**6), st.integers(1, 8))
    @settings(max_examples=80, deadline=None)
    def test_agrees_with_oracles(self, seed, n):
        rng = np.random.default_rng(seed)
        X = (random_space if seed % 2 else random_graph_space)(rng, n)
        m1, m2 = random_weights(rng, n), random_weights(rng, n)
        v = prohorov(m1, m2, X.dist)
        assert v == pytest.approx(prohorov_oracle(m1, m2, X.dist), abs=1e-12)
        assert v == pytest.approx(oracles.prohorov_lp(m1, m2, X.dist), abs=1e-9)

    def test_symmetric(self):
        rng = np.random.default_rng(3)
        X = random_space(rng, 6)
        m1, m2 = random_weights(rng, 6), random_weights(rng, 6)
        assert prohorov(m1, m2, X.dist) == pytest.approx(prohorov(m2, m1, X.dist), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            prohorov([0.5, 0.5], [1.0], [[0, 1], [1, 0]])

    def test_oracle_size_cap(self):
        X = random_space(np.random.default_rng(0), 13)
        with pytest.raises(TooLarge):
            prohorov_oracle(X.weights, X.weights, X.dist)

    def test_strassen_coupling_is_witness(self):
        rng = np.random.default_rng(8)
        X = random_space(rng, 6)
        m1, m2 = random_weights(rng, 6), random_weights(rng, 6)
        eps, pi = strassen(m1, m2, X.dist)
        assert np.allclose(pi.sum(axis=1), m1) and np.allclose(pi.sum(axis=0), m2)
        assert pi[X.dist > eps + 1e-12].sum() <= eps + 1e-12


class TestDistanceToPoint:
    @pytest.mark.parametrize("X, expect", [(trivial(), 0.0), (T(0.3, 1), 0.3), (T(0.5, 0.2), 0.2)])
    def test_examples(self, X, expect):
        assert dgpr_to_trivial(X) == pytest.approx(expect, abs=1e-15)

    @given(st.integers(0, 10**6), st.integers(1, 8))
    @settings(max_examples=80, deadline=None)
    def test_matches_definition(self, seed, n):
        rng = np.random.default_rng(seed)
        X = (random_space if seed % 2 else random_graph_space)(rng, n)
        assert dgpr_to_trivial(X) == pytest.approx(oracles.distance_to_point(X.dist, X.weights), abs=1e-12)

    @given(st.integers(0, 10**6), st.integers(1, 9))
    @settings(max_examples=80, deadline=None)
    def test_exact_matches_enumeration(self, seed, n):
        rng = np.random.default_rng(seed)
        X = (random_space if seed % 2 else random_graph_space)(rng, n)
        exact = dgpr_to_trivial_exact(X)
        assert exact == pytest.approx(oracles.distance_to_point_exact(X.dist, X.weights), abs=1e-12)
        assert exact <= dgpr_to_trivial(X) + 1e-12

    def test_centred_value_can_exceed_exact(self):
        # an equilateral triangle: the midpoint of a side beats every vertex
        X = new_space(1.0 - np.eye(3), [0.4, 0.4, 0.2])
        assert dgpr_to_trivial(X) == pytest.approx(0.6)
        assert dgpr_to_trivial_exact(X) == pytest.approx(0.5)

    def test_exact_is_attained_by_a_certificate(self):
        X = new_space(1.0 - np.eye(3), [0.4, 0.4, 0.2])
        bound, cert = dgpr_upper(X, trivial(), budget=16)
        assert bound == pytest.approx(0.5)
        assert verify_certificate(X, trivial(), cert)

    def test_exact_size_cap(self):
        with pytest.raises(TooLarge):
            dgpr_to_trivial_exact(random_space(np.random.default_rng(0), 10), max_points=8)


class TestBounds:
    def test_lower_examples(self):
        X = random_space(np.random.default_rng(0), 4)
        assert dgpr_lower(X, X) == 0
        assert dgpr_lower(T(0.3, 1), trivial()) == pytest.approx(0.3)

    def test_upper_self(self):
        X = random_space(np.random.default_rng(1), 6)
        bound, cert = dgpr_upper(X, X, budget=8)
        assert bound <= 1e-9
        assert verify_certificate(X, X, cert)

    def test_upper_against_trivial(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            X = random_graph_space(rng, 5)
            bound, cert = dgpr_upper(X, trivial(), budget=16)
            assert dgpr_to_trivial_exact(X) - 1e-9 <= bound <= dgpr_to_trivial(X) + 1e-9
            assert verify_certificate(X, trivial(), cert)

    def test_lower_below_upper(self):
        rng = np.random.default_rng(4)
        for _ in range(15):
            X = random_space(rng, int(rng.integers(1, 6)))
            Y = random_graph_space(rng, int(rng.integers(1, 6)))
            bound, cert = dgpr_upper(X, Y, budget=16, seed=1)
            assert dgpr_lower(X, Y) <= bound + 1e-12
            assert verify_certificate(X, Y, cert)
            assert oracles.certificate_ok(X.dist, X.weights, Y.dist, Y.weights, cert.cross_dist, cert.coupling, cert.epsilon)

    def test_product_with_factor(self):
        rng = np.random.default_rng(6)
        X, Y = random_space(rng, 4), random_space(rng, 3)
        bound, cert = dgpr_upper(boxplus(X, Y), X, budget=32)
        assert dgpr_lower(boxplus(X, Y), X) <= bound <= dgpr_to_trivial(Y) + 1e-9
        assert verify_certificate(boxplus(X, Y), X, cert)

    def test_product_can_be_closer_than_factor_to_point(self):
        # a certified gluing of X+Y onto X beats the distance from Y to the point
        X = new_space([[0, 0.5311, 0.902], [0.5311, 0, 1.2831], [0.902, 1.2831, 0]], [0.4021, 0.1872, 0.4107])
        Y = T(0.4247, 0.8058)
        Z = boxplus(X, Y)
        bound, cert = dgpr_upper(Z, X, budget=256)
        assert oracles.certificate_ok(Z.dist, Z.weights, X.dist, X.weights, cert.cross_dist, cert.coupling, cert.epsilon)
        assert bound < 0.9 * dgpr_to_trivial_exact(Y)

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        X, Y = random_space(rng, 4), random_space(rng, 5)
        a, ca = dgpr_upper(X, Y, budget=8, seed=3)
        b, cb = dgpr_upper(X, Y, budget=8, seed=3)
        assert a == b and np.array_equal(ca.cross_dist, cb.cross_dist)


class TestCertificate:
    def test_json_round_trip(self):
        rng = np.random.default_rng(9)
        X, Y = random_space(rng, 3), random_space(rng, 4)
        _, cert = dgpr_upper(X, Y, budget=8)
        back = Certificate.from_dict(json.loads(json.dumps(cert.to_dict())))
        assert back.epsilon == cert.epsilon
        assert np.array_equal(back.cross_dist, cert.cross_dist)
        assert verify_certificate(X, Y, back)

    def test_rejects_broken_extension(self):
        X = new_space([[0, 1], [1, 0]], [0.5, 0.5])
        cert = Certificate(0.0, np.array([[0.0, 5.0], [5.0, 0.0]]), np.diag([0.5, 0.5]))
        assert not verify_certificate(X, X, cert)

    def test_rejects_wrong_marginals(self):
        X = new_space([[0, 1], [1, 0]], [0.5, 0.5])
        cert = Certificate(0.0, np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([[1.0, 0.0], [0.0, 0.0]]))
        assert not verify_certificate(X, X, cert)

    def test_rejects_too_small_epsilon(self):
        X = T(0.5, 1)
        cert = Certificate(0.1, np.array([[1.0, 0.0], [2.0, 1.0]]), np.array([[0.0, 0.5], [0.5, 0.0]]))
        assert not verify_certificate(X, X, cert)
