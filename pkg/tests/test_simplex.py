"""Tests for distribution handling and the local worst-case map."""

import math

import numpy as np
import pytest

from robust_submod import (DomainError, SimplexDistribution, geometric_reference,
                           kl_divergence, local_worst_case, make_distribution,
                           radius_for_lambda)


def inner_value(p, f, q, lam):
    """Independent evaluation of <p, f> + lam * KL(p || q) by direct summation."""
    total = math.fsum(pi * fi for pi, fi in zip(p, f))
    for pi, qi in zip(p, q):
        if pi > 0.0:
            total += lam * pi * math.log(pi / qi)
    return total


class TestSimplexDistribution:
    def test_valid_construction(self):
        d = SimplexDistribution(np.array([0.25, 0.75]))
        assert d.n == 2
        assert len(d) == 2
        assert not d.weights.flags.writeable

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            SimplexDistribution(np.array([1.5, -0.5]))

    def test_rejects_bad_sum(self):
        with pytest.raises(DomainError):
            SimplexDistribution(np.array([0.5, 0.4]))

    def test_rejects_nan_and_empty(self):
        with pytest.raises(DomainError):
            SimplexDistribution(np.array([math.nan, 1.0]))
        with pytest.raises(DomainError):
            SimplexDistribution(np.array([]))

    def test_approx_equal(self):
        a = make_distribution([1, 1])
        b = make_distribution([1.0, 1.0 + 1e-14])
        assert a.approx_equal(b)
        assert not a.approx_equal(make_distribution([1, 2]))
        assert not a.approx_equal(make_distribution([1, 1, 1]))

    def test_csv_field_round_trip_bit_exact(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            d = make_distribution(rng.random(5) + 1e-3)
            back = SimplexDistribution.from_csv_field(d.to_csv_field())
            assert np.array_equal(back.weights, d.weights)


class TestMakeDistribution:
    def test_normalizes(self):
        d = make_distribution([2.0, 6.0])
        assert np.allclose(d.weights, [0.25, 0.75], atol=1e-15)

    def test_identity_on_normalized_input(self):
        q = [0.022, 0.267, 0.088, 0.087, 0.183, 0.353]
        d = make_distribution(q)
        assert np.max(np.abs(d.weights - np.asarray(q))) <= 1e-12

    def test_zero_sum_rejected(self):
        with pytest.raises(DomainError):
            make_distribution([0.0, 0.0])

    def test_sum_is_tight(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            d = make_distribution(rng.random(rng.integers(1, 12)) + 1e-6)
            assert abs(math.fsum(d.weights.tolist()) - 1.0) <= 1e-12


class TestKlDivergence:
    def test_zero_iff_equal(self):
        p = make_distribution([0.3, 0.7])
        assert kl_divergence(p, p) == 0.0

    def test_nonnegative(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            p = make_distribution(rng.random(4) + 1e-9)
            q = make_distribution(rng.random(4) + 1e-9)
            assert kl_divergence(p, q) >= 0.0

    def test_zero_mass_terms_ignored(self):
        p = make_distribution([0.0, 1.0])
        q = make_distribution([0.5, 0.5])
        assert kl_divergence(p, q) == pytest.approx(math.log(2.0), abs=1e-15)

    def test_support_violation_is_infinite(self):
        p = make_distribution([0.5, 0.5])
        q = make_distribution([0.0, 1.0])
        assert kl_divergence(p, q) == math.inf

    def test_direct_summation_value(self):
        p = make_distribution([0.7311, 0.2689])
        q = make_distribution([0.5, 0.5])
        expected = math.fsum([0.7311 * math.log(0.7311 / 0.5),
                              0.2689 * math.log(0.2689 / 0.5)])
        assert kl_divergence(p, q) == pytest.approx(expected, abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            kl_divergence(make_distribution([1, 1]), make_distribution([1, 1, 1]))


class TestLocalWorstCase:
    def test_equal_values_return_q(self):
        q = make_distribution([0.1, 0.5, 0.4])
        p = local_worst_case([0.3, 0.3, 0.3], q, 0.7)
        assert p.approx_equal(q, tol=1e-15)

    def test_closed_form_two_tasks(self):
        q = make_distribution([0.5, 0.5])
        p = local_worst_case([0.0, 1.0], q, 1.0)
        z = 1.0 + math.exp(-1.0)
        assert p.weights[0] == pytest.approx(1.0 / z, abs=1e-15)
        assert p.weights[1] == pytest.approx(math.exp(-1.0) / z, abs=1e-15)

    def test_large_lambda_recovers_q(self):
        q = make_distribution([0.5, 0.5])
        p = local_worst_case([0.0, 1.0], q, 1e6)
        assert p.approx_equal(q, tol=1e-6)

    def test_is_simplex_point(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            n = int(rng.integers(1, 7))
            q = make_distribution(rng.random(n) + 1e-9)
            p = local_worst_case(rng.random(n), q, float(rng.uniform(0.05, 2.0)))
            assert np.all(p.weights >= 0.0)
            assert abs(math.fsum(p.weights.tolist()) - 1.0) <= 1e-12

    def test_minimizes_inner_objective(self):
        # P* must beat Q, the worst-case vertex, and random simplex points.
        rng = np.random.default_rng(17)
        for _ in range(50):
            n = int(rng.integers(2, 7))
            f = rng.random(n)
            q = make_distribution(rng.random(n) + 1e-3)
            lam = float(rng.uniform(0.05, 2.0))
            star = local_worst_case(f, q, lam)
            best = inner_value(star.weights, f, q.weights, lam)
            assert best <= inner_value(q.weights, f, q.weights, lam) + 1e-12
            vertex = np.zeros(n)
            vertex[int(np.argmin(f))] = 1.0
            assert best <= inner_value(vertex, f, q.weights, lam) + 1e-12
            for _ in range(20):
                p = rng.dirichlet(np.ones(n))
                assert best <= inner_value(p, f, q.weights, lam) + 1e-12

    def test_small_set_survives_underflow(self):
        q = make_distribution([0.5, 0.5])
        p = local_worst_case([0.0, 1.0], q, 1e-4)
        assert p.weights[0] == pytest.approx(1.0, abs=1e-12)

    def test_nonpositive_lambda_rejected(self):
        q = make_distribution([1, 1])
        with pytest.raises(DomainError):
            local_worst_case([0.1, 0.2], q, 0.0)
        with pytest.raises(DomainError):
            local_worst_case([0.1, 0.2], q, -1.0)


class TestRadiusForLambda:
    def test_equal_values_zero_radius(self):
        q = make_distribution([0.2, 0.8])
        assert radius_for_lambda([0.4, 0.4], q, 0.3) == 0.0

    def test_large_lambda_small_radius(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            n = int(rng.integers(2, 6))
            q = make_distribution(rng.random(n) + 1e-3)
            assert radius_for_lambda(rng.random(n), q, 1e6) <= 1e-6

    def test_equals_kl_of_worst_case(self):
        rng = np.random.default_rng(29)
        for _ in range(100):
            n = int(rng.integers(2, 7))
            f = rng.random(n)
            q = make_distribution(rng.random(n) + 1e-3)
            lam = float(rng.uniform(0.05, 3.0))
            r = radius_for_lambda(f, q, lam)
            assert r == pytest.approx(kl_divergence(local_worst_case(f, q, lam), q),
                                      abs=1e-12)

    def test_monotone_in_lambda(self):
        f = [0.1, 0.6, 0.9]
        q = make_distribution([1, 1, 1])
        ladder = [radius_for_lambda(f, q, lam) for lam in (0.05, 0.1, 0.3, 1.0, 3.0, 10.0)]
        assert all(a >= b - 1e-15 for a, b in zip(ladder, ladder[1:]))


class TestGeometricReference:
    def test_gamma_zero_one_hot_newest(self):
        g = geometric_reference(0.0, 4)
        assert np.array_equal(g.weights, [0.0, 0.0, 0.0, 1.0])

    def test_gamma_one_one_hot_oldest(self):
        g = geometric_reference(1.0, 4)
        assert np.array_equal(g.weights, [1.0, 0.0, 0.0, 0.0])

    def test_half_window_three(self):
        g = geometric_reference(0.5, 3)
        assert np.allclose(g.weights, [0.25, 0.25, 0.5], atol=1e-15)

    def test_sums_to_one_on_grid(self):
        for gamma in np.linspace(0.0, 1.0, 21):
            for t_w in (1, 2, 5, 9):
                g = geometric_reference(float(gamma), t_w)
                assert abs(math.fsum(g.weights.tolist()) - 1.0) <= 1e-12

    def test_tail_folded_into_oldest(self):
        gamma, t_w = 0.9, 5
        g = geometric_reference(gamma, t_w)
        assert g.weights[0] == pytest.approx(gamma ** 5 + 0.1 * gamma ** 4, abs=1e-15)
        assert g.weights[-1] == pytest.approx(0.1, abs=1e-15)

    def test_out_of_range_gamma(self):
        with pytest.raises(DomainError):
            geometric_reference(-0.1, 3)
        with pytest.raises(DomainError):
            geometric_reference(1.1, 3)
