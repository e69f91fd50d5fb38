import math

import numpy as np
import pytest

from trontide import (
    DomainError,
    NumericError,
    RngStream,
    ShapeError,
    eig_extremes_symmetric,
    log_gamma,
    sample_std_gaussian_vector,
)


class TestRngStream:
    def test_same_seed_same_sequence(self):
        a = sample_std_gaussian_vector(RngStream(7), 3)
        b = sample_std_gaussian_vector(RngStream(7), 3)
        np.testing.assert_array_equal(a, b)

    def test_zero_dimension_rejected(self):
        with pytest.raises(DomainError):
            sample_std_gaussian_vector(RngStream(7), 0)

    def test_empirical_mean_clt(self):
        # CLT: |mean| <= 4/sqrt(N) with overwhelming probability
        x = RngStream(11).standard_normal(10 ** 6)
        assert abs(x.mean()) < 4e-3

    def test_empirical_variance_clt(self):
        x = RngStream(12).standard_normal(10 ** 6)
        assert abs(x.var() - 1.0) < 1e-2

    def test_substreams_reproducible(self):
        a = RngStream(3).substream("data", 5).standard_normal(10)
        b = RngStream(3).substream("data", 5).standard_normal(10)
        np.testing.assert_array_equal(a, b)

    def test_distinct_substreams_differ(self):
        a = RngStream(3).substream("data", 0).standard_normal(10)
        b = RngStream(3).substream("data", 1).standard_normal(10)
        assert not np.array_equal(a, b)

    def test_substream_correlation_small(self):
        n = 10 ** 5
        a = RngStream(42).substream(0).standard_normal(n)
        b = RngStream(42).substream(1).standard_normal(n)
        rho = np.corrcoef(a, b)[0, 1]
        assert abs(rho) < 0.01

    def test_chunking_does_not_change_stream(self):
        g1 = RngStream(9).substream("x")
        g2 = RngStream(9).substream("x")
        whole = g1.standard_normal(100)
        parts = np.concatenate([g2.standard_normal(37), g2.standard_normal(63)])
        np.testing.assert_array_equal(whole, parts)

    def test_negative_seed_rejected(self):
        with pytest.raises(DomainError):
            RngStream(-1)


class TestEigExtremes:
    def test_identity(self):
        lo, hi = eig_extremes_symmetric(np.eye(3))
        assert lo == pytest.approx(1.0, abs=1e-12)
        assert hi == pytest.approx(1.0, abs=1e-12)

    def test_diagonal(self):
        lo, hi = eig_extremes_symmetric(np.diag([2.0, 5.0]))
        assert lo == pytest.approx(2.0, abs=1e-12)
        assert hi == pytest.approx(5.0, abs=1e-12)

    def test_psd_gram_matrices_nonnegative(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            b = rng.standard_normal((5, 5))
            lo, _ = eig_extremes_symmetric(b @ b.T)
            assert lo >= -1e-9

    def test_2x2_against_characteristic_polynomial(self):
        # for symmetric [[a, b], [b, c]] the eigenvalues are
        # (a + c)/2 +- sqrt(((a - c)/2)^2 + b^2)
        rng = np.random.default_rng(1)
        for _ in range(200):
            a, b, c = rng.standard_normal(3) * 3
            lo, hi = eig_extremes_symmetric(np.array([[a, b], [b, c]]))
            mid = 0.5 * (a + c)
            rad = math.sqrt((0.5 * (a - c)) ** 2 + b * b)
            assert lo == pytest.approx(mid - rad, abs=1e-10)
            assert hi == pytest.approx(mid + rad, abs=1e-10)

    def test_quadratic_form_lower_bound(self):
        # v^T X v >= lambda_min((X + X^T)/2) * ||v||^2
        rng = np.random.default_rng(2)
        for _ in range(300):
            n = int(rng.integers(2, 7))
            x = rng.standard_normal((n, n)) * 2
            v = rng.standard_normal(n)
            lo, _ = eig_extremes_symmetric(x)
            assert v @ x @ v >= lo * (v @ v) - 1e-9

    def test_non_square_rejected(self):
        with pytest.raises(ShapeError):
            eig_extremes_symmetric(np.ones((2, 3)))

    def test_non_finite_rejected(self):
        with pytest.raises(NumericError):
            eig_extremes_symmetric(np.array([[1.0, np.inf], [0.0, 1.0]]))


class TestLogGamma:
    def test_half(self):
        assert log_gamma(0.5) == pytest.approx(math.log(math.sqrt(math.pi)),
                                               rel=1e-13)

    def test_five(self):
        assert log_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-13)

    def test_two_and_a_half(self):
        # recurrence from Gamma(1/2): Gamma(2.5) = 1.5 * 0.5 * sqrt(pi)
        expected = math.log(1.5 * 0.5 * math.sqrt(math.pi))
        assert log_gamma(2.5) == pytest.approx(expected, rel=1e-13)

    def test_against_stdlib_on_required_range(self):
        for x in np.linspace(0.5, 200.0, 2001):
            assert log_gamma(float(x)) == pytest.approx(math.lgamma(float(x)),
                                                        rel=1e-12)

    def test_recurrence_property(self):
        # Gamma(x + 1) = x * Gamma(x), i.e. lg(x+1) - lg(x) = log(x)
        rng = np.random.default_rng(3)
        for x in rng.uniform(0.5, 100.0, 1000):
            lhs = log_gamma(float(x) + 1.0) - log_gamma(float(x))
            assert lhs == pytest.approx(math.log(x), rel=1e-11)

    def test_domain_errors(self):
        for bad in (0.0, -1.0, math.nan):
            with pytest.raises(DomainError):
                log_gamma(bad)

    def test_below_half_reflection(self):
        assert log_gamma(0.25) == pytest.approx(math.lgamma(0.25), rel=1e-12)
