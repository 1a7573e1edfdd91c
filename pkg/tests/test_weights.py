import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from piecewise_fde.validation import quadrature_weights
from piecewise_fde.weights import (
    AB3_COEFFICIENTS,
    caputo_weight_table,
    caputo_weights,
    kernel_moments,
    newton_polynomial,
    startup_weights,
)


class TestNewtonPolynomial:
    def test_constant(self):
        p = newton_polynomial((2.5, 2.5, 2.5), 0.1, t0=3.0)
        np.testing.assert_allclose(p(np.linspace(0, 10, 7)), 2.5, rtol=0, atol=1e-14)

    def test_linear(self):
        h, t0 = 0.3, 1.0
        p = newton_polynomial([t0 + k * h for k in range(3)], h, t0)
        t = np.linspace(-2, 5, 11)
        np.testing.assert_allclose(p(t), t, atol=1e-13)

    def test_quadratic_off_stencil(self):
        h, t0 = 0.25, -0.5
        p = newton_polynomial([(t0 + k * h) ** 2 for k in range(3)], h, t0)
        t = np.linspace(-3, 3, 10)
        np.testing.assert_allclose(p(t), t**2, atol=1e-12)

    def test_rejects_nonpositive_step(self):
        with pytest.raises(ValueError):
            newton_polynomial((1, 2, 3), 0.0)


class TestKernelMoments:
    @pytest.mark.parametrize("a", [1.0, 2.0, 8.99, 9.0, 40.0, 1000.0])
    @pytest.mark.parametrize("delta", [0.3, 0.5, 0.95])
    def test_against_quadrature(self, a, delta):
        from scipy.integrate import quad

        M = kernel_moments(delta, a)
        for p in range(3):
            if a == 1.0:
                ref, _ = quad(lambda t: t**p, 0, 1, weight="alg", wvar=(0.0, delta - 1.0), epsabs=1e-14)
            else:
                ref, _ = quad(lambda t: (a - t) ** (delta - 1.0) * t**p, 0, 1, epsabs=1e-14, epsrel=1e-13)
            assert M[p] == pytest.approx(ref, rel=1e-12)

    def test_branches_agree_at_threshold(self):
        lo = kernel_moments(0.7, np.array([8.999999]))
        hi = kernel_moments(0.7, np.array([9.000001]))
        np.testing.assert_allclose(lo, hi, rtol=1e-6)

    def test_rejects_small_offset(self):
        with pytest.raises(ValueError):
            kernel_moments(0.5, 0.5)


class TestCaputoWeights:
    @pytest.mark.parametrize("lag", [0, 1, 5, 50, 400])
    def test_classical_limit(self, lag):
        np.testing.assert_allclose(caputo_weights(1.0, lag), AB3_COEFFICIENTS, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("delta", [0.5, 0.8, 0.95])
    def test_quadrature_oracle(self, delta):
        table = caputo_weight_table(delta, 50).table
        for lag in range(51):
            np.testing.assert_allclose(table[lag], quadrature_weights(delta, lag), rtol=0, atol=1e-8)

    def test_table_matches_scalar(self):
        table = caputo_weight_table(0.6, 20)
        for lag in (0, 3, 20):
            np.testing.assert_allclose(table.table[lag], caputo_weights(0.6, lag), rtol=1e-15, atol=0)
        np.testing.assert_array_equal(table.w0, table.table[:, 0])

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.05, 1.0), st.integers(0, 500))
    def test_weight_sum_is_rl_integral_of_one(self, delta, lag):
        # the basis sums to one, so the weights sum to the kernel's integral
        total = sum(caputo_weights(delta, lag))
        expected = ((lag + 1.0) ** delta - lag**delta) / delta
        assert total == pytest.approx(expected, rel=1e-10)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.05, 1.0), st.integers(0, 500))
    def test_leading_rl_weight_positive(self, delta, lag):
        assert (lag + 1.0) ** delta - lag**delta > 0

    def test_negative_lag(self):
        with pytest.raises(ValueError):
            caputo_weights(0.5, -1)


class TestStartupWeights:
    @pytest.mark.parametrize("n", [1, 2, 3, 10])
    def test_classical_limit_is_simpson_family(self, n):
        w = startup_weights(1.0, n)
        if n == 1:
            np.testing.assert_allclose(w, [5 / 12, 8 / 12, -1 / 12], atol=1e-14)
        else:
            np.testing.assert_allclose(w, [1 / 3, 4 / 3, 1 / 3], atol=1e-14)

    @pytest.mark.parametrize("delta", [0.4, 0.9])
    def test_integrates_quadratics_exactly(self, delta):
        from scipy.integrate import quad

        n = 5
        g = lambda t: 1.0 + 2.0 * t - 0.5 * t * t
        w = startup_weights(delta, n)
        ref, _ = quad(lambda t: (n - t) ** (delta - 1.0) * g(t), 0, 2, epsabs=1e-14)
        assert w @ [g(0.0), g(1.0), g(2.0)] == pytest.approx(ref, rel=1e-12)
