import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfppv.activation import (
    ActivationCoefficients,
    gaussian_coefficients,
    get_activation,
    linear,
    relu,
    shifted_relu,
    tanh,
    zeta,
)
from rfppv.errors import NonPositiveMuStar, UnknownActivation

RELU_MU0 = 1 / math.sqrt(2 * math.pi)
RELU_MU_STAR_SQ = 0.25 - 1 / (2 * math.pi)


class TestEvaluate:
    def test_relu_values(self):
        np.testing.assert_array_equal(relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])

    def test_tanh_origin(self):
        assert tanh(0.0) == 0.0

    def test_shifted_and_scaled(self):
        act = shifted_relu(0.5).scaled(3.0)
        np.testing.assert_allclose(act(np.array([0.0, 1.5])), [0.0, 3.0])

    def test_finite_on_extremes(self):
        x = np.array([-1e300, -1e3, 0.0, 1e3, 1e300])
        for act in (relu, tanh, linear, shifted_relu(-2.0)):
            assert np.all(np.isfinite(act(x))) or act is linear

    def test_lookup(self):
        assert get_activation("relu") is relu
        assert get_activation("shifted_relu:1.5").shift == 1.5
        with pytest.raises(UnknownActivation):
            get_activation("softsign")


class TestGaussianCoefficients:
    def test_relu_closed_form(self, relu_coeffs):
        np.testing.assert_allclose(relu_coeffs.mu0, RELU_MU0, atol=1e-12)
        np.testing.assert_allclose(relu_coeffs.mu1, 0.5, atol=1e-12)
        np.testing.assert_allclose(relu_coeffs.mu_star_sq, RELU_MU_STAR_SQ, atol=1e-12)

    def test_relu_zeta(self, relu_coeffs):
        np.testing.assert_allclose(zeta(relu_coeffs), 0.5 / math.sqrt(RELU_MU_STAR_SQ),
                                   rtol=1e-12)

    def test_tanh_is_centred(self):
        assert abs(gaussian_coefficients(tanh).mu0) < 1e-12

    def test_linear_rejected(self):
        with pytest.raises(NonPositiveMuStar):
            gaussian_coefficients(linear)

    def test_order_too_small(self):
        with pytest.raises(ValueError):
            gaussian_coefficients(relu, quadrature_order=5)

    @pytest.mark.parametrize("act", [relu, tanh, shifted_relu(0.7), shifted_relu(-1.2)])
    def test_order_doubling(self, act):
        a = gaussian_coefficients(act, 200)
        b = gaussian_coefficients(act, 400)
        np.testing.assert_allclose([a.mu0, a.mu1, a.mu_star_sq],
                                   [b.mu0, b.mu1, b.mu_star_sq], atol=1e-10)

    @pytest.mark.parametrize("act", [relu, tanh, shifted_relu(0.7)])
    def test_monte_carlo(self, act):
        g = np.random.default_rng(7).standard_normal(1_000_000)
        c = gaussian_coefficients(act)
        s = act(g)
        for est, ref in ((s, c.mu0), (s * g, c.mu1)):
            se = est.std() / math.sqrt(g.size)
            assert abs(est.mean() - ref) < 5 * se

    def test_variance_decomposition(self):
        # mu_star^2 = E sigma^2 - mu0^2 - mu1^2 with an independent rule
        x, w = np.polynomial.hermite_e.hermegauss(150)
        w = w / w.sum()
        c = gaussian_coefficients(tanh)
        second = float(np.sum(w * np.tanh(x) ** 2))
        np.testing.assert_allclose(c.mu_star_sq, second - c.mu0**2 - c.mu1**2, atol=1e-10)


class TestZeta:
    def test_zero_slope(self):
        assert zeta(ActivationCoefficients(0.0, 0.0, 0.3, 0.0)) == 0.0

    def test_unit(self):
        assert zeta(ActivationCoefficients(0.1, 0.4, 0.16, 1.0)) == pytest.approx(1.0)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(min_value=0.05, max_value=50.0))
    def test_scale_invariance(self, c):
        base = zeta(gaussian_coefficients(relu))
        np.testing.assert_allclose(zeta(gaussian_coefficients(relu.scaled(c))), base,
                                   rtol=1e-10)
