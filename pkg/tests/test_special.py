"""Special functions, coefficients, and Fourier symbols."""

import math

import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gammainc, j0

from fraclevy.special import (
    SymbolQuery,
    frac_lap_coeff,
    fractional_symbol,
    gamma,
    gauss_2f1,
    tempered_coeff,
    tempered_symbol,
    upper_incomplete_gamma,
)

mp.mp.dps = 30

SQRT_PI = math.sqrt(math.pi)


class TestGamma:
    def test_one(self):
        assert gamma(1.0) == 1.0

    def test_half(self):
        assert gamma(0.5) == pytest.approx(SQRT_PI, rel=1e-14)

    def test_recurrence_oracle(self):
        # Gamma(3.5) = 2.5 * 1.5 * 0.5 * Gamma(0.5)
        assert gamma(3.5) == pytest.approx(2.5 * 1.5 * 0.5 * SQRT_PI, rel=1e-13)

    @pytest.mark.parametrize("x", [0.0, -1.0, -2.0, -7.0])
    def test_poles_rejected(self, x):
        with pytest.raises(ValueError):
            gamma(x)

    def test_accuracy_grid(self):
        for x in np.linspace(-19.7, 19.7, 83):
            if x <= 0 and abs(x - round(x)) < 1e-9:
                continue
            assert gamma(float(x)) == pytest.approx(
                float(mp.gamma(float(x))), rel=1e-12)


def _series_2f1_oracle(a, b, c, z, terms=300):
    """Direct high-precision series summation, independent of the library."""
    with mp.workdps(40):
        total = mp.mpf(0)
        term = mp.mpf(1)
        for m in range(terms):
            total += term
            term *= (mp.mpf(a) + m) * (mp.mpf(b) + m) / \
                ((mp.mpf(c) + m) * (m + 1)) * mp.mpf(z)
        return float(total)


class TestGauss2F1:
    def test_empty_series(self):
        assert gauss_2f1(0.3, -1.2, 0.7, 0.0) == 1.0

    def test_log_closed_form(self):
        # 2F1(1,1;2;z) = -ln(1-z)/z
        assert gauss_2f1(1.0, 1.0, 2.0, 0.5) == pytest.approx(
            1.3862943611198906, rel=1e-13)

    def test_series_oracle(self):
        assert gauss_2f1(-0.4, 0.7, 0.5, 0.3) == pytest.approx(
            0.81111104508674918, rel=1e-14)
        assert _series_2f1_oracle(-0.4, 0.7, 0.5, 0.3) == pytest.approx(
            0.81111104508674918, rel=1e-14)

    @pytest.mark.parametrize("z", [-5.0, -0.7, 0.2, 0.55, 0.9, 0.99])
    def test_against_mpmath_across_regions(self, z):
        for (a, b, c) in [(-0.25, 0.6, 0.5), (-0.9, 1.2, 1.0),
                          (0.35, 0.35, 1.5), (-0.6, 0.95, 0.5)]:
            expect = float(mp.hyp2f1(a, b, c, z))
            assert gauss_2f1(a, b, c, z) == pytest.approx(expect, rel=1e-11)

    def test_symbol_parameter_family(self):
        # the exact parameter family used by the tempered multiplier
        for n in (1, 2):
            for beta in (0.3, 0.8, 1.2, 1.8):
                for z in (0.01, 0.4, 0.5, 0.83, 0.999):
                    a, b, c = -beta / 2, (n + beta - 1) / 2, n / 2
                    expect = float(mp.hyp2f1(a, b, c, z))
                    assert gauss_2f1(a, b, c, z) == pytest.approx(
                        expect, rel=1e-10)

    def test_contiguous_relation(self):
        # (c-a) F(a-1) + (2a-c+(b-a)z) F(a) + a(z-1) F(a+1) = 0
        rng = np.random.default_rng(7)
        for _ in range(30):
            a = float(rng.uniform(-1.5, 1.5))
            b = float(rng.uniform(0.1, 2.0))
            c = float(rng.uniform(0.3, 2.5))
            z = float(rng.uniform(-2.0, 0.95))
            f0 = gauss_2f1(a, b, c, z)
            fm = gauss_2f1(a - 1.0, b, c, z)
            fp = gauss_2f1(a + 1.0, b, c, z)
            resid = (c - a) * fm + (2 * a - c + (b - a) * z) * f0 \
                + a * (z - 1.0) * fp
            assert abs(resid) <= 1e-9 * max(abs(f0), abs(fm), abs(fp), 1.0)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            gauss_2f1(0.5, 0.5, 0.0, 0.3)
        with pytest.raises(ValueError):
            gauss_2f1(0.5, 0.5, 1.0, 1.0)


def _cos_kernel_integral_1d(beta: float, k: float) -> float:
    """int_R (1 - cos(k y)) |y|^(-1-beta) dy by oscillatory quadrature."""
    delta = 0.1 / k
    series = 0.0
    for m in range(1, 40):
        a = 2 * m - beta
        series += (-1.0) ** (m + 1) * k ** (2 * m) / math.factorial(2 * m) \
            * delta ** a / a
    window = 600.0 / k
    cos_part, _ = quad(lambda y: y ** (-1.0 - beta), delta, window,
                       weight="cos", wvar=k, limit=2000)
    # first integration-by-parts term of the truncated oscillatory tail;
    # the remainder is O(window^(-2-beta) / k^2)
    cos_tail = -math.sin(k * window) * window ** (-1.0 - beta) / k
    const_part = delta ** (-beta) / beta  # extends to infinity exactly
    return 2.0 * (series + const_part - cos_part - cos_tail)


class TestCoefficients:
    def test_frac_one_dim_order_one(self):
        assert frac_lap_coeff(1, 1.0) == pytest.approx(1.0 / math.pi,
                                                       rel=1e-14)

    def test_frac_rejects_endpoint_orders(self):
        for beta in (0.0, 2.0, -0.3, 2.4):
            with pytest.raises(ValueError):
                frac_lap_coeff(1, beta)

    @pytest.mark.parametrize("beta,k", [(0.5, 1.0), (1.0, 2.0), (1.5, 0.7),
                                        (1.9, 3.0)])
    def test_frac_normalizes_symbol_1d(self, beta, k):
        # c_{1,beta} * int (1-cos(k y)) |y|^(-1-beta) dy = |k|^beta
        val = frac_lap_coeff(1, beta) * _cos_kernel_integral_1d(beta, k)
        assert val == pytest.approx(k ** beta, rel=1e-7)

    def test_frac_2d_by_dimensional_reduction(self):
        # integrating the 2D kernel over the transverse coordinate maps the
        # 2D identity onto the 1D one with factor
        # sqrt(pi) Gamma((1+b)/2) / Gamma((2+b)/2)
        beta, k = 0.5, 1.3
        reduction = SQRT_PI * gamma((1 + beta) / 2) / gamma((2 + beta) / 2)
        val = frac_lap_coeff(2, beta) * reduction \
            * _cos_kernel_integral_1d(beta, k)
        assert val == pytest.approx(k ** beta, rel=1e-7)

    def test_frac_2d_by_radial_quadrature(self):
        # genuinely 2D oracle: angular factor via the Bessel function
        beta, k = 0.5, 1.3
        delta, window = 1e-3, 4000.0

        def radial(r):
            return 2 * math.pi * (1.0 - j0(k * r)) * r ** (-1.0 - beta)

        near = 2 * math.pi * (k ** 2 / 4.0) * delta ** (2 - beta) / (2 - beta)
        mid, _ = quad(radial, delta, window, limit=2000)
        far_const = 2 * math.pi * window ** (-beta) / beta
        val = frac_lap_coeff(2, beta) * (near + mid + far_const)
        assert val == pytest.approx(k ** beta, rel=1e-3)

    def test_tempered_coeff_half(self):
        # reflection: Gamma(-1/2) = -2 sqrt(pi) gives 1 / (4 sqrt(pi))
        assert tempered_coeff(1, 0.5) == pytest.approx(
            1.0 / (4.0 * SQRT_PI), rel=1e-14)

    def test_tempered_pole_rejected(self):
        with pytest.raises(ValueError):
            tempered_coeff(1, 1.0)

    def test_tempered_sign_flip(self):
        # Gamma(-1.5) = 4 sqrt(pi) / 3 > 0 makes the coefficient negative
        assert gamma(-1.5) == pytest.approx(4.0 * SQRT_PI / 3.0, rel=1e-13)
        assert tempered_coeff(2, 1.5) == pytest.approx(-0.067345170796937461,
                                                       rel=1e-13)
        assert tempered_coeff(1, 0.3) > 0
        assert tempered_coeff(1, 1.7) < 0

    def test_frac_coeff_positive_grid(self):
        for n in (1, 2, 3):
            for beta in np.linspace(0.05, 1.95, 20):
                assert frac_lap_coeff(n, float(beta)) > 0


class TestSymbols:
    def test_fractional_trivial(self):
        assert fractional_symbol(SymbolQuery(1, 1.5, 0.0, 0.0)) == 0.0
        assert fractional_symbol(SymbolQuery(1, 1.5, 0.0, 1.0)) == -1.0
        assert fractional_symbol(SymbolQuery(1, 0.7, 0.0, 2.0)) == \
            pytest.approx(-1.624504792712471, rel=1e-14)

    def test_fractional_rejects_tempering(self):
        with pytest.raises(ValueError):
            fractional_symbol(SymbolQuery(1, 0.7, 0.5, 1.0))

    def test_tempered_vanishes_at_zero(self):
        for beta in (0.3, 1.5):
            assert tempered_symbol(SymbolQuery(1, beta, 2.0, 0.0)) == 0.0

    def test_tempered_rejects_untempered(self):
        with pytest.raises(ValueError):
            tempered_symbol(SymbolQuery(1, 0.5, 0.0, 1.0))

    def test_tempered_rejects_order_one(self):
        with pytest.raises(ValueError):
            SymbolQuery(1, 1.0, 0.5, 1.0)

    def test_quadrature_oracle_1d(self):
        from fraclevy.spectral import tempered_symbol_quadrature
        closed = tempered_symbol(SymbolQuery(1, 0.5, 1.0, 1.0))
        direct = tempered_symbol_quadrature(1, 0.5, 1.0, 1.0)
        assert abs(closed - direct) <= 1e-6 * (1 + abs(closed))

    def test_quadrature_oracle_2d(self):
        from fraclevy.spectral import tempered_symbol_quadrature
        closed = tempered_symbol(SymbolQuery(2, 1.5, 0.5, 2.0))
        direct = tempered_symbol_quadrature(2, 1.5, 0.5, 2.0)
        assert abs(closed - direct) <= 1e-6 * (1 + abs(closed))

    def test_small_tempering_limit(self):
        # With the tempered normalizing constant the lam -> 0 limit is
        # -cos(pi beta / 2) |k|^beta, NOT the fractional symbol -- the
        # untempered operator needs a different constant.  The gap closes
        # like lam^min(beta, 2-beta).
        for beta in (0.3, 0.8, 1.5):
            for k in (0.5, 2.0):
                limit = -math.cos(math.pi * beta / 2.0) * k ** beta
                prev = None
                for lam in (1e-2, 1e-3, 1e-4):
                    err = abs(tempered_symbol(SymbolQuery(1, beta, lam, k))
                              - limit)
                    scale = lam ** min(beta, 2.0 - beta) * max(1.0, k ** beta)
                    assert err <= 2.0 * scale
                    if prev is not None:
                        assert err < prev
                    prev = err


class TestUpperIncompleteGamma:
    @pytest.mark.parametrize("s", [-1.9, -1.2, -0.8, -0.3, 0.4, 1.7])
    @pytest.mark.parametrize("x", [1e-4, 0.1, 1.0, 10.0])
    def test_against_mpmath(self, s, x):
        expect = float(mp.gammainc(s, x, mp.inf))
        got = float(upper_incomplete_gamma(s, x))
        assert got == pytest.approx(expect, rel=5e-13)

    def test_vectorized(self):
        x = np.array([0.5, 1.0, 2.0])
        out = upper_incomplete_gamma(-0.7, x)
        for xi, oi in zip(x, out):
            assert oi == pytest.approx(float(mp.gammainc(-0.7, xi, mp.inf)),
                                       rel=1e-12)

    def test_rejects_poles(self):
        for s in (0.0, -1.0, -2.5):
            with pytest.raises(ValueError):
                upper_incomplete_gamma(s, 1.0)
