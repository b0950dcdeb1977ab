import cmath
import math

import numpy as np
import pytest

from npbo.errors import DomainError
from npbo.semigroup import (MAX_GROWTH_RATE, SymbolParams, growth_bound_check,
                            linear_xts_envelope, multiplier_sup, operator_norm, propagator,
                            propagator_derivative_factors, regularity_profile, semigroup_apply,
                            smoothing_probe, symbol)
from npbo.spectral import Field, TorusGrid, japanese, sobolev_norm, xts_norm


def mode_field(grid, k):
    c = np.zeros(grid.n, dtype=complex)
    c[k] = c[-k] = grid.half_length
    return Field(grid, c)


class TestSymbol:
    def test_unit_frequency_is_pure_dispersion(self, params):
        assert symbol(1.0, params) == 1j
        assert symbol(-1.0, params) == -1j

    def test_hermitian(self, params):
        xi = np.linspace(-5, 5, 101)
        np.testing.assert_array_equal(symbol(-xi, params), np.conj(symbol(xi, params)))

    def test_peak_growth(self, params):
        assert symbol(1 / math.sqrt(3), params).real == pytest.approx(2 / (3 * math.sqrt(3)), rel=1e-15)
        assert MAX_GROWTH_RATE == pytest.approx(0.3849, abs=1e-4)

    def test_real_part_bounded(self):
        xi = np.linspace(-10, 10, 200_001)
        for mu in (0.1, 1.0, 7.0):
            re = symbol(xi, SymbolParams(mu)).real
            assert re.max() <= mu * MAX_GROWTH_RATE * (1 + 1e-15)
            assert np.all(re[np.abs(xi) > 1] < 0)

    def test_rejects_nonpositive_mu(self):
        with pytest.raises(DomainError):
            SymbolParams(0.0)


class TestSemigroup:
    def test_time_zero_identity(self, grid, params):
        f = Field.from_function(lambda x: np.exp(-x * x), grid)
        assert semigroup_apply(f, 0.0, params) is f

    def test_single_mode(self, params):
        # b(2) = 4i - 6, so F(0.1, 2) = e^{-0.6} e^{0.4 i}
        val = propagator(0.1, 2.0, params)
        assert abs(val) == pytest.approx(0.5488116360940264, rel=1e-14)
        assert cmath.phase(val) == pytest.approx(0.4, rel=1e-14)

    def test_single_mode_on_grid(self, params):
        g = TorusGrid(math.pi, 32)
        out = semigroup_apply(mode_field(g, 2), 0.1, params)
        assert out.coeffs[2] == pytest.approx(math.pi * cmath.exp(0.1 * (4j - 6)), rel=1e-14)

    def test_backward_time_rejected(self, grid, params):
        with pytest.raises(DomainError):
            semigroup_apply(Field.zeros(grid), -0.1, params)

    def test_mean_preserved(self, grid, params):
        f = Field.from_function(lambda x: np.exp(-x * x) + 0.3 * x * np.exp(-x * x), grid)
        assert semigroup_apply(f, 2.0, params).mean == f.mean

    def test_high_frequency_decays_monotonically(self, params):
        g = TorusGrid(math.pi, 64)
        c = np.zeros(g.n, dtype=complex)
        c[2:10] = 1.0
        c[-9:-1] = 1.0
        f = Field(g, c)
        norms = [sobolev_norm(semigroup_apply(f, t, params), 1.0) for t in np.linspace(0, 1, 11)]
        assert np.all(np.diff(norms) < 0)

    def test_realness_reproducible(self, grid, params):
        f = Field.from_function(lambda x: np.exp(-x * x), grid)
        a = semigroup_apply(f, 0.7, params)
        b = semigroup_apply(f, 0.7, params)
        assert a.is_real
        np.testing.assert_array_equal(a.coeffs, b.coeffs)


class TestGrowthBound:
    def test_concentrated_at_peak(self, params):
        # the lattice of L = pi sqrt(3) has a mode at xi = 1/sqrt(3)
        g = TorusGrid(math.pi * math.sqrt(3), 32)
        rep = growth_bound_check([mode_field(g, 1)], 0.0, [1.0], params)
        assert rep.measured["max_ratio"] == pytest.approx(math.exp(2 / (3 * math.sqrt(3)) - 1), rel=1e-13)
        assert rep.measured["max_ratio"] == pytest.approx(0.54059, abs=1e-5)
        assert rep.passed

    def test_ratio_one_at_time_zero(self, grid, params):
        f = Field.from_function(lambda x: np.exp(-x * x), grid)
        assert growth_bound_check([f], 1.0, [0.0], params).measured["max_ratio"] == 1.0

    def test_zero_fields_skipped(self, grid, params):
        f = Field.from_function(lambda x: np.exp(-x * x), grid)
        rep = growth_bound_check([Field.zeros(grid), f], 0.0, [0.5], params)
        assert len(rep.notes) == 1 and len(rep.measurements) == 1

    def test_all_zero_corpus(self, grid, params):
        with pytest.raises(DomainError):
            growth_bound_check([Field.zeros(grid)], 0.0, [0.5], params)


class TestSmoothing:
    def test_lambda_zero_profile(self, params):
        times = np.logspace(-3, 0, 10)
        probe = smoothing_probe(0.0, 0.0, times, params)
        np.testing.assert_allclose(probe.norms, np.exp(2 * times / (3 * math.sqrt(3))), rtol=1e-8)
        assert probe.passed

    @pytest.mark.parametrize("lam", [1.0, 2.0, 3.0])
    def test_small_time_slope(self, params, lam):
        probe = smoothing_probe(0.0, lam, np.logspace(-4, 0, 41), params)
        assert probe.slope == pytest.approx(-lam / 3, rel=0.05)
        assert probe.passed

    def test_negative_gain(self, params):
        with pytest.raises(DomainError):
            smoothing_probe(0.0, -1.0, [0.1], params)

    def test_norm_attained_by_concentrated_field(self, params):
        g = TorusGrid(math.pi * math.sqrt(3), 64)
        t, lam = 0.3, 1.0
        best = operator_norm(t, lam, params, g.xi)
        k = int(np.argmax(japanese(g.xi) ** lam * np.abs(propagator(t, g.xi, params))))
        f = mode_field(g, k)
        ratio = sobolev_norm(semigroup_apply(f, t, params), lam) / sobolev_norm(f, 0.0)
        assert ratio == pytest.approx(best, rel=1e-6)


class TestMultiplierSup:
    @pytest.mark.parametrize("a", [0.01, 1.0, 10.0])
    def test_lambda_zero(self, a):
        star, value = multiplier_sup(0.0, a)
        assert star == pytest.approx(1 / math.sqrt(3), rel=1e-10)
        assert value == pytest.approx(math.exp(2 * a / (3 * math.sqrt(3))), rel=1e-12)

    def test_lambda_one_stationarity(self):
        # 1/xi + 1 - 3 xi^2 = 0  <=>  3 xi^3 - xi - 1 = 0
        roots = np.roots([3.0, 0.0, -1.0, -1.0])
        root = float(roots[np.abs(roots.imag) < 1e-12].real.max())
        star, value = multiplier_sup(1.0, 1.0)
        assert star == pytest.approx(root, rel=1e-12)
        assert value == pytest.approx(root * math.exp(root - root ** 3), rel=1e-12)
        assert star == pytest.approx(0.8513830728669245, rel=1e-12)

    @pytest.mark.parametrize("a", [10.0, 100.0])
    def test_large_a_localizes(self, a):
        star, value = multiplier_sup(1.0, a)
        xi = np.linspace(1e-6, 4, 2_000_001)
        brute = np.max(xi * np.exp(a * (xi - xi ** 3)))
        assert value >= brute * (1 - 1e-12)
        assert abs(star - 1 / math.sqrt(3)) < 0.05
        assert value / math.exp(a) < 0.05

    def test_rejects_nonpositive_a(self):
        with pytest.raises(DomainError):
            multiplier_sup(1.0, 0.0)


class TestDerivativeFactors:
    def test_time_zero(self, params):
        first, second = propagator_derivative_factors(0.0, 0.7, params)
        assert first == 0 and second == 0

    def test_unit_point(self, params):
        first, _ = propagator_derivative_factors(1.0, 1.0, params)
        assert first == -2 + 2j

    def test_second_factor_refused_at_origin(self, params):
        with pytest.raises(DomainError):
            propagator_derivative_factors(1.0, 0.0, params)

    def test_finite_difference_order(self, params):
        t, xi = 0.8, 1.0
        first, second = propagator_derivative_factors(t, xi, params)
        F = propagator(t, xi, params)
        errs1, errs2 = [], []
        for h in (1e-2, 5e-3, 2.5e-3):
            fd1 = (propagator(t, xi + h, params) - propagator(t, xi - h, params)) / (2 * h)
            fd2 = (propagator(t, xi + h, params) - 2 * F + propagator(t, xi - h, params)) / h ** 2
            errs1.append(abs(fd1 - first * F))
            errs2.append(abs(fd2 - second * F))
        for errs in (errs1, errs2):
            orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
            assert np.all(np.abs(orders - 2) < 0.05)


class TestProfiles:
    def test_lambda_zero_profile(self):
        assert regularity_profile(0.0, 2.0) == math.exp(4 / (3 * math.sqrt(3)))

    def test_profile_matches_sup(self):
        # f_lam(t) = sup_rho rho^{2 lam} e^{t (rho - rho^3)}
        for lam, t in ((0.5, 0.1), (1.0, 1.0), (1.5, 3.0)):
            _, value = multiplier_sup(2 * lam, t)
            assert regularity_profile(lam, t) == pytest.approx(value, rel=1e-10)

    def test_linear_xts_envelope_bounds_flow(self, params):
        g = TorusGrid(32.0, 512)
        rng = np.random.default_rng(4)
        c = rng.standard_normal(g.n) * np.exp(-np.abs(g.xi))
        phi = Field(g, c)
        s, T = -1.0, 0.5
        times = np.linspace(0, T, 26)[1:]
        traj = [semigroup_apply(phi, t, params) for t in times]
        ratio = xts_norm(times, traj, s) / sobolev_norm(phi, s)
        assert np.isfinite(ratio)
        assert ratio <= max(linear_xts_envelope(s, t) for t in times) * 2
