import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from npbo.errors import ConfigurationError, DomainError
from npbo.illposed import (DUHAMEL_FACTOR, InflationConfig, InflationSamplingWarning,
                           box_datum_norm, build_box_datum, duhamel_time_factor,
                           expected_slope, inflation_sweep, interaction_measure,
                           interaction_set, kxi_integral, real_part_envelope, resonance_chi,
                           resonance_psi, second_iterate_spectrum, solver_cross_check)
from npbo.spectral import TorusGrid


def box_norm_closed_form(N, gamma, s=-2.0):
    # int (1 + x^2)^-2 dx = x / (2 (1 + x^2)) + arctan(x) / 2
    assert s == -2.0

    # differences rewritten to avoid cancellation at large N
    a, b = N, N + 2 * gamma
    rational = (b - a) * (1 - a * b) / (2 * (1 + a * a) * (1 + b * b))
    angle = math.atan((b - a) / (1 + a * b)) / 2
    amp2 = N ** 4 / gamma
    return math.sqrt(2 * amp2 * (rational + angle) / (2 * math.pi))


class TestConfig:
    def test_scale_separation(self):
        with pytest.raises(DomainError):
            InflationConfig(N=7.0)

    def test_datum_norm_window(self):
        with pytest.raises(DomainError):
            InflationConfig(N=8.0, s=-20.0)

    def test_time_grid_brackets_resonance_scale(self):
        t = InflationConfig(N=32.0).time_grid
        assert t.size == 40
        assert t[0] == pytest.approx(1e-2 * 32.0 ** -3) and t[-1] == pytest.approx(1e2 * 32.0 ** -3)


class TestBoxDatum:
    def test_norm_against_closed_form(self):
        for N in (16.0, 64.0, 1024.0):
            assert box_datum_norm(InflationConfig(N=N)) == pytest.approx(
                box_norm_closed_form(N, 1.0), rel=1e-10)

    def test_norm_order_one(self):
        # large-N limit is sqrt(2/pi); the bracket is a factor sqrt(2) either way
        ref = box_norm_closed_form(64.0, 1.0)
        got = box_datum_norm(InflationConfig(N=64.0))
        assert ref / math.sqrt(2) <= got <= ref * math.sqrt(2)
        assert box_datum_norm(InflationConfig(N=2.0 ** 20)) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-5)

    def test_doubling_n_is_stable(self):
        a = box_datum_norm(InflationConfig(N=64.0))
        b = box_datum_norm(InflationConfig(N=128.0))
        assert abs(b / a - 1) < 0.02

    def test_lattice_datum(self):
        cfg = InflationConfig(N=16.0)
        g = TorusGrid(16 * math.pi, 2048)
        phi = build_box_datum(cfg, g)
        assert phi.mean == 0 and phi.is_real
        support = np.abs(g.xi[np.abs(phi.coeffs) > 0])
        assert support.min() >= 16.0 - 1e-9 and support.max() <= 18.0 + 1e-9

    def test_unresolved_box(self):
        with pytest.raises(ConfigurationError):
            build_box_datum(InflationConfig(N=16.0), TorusGrid(4 * math.pi, 1024))

    def test_truncated_box(self):
        with pytest.raises(ConfigurationError):
            build_box_datum(InflationConfig(N=64.0), TorusGrid(16 * math.pi, 1024))


class TestResonance:
    def test_chi_value(self):
        assert resonance_chi(2.0, 1.0, 1.0) == 6.0

    def test_chi_at_origin(self):
        for xi1 in (0.3, -1.7, 5.0):
            assert resonance_chi(0.0, xi1, 1.0) == pytest.approx(2 * (abs(xi1) - abs(xi1) ** 3))

    def test_chi_symmetric(self):
        rng = np.random.default_rng(0)
        for xi, xi1 in rng.uniform(-10, 10, (20, 2)):
            assert resonance_chi(xi, xi1, 1.3) == pytest.approx(resonance_chi(xi, xi - xi1, 1.3),
                                                               rel=1e-12, abs=1e-9)

    def test_psi_value(self):
        assert resonance_psi(2.0, 1.0) == -2.0

    def test_psi_midpoint(self):
        for xi in (-3.0, 0.5, 4.0):
            assert resonance_psi(xi, xi / 2) == pytest.approx(-xi * abs(xi) / 2)

    def test_brackets_on_interaction_set(self):
        N, gamma = 64.0, 1.0
        for xi in np.linspace(-1.99, 1.99, 41):
            for lo, hi in interaction_set(xi, N, gamma):
                xi1 = np.linspace(lo, hi, 33)
                chi = resonance_chi(xi, xi1, 1.0) / (-N ** 3)
                assert np.all((chi >= 0.25) & (chi <= 4))
                if abs(xi) >= gamma / 2:
                    psi = np.abs(resonance_psi(xi, xi1)) / (gamma * N)
                    assert np.all((psi >= 0.125) & (psi <= 8))


class TestInteractionSet:
    @pytest.mark.parametrize("xi", [0.0, 0.3, -1.1, 1.9])
    def test_measure(self, xi):
        N, gamma = 20.0, 1.0
        assert interaction_measure(xi, N, gamma) == pytest.approx(2 * (2 * gamma - abs(xi)))
        xi1 = np.linspace(-25, 25, 2_000_001)
        h = xi1[1] - xi1[0]
        inI = lambda v: (v >= N) & (v <= N + 2 * gamma)
        member = (inI(xi1) & inI(-(xi - xi1))) | (inI(-xi1) & inI(xi - xi1))
        assert member.sum() * h == pytest.approx(2 * (2 * gamma - abs(xi)), abs=3 * h)

    def test_empty_outside_band(self):
        assert interaction_set(2.5, 20.0, 1.0) == []


class TestTimeFactor:
    def test_against_quadrature(self):
        rng = np.random.default_rng(2)
        for chi, psi, t in zip(rng.uniform(-50, 5, 15), rng.uniform(-50, 50, 15), rng.uniform(0.01, 1, 15)):
            z = complex(chi, psi)
            re, _ = quad(lambda tau: (np.exp(tau * z)).real, 0, t, epsabs=0, epsrel=1e-12, limit=200)
            im, _ = quad(lambda tau: (np.exp(tau * z)).imag, 0, t, epsabs=0, epsrel=1e-12, limit=200)
            assert complex(duhamel_time_factor(z, t)) == pytest.approx(complex(re, im), rel=1e-8)

    def test_removable_singularity(self):
        assert complex(duhamel_time_factor(0.0, 0.3)) == 0.3


class TestSecondIterate:
    def test_vanishes_linearly_at_small_time(self):
        cfg = InflationConfig(N=32.0)
        _, a = second_iterate_spectrum(cfg, 1e-12, [0.5])
        _, b = second_iterate_spectrum(cfg, 2e-12, [0.5])
        assert abs(b[0] / a[0]) == pytest.approx(2.0, rel=1e-6)

    def test_zero_frequency(self):
        _, v = second_iterate_spectrum(InflationConfig(N=32.0), 1e-4, [0.0])
        assert v[0] == 0

    def test_outside_band(self):
        with pytest.raises(DomainError):
            second_iterate_spectrum(InflationConfig(N=32.0), 1e-4, [2.0])

    def test_node_doubling(self):
        cfg = InflationConfig(N=64.0)
        fine = InflationConfig(N=64.0, xi1_nodes=128)
        t = 64.0 ** -3
        for xi in (0.3, 1.2, -1.7):
            a = kxi_integral(xi, cfg, [t])[0]
            b = kxi_integral(xi, fine, [t])[0]
            assert abs(a / b - 1) < 5e-3

    def test_modulus_lower_bound(self):
        N, gamma, mu = 64.0, 1.0, 1.0
        cfg = InflationConfig(N=N)
        bound = gamma * math.exp(-2 * mu) / (N * (mu * N * N + gamma))
        for xi in (0.5, -0.7, 1.0):
            assert abs(kxi_integral(xi, cfg, [N ** -3])[0]) >= bound

    def test_real_part_envelope(self):
        cfg = InflationConfig(N=64.0)
        for t in np.array([0.1, 0.5, 1.0]) * 64.0 ** -3:
            for xi in (0.5, 1.0, -0.7):
                ratio = kxi_integral(xi, cfg, [t])[0].real / real_part_envelope(cfg, t)
                assert 1 / 16 <= ratio <= 16


class TestSweep:
    def test_expected_slopes(self):
        assert expected_slope(-2.0) == 1.0
        assert expected_slope(-1.75) == 0.5

    def test_short_sweep(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", InflationSamplingWarning)
            rep = inflation_sweep([16, 32, 64, 128, 256], -2.0)
        assert rep.measured["slope"] >= 0.9
        assert [r["N"] for r in rep.measurements] == [16, 32, 64, 128, 256]

    def test_endpoint_warning(self):
        with pytest.warns(InflationSamplingWarning):
            # a grid far below N^-3 leaves the norm still rising at the last time
            inflation_sweep([16, 32, 64, 128, 256], -1.0, times=np.logspace(-10, -9, 8))

    def test_needs_five_points(self):
        with pytest.raises(DomainError):
            inflation_sweep([16, 32, 64], -2.0)


def test_generic_pipeline_cross_check():
    cfg = InflationConfig(N=32.0, s=-2.0)
    out = solver_cross_check(cfg, TorusGrid(64 * math.pi, 8192), 32.0 ** -3)
    assert abs(out["ratio"] / DUHAMEL_FACTOR - 1) < 0.05
