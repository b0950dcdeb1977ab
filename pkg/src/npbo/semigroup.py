"""Linear propagator ``F_mu(t, xi) = exp(t b_mu(xi))`` and its estimates.

The symbol is ``b_mu(xi) = i xi |xi| + mu (|xi| - |xi|^3)``.  Its real part
peaks at ``|xi| = 1/sqrt(3)`` with value ``2 mu / (3 sqrt 3)`` and is negative
for ``|xi| > 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError
from .report import EstimateReport, fit_loglog_slope
from .spectral import Field, TorusGrid, apply_multiplier, japanese, sobolev_norm

MAX_GROWTH_RATE = 2.0 / (3.0 * math.sqrt(3.0))


@dataclass(frozen=True)
class SymbolParams:
    """Dissipation strength ``mu > 0``."""

    mu: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError(f"mu must be positive, got {self.mu}")


def symbol(xi, p: SymbolParams):
    """``b_mu(xi)``; accepts scalars or arrays."""
    a = np.abs(xi)
    return 1j * xi * a + p.mu * (a - a ** 3)


def dissipation(xi, mu: float):
    """Real part ``mu (|xi| - |xi|^3)`` of the symbol."""
    a = np.abs(xi)
    return mu * (a - a ** 3)


def propagator(t: float, xi, p: SymbolParams):
    """``F_mu(t, xi)``; forward time only."""
    if t < 0:
        raise DomainError(f"the semigroup is defined for t >= 0 only, got t = {t}")
    return np.exp(t * symbol(xi, p))


def semigroup_apply(phi: Field, t: float, p: SymbolParams) -> Field:
    """``S(t) phi``."""
    if t < 0:
        raise DomainError(f"the semigroup is defined for t >= 0 only, got t = {t}")
    if t == 0:
        return phi
    return apply_multiplier(phi, propagator(t, phi.grid.xi, p))


def propagator_derivative_factors(t: float, xi: float, p: SymbolParams,
                                  second: bool = True):
    """Brackets multiplying ``F_mu`` in the first two ``xi``-derivatives.

    ``d_xi F = t [mu sgn(xi) + |xi| (2i - 3 mu xi)] F`` and, away from the
    origin, ``d_xi^2 F = (t [2i sgn(xi) - 6 mu |xi|] + first^2) F``.  The
    Dirac mass ``2 mu t delta`` at ``xi = 0`` has no pointwise value, so the
    second factor is refused there.
    """
    mu = p.mu
    a = abs(xi)
    first = t * (mu * np.sign(xi) + a * (2j - 3 * mu * xi))
    if not second:
        return complex(first), None
    if xi == 0:
        raise DomainError("second derivative factor is a distribution at xi = 0")
    sec = t * (2j * np.sign(xi) - 6 * mu * a) + first ** 2
    return complex(first), complex(sec)


def growth_bound_check(corpus, s: float, times, p: SymbolParams,
                       tol: float = 1e-10) -> EstimateReport:
    """Check ``||S(t) phi||_s <= exp(mu t) ||phi||_s`` over a corpus."""
    worst = 0.0
    rows = []
    notes = []
    for i, phi in enumerate(corpus):
        base = sobolev_norm(phi, s)
        if base == 0.0:
            notes.append(f"field {i} is zero; skipped")
            continue
        for t in times:
            ratio = sobolev_norm(semigroup_apply(phi, t, p), s) / (math.exp(p.mu * t) * base)
            rows.append({"index": i, "t": float(t), "ratio": ratio})
            worst = max(worst, ratio)
    if not rows:
        raise DomainError("growth_bound_check needs at least one nonzero field")
    return EstimateReport(
        name="growth_bound",
        inputs={"s": s, "mu": p.mu, "times": [float(t) for t in times], "corpus_size": len(corpus)},
        measurements=rows,
        measured={"max_ratio": worst},
        target={"max_ratio": 1.0 + tol},
        passed=worst <= 1.0 + tol,
        notes=notes,
    )


def operator_norm(t: float, lam: float, p: SymbolParams, xi: np.ndarray) -> float:
    """``sup_xi <xi>^lam |F_mu(t, xi)|`` over the given frequencies.

    For a diagonal operator this is exactly the ``H^s -> H^{s+lam}`` norm.
    """
    return float(np.max(japanese(xi) ** lam * np.exp(t * dissipation(xi, p.mu))))


def lattice_for_probe(times, lam: float, p: SymbolParams, points: int = 200_001) -> np.ndarray:
    """Uniform nonnegative frequency grid wide enough for the smallest time.

    The maximiser of ``xi^lam exp(-a xi^3)`` sits at ``(lam / 3a)^(1/3)``;
    the grid extends well past it and includes ``1/sqrt(3)``.
    """
    a = p.mu * min(times)
    cap = max(4.0, 6.0 * (max(lam, 1.0) / a) ** (1.0 / 3.0))
    # the dissipation peak, where the lambda = 0 supremum sits
    return np.append(np.linspace(0.0, cap, points), 1.0 / math.sqrt(3.0))


@dataclass
class PropagatorProbe:
    s: float
    lam: float
    mu: float
    times: np.ndarray
    norms: np.ndarray
    envelope: np.ndarray
    slope: float
    envelope_ratio_max: float
    passed: bool

    def to_report(self) -> EstimateReport:
        expected = -self.lam / 3
        return EstimateReport(
            name=f"smoothing_lambda_{self.lam:g}",
            inputs={"s": self.s, "lambda": self.lam, "mu": self.mu},
            measurements=[
                {"t": float(t), "measured": float(m), "envelope": float(e)}
                for t, m, e in zip(self.times, self.norms, self.envelope)
            ],
            measured={"slope": self.slope, "envelope_ratio_max": self.envelope_ratio_max},
            target={"slope": expected},
            passed=self.passed,
        )


def smoothing_probe(s: float, lam: float, times, p: SymbolParams,
                    slope_tol: float = 0.05, xi: np.ndarray | None = None) -> PropagatorProbe:
    """Measure the ``H^s -> H^{s+lam}`` norm of ``S(t)`` on a log time grid.

    The slope is fitted on the smallest decade of ``times``.  For ``lam = 0``
    the norms must instead match ``exp(2 mu t / (3 sqrt 3))`` to 1e-8.  Because the operator is diagonal the result
    does not depend on ``s``.
    """
    if lam < 0:
        raise DomainError(f"smoothing gain must be nonnegative, got {lam}")
    times = np.sort(np.asarray(times, dtype=float))
    if np.any(times <= 0):
        raise DomainError("smoothing probe times must be positive")
    if xi is None:
        xi = lattice_for_probe(times, lam, p)
    norms = np.array([operator_norm(t, lam, p, xi) for t in times])
    envelope = np.exp(p.mu * times) + (p.mu * times) ** (-lam / 3)
    first_decade = times <= times[0] * 10
    if first_decade.sum() < 2:
        first_decade[:2] = True
    slope = fit_loglog_slope(times[first_decade], norms[first_decade])
    expected = -lam / 3
    if lam == 0:
        profile = np.exp(MAX_GROWTH_RATE * p.mu * times)
        slope_ok = bool(np.max(np.abs(norms / profile - 1)) <= 1e-8)
    else:
        slope_ok = abs(slope - expected) <= slope_tol * abs(expected)
    ratio = norms / envelope
    passed = bool(slope_ok and np.all(np.isfinite(ratio)))
    return PropagatorProbe(s, lam, p.mu, times, norms, envelope, slope,
                           float(ratio.max()), passed)


def multiplier_sup(lam: float, a: float, points: int = 100_000):
    """Maximise ``g(xi) = xi^lam exp(a (xi - xi^3))`` over ``xi > 0``.

    A dense grid locates the peak, then the root of ``d log g / d xi`` is
    polished by bracketing.  Returns ``(argmax, value)``.
    """
    if not a > 0:
        raise DomainError(f"a = mu t must be positive, got {a}")
    if lam < 0:
        raise DomainError(f"lambda must be nonnegative, got {lam}")
    cap = max(4.0, 2.0 * lam / a)
    xi = np.linspace(cap / points, cap, points)
    logg = lam * np.log(xi) + a * (xi - xi ** 3)
    i = int(np.argmax(logg))

    def dlog(z):
        return lam / z + a * (1 - 3 * z * z)

    lo = xi[max(i - 1, 0)]
    hi = xi[min(i + 1, points - 1)]
    if i == 0:
        lo = xi[0] * 1e-6
    if dlog(lo) > 0 > dlog(hi):
        star = brentq(dlog, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    else:
        star = xi[i]
    value = star ** lam * math.exp(a * (star - star ** 3))
    return float(star), float(value)


def multiplier_sup_constant(lam: float, a: float) -> float:
    """Empirical ``C`` with ``sup = C (e^a + a^(-lam/3))``."""
    _, value = multiplier_sup(lam, a)
    return value / (math.exp(a) + a ** (-lam / 3))


def regularity_profile(lam: float, t: float) -> float:
    """Closed-form bound ``f_lam(t) = rho^(2 lam) exp(t (rho - rho^3))``.

    Valid for ``0 < t <= 9 lam``; ``f_0(t) = exp(2t / (3 sqrt 3))``.
    """
    if lam == 0:
        return math.exp(MAX_GROWTH_RATE * t)
    if not 0 < t <= 9 * lam:
        raise DomainError(f"need 0 < t <= 9 lambda, got t = {t}, lambda = {lam}")
    root = (9 * lam + math.sqrt(81 * lam * lam - t * t)) ** (1 / 3)
    rho = root / 3 * t ** (-1 / 3) + t ** (1 / 3) / (3 * root)
    return rho ** (2 * lam) * math.exp(t * (rho - rho ** 3))


def linear_xts_envelope(s: float, t: float) -> float:
    """``g_s(t) = exp(2t/(3 sqrt 3)) + t^(|s|/3) f_{|s|/2}(t)``."""
    return math.exp(MAX_GROWTH_RATE * t) + t ** (abs(s) / 3) * regularity_profile(abs(s) / 2, t)
