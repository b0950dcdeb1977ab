"""Nonlinear evolution: Picard iteration on the Duhamel formula.

The mild formulation is

    u(t) = S(t) phi - int_0^t S(t - tau) [u u_x](tau) dtau,

solved by successive substitution on a uniform collocation grid.  An
integrating-factor RK4 stepper provides an independent reference.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError, HorizonTooLargeError, InstabilityError
from .report import _plain, rows_to_csv
from .semigroup import SymbolParams, semigroup_apply, symbol
from .spectral import (Field, TorusGrid, _phase, l2_norm, read_field_binary, sobolev_norm,
                       write_field_binary, zero_nyquist)

CRITICAL_INDEX = -1.5


# ---------------------------------------------------------------------------
# nonlinear term


@lru_cache(maxsize=32)
def _padding_plan(n: int):
    m = 3 * n // 2
    keep = np.concatenate([np.arange(0, n // 2), np.arange(n - n // 2 + 1, n)])
    target = np.concatenate([np.arange(0, n // 2), np.arange(m - n // 2 + 1, m)])
    return m, keep, target


def dealiased_square(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Spectrum of ``u^2`` with the 3/2 zero-padding rule.

    Works on the last axis, so a stack of snapshots is handled in one call.
    The product is exact for every retained mode; the Nyquist mode of the
    input is ignored and that of the output is zero.
    """
    n = grid.n
    m, keep, target = _padding_plan(n)
    phase = _phase(grid)
    raw = coeffs * phase / grid.dx
    padded = np.zeros(coeffs.shape[:-1] + (m,), dtype=complex)
    padded[..., target] = raw[..., keep]
    vals = np.fft.ifft(padded, axis=-1).real * (m / n)
    prod = np.fft.fft(vals * vals, axis=-1) * (n / m)
    out = np.zeros(coeffs.shape, dtype=complex)
    out[..., keep] = prod[..., target]
    return out * phase * grid.dx


def nonlinear_coeffs(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Spectrum of ``u u_x = d_x(u^2) / 2``."""
    return 0.5j * grid.xi * dealiased_square(coeffs, grid)


def nonlinear_term(u: Field) -> Field:
    """Dealiased ``u u_x``; its zero mode vanishes identically."""
    if not u.is_real:
        raise DomainError("the nonlinear term is defined for real fields")
    return Field(u.grid, nonlinear_coeffs(u.coeffs, u.grid))


# ---------------------------------------------------------------------------
# exponential quadrature weights


def phi_functions(z: np.ndarray):
    """``phi1 = (e^z - 1)/z`` and ``phi2 = (e^z - 1 - z)/z^2``, cancellation-free."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 0.5
    phi1 = np.empty_like(z)
    phi2 = np.empty_like(z)
    zb = z[~small]
    ez = np.exp(zb)
    phi1[~small] = (ez - 1.0) / zb
    phi2[~small] = (ez - 1.0 - zb) / (zb * zb)
    zs = z[small]
    s1 = np.zeros_like(zs)
    s2 = np.zeros_like(zs)
    term = np.ones_like(zs)
    for k in range(1, 25):
        # term = z^(k-1) / k!
        term = term / k if k > 1 else term
        s1 += term
        s2 += term / (k + 1)
        term = term * zs
    phi1[small] = s1
    phi2[small] = s2
    return phi1, phi2


def _recursive_duhamel(w: np.ndarray, times: np.ndarray, b: np.ndarray,
                       rule: str) -> np.ndarray:
    """Composite quadrature of ``int_0^{t_i} S(t_i - tau) w(tau) dtau``.

    ``rule="exponential"`` interpolates ``w`` linearly on each panel and
    integrates the propagator exactly (product trapezoid); ``"trapezoid"``
    is the plain composite trapezoid rule on the full integrand.
    """
    out = np.zeros_like(w)
    steps = np.diff(times)
    cache = {}
    for i, h in enumerate(steps):
        key = round(float(h), 15)
        if key not in cache:
            z = h * b
            e = np.exp(z)
            if rule == "exponential":
                p1, p2 = phi_functions(z)
                cache[key] = (e, h * (p1 - p2), h * p2)
            elif rule == "trapezoid":
                cache[key] = (e, 0.5 * h * e, 0.5 * h * np.ones_like(e))
            else:
                raise ConfigurationError(f"unknown quadrature rule {rule!r}")
        e, w_left, w_right = cache[key]
        out[i + 1] = e * out[i] + w_left * w[i] + w_right * w[i + 1]
    return out


def duhamel_integral(w_fields, times, t: float, p: SymbolParams,
                     rule: str = "exponential") -> Field:
    """``int_0^t S(t - tau) w(tau) dtau`` from samples of ``w``.

    ``w_fields[i]`` is ``w(times[i])``; ``times`` must start at 0 and reach
    ``t``.  Only samples up to ``t`` are used.
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0 or times[0] != 0.0:
        raise DomainError("collocation times must start at 0")
    if t < 0 or t > times[-1] * (1 + 1e-12):
        raise DomainError(f"t = {t} lies outside the sampled range [0, {times[-1]}]")
    hit = np.flatnonzero(np.isclose(times, t, rtol=1e-12, atol=1e-15))
    if hit.size == 0:
        raise DomainError(f"t = {t} is not a collocation time")
    last = int(hit[0])
    grid = w_fields[0].grid
    w = np.stack([f.coeffs for f in w_fields[:last + 1]])
    b = symbol(grid.xi, p)
    out = _recursive_duhamel(w, times[:last + 1], b, rule)
    return Field(grid, out[-1], all(f.is_real for f in w_fields))


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-indexed snapshots with conservation monitors."""

    grid: TorusGrid
    times: np.ndarray
    coeffs: np.ndarray
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise DomainError("a trajectory needs at least one time")
        if np.any(np.diff(times) <= 0):
            raise DomainError("trajectory times must be strictly increasing")
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (times.size, self.grid.n):
            raise ConfigurationError(f"coefficient array has shape {c.shape}")
        times.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "coeffs", c)

    def __len__(self):
        return self.times.size

    def field(self, i: int) -> Field:
        return Field(self.grid, self.coeffs[i])

    @property
    def fields(self) -> list[Field]:
        return [self.field(i) for i in range(len(self))]

    @property
    def final(self) -> Field:
        return self.field(len(self) - 1)

    def l2_series(self) -> np.ndarray:
        power = np.sum(np.abs(self.coeffs) ** 2, axis=1)
        return np.sqrt(power * self.grid.dxi / (2 * math.pi))

    def sobolev_series(self, s: float) -> np.ndarray:
        return np.array([sobolev_norm(f, s) for f in self.fields])

    def mean_series(self) -> np.ndarray:
        return self.coeffs[:, 0].real.copy()

    def moment_series(self) -> np.ndarray:
        """``int x u(x, t) dx`` over one period, exact for the trigonometric interpolant.

        ``int_{-L}^{L} x e^{i xi_k x} dx = 2L (-1)^k / (i xi_k)`` for ``k != 0``
        and vanishes for ``k = 0``.
        """
        xi = self.grid.xi
        weight = np.zeros(self.grid.n, dtype=complex)
        nz = xi != 0
        weight[nz] = _phase(self.grid)[nz] / (1j * xi[nz])
        return (self.coeffs @ weight).real

    def concatenate(self, other: "Trajectory") -> "Trajectory":
        """Append ``other``, whose first time must equal our last."""
        if other.grid != self.grid:
            raise ConfigurationError("cannot glue trajectories on different grids")
        if not math.isclose(other.times[0], self.times[-1], rel_tol=1e-12, abs_tol=1e-14):
            raise DomainError("trajectories do not meet")
        times = np.concatenate([self.times, other.times[1:]])
        coeffs = np.concatenate([self.coeffs, other.coeffs[1:]])
        return Trajectory(self.grid, times, coeffs, dict(self.info))


def _real_initial(phi: Field) -> np.ndarray:
    if not phi.is_real:
        raise DomainError("the npBO flow is posed for real data")
    return zero_nyquist(phi).coeffs.copy()


# ---------------------------------------------------------------------------
# Picard iteration


@dataclass(frozen=True)
class PicardConfig:
    """Settings for the fixed-point solve on ``[0, T]``.

    ``contraction_tol`` is the relative distance between successive iterates
    in ``C_T H^s`` (``s >= 0``) or in the time-weighted norm (``s < 0``).
    """

    s: float = 0.0
    T: float = 0.5
    m_time_nodes: int = 200
    max_iter: int = 60
    contraction_tol: float = 1e-12
    dealias: bool = True
    rule: str = "exponential"
    nonlinear: bool = True

    def __post_init__(self):
        if not self.s > CRITICAL_INDEX:
            raise DomainError(f"need s > -3/2, got s = {self.s}")
        if not self.T > 0:
            raise DomainError(f"horizon must be positive, got {self.T}")
        if self.s < 0 and self.T > min(1.0, 4.5 * abs(self.s)) * (1 + 1e-12):
            raise DomainError(
                f"for s < 0 the horizon must satisfy T <= min(1, 9|s|/2) = "
                f"{min(1.0, 4.5 * abs(self.s))}, got {self.T}")
        if self.m_time_nodes < 1:
            raise ConfigurationError("need at least one time step")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.m_time_nodes + 1)


def _time_norms(coeffs: np.ndarray, grid: TorusGrid, times: np.ndarray, s: float) -> np.ndarray:
    xi = grid.xi
    power = np.abs(coeffs) ** 2
    scale = grid.dxi / (2 * math.pi)
    hs = np.sqrt(power @ ((1 + xi * xi) ** s) * scale)
    if s >= 0:
        return hs
    l2 = np.sqrt(power.sum(axis=1) * scale)
    return hs + times ** (abs(s) / 3) * l2


def _unrecoverable(coeffs):
    return not np.all(np.isfinite(coeffs))


def picard_iterates(phi: Field, cfg: PicardConfig, p: SymbolParams):
    """Generator over ``(iterate, distance)`` pairs of the Duhamel map.

    The zeroth iterate is the linear flow ``S(t) phi``.
    """
    grid = phi.grid
    times = cfg.times
    b = symbol(grid.xi, p)
    c0 = _real_initial(phi)
    linear = np.exp(np.outer(times, b)) * c0
    current = linear.copy()
    yield current, None
    while True:
        if cfg.nonlinear:
            if cfg.dealias:
                w = nonlinear_coeffs(current, grid)
            else:
                w = _aliased_nonlinear(current, grid)
            w[:, grid.nyquist_index] = 0.0
            new = linear - _recursive_duhamel(w, times, b, cfg.rule)
        else:
            new = linear.copy()
        if _unrecoverable(new):
            raise InstabilityError("Picard iterate overflowed")
        dist = float(np.max(_time_norms(new - current, grid, times, cfg.s)))
        current = new
        yield current, dist


def _aliased_nonlinear(coeffs, grid):
    phase = _phase(grid)
    vals = np.fft.ifft(coeffs * phase / grid.dx, axis=-1).real
    sq = np.fft.fft(vals * vals, axis=-1) * phase * grid.dx
    return 0.5j * grid.xi * sq


def picard_solve(phi: Field, cfg: PicardConfig, p: SymbolParams) -> Trajectory:
    """Fixed point of the Duhamel map on ``cfg.times``.

    The returned trajectory's ``info`` carries the relative distances between
    successive iterates, their ratios, the largest ratio
    (``contraction_ratio``) and the relative residual ``||u - Psi(u)||``.

    Raises
    ------
    HorizonTooLargeError
        If successive distances fail to shrink for three iterations in a row.
    """
    grid = phi.grid
    times = cfg.times
    distances = []
    ratios = []
    growing = 0
    scale = None
    converged = False
    iterations = 0
    gen = picard_iterates(phi, cfg, p)
    current, _ = next(gen)
    floor = 1e-14
    for iterations in range(1, cfg.max_iter + 1):
        current, dist = next(gen)
        if scale is None:
            scale = max(float(np.max(_time_norms(current, grid, times, cfg.s))), 1e-300)
        rel = dist / scale
        if distances and distances[-1] > floor * 1e3:
            ratio = rel / distances[-1]
            ratios.append(ratio)
            growing = growing + 1 if ratio >= 1.0 else 0
            if growing >= 3:
                raise HorizonTooLargeError(
                    f"Picard iteration does not contract on T = {cfg.T}: "
                    f"distance ratio {ratio:.3g} >= 1 for 3 iterations",
                    ratio=ratio, horizon=cfg.T)
        distances.append(rel)
        if rel <= cfg.contraction_tol:
            converged = True
            break
    if not converged:
        raise HorizonTooLargeError(
            f"Picard iteration did not reach tol {cfg.contraction_tol:g} in "
            f"{cfg.max_iter} iterations (last distance {distances[-1]:.3g})",
            ratio=ratios[-1] if ratios else None, horizon=cfg.T)
    _, residual = next(gen)
    return Trajectory(grid, times, current, {
        "solver": "picard", "s": cfg.s, "T": cfg.T, "mu": p.mu,
        "m_time_nodes": cfg.m_time_nodes, "rule": cfg.rule,
        "iterations": iterations, "distances": distances, "ratios": ratios,
        "contraction_ratio": max(ratios) if ratios else 0.0,
        "residual": residual / scale,
    })


def first_contraction_ratio(phi: Field, cfg: PicardConfig, p: SymbolParams) -> float:
    """``d_2 / d_1`` for the first two Picard updates."""
    gen = picard_iterates(phi, cfg, p)
    next(gen)
    _, d1 = next(gen)
    _, d2 = next(gen)
    return d2 / d1 if d1 > 0 else 0.0


# ---------------------------------------------------------------------------
# integrating-factor RK4 reference


def etd_reference_evolve(phi: Field, T: float, dt: float, p: SymbolParams,
                         store_every: int = 1, nonlinear: bool = True) -> Trajectory:
    """Integrating-factor RK4 for ``v = exp(-t b) u_hat``.

    The linear part is propagated exactly; ``dt`` only controls the
    accuracy of the nonlinear coupling.
    """
    if T <= 0 or dt <= 0:
        raise DomainError("T and dt must be positive")
    steps = int(round(T / dt))
    if steps < 1 or not math.isclose(steps * dt, T, rel_tol=1e-9):
        raise DomainError(f"T = {T} is not a multiple of dt = {dt}")
    dt = T / steps
    grid = phi.grid
    b = symbol(grid.xi, p)
    half = np.exp(0.5 * dt * b)
    full = half * half
    ny = grid.nyquist_index

    def rhs(c):
        if not nonlinear:
            return np.zeros_like(c)
        out = -nonlinear_coeffs(c, grid)
        out[ny] = 0.0
        return out

    u = _real_initial(phi)
    stored_t = [0.0]
    stored = [u.copy()]
    for step in range(1, steps + 1):
        k1 = rhs(u)
        k2 = rhs(half * (u + 0.5 * dt * k1))
        k3 = rhs(half * u + 0.5 * dt * k2)
        k4 = rhs(full * u + dt * half * k3)
        u = full * u + dt / 6 * (full * k1 + 2 * half * (k2 + k3) + k4)
        if not np.all(np.isfinite(u)):
            raise InstabilityError(f"non-finite state at step {step}", step=step)
        if step % store_every == 0 or step == steps:
            stored_t.append(step * dt)
            stored.append(u.copy())
    return Trajectory(grid, np.array(stored_t), np.array(stored),
                      {"solver": "ifrk4", "dt": dt, "mu": p.mu})


# ---------------------------------------------------------------------------
# existence time and continuation

# Rounded up from `calibrate_contraction_constant` on Gaussian and rough
# corpora (L = 32, n = 2048, mu = 1): 0.17-0.19 for s <= 1/2, 0.31 above.
DEFAULT_CONTRACTION_CONSTANT = {"negative": 0.2, "low": 0.2, "high": 0.35}
SAFETY_FACTOR = 0.5


def _regime(s: float) -> str:
    if s < 0:
        return "negative"
    if s <= 0.5:
        return "low"
    return "high"


def existence_time_formula(norm: float, s: float, constant: float) -> float:
    """Contraction horizon from the local theory, before any safety factor.

    * ``-3/2 < s < 0``: ``min{1, 9|s|/2, (4 C gamma)^(-1/g(s))}`` with
      ``gamma = 2 C ||phi||_s`` and ``g(s) = (3 + 2s)/6``;
    * ``0 <= s <= 1/2``: ``min{1, (4 C a)^(6/(2s-3))}`` with ``a = 2 C ||phi||_s``;
    * ``s > 1/2``: ``min{1, (4 C^2 ||phi||_s)^(-3/2)}``.
    """
    if s <= CRITICAL_INDEX:
        raise DomainError(f"no local theory for s <= -3/2 (got s = {s})")
    if norm < 0:
        raise DomainError("norm must be nonnegative")
    if norm == 0:
        return min(1.0, 4.5 * abs(s)) if s < 0 else 1.0
    C = constant
    if s < 0:
        g = (3 + 2 * s) / 6
        gamma = 2 * C * norm
        return min(1.0, 4.5 * abs(s), (4 * C * gamma) ** (-1 / g))
    if s <= 0.5:
        a = 2 * C * norm
        return min(1.0, (4 * C * a) ** (6 / (2 * s - 3)))
    return min(1.0, (4 * C * C * norm) ** (-1.5))


def existence_time(norm: float, s: float, constant: float | None = None,
                   safety: float = SAFETY_FACTOR) -> float:
    """Contraction-safe horizon for data of ``H^s`` norm ``norm``.

    Uses the empirically calibrated constant for the regime of ``s`` unless
    one is given.  Monotone nonincreasing in ``norm``; at small norms it
    saturates at the cap ``min{1, 9|s|/2}`` (``s < 0``) or 1.
    """
    if s <= CRITICAL_INDEX:
        raise DomainError(f"no local theory for s <= -3/2 (got s = {s})")
    C = DEFAULT_CONTRACTION_CONSTANT[_regime(s)] if constant is None else constant
    raw = existence_time_formula(norm, s, C)
    cap = min(1.0, 4.5 * abs(s)) if s < 0 else 1.0
    if raw >= cap:
        return cap
    return safety * raw


def empirical_horizon(phi: Field, s: float, p: SymbolParams, threshold: float = 0.5,
                      m_time_nodes: int = 16, t_min: float = 1e-6, t_max: float | None = None,
                      iterations: int = 30) -> float:
    """Largest ``T`` whose first Picard distance ratio stays below ``threshold``.

    Found by bisection in ``log T``; returns ``t_max`` (by default the cap
    ``min{1, 9|s|/2}`` for ``s < 0`` and 1 otherwise) if contraction holds on
    the whole bracket.
    """
    if t_max is None:
        t_max = min(1.0, 4.5 * abs(s)) if s < 0 else 1.0

    def ratio(T):
        cfg = PicardConfig(s=s, T=T, m_time_nodes=m_time_nodes)
        return first_contraction_ratio(phi, cfg, p)

    if ratio(t_max) < threshold:
        return t_max
    lo, hi = math.log(t_min), math.log(t_max)
    if ratio(t_min) >= threshold:
        raise HorizonTooLargeError(f"no contraction even at T = {t_min}", horizon=t_min)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if ratio(math.exp(mid)) < threshold:
            lo = mid
        else:
            hi = mid
    return math.exp(lo)


def calibrate_contraction_constant(corpus, s: float, p: SymbolParams, **kwargs) -> float:
    """Constant ``C`` whose formula reproduces the smallest observed horizon.

    For every datum the empirical horizon is measured and ``C`` is solved
    from :func:`existence_time_formula`; the largest such ``C`` (the most
    conservative horizon) is returned.
    """
    worst = 0.0
    for phi in corpus:
        norm = sobolev_norm(phi, s)
        if norm == 0:
            continue
        T = empirical_horizon(phi, s, p, **kwargs)
        if T >= (min(1.0, 4.5 * abs(s)) if s < 0 else 1.0):
            continue
        worst = max(worst, _solve_constant(T, norm, s))
    return worst


def _solve_constant(T: float, norm: float, s: float) -> float:
    if s < 0:
        g = (3 + 2 * s) / 6
        return math.sqrt(T ** (-g) / (8 * norm))
    if s <= 0.5:
        return math.sqrt(T ** ((2 * s - 3) / 6) / (8 * norm))
    return math.sqrt(T ** (-2 / 3) / (4 * norm))


def continue_globally(phi: Field, T_total: float, cfg: PicardConfig, p: SymbolParams,
                      dt: float | None = None, min_step: float | None = None,
                      constant: float | None = None) -> Trajectory:
    """Glue local Picard solutions up to ``T_total``.

    Each restart uses the horizon ``0.9 * existence_time(||u||, 0)`` rounded
    down to a multiple of ``dt``; a step that fails to contract is halved
    until ``min_step``.
    """
    if cfg.s < 0:
        raise DomainError("continuation restarts from L^2 control and needs s >= 0")
    if T_total <= 0:
        raise DomainError("T_total must be positive")
    dt = cfg.T / cfg.m_time_nodes if dt is None else dt
    min_step = dt if min_step is None else min_step
    total_steps = int(round(T_total / dt))
    if not math.isclose(total_steps * dt, T_total, rel_tol=1e-9):
        raise DomainError(f"T_total = {T_total} is not a multiple of dt = {dt}")
    grid = phi.grid
    traj = Trajectory(grid, np.array([0.0]), _real_initial(phi)[None, :])
    start = phi
    done = 0
    restarts = []
    while done < total_steps:
        horizon = 0.9 * existence_time(l2_norm(start), 0.0, constant)
        nsteps = max(1, min(int(horizon / dt), total_steps - done))
        while True:
            local = replace(cfg, s=max(cfg.s, 0.0), T=nsteps * dt, m_time_nodes=nsteps)
            try:
                piece = picard_solve(start, local, p)
                break
            except HorizonTooLargeError as err:
                if nsteps * dt <= min_step or nsteps == 1:
                    raise HorizonTooLargeError(
                        f"continuation stalled at t = {done * dt}: {err}",
                        ratio=err.ratio, horizon=nsteps * dt) from err
                nsteps = max(1, nsteps // 2)
        shifted = Trajectory(grid, piece.times + done * dt, piece.coeffs)
        traj = traj.concatenate(shifted)
        restarts.append(done * dt)
        done += nsteps
        start = piece.final
    grid_times = np.arange(total_steps + 1) * dt
    traj = Trajectory(grid, grid_times, traj.coeffs, {
        "solver": "picard-continuation", "restarts": restarts, "dt": dt,
        "mu": p.mu, "T_total": T_total})
    return traj


# ---------------------------------------------------------------------------
# monitors


@dataclass
class EnergyReport:
    times: np.ndarray
    norms: np.ndarray
    bound: np.ndarray
    max_ratio: float
    identity_residual: float
    identity_times: np.ndarray
    identity_lhs: np.ndarray
    identity_rhs: np.ndarray
    tolerance: float
    passed: bool

    def rows(self):
        return [{"t": float(t), "l2": float(n), "bound": float(b)}
                for t, n, b in zip(self.times, self.norms, self.bound)]


def dissipation_rate(coeffs: np.ndarray, grid: TorusGrid, mu: float) -> np.ndarray:
    """``mu int (|xi| - |xi|^3) |u_hat|^2 dxi / 2 pi`` per snapshot."""
    a = np.abs(grid.xi)
    weight = mu * (a - a ** 3)
    return (np.abs(coeffs) ** 2 @ weight) * grid.dxi / (2 * math.pi)


def _centered_difference(times, values):
    times = np.asarray(times)
    values = np.asarray(values)
    return (values[2:] - values[:-2]) / (times[2:] - times[:-2])


def energy_monitor(traj: Trajectory, p: SymbolParams, tol: float = 1e-8) -> EnergyReport:
    """Check the a priori bound and the energy identity along ``traj``.

    The identity is ``(1/2) d||u||^2/dt = mu int (|xi| - |xi|^3)|u_hat|^2``;
    its left side is taken by centred differences, so the residual is
    ``O(dt^2)``.
    """
    if len(traj) < 3:
        raise DomainError("energy monitor needs at least three times")
    times = traj.times
    norms = traj.l2_series()
    bound = np.exp(p.mu * times) * norms[0]
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(bound > 0, norms / np.where(bound > 0, bound, 1.0), 0.0)
    lhs = _centered_difference(times, 0.5 * norms ** 2)
    rhs = dissipation_rate(traj.coeffs[1:-1], traj.grid, p.mu)
    resid = float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0
    max_ratio = float(np.max(ratio))
    return EnergyReport(times, norms, bound, max_ratio, resid, times[1:-1], lhs, rhs,
                        tol, max_ratio <= 1 + tol)


@dataclass
class MomentSeries:
    """First-moment identity along a trajectory, at interior times.

    ``raw_residual`` compares the centred difference of ``int x u dx`` with
    ``||u||^2 / 2``.  On the torus the weight ``x`` is a sawtooth, which
    adds the exact flux ``-2L F(-L)`` with
    ``F = u^2/2 + H u_x + mu (H u + H u_xx)``; ``residual`` subtracts it and
    tends to zero like ``dt^2``.  The flux itself decays like ``1/L`` for
    mean-zero data.
    """

    times: np.ndarray
    moment: np.ndarray
    derivative: np.ndarray
    half_energy: np.ndarray
    boundary_flux: np.ndarray
    raw_residual: np.ndarray
    residual: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0

    @property
    def max_raw_residual(self) -> float:
        return float(np.max(np.abs(self.raw_residual))) if self.raw_residual.size else 0.0


def boundary_flux(traj: Trajectory, mu: float) -> np.ndarray:
    """``-2L F(-L)`` per snapshot, the sawtooth correction to the moment identity."""
    grid = traj.grid
    xi = grid.xi
    h = 1j * np.sign(xi)
    # F at x = -L is (1/2L) sum_k c_k e^{-i xi_k L}, and e^{-i xi_k L} = (-1)^k
    phase = _phase(grid)
    flux_mult = h * (1j * xi + mu - mu * xi * xi)
    lin = traj.coeffs @ (phase * flux_mult) / (2 * grid.half_length)
    u_edge = traj.coeffs @ phase / (2 * grid.half_length)
    F = 0.5 * u_edge.real ** 2 + lin.real
    return -2 * grid.half_length * F


def moment_monitor(traj: Trajectory, p: SymbolParams | None = None) -> MomentSeries:
    """Compare ``d/dt int x u dx`` with ``||u||^2 / 2`` at interior times.

    ``mu`` comes from ``p`` or, failing that, from ``traj.info``.
    """
    if len(traj) < 3:
        raise DomainError("moment monitor needs at least three times")
    if p is None:
        if "mu" not in traj.info:
            raise ConfigurationError("moment monitor needs mu")
        p = SymbolParams(traj.info["mu"])
    moment = traj.moment_series()
    deriv = _centered_difference(traj.times, moment)
    half = 0.5 * traj.l2_series()[1:-1] ** 2
    flux = boundary_flux(traj, p.mu)[1:-1]
    raw = deriv - half
    return MomentSeries(traj.times[1:-1], moment, deriv, half, flux, raw, raw - flux)


# ---------------------------------------------------------------------------
# export

def export_trajectory(traj: Trajectory, directory, p: SymbolParams, config: dict | None = None):
    """Write snapshots, a JSON manifest and a monitor CSV to ``directory``.

    Snapshots go to ``field_0000.bin`` and so on in the binary field format.
    ``monitors.csv`` holds ``t, l2, mean, moment, bound``, where ``bound`` is
    the a priori ``e^{mu t} ||phi||``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    l2 = traj.l2_series()
    bound = np.exp(p.mu * traj.times) * l2[0]
    rows = [{"t": t, "l2": a, "mean": m, "moment": q, "bound": b}
            for t, a, m, q, b in zip(traj.times.tolist(), l2.tolist(), traj.mean_series().tolist(),
                                     traj.moment_series().tolist(), bound.tolist())]
    files = []
    for i in range(len(traj)):
        name = f"field_{i:04d}.bin"
        write_field_binary(traj.field(i), directory / name)
        files.append(name)
    (directory / "monitors.csv").write_text(rows_to_csv(rows))
    manifest = {"half_length": traj.grid.half_length, "n": traj.grid.n, "mu": p.mu,
                "times": traj.times.tolist(), "fields": files, "monitors": rows,
                "info": _plain(traj.info), "config": _plain(config or {})}
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_trajectory(directory) -> Trajectory:
    """Inverse of :func:`export_trajectory`."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    grid = TorusGrid(manifest["half_length"], manifest["n"])
    coeffs = []
    for name in manifest["fields"]:
        f = read_field_binary(directory / name)
        if f.grid != grid:
            raise ConfigurationError(f"{name} is on a different grid than the manifest")
        coeffs.append(f.coeffs)
    return Trajectory(grid, np.array(manifest["times"]), np.array(coeffs), manifest["info"])
