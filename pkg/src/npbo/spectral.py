"""Discrete Fourier representation of functions on a large torus.

The torus ``[-L, L)`` stands in for the real line.  Spectral coefficients are
calibrated against the continuum transform

    f_hat(xi) = int f(x) exp(-i xi x) dx,

so that every norm below is a Riemann sum converging to its value on R.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .errors import ConfigurationError, DomainError, NumericError

Multiplier = Union[Callable[[np.ndarray], np.ndarray], np.ndarray, complex, float]


@dataclass(frozen=True)
class TorusGrid:
    """Periodic grid of ``n`` nodes on ``[-L, L)`` with its frequency lattice.

    Frequencies are stored in numpy FFT order, ``xi_k = pi k / L`` with
    ``k = 0, 1, ..., n/2-1, -n/2, ..., -1``.
    """

    half_length: float = 64.0
    n: int = 1024

    def __post_init__(self):
        if not self.half_length > 0:
            raise ConfigurationError(f"half_length must be positive, got {self.half_length}")
        n = int(self.n)
        if n < 16 or n & (n - 1):
            raise ConfigurationError(f"n must be a power of two >= 16, got {self.n}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "half_length", float(self.half_length))

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.n

    @property
    def dxi(self) -> float:
        return math.pi / self.half_length

    @property
    def x(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.n)

    @property
    def k(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, 1.0 / self.n).astype(np.int64)

    @property
    def xi(self) -> np.ndarray:
        return self.dxi * self.k

    @property
    def nyquist_index(self) -> int:
        return self.n // 2

    def refined(self, factor: int = 2) -> "TorusGrid":
        """Same domain, ``factor`` times more nodes."""
        return TorusGrid(self.half_length, self.n * factor)

    def extended(self, factor: int = 2) -> "TorusGrid":
        """``factor`` times longer domain at the same node spacing."""
        return TorusGrid(self.half_length * factor, self.n * factor)


def _phase(grid: TorusGrid) -> np.ndarray:
    # exp(i xi_k L) = (-1)^k because the first node sits at x = -L
    return np.where(grid.k % 2 == 0, 1.0, -1.0)


@dataclass(frozen=True, eq=False)
class Field:
    """One snapshot of a function, held by its spectral coefficients.

    ``coeffs[k]`` approximates the continuum transform at ``grid.xi[k]``.
    Fields are treated as immutable values; operations return new Fields.
    """

    grid: TorusGrid
    coeffs: np.ndarray
    is_real: bool = True

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.grid.n,):
            raise ConfigurationError(
                f"expected {self.grid.n} coefficients, got shape {c.shape}")
        if self.is_real:
            c = hermitian_projection(c)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_values(cls, values, grid: TorusGrid, is_real: bool | None = None) -> "Field":
        return forward_transform(values, grid, is_real=is_real)

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], grid: TorusGrid) -> "Field":
        return forward_transform(func(grid.x), grid)

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "Field":
        return cls(grid, np.zeros(grid.n, dtype=complex))

    def values(self) -> np.ndarray:
        """Physical samples at ``grid.x``."""
        return inverse_transform(self)

    @property
    def mean(self) -> complex:
        """Zero-mode coefficient, i.e. the integral of the function."""
        return self.coeffs[0]

    def with_coeffs(self, coeffs, is_real: bool | None = None) -> "Field":
        return Field(self.grid, coeffs, self.is_real if is_real is None else is_real)

    def __add__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.coeffs + other.coeffs, self.is_real and other.is_real)

    def __sub__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.coeffs - other.coeffs, self.is_real and other.is_real)

    def __mul__(self, scalar) -> "Field":
        scalar = complex(scalar)
        return Field(self.grid, self.coeffs * scalar, self.is_real and scalar.imag == 0)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.coeffs, self.is_real)


def _same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise ConfigurationError(f"grid mismatch: {a.grid} vs {b.grid}")


def hermitian_projection(c: np.ndarray) -> np.ndarray:
    """Symmetrize ``c`` so that it is the spectrum of a real function.

    Paired modes become ``(c_k + conj(c_-k)) / 2``; the unpaired Nyquist mode
    keeps only its real part.  Idempotent.
    """
    n = c.size
    mirrored = np.conj(c[(-np.arange(n)) % n])
    return 0.5 * (c + mirrored)


def forward_transform(samples, grid: TorusGrid, is_real: bool | None = None) -> Field:
    """Physical samples at ``grid.x`` to a continuum-calibrated spectrum."""
    samples = np.asarray(samples)
    if samples.shape != (grid.n,):
        raise ConfigurationError(
            f"sample count {samples.shape} does not match n_modes={grid.n}")
    if is_real is None:
        is_real = not np.iscomplexobj(samples) or not np.any(samples.imag)
    coeffs = grid.dx * _phase(grid) * np.fft.fft(samples)
    return Field(grid, coeffs, is_real)


def inverse_transform(f: Field) -> np.ndarray:
    grid = f.grid
    values = np.fft.ifft(f.coeffs * _phase(grid) / grid.dx)
    return values.real if f.is_real else values


def _evaluate_multiplier(m: Multiplier, grid: TorusGrid) -> np.ndarray:
    if callable(m):
        vals = np.asarray(m(grid.xi), dtype=complex)
    else:
        vals = np.asarray(m, dtype=complex)
    vals = np.broadcast_to(vals, (grid.n,))
    if not np.all(np.isfinite(vals)):
        bad = np.flatnonzero(~np.isfinite(vals))
        raise NumericError(
            f"multiplier is not finite at xi = {grid.xi[bad[:5]].tolist()}")
    return vals


def _is_hermitian(vals: np.ndarray, grid: TorusGrid) -> bool:
    mirrored = np.conj(vals[(-np.arange(grid.n)) % grid.n])
    paired = np.ones(grid.n, dtype=bool)
    paired[grid.nyquist_index] = False
    return np.allclose(vals[paired], mirrored[paired], rtol=1e-14, atol=0.0)


def apply_multiplier(f: Field, m: Multiplier) -> Field:
    """Return the Field with spectrum ``m(xi_k) * c_k``.

    ``m`` is a callable evaluated on the lattice, or precomputed lattice
    values.  Real input stays real iff ``m(-xi) = conj(m(xi))``.
    """
    vals = _evaluate_multiplier(m, f.grid)
    is_real = f.is_real and _is_hermitian(vals, f.grid)
    return Field(f.grid, vals * f.coeffs, is_real)


def sgn(xi: np.ndarray) -> np.ndarray:
    """Sign with ``sgn(0) = 0``."""
    return np.sign(xi)


def japanese(xi: np.ndarray) -> np.ndarray:
    """``<xi> = (1 + xi^2)^(1/2)``."""
    return np.sqrt(1.0 + np.square(xi))


def hilbert_symbol(xi: np.ndarray) -> np.ndarray:
    return 1j * sgn(xi)


def hilbert_transform(f: Field) -> Field:
    """Hilbert transform with symbol ``i sgn(xi)``; kills the zero mode."""
    return apply_multiplier(f, hilbert_symbol)


def derivative(f: Field, order: int = 1) -> Field:
    return apply_multiplier(f, lambda xi: (1j * xi) ** order)


def fractional_derivative(f: Field, b: float) -> Field:
    """``D^b`` with symbol ``|xi|^b``."""
    return apply_multiplier(f, lambda xi: np.abs(xi) ** b)


def zero_nyquist(f: Field) -> Field:
    c = f.coeffs.copy()
    c[f.grid.nyquist_index] = 0.0
    return f.with_coeffs(c)


def l2_norm(f: Field) -> float:
    return sobolev_norm(f, 0.0)


def sobolev_norm(f: Field, s: float, homogeneous: bool = False) -> float:
    """Continuum-calibrated ``H^s`` norm ``||<xi>^s f_hat||_{L^2} / sqrt(2 pi)``.

    With ``homogeneous=True`` the weight is ``|xi|^s`` (zero mode dropped
    for ``s <= 0``).
    """
    xi = f.grid.xi
    power = np.abs(f.coeffs) ** 2
    if homogeneous:
        weight = np.zeros_like(xi)
        nz = xi != 0
        weight[nz] = np.abs(xi[nz]) ** (2 * s)
        if s > 0:
            weight[~nz] = 0.0
    else:
        weight = (1.0 + xi * xi) ** s
    return math.sqrt(float(np.sum(weight * power)) * f.grid.dxi / (2 * math.pi))


def spatial_weight(grid: TorusGrid, r: float, homogeneous: bool = False,
                   origin_floor: bool = False) -> np.ndarray:
    """Node weights ``<x>^r`` or ``|x|^r``.

    With ``origin_floor`` the homogeneous weight uses ``dx^r`` at nodes with
    ``|x| < dx``.
    """
    x = grid.x
    if not homogeneous:
        return (1.0 + x * x) ** (r / 2)
    ax = np.abs(x)
    if origin_floor:
        ax = np.where(ax < grid.dx, grid.dx, ax)
    return ax ** r


def weighted_norm(f: Field, r: float, homogeneous: bool = False,
                  origin_floor: bool = False) -> float:
    """``||<x>^r f||`` (or ``|| |x|^r f ||``) as a Riemann sum over nodes."""
    w = spatial_weight(f.grid, r, homogeneous, origin_floor)
    vals = f.values()
    return math.sqrt(float(np.sum((w * np.abs(vals)) ** 2)) * f.grid.dx)


def z_norm(f: Field, s: float, r: float) -> float:
    """Norm of ``Z_{s,r} = H^s cap L^2(|x|^{2r} dx)``."""
    return math.hypot(sobolev_norm(f, s), weighted_norm(f, r))


def weighted_tail_fraction(f: Field, r: float, cutoff: float | None = None) -> float:
    """Share of ``||<x>^r f||`` carried by nodes with ``|x| > cutoff``.

    The default cutoff is ``L/2``; values well above round-off mean the
    function has not decayed before reaching the periodic boundary.
    """
    grid = f.grid
    cutoff = grid.half_length / 2 if cutoff is None else cutoff
    w = spatial_weight(grid, r) * np.abs(f.values())
    total = math.sqrt(float(np.sum(w * w)))
    if total == 0.0:
        return 0.0
    tail = w[np.abs(grid.x) > cutoff]
    return math.sqrt(float(np.sum(tail * tail))) / total


def stein_derivative(f: Field, b: float, nodes: np.ndarray | None = None,
                     chunk: int = 256) -> np.ndarray:
    """Pointwise Stein square function ``D^b f(x_j)``.

    For each requested node the integral of
    ``|f(x_j) - f(y)|^2 / |x_j - y|^(1+2b)`` runs over one period centred
    at ``x_j``.  The node's own cell ``|y - x_j| < dx/2`` uses the local
    Lipschitz value ``|f'(x_j)|^2 * 2 (dx/2)^(2-2b) / (2-2b)`` with ``f'``
    taken spectrally.

    Parameters
    ----------
    f : Field
    b : float
        Order in ``(0, 1)``.
    nodes : array of int, optional
        Node indices to evaluate; all nodes by default.
    """
    if not 0.0 < b < 1.0:
        raise DomainError(f"Stein derivative order must lie in (0, 1), got {b}")
    grid = f.grid
    n = grid.n
    vals = f.values()
    dvals = derivative(f).values()
    idx = np.arange(n) if nodes is None else np.asarray(nodes, dtype=np.int64)

    offsets = np.arange(-(n // 2), n // 2)
    offsets = offsets[offsets != 0]
    dist = np.abs(offsets) * grid.dx
    kernel = grid.dx / dist ** (1 + 2 * b)

    h = grid.dx / 2
    cell = np.abs(dvals[idx]) ** 2 * 2 * h ** (2 - 2 * b) / (2 - 2 * b)
    out = np.empty(idx.size)
    for start in range(0, idx.size, chunk):
        sel = idx[start:start + chunk]
        neighbours = vals[(sel[:, None] + offsets[None, :]) % n]
        diff2 = np.abs(vals[sel][:, None] - neighbours) ** 2
        out[start:start + chunk] = diff2 @ kernel
    return np.sqrt(out + cell)


def stein_seminorm(f: Field, b: float) -> float:
    """``L^2`` norm of the Stein derivative over the whole torus."""
    d = stein_derivative(f, b)
    return math.sqrt(float(np.sum(d * d)) * f.grid.dx)


def bessel_norm(f: Field, b: float) -> float:
    """``||(1 - d_x^2)^(b/2) f||``, i.e. the ``H^b`` norm."""
    return sobolev_norm(f, b)


def xts_norm(times, fields, s: float, horizon: float | None = None) -> float:
    """Time-weighted norm ``sup_t (||u(t)||_s + t^(|s|/3) ||u(t)||)``.

    The supremum runs over the stored times in ``(0, horizon]``; on a finite
    set of times this is a lower bound for the continuum supremum.
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise DomainError("xts_norm needs a non-empty trajectory")
    if s >= 0:
        raise DomainError(f"xts_norm is defined for s < 0, got {s}")
    horizon = times.max() if horizon is None else horizon
    best = 0.0
    for t, u in zip(times, fields):
        if t <= 0 or t > horizon * (1 + 1e-12):
            continue
        best = max(best, sobolev_norm(u, s) + t ** (abs(s) / 3) * l2_norm(u))
    return best


# ---------------------------------------------------------------------------
# serialisation

_BINARY_DTYPE = np.dtype("<f8")


def write_field_binary(f: Field, path) -> None:
    """Little-endian float64 file: ``[L, n]`` then the columns ``Re f``, ``Im f``."""
    vals = inverse_transform(f)
    header = np.array([f.grid.half_length, f.grid.n], dtype=_BINARY_DTYPE)
    body = np.concatenate([header, np.real(vals), np.imag(vals)]).astype(_BINARY_DTYPE)
    Path(path).write_bytes(body.tobytes())


def read_field_binary(path, is_real: bool | None = None) -> Field:
    raw = np.frombuffer(Path(path).read_bytes(), dtype=_BINARY_DTYPE)
    if raw.size < 2:
        raise ConfigurationError(f"{path}: truncated header")
    L, n = float(raw[0]), int(raw[1])
    if raw.size != 2 + 2 * n:
        raise ConfigurationError(f"{path}: expected {2 + 2 * n} values, found {raw.size}")
    grid = TorusGrid(L, n)
    vals = raw[2:2 + n] + 1j * raw[2 + n:]
    if is_real is None:
        is_real = not np.any(raw[2 + n:])
    return forward_transform(vals.real if is_real else vals, grid, is_real)


def write_field_csv(f: Field, path) -> None:
    """Columns ``x, re, im`` with 17 significant digits."""
    vals = inverse_transform(f)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "re", "im"])
        for x, v in zip(f.grid.x, vals):
            writer.writerow([format(float(x), ".17g"), format(float(np.real(v)), ".17g"),
                             format(float(np.imag(v)), ".17g")])
