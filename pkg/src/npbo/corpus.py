"""Reproducible families of initial data."""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .spectral import Field, TorusGrid, japanese, sobolev_norm, weighted_tail_fraction, zero_nyquist

KINDS = ("gaussian", "gaussian_odd", "rough_spectral", "box")
DECAY_MARGIN = 1e-8


def _check_margin(f: Field, kind: str) -> Field:
    tail = weighted_tail_fraction(f, 0.0)
    if tail > DECAY_MARGIN:
        raise ConfigurationError(
            f"{kind} datum reaches the boundary of the box L = {f.grid.half_length} "
            f"(tail fraction {tail:.2e} > {DECAY_MARGIN:g}); enlarge L or narrow the datum")
    return f


def _bumps(grid, rng, count, amplitude, width, center, jitter, odd):
    fields = []
    x = grid.x
    for _ in range(count):
        a, w, c = amplitude, width, center
        if jitter:
            a = amplitude * (1 + jitter * rng.uniform(-1, 1))
            w = width * (1 + jitter * rng.uniform(-0.5, 0.5))
            c = center + jitter * width * rng.uniform(-1, 1)
        y = (x - c) / w
        vals = a * (y if odd else 1.0) * np.exp(-y * y)
        fields.append(Field.from_values(vals, grid))
    return fields


def rough_field(grid: TorusGrid, s: float, rng, amplitude: float = 1.0, eps: float = 0.05,
                envelope: float | None = None) -> Field:
    """Random-phase datum with ``|phi_hat| ~ <xi>^-(s + 1/2 + eps)``.

    The spectrum lies just inside ``H^s``.  A Gaussian envelope of width
    ``L/10`` keeps the datum away from the periodic boundary; the result is
    scaled to ``||phi||_s = amplitude``.  Phases are drawn in order of
    increasing ``|k|``, so refining ``n`` with the same seed keeps the
    existing modes and only appends new ones.
    """
    k = grid.k
    order = np.lexsort((k < 0, np.abs(k)))
    phases = np.empty(grid.n, dtype=complex)
    phases[order] = np.exp(2j * np.pi * rng.random(grid.n))
    base = zero_nyquist(Field(grid, japanese(grid.xi) ** (-(s + 0.5 + eps)) * phases))
    width = grid.half_length / 10 if envelope is None else envelope
    vals = base.values() * np.exp(-(grid.x / width) ** 2)
    f = Field.from_values(vals, grid)
    norm = sobolev_norm(f, s)
    return f * (amplitude / norm) if norm > 0 else f


def generate_corpus(kind: str, grid: TorusGrid, count: int = 1, seed: int = 0,
                    **params) -> list[Field]:
    """Generate ``count`` fields of the given kind.

    Parameters by kind:

    * ``gaussian`` / ``gaussian_odd``: ``amplitude`` (1), ``width`` (1),
      ``center`` (0), ``jitter`` (0, relative random perturbation of all
      three); the odd variant multiplies by ``(x - center)/width`` and has
      zero mean.
    * ``rough_spectral``: ``s`` (required), ``amplitude`` (1), ``eps`` (0.05).
    * ``box``: the keyword arguments of :class:`npbo.illposed.InflationConfig`.

    Every field except ``box`` must have decayed below ``1e-8`` of its norm
    beyond ``|x| = L/2``; the band-limited box has a ``1/x`` tail and is
    exempt.
    """
    if kind not in KINDS:
        raise ConfigurationError(f"unknown corpus kind {kind!r}; choose from {KINDS}")
    if count < 1:
        raise ConfigurationError("count must be positive")
    rng = np.random.default_rng(seed)
    if kind in ("gaussian", "gaussian_odd"):
        width = params.get("width", 1.0)
        if width <= 0:
            raise ConfigurationError("width must be positive")
        fields = _bumps(grid, rng, count, params.get("amplitude", 1.0), width,
                        params.get("center", 0.0), params.get("jitter", 0.0),
                        kind == "gaussian_odd")
    elif kind == "rough_spectral":
        if "s" not in params:
            raise ConfigurationError("rough_spectral needs the index s")
        fields = [rough_field(grid, params["s"], rng, params.get("amplitude", 1.0),
                              params.get("eps", 0.05)) for _ in range(count)]
    else:
        from .illposed import InflationConfig, build_box_datum

        cfg = InflationConfig(**params)
        return [build_box_datum(cfg, grid) for _ in range(count)]
    return [_check_margin(f, kind) for f in fields]
