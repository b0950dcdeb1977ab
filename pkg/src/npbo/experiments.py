"""Experiment definitions shared by the command line and the acceptance tests.

Each experiment returns an :class:`EstimateReport` whose measurement rows
hold everything needed to recompute the verdict; :data:`RESCORERS` does
exactly that from rows and targets alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import generate_corpus
from .illposed import DUHAMEL_FACTOR, InflationConfig, inflation_sweep, solver_cross_check
from .report import EstimateReport, fit_loglog_slope
from .semigroup import (MAX_GROWTH_RATE, SymbolParams, multiplier_sup, semigroup_apply,
                        smoothing_probe)
from .solver import (PicardConfig, continue_globally, empirical_horizon, energy_monitor,
                     etd_reference_evolve, moment_monitor, picard_solve)
from .spectral import Field, TorusGrid, l2_norm, sobolev_norm
from .weighted import (commutator_check, hilbert_dichotomy, jump_divergence_probe,
                       persistence_run)

CRITERIA = {
    1: ("semigroup_growth", ["growth_bound"]),
    2: ("smoothing_exponent", ["smoothing"]),
    3: ("picard_etd_equivalence", ["picard_etd"]),
    4: ("global_energy_bound", ["energy"]),
    5: ("existence_time_scaling", ["existence_scaling"]),
    6: ("norm_inflation", ["inflation_s_-2", "inflation_s_-1.75", "inflation_s_-1"]),
    7: ("mean_and_moment", ["mean_moment"]),
    8: ("weighted_persistence", ["persistence"]),
    9: ("hilbert_weight_dichotomy", ["hilbert_weight_theta_1"]),
    10: ("jump_criterion", ["jump_divergence"]),
}


def _orders(values):
    v = np.asarray(values, dtype=float)
    return np.log2(v[:-1] / v[1:])


# ---------------------------------------------------------------------------
# semigroup


def growth_corpus(grid: TorusGrid, size: int = 50, seed: int = 0) -> list[Field]:
    """Half jittered Gaussians, half rough random-phase data."""
    half = size // 2
    smooth = generate_corpus("gaussian", grid, count=half, seed=seed, jitter=0.8, width=2.0)
    rough = generate_corpus("rough_spectral", grid, count=size - half, seed=seed + 1, s=-1.0)
    return smooth + rough


def growth_experiment(grid: TorusGrid | None = None, size: int = 50, seed: int = 0,
                      s_values=(-1.0, 0.0, 1.0), times=(0.1, 0.5, 1.0),
                      mus=(0.5, 1.0), tol: float = 1e-10) -> EstimateReport:
    grid = TorusGrid(64.0, 1024) if grid is None else grid
    corpus = growth_corpus(grid, size, seed)
    rows = []
    for mu in mus:
        p = SymbolParams(mu)
        for s in s_values:
            for i, phi in enumerate(corpus):
                base = sobolev_norm(phi, s)
                for t in times:
                    ratio = sobolev_norm(semigroup_apply(phi, t, p), s) / (math.exp(mu * t) * base)
                    rows.append({"mu": mu, "s": s, "index": i, "t": t, "ratio": ratio})
    return _finish(EstimateReport(
        name="growth_bound",
        inputs={"corpus_size": size, "seed": seed, "s": list(s_values), "t": list(times),
                "mu": list(mus), "L": grid.half_length, "n": grid.n},
        measurements=rows, target={"max_ratio": 1 + tol}))


def _rescore_growth(rows, target):
    worst = max(r["ratio"] for r in rows)
    return worst <= target["max_ratio"], {"max_ratio": worst}


def smoothing_experiment(lams=(1.0, 2.0, 3.0), mu: float = 1.0, s: float = 0.0,
                         times=None, slope_rtol: float = 0.05,
                         lambda0_rtol: float = 1e-8) -> EstimateReport:
    """Operator-norm slopes for ``lams`` and the exact ``lambda = 0`` profile."""
    p = SymbolParams(mu)
    times = np.logspace(-4, 0, 41) if times is None else np.asarray(times)
    rows = []
    for lam in lams:
        probe = smoothing_probe(s, lam, times, p, slope_tol=slope_rtol)
        rows += [{"lam": lam, "t": float(t), "measured": float(m), "expected": float("nan")}
                 for t, m in zip(probe.times, probe.norms)]
    for t in times:
        _, value = multiplier_sup(0.0, mu * t)
        rows.append({"lam": 0.0, "t": float(t), "measured": value,
                     "expected": math.exp(MAX_GROWTH_RATE * mu * t)})
    return _finish(EstimateReport(
        name="smoothing", inputs={"lambda": list(lams), "mu": mu, "s": s},
        measurements=rows, target={"slope_rtol": slope_rtol, "lambda0_rtol": lambda0_rtol}))


def _rescore_smoothing(rows, target):
    measured = {}
    ok = True
    for lam in sorted({r["lam"] for r in rows}):
        sel = [r for r in rows if r["lam"] == lam]
        if lam == 0:
            err = max(abs(r["measured"] / r["expected"] - 1) for r in sel)
            measured["lambda0_max_rel_error"] = err
            ok &= err <= target["lambda0_rtol"]
            continue
        t = np.array([r["t"] for r in sel])
        m = np.array([r["measured"] for r in sel])
        first = t <= t.min() * 10 * (1 + 1e-9)
        slope = fit_loglog_slope(t[first], m[first])
        measured[f"slope_lambda_{lam:g}"] = slope
        ok &= abs(slope + lam / 3) <= target["slope_rtol"] * lam / 3
    return bool(ok), measured


def multiplier_experiment(cases=((0.0, 1.0), (1.0, 1.0), (2.0, 0.5), (1.0, 10.0), (3.0, 0.01)),
                          points: int = 2_000_001, rtol: float = 1e-6) -> EstimateReport:
    """Polished ``sup xi^lam e^{a(xi - xi^3)}`` against a dense brute-force grid."""
    rows = []
    for lam, a in cases:
        star, value = multiplier_sup(lam, a)
        cap = max(4.0, 2 * lam / a)
        xi = np.linspace(cap / points, cap, points)
        brute = float(np.max(xi ** lam * np.exp(a * (xi - xi ** 3))))
        rows.append({"lam": lam, "a": a, "argmax": star, "value": value, "brute": brute})
    return _finish(EstimateReport(name="multiplier_sup", inputs={"points": points},
                                  measurements=rows, target={"rtol": rtol}))


def _rescore_multiplier(rows, target):
    err = max(abs(r["value"] / r["brute"] - 1) for r in rows)
    above = all(r["value"] >= r["brute"] * (1 - 1e-14) for r in rows)
    return bool(err <= target["rtol"] and above), {"max_rel_gap": err}


# ---------------------------------------------------------------------------
# solver


def smooth_corpus(grid: TorusGrid, size: int = 10, seed: int = 0,
                  max_h1: float = 0.5) -> list[Field]:
    """Gaussians and odd Gaussians scaled to ``||phi||_1`` in ``[0.2, 1] max_h1``."""
    rng = np.random.default_rng(seed)
    half = size // 2
    data = (generate_corpus("gaussian", grid, count=half, seed=seed, jitter=0.5)
            + generate_corpus("gaussian_odd", grid, count=size - half, seed=seed + 1, jitter=0.5))
    return [f * (max_h1 * rng.uniform(0.2, 1.0) / sobolev_norm(f, 1)) for f in data]


def picard_etd_experiment(grid: TorusGrid | None = None, size: int = 10, seed: int = 0,
                          T: float = 0.5, mu: float = 1.0, m_time_nodes: int = 200,
                          dt: float = 0.0025, tol: float = 1e-6) -> EstimateReport:
    grid = TorusGrid(64.0, 1024) if grid is None else grid
    p = SymbolParams(mu)
    rows = []
    for i, phi in enumerate(smooth_corpus(grid, size, seed)):
        traj = picard_solve(phi, PicardConfig(s=1.0, T=T, m_time_nodes=m_time_nodes), p)
        half = picard_solve(phi, PicardConfig(s=1.0, T=T / 2, m_time_nodes=m_time_nodes // 2), p)
        ref = etd_reference_evolve(phi, T, dt, p)
        drift = max(float(np.max(np.abs(tr.mean_series() - phi.mean.real)))
                    for tr in (traj, ref))
        rows.append({
            "index": i, "h1_norm": sobolev_norm(phi, 1), "l2_norm": l2_norm(phi),
            "discrepancy": l2_norm(traj.final - ref.final),
            "ratio_T": traj.info["ratios"][0], "ratio_half_T": half.info["ratios"][0],
            "residual": traj.info["residual"], "mean_drift": drift,
        })
    return _finish(EstimateReport(
        name="picard_etd",
        inputs={"size": size, "seed": seed, "T": T, "mu": mu, "m_time_nodes": m_time_nodes,
                "dt": dt, "L": grid.half_length, "n": grid.n},
        measurements=rows, target={"discrepancy_max": tol}))


def _rescore_picard(rows, target):
    worst = max(r["discrepancy"] / max(1.0, r["l2_norm"]) for r in rows)
    contract = all(r["ratio_half_T"] < r["ratio_T"] < 1 for r in rows)
    return bool(worst <= target["discrepancy_max"] and contract), {
        "max_discrepancy": worst, "max_ratio_T": max(r["ratio_T"] for r in rows)}


def energy_experiment(grid: TorusGrid | None = None, amplitude: float = 0.1,
                      T_total: float = 5.0, mu: float = 1.0,
                      dts=(0.0025, 0.00125, 0.000625), bound_tol: float = 1e-8,
                      order_tol: float = 0.2) -> EstimateReport:
    """Continuation of ``amplitude e^{-x^2}`` with the energy monitor at several steps."""
    grid = TorusGrid(64.0, 1024) if grid is None else grid
    p = SymbolParams(mu)
    phi = Field.from_function(lambda x: amplitude * np.exp(-x * x), grid)
    rows = []
    for dt in dts:
        traj = continue_globally(phi, T_total, PicardConfig(s=0.0, T=dt, m_time_nodes=1), p, dt=dt)
        rep = energy_monitor(traj, p, tol=bound_tol)
        rows.append({"dt": dt, "max_ratio": rep.max_ratio, "identity_residual": rep.identity_residual,
                     "restarts": len(traj.info["restarts"]),
                     "mean_drift": float(np.max(np.abs(traj.mean_series() - phi.mean.real)))})
    return _finish(EstimateReport(
        name="energy", inputs={"amplitude": amplitude, "T_total": T_total, "mu": mu,
                               "dt": list(dts)},
        measurements=rows, target={"max_ratio": 1 + bound_tol, "order": 2.0,
                                   "order_tol": order_tol}))


def _rescore_order(rows, target, key):
    orders = _orders([r[key] for r in rows])
    ok = bool(np.all(orders > 0) and abs(orders[-1] - target["order"]) <= target["order_tol"])
    return ok, [float(o) for o in orders]


def _rescore_energy(rows, target):
    worst = max(r["max_ratio"] for r in rows)
    ok, orders = _rescore_order(rows, target, "identity_residual")
    return bool(ok and worst <= target["max_ratio"]), {"max_ratio": worst, "orders": orders}


def existence_experiment(seeds=(0, 1, 2, 3), amplitudes=(32.0, 64.0, 128.0, 256.0, 512.0),
                         grid: TorusGrid | None = None, s: float = 1.0, mu: float = 1.0,
                         threshold: float = 0.5, rtol: float = 0.2) -> EstimateReport:
    """Empirical contraction horizon against ``||phi||_1`` for rough ``H^1`` data.

    The horizon is averaged geometrically over random-phase realisations
    before fitting.
    """
    grid = TorusGrid(32.0, 2048) if grid is None else grid
    p = SymbolParams(mu)
    rows = []
    for seed in seeds:
        base = generate_corpus("rough_spectral", grid, seed=seed, s=s)[0]
        for A in amplitudes:
            T = empirical_horizon(base * A, s, p, threshold=threshold, iterations=20)
            rows.append({"seed": seed, "norm": A, "horizon": T})
    return _finish(EstimateReport(
        name="existence_scaling",
        inputs={"seeds": list(seeds), "s": s, "mu": mu, "threshold": threshold,
                "L": grid.half_length, "n": grid.n},
        measurements=rows, target={"slope": -1.5, "rtol": rtol}))


def _rescore_existence(rows, target):
    norms = sorted({r["norm"] for r in rows})
    mean_log = [np.mean([math.log(r["horizon"]) for r in rows if r["norm"] == A]) for A in norms]
    slope = fit_loglog_slope(norms, np.exp(mean_log))
    ok = abs(slope - target["slope"]) <= target["rtol"] * abs(target["slope"])
    return bool(ok), {"slope": slope}


def mean_moment_experiment(grid: TorusGrid | None = None, amplitude: float = 0.1,
                           T: float = 1.0, mu: float = 1.0,
                           dts=(0.0025, 0.00125, 0.000625), mean_tol: float = 1e-10,
                           order_tol: float = 0.2) -> EstimateReport:
    """Mean conservation for all solvers; first-moment identity for ``x e^{-x^2}``."""
    grid = TorusGrid(64.0, 1024) if grid is None else grid
    p = SymbolParams(mu)
    rows = []
    data = {"gaussian": Field.from_function(lambda x: amplitude * np.exp(-x * x), grid),
            "odd": Field.from_function(lambda x: amplitude * x * np.exp(-x * x), grid)}
    for name, phi in data.items():
        runs = {"picard": picard_solve(phi, PicardConfig(s=0.0, T=0.5, m_time_nodes=100), p),
                "ifrk4": etd_reference_evolve(phi, T, 0.01, p),
                "continuation": continue_globally(phi, T, PicardConfig(s=0.0, T=0.01,
                                                                       m_time_nodes=1), p)}
        for solver, traj in runs.items():
            drift = float(np.max(np.abs(traj.mean_series() - phi.mean.real)))
            rows.append({"kind": "mean", "datum": name, "solver": solver, "dt": float("nan"),
                         "value": drift, "raw": float("nan")})
    phi = data["odd"]
    for dt in dts:
        traj = continue_globally(phi, T, PicardConfig(s=0.0, T=dt, m_time_nodes=1), p, dt=dt)
        mom = moment_monitor(traj, p)
        rows.append({"kind": "moment", "datum": "odd", "solver": "continuation", "dt": dt,
                     "value": mom.max_residual, "raw": mom.max_raw_residual})
    return _finish(EstimateReport(
        name="mean_moment", inputs={"amplitude": amplitude, "T": T, "mu": mu, "dt": list(dts),
                                    "L": grid.half_length},
        measurements=rows, target={"mean_drift_max": mean_tol, "order": 2.0,
                                   "order_tol": order_tol},
        notes=["moment residual includes the exact sawtooth boundary flux of the torus; "
               "the uncorrected residual is in column raw and decays like 1/L"]))


def _rescore_mean_moment(rows, target):
    drift = max(r["value"] for r in rows if r["kind"] == "mean")
    ok, orders = _rescore_order([r for r in rows if r["kind"] == "moment"], target, "value")
    return bool(ok and drift <= target["mean_drift_max"]), {"max_mean_drift": drift,
                                                            "moment_orders": orders}


# ---------------------------------------------------------------------------
# inflation


def inflation_experiment(s: float, Ns=(16, 32, 64, 128, 256, 512, 1024), gamma: float = 1.0,
                         mu: float = 1.0) -> EstimateReport:
    import warnings

    from .illposed import InflationSamplingWarning

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InflationSamplingWarning)
        rep = inflation_sweep(Ns, s, gamma=gamma, mu=mu)
    rep.name = f"inflation_s_{s:g}"
    rep.inputs["rescore_s"] = s
    return _finish(rep)


def _rescore_inflation(rows, target):
    N = [r["N"] for r in rows]
    slope = fit_loglog_slope(N, [r["sup_t_norm"] for r in rows])
    datum = [r["datum_norm"] for r in rows]
    spread = (max(datum) - min(datum)) / max(datum)
    if "slope_min" in target:
        slope_ok = slope >= target["slope_min"]
    else:
        slope_ok = slope <= target["slope_max"]
    return bool(slope_ok and spread < target["datum_spread_max"]), {
        "slope": slope, "datum_spread": spread, "slope_ok": bool(slope_ok),
        "datum_ok": bool(spread < target["datum_spread_max"])}


def cross_check_experiment(N: float = 32.0, rtol: float = 0.05) -> EstimateReport:
    """Closed-form spectrum against the on-grid quadratic Duhamel term."""
    cfg = InflationConfig(N=N, s=-2.0)
    grid = TorusGrid(64 * math.pi, 8192)
    rows = []
    for t in (N ** -3, 4 * N ** -3):
        r = solver_cross_check(cfg, grid, t)
        rows.append({"t": t, "ratio_re": r["ratio"].real, "ratio_im": r["ratio"].imag,
                     "expected": DUHAMEL_FACTOR, "spread": r["spread"]})
    return _finish(EstimateReport(
        name="inflation_cross_check", inputs={"N": N, "L": grid.half_length, "n": grid.n},
        measurements=rows, target={"rtol": rtol},
        notes=["the closed form is taken with unit constant; the exact Duhamel factor is "
               "-1/(4 pi), so the ratio is reported, not asserted to be 1"]))


def _rescore_cross_check(rows, target):
    err = max(abs(complex(r["ratio_re"], r["ratio_im"]) / r["expected"] - 1) for r in rows)
    return bool(err <= target["rtol"]), {"max_rel_error": err}


# ---------------------------------------------------------------------------
# weighted


def persistence_experiment(grid: TorusGrid | None = None, size: int = 3, seed: int = 0,
                           r_values=(1.0, 2.4), T: float = 1.0, mu: float = 1.0,
                           dt: float = 0.01, drift_tol: float = 0.1,
                           kappa_max: float = 10.0) -> EstimateReport:
    grid = TorusGrid(64.0, 1024) if grid is None else grid
    p = SymbolParams(mu)
    rows = []
    for g in (grid, grid.refined(2)):
        corpus = generate_corpus("gaussian_odd", g, count=size, seed=seed, amplitude=0.1,
                                 jitter=0.5)
        for i, phi in enumerate(corpus):
            for r in r_values:
                run = persistence_run(phi, max(r, 1.0), r, T, p, dt=dt, kappa_bound=kappa_max)
                rows.append({"datum": i, "r": r, "n": g.n, "kappa": run.kappa,
                             "final_tail": run.final_tail_fraction})
    return _finish(EstimateReport(
        name="persistence", inputs={"size": size, "seed": seed, "r": list(r_values), "T": T,
                                    "mu": mu, "L": grid.half_length},
        measurements=rows, target={"drift_max": drift_tol, "kappa_max": kappa_max}))


def _rescore_persistence(rows, target):
    ns = sorted({r["n"] for r in rows})
    worst_drift = 0.0
    ok = True
    for key in {(r["datum"], r["r"]) for r in rows}:
        k = {r["n"]: r["kappa"] for r in rows if (r["datum"], r["r"]) == key}
        coarse, fine = k[ns[0]], k[ns[-1]]
        ok &= math.isfinite(fine) and fine <= target["kappa_max"]
        worst_drift = max(worst_drift, abs(fine - coarse) / fine)
    return bool(ok and worst_drift < target["drift_max"]), {
        "max_drift": worst_drift, "max_kappa": max(r["kappa"] for r in rows)}


def hilbert_experiment(theta: float = 1.0) -> EstimateReport:
    return _finish(hilbert_dichotomy(theta))


def _rescore_hilbert(rows, target):
    slopes = {}
    for datum in ("mean_zero", "unit_mean"):
        sel = [r for r in rows if r["datum"] == datum]
        slopes[datum] = fit_loglog_slope([r["L"] for r in sel], [r["ratio"] for r in sel])
    ok = (slopes["mean_zero"] <= target["mean_zero_exponent_max"]
          and slopes["unit_mean"] >= target["unit_mean_exponent_min"])
    return bool(ok), {"mean_zero_exponent": slopes["mean_zero"],
                      "unit_mean_exponent": slopes["unit_mean"]}


def jump_experiment(height: float = 1.0, widths=(0.5, 0.25, 0.125, 0.0625)) -> EstimateReport:
    return _finish(jump_divergence_probe(height, widths))


def _rescore_jump(rows, target):
    masses = [r["local_mass"] for r in rows]
    inc = np.diff(masses)
    if max(masses) <= 1e-30:
        return True, {"increments": inc.tolist(), "log_growth_exponent": 0.0}
    ok = np.all(inc > 0) and inc.min() >= target["increment_floor"] * inc.max()
    growth = (fit_loglog_slope(np.log([1 / r["width"] for r in rows]), masses)
              if min(masses) > 0 else 0.0)
    return bool(ok), {"increments": inc.tolist(), "log_growth_exponent": growth}


def commutator_experiment(seed: int = 0, count: int = 4) -> EstimateReport:
    rng = np.random.default_rng(seed)

    def mixture():
        c, w, a = rng.uniform(-3, 3, 3), rng.uniform(0.5, 2, 3), rng.uniform(-1, 1, 3)
        return lambda x: sum(ai * np.exp(-((x - ci) / wi) ** 2) for ai, ci, wi in zip(a, c, w))

    def packet(k):
        return lambda x: np.exp(-(x / 2) ** 2) * np.cos(k * x)

    phis = [mixture() for _ in range(count)]
    fs = [mixture() for _ in range(count)] + [packet(k) for k in (2.0, 8.0)]
    return _finish(commutator_check(phis, fs, TorusGrid(32.0, 1024)))


def _rescore_commutator(rows, target):
    coarse, fine = rows[0]["max_ratio"], rows[-1]["max_ratio"]
    drift = abs(fine - coarse) / fine
    return bool(drift < target["drift_max"]), {"drift": drift, "max_ratio": fine}


# ---------------------------------------------------------------------------
# registry

RESCORERS = {
    "growth_bound": _rescore_growth,
    "smoothing": _rescore_smoothing,
    "multiplier_sup": _rescore_multiplier,
    "picard_etd": _rescore_picard,
    "energy": _rescore_energy,
    "existence_scaling": _rescore_existence,
    "mean_moment": _rescore_mean_moment,
    "inflation": _rescore_inflation,
    "inflation_cross_check": _rescore_cross_check,
    "persistence": _rescore_persistence,
    "hilbert_weight": _rescore_hilbert,
    "jump_divergence": _rescore_jump,
    "commutator": _rescore_commutator,
}


def rescorer_for(name: str):
    if name in RESCORERS:
        return RESCORERS[name]
    for prefix, key in (("inflation_s_", "inflation"), ("hilbert_weight_", "hilbert_weight")):
        if name.startswith(prefix):
            return RESCORERS[key]
    raise KeyError(f"no rescorer for experiment {name!r}")


def rescore(name: str, rows, target):
    """Verdict and derived measurements from measurement rows and targets."""
    return rescorer_for(name)(rows, target)


def _finish(rep: EstimateReport) -> EstimateReport:
    """Set verdict and measurements through the rescorer, so both agree by construction."""
    passed, measured = rescore(rep.name, rep.measurements, rep.target)
    rep.measured = {**rep.measured, **measured}
    rep.passed = passed
    return rep


SUITES = {
    "semigroup": ("growth_bound", "smoothing", "multiplier_sup"),
    "solver": ("picard_etd", "energy", "existence_scaling", "mean_moment"),
    "inflation": ("inflation_s_-2", "inflation_s_-1.75", "inflation_s_-1",
                  "inflation_cross_check"),
    "weighted": ("persistence", "hilbert_weight_theta_1", "jump_divergence", "commutator"),
}
SUITES["all"] = tuple(name for key in ("semigroup", "solver", "inflation", "weighted")
                      for name in SUITES[key])
