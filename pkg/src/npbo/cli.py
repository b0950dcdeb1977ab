"""Command-line experiment runner.

    npbo run --suite semigroup --out results/
    npbo corpus --kind rough_spectral --param s=-1 --count 4 --out corpus/
    npbo rescore results/
    npbo plotdata results/

Configuration is an INI file; every value can be left at its default.  The
output directory may also come from ``NPBO_OUT``.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path


from . import __version__
from . import experiments as E
from .corpus import KINDS, generate_corpus
from .errors import ConfigurationError, NpboError
from .report import EstimateReport, read_csv, rows_to_csv
from .spectral import TorusGrid, l2_norm, write_field_binary, write_field_csv

log = logging.getLogger("npbo")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


@dataclass
class ExperimentConfig:
    suite: str = "all"
    seed: int = 0
    out: str = "npbo-results"
    jobs: int = 1
    half_length: float = 64.0
    n: int = 1024
    mu: float = 1.0
    growth_corpus_size: int = 50
    growth_s: tuple = (-1.0, 0.0, 1.0)
    growth_times: tuple = (0.1, 0.5, 1.0)
    growth_mu: tuple = (0.5, 1.0)
    smoothing_lambdas: tuple = (1.0, 2.0, 3.0)
    solver_T: float = 0.5
    solver_m_time_nodes: int = 200
    solver_corpus_size: int = 10
    energy_total_time: float = 5.0
    inflation_gamma: float = 1.0
    inflation_N: tuple = (16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0)
    inflation_s: tuple = (-2.0, -1.75, -1.0)
    weighted_r: tuple = (1.0, 2.4)
    weighted_T: float = 1.0

    # (section, key, attribute, parser)
    _FIELDS = [
        ("run", "suite", "suite", str), ("run", "seed", "seed", int),
        ("run", "out", "out", str), ("run", "jobs", "jobs", int),
        ("grid", "half_length", "half_length", float), ("grid", "n", "n", int),
        ("physics", "mu", "mu", float),
        ("semigroup", "corpus_size", "growth_corpus_size", int),
        ("semigroup", "s_values", "growth_s", _floats),
        ("semigroup", "times", "growth_times", _floats),
        ("semigroup", "mu_values", "growth_mu", _floats),
        ("semigroup", "lambdas", "smoothing_lambdas", _floats),
        ("solver", "T", "solver_T", float),
        ("solver", "m_time_nodes", "solver_m_time_nodes", int),
        ("solver", "corpus_size", "solver_corpus_size", int),
        ("solver", "total_time", "energy_total_time", float),
        ("inflation", "gamma", "inflation_gamma", float),
        ("inflation", "N_values", "inflation_N", _floats),
        ("inflation", "s_values", "inflation_s", _floats),
        ("weighted", "r_values", "weighted_r", _floats),
        ("weighted", "T", "weighted_T", float),
    ]

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        parser.optionxform = str
        if not parser.read(path):
            raise ConfigurationError(f"cannot read config file {path}")
        cfg = cls()
        known = {(sec, key) for sec, key, _, _ in cls._FIELDS}
        for sec in parser.sections():
            for key in parser[sec]:
                if (sec, key) not in known:
                    raise ConfigurationError(f"{sec}.{key}: unknown setting")
        for sec, key, attr, conv in cls._FIELDS:
            if parser.has_option(sec, key):
                raw = parser.get(sec, key)
                try:
                    setattr(cfg, attr, conv(raw))
                except ValueError as err:
                    raise ConfigurationError(f"{sec}.{key}: cannot parse {raw!r} ({err})") from err
        return cfg

    def validate(self) -> None:
        """Check every field against the preconditions of the module that uses it."""
        def bad(name, msg):
            raise ConfigurationError(f"{name}: {msg}")

        if self.suite not in E.SUITES:
            bad("run.suite", f"unknown suite {self.suite!r}; valid suites: {sorted(E.SUITES)}")
        if self.seed < 0:
            bad("run.seed", "must be nonnegative")
        if self.jobs < 1:
            bad("run.jobs", "must be at least 1")
        try:
            TorusGrid(self.half_length, self.n)
        except NpboError as err:
            bad("grid", str(err))
        if not self.mu > 0:
            bad("physics.mu", "must be positive")
        if self.growth_corpus_size < 2:
            bad("semigroup.corpus_size", "need at least two fields")
        if any(not m > 0 for m in self.growth_mu):
            bad("semigroup.mu_values", "must be positive")
        if any(t < 0 for t in self.growth_times):
            bad("semigroup.times", "the semigroup runs forward only")
        if any(l <= 0 for l in self.smoothing_lambdas):
            bad("semigroup.lambdas", "smoothing gains must be positive")
        if not 0 < self.solver_T <= 1:
            bad("solver.T", "must lie in (0, 1]")
        if self.solver_m_time_nodes < 2 or self.solver_m_time_nodes % 2:
            bad("solver.m_time_nodes", "must be an even number >= 2")
        if self.solver_corpus_size < 1:
            bad("solver.corpus_size", "must be positive")
        if not self.energy_total_time > 0:
            bad("solver.total_time", "must be positive")
        if not self.inflation_gamma > 0:
            bad("inflation.gamma", "must be positive")
        if len(self.inflation_N) < 5:
            bad("inflation.N_values", "need at least five values")
        if min(self.inflation_N) < 8 * self.inflation_gamma:
            bad("inflation.N_values", "need N >= 8 gamma")
        if any(not r > 0 for r in self.weighted_r):
            bad("weighted.r_values", "weights must be positive")
        if not self.weighted_T > 0:
            bad("weighted.T", "must be positive")

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


def experiment_names(cfg: ExperimentConfig) -> list[str]:
    names = list(E.SUITES[cfg.suite])
    if cfg.suite in ("inflation", "all"):
        inflation = [f"inflation_s_{s:g}" for s in cfg.inflation_s]
        names = [n for n in names if not n.startswith("inflation_s_")]
        at = 0 if cfg.suite == "inflation" else names.index("inflation_cross_check")
        names[at:at] = inflation
    return names


def build_experiment(name: str, cfg: ExperimentConfig) -> EstimateReport:
    grid = TorusGrid(cfg.half_length, cfg.n)
    if name == "growth_bound":
        return E.growth_experiment(grid, cfg.growth_corpus_size, cfg.seed, cfg.growth_s,
                                   cfg.growth_times, cfg.growth_mu)
    if name == "smoothing":
        return E.smoothing_experiment(cfg.smoothing_lambdas, cfg.mu)
    if name == "multiplier_sup":
        return E.multiplier_experiment()
    if name == "picard_etd":
        return E.picard_etd_experiment(grid, cfg.solver_corpus_size, cfg.seed, cfg.solver_T,
                                       cfg.mu, cfg.solver_m_time_nodes)
    if name == "energy":
        return E.energy_experiment(grid, T_total=cfg.energy_total_time, mu=cfg.mu)
    if name == "existence_scaling":
        return E.existence_experiment(seeds=tuple(cfg.seed + k for k in range(4)), mu=cfg.mu)
    if name == "mean_moment":
        return E.mean_moment_experiment(grid, mu=cfg.mu)
    if name.startswith("inflation_s_"):
        return E.inflation_experiment(float(name[len("inflation_s_"):]), cfg.inflation_N,
                                      cfg.inflation_gamma, cfg.mu)
    if name == "inflation_cross_check":
        return E.cross_check_experiment()
    if name == "persistence":
        return E.persistence_experiment(grid, seed=cfg.seed, r_values=cfg.weighted_r,
                                        T=cfg.weighted_T, mu=cfg.mu)
    if name.startswith("hilbert_weight_theta_"):
        return E.hilbert_experiment(float(name[len("hilbert_weight_theta_"):]))
    if name == "jump_divergence":
        return E.jump_experiment()
    if name == "commutator":
        return E.commutator_experiment(cfg.seed)
    raise ConfigurationError(f"unknown experiment {name!r}")


def _run_one(args):
    name, cfg = args
    start = time.perf_counter()
    try:
        rep = build_experiment(name, cfg)
        return name, rep.to_dict(), None, time.perf_counter() - start
    except (NpboError, ArithmeticError, FloatingPointError) as err:
        return name, None, f"{type(err).__name__}: {err}", time.perf_counter() - start


def summarize(results: dict) -> dict:
    """Summary from ``{name: {"passed": bool, ...}}``, criteria included when fully run."""
    criteria = {}
    for number, (label, names) in E.CRITERIA.items():
        if all(n in results for n in names):
            criteria[str(number)] = {"name": label, "experiments": names,
                                     "passed": all(results[n]["passed"] for n in names)}
    return {"experiments": results, "criteria": criteria,
            "all_passed": all(r["passed"] for r in results.values())}


def run_suite(cfg: ExperimentConfig) -> int:
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    names = experiment_names(cfg)
    jobs = [(n, cfg) for n in names]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(_run_one, jobs))
    else:
        outcomes = [_run_one(j) for j in jobs]
    results = {}
    timings = {}
    for name, data, error, elapsed in outcomes:
        timings[name] = elapsed
        if error is not None:
            log.error("%s failed: %s", name, error)
            (out / f"{name}.error.json").write_text(
                json.dumps({"name": name, "error": error}, indent=2, sort_keys=True) + "\n")
            results[name] = {"passed": False, "error": error}
            continue
        rep = EstimateReport.from_dict(data)
        rep.write(out)
        results[name] = {"passed": rep.passed, "measured": data["measured"]}
        log.info("%-28s %s", name, "pass" if rep.passed else "FAIL")
    summary = summarize(results)
    summary.update({"suite": cfg.suite, "seed": cfg.seed, "config": cfg.to_dict()})
    (out / "metadata.json").write_text(json.dumps(
        {"version": __version__, "finished": time.strftime("%Y-%m-%dT%H:%M:%S"),
         "seconds": timings}, indent=2, sort_keys=True) + "\n")
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True,
                                                 default=float) + "\n")
    return EXIT_OK if summary["all_passed"] else EXIT_FAIL


def rescore_directory(directory) -> dict:
    """Recompute every verdict from the CSV rows and JSON targets in ``directory``."""
    directory = Path(directory)
    results = {}
    for jpath in sorted(directory.glob("*.json")):
        if jpath.name in ("summary.json", "metadata.json", "manifest.json") or \
                jpath.name.endswith(".error.json"):
            continue
        data = json.loads(jpath.read_text())
        rows = read_csv(directory / f"{data['name']}.csv")
        passed, measured = E.rescore(data["name"], rows, data["target"])
        results[data["name"]] = {"passed": passed, "measured": measured}
    for epath in sorted(directory.glob("*.error.json")):
        data = json.loads(epath.read_text())
        results[data["name"]] = {"passed": False, "error": data["error"]}
    return summarize(results)


SERIES_KEYS = ("lam", "mu", "s", "datum", "r", "kind", "seed", "n")


def plotdata(directory) -> list[Path]:
    """Split every measurement CSV into one file per series under ``plot/``."""
    directory = Path(directory)
    target = directory / "plot"
    target.mkdir(exist_ok=True)
    written = []
    for cpath in sorted(directory.glob("*.csv")):
        rows = read_csv(cpath)
        if not rows:
            continue
        keys = [k for k in SERIES_KEYS if k in rows[0]]
        groups = {}
        for row in rows:
            groups.setdefault(tuple(row[k] for k in keys), []).append(row)
        for label, members in groups.items():
            suffix = "".join(f"__{k}_{_label(v)}" for k, v in zip(keys, label))
            path = target / f"{cpath.stem}{suffix}.csv"
            path.write_text(rows_to_csv(members))
            written.append(path)
    return written


def _label(v) -> str:
    if isinstance(v, float) and v.is_integer():
        v = int(v)
    return str(v).replace("/", "_")


def write_corpus(kind: str, grid: TorusGrid, count: int, seed: int, params: dict, out) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    fields = generate_corpus(kind, grid, count=count, seed=seed, **params)
    entries = []
    for i, f in enumerate(fields):
        stem = f"{kind}_{i:03d}"
        write_field_binary(f, out / f"{stem}.bin")
        write_field_csv(f, out / f"{stem}.csv")
        entries.append({"binary": f"{stem}.bin", "csv": f"{stem}.csv", "l2_norm": l2_norm(f),
                        "mean": float(f.mean.real)})
    manifest = {"kind": kind, "seed": seed, "count": count, "params": params,
                "half_length": grid.half_length, "n": grid.n, "fields": entries}
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _parse_params(items) -> dict:
    params = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigurationError(f"--param expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        try:
            params[key] = float(value)
        except ValueError:
            params[key] = value
    return params


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="npbo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment suite")
    run.add_argument("--config")
    run.add_argument("--out")
    run.add_argument("--seed", type=int)
    run.add_argument("--suite")
    run.add_argument("--jobs", type=int)

    corpus = sub.add_parser("corpus", help="write a corpus of initial data")
    corpus.add_argument("--kind", required=True)
    corpus.add_argument("--count", type=int, default=1)
    corpus.add_argument("--param", action="append", metavar="KEY=VALUE")
    corpus.add_argument("--config")
    corpus.add_argument("--out")
    corpus.add_argument("--seed", type=int)

    rescore = sub.add_parser("rescore", help="recompute verdicts from artifacts")
    rescore.add_argument("directory")

    plot = sub.add_parser("plotdata", help="split artifacts into plot-ready series")
    plot.add_argument("directory")
    return parser


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    if os.environ.get("NPBO_OUT"):
        cfg.out = os.environ["NPBO_OUT"]
    for attr in ("out", "seed", "suite", "jobs"):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(cfg, attr, value)
    return cfg


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            cfg = _load_config(args)
            code = run_suite(cfg)
            summary = json.loads((Path(cfg.out) / "summary.json").read_text())
            for number, crit in sorted(summary["criteria"].items(), key=lambda kv: int(kv[0])):
                print(f"criterion {number:>2} {crit['name']:<26} "
                      f"{'PASS' if crit['passed'] else 'FAIL'}")
            for name, res in summary["experiments"].items():
                print(f"{name:<28} {'PASS' if res['passed'] else 'FAIL'}")
            return code
        if args.command == "corpus":
            if args.kind not in KINDS:
                raise ConfigurationError(f"unknown corpus kind {args.kind!r}; choose from {KINDS}")
            cfg = _load_config(args)
            grid = TorusGrid(cfg.half_length, cfg.n)
            path = write_corpus(args.kind, grid, args.count, cfg.seed,
                                _parse_params(args.param), cfg.out)
            print(path)
            return EXIT_OK
        if args.command == "rescore":
            summary = rescore_directory(args.directory)
            print(json.dumps(summary, indent=2, sort_keys=True, default=float))
            return EXIT_OK if summary["all_passed"] else EXIT_FAIL
        if args.command == "plotdata":
            for path in plotdata(args.directory):
                print(path)
            return EXIT_OK
    except ConfigurationError as err:
        print(f"npbo: configuration error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except NpboError as err:
        print(f"npbo: {err}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
