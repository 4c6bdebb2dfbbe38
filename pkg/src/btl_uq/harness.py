"""Monte Carlo experiments: normality (QQ), l2 risk, interval coverage, expansion remainders.

Every replication is a pure function of (config, grid point, replication
index); results are merged in replication order, so tables do not depend on
the number of workers.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from . import __version__
from .core import BTLError, write_dataset
from .expansion import mle_main_term, remainder_report, spectral_main_term
from .inference import (
    build_intervals, l2_constant_mle, l2_constant_spectral, norm_ppf,
    rank_ci, rho_mle, rho_spectral, true_rank,
)
from .mle import fit_mle
from .sim import SimConfig, noiseless_dataset, resolve_p, sample_merits, simulate, substream_seed
from .spectral import fit_spectral

log = logging.getLogger(__name__)

KINDS = ("qq", "risk", "coverage", "expansion")
ESTIMATORS = ("mle", "spectral")
COLUMNS = ("n", "p", "L", "rep", "estimator", "metric", "value")
DEFAULT_PROBS = (0.01, 0.025, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.975, 0.99)


class ConfigError(BTLError, ValueError):
    pass


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


@dataclass
class ExperimentConfig:
    kind: str
    n: list = field(default_factory=lambda: [500])
    p: list = field(default_factory=lambda: ["polylog:3"])
    L: list = field(default_factory=lambda: [1])
    reps: int = 100
    kappa: float = 2.0
    alpha: float = 0.05
    c0: float = 0.1
    estimators: list = field(default_factory=lambda: list(ESTIMATORS))
    seed: int = 0
    target: int = 0
    resample_merits: bool = False
    noiseless: bool = False
    quantile_probs: list = field(default_factory=lambda: list(DEFAULT_PROBS))
    workers: int = 1
    keep_data: bool = False
    output_dir: str = "results"

    def __post_init__(self):
        self.n, self.p, self.L = _as_list(self.n), _as_list(self.p), _as_list(self.L)
        self.estimators = _as_list(self.estimators)
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if not (self.n and self.p and self.L):
            raise ConfigError("the n / p / L grid must be nonempty")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad or not self.estimators:
            raise ConfigError(f"estimators must be a nonempty subset of {ESTIMATORS}")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.c0 < 0:
            raise ConfigError("c0 must be nonnegative")
        for n in self.n:
            if int(n) < 2:
                raise ConfigError("every n must be at least 2")
            if not 0 <= self.target < int(n):
                raise ConfigError("target index out of range")
            for rule in self.p:
                try:
                    resolve_p(rule, int(n))
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
        if any(int(L) < 1 for L in self.L):
            raise ConfigError("every L must be at least 1")

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        d = dict(d)
        grid = d.pop("grid", None)
        if grid is not None:
            for key in ("n", "p", "L"):
                if key in grid:
                    d[key] = grid[key]
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "kind" not in d:
            raise ConfigError("config needs a 'kind'")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> ExperimentConfig:
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None

    def grid(self):
        for n, rule, L in itertools.product(self.n, self.p, self.L):
            yield int(n), rule, int(L)


@dataclass
class ExperimentTable:
    rows: list = field(default_factory=list)

    def add(self, n, p, L, rep, estimator, metric, value):
        self.rows.append((n, p, L, rep, estimator, metric, float(value)))

    def extend(self, rows):
        self.rows.extend(rows)

    def select(self, **where) -> list:
        idx = {c: k for k, c in enumerate(COLUMNS)}
        return [r for r in self.rows if all(r[idx[k]] == v for k, v in where.items())]

    def values(self, **where) -> np.ndarray:
        return np.array([r[-1] for r in self.select(**where)], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(COLUMNS)
        for n, p, L, rep, est, metric, value in self.rows:
            writer.writerow([n, repr(float(p)), L, rep, est, metric, repr(float(value))])
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_bytes(self.to_csv().encode())


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    reps: ExperimentTable
    summary: ExperimentTable
    excluded: dict
    wall_time: float = 0.0

    def manifest(self) -> dict:
        return {
            "config": asdict(self.config),
            "excluded": self.excluded,
            "wall_time_seconds": self.wall_time,
            "library_version": __version__,
        }


def ks_distance(sample) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF and N(0, 1)."""
    x = np.sort(np.asarray(sample, dtype=float))
    m = x.size
    if m == 0:
        return math.nan
    cdf = ndtr(x)
    k = np.arange(1, m + 1)
    return float(max(np.max(k / m - cdf), np.max(cdf - (k - 1) / m)))


def empirical_quantiles(sample, probs) -> np.ndarray:
    # Hazen plotting positions: the k-th order statistic sits at (k - 1/2) / m.
    return np.quantile(np.asarray(sample, dtype=float), probs, method="hazen")


def qq_deviation(sample, probs) -> float:
    """Largest gap between empirical and standard normal quantiles on ``probs``."""
    q = empirical_quantiles(sample, probs)
    return float(np.max(np.abs(q - np.array([norm_ppf(pr) for pr in probs]))))


def _fit(name, data):
    rep = fit_mle(data) if name == "mle" else fit_spectral(data)
    if not rep.converged:
        raise BTLError(f"{name} did not converge: {rep.message}")
    return rep.theta_hat


def _rho(name, theta, data):
    return (rho_mle if name == "mle" else rho_spectral)(theta, data, use_sample_graph=True)


def _main_term(name, data, theta_star):
    return (mle_main_term if name == "mle" else spectral_main_term)(data, theta_star)


def _point_merits(cfg: ExperimentConfig, sim: SimConfig, n):
    # Keyed by n alone so grid points that differ only in p or L share a truth.
    return sample_merits(sim, substream_seed(cfg.seed, "merits", n))


def _replicate(args):
    """Rows for one replication at one grid point; pure in its arguments."""
    cfg, n, rule, L, rep = args
    p = resolve_p(rule, n)
    sim = SimConfig(n=n, p=p, L=L, kappa=cfg.kappa, seed=cfg.seed)
    keys = (n, str(rule), L, rep)
    fixed = None if cfg.resample_merits else _point_merits(cfg, sim, n)
    rows = []

    def add(est, metric, value):
        rows.append((n, p, L, rep, est, metric, float(value)))

    try:
        draw = simulate(sim, *keys, merits=fixed)
    except BTLError as exc:
        log.warning("n=%d p=%s L=%d rep=%d sampling failed: %s", n, rule, L, rep, exc)
        for est in cfg.estimators:
            add(est, "failed", 1.0)
        return rows
    theta_star = draw.theta_star
    data = draw.data
    if cfg.noiseless:
        data = noiseless_dataset((data.i, data.j), draw.theta_raw, n=n, p=p, L=L)

    if cfg.keep_data and cfg.output_dir:
        out = Path(cfg.output_dir) / "data"
        out.mkdir(parents=True, exist_ok=True)
        stem = f"n{n}_p{p:.6g}_L{L}_rep{rep}"
        write_dataset(data, out / f"{stem}.csv", sidecar={
            "n": n, "p": p, "L": L, "kappa": cfg.kappa, "seed": cfg.seed, "rep": rep,
            "theta_star": theta_star.tolist(),
        })

    t = cfg.target
    for est in cfg.estimators:
        try:
            theta = _fit(est, data)
            if cfg.kind == "qq":
                rho = _rho(est, theta, data).rho
                add(est, "std_error", rho[t] * (theta[t] - theta_star[t]))
            elif cfg.kind == "risk":
                add(est, "sq_l2_error", np.sum((theta - theta_star) ** 2))
                const = (l2_constant_mle if est == "mle" else l2_constant_spectral)(theta_star, p, L)
                add(est, "theory", const)
            elif cfg.kind == "coverage":
                ivs = build_intervals(theta, _rho(est, theta, data), target=t,
                                      alpha=cfg.alpha, c0=cfg.c0)
                ranks = rank_ci(ivs)
                lo, hi = ivs.target_interval
                r_true = true_rank(theta_star, t)
                add(est, "merit_covered", lo <= theta_star[t] <= hi)
                add(est, "rank_covered", r_true in ranks)
                add(est, "merit_ci_length", hi - lo)
                add(est, "rank_lo", ranks.interval[0])
                add(est, "rank_hi", ranks.interval[1])
                add(est, "true_rank", r_true)
            elif cfg.kind == "expansion":
                report = remainder_report(theta, theta_star, _main_term(est, data, theta_star), n, p, L)
                add(est, "scaled_sup", report.scaled_sup)
                add(est, "scaled_l2", report.scaled_l2)
        except (BTLError, np.linalg.LinAlgError) as exc:
            log.warning("n=%d p=%s L=%d rep=%d %s failed: %s", n, rule, L, rep, est, exc)
            add(est, "failed", 1.0)
    return rows


def _summarize(cfg: ExperimentConfig, table: ExperimentTable) -> tuple[ExperimentTable, dict]:
    summary = ExperimentTable()
    excluded = {}
    for n, rule, L in cfg.grid():
        p = resolve_p(rule, n)
        for est in cfg.estimators:
            failed = {r[3] for r in table.select(n=n, p=p, L=L, estimator=est, metric="failed")}
            excluded[f"n={n},p={rule},L={L},{est}"] = len(failed)

            def vals(metric):
                return table.values(n=n, p=p, L=L, estimator=est, metric=metric)

            def put(metric, value):
                summary.add(n, p, L, -1, est, metric, value)

            put("n_ok", cfg.reps - len(failed))
            put("n_excluded", len(failed))
            if cfg.kind == "qq":
                z = vals("std_error")
                if z.size:
                    put("ks_distance", ks_distance(z))
                    put("qq_max_deviation", qq_deviation(z, cfg.quantile_probs))
                    put("mean", z.mean())
                    put("std", z.std(ddof=1) if z.size > 1 else 0.0)
                    for pr, q in zip(cfg.quantile_probs, empirical_quantiles(z, cfg.quantile_probs)):
                        put(f"quantile@{pr:g}", q)
            elif cfg.kind == "risk":
                err, theory = vals("sq_l2_error"), vals("theory")
                if err.size:
                    put("mean_sq_l2_error", err.mean())
                    put("theory", theory.mean())
                    put("ratio", err.mean() / theory.mean())
                    put("se_mean_sq_l2_error", err.std(ddof=1) / math.sqrt(err.size) if err.size > 1 else 0.0)
            elif cfg.kind == "coverage":
                for m in ("merit_covered", "rank_covered", "merit_ci_length"):
                    v = vals(m)
                    if v.size:
                        put(f"mean_{m}", v.mean())
                lo, hi = vals("rank_lo"), vals("rank_hi")
                if lo.size:
                    put("mean_rank_ci_length", np.mean(hi - lo + 1))
            elif cfg.kind == "expansion":
                for m in ("scaled_sup", "scaled_l2"):
                    v = vals(m)
                    if v.size:
                        put(f"median_{m}", np.median(v))
    return summary, excluded


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    workers = cfg.workers if workers is None else workers
    start = time.perf_counter()
    jobs = [(cfg, n, rule, L, rep) for n, rule, L in cfg.grid() for rep in range(cfg.reps)]
    table = ExperimentTable()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rows in pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (8 * workers))):
                table.extend(rows)
    else:
        for job in jobs:
            table.extend(_replicate(job))
    summary, excluded = _summarize(cfg, table)
    return ExperimentResult(cfg, table, summary, excluded, time.perf_counter() - start)


def _check_kind(cfg, kind):
    if cfg.kind != kind:
        raise ConfigError(f"config kind is {cfg.kind!r}, expected {kind!r}")


def run_qq(cfg: ExperimentConfig, **kw) -> ExperimentResult:
    _check_kind(cfg, "qq")
    return run_experiment(cfg, **kw)


def run_risk(cfg: ExperimentConfig, **kw) -> ExperimentResult:
    _check_kind(cfg, "risk")
    return run_experiment(cfg, **kw)


def run_coverage(cfg: ExperimentConfig, **kw) -> ExperimentResult:
    _check_kind(cfg, "coverage")
    return run_experiment(cfg, **kw)


def run_expansion(cfg: ExperimentConfig, **kw) -> ExperimentResult:
    _check_kind(cfg, "expansion")
    return run_experiment(cfg, **kw)


def write_outputs(result: ExperimentResult, output_dir=None) -> Path:
    out = Path(output_dir or result.config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    kind = result.config.kind
    result.reps.write(out / f"{kind}.csv")
    result.summary.write(out / f"{kind}_summary.csv")
    (out / f"{kind}_manifest.json").write_text(json.dumps(result.manifest(), indent=2) + "\n")
    return out
