"""Experiment driver: steady states by any method, current scaling, kappa, correlations.

Every run writes into its own directory named after a hash of its
configuration, so concurrent runs never share a file and re-running a
configuration overwrites the same artifacts with identical tables.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import __version__
from . import dense_oracle as oracle
from . import exact
from .mpo import product_mpo
from .operators import FAMILIES, SpinChainModel
from .tebd import ConvergenceCriterion, NessReport, current_spread, evolve_to_ness, richardson_ness

log = logging.getLogger(__name__)

METHODS = ("tebd", "oracle", "exact")
INITIAL_STATES = ("identity", "linear")
OUT_ENV = "LINDBLAD_NESS_OUT"
DEFAULT_OUT = "lindblad_ness_runs"
# magnetization differences below this are treated as zero when forming kappa
KAPPA_TOL = 1e-14


class ConfigError(ValueError):
    pass


class UndefinedKappaError(ValueError):
    pass


class FitError(ValueError):
    pass


def default_out_root() -> str:
    return os.environ.get(OUT_ENV, DEFAULT_OUT)


@dataclass
class ExperimentConfig:
    method: str = "tebd"
    family: str = "heisenberg"
    n: int = 4
    n_list: Optional[list[int]] = None
    J: float = 1.0
    delta: float = 1.5
    mu: float = 0.02
    gamma: float = 0.0
    dt: float = 0.1
    D_max: int = 64
    eps_trunc: float = 1e-12
    eps_conv: float = 1e-6
    t_max: float = 5000.0
    conv_window: float = 10.0
    richardson: bool = False
    initial: str = "identity"
    convention: str = "literal"
    threads: int = 1
    seed: int = 0
    out: Optional[str] = None

    def __post_init__(self):
        if self.n_list is not None:
            self.n_list = sorted(int(x) for x in self.n_list)
        self.validate()

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.family not in FAMILIES:
            raise ConfigError(f"model must be one of {FAMILIES}, got {self.family!r}")
        if self.initial not in INITIAL_STATES:
            raise ConfigError(f"initial must be one of {INITIAL_STATES}, got {self.initial!r}")
        if self.convention not in exact.CONVENTIONS:
            raise ConfigError(f"convention must be one of {exact.CONVENTIONS}, got {self.convention!r}")
        sizes = self.sizes
        if min(sizes) < 1:
            raise ConfigError("chain length must be >= 1")
        if len(set(sizes)) != len(sizes):
            raise ConfigError(f"duplicate chain lengths in {sizes}")
        if self.method == "oracle" and max(sizes) > oracle.N_MAX:
            raise ConfigError(f"oracle method needs n <= {oracle.N_MAX}, got {max(sizes)}")
        if self.method == "exact":
            if self.family != "xx":
                raise ConfigError("exact method applies only to the xx model")
            if min(sizes) < 2:
                raise ConfigError("exact method needs n >= 2")
        if self.method == "tebd" and min(sizes) < 2:
            raise ConfigError("tebd method needs n >= 2")
        if abs(self.mu) > 1 or self.gamma < 0:
            raise ConfigError("need |mu| <= 1 and gamma >= 0")
        if self.dt <= 0 or self.D_max < 1 or self.eps_trunc < 0 or self.eps_conv <= 0 or self.t_max <= 0:
            raise ConfigError("numerical parameters must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    @property
    def sizes(self) -> list[int]:
        return list(self.n_list) if self.n_list else [int(self.n)]

    def model(self, n: Optional[int] = None) -> SpinChainModel:
        return SpinChainModel(
            n if n is not None else self.n, self.family, J=self.J, delta=self.delta, mu=self.mu, gamma=self.gamma
        )

    def criterion(self) -> ConvergenceCriterion:
        return ConvergenceCriterion(window=self.conv_window, eps_conv=self.eps_conv, t_max=self.t_max)

    def for_size(self, n: int) -> "ExperimentConfig":
        return dataclasses.replace(self, n=n, n_list=None)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def content_hash(self) -> str:
        # output location and worker count do not change the physics
        d = self.to_dict()
        d.pop("out")
        d.pop("threads")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def out_root(self) -> Path:
        return Path(self.out if self.out is not None else default_out_root())


# -- single steady state ------------------------------------------------------


def _closed_report(z: np.ndarray, j: np.ndarray) -> NessReport:
    return NessReport(
        magnetization=np.asarray(z, dtype=float),
        current=np.asarray(j, dtype=float),
        current_spread=current_spread(np.asarray(j, dtype=float)),
        time=0.0,
        steps=0,
        discarded_weight=0.0,
        max_bond=0,
        converged=True,
    )


def linear_profile_mpo(n: int, mu: float):
    """Product state with magnetization rising linearly from -mu to +mu."""
    z = np.linspace(-mu, mu, n)
    return product_mpo([[1.0, 0.0, 0.0, zj] for zj in z])


def compute_ness(config: ExperimentConfig, n: Optional[int] = None) -> NessReport:
    n = config.n if n is None else n
    if config.method == "exact":
        fo = exact.first_order(exact.ExactParams(n, config.mu, config.gamma), config.convention)
        return _closed_report(fo.a, np.full(n - 1, fo.current))
    model = config.model(n)
    if config.method == "oracle":
        state = oracle.steady_state(oracle.build_liouvillian(model))
        return _closed_report(oracle.magnetizations(state), oracle.currents(state))
    initial = linear_profile_mpo(n, config.mu) if config.initial == "linear" else None
    run = richardson_ness if config.richardson else evolve_to_ness
    report, _ = run(model, config.dt, config.D_max, config.eps_trunc, config.criterion(), initial)
    return report


@dataclass
class RunResult:
    config: ExperimentConfig
    report: NessReport
    directory: Path
    profile_path: Path
    summary_path: Path
    summary: dict

    @property
    def converged(self) -> bool:
        return self.report.converged


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_profile_csv(path: Path, report: NessReport):
    """Columns ``site, z, current_left_bond``; site 1 has no left bond."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["site", "z", "current_left_bond"])
        for i, z in enumerate(report.magnetization):
            w.writerow([i + 1, _fmt(z), _fmt(report.current[i - 1]) if i > 0 else ""])


def run_experiment(config: ExperimentConfig) -> RunResult:
    """Compute one steady state and write ``profile-<hash>.csv`` and ``summary-<hash>.json``.

    Unconverged runs still write their (partial) outputs, flagged in the summary.
    """
    if config.n_list:
        raise ConfigError("run_experiment takes a single n; use scaling_sweep for an n-list")
    t0 = time.perf_counter()
    report = compute_ness(config)
    wall = time.perf_counter() - t0
    h = config.content_hash()
    directory = config.out_root() / f"run-{h}"
    directory.mkdir(parents=True, exist_ok=True)
    profile_path = directory / f"profile-{h}.csv"
    write_profile_csv(profile_path, report)
    summary = {
        "tool": "lindblad-ness",
        "version": __version__,
        "config": config.to_dict(),
        "config_hash": h,
        "converged": report.converged,
        "partial": not report.converged,
        "report": report.to_dict(),
        "mean_current": report.mean_current,
        "wall_time_s": wall,
    }
    try:
        summary["kappa"] = dataclasses.asdict(extract_kappa(report, config.n))
    except UndefinedKappaError:
        summary["kappa"] = None
    summary_path = directory / f"summary-{h}.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return RunResult(config, report, directory, profile_path, summary_path, summary)


# -- transport coefficient ----------------------------------------------------


def bulk_current(report: NessReport) -> float:
    """Mean current over the bonds not touching a bath (all bonds if n < 4)."""
    j = report.current
    if j.size >= 3:
        j = j[1:-1]
    return float(np.mean(j)) if j.size else 0.0


@dataclass(frozen=True)
class KappaEstimate:
    """``endpoint`` is -<j> n / (z_n - z_1); ``bulk`` replaces the endpoint
    difference by a straight-line fit of z over the central half of the chain."""

    endpoint: float
    bulk: float
    current: float
    z_first: float
    z_last: float


def extract_kappa(report: NessReport, n: Optional[int] = None) -> KappaEstimate:
    """Effective transport coefficient with Fick's sign: positive when the
    current runs from the high- to the low-magnetization end.

    With <j_k> the flow from site k to k+1, a current running down the
    gradient is negative when z_n > z_1, hence the minus sign.
    """
    z = np.asarray(report.magnetization, dtype=float)
    n = z.size if n is None else n
    if n != z.size:
        raise ValueError(f"report has {z.size} sites, n={n}")
    dz = z[-1] - z[0]
    if not np.isfinite(dz) or abs(dz) <= KAPPA_TOL:
        raise UndefinedKappaError(f"z_n - z_1 = {dz:.3e}; kappa undefined")
    j = bulk_current(report)
    endpoint = -j * n / dz
    lo, hi = n // 4, n - n // 4
    if hi - lo < 2:
        lo, hi = 0, n
    slope = np.polyfit(np.arange(lo, hi), z[lo:hi], 1)[0]
    bulk = -j / slope if abs(slope) > KAPPA_TOL / n else float("nan")
    return KappaEstimate(float(endpoint), float(bulk), j, float(z[0]), float(z[-1]))


# -- scaling sweep ------------------------------------------------------------


@dataclass
class SweepRow:
    n: int
    current: float
    z_first: float
    z_last: float
    kappa: float
    kappa_bulk: float
    converged: bool
    time: float
    max_bond: int
    discarded_weight: float


@dataclass
class ScalingFit:
    alpha: float
    alpha_stderr: float
    intercept: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    fit: Optional[ScalingFit] = None
    fit_error: Optional[str] = None
    runs: list[RunResult] = field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def fit_exponent(ns: Sequence[int], currents: Sequence[float], mu: float) -> ScalingFit:
    """Least-squares fit of ``log j = -alpha log n + c``.

    ``j`` is the current measured along the drive, ``-sign(mu) <j>``, which
    is positive for ordinary (down-gradient) transport.
    """
    ns = np.asarray(ns, dtype=float)
    j = -np.sign(mu) * np.asarray(currents, dtype=float)
    if ns.size < 3:
        raise FitError(f"need at least 3 chain lengths, got {ns.size}")
    if mu == 0 or np.any(~np.isfinite(j)) or np.any(j <= 0):
        bad = [int(n) for n, x in zip(ns, j) if not (np.isfinite(x) and x > 0)] if mu != 0 else list(map(int, ns))
        raise FitError(f"non-positive current along the drive at n={bad}; cannot fit a power law")
    res = stats.linregress(np.log(ns), np.log(j))
    return ScalingFit(alpha=float(-res.slope), alpha_stderr=float(res.stderr), intercept=float(res.intercept))


def _row(n: int, report: NessReport) -> SweepRow:
    try:
        k = extract_kappa(report, n)
        kappa, kappa_bulk = k.endpoint, k.bulk
    except UndefinedKappaError:
        kappa = kappa_bulk = float("nan")
    return SweepRow(
        n=n,
        current=bulk_current(report),
        z_first=float(report.magnetization[0]),
        z_last=float(report.magnetization[-1]),
        kappa=kappa,
        kappa_bulk=kappa_bulk,
        converged=report.converged,
        time=report.time,
        max_bond=report.max_bond,
        discarded_weight=report.discarded_weight,
    )


def scaling_sweep(config: ExperimentConfig, write: bool = True) -> SweepResult:
    """Steady state for every n in ``config.n_list`` and the fitted current exponent.

    Points are independent and run on ``config.threads`` workers; rows are
    always ordered by n. A failed fit is recorded in ``fit_error`` rather
    than raised so the rows are still returned.
    """
    sizes = config.sizes
    if len(sizes) < 3:
        raise ConfigError(f"a sweep needs at least 3 chain lengths, got {sizes}")
    configs = [config.for_size(n) for n in sizes]
    if write:
        worker = run_experiment
    else:
        def worker(c):
            return compute_ness(c)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(worker, configs))
    else:
        results = [worker(c) for c in configs]
    runs = results if write else []
    reports = [r.report for r in results] if write else results
    rows = [_row(n, rep) for n, rep in zip(sizes, reports)]
    out = SweepResult(rows=rows, runs=runs)
    try:
        out.fit = fit_exponent(sizes, [r.current for r in rows], config.mu)
    except FitError as e:
        out.fit_error = str(e)
        log.error("%s", e)
    if write:
        write_sweep(config, out)
    return out


def write_sweep(config: ExperimentConfig, result: SweepResult) -> Path:
    h = config.content_hash()
    directory = config.out_root() / f"sweep-{h}"
    directory.mkdir(parents=True, exist_ok=True)
    names = [f.name for f in dataclasses.fields(SweepRow)]
    with open(directory / f"sweep-{h}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for r in result.rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in (getattr(r, k) for k in names)])
    summary = {
        "tool": "lindblad-ness",
        "version": __version__,
        "config": config.to_dict(),
        "config_hash": h,
        "converged": result.converged,
        "fit": dataclasses.asdict(result.fit) if result.fit else None,
        "fit_error": result.fit_error,
        "runs": [str(r.directory) for r in result.runs],
    }
    (directory / f"summary-{h}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return directory


# -- correlations -------------------------------------------------------------


@dataclass
class CorrelationReport:
    n: int
    mu: float
    C: np.ndarray  # symmetric, zero diagonal
    plateau: float
    statistic: float

    def table(self) -> list[tuple[int, int, float]]:
        j, k = np.triu_indices(self.n, 1)
        return [(int(a) + 1, int(b) + 1, float(self.C[a, b])) for a, b in zip(j, k)]


def plateau_magnitude(C: np.ndarray, min_distance: int = 2) -> float:
    j, k = np.triu_indices(C.shape[0], min_distance)
    return float(np.max(np.abs(C[j, k]))) if j.size else 0.0


def correlation_report(config: ExperimentConfig, n: Optional[int] = None) -> CorrelationReport:
    """Connected <Z_j Z_k> table, the largest |C| at distance >= 2, and n max|C| / mu^2."""
    n = config.n if n is None else n
    if config.method == "exact":
        if config.family != "xx":
            raise ConfigError("exact method applies only to the xx model")
        C = exact.connected_zz(exact.ExactParams(n, config.mu, config.gamma), config.convention).symmetric()
    elif config.method == "oracle":
        C = oracle.connected_zz(oracle.steady_state(oracle.build_liouvillian(config.model(n))))
    else:
        raise ConfigError("correlations need method oracle or exact")
    plateau = plateau_magnitude(C)
    statistic = n * plateau / config.mu**2 if config.mu != 0 else float("nan")
    return CorrelationReport(n, config.mu, C, plateau, statistic)


def write_correlations(config: ExperimentConfig, reports: Sequence[CorrelationReport]) -> Path:
    h = config.content_hash()
    directory = config.out_root() / f"corr-{h}"
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / f"correlations-{h}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "j", "k", "C"])
        for rep in reports:
            for j, k, c in rep.table():
                w.writerow([rep.n, j, k, _fmt(c)])
    summary = {
        "tool": "lindblad-ness",
        "version": __version__,
        "config": config.to_dict(),
        "config_hash": h,
        "plateau": {str(r.n): {"max_abs_C": r.plateau, "n_maxC_over_mu2": r.statistic} for r in reports},
    }
    (directory / f"summary-{h}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return directory


# -- spectral gap -------------------------------------------------------------


@dataclass
class GapReport:
    n: int
    gap: float
    null_dim: int
    convergence_time: float  # log(1/eps_conv) / gap


def gap_report(config: ExperimentConfig, n: Optional[int] = None) -> GapReport:
    n = config.n if n is None else n
    if n > oracle.N_MAX:
        raise ConfigError(f"gap needs the dense generator, n <= {oracle.N_MAX}")
    gap, null_dim = oracle.spectral_gap(oracle.build_liouvillian(config.model(n)))
    t = float(np.log(1 / config.eps_conv) / gap) if gap > 0 else float("inf")
    return GapReport(n, float(gap), int(null_dim), t)
