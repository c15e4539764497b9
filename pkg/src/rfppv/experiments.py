"""Sweeps, ratio curves and fluctuation studies.

Replication ``r`` of every experiment draws its randomness from
``(master_seed, r)``, so different grid points share data draws (common
random numbers) and results do not depend on execution order or on the
number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import stats

from . import asymptotics as asy
from .activation import ActivationCoefficients, gaussian_coefficients
from .errors import BinMismatch, DegenerateDenominator, PhaseViolation, RFError
from .simulator import ReplicationSample, SimulationConfig, ridge_path, run_replication

__all__ = [
    "SweepSpec",
    "ComparisonRecord",
    "run_sweep",
    "RatioSettings",
    "RatioPoint",
    "ratio_curve",
    "FluctuationReport",
    "collect",
    "fluctuation_report",
    "fluctuation_study",
    "fluctuation_pair",
    "common_bins",
    "overlap",
    "variance_ordering",
    "jarque_bera",
    "jb_rejection_rate",
    "JB_CUTOFF_99",
    "SAME_ORDER_BOUNDS",
]

# 99th percentile of chi^2 with 2 degrees of freedom: -2 ln(0.01)
JB_CUTOFF_99 = -2.0 * math.log(0.01)
SAME_ORDER_BOUNDS = (0.1, 10.0)
N_BINS = 60


def _pmap(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _model_params(config: SimulationConfig) -> asy.ModelParams:
    return asy.ModelParams(f1_sq=config.f1_sq, tau_sq=config.tau_sq, f0_sq=config.f0_sq)


def _mean_se(x: np.ndarray):
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), math.nan
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))


# --------------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SweepSpec:
    base: SimulationConfig
    axis: str
    grid: tuple
    replications: int
    master_seed: int = 0

    def __post_init__(self):
        if self.axis not in ("n_features", "n", "lam"):
            raise ValueError(f"cannot sweep {self.axis!r}")
        g = np.asarray(self.grid, dtype=float)
        if g.size == 0 or np.any(np.diff(g) <= 0):
            raise ValueError("grid must be non-empty and strictly increasing")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        object.__setattr__(self, "grid", tuple(self.grid))

    def config_at(self, value) -> SimulationConfig:
        if self.axis == "lam":
            return self.base.with_(lam=float(value), seed=self.master_seed)
        return self.base.with_(**{self.axis: int(value)}, seed=self.master_seed)


@dataclass(frozen=True)
class ComparisonRecord:
    value: float
    psi1: float
    psi2: float
    lam: float
    ppv_limit: float
    train_error_limit: float
    risk_limit: float | None
    risk: tuple
    ppv: tuple
    train_error: tuple
    samples: tuple = field(repr=False)
    errors: tuple = ()

    @property
    def boundary(self) -> bool:
        return math.isclose(self.psi1, self.psi2)

    @property
    def relative_gap(self) -> float:
        return (self.ppv[0] - self.ppv_limit) / self.ppv_limit

    def values(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples])


def _safe_replication(config: SimulationConfig):
    try:
        return run_replication(config)
    except RFError as exc:
        return exc


def run_sweep(
    spec: SweepSpec,
    coeffs: ActivationCoefficients | None = None,
    threads: int = 1,
) -> list[ComparisonRecord]:
    """Replicate the simulation at every grid point and attach the limits.

    Failed replications are kept in ``ComparisonRecord.errors``.
    """
    if coeffs is None:
        coeffs = gaussian_coefficients(spec.base.activation)
    params = _model_params(spec.base)
    configs = [
        spec.config_at(v).with_(replication=r)
        for v in spec.grid
        for r in range(spec.replications)
    ]
    outcomes = _pmap(_safe_replication, configs, threads)
    records = []
    for i, value in enumerate(spec.grid):
        chunk = outcomes[i * spec.replications:(i + 1) * spec.replications]
        ok = tuple(s for s in chunk if isinstance(s, ReplicationSample))
        errs = tuple(f"replication {j}: {type(e).__name__}: {e}"
                     for j, e in enumerate(chunk) if not isinstance(e, ReplicationSample))
        cfg = spec.config_at(value)
        ratios = asy.ShapeRatios(cfg.psi1, cfg.psi2)
        lim = asy.limits(params, ratios, coeffs, cfg.lam)
        risk_limit = _risk_limit(params, coeffs, cfg.psi1, cfg.psi2, cfg.lam)
        records.append(ComparisonRecord(
            value=float(value),
            psi1=cfg.psi1,
            psi2=cfg.psi2,
            lam=cfg.lam,
            ppv_limit=lim.ppv,
            train_error_limit=lim.train_error,
            risk_limit=risk_limit,
            risk=_mean_se(np.array([s.risk for s in ok])),
            ppv=_mean_se(np.array([s.ppv for s in ok])),
            train_error=_mean_se(np.array([s.train_error for s in ok])),
            samples=ok,
            errors=errs,
        ))
    return records


def _risk_limit(params, coeffs, psi1, psi2, lam, proxy=100.0):
    """Closed-form risk where one aspect ratio is large enough to use a limit formula."""
    lb = lam / coeffs.mu_star_sq
    try:
        if psi1 >= proxy:
            return asy.risk_wide(params.rho, coeffs.zeta, psi2, lb, params)
        if psi2 >= proxy:
            return asy.risk_large_sample(coeffs.zeta, psi1, lb, params)
    except RFError:
        return None
    return None


# --------------------------------------------------------------- ratio curves


@dataclass(frozen=True)
class RatioSettings:
    """How finite-ratio points get their risk.

    Points whose swept ratio is at least ``proxy`` use the closed-form limit
    risk; below it the risk is the replicate mean of the simulated test
    error at dimension ``d``, and ``lambda`` is tuned on ``lambda_grid``.
    """

    d: int = 60
    replications: int = 10
    lambda_grid: tuple = tuple(np.logspace(-4, 1, 41))
    n_test: int = 4000
    master_seed: int = 0
    proxy: float = 100.0


@dataclass(frozen=True)
class RatioPoint:
    value: float
    psi1: float
    psi2: float
    lam: float
    lambda_source: str
    risk: float
    risk_source: str
    ppv_limit: float
    ratio: float


def _phase_lambda(params, coeffs, psi2) -> tuple[float, str]:
    try:
        lb = asy.lambda_opt(params.rho, coeffs.zeta, psi2)
    except PhaseViolation:
        return asy.LAMBDA_ZERO, "zero"
    return lb * coeffs.mu_star_sq, "lambda_opt"


def _empirical_tuned(psi1, psi2, params, activation, settings: RatioSettings, threads):
    if params.fstar_sq > 0:
        raise ValueError("nonlinear targets are not simulated; need F*^2 = 0 below the proxy")
    d = settings.d
    cfg = SimulationConfig(
        d=d, n=max(1, round(psi2 * d)), n_features=max(1, round(psi1 * d)),
        lam=1.0, activation=activation, f1_sq=params.f1_sq, f0_sq=params.f0_sq,
        tau_sq=params.tau_sq, n_test=settings.n_test,
        seed=settings.master_seed,
    )
    lams = np.asarray(settings.lambda_grid, dtype=float)
    paths = _pmap(lambda r: ridge_path(cfg.with_(replication=r), lams),
                  range(settings.replications), threads)
    mean_risk = np.mean([p.risk for p in paths], axis=0)
    k = int(np.argmin(mean_risk))
    return float(lams[k]), float(mean_risk[k])


def ratio_curve(
    coeffs: ActivationCoefficients,
    params: asy.ModelParams,
    axis: str,
    grid: Sequence[float],
    fixed_other: float = 3.0,
    activation=None,
    settings: RatioSettings = RatioSettings(),
    threads: int = 1,
) -> list[RatioPoint]:
    """Ratio of the risk-optimal test risk to ``S^2 - tau^2`` along one aspect ratio.

    For ``axis="psi1"`` points with ``psi1 >= settings.proxy`` use the wide
    limit: ``lambda = lambda_opt`` when ``rho < rho_star`` and ``1e-8``
    otherwise, with risk from :func:`risk_wide`. ``axis="psi2"`` is the
    mirror image with the large-sample limit, whose optimum is always
    ``lambda -> 0``. Smaller ratios use simulated risk with ``lambda``
    tuned to minimise it. ``S^2`` always comes from the fixed point at the
    actual ``(psi1, psi2, lambda)``.

    Raises
    ------
    DegenerateDenominator
        If ``F1^2 = 0`` (then ``S^2 - tau^2`` carries no signal).
    """
    if params.f1_sq <= 0:
        raise DegenerateDenominator("F1^2 = 0: ratio is undefined")
    if axis not in ("psi1", "psi2"):
        raise ValueError("axis must be 'psi1' or 'psi2'")
    if activation is None:
        from .activation import relu as activation
    out = []
    for value in grid:
        psi1, psi2 = (value, fixed_other) if axis == "psi1" else (fixed_other, value)
        if value >= settings.proxy:
            if axis == "psi1":
                lam, lsrc = _phase_lambda(params, coeffs, psi2)
                risk = asy.risk_wide(params.rho, coeffs.zeta, psi2, lam / coeffs.mu_star_sq, params)
                rsrc = "risk_wide"
            else:
                lam, lsrc = asy.LAMBDA_ZERO, "zero"
                risk = asy.risk_large_sample(coeffs.zeta, psi1, lam / coeffs.mu_star_sq, params)
                rsrc = "risk_large_sample"
        else:
            lam, risk = _empirical_tuned(psi1, psi2, params, activation, settings, threads)
            lsrc, rsrc = "tuned", "empirical"
        s2 = asy.ppv_limit(params, asy.ShapeRatios(psi1, psi2), coeffs, lam)
        den = s2 - params.tau_sq
        if den <= 0:
            raise DegenerateDenominator(f"S^2 - tau^2 = {den!r}")
        out.append(RatioPoint(float(value), psi1, psi2, lam, lsrc, risk, rsrc, s2, risk / den))
    return out


# ---------------------------------------------------------------- fluctuation


@dataclass(frozen=True)
class FluctuationReport:
    statistic: str
    d: int
    values: np.ndarray = field(repr=False)
    mean: float
    variance: float
    rescaled: np.ndarray = field(repr=False)
    skewness: float
    excess_kurtosis: float
    jb: float
    bin_edges: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return int(self.values.size)

    @property
    def rescaled_variance(self) -> float:
        return float(np.var(self.rescaled, ddof=1))

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.counts.sum()


def jarque_bera(x) -> tuple[float, float, float]:
    """``(JB, skewness, excess kurtosis)`` with ``JB = m (skew^2/6 + kurt^2/24)``."""
    x = np.asarray(x, dtype=float)
    skew = float(stats.skew(x))
    kurt = float(stats.kurtosis(x))
    return x.size * (skew * skew / 6.0 + kurt * kurt / 24.0), skew, kurt


def jb_rejection_rate(trials: int, m: int, seed: int = 0, cutoff: float = JB_CUTOFF_99) -> float:
    """Fraction of ``trials`` Gaussian samples of size ``m`` with ``JB > cutoff``."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    rejected = 0
    block = max(1, 2_000_000 // m)
    done = 0
    while done < trials:
        k = min(block, trials - done)
        x = rng.standard_normal((k, m))
        skew = stats.skew(x, axis=1)
        kurt = stats.kurtosis(x, axis=1)
        jb = m * (skew ** 2 / 6.0 + kurt ** 2 / 24.0)
        rejected += int(np.sum(jb > cutoff))
        done += k
    return rejected / trials


def common_bins(*samples, bins: int = N_BINS, q=(0.001, 0.999)) -> np.ndarray:
    """Equal-width edges over the pooled ``q`` quantile range."""
    pooled = np.concatenate([np.asarray(s, dtype=float) for s in samples])
    lo, hi = np.quantile(pooled, q)
    if not hi > lo:
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, bins + 1)


def fluctuation_report(values, statistic: str, d: int, edges=None) -> FluctuationReport:
    """Moments, JB statistic and histogram of one sample.

    Values outside ``edges`` are counted in the end bins so counts always
    sum to the sample size.
    """
    x = np.asarray(values, dtype=float)
    if edges is None:
        edges = common_bins(x)
    edges = np.asarray(edges, dtype=float)
    counts, _ = np.histogram(np.clip(x, edges[0], edges[-1]), edges)
    mean = float(np.mean(x))
    jb, skew, kurt = jarque_bera(x)
    return FluctuationReport(
        statistic=statistic, d=d, values=x, mean=mean,
        variance=float(np.var(x, ddof=1)) if x.size > 1 else 0.0,
        rescaled=d * (x - mean), skewness=skew, excess_kurtosis=kurt, jb=jb,
        bin_edges=edges, counts=counts,
    )


def collect(config: SimulationConfig, replications: int, master_seed: int,
            threads: int = 1) -> list[ReplicationSample]:
    cfgs = [config.with_(seed=master_seed, replication=r) for r in range(replications)]
    return _pmap(run_replication, cfgs, threads)


def _statistic(samples, statistic: str, tau_sq: float) -> np.ndarray:
    if statistic == "risk":
        return np.array([s.risk for s in samples])
    if statistic == "ppv_minus_tau_sq":
        return np.array([s.ppv for s in samples]) - tau_sq
    raise ValueError(f"unknown statistic {statistic!r}")


def fluctuation_study(config: SimulationConfig, statistic: str, replications: int,
                      master_seed: int, edges=None, threads: int = 1) -> FluctuationReport:
    """Distribution of ``risk`` or ``ppv - tau^2`` over independent replications."""
    if replications < 500:
        raise ValueError("fluctuation studies need >= 500 replications")
    samples = collect(config, replications, master_seed, threads)
    return fluctuation_report(_statistic(samples, statistic, config.tau_sq), statistic,
                              config.d, edges)


def fluctuation_pair(config: SimulationConfig, replications: int, master_seed: int,
                     threads: int = 1, bins: int = N_BINS):
    """Risk and ``S^2 - tau^2`` reports from the same replications, on common bins."""
    if replications < 500:
        raise ValueError("fluctuation studies need >= 500 replications")
    samples = collect(config, replications, master_seed, threads)
    r = _statistic(samples, "risk", config.tau_sq)
    s = _statistic(samples, "ppv_minus_tau_sq", config.tau_sq)
    edges = common_bins(r, s, bins=bins)
    return (fluctuation_report(r, "risk", config.d, edges),
            fluctuation_report(s, "ppv_minus_tau_sq", config.d, edges))


def overlap(report_a: FluctuationReport, report_b: FluctuationReport) -> float:
    """Histogram intersection ``sum_i min(p_i, q_i)`` of two reports."""
    if report_a.bin_edges.shape != report_b.bin_edges.shape or not np.array_equal(
        report_a.bin_edges, report_b.bin_edges
    ):
        raise BinMismatch("reports use different bin grids")
    return float(np.minimum(report_a.probabilities, report_b.probabilities).sum())


@dataclass(frozen=True)
class VarianceRow:
    psi1: float
    psi2: float
    var_risk: float
    var_ppv: float
    ratio: float
    ppv_smaller: bool
    same_order: bool
    overlap: float


def variance_ordering(configs: Sequence[SimulationConfig], replications: int,
                      master_seed: int, threads: int = 1) -> list[VarianceRow]:
    """Rescaled variances of ``d R`` and ``d S^2`` per configuration."""
    if replications < 1000:
        raise ValueError("variance ordering needs >= 1000 replications")
    rows = []
    for cfg in configs:
        a, b = fluctuation_pair(cfg, replications, master_seed, threads)
        vr, vs = a.rescaled_variance, b.rescaled_variance
        ratio = vs / vr
        rows.append(VarianceRow(cfg.psi1, cfg.psi2, vr, vs, ratio, vs < vr,
                                SAME_ORDER_BOUNDS[0] <= ratio <= SAME_ORDER_BOUNDS[1],
                                overlap(a, b)))
    return rows
