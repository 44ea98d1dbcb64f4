"""
Monte Carlo Service
Runs replications of the simulated ADL-MIDAS ME model over a scenario grid
and aggregates median-based estimator quality metrics
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, field_validator

from midasme.core.config import settings
from midasme.core.exceptions import EmptySampleError, MidasError
from midasme.services.design_service import MeVariances, align_mixed
from midasme.services.dgp_service import DgpParams, simulate_sample
from midasme.services.estimation_service import (
    CORRECTED,
    NAIVE,
    FitResult,
    SearchConfig,
    fit_corrected,
    fit_naive,
)

logger = logging.getLogger(__name__)

DEFAULT_RHO = (0.3, 0.2)
FAILURE_LIMIT = 0.5
ESTIMATORS = (NAIVE, CORRECTED)


class Scenario(BaseModel):
    """One simulation grid cell"""
    model_config = ConfigDict(frozen=True)

    T: int = Field(ge=1)
    jmax: int = Field(ge=1)
    theta2: float = Field(gt=1.0)
    sigma_u2: float = Field(ge=0.0)
    sigma_v2: float = Field(ge=0.0)
    p: int = Field(default=2, ge=0)
    m: int = Field(default=3, ge=1)
    reps: int = Field(default=1000, ge=1)
    master_seed: int = Field(default=0, ge=0)
    a: float = 0.0
    rho: Optional[List[float]] = None
    b: float = 1.0
    ar_coef: float = 0.8
    sigma_eps2: float = Field(default=1.0, gt=0.0)
    search: SearchConfig = Field(default_factory=SearchConfig)
    include_clamped: bool = True

    @field_validator("ar_coef")
    @classmethod
    def _stationary(cls, v: float) -> float:
        if abs(v) >= 1.0:
            raise ValueError(f"|ar_coef| must be below 1, got {v}")
        return v

    @property
    def me(self) -> MeVariances:
        return MeVariances(sigma_u2=self.sigma_u2, sigma_v2=self.sigma_v2)

    @property
    def ar_coefficients(self) -> List[float]:
        """rho as given, else the default (0.3, 0.2) cut or zero-padded to length p"""
        if self.rho is not None:
            return list(self.rho)
        padded = list(DEFAULT_RHO) + [0.0] * max(0, self.p - len(DEFAULT_RHO))
        return padded[: self.p]

    @property
    def scenario_id(self) -> str:
        return (f"T={self.T},jmax={self.jmax},theta={self.theta2:g},"
                f"su2={self.sigma_u2:g},sv2={self.sigma_v2:g}")

    def dgp_params(self) -> DgpParams:
        return DgpParams(
            a=self.a,
            rho=self.ar_coefficients,
            b=self.b,
            theta2=self.theta2,
            jmax=self.jmax,
            m=self.m,
            T=self.T,
            ar_coef=self.ar_coef,
            sigma_eps2=self.sigma_eps2,
            me=self.me,
        )


class MetricsRow(BaseModel):
    """Aggregated metrics of one estimator on one scenario"""
    T: int
    jmax: int
    theta: float
    sigma_u2: float
    sigma_v2: float
    estimator: str
    nmedb: float
    trmedsem: float
    medb_theta: float
    medb_sigma2: float
    clamp_rate: float = Field(ge=0.0, le=1.0)
    failure_rate: float = Field(ge=0.0, le=1.0)
    reps: int
    seed: int
    failed: bool = False
    standard_errors: Dict[str, float] = Field(default_factory=dict)

    @property
    def scenario_id(self) -> str:
        return (f"T={self.T},jmax={self.jmax},theta={self.theta:g},"
                f"su2={self.sigma_u2:g},sv2={self.sigma_v2:g}")


@dataclass(frozen=True)
class ReplicationResult:
    """Fits of both estimators on one simulated dataset"""
    rep_index: int
    naive: Optional[FitResult] = None
    corrected: Optional[FitResult] = None
    naive_error: Optional[str] = None
    corrected_error: Optional[str] = None

    def fit(self, estimator: str) -> Optional[FitResult]:
        return self.naive if estimator == NAIVE else self.corrected


# ---------------------------------------------------------------------------
# Median metrics
# ---------------------------------------------------------------------------

def _as_matrix(estimates, truth) -> np.ndarray:
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        raise EmptySampleError("no estimates to summarize")
    truth = np.atleast_1d(np.asarray(truth, dtype=float))
    est = est.reshape(-1, truth.shape[0])
    return est - truth[None, :]


def nmedb(estimates: Sequence, truth) -> float:
    """Norm of the coordinatewise median bias"""
    dev = _as_matrix(estimates, truth)
    return float(np.linalg.norm(np.median(dev, axis=0)))


def trmed_sem(estimates: Sequence, truth) -> float:
    """Trace of the entrywise median of (est - truth)(est - truth)'"""
    dev = _as_matrix(estimates, truth)
    return float(np.sum(np.median(dev ** 2, axis=0)))


def medb(estimates: Sequence, truth: float) -> float:
    """|median(estimates) - truth|"""
    est = np.asarray(estimates, dtype=float).ravel()
    if est.size == 0:
        raise EmptySampleError("no estimates to summarize")
    return float(abs(np.median(est) - truth))


def bootstrap_metric_se(
    estimates: Sequence,
    metric: Callable[[np.ndarray], float],
    resamples: Optional[int] = None,
    seed: int = 0,
) -> float:
    """
    Monte Carlo standard error of a metric by resampling replications

    Args:
        estimates: One entry (scalar or vector) per replication
        metric: Function of a resampled estimate array
        resamples: Bootstrap draws, settings.BOOTSTRAP_RESAMPLES when None
        seed: Seed of the resampling stream

    Returns:
        Standard deviation of the metric across resamples
    """
    est = np.asarray(estimates, dtype=float)
    if est.shape[0] == 0:
        raise EmptySampleError("no estimates to resample")
    draws = settings.BOOTSTRAP_RESAMPLES if resamples is None else resamples
    rng = np.random.default_rng(seed)
    values = np.array([metric(est[rng.integers(0, est.shape[0], est.shape[0])]) for _ in range(draws)])
    return float(np.std(values, ddof=1)) if draws > 1 else 0.0


# ---------------------------------------------------------------------------
# Replications
# ---------------------------------------------------------------------------

def run_replication(sc: Scenario, rep_index: int) -> ReplicationResult:
    """
    Simulate one dataset and fit both estimators

    Fit failures are recorded on the result, never raised.
    """
    params = sc.dgp_params()
    try:
        sample = simulate_sample(params, sc.master_seed, rep_index)
        ds = align_mixed(sample.observed, sc.p, sc.jmax)
    except MidasError as e:
        logger.debug(f"[{sc.scenario_id}] replication {rep_index}: data error {e}")
        return ReplicationResult(rep_index=rep_index, naive_error=str(e), corrected_error=str(e))

    fits: Dict[str, Optional[FitResult]] = {}
    errors: Dict[str, Optional[str]] = {}
    for estimator, run in ((NAIVE, lambda: fit_naive(ds, sc.search)),
                           (CORRECTED, lambda: fit_corrected(ds, sc.me, sc.search))):
        try:
            fits[estimator] = run()
            errors[estimator] = None
        except MidasError as e:
            logger.debug(f"[{sc.scenario_id}] replication {rep_index}: {estimator} fit failed: {e}")
            fits[estimator] = None
            errors[estimator] = str(e)

    return ReplicationResult(
        rep_index=rep_index,
        naive=fits[NAIVE],
        corrected=fits[CORRECTED],
        naive_error=errors[NAIVE],
        corrected_error=errors[CORRECTED],
    )


def run_replications(sc: Scenario, threads: Optional[int] = None) -> List[ReplicationResult]:
    """All replications of one scenario, ordered by replication index"""
    n_jobs = threads or settings.threads
    if n_jobs == 1:
        return [run_replication(sc, i) for i in range(sc.reps)]
    return Parallel(n_jobs=n_jobs)(delayed(run_replication)(sc, i) for i in range(sc.reps))


def aggregate(sc: Scenario, results: Sequence[ReplicationResult], estimator: str,
              bootstrap: int = 0) -> MetricsRow:
    """
    Metrics of one estimator over a scenario's replications

    Errored fits are excluded from the medians; clamped fits are included
    unless the scenario sets include_clamped=False.
    """
    fits = [r.fit(estimator) for r in results]
    ok = [f for f in fits if f is not None]
    summarized = ok if sc.include_clamped else [f for f in ok if not f.clamped_variance]
    n = len(results)
    failure_rate = (n - len(ok)) / n if n else 1.0
    clamp_rate = sum(f.clamped_variance for f in ok) / n if n else 0.0
    failed = failure_rate >= FAILURE_LIMIT or not summarized

    metrics = dict(nmedb=math.nan, trmedsem=math.nan, medb_theta=math.nan, medb_sigma2=math.nan)
    standard_errors: Dict[str, float] = {}
    if not failed:
        params = sc.dgp_params()
        betas = np.array([f.beta_hat for f in summarized])
        thetas = np.array([f.theta_hat for f in summarized])
        sigmas = np.array([f.sigma_eps2_hat for f in summarized])
        truth = params.true_beta
        metrics = dict(
            nmedb=nmedb(betas, truth),
            trmedsem=trmed_sem(betas, truth),
            medb_theta=medb(thetas, params.theta2),
            medb_sigma2=medb(sigmas, params.sigma_eps2),
        )
        if bootstrap > 0:
            standard_errors = {
                "nmedb": bootstrap_metric_se(betas, lambda e: nmedb(e, truth), bootstrap, sc.master_seed),
                "trmedsem": bootstrap_metric_se(betas, lambda e: trmed_sem(e, truth), bootstrap, sc.master_seed),
                "medb_theta": bootstrap_metric_se(thetas, lambda e: medb(e, params.theta2), bootstrap, sc.master_seed),
                "medb_sigma2": bootstrap_metric_se(sigmas, lambda e: medb(e, params.sigma_eps2), bootstrap, sc.master_seed),
            }
    elif failure_rate >= FAILURE_LIMIT:
        logger.warning(f"[{sc.scenario_id}] {estimator}: {failure_rate:.0%} of replications failed")
    else:
        logger.warning(
            f"[{sc.scenario_id}] {estimator}: no fit left to summarize, every usable fit had a "
            f"floored variance ({clamp_rate:.0%} clamped) and include_clamped is off"
        )

    return MetricsRow(
        T=sc.T,
        jmax=sc.jmax,
        theta=sc.theta2,
        sigma_u2=sc.sigma_u2,
        sigma_v2=sc.sigma_v2,
        estimator=estimator,
        clamp_rate=clamp_rate,
        failure_rate=failure_rate,
        reps=sc.reps,
        seed=sc.master_seed,
        failed=failed,
        standard_errors=standard_errors,
        **metrics,
    )


def run_grid(grid: Sequence[Scenario], threads: Optional[int] = None,
             bootstrap: int = 0) -> List[MetricsRow]:
    """
    Run every scenario and return naive then corrected rows per scenario

    Args:
        grid: Scenarios in output order
        threads: Worker count, settings.threads when None
        bootstrap: Resamples for Monte Carlo standard errors, 0 disables

    Returns:
        List of MetricsRow, two per scenario
    """
    rows: List[MetricsRow] = []
    for i, sc in enumerate(grid, start=1):
        logger.info(f"Scenario {i}/{len(grid)} [{sc.scenario_id}] reps={sc.reps}")
        results = run_replications(sc, threads)
        for estimator in ESTIMATORS:
            row = aggregate(sc, results, estimator, bootstrap)
            rows.append(row)
            logger.info(
                f"  {estimator}: NMedB={row.nmedb:.4g} trMedSEM={row.trmedsem:.4g} "
                f"medB(theta)={row.medb_theta:.4g} medB(s2)={row.medb_sigma2:.4g} "
                f"failures={row.failure_rate:.1%} clamped={row.clamp_rate:.1%}"
            )
    return rows
