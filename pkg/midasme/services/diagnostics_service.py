"""
Diagnostics Service
Large-sample checks of the naive score limit, the moment limits behind the
corrected estimator, and coverage of asymptotic confidence intervals
"""
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel

from midasme.core.config import settings
from midasme.core.exceptions import DomainError, MidasError
from midasme.services.design_service import NO_ME, DesignSet, align_mixed, sigma_unrestricted
from midasme.services.dgp_service import DgpParams, simulate_sample
from midasme.services.estimation_service import (
    AUTO_COVARIANCE,
    CORRECTED,
    NAIVE,
    fit_corrected,
    fit_naive,
    naive_score,
    resolve_covariance,
)
from midasme.services.lag_polynomial import jacobian_D, melted_coefficients

logger = logging.getLogger(__name__)

MIN_T_LARGE = 10_000
N_BATCHES = 50
RELATIVE_TOLERANCE = 0.05
Z_LIMIT = 3.0
Z_95 = 1.959963984540054
# numerical resolution of a fit; an interval of width zero still covers within it
COVERAGE_SLACK = 1e-6


class ComponentCheck(BaseModel):
    name: str
    empirical: float
    predicted: float
    std_error: float

    @property
    def deviation(self) -> float:
        return abs(self.empirical - self.predicted)

    @property
    def z_score(self) -> float:
        if self.std_error == 0.0:
            return 0.0 if self.deviation == 0.0 else float("inf")
        return self.deviation / self.std_error


class GradientReport(BaseModel):
    """(1/T) dL*/dgamma at the true parameters against its predicted limit"""
    T: int
    n_rows: int
    components: List[ComponentCheck]
    sigma2_relative_deviation: float
    passed: bool


class PlimCheck(BaseModel):
    """One moment limit: empirical matrix or vector against its target"""
    name: str
    empirical: List[float]
    target: List[float]
    std_errors: List[float]
    abs_deviation: float
    rel_deviation: float
    max_z: float
    passed: bool


class PlimReport(BaseModel):
    T: int
    n_rows: int
    checks: List[PlimCheck]
    max_rel_deviation: float
    passed: bool


class PlimRateReport(BaseModel):
    """Mean deviation at T and 4T over several seeds"""
    T: int
    seeds: List[int]
    deviation_T: Dict[str, float]
    deviation_4T: Dict[str, float]
    ratio: Dict[str, float]


class CoverageReport(BaseModel):
    estimator: str
    method: str
    T: int
    reps: int
    n_used: int
    failures: int
    coordinates: List[str]
    coverage: List[float]


def component_names(p: int) -> List[str]:
    return ["a"] + [f"rho{j}" for j in range(1, p + 1)] + ["b", "theta", "sigma_eps2"]


def batch_means_se(contributions: np.ndarray, denominator: float, n_batches: int = N_BATCHES) -> np.ndarray:
    """
    Standard error of sum(contributions)/denominator for serially dependent rows

    Rows are split into contiguous batches whose sums are treated as
    independent.
    """
    rows = np.asarray(contributions, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    n = rows.shape[0]
    size = n // n_batches
    if size < 1:
        raise DomainError(f"need at least {n_batches} rows for batch means, got {n}")
    sums = rows[: size * n_batches].reshape(n_batches, size, -1).sum(axis=1)
    # rescale to the full row count
    var_total = n_batches * np.var(sums, axis=0, ddof=1) * (n / (size * n_batches))
    return np.sqrt(var_total) / denominator


def _large_sample(params: DgpParams, T_large: int, seed: int):
    if T_large < MIN_T_LARGE:
        raise DomainError(f"T_large must be at least {MIN_T_LARGE}, got {T_large}")
    big = params.model_copy(update={"T": T_large})
    sample = simulate_sample(big, seed, 0)
    observed = align_mixed(sample.observed, big.p, big.jmax)
    latent = align_mixed(sample.latent, big.p, big.jmax)
    return big, observed, latent


def naive_gradient_limit(params: DgpParams, T_large: int, seed: int = 0) -> GradientReport:
    """
    Compare (1/T) dL*/dgamma at the truth with its limit under ME

    The prediction is the exact expectation for the realized row count n:
    (n/T)(-D'Sigma beta_M / s2) for eta and
    -(T-n)/(2 T s2) + (n/T)(sigma_u2 + beta_M'Sigma beta_M)/(2 s2^2) for sigma_eps2.

    Args:
        params: DGP parameters, T is replaced by T_large
        T_large: Sample length (>= 10^4)
        seed: Master seed of the simulated dataset

    Returns:
        GradientReport
    """
    big, ds, _ = _large_sample(params, T_large, seed)
    gamma = big.true_gamma
    s2 = big.sigma_eps2
    T, n = ds.n_periods, ds.n_rows

    weights = big.weights
    beta_m = melted_coefficients(big.true_beta, weights, big.p)
    jac = jacobian_D(big.true_beta, weights, big.p)
    big_sigma = sigma_unrestricted(big.me, big.p, big.jmax)
    me_term = big.me.sigma_u2 + beta_m @ big_sigma @ beta_m

    empirical = naive_score(gamma, ds) / T
    predicted = np.append(
        -(n / T) * (jac.T @ big_sigma @ beta_m) / s2,
        -(T - n) / (2.0 * T * s2) + (n / T) * me_term / (2.0 * s2 ** 2),
    )

    resid = ds.response - ds.x_unrestricted @ beta_m
    rows = np.column_stack([
        (ds.x_unrestricted * resid[:, None]) @ jac / s2,
        -(T / n) / (2.0 * s2) + resid ** 2 / (2.0 * s2 ** 2),
    ])
    se = batch_means_se(rows, T)

    components = [
        ComponentCheck(name=name, empirical=float(e), predicted=float(pr), std_error=float(s))
        for name, e, pr, s in zip(component_names(big.p), empirical, predicted, se)
    ]
    s2_check = components[-1]
    rel = s2_check.deviation / abs(s2_check.predicted) if s2_check.predicted != 0 else float("inf")
    passed = (rel <= RELATIVE_TOLERANCE or s2_check.z_score <= Z_LIMIT) and all(
        c.z_score <= Z_LIMIT for c in components[:-1]
    )
    logger.info(f"Naive score limit at T={T}: sigma_eps2 relative deviation {rel:.3%}, passed={passed}")
    return GradientReport(T=T, n_rows=n, components=components,
                          sigma2_relative_deviation=float(rel), passed=passed)


def _plim_check(name: str, empirical: np.ndarray, target: np.ndarray, se: np.ndarray) -> PlimCheck:
    empirical, target, se = (np.ravel(v).astype(float) for v in (empirical, target, se))
    dev = empirical - target
    abs_dev = float(np.linalg.norm(dev))
    target_norm = float(np.linalg.norm(target))
    rel = abs_dev / target_norm if target_norm > 0 else float("inf")
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, np.abs(dev) / se, np.where(dev == 0, 0.0, np.inf))
    max_z = float(np.max(z)) if z.size else 0.0
    return PlimCheck(
        name=name,
        empirical=empirical.tolist(),
        target=target.tolist(),
        std_errors=se.tolist(),
        abs_deviation=abs_dev,
        rel_deviation=rel,
        max_z=max_z,
        passed=rel <= RELATIVE_TOLERANCE or max_z <= Z_LIMIT,
    )


def _plims(ds: DesignSet, latent: DesignSet, big: DgpParams) -> List[PlimCheck]:
    n = ds.n_rows
    x, psi = ds.x_unrestricted, latent.x_unrestricted
    beta_m = melted_coefficients(big.true_beta, big.weights, big.p)
    big_sigma = sigma_unrestricted(big.me, big.p, big.jmax)
    # composite error E + U - V beta_M
    composite = ds.response - x @ beta_m

    cross_rows = x * composite[:, None]
    xii = _plim_check("xii", cross_rows.sum(axis=0) / n, -big_sigma @ beta_m,
                      batch_means_se(cross_rows, n))

    k = x.shape[1]
    moment_rows = (x[:, :, None] * x[:, None, :] - psi[:, :, None] * psi[:, None, :]).reshape(n, k * k)
    xiii = _plim_check("xiii", x.T @ x / n, psi.T @ psi / n + big_sigma,
                       batch_means_se(moment_rows, n))

    target_xiv = big.sigma_eps2 + big.me.sigma_u2 + beta_m @ big_sigma @ beta_m
    xiv = _plim_check("xiv", np.array([composite @ composite / n]), np.array([target_xiv]),
                      batch_means_se(composite ** 2, n))
    return [xii, xiii, xiv]


def plim_checks(params: DgpParams, T_large: int, seed: int = 0) -> PlimReport:
    """
    Check the moment limits of the contaminated design on one large sample

    (xii)  X'T/n -> -Sigma beta_M
    (xiii) X'X/n -> Psi'Psi/n + Sigma, Psi the uncontaminated design
    (xiv)  T'T/n -> sigma_eps2 + sigma_u2 + beta_M' Sigma beta_M
    with T = Y - X beta_M the composite error.
    """
    big, ds, latent = _large_sample(params, T_large, seed)
    checks = _plims(ds, latent, big)
    finite = [c.rel_deviation for c in checks if np.isfinite(c.rel_deviation)]
    report = PlimReport(
        T=ds.n_periods,
        n_rows=ds.n_rows,
        checks=checks,
        max_rel_deviation=max(finite) if finite else 0.0,
        passed=all(c.passed for c in checks),
    )
    logger.info(f"Moment limits at T={report.T}: max relative deviation "
                f"{report.max_rel_deviation:.3%}, passed={report.passed}")
    return report


def plim_rate(params: DgpParams, T_large: int, seeds: Sequence[int] = (0, 1, 2, 3, 4)) -> PlimRateReport:
    """Deviation ratio between 4*T_large and T_large, averaged over seeds"""
    dev_t: Dict[str, List[float]] = {}
    dev_4t: Dict[str, List[float]] = {}
    for seed in seeds:
        for size, store in ((T_large, dev_t), (4 * T_large, dev_4t)):
            big, ds, latent = _large_sample(params, size, seed)
            for check in _plims(ds, latent, big):
                store.setdefault(check.name, []).append(check.abs_deviation)

    mean_t = {k: float(np.mean(v)) for k, v in dev_t.items()}
    mean_4t = {k: float(np.mean(v)) for k, v in dev_4t.items()}
    ratio = {k: (mean_4t[k] / mean_t[k] if mean_t[k] > 0 else 0.0) for k in mean_t}
    return PlimRateReport(T=T_large, seeds=list(seeds), deviation_T=mean_t,
                          deviation_4T=mean_4t, ratio=ratio)


def _coverage_rep(params: DgpParams, seed: int, rep_index: int, estimator: str,
                  method: str, search) -> Optional[np.ndarray]:
    try:
        sample = simulate_sample(params, seed, rep_index)
        ds = align_mixed(sample.observed, params.p, params.jmax)
        if estimator == NAIVE:
            fit = fit_naive(ds, search, covariance=method)
        else:
            fit = fit_corrected(ds, params.me, search, covariance=method)
    except MidasError as e:
        logger.debug(f"coverage replication {rep_index} failed: {e}")
        return None
    if fit.covariance is None:
        return None
    truth = params.true_gamma
    half_width = Z_95 * fit.standard_errors
    return np.abs(fit.gamma - truth) <= half_width + COVERAGE_SLACK * (1.0 + np.abs(truth))


def coverage_check(params: DgpParams, reps: int, seed: int = 0, estimator: str = CORRECTED,
                   method: str = AUTO_COVARIANCE, search=None,
                   threads: Optional[int] = None) -> CoverageReport:
    """
    Empirical coverage of 95% normal intervals built from the asymptotic covariance

    Args:
        params: DGP parameters
        reps: Number of replications
        seed: Master seed
        estimator: "corrected" or "naive"
        method: Covariance method, "auto" resolves against the estimator's ME
        search: Optional SearchConfig
        threads: Worker count

    Returns:
        CoverageReport with one rate per coordinate of (beta, theta, sigma_eps2)
    """
    if reps < 1:
        raise DomainError(f"reps must be positive, got {reps}")
    method = resolve_covariance(method, NO_ME if estimator == NAIVE else params.me)
    n_jobs = threads or settings.threads
    tasks = (delayed(_coverage_rep)(params, seed, i, estimator, method, search) for i in range(reps))
    outcomes = Parallel(n_jobs=n_jobs)(tasks) if n_jobs > 1 else [
        _coverage_rep(params, seed, i, estimator, method, search) for i in range(reps)
    ]
    used = [o for o in outcomes if o is not None]
    rates = np.mean(used, axis=0).tolist() if used else [float("nan")] * (params.p + 4)
    report = CoverageReport(
        estimator=estimator,
        method=method,
        T=params.T,
        reps=reps,
        n_used=len(used),
        failures=reps - len(used),
        coordinates=component_names(params.p),
        coverage=rates,
    )
    logger.info(f"Coverage ({estimator}, {method}) at T={params.T}: "
                + ", ".join(f"{n}={r:.3f}" for n, r in zip(report.coordinates, report.coverage)))
    return report
