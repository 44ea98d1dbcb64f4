"""
Estimation Service
Naive and measurement-error corrected profile estimators for ADL-MIDAS,
golden-section search over theta, log-likelihoods, scores and asymptotic
covariances
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import linalg

from midasme.core.exceptions import (
    CorrectionNotInvertibleError,
    CovarianceError,
    DimensionError,
    DomainError,
    InsufficientHistoryError,
    NumericalError,
    OptimizationError,
    SingularDesignError,
)
from midasme.services.design_service import (
    NO_ME,
    DesignSet,
    MeVariances,
    restricted_design,
    sigma_c,
    sigma_unrestricted,
)
from midasme.services.lag_polynomial import (
    LagWeights,
    beta_weights,
    jacobian_D,
    melted_coefficients,
)

logger = logging.getLogger(__name__)

# (sqrt(5) - 1) / 2
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

VARIANCE_FLOOR = 1e-10
MAX_CONDITION = 1e12
NEGATIVE_EIGEN_TOL = 1e-8

NAIVE = "naive"
CORRECTED = "corrected"

COVARIANCE_METHODS = ("proposition", "sandwich")
AUTO_COVARIANCE = "auto"


class SearchConfig(BaseModel):
    """Golden-section bracket and iteration count for theta"""
    model_config = ConfigDict(frozen=True)

    theta_lo: float = Field(default=1.001, gt=1.0)
    theta_hi: float = 50.0
    iterations: int = Field(default=50, ge=1)

    @model_validator(mode="after")
    def _check_bracket(self):
        if not self.theta_hi > self.theta_lo:
            raise ValueError(f"theta_hi ({self.theta_hi}) must exceed theta_lo ({self.theta_lo})")
        return self


@dataclass(frozen=True)
class FitResult:
    """Estimates of gamma = (beta, theta, sigma_eps2) from one fit"""
    estimator: str
    beta_hat: np.ndarray
    theta_hat: float
    sigma_eps2_hat: float
    objective: float
    clamped_variance: bool
    p: int
    jmax: int
    n_rows: int
    n_periods: int
    me: MeVariances = NO_ME
    trace: Tuple[Tuple[float, float], ...] = ()
    covariance: Optional[np.ndarray] = None
    covariance_method: Optional[str] = None

    def __post_init__(self):
        beta = np.array(self.beta_hat, dtype=float)
        beta.setflags(write=False)
        object.__setattr__(self, "beta_hat", beta)
        if self.covariance is not None:
            cov = np.array(self.covariance, dtype=float)
            cov.setflags(write=False)
            object.__setattr__(self, "covariance", cov)

    @property
    def weights(self) -> LagWeights:
        return beta_weights(self.theta_hat, self.jmax)

    @property
    def eta(self) -> np.ndarray:
        return np.append(self.beta_hat, self.theta_hat)

    @property
    def gamma(self) -> np.ndarray:
        return np.concatenate([self.beta_hat, [self.theta_hat, self.sigma_eps2_hat]])

    @property
    def standard_errors(self) -> Optional[np.ndarray]:
        if self.covariance is None:
            return None
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


# ---------------------------------------------------------------------------
# Golden-section search
# ---------------------------------------------------------------------------

def golden_section_max(
    f: Callable[[float], float],
    cfg: SearchConfig,
    trace: Optional[List[Tuple[float, float]]] = None,
) -> Tuple[float, float]:
    """
    Maximize a unimodal scalar function by golden-section search

    A point whose evaluation raises a NumericalError counts as -inf, so the
    search moves to the sub-interval that excludes it.

    Args:
        f: Function of theta
        cfg: Bracket and iteration count
        trace: Optional list that receives every (theta, value) evaluation

    Returns:
        (theta_hat, objective) at the better of the two final points
    """
    last_error: List[Exception] = []

    def evaluate(theta: float) -> float:
        try:
            value = float(f(theta))
        except NumericalError as e:
            last_error.append(e)
            value = -math.inf
        if trace is not None:
            trace.append((theta, value))
        return value

    lo, hi = cfg.theta_lo, cfg.theta_hi
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc, fd = evaluate(c), evaluate(d)

    for _ in range(cfg.iterations):
        if fc == -math.inf and fd == -math.inf:
            break
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = evaluate(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = evaluate(d)

    if fc == -math.inf and fd == -math.inf:
        cause = last_error[-1] if last_error else None
        raise OptimizationError(
            f"objective failed at both points in [{lo:.6g}, {hi:.6g}]: {cause}"
        ) from cause

    if fc >= fd:
        return c, fc
    return d, fd


# ---------------------------------------------------------------------------
# Concentrated objectives
# ---------------------------------------------------------------------------

def _solve_normal(matrix: np.ndarray, rhs: np.ndarray, corrected: bool,
                  theta: Optional[float] = None) -> np.ndarray:
    """Solve a symmetric normal system after checking its conditioning"""
    eigenvalues = linalg.eigvalsh(matrix)
    scale = float(np.max(np.abs(eigenvalues)))
    smallest = float(np.min(np.abs(eigenvalues)))
    condition = math.inf if smallest == 0.0 else scale / smallest
    min_eig = float(eigenvalues[0])

    if min_eig < -NEGATIVE_EIGEN_TOL * scale or condition > MAX_CONDITION:
        if corrected:
            raise CorrectionNotInvertibleError(condition, min_eig, theta)
        raise SingularDesignError(condition, theta)

    try:
        factor = linalg.cho_factor(matrix)
        return linalg.cho_solve(factor, rhs)
    except linalg.LinAlgError:
        # indefinite but well conditioned
        return linalg.solve(matrix, rhs, assume_a="sym")


@dataclass(frozen=True)
class _Profile:
    weights: LagWeights
    beta: np.ndarray
    objective: float
    rss: float


def _profile(theta: float, ds: DesignSet, me: MeVariances) -> _Profile:
    weights = beta_weights(theta, ds.jmax)
    x_theta = restricted_design(ds, weights)
    normal = x_theta.T @ x_theta - ds.n_rows * sigma_c(weights, me, ds.p)
    cross = x_theta.T @ ds.response
    beta = _solve_normal(normal, cross, corrected=not me.is_zero, theta=theta)
    resid = ds.response - x_theta @ beta
    return _Profile(weights=weights, beta=beta, objective=float(cross @ beta), rss=float(resid @ resid))


def naive_objective(theta: float, ds: DesignSet) -> float:
    """Y'X(theta)[X(theta)'X(theta)]^-1 X(theta)'Y"""
    return _profile(theta, ds, NO_ME).objective


def corrected_objective(theta: float, ds: DesignSet, me: MeVariances) -> float:
    """Y'X(theta)[X(theta)'X(theta) - n Sigma_c]^-1 X(theta)'Y"""
    return _profile(theta, ds, me).objective


def concentrated_estimates(theta: float, ds: DesignSet, me: MeVariances = NO_ME):
    """
    Closed-form beta and sigma_eps2 for a fixed theta

    Returns:
        (beta, sigma_eps2, clamped) with sigma_eps2 floored only when a
        correction is present
    """
    prof = _profile(theta, ds, me)
    if me.is_zero:
        return prof.beta, prof.rss / ds.n_periods, False

    correction = ds.n_rows * (me.sigma_u2 + prof.beta @ sigma_c(prof.weights, me, ds.p) @ prof.beta)
    sigma2 = (prof.rss - correction) / ds.n_periods
    if sigma2 < VARIANCE_FLOOR:
        logger.debug(f"Corrected variance {sigma2:.3e} floored at theta={theta:.4f}")
        return prof.beta, VARIANCE_FLOOR, True
    return prof.beta, float(sigma2), False


# ---------------------------------------------------------------------------
# Fits
# ---------------------------------------------------------------------------

def _fit(ds: DesignSet, me: MeVariances, cfg: SearchConfig, estimator: str,
         covariance: Optional[str]) -> FitResult:
    if ds.n_rows < ds.p + 3:
        raise InsufficientHistoryError(
            f"{estimator} fit needs at least {ds.p + 3} rows for p={ds.p}, got {ds.n_rows}"
        )
    evaluations: List[Tuple[float, float]] = []
    theta_hat, objective = golden_section_max(lambda th: _profile(th, ds, me).objective, cfg, evaluations)
    beta_hat, sigma2_hat, clamped = concentrated_estimates(theta_hat, ds, me)

    fit = FitResult(
        estimator=estimator,
        beta_hat=beta_hat,
        theta_hat=float(theta_hat),
        sigma_eps2_hat=float(sigma2_hat),
        objective=float(objective),
        clamped_variance=clamped,
        p=ds.p,
        jmax=ds.jmax,
        n_rows=ds.n_rows,
        n_periods=ds.n_periods,
        me=me,
        trace=tuple(evaluations),
    )

    covariance = resolve_covariance(covariance, me)
    if covariance is not None:
        try:
            cov = asymptotic_covariance(fit, ds, fit.weights, method=covariance)
            fit = replace(fit, covariance=cov, covariance_method=covariance)
        except CovarianceError as e:
            logger.warning(f"No covariance for {estimator} fit: {e}")
    return fit


def resolve_covariance(method: Optional[str], me: MeVariances) -> Optional[str]:
    """Map "auto" to the sandwich form under measurement error and to the Proposition form without it"""
    if method == AUTO_COVARIANCE:
        return "proposition" if me.is_zero else "sandwich"
    return method


def fit_naive(ds: DesignSet, cfg: Optional[SearchConfig] = None,
              covariance: Optional[str] = None) -> FitResult:
    """
    Profile estimator that ignores measurement error

    Args:
        ds: Design built from observed data
        cfg: Search settings, defaults when None
        covariance: Optional covariance method to attach, "auto" allowed

    Returns:
        FitResult tagged "naive"
    """
    return _fit(ds, NO_ME, cfg or SearchConfig(), NAIVE, covariance)


def fit_corrected(ds: DesignSet, me: MeVariances, cfg: Optional[SearchConfig] = None,
                  covariance: Optional[str] = None) -> FitResult:
    """
    Corrected-score profile estimator for known ME variances

    With me = (0, 0) this is the naive estimator.
    """
    return _fit(ds, me, cfg or SearchConfig(), CORRECTED, covariance)


# ---------------------------------------------------------------------------
# Log-likelihoods and scores in gamma = (beta, theta, sigma_eps2)
# ---------------------------------------------------------------------------

def _split_gamma(gamma, ds: DesignSet):
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (ds.p + 4,):
        raise DimensionError(f"gamma must have length p+4={ds.p + 4}, got {gamma.shape}")
    beta, theta, sigma2 = gamma[: ds.p + 2], float(gamma[ds.p + 2]), float(gamma[ds.p + 3])
    if sigma2 <= 0:
        raise DomainError(f"sigma_eps2 must be positive, got {sigma2}")
    weights = beta_weights(theta, ds.jmax)
    beta_m = melted_coefficients(beta, weights, ds.p)
    resid = ds.response - ds.x_unrestricted @ beta_m
    return beta, weights, sigma2, beta_m, resid


def naive_loglik(gamma, ds: DesignSet) -> float:
    """Gaussian log-likelihood L* in the observed data"""
    _, _, sigma2, _, resid = _split_gamma(gamma, ds)
    T = ds.n_periods
    return float(-0.5 * T * math.log(2 * math.pi) - 0.5 * T * math.log(sigma2)
                 - 0.5 * (resid @ resid) / sigma2)


def corrected_loglik(gamma, ds: DesignSet, me: MeVariances) -> float:
    """L*_c = L* + n (sigma_u2 + beta_M' Sigma beta_M) / (2 sigma_eps2)"""
    _, _, sigma2, beta_m, _ = _split_gamma(gamma, ds)
    big_sigma = sigma_unrestricted(me, ds.p, ds.jmax)
    penalty = ds.n_rows * (me.sigma_u2 + beta_m @ big_sigma @ beta_m) / (2.0 * sigma2)
    return naive_loglik(gamma, ds) + float(penalty)


def naive_score(gamma, ds: DesignSet) -> np.ndarray:
    """Gradient of L*: (D'X'tau / s2, -T/(2 s2) + tau'tau/(2 s2^2))"""
    beta, weights, sigma2, _, resid = _split_gamma(gamma, ds)
    jac = jacobian_D(beta, weights, ds.p)
    eta_part = jac.T @ (ds.x_unrestricted.T @ resid) / sigma2
    s2_part = -0.5 * ds.n_periods / sigma2 + 0.5 * (resid @ resid) / sigma2 ** 2
    return np.append(eta_part, s2_part)


def corrected_score(gamma, ds: DesignSet, me: MeVariances) -> np.ndarray:
    """Gradient of L*_c"""
    beta, weights, sigma2, beta_m, resid = _split_gamma(gamma, ds)
    jac = jacobian_D(beta, weights, ds.p)
    big_sigma = sigma_unrestricted(me, ds.p, ds.jmax)
    n = ds.n_rows

    eta_part = jac.T @ (ds.x_unrestricted.T @ resid + n * big_sigma @ beta_m) / sigma2
    s2_part = (
        -0.5 * ds.n_periods / sigma2
        + 0.5 * (resid @ resid) / sigma2 ** 2
        - 0.5 * n * (me.sigma_u2 + beta_m @ big_sigma @ beta_m) / sigma2 ** 2
    )
    return np.append(eta_part, s2_part)


# ---------------------------------------------------------------------------
# Asymptotic covariance
# ---------------------------------------------------------------------------

def _inverse_pd(matrix: np.ndarray, what: str) -> np.ndarray:
    matrix = 0.5 * (matrix + matrix.T)
    eigenvalues = linalg.eigvalsh(matrix)
    if eigenvalues[0] <= 0 or eigenvalues[-1] / eigenvalues[0] > MAX_CONDITION:
        raise CovarianceError(
            f"{what} is singular (eigenvalues in [{eigenvalues[0]:.3e}, {eigenvalues[-1]:.3e}])"
        )
    return linalg.cho_solve(linalg.cho_factor(matrix), np.eye(matrix.shape[0]))


def bartlett_bandwidth(n: int) -> int:
    """Newey-West rule of thumb floor(4 (n/100)^(2/9))"""
    return int(math.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


def long_run_covariance(contributions: np.ndarray, bandwidth: Optional[int] = None) -> np.ndarray:
    """
    Bartlett-weighted variance of the sum of serially dependent rows

    Args:
        contributions: (n, k) array, one row per observation, mean zero
        bandwidth: Number of lags, rule of thumb when None

    Returns:
        (k, k) estimate of Var(sum of rows)
    """
    s = np.asarray(contributions, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    n = s.shape[0]
    lags = bartlett_bandwidth(n) if bandwidth is None else bandwidth
    total = s.T @ s
    for lag in range(1, min(lags, n - 1) + 1):
        gamma = s[lag:].T @ s[:-lag]
        total += (1.0 - lag / (lags + 1.0)) * (gamma + gamma.T)
    return total


def asymptotic_covariance(fit: FitResult, ds: DesignSet, w: Optional[LagWeights] = None,
                          method: str = "proposition") -> np.ndarray:
    """
    Covariance of gamma_hat = (beta_hat, theta_hat, sigma_eps2_hat)

    "proposition" is (1/T) blockdiag(s2 (D'QD)^-1, 2 s2^2) with
    Q = (X'X - n Sigma)/T. "sandwich" replaces the eta block by
    A^-1 B A^-1 with B the Bartlett long-run covariance of the per-row
    corrected scores, and the variance block by the long-run variance of
    the squared composite errors.

    Args:
        fit: Result of fit_corrected or fit_naive
        ds: The design the fit was computed on
        w: Weights at theta_hat, rebuilt when None
        method: "proposition" or "sandwich"

    Returns:
        (p+4) x (p+4) symmetric matrix
    """
    if method not in COVARIANCE_METHODS:
        raise DomainError(f"unknown covariance method '{method}'")
    if w is None:
        w = fit.weights
    if w.jmax != ds.jmax or fit.p != ds.p:
        raise DimensionError("fit, design and weights disagree on p or jmax")

    T, n, k = ds.n_periods, ds.n_rows, ds.p + 3
    s2 = fit.sigma_eps2_hat
    cov = np.zeros((k + 1, k + 1))
    if s2 == 0.0:
        return cov

    big_sigma = sigma_unrestricted(fit.me, ds.p, ds.jmax)
    jac = jacobian_D(fit.beta_hat, w, ds.p)
    xtx = ds.x_unrestricted.T @ ds.x_unrestricted
    information = jac.T @ (xtx - n * big_sigma) @ jac

    if method == "proposition":
        cov[:k, :k] = s2 * _inverse_pd(information / T, "D'QD") / T
        cov[k, k] = 2.0 * s2 ** 2 / T
        return cov

    beta_m = melted_coefficients(fit.beta_hat, w, ds.p)
    resid = ds.response - ds.x_unrestricted @ beta_m
    row_scores = (ds.x_unrestricted * resid[:, None] + (big_sigma @ beta_m)[None, :]) @ jac
    row_scores -= row_scores.mean(axis=0)
    inv_info = _inverse_pd(information, "D'(X'X - n Sigma)D")
    meat = long_run_covariance(row_scores)
    cov[:k, :k] = inv_info @ meat @ inv_info
    cov[:k, :k] = 0.5 * (cov[:k, :k] + cov[:k, :k].T)

    squared = resid ** 2
    squared = squared - squared.mean()
    cov[k, k] = float(long_run_covariance(squared[:, None])[0, 0]) / T ** 2
    return cov
