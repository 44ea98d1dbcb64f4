"""
Beta lag polynomial
Normalized Beta-density MIDAS weights, their theta derivative and the
Jacobian of the melted coefficient vector
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import special

from midasme.core.exceptions import DimensionError, DomainError

logger = logging.getLogger(__name__)


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LagWeights:
    """Normalized weights c(j; 1, theta2) for j = 0..jmax-1"""
    theta2: float
    jmax: int
    weights: np.ndarray
    dweights_dtheta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", _readonly(self.weights))
        object.__setattr__(self, "dweights_dtheta", _readonly(self.dweights_dtheta))
        if self.weights.shape != (self.jmax,) or self.dweights_dtheta.shape != (self.jmax,):
            raise DimensionError(
                f"weight vectors must have length jmax={self.jmax}, got "
                f"{self.weights.shape} and {self.dweights_dtheta.shape}"
            )

    @property
    def sum_of_squares(self) -> float:
        """C'C, the factor multiplying sigma_v2 in Sigma_c"""
        return float(self.weights @ self.weights)


def beta_density(x: float, theta1: float, theta2: float) -> float:
    """
    Beta probability density evaluated in log space

    Args:
        x: Point in [0, 1)
        theta1: First shape parameter
        theta2: Second shape parameter

    Returns:
        x^(theta1-1) (1-x)^(theta2-1) / B(theta1, theta2)
    """
    if theta1 <= 0 or theta2 <= 0:
        raise DomainError(f"shape parameters must be positive, got ({theta1}, {theta2})")
    if not 0.0 <= x < 1.0:
        raise DomainError(f"x must lie in [0, 1), got {x}")
    if theta1 < 1 and x == 0.0:
        raise DomainError("density has a pole at x=0 when theta1 < 1")

    log_f = (
        special.xlogy(theta1 - 1.0, x)
        + special.xlog1py(theta2 - 1.0, -x)
        - special.betaln(theta1, theta2)
    )
    return float(np.exp(log_f))


def beta_weights(theta2: float, jmax: int) -> LagWeights:
    """
    Build normalized Beta lag weights with theta1 fixed at 1

    The weights are evaluated on the grid x = j/jmax, j = 0..jmax-1, and
    normalized to sum to one. The derivative is analytic.

    Args:
        theta2: Second Beta shape parameter (> 0)
        jmax: Number of high-frequency lags (>= 1)

    Returns:
        LagWeights
    """
    if jmax is None or int(jmax) != jmax or jmax < 1:
        raise DomainError(f"jmax must be a positive integer, got {jmax}")
    if not np.isfinite(theta2) or theta2 <= 0:
        raise DomainError(f"theta2 must be positive, got {theta2}")
    jmax = int(jmax)

    grid = np.arange(jmax, dtype=float) / jmax
    # B(1, theta2) is common to every lag and cancels in the normalization
    log_f = special.xlog1py(theta2 - 1.0, -grid)
    weights = special.softmax(log_f)

    # d log f_j / d theta2 = log(1 - x_j) - (psi(theta2) - psi(1 + theta2));
    # the digamma part is constant in j and drops out of the quotient rule
    score = np.log1p(-grid)
    dweights = weights * (score - weights @ score)

    return LagWeights(theta2=float(theta2), jmax=jmax, weights=weights, dweights_dtheta=dweights)


def weight_embedding(weights: LagWeights, p: int) -> np.ndarray:
    """Return blockdiag(I_{p+1}, w), shape (jmax+p+1) x (p+2)"""
    if p < 0:
        raise DomainError(f"p must be non-negative, got {p}")
    embed = np.zeros((weights.jmax + p + 1, p + 2))
    embed[: p + 1, : p + 1] = np.eye(p + 1)
    embed[p + 1:, p + 1] = weights.weights
    return embed


def _check_beta(beta, p: int) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if p < 0:
        raise DomainError(f"p must be non-negative, got {p}")
    if beta.shape != (p + 2,):
        raise DimensionError(f"beta must have length p+2={p + 2}, got shape {beta.shape}")
    return beta


def melted_coefficients(beta, weights: LagWeights, p: int) -> np.ndarray:
    """beta_M = (a, rho_1..rho_p, b*c(0), ..., b*c(jmax-1))"""
    beta = _check_beta(beta, p)
    return np.concatenate([beta[: p + 1], beta[p + 1] * weights.weights])


def jacobian_D(beta, weights: LagWeights, p: int) -> np.ndarray:
    """
    Jacobian of beta_M with respect to eta = (a, rho_1..rho_p, b, theta)

    Args:
        beta: Coefficients ordered (a, rho_1..rho_p, b)
        weights: Lag weights built at the theta where D is evaluated
        p: Autoregressive order

    Returns:
        Matrix of shape (jmax+p+1) x (p+3)
    """
    beta = _check_beta(beta, p)
    jac = np.zeros((weights.jmax + p + 1, p + 3))
    jac[: p + 1, : p + 1] = np.eye(p + 1)
    jac[p + 1:, p + 1] = weights.weights
    jac[p + 1:, p + 2] = beta[p + 1] * weights.dweights_dtheta
    return jac
