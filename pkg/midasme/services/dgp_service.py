"""
Data generating process
AR(1) high-frequency regressor, ADL-MIDAS low-frequency response and
additive Gaussian measurement error, driven by reproducible random streams
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import signal

from midasme.core.exceptions import InsufficientHistoryError, NonStationaryError
from midasme.services.design_service import MeVariances, MixedSeries, first_usable_period
from midasme.services.lag_polynomial import LagWeights, beta_weights

logger = logging.getLogger(__name__)

STREAM_ROLES = {
    "high_frequency": 0,
    "equation": 1,
    "low_me": 2,
    "high_me": 3,
}


class DgpParams(BaseModel):
    """Parameters of the simulated ADL-MIDAS ME model"""
    model_config = ConfigDict(frozen=True)

    a: float = 0.0
    rho: List[float] = Field(default_factory=lambda: [0.3, 0.2])
    b: float = 1.0
    theta2: float = Field(default=2.0, gt=1.0)
    jmax: int = Field(default=9, ge=1)
    m: int = Field(default=3, ge=1)
    T: int = Field(default=120, ge=1)
    ar_coef: float = 0.8
    sigma_eps2: float = Field(default=1.0, gt=0.0)
    me: MeVariances = Field(default_factory=MeVariances)
    innov_sd: float = Field(default=1.0, gt=0.0)
    hf_burnin_periods: int = Field(default=200, ge=0)
    low_burnin: int = Field(default=100, ge=0)

    @field_validator("ar_coef")
    @classmethod
    def _stationary(cls, v: float) -> float:
        if abs(v) >= 1.0:
            raise ValueError(f"|ar_coef| must be below 1, got {v}")
        return v

    @model_validator(mode="after")
    def _stability_warning(self):
        if sum(abs(r) for r in self.rho) >= 1.0:
            logger.warning(f"sum |rho| = {sum(abs(r) for r in self.rho):.3f} >= 1; "
                           f"the low-frequency recursion may be explosive")
        return self

    @property
    def p(self) -> int:
        return len(self.rho)

    @property
    def true_beta(self) -> np.ndarray:
        return np.array([self.a, *self.rho, self.b], dtype=float)

    @property
    def true_gamma(self) -> np.ndarray:
        return np.concatenate([self.true_beta, [self.theta2, self.sigma_eps2]])

    @property
    def weights(self) -> LagWeights:
        return beta_weights(self.theta2, self.jmax)


def stream(master_seed: int, rep_index: int, role: str) -> np.random.Generator:
    """Independent generator for one (replication, role) pair"""
    seq = np.random.SeedSequence(master_seed, spawn_key=(rep_index, STREAM_ROLES[role]))
    return np.random.default_rng(seq)


def gen_ar1(n: int, phi: float, innov_sd: float, burnin: int, rng: np.random.Generator) -> np.ndarray:
    """
    Stationary Gaussian AR(1) started at zero

    Args:
        n: Number of values returned
        phi: Autoregressive coefficient, |phi| < 1
        innov_sd: Innovation standard deviation
        burnin: Leading values discarded
        rng: Random stream

    Returns:
        Array of length n
    """
    if abs(phi) >= 1.0:
        raise NonStationaryError(f"AR(1) coefficient must satisfy |phi| < 1, got {phi}")
    shocks = innov_sd * rng.standard_normal(n + burnin)
    path = signal.lfilter([1.0], [1.0, -phi], shocks)
    return path[burnin:]


def gen_low_freq(x_high: np.ndarray, params: DgpParams, rng: np.random.Generator) -> np.ndarray:
    """
    Generate Z_{t+1} = a + sum_j rho_j Z_{t-j+1} + b C(L^{1/m}; theta) xi_t + eps_{t+1}

    x_high covers L low-frequency periods; the recursion runs over all of
    them with the same lag-0 anchor as align_mixed and the last T values
    are returned.
    """
    x_high = np.asarray(x_high, dtype=float)
    p, m, jmax, T = params.p, params.m, params.jmax, params.T
    n_periods = x_high.shape[0] // m
    first = first_usable_period(p, jmax, m)
    if x_high.shape[0] != n_periods * m or n_periods < T + first:
        raise InsufficientHistoryError(
            f"need at least {(T + first) * m} high-frequency values in whole periods, "
            f"got {x_high.shape[0]}"
        )

    sd = math.sqrt(params.sigma_eps2)
    eps = sd * rng.standard_normal(n_periods)

    periods = np.arange(first, n_periods)
    lagged = x_high[periods[:, None] * m - 1 - np.arange(jmax)[None, :]]
    drive = params.a + params.b * (lagged @ params.weights.weights) + eps[first:]

    z = np.empty(n_periods)
    z[:first] = eps[:first]
    if p == 0:
        z[first:] = drive
    else:
        denom = np.concatenate([[1.0], -np.asarray(params.rho, dtype=float)])
        history = z[first - p: first][::-1]
        zi = signal.lfiltic([1.0], denom, y=history)
        z[first:], _ = signal.lfilter([1.0], denom, drive, zi=zi)
    return z[n_periods - T:]


def contaminate(z: np.ndarray, x: np.ndarray, me: MeVariances, rng: np.random.Generator,
                rng_high: Optional[np.random.Generator] = None):
    """
    Add iid N(0, sigma_u2) to z and iid N(0, sigma_v2) to x

    Args:
        z: Latent low-frequency series
        x: Latent high-frequency series
        me: Measurement error variances
        rng: Stream for u (and v when rng_high is None)
        rng_high: Separate stream for v

    Returns:
        (y_obs, x_obs)
    """
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    if rng_high is None:
        rng_high = rng
    u = math.sqrt(me.sigma_u2) * rng.standard_normal(z.shape[0])
    v = math.sqrt(me.sigma_v2) * rng_high.standard_normal(x.shape[0])
    return z + u, x + v


@dataclass(frozen=True)
class SimulatedSample:
    """One simulated dataset with its latent components"""
    params: DgpParams
    observed: MixedSeries
    latent: MixedSeries

    @property
    def u(self) -> np.ndarray:
        return self.observed.y_obs - self.latent.y_obs

    @property
    def v(self) -> np.ndarray:
        return self.observed.x_obs - self.latent.x_obs


def simulate_sample(params: DgpParams, master_seed: int, rep_index: int = 0) -> SimulatedSample:
    """
    Draw one dataset; a pure function of (params, master_seed, rep_index)

    Each component uses its own stream so scenarios that differ only in ME
    variances share the latent series.
    """
    burn = max(params.low_burnin, first_usable_period(params.p, params.jmax, params.m))
    n_high = params.m * (params.T + burn)
    xi_full = gen_ar1(
        n_high,
        params.ar_coef,
        params.innov_sd,
        params.hf_burnin_periods * params.m,
        stream(master_seed, rep_index, "high_frequency"),
    )
    z = gen_low_freq(xi_full, params, stream(master_seed, rep_index, "equation"))
    xi = xi_full[burn * params.m:]

    y_obs, x_obs = contaminate(
        z,
        xi,
        params.me,
        stream(master_seed, rep_index, "low_me"),
        stream(master_seed, rep_index, "high_me"),
    )
    return SimulatedSample(
        params=params,
        observed=MixedSeries(y_obs=y_obs, x_obs=x_obs, m=params.m),
        latent=MixedSeries(y_obs=z, x_obs=xi, m=params.m),
    )
