"""
Design construction
Aligns a low-frequency response with a high-frequency regressor and builds
the measurement-error correction matrices
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from midasme.core.exceptions import DimensionError, DomainError, InsufficientHistoryError
from midasme.services.lag_polynomial import LagWeights

logger = logging.getLogger(__name__)


class MeVariances(BaseModel):
    """Known measurement error variances of the low- and high-frequency series"""
    model_config = ConfigDict(frozen=True)

    sigma_u2: float = Field(default=0.0, ge=0.0)
    sigma_v2: float = Field(default=0.0, ge=0.0)

    @property
    def is_zero(self) -> bool:
        return self.sigma_u2 == 0.0 and self.sigma_v2 == 0.0


NO_ME = MeVariances()


@dataclass(frozen=True)
class MixedSeries:
    """Low-frequency y (length T) and high-frequency x (length m*T)"""
    y_obs: np.ndarray
    x_obs: np.ndarray
    m: int

    def __post_init__(self):
        y = np.array(self.y_obs, dtype=float)
        x = np.array(self.x_obs, dtype=float)
        if y.ndim != 1 or x.ndim != 1:
            raise DimensionError("y_obs and x_obs must be one-dimensional")
        if self.m < 1:
            raise DomainError(f"frequency ratio m must be positive, got {self.m}")
        if x.shape[0] != self.m * y.shape[0]:
            raise DimensionError(
                f"len(x_obs)={x.shape[0]} must equal m*len(y_obs)={self.m * y.shape[0]}"
            )
        y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "y_obs", y)
        object.__setattr__(self, "x_obs", x)

    @property
    def n_periods(self) -> int:
        return int(self.y_obs.shape[0])


@dataclass(frozen=True)
class DesignSet:
    """Response Y and unrestricted design X = (1, AR lags, high-frequency lags)"""
    response: np.ndarray
    x_unrestricted: np.ndarray
    p: int
    jmax: int
    m: int
    n_periods: int
    n_dropped: int = 0  # rows short of T - p

    def __post_init__(self):
        response = np.array(self.response, dtype=float)
        design = np.array(self.x_unrestricted, dtype=float)
        if design.ndim != 2 or design.shape != (response.shape[0], self.jmax + self.p + 1):
            raise DimensionError(
                f"design shape {design.shape} does not match "
                f"({response.shape[0]}, {self.jmax + self.p + 1})"
            )
        response.setflags(write=False)
        design.setflags(write=False)
        object.__setattr__(self, "response", response)
        object.__setattr__(self, "x_unrestricted", design)

    @property
    def n_rows(self) -> int:
        return int(self.response.shape[0])

    @property
    def base_block(self) -> np.ndarray:
        """Intercept and autoregressive columns"""
        return self.x_unrestricted[:, : self.p + 1]

    @property
    def hf_block(self) -> np.ndarray:
        """High-frequency lag columns, lag 0 first"""
        return self.x_unrestricted[:, self.p + 1:]


def first_usable_period(p: int, jmax: int, m: int) -> int:
    """Smallest 0-based response index with a full AR and high-frequency history"""
    return max(p, math.ceil(jmax / m))


def align_mixed(series: MixedSeries, p: int, jmax: int) -> DesignSet:
    """
    Build the unrestricted design

    For the response y_{t+1} the lag-0 high-frequency value is the last
    high-frequency observation of period t. Rows without enough
    high-frequency history are dropped and counted.

    Args:
        series: Mixed-frequency data
        p: Autoregressive order
        jmax: Number of high-frequency lags

    Returns:
        DesignSet
    """
    if p < 0:
        raise DomainError(f"p must be non-negative, got {p}")
    if jmax < 1:
        raise DomainError(f"jmax must be positive, got {jmax}")

    T, m = series.n_periods, series.m
    first = first_usable_period(p, jmax, m)
    n_rows = T - first
    if n_rows < 1:
        raise InsufficientHistoryError(
            f"no usable rows for T={T}, p={p}, jmax={jmax}, m={m}; "
            f"the first row needs period {first}"
        )

    periods = np.arange(first, T)
    ar_index = periods[:, None] - np.arange(1, p + 1)[None, :]
    hf_index = periods[:, None] * m - 1 - np.arange(jmax)[None, :]

    design = np.empty((n_rows, jmax + p + 1))
    design[:, 0] = 1.0
    design[:, 1: p + 1] = series.y_obs[ar_index]
    design[:, p + 1:] = series.x_obs[hf_index]

    n_dropped = first - p
    if n_dropped:
        logger.debug(f"Dropped {n_dropped} rows without {jmax} high-frequency lags")

    return DesignSet(
        response=series.y_obs[first:],
        x_unrestricted=design,
        p=p,
        jmax=jmax,
        m=m,
        n_periods=T,
        n_dropped=n_dropped,
    )


def restricted_design(ds: DesignSet, w: LagWeights) -> np.ndarray:
    """X(theta): base columns plus the weighted high-frequency combination"""
    if w.jmax != ds.jmax:
        raise DimensionError(f"weights have jmax={w.jmax}, design has jmax={ds.jmax}")
    return np.column_stack([ds.base_block, ds.hf_block @ w.weights])


def sigma_c(w: LagWeights, me: MeVariances, p: int) -> np.ndarray:
    """Restricted ME second-moment matrix diag(0, su2*I_p, sv2*C'C)"""
    diag = np.zeros(p + 2)
    diag[1: p + 1] = me.sigma_u2
    diag[p + 1] = me.sigma_v2 * w.sum_of_squares
    return np.diag(diag)


def sigma_unrestricted(me: MeVariances, p: int, jmax: int) -> np.ndarray:
    """Unrestricted ME second-moment matrix diag(0, su2*I_p, sv2*I_jmax)"""
    diag = np.concatenate([[0.0], np.full(p, me.sigma_u2), np.full(jmax, me.sigma_v2)])
    return np.diag(diag)
