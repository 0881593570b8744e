"""
Monte-Carlo statistics shared by the samplers, the harness and the tests.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import stats as sps

from .errors import StatisticsError


@dataclass
class MCEstimate:
    """A Monte-Carlo mean with its standard error."""

    estimate: float
    stderr: float
    n: int

    def within(self, target: float, n_se: float = 3.0, floor: float = 0.0) -> bool:
        """True when |estimate - target| <= n_se * stderr (plus an absolute floor)."""
        return abs(self.estimate - target) <= n_se * self.stderr + floor

    def z_score(self, target: float) -> float:
        if self.stderr == 0.0:
            return 0.0 if self.estimate == target else math.inf
        return (self.estimate - target) / self.stderr

    def to_dict(self) -> Dict[str, float]:
        return {"estimate": float(self.estimate), "stderr": float(self.stderr), "n": int(self.n)}


def mc_mean(samples: np.ndarray) -> MCEstimate:
    """Sample mean and its standard error."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise StatisticsError(f"need at least 2 samples, got {x.size}")
    return MCEstimate(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), int(x.size))


def mc_covariance(x: np.ndarray, y: np.ndarray) -> MCEstimate:
    """E[xy] for centred variables, with the standard error of the product mean."""
    return mc_mean(np.asarray(x, dtype=float) * np.asarray(y, dtype=float))


def mc_correlation(x: np.ndarray, y: np.ndarray) -> MCEstimate:
    """
    Pearson correlation with the large-sample standard error (1 - r^2)/sqrt(n).
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size < 3:
        raise StatisticsError("correlation needs at least 3 samples")
    sx, sy = x.std(), y.std()
    if sx == 0.0 or sy == 0.0:
        raise StatisticsError("correlation of a constant sample is undefined")
    r = float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))
    return MCEstimate(r, (1.0 - r * r) / math.sqrt(x.size), int(x.size))


@dataclass
class LogLogFit:
    """Least-squares line through (log x, log y)."""

    slope: float
    intercept: float
    slope_stderr: float
    points: int


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> LogLogFit:
    """
    Fit log y = slope * log x + intercept.

    Raises:
        StatisticsError: fewer than 3 points or non-positive values
    """
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.size < 3 or xa.size != ya.size:
        raise StatisticsError("log-log regression needs at least 3 matching points")
    if np.any(xa <= 0) or np.any(ya <= 0) or not np.all(np.isfinite(ya)):
        raise StatisticsError("log-log regression needs strictly positive finite values")
    result = sps.linregress(np.log(xa), np.log(ya))
    return LogLogFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        slope_stderr=float(result.stderr),
        points=int(xa.size),
    )


@dataclass
class NormalityReport:
    """Skewness and kurtosis tests against a Gaussian law."""

    skewness: float
    excess_kurtosis: float
    skew_pvalue: float
    kurtosis_pvalue: float
    level: float = 0.01

    @property
    def rejects_gaussian(self) -> bool:
        return min(self.skew_pvalue, self.kurtosis_pvalue) < self.level

    def to_dict(self) -> Dict[str, float]:
        return {
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
            "skew_pvalue": self.skew_pvalue,
            "kurtosis_pvalue": self.kurtosis_pvalue,
            "rejects_gaussian": self.rejects_gaussian,
        }


def normality_report(samples: np.ndarray, level: float = 0.01) -> NormalityReport:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 20:
        raise StatisticsError("normality tests need at least 20 samples")
    return NormalityReport(
        skewness=float(sps.skew(x)),
        excess_kurtosis=float(sps.kurtosis(x)),
        skew_pvalue=float(sps.skewtest(x).pvalue),
        kurtosis_pvalue=float(sps.kurtosistest(x).pvalue),
        level=level,
    )


def dyadic_lags(n: int, count: int, smallest: int = 1) -> List[int]:
    """Lags smallest, 2*smallest, ... (in grid steps) that fit strictly inside n."""
    lags = []
    lag = smallest
    while len(lags) < count and lag < n:
        lags.append(lag)
        lag *= 2
    return lags


@dataclass
class IncrementModulus:
    """Ensemble mean-square increments E|X(t+d) - X(t)|^2 per lag."""

    lags: List[float]
    mean_square: List[float]
    fit: Optional[LogLogFit] = None
    extras: Dict[str, float] = field(default_factory=dict)

    @property
    def exponent(self) -> float:
        if self.fit is None:
            raise StatisticsError("modulus has no regression")
        return self.fit.slope / 2.0


def increment_modulus(
    values: np.ndarray, dt: float, lags: Sequence[int], norm_weights: Optional[np.ndarray] = None
) -> IncrementModulus:
    """
    Mean-square modulus of continuity over an ensemble.

    Args:
        values: Array (paths, times) or (paths, times, dim)
        dt: Grid step
        lags: Lags in grid steps
        norm_weights: Optional weights of the squared norm over the last axis
    """
    arr = np.asarray(values, dtype=float)
    means = []
    for lag in lags:
        diff = arr[:, lag:, ...] - arr[:, :-lag, ...]
        sq = diff * diff
        if arr.ndim == 3:
            sq = sq @ norm_weights if norm_weights is not None else sq.sum(axis=-1)
        means.append(float(sq.mean()))
    lag_times = [lag * dt for lag in lags]
    fit = loglog_slope(lag_times, means) if len(lags) >= 3 else None
    return IncrementModulus(lags=lag_times, mean_square=means, fit=fit)
