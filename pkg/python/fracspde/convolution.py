"""
Stochastic convolution W_A(t) = int_0^t S(t-s) dX_s and its factorization.

The direct scheme is the exponential left-point recursion
W(t_{k+1}) = e^{dt A} (W(t_k) + dX_k). The factorized scheme goes through
Y_alpha and R_{alpha,gamma} in the eigen-coordinates of A, where both
singular-kernel sums become Toeplitz convolutions (FFT).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import signal, special

from .covariance import CovarianceKernel, default_bound
from .errors import (
    ConfigurationError,
    GridMismatchError,
    PreconditionError,
    StatisticsError,
)
from .netop import OperatorSpec
from .noise1d import TimeGrid
from .qnoise import VectorNoisePath
from .stats import IncrementModulus, dyadic_lags, increment_modulus
from .wiener import Integrand, h_inner

logger = logging.getLogger(__name__)

SCHEMES = ("exponential-left-point", "factorization")
FACTOR_WEIGHTS = ("abel", "cell")
MIN_HOLDER_LAGS = 6


@dataclass(frozen=True)
class ConvolutionConfig:
    """
    Attributes:
        alpha: Factorization exponent in (0, Hbound)
        gamma_frac: Spatial regularity order in [0, alpha)
        scheme: "exponential-left-point" or "factorization"
        p: Moment order whose constraint alpha > gamma_frac + 1/p is enforced
        weights: "cell" (Y kernel averaged per cell, R by product trapezoid in Y) or
            "abel" (Y weights solved as the discrete inverse of the R cell weights)
    """

    alpha: float = 0.25
    gamma_frac: float = 0.0
    scheme: str = "exponential-left-point"
    p: Optional[float] = None
    weights: str = "cell"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"convolution scheme {self.scheme!r} not in {SCHEMES}")
        if self.weights not in FACTOR_WEIGHTS:
            raise ConfigurationError(f"factorization weights {self.weights!r} not in {FACTOR_WEIGHTS}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(f"alpha={self.alpha} outside (0, 1)")
        if not 0.0 <= self.gamma_frac < self.alpha:
            raise ConfigurationError(
                f"gamma_frac={self.gamma_frac} outside [0, alpha={self.alpha})"
            )
        if self.p is not None and not self.alpha > self.gamma_frac + 1.0 / self.p:
            raise ConfigurationError(
                f"alpha={self.alpha} must exceed gamma_frac + 1/p = {self.gamma_frac + 1 / self.p:.6g}"
            )

    def check_kernel(self, kernel: Optional[CovarianceKernel]) -> None:
        if kernel is None:
            return
        hbound = default_bound(kernel).Hbound
        if not self.alpha < hbound:
            raise ConfigurationError(
                f"alpha={self.alpha} must be below the regularity index {hbound:.6g} of "
                f"{kernel.label()}"
            )


@dataclass
class ConvolutionPath:
    """
    Attributes:
        grid: Time grid
        values: W_A(t_i) (or (-A)^g W_A for the factorized scheme), shape (n+1, N)
        config: Scheme configuration
        y_alpha: Y_alpha trajectory for the factorized scheme
    """

    grid: TimeGrid
    values: np.ndarray
    config: ConvolutionConfig
    y_alpha: Optional[np.ndarray] = None
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def sup_norm(self, spec: OperatorSpec) -> float:
        return float(np.max(spec.norm(self.values)))


def _check_noise(spec: OperatorSpec, noise: VectorNoisePath, grid: Optional[TimeGrid]) -> None:
    if grid is not None and not noise.grid.matches(grid):
        raise GridMismatchError(
            f"noise grid (T={noise.grid.T}, n={noise.grid.n}) does not match the output grid "
            f"(T={grid.T}, n={grid.n})"
        )
    if noise.dim != spec.size:
        raise GridMismatchError(f"noise dimension {noise.dim} != operator size {spec.size}")


def convolve_values(spec: OperatorSpec, noise_values: np.ndarray, dt: float) -> np.ndarray:
    """
    Exponential left-point recursion on a path (n+1, N) or a batch (P, n+1, N).
    """
    X = np.asarray(noise_values, dtype=float)
    single = X.ndim == 2
    if single:
        X = X[None]
    E_T = spec.propagator(dt).T
    dX = np.diff(X, axis=1)
    W = np.zeros_like(X)
    state = np.zeros((X.shape[0], X.shape[2]))
    for k in range(dX.shape[1]):
        state = (state + dX[:, k]) @ E_T
        W[:, k + 1] = state
    return W[0] if single else W


def convolve(
    spec: OperatorSpec,
    noise: VectorNoisePath,
    config: Optional[ConvolutionConfig] = None,
    grid: Optional[TimeGrid] = None,
) -> ConvolutionPath:
    """
    Stochastic convolution by the exponential left-point scheme.

    Only increments before t_k enter W_A(t_k), so the result is adapted.

    Raises:
        GridMismatchError: noise grid or dimension does not match
    """
    config = config or ConvolutionConfig()
    _check_noise(spec, noise, grid)
    if config.scheme == "factorization":
        return factorized_convolve(spec, noise, config, grid)
    values = convolve_values(spec, noise.values, noise.grid.dt)
    return ConvolutionPath(grid=noise.grid, values=values, config=config)


# =============================================================================
# Factorization
# =============================================================================
def r_cell_weights(alpha: float, dt: float, count: int) -> np.ndarray:
    """beta_L = int_{(L-1)dt}^{L dt} s^(alpha-1) ds for L = 1..count."""
    L = np.arange(1, count + 1, dtype=float)
    return dt**alpha * (L**alpha - (L - 1.0) ** alpha) / alpha


def r_trapezoid_weights(alpha: float, dt: float, count: int) -> np.ndarray:
    """
    Product-trapezoid weights of int s^(alpha-1) psi(t - s) ds for lags l = 0..count-1.

    psi is interpolated linearly between grid samples, so the sample at lag l
    collects the right part of cell l and the left part of cell l - 1.
    """
    l = np.arange(count + 1, dtype=float)
    m0 = (l[1:] ** alpha - l[:-1] ** alpha) / alpha
    m1 = (l[1:] ** (alpha + 1.0) - l[:-1] ** (alpha + 1.0)) / (alpha + 1.0)
    near = (l[1:] * m0 - m1)[:count]
    far = (m1 - l[:-1] * m0)[:count]
    weights = near.copy()
    weights[1:] += far[:-1]
    return dt**alpha * weights


def y_cell_weights(alpha: float, dt: float, count: int) -> np.ndarray:
    """Cell averages of s^(-alpha) over [(l-1)dt, l dt] for l = 1..count."""
    l = np.arange(1, count + 1, dtype=float)
    return dt**-alpha * (l ** (1.0 - alpha) - (l - 1.0) ** (1.0 - alpha)) / (1.0 - alpha)


def abel_weights(alpha: float, dt: float, count: int) -> np.ndarray:
    """
    Y-side weights a_l with c_alpha sum_{l<=L} beta_{L-l+1} a_l = 1 for every L.

    This is the discrete counterpart of
    (sin(alpha pi)/pi) int_s^t (t-u)^(alpha-1) (u-s)^(-alpha) du = 1.
    """
    c_alpha = math.sin(alpha * math.pi) / math.pi
    beta = r_cell_weights(alpha, dt, count)
    a = np.zeros(count)
    for L in range(count):
        # beta[L - l] pairs with a[l] for l < L (0-based)
        acc = np.dot(beta[L:0:-1], a[:L]) if L else 0.0
        a[L] = (1.0 / c_alpha - acc) / beta[0]
    return a


def _mode_kernels(values: np.ndarray, weights: np.ndarray, dt: float, shift: int) -> np.ndarray:
    lags = np.arange(weights.size) + shift
    return weights[:, None] * np.exp(np.outer(lags * dt, values))


def factorized_values(
    spec: OperatorSpec, noise_values: np.ndarray, dt: float, config: ConvolutionConfig
):
    """
    (-A)^g W_A via Y_alpha and R_{alpha,g}; returns (values, y_alpha) for a path or batch.
    """
    X = np.asarray(noise_values, dtype=float)
    single = X.ndim == 2
    if single:
        X = X[None]
    n = X.shape[1] - 1
    lam, V, _ = spec._eig
    Vinv = np.linalg.inv(V)
    dX_hat = np.diff(X, axis=1) @ Vinv.T

    alpha = config.alpha
    c_alpha = math.sin(alpha * math.pi) / math.pi
    if config.weights == "abel":
        beta = r_cell_weights(alpha, dt, n + 1)
        a = abel_weights(alpha, dt, n)
    else:
        beta = r_trapezoid_weights(alpha, dt, n + 1)
        a = y_cell_weights(alpha, dt, n)

    # Y_i = sum_{j<i} a_{i-j} e^{lam (i-j) dt} dX_j
    k_y = np.zeros((n + 1, lam.size), dtype=complex)
    k_y[1:] = _mode_kernels(lam, a, dt, shift=1)
    Y_hat = signal.fftconvolve(dX_hat, k_y[None], axes=1)[:, : n + 1]
    Y_hat[:, 0] = 0.0

    # W_k = c_alpha sum_{i<=k} beta_{k-i} e^{lam (k-i) dt} Y_i, beta indexed by lag
    k_w = _mode_kernels(lam, beta, dt, shift=0)
    W_hat = c_alpha * signal.fftconvolve(Y_hat, k_w[None], axes=1)[:, : n + 1]
    if config.gamma_frac > 0.0:
        W_hat = W_hat * (-lam) ** config.gamma_frac
    W = np.real(W_hat @ V.T)
    Y = np.real(Y_hat @ V.T)
    W[:, 0] = 0.0
    if single:
        return W[0], Y[0]
    return W, Y


def factorized_convolve(
    spec: OperatorSpec,
    noise: VectorNoisePath,
    config: ConvolutionConfig,
    grid: Optional[TimeGrid] = None,
) -> ConvolutionPath:
    """
    (-A)^{gamma_frac} W_A through the factorization Y_alpha -> R_{alpha,gamma_frac}.

    Raises:
        ConfigurationError: alpha, gamma_frac or p violate their constraints
    """
    _check_noise(spec, noise, grid)
    config.check_kernel(noise.kernel)
    values, y_alpha = factorized_values(spec, noise.values, noise.grid.dt, config)
    return ConvolutionPath(grid=noise.grid, values=values, config=config, y_alpha=y_alpha)


def r_operator(
    spec: OperatorSpec, psi: np.ndarray, dt: float, alpha: float, gamma_frac: float = 0.0
) -> np.ndarray:
    """
    Discrete R_{alpha,g} psi at the grid times, psi given as (n+1, N) samples.
    """
    psi = np.asarray(psi, dtype=float)
    n = psi.shape[0] - 1
    lam, V, _ = spec._eig
    psi_hat = psi @ np.linalg.inv(V).T
    psi_hat[0] = 0.0
    beta = r_cell_weights(alpha, dt, n + 1)
    k_w = _mode_kernels(lam, beta, dt, shift=0)
    out = math.sin(alpha * math.pi) / math.pi * signal.fftconvolve(psi_hat, k_w, axes=0)[: n + 1]
    if gamma_frac > 0.0:
        out = out * (-lam) ** gamma_frac
    return np.real(out @ V.T)


def r_operator_constant(a: float, alpha: float, t: float, value: float = 1.0) -> float:
    """
    R_{alpha,0} psi(t) for psi = value and S(t) = e^{-a t}:
    (sin(alpha pi)/pi) value a^(-alpha) Gamma(alpha) P(alpha, a t).
    """
    c_alpha = math.sin(alpha * math.pi) / math.pi
    return c_alpha * value * a**-alpha * special.gamma(alpha) * special.gammainc(alpha, a * t)


# =============================================================================
# Oracles and diagnostics
# =============================================================================
def scalar_variance(a: float, kernel: CovarianceKernel, T: float, cells: int = 256) -> float:
    """Var W_A(T) for A = -a: <f, f>_H with f(u) = e^{-a(T-u)}."""
    f = Integrand.from_callable(lambda u: np.exp(-a * (T - np.asarray(u))), T, bound=1.0)
    return h_inner(f, f, kernel, cells=cells)


def ito_variance(a: float, T: float) -> float:
    """Brownian closed form (1 - e^{-2aT}) / (2a)."""
    return (1.0 - math.exp(-2.0 * a * T)) / (2.0 * a)


@dataclass
class HolderReport:
    exponent: float
    stderr: float
    modulus: IncrementModulus
    paths: int

    def to_dict(self) -> dict:
        return {
            "estimate": self.exponent,
            "stderr": self.stderr,
            "n": self.paths,
            "lags": self.modulus.lags,
            "mean_square": self.modulus.mean_square,
        }


def holder_estimate(
    values: Union[ConvolutionPath, np.ndarray],
    dt: Optional[float] = None,
    lags: Optional[Sequence[int]] = None,
    mass: Optional[np.ndarray] = None,
) -> HolderReport:
    """
    Half the log-log slope of E||W(t+d) - W(t)||^2 over dyadic lags d.

    Args:
        values: A ConvolutionPath, or an array (paths, n+1, N) / (n+1, N)
        dt: Grid step (taken from the path when omitted)
        lags: Lags in grid steps (default 1, 2, ..., 32)
        mass: Weights of the squared norm

    Raises:
        StatisticsError: fewer than 6 lags or a degenerate regression
    """
    if isinstance(values, ConvolutionPath):
        dt = values.grid.dt
        values = values.values
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :, None]
    elif arr.ndim == 2:
        arr = arr[None]
    if dt is None:
        raise ConfigurationError("grid step dt is required for raw arrays")
    n = arr.shape[1] - 1
    lags = list(lags) if lags is not None else dyadic_lags(n, MIN_HOLDER_LAGS)
    if len(lags) < MIN_HOLDER_LAGS:
        raise StatisticsError(f"Holder regression needs >= {MIN_HOLDER_LAGS} lags, got {len(lags)}")
    modulus = increment_modulus(arr, dt, lags, norm_weights=mass)
    if modulus.fit is None or not math.isfinite(modulus.fit.slope):
        raise StatisticsError("degenerate Holder regression")
    return HolderReport(
        exponent=modulus.exponent,
        stderr=modulus.fit.slope_stderr / 2.0,
        modulus=modulus,
        paths=arr.shape[0],
    )


@dataclass
class SupMomentReport:
    p: float
    estimate: float
    stderr: float
    n: int
    half_estimate: float

    @property
    def relative_drift(self) -> float:
        if self.estimate == 0.0:
            return 0.0 if self.half_estimate == 0.0 else math.inf
        return abs(self.estimate - self.half_estimate) / abs(self.estimate)

    @property
    def stable(self) -> bool:
        return math.isfinite(self.estimate) and self.relative_drift <= 0.1

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "n": self.n,
            "half_sample_estimate": self.half_estimate,
            "stable": self.stable,
        }


def sup_moment(
    values: np.ndarray, p: float, hbound: float, mass: Optional[np.ndarray] = None
) -> SupMomentReport:
    """
    Monte-Carlo E sup_t ||W(t)||^p with its stderr and the half-sample estimate.

    Raises:
        PreconditionError: p <= 1/hbound
        StatisticsError: fewer than 2 paths
    """
    if not p > 1.0 / hbound:
        raise PreconditionError(f"p={p} must exceed 1/H = {1.0 / hbound:.6g}")
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 2:
        arr = arr[..., None]
    if arr.shape[0] < 2:
        raise StatisticsError("sup-moment needs at least 2 paths")
    weights = np.ones(arr.shape[-1]) if mass is None else np.asarray(mass)
    norms = np.sqrt(np.maximum((arr * arr) @ weights, 0.0))
    samples = np.max(norms, axis=1) ** p
    half = samples[: samples.size // 2]
    return SupMomentReport(
        p=p,
        estimate=float(samples.mean()),
        stderr=float(samples.std(ddof=1) / math.sqrt(samples.size)),
        n=int(samples.size),
        half_estimate=float(half.mean()) if half.size else float("nan"),
    )


def mean_square_modulus(
    values: np.ndarray, dt: float, lags: Sequence[int], mass: Optional[np.ndarray] = None
) -> List[float]:
    """E||W(t+d) - W(t)||^2 per lag (mean-square continuity check)."""
    return increment_modulus(np.asarray(values), dt, lags, norm_weights=mass).mean_square
