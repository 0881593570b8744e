"""
Covariance kernels of the scalar driving processes.

Three families are supported:

    fbm      fractional Brownian motion, H in [1/2, 1)
    bifbm    bifractional Brownian motion, H in (0, 1), K in (0, 1], 2HK > 1
    hermite  Hermite process of chaos order q, H in (1/2, 1); same covariance as fbm

All functions accept scalars or numpy arrays and broadcast like numpy ufuncs.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

from .errors import ConfigurationError, DiagonalSingularityError, DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class Family(str, Enum):
    """Noise family identifiers (the string value is what configs and CLI use)."""

    FBM = "fbm"
    BIFBM = "bifbm"
    HERMITE = "hermite"


@dataclass(frozen=True)
class CovarianceKernel:
    """
    Covariance R(s, t) of a scalar process together with its mixed density.

    Instances are immutable and hashable so they can key caches of Gram
    factorizations.

    Attributes:
        family: One of "fbm", "bifbm", "hermite"
        H: Hurst parameter
        K: Bifractional exponent (bifbm only, 1.0 otherwise)
        q: Chaos order (hermite only, 1 otherwise)
    """

    family: str
    H: float
    K: float = 1.0
    q: int = 1

    def __post_init__(self):
        try:
            fam = Family(self.family)
        except ValueError:
            raise ConfigurationError(
                f"unknown noise family {self.family!r}; expected one of "
                f"{', '.join(f.value for f in Family)}"
            ) from None
        # normalize enum members passed in place of strings
        object.__setattr__(self, "family", fam.value)
        H, K = float(self.H), float(self.K)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "K", K)

        if fam is Family.FBM:
            if not 0.5 <= H < 1.0:
                raise ConfigurationError(f"H={H} outside [1/2, 1) for family fbm")
        elif fam is Family.HERMITE:
            if not 0.5 < H < 1.0:
                raise ConfigurationError(f"H={H} outside (1/2, 1) for family hermite")
            if int(self.q) != self.q or self.q < 1:
                raise ConfigurationError(f"q={self.q} must be a positive integer")
            object.__setattr__(self, "q", int(self.q))
        else:
            if not 0.0 < H < 1.0:
                raise ConfigurationError(f"H={H} outside (0, 1) for family bifbm")
            if not 0.0 < K <= 1.0:
                raise ConfigurationError(f"K={K} outside (0, 1] for family bifbm")
            if 2.0 * H * K <= 1.0:
                raise ConfigurationError(f"2HK={2 * H * K:.6g} must exceed 1 for family bifbm")

        if fam is not Family.BIFBM and K != 1.0:
            raise ConfigurationError(f"K is only meaningful for bifbm (got K={K})")
        if fam is not Family.HERMITE and self.q != 1:
            raise ConfigurationError(f"q is only meaningful for hermite (got q={self.q})")

    @property
    def self_similarity(self) -> float:
        """Exponent of self-similarity (H, or HK for bifbm)."""
        return self.H * self.K

    @property
    def is_gaussian(self) -> bool:
        return self.family != Family.HERMITE.value or self.q == 1

    def label(self) -> str:
        if self.family == Family.BIFBM.value:
            return f"bifbm(H={self.H:g}, K={self.K:g})"
        if self.family == Family.HERMITE.value:
            return f"hermite(H={self.H:g}, q={self.q})"
        return f"fbm(H={self.H:g})"

    def to_dict(self) -> dict:
        return {"family": self.family, "H": self.H, "K": self.K, "q": self.q}


def fbm(H: float) -> CovarianceKernel:
    return CovarianceKernel("fbm", H)


def bifbm(H: float, K: float) -> CovarianceKernel:
    return CovarianceKernel("bifbm", H, K)


def hermite(H: float, q: int = 2) -> CovarianceKernel:
    return CovarianceKernel("hermite", H, q=q)


@dataclass(frozen=True)
class CovarianceBound:
    """
    Decomposition |d2R/dsdt| <= c1 |t-s|^(2 Hbound - 2) + c2 (st)^beta.

    c2 = 0 means there is no g term; beta is then a placeholder.
    """

    c1: float
    c2: float
    Hbound: float
    beta: float

    def evaluate(self, s: ArrayLike, t: ArrayLike) -> ArrayLike:
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        out = self.c1 * np.abs(t - s) ** (2.0 * self.Hbound - 2.0)
        if self.c2 != 0.0:
            out = out + self.c2 * (s * t) ** self.beta
        return out


def _as_times(s: ArrayLike, t: ArrayLike):
    s_arr = np.asarray(s, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    if np.any(s_arr < 0) or np.any(t_arr < 0):
        raise DomainError("covariance arguments must be non-negative times")
    return s_arr, t_arr


def _unwrap(value: np.ndarray) -> ArrayLike:
    return float(value) if value.ndim == 0 else value


def cov(kernel: CovarianceKernel, s: ArrayLike, t: ArrayLike) -> ArrayLike:
    """
    Evaluate R(s, t).

    Args:
        kernel: Covariance kernel
        s: First time (scalar or array)
        t: Second time (scalar or array)

    Returns:
        Covariance value(s), broadcast over s and t
    """
    s, t = _as_times(s, t)
    H, K = kernel.H, kernel.K
    if kernel.family == Family.BIFBM.value:
        value = 2.0**-K * ((t ** (2 * H) + s ** (2 * H)) ** K - np.abs(t - s) ** (2 * H * K))
    else:
        value = 0.5 * (s ** (2 * H) + t ** (2 * H) - np.abs(s - t) ** (2 * H))
    return _unwrap(value)


def cov_density(kernel: CovarianceKernel, s: ArrayLike, t: ArrayLike) -> ArrayLike:
    """
    Evaluate the mixed derivative d2R/dsdt off the diagonal.

    Raises:
        DiagonalSingularityError: if any s == t
    """
    s, t = _as_times(s, t)
    if np.any(s == t):
        raise DiagonalSingularityError("covariance density is singular on the diagonal s = t")
    H, K = kernel.H, kernel.K
    gap = np.abs(t - s)
    if kernel.family == Family.BIFBM.value:
        a = 2.0 * H * K
        value = 2.0**-K * a * (a - 1.0) * gap ** (a - 2.0)
        if K != 1.0:
            value = value + (
                4.0 * H * H * K * (K - 1.0) / 2.0**K
                * (s ** (2 * H) + t ** (2 * H)) ** (K - 2.0)
                * (s * t) ** (2 * H - 1.0)
            )
    else:
        value = H * (2.0 * H - 1.0) * gap ** (2.0 * H - 2.0)
    return _unwrap(np.asarray(value, dtype=float))


def default_bound(kernel: CovarianceKernel) -> CovarianceBound:
    """
    Constants of the |d2R/dsdt| bound for the kernel's family.

    For bifbm the g term comes from (s^2H + t^2H)^(K-2) <= 2^(K-2) (st)^(H(K-2)).
    """
    H, K = kernel.H, kernel.K
    if kernel.family == Family.BIFBM.value:
        return CovarianceBound(
            c1=2.0 ** (1.0 - K) * H * K * (2.0 * H * K - 1.0),
            c2=H * H * K * (1.0 - K),
            Hbound=H * K,
            beta=H * K - 1.0,
        )
    return CovarianceBound(c1=2.0 * H * (2.0 * H - 1.0), c2=0.0, Hbound=H, beta=-0.5)


def gram(kernel: CovarianceKernel, times: np.ndarray) -> np.ndarray:
    """Covariance matrix [R(t_i, t_j)] for a vector of times."""
    times = np.asarray(times, dtype=float)
    return np.asarray(cov(kernel, times[:, None], times[None, :]))


def rectangle_measure(
    kernel: CovarianceKernel, a: ArrayLike, b: ArrayLike, c: ArrayLike, d: ArrayLike
) -> ArrayLike:
    """
    Covariance measure of [a, b) x [c, d): R(b,d) - R(a,d) - R(b,c) + R(a,c).

    This is E[(X_b - X_a)(X_d - X_c)] and equals the integral of the
    density over the rectangle, diagonal included.
    """
    value = (
        np.asarray(cov(kernel, b, d))
        - np.asarray(cov(kernel, a, d))
        - np.asarray(cov(kernel, b, c))
        + np.asarray(cov(kernel, a, c))
    )
    return _unwrap(value)
