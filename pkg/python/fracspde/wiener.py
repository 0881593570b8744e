"""
Wiener integrals of deterministic integrands against the driving processes.

The inner product <f, h>_H = int int f(u) h(v) d2R/dudv du dv is evaluated
on a cell partition of [0, T]: the power-law part of the density is
integrated exactly per pair of cells (closed-form rectangle measure, so the
diagonal singularity is absorbed), the bounded g part of bifbm by an 8-point
tensor Gauss rule.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .covariance import CovarianceKernel, Family
from .errors import ConfigurationError, GridMismatchError, NotInHError, StatisticsError
from .noise1d import NoisePath, TimeGrid, check_hermite_resolution, hermite_table

logger = logging.getLogger(__name__)

GAUSS_ORDER = 8
DEFAULT_CELLS = 128
MIN_HYPER_SAMPLES = 10_000
# sup of E X^4 / (E X^2)^2 over the m-th chaos: Gaussian for m = 1, a centered
# chi-square direction for m = 2
HYPER_BOUNDS = {1: 3.0, 2: 15.0}

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(GAUSS_ORDER)


# =============================================================================
# Integrands
# =============================================================================
@dataclass(frozen=True)
class StepFunction:
    """
    f = sum_i c_i 1_[t_i, t_{i+1}) on right-open pieces.

    Attributes:
        breakpoints: 0 <= t_0 < t_1 < ... < t_n
        coeffs: c_0..c_{n-1}
    """

    breakpoints: tuple
    coeffs: tuple

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        cs = tuple(float(c) for c in self.coeffs)
        if len(bp) < 2 or len(cs) != len(bp) - 1:
            raise ConfigurationError("step function needs n+1 breakpoints and n coefficients")
        if bp[0] < 0 or any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])):
            raise ConfigurationError("breakpoints must be non-negative and strictly increasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "coeffs", cs)

    @classmethod
    def indicator(cls, a: float, b: float, scale: float = 1.0) -> "StepFunction":
        """scale * 1_[a, b)."""
        if a == 0.0:
            return cls((0.0, b), (scale,))
        return cls((0.0, a, b), (0.0, scale))

    @classmethod
    def zero(cls, T: float) -> "StepFunction":
        return cls((0.0, T), (0.0,))

    @property
    def T(self) -> float:
        return self.breakpoints[-1]

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        bp = np.asarray(self.breakpoints)
        idx = np.searchsorted(bp, t_arr, side="right") - 1
        inside = (idx >= 0) & (idx < len(self.coeffs))
        out = np.where(inside, np.asarray(self.coeffs)[np.clip(idx, 0, len(self.coeffs) - 1)], 0.0)
        return float(out) if out.ndim == 0 else out

    def combine(self, other: "StepFunction", a: float = 1.0, b: float = 1.0) -> "StepFunction":
        """a * self + b * other on the merged breakpoints."""
        bp = np.union1d(self.breakpoints, other.breakpoints)
        mids = 0.5 * (bp[:-1] + bp[1:])
        coeffs = a * np.asarray(self(mids)) + b * np.asarray(other(mids))
        return StepFunction(tuple(bp), tuple(coeffs))


@dataclass(frozen=True)
class Integrand:
    """A step function or a bounded callable on [0, T]."""

    T: float
    step: Optional[StepFunction] = None
    func: Optional[Callable] = None
    bound: float = math.inf

    @classmethod
    def from_step(cls, step: StepFunction) -> "Integrand":
        bound = max((abs(c) for c in step.coeffs), default=0.0)
        return cls(T=step.T, step=step, bound=bound)

    @classmethod
    def from_callable(cls, func: Callable, T: float, bound: Optional[float] = None) -> "Integrand":
        if bound is not None:
            sampled = np.asarray(func(np.linspace(0.0, T, 1025)), dtype=float)
            if np.any(np.abs(sampled) > bound * (1 + 1e-12)):
                raise ConfigurationError(f"integrand exceeds its declared bound {bound}")
        return cls(T=float(T), func=func, bound=math.inf if bound is None else float(bound))

    @property
    def is_step(self) -> bool:
        return self.step is not None

    def __call__(self, t):
        if self.step is not None:
            return self.step(t)
        t_arr = np.asarray(t, dtype=float)
        values = np.where(t_arr <= self.T, np.asarray(self.func(t_arr), dtype=float), 0.0)
        return float(values) if values.ndim == 0 else values


IntegrandLike = Union[Integrand, StepFunction]


def as_integrand(f: IntegrandLike) -> Integrand:
    return f if isinstance(f, Integrand) else Integrand.from_step(f)


# =============================================================================
# Inner products
# =============================================================================
def _power_measure(edges: np.ndarray, exponent: float) -> np.ndarray:
    """
    Rectangle measures of d2/dsdt [-|s-t|^a / 2] over all pairs of cells.

    Includes the diagonal cells, where the density is singular.
    """
    D = np.abs(edges[:, None] - edges[None, :]) ** exponent
    return 0.5 * (D[1:, :-1] + D[:-1, 1:] - D[1:, 1:] - D[:-1, :-1])


def _cell_edges(f: Integrand, h: Integrand, cells: int) -> np.ndarray:
    T = max(f.T, h.T)
    edges = np.linspace(0.0, T, cells + 1)
    for g in (f, h):
        if g.step is not None:
            edges = np.union1d(edges, g.step.breakpoints)
    return edges[edges <= T]


def _gauss_nodes(edges: np.ndarray):
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GAUSS_X[None, :]).ravel()
    weights = (half[:, None] * _GAUSS_W[None, :]).ravel()
    return nodes, weights


def _cell_averages(g: Integrand, edges: np.ndarray) -> np.ndarray:
    if g.step is not None:
        return np.asarray(g.step(0.5 * (edges[1:] + edges[:-1])), dtype=float)
    nodes, weights = _gauss_nodes(edges)
    values = np.asarray(g(nodes), dtype=float).reshape(-1, GAUSS_ORDER)
    return (values * weights.reshape(-1, GAUSS_ORDER)).sum(axis=1) / np.diff(edges)


def _g_density(kernel: CovarianceKernel, s: np.ndarray, t: np.ndarray) -> np.ndarray:
    H, K = kernel.H, kernel.K
    return (
        4.0 * H * H * K * (K - 1.0) / 2.0**K
        * (s ** (2 * H) + t ** (2 * H)) ** (K - 2.0)
        * (s * t) ** (2 * H - 1.0)
    )


def _has_g_part(kernel: CovarianceKernel) -> bool:
    return kernel.family == Family.BIFBM.value and kernel.K != 1.0


def _power_part(kernel: CovarianceKernel):
    """(prefactor, exponent) of the |s-t| part: density = pref * a(a-1)|s-t|^(a-2) / 2."""
    if kernel.family == Family.BIFBM.value:
        return 2.0 ** (1.0 - kernel.K), 2.0 * kernel.H * kernel.K
    return 1.0, 2.0 * kernel.H


def _pairing(
    f: Integrand, h: Integrand, kernel: CovarianceKernel, cells: int, absolute: bool
) -> float:
    edges = _cell_edges(f, h, cells)
    fbar = _cell_averages(f, edges)
    hbar = _cell_averages(h, edges)
    pref, exponent = _power_part(kernel)
    mu = pref * _power_measure(edges, exponent)
    if absolute:
        value = float(np.abs(fbar) @ mu @ np.abs(hbar))
    else:
        value = float(fbar @ mu @ hbar)
    if _has_g_part(kernel):
        nodes, weights = _gauss_nodes(edges)
        fw = np.asarray(f(nodes), dtype=float) * weights
        hw = np.asarray(h(nodes), dtype=float) * weights
        g = _g_density(kernel, nodes[:, None], nodes[None, :])
        if absolute:
            value += float(np.abs(fw) @ np.abs(g) @ np.abs(hw))
        else:
            value += float(fw @ g @ hw)
    return value


def _refined(
    f: Integrand, h: Integrand, kernel: CovarianceKernel, cells: Optional[int], absolute: bool
) -> float:
    exact_projection = f.is_step and h.is_step and not _has_g_part(kernel)
    n0 = cells or DEFAULT_CELLS
    coarse = _pairing(f, h, kernel, n0, absolute)
    if exact_projection:
        return coarse
    fine = _pairing(f, h, kernel, 2 * n0, absolute)
    if not (math.isfinite(coarse) and math.isfinite(fine)):
        raise NotInHError("integrand produced a non-finite |H| quadrature")
    scale = max(abs(fine), abs(coarse), 1e-300)
    if abs(fine - coarse) > 0.1 * scale and abs(fine - coarse) > 1e-12:
        raise NotInHError(
            f"|H| quadrature not Cauchy under refinement ({coarse:.6g} -> {fine:.6g})"
        )
    return fine


def h_inner(
    f: IntegrandLike, h: IntegrandLike, kernel: CovarianceKernel, cells: Optional[int] = None
) -> float:
    """
    <f, h>_H for the covariance structure of ``kernel``.

    Args:
        f: First integrand
        h: Second integrand
        kernel: Covariance kernel
        cells: Base number of uniform cells (callables are refined once more)

    Returns:
        The inner product

    Raises:
        NotInHError: the quadrature does not settle under refinement
    """
    fi, hi = as_integrand(f), as_integrand(h)
    if kernel.family == Family.HERMITE.value:
        kernel = CovarianceKernel("fbm", kernel.H)
    _abs_norm_finite(fi, kernel, cells)
    if fi is not hi:
        _abs_norm_finite(hi, kernel, cells)
    return _refined(fi, hi, kernel, cells, absolute=False)


def _abs_norm_finite(f: Integrand, kernel: CovarianceKernel, cells: Optional[int]) -> float:
    return _refined(f, f, kernel, cells, absolute=True)


def h_norm(f: IntegrandLike, kernel: CovarianceKernel, cells: Optional[int] = None) -> float:
    """||f||_H."""
    return math.sqrt(max(h_inner(f, f, kernel, cells), 0.0))


def abs_h_norm(f: IntegrandLike, kernel: CovarianceKernel, cells: Optional[int] = None) -> float:
    """||f||_|H| = (int int |f(u) f(v)| |d2R/dudv| du dv)^(1/2)."""
    if kernel.family == Family.HERMITE.value:
        kernel = CovarianceKernel("fbm", kernel.H)
    return math.sqrt(_refined(as_integrand(f), as_integrand(f), kernel, cells, absolute=True))


# =============================================================================
# Pathwise integrals
# =============================================================================
def step_weights(f: StepFunction, grid: TimeGrid) -> np.ndarray:
    """
    Coefficient of each grid increment in I(f) after snapping breakpoints.

    Raises:
        GridMismatchError: a breakpoint is off-grid or two breakpoints collapse
    """
    indices = [grid.snap(b) for b in f.breakpoints]
    weights = np.zeros(grid.n)
    for (i0, i1), c in zip(zip(indices, indices[1:]), f.coeffs):
        if i1 <= i0:
            raise GridMismatchError(
                f"step piece collapses after snapping to the grid (indices {i0}, {i1})"
            )
        weights[i0:i1] = c
    return weights


def riemann_stieltjes(weights: np.ndarray, values: np.ndarray) -> Union[float, np.ndarray]:
    """sum_i w_i (X_{t_{i+1}} - X_{t_i}) for one path or a batch (last axis = time)."""
    result = np.diff(values, axis=-1) @ weights
    return float(result) if np.ndim(result) == 0 else result


def wiener_integral_step(f: StepFunction, path: NoisePath) -> float:
    """I(f) = sum c_i (X_{t_{i+1}} - X_{t_i}) over the path grid."""
    return float(riemann_stieltjes(step_weights(f, path.grid), path.values))


def fn_weights(f: IntegrandLike, grid: TimeGrid) -> np.ndarray:
    """Left-point step approximation of f on the grid."""
    fi = as_integrand(f)
    if fi.step is not None:
        return step_weights(fi.step, grid)
    return np.asarray(fi(grid.points[:-1]), dtype=float)


def wiener_integral_fn(f: IntegrandLike, path: NoisePath) -> float:
    """I(f) through the left-point step function of f on the path grid."""
    return float(riemann_stieltjes(fn_weights(f, path.grid), path.values))


# =============================================================================
# Hermite transfer operator
# =============================================================================
@dataclass
class TransferKernel:
    """
    Discretized transfer kernel I(f)(y_1..y_q) = int_{max y}^T f(u) prod dK(u, y_j) du.

    ``node_weights`` carry the u-quadrature weights times f; ``scale`` is
    d(H) T^H from the unit-interval representation.
    """

    H: float
    q: int
    T: float
    m_inner: int
    node_weights: np.ndarray
    scale: float
    table: object

    def tabulate(self) -> np.ndarray:
        """Symmetric kernel values on the inner cells (vector for q=1, matrix for q=2)."""
        phi = self.table.phi
        if self.q == 1:
            return self.scale * (phi.T @ self.node_weights)
        return self.scale * (phi.T @ (self.node_weights[:, None] * phi))

    def integral(self, increments: np.ndarray) -> Union[float, np.ndarray]:
        """Discrete multiple integral against inner Brownian increments (one or a batch)."""
        block = np.atleast_2d(increments)
        values = self.scale * (self.table.chaos(block) @ self.node_weights)
        return float(values[0]) if np.ndim(increments) == 1 else values


def transfer_operator(
    f: IntegrandLike,
    H: float,
    q: int,
    m_inner: int,
    T: float = 1.0,
    grid: Optional[TimeGrid] = None,
) -> TransferKernel:
    """
    Tabulate the Hermite transfer kernel of f.

    Raises:
        ConfigurationError: q outside {1, 2}
        ResolutionError: as for Hermite sampling
    """
    if q not in (1, 2):
        raise ConfigurationError(f"transfer operator is tabulated for q in {{1, 2}}, got {q}")
    if grid is not None:
        check_hermite_resolution(grid, m_inner)
        T = grid.T
    table = hermite_table(H, q, m_inner)
    fi = as_integrand(f)
    node_weights = table.weights * np.asarray(fi(T * table.nodes), dtype=float)
    return TransferKernel(
        H=H,
        q=q,
        T=T,
        m_inner=m_inner,
        node_weights=node_weights,
        scale=table.d * T**H,
        table=table,
    )


def transfer_integral(kernel: TransferKernel, path: NoisePath) -> float:
    """Evaluate the transfer kernel against the increments that built ``path``."""
    if path.inner_increments is None or path.m_inner != kernel.m_inner:
        raise GridMismatchError("path carries no inner increments at this resolution")
    return float(kernel.integral(path.inner_increments))


# =============================================================================
# Hypercontractivity
# =============================================================================
@dataclass
class HypercontractivityReport:
    order: int
    ratio: float
    stderr: float
    bound: float
    n: int

    @property
    def within_bound(self) -> bool:
        return math.isfinite(self.ratio) and self.ratio <= self.bound + 3.0 * self.stderr

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "estimate": self.ratio,
            "stderr": self.stderr,
            "bound": self.bound,
            "n": self.n,
            "within_bound": self.within_bound,
        }


def hypercontractivity_check(samples: Sequence[float], m: int) -> HypercontractivityReport:
    """
    Fourth-to-second moment ratio E I^4 / (E I^2)^2 of samples from the m-th chaos.

    Within a fixed chaos all L^p norms are equivalent; the L^4 / L^2 ratio is
    compared with its supremum over the chaos, 3 for m = 1 and 15 for m = 2.
    The standard error follows from the delta method on the two sample means.

    Raises:
        ConfigurationError: m outside {1, 2}
        StatisticsError: fewer than 10^4 samples or zero second moment
    """
    if m not in HYPER_BOUNDS:
        raise ConfigurationError(f"chaos order m={m} not in {{1, 2}}")
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < MIN_HYPER_SAMPLES:
        raise StatisticsError(f"need >= {MIN_HYPER_SAMPLES} samples, got {x.size}")
    second = x * x
    high = second * second
    A, B = float(high.mean()), float(second.mean())
    if B == 0.0:
        raise StatisticsError("second moment is zero; moment ratio undefined")
    ratio = A / B**2
    grad = np.array([1.0 / B**2, -2.0 * A / B**3])
    cov = np.cov(np.vstack([high, second])) / x.size
    stderr = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    logger.debug("hypercontractivity m=%d: ratio %.4f +/- %.4f", m, ratio, stderr)
    return HypercontractivityReport(
        order=m, ratio=ratio, stderr=stderr, bound=HYPER_BOUNDS[m], n=int(x.size)
    )
