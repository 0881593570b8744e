"""
Sampling of scalar driving paths on a uniform time grid.

Gaussian families (fbm, bifbm) are drawn exactly through a Cholesky factor of
the covariance matrix on the grid. Hermite processes are built from a
discretized q-fold Wiener-Ito integral of the tensorized fBm kernel on [0, 1]
and rescaled to [0, T] by self-similarity.

Seeds: path ``i`` of a batch drawn with ``seed`` is the single path drawn with
``path_seed(seed, i)``, so batches and single draws are interchangeable.
"""

import hashlib
import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, linalg, special

from .covariance import CovarianceKernel, Family, gram
from .errors import (
    ConfigurationError,
    DomainError,
    GridMismatchError,
    NumericalPSDError,
    ResolutionError,
    UnsupportedError,
)
from .stats import increment_modulus

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1

# Max Cholesky size for the dense Gaussian sampler
MAX_GAUSSIAN_POINTS = 4096

# Sub-nodes per inner cell in the graded u-quadrature
DEFAULT_SUBNODES = 3

# Graded meshes beyond this exponent only produce underflowing nodes
MAX_GRADING = 8.0


# =============================================================================
# Grids and paths
# =============================================================================
@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_i = i T / n, i = 0..n."""

    T: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ConfigurationError(f"grid size n={self.n} must be a positive integer")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigurationError(f"horizon T={self.T} must be positive and finite")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "T", float(self.T))

    @property
    def dt(self) -> float:
        return self.T / self.n

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.n + 1) * (self.T / self.n)

    def snap(self, t: float) -> int:
        """
        Index of the grid point nearest to t (round half up).

        Raises:
            GridMismatchError: t is more than half a step away from the grid
        """
        pos = t / self.dt
        idx = int(math.floor(pos + 0.5))
        if idx < 0 or idx > self.n:
            raise GridMismatchError(f"time {t} lies outside the grid [0, {self.T}]")
        if abs(pos - idx) > 0.5 + 1e-9:
            raise GridMismatchError(f"time {t} is more than half a step off the grid")
        return idx

    def matches(self, other: "TimeGrid") -> bool:
        return self.n == other.n and math.isclose(self.T, other.T, rel_tol=1e-12)


@dataclass
class NoisePath:
    """
    One sampled trajectory of a scalar driving process.

    Attributes:
        grid: Time grid
        values: Path values at the grid points (values[0] == 0)
        kernel: Covariance kernel describing the family and parameters
        seed: Seed the path was drawn with
        inner_increments: Brownian increments on the inner grid (Hermite only)
    """

    grid: TimeGrid
    values: np.ndarray
    kernel: CovarianceKernel
    seed: int
    inner_increments: Optional[np.ndarray] = None
    m_inner: Optional[int] = None

    @property
    def family(self) -> str:
        return self.kernel.family

    @property
    def params(self) -> Dict[str, float]:
        return self.kernel.to_dict()

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def rows(self):
        """(t, value) pairs for export."""
        return zip(self.grid.points, self.values)


def path_seed(seed: int, index: int) -> int:
    """Seed of path ``index`` in a stream: 64-bit hash of seed XOR index."""
    mixed = (int(seed) ^ int(index)) & MASK64
    digest = hashlib.blake2b(mixed.to_bytes(8, "little"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & MASK64)


# =============================================================================
# Gaussian families
# =============================================================================
def _cholesky_with_jitter(matrix: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(matrix, lower=True, check_finite=False)
    except linalg.LinAlgError:
        pass
    size = matrix.shape[0]
    jitter = 1e-8 * float(np.trace(matrix)) / size
    logger.debug("Cholesky failed, retrying with diagonal jitter %.3e", jitter)
    warnings.warn(
        f"covariance matrix not numerically positive definite; added jitter {jitter:.3e}",
        RuntimeWarning,
        stacklevel=3,
    )
    try:
        return linalg.cholesky(
            matrix + jitter * np.eye(size), lower=True, check_finite=False
        )
    except linalg.LinAlgError as exc:
        raise NumericalPSDError(
            f"Cholesky factorization failed after jitter {jitter:.3e}"
        ) from exc


@lru_cache(maxsize=16)
def _gram_factor(kernel: CovarianceKernel, T: float, n: int) -> np.ndarray:
    times = np.arange(1, n + 1) * (T / n)
    logger.debug("factorizing %dx%d Gram matrix for %s", n, n, kernel.label())
    return _cholesky_with_jitter(gram(kernel, times))


def gaussian_factor(kernel: CovarianceKernel, grid: TimeGrid) -> np.ndarray:
    """Lower Cholesky factor of [R(t_i, t_j)], i, j = 1..n (cached)."""
    if kernel.family == Family.HERMITE.value:
        raise ConfigurationError("hermite paths are drawn with sample_hermite")
    if grid.n > MAX_GAUSSIAN_POINTS:
        raise ResolutionError(
            f"dense Gaussian sampler supports n <= {MAX_GAUSSIAN_POINTS}, got {grid.n}"
        )
    return _gram_factor(kernel, grid.T, grid.n)


def _gaussian_from_normals(factor: np.ndarray, normals: np.ndarray) -> np.ndarray:
    values = np.zeros((normals.shape[0], factor.shape[0] + 1))
    values[:, 1:] = normals @ factor.T
    return values


def sample_gaussian(kernel: CovarianceKernel, grid: TimeGrid, seed: int) -> NoisePath:
    """
    Draw one path of a centred Gaussian process (fbm or bifbm).

    Args:
        kernel: Covariance kernel (family fbm or bifbm)
        grid: Time grid
        seed: 64-bit seed

    Returns:
        NoisePath with values[0] == 0
    """
    factor = gaussian_factor(kernel, grid)
    normals = _rng(seed).standard_normal((1, grid.n))
    values = _gaussian_from_normals(factor, normals)[0]
    return NoisePath(grid=grid, values=values, kernel=kernel, seed=int(seed))


def sample_gaussian_batch(
    kernel: CovarianceKernel, grid: TimeGrid, seed: int, n_paths: int, start: int = 0
) -> np.ndarray:
    """Paths start..start+n_paths-1 of the stream ``seed`` as an (n_paths, n+1) array."""
    factor = gaussian_factor(kernel, grid)
    normals = np.empty((n_paths, grid.n))
    for i in range(n_paths):
        normals[i] = _rng(path_seed(seed, start + i)).standard_normal(grid.n)
    return _gaussian_from_normals(factor, normals)


# =============================================================================
# fBm kernel machinery
# =============================================================================
@dataclass(frozen=True)
class FbmKernelSpec:
    """
    Kernel K^{H'}(t, y) of the representation B^{H'}_t = int_0^t K^{H'}(t, y) dW_y.

    Attributes:
        H_prime: Hurst index of the kernel, in (1/2, 1)
        c: Normalizing constant c_{H'}
    """

    H_prime: float
    c: float

    @classmethod
    def for_hurst(cls, H_prime: float) -> "FbmKernelSpec":
        if not 0.5 < H_prime < 1.0:
            raise ConfigurationError(f"kernel index H'={H_prime} outside (1/2, 1)")
        c = math.sqrt(H_prime * (2 * H_prime - 1) / special.beta(2 - 2 * H_prime, H_prime - 0.5))
        return cls(H_prime=H_prime, c=c)

    @classmethod
    def for_hermite(cls, H: float, q: int) -> "FbmKernelSpec":
        """Kernel of a Hermite process of order q: H' = 1 + (H - 1)/q."""
        return cls.for_hurst(hermite_index(H, q))


def hermite_index(H: float, q: int) -> float:
    return 1.0 + (H - 1.0) / q


def kernel_derivative(spec: FbmKernelSpec, u, y):
    """
    d/du K^{H'}(u, y) = c (y/u)^(1/2 - H') (u - y)^(H' - 3/2) for 0 < y < u.

    Raises:
        DomainError: any y >= u or y <= 0
    """
    u_arr = np.asarray(u, dtype=float)
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr >= u_arr) or np.any(y_arr <= 0):
        raise DomainError("kernel derivative requires 0 < y < u")
    Hp = spec.H_prime
    value = spec.c * (y_arr / u_arr) ** (0.5 - Hp) * (u_arr - y_arr) ** (Hp - 1.5)
    return float(value) if value.ndim == 0 else value


def fbm_kernel(spec: FbmKernelSpec, t: float, y: float) -> float:
    """K^{H'}(t, y) = int_y^t d/du K^{H'}(u, y) du, by algebraic-weight quadrature."""
    if not 0 < y < t:
        return 0.0
    Hp = spec.H_prime

    def smooth(u):
        return spec.c * y ** (0.5 - Hp) * u ** (Hp - 0.5)

    value, _ = integrate.quad(smooth, y, t, weight="alg", wvar=(Hp - 1.5, 0.0))
    return float(value)


def cell_kernel(spec: FbmKernelSpec, u: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Exact int_{[a, b) cap (0, u)} d/du K^{H'}(u, y) dy, via the incomplete Beta function.
    """
    Hp = spec.H_prime
    p, r = 1.5 - Hp, Hp - 0.5
    u = np.asarray(u, dtype=float)
    lo = np.clip(np.asarray(a, dtype=float) / u, 0.0, 1.0)
    hi = np.clip(np.asarray(b, dtype=float) / u, 0.0, 1.0)
    scale = spec.c * special.beta(p, r) * u**r
    return scale * (special.betainc(p, r, hi) - special.betainc(p, r, lo))


# =============================================================================
# Hermite processes
# =============================================================================
DIAGONAL_MODES = ("wick", "exclude")


@dataclass
class HermiteTable:
    """
    Discretized defining kernel of a Hermite process on [0, 1].

    Row r of ``phi`` holds the inner-cell averages of d/du K^{H'}(u_r, .) at
    quadrature node u_r; ``weights`` are the graded u-quadrature weights.
    """

    H: float
    q: int
    m_inner: int
    subnodes: int
    diagonal: str
    spec: FbmKernelSpec
    nodes: np.ndarray
    weights: np.ndarray
    phi: np.ndarray
    sigma2: np.ndarray
    d: float = field(default=float("nan"))

    @property
    def dy(self) -> float:
        return 1.0 / self.m_inner

    def output_index(self, n: int) -> np.ndarray:
        """Cumulative node counts at the unit-interval times i/n."""
        if self.m_inner % n:
            raise ResolutionError(f"m_inner={self.m_inner} is not a multiple of n={n}")
        per_step = (self.m_inner // n) * self.subnodes
        return np.arange(n + 1) * per_step

    def chaos(self, increments: np.ndarray, values: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Per-node chaos terms for a block of increment vectors.

        With the default Wick mode row r gives the q-fold multiple integral of
        the rank-one kernel phi_r^{(x)q}; with ``exclude`` the diagonal cells are
        dropped instead (q <= 2).
        """
        G = increments @ self.phi.T
        if self.q == 1:
            return G
        if self.diagonal == "exclude":
            return G * G - (increments * increments) @ (self.phi * self.phi).T
        prev, cur = np.ones_like(G), G
        for k in range(1, self.q):
            prev, cur = cur, G * cur - k * self.sigma2 * prev
        return cur


def _cell_averages(spec: FbmKernelSpec, nodes: np.ndarray, m: int) -> np.ndarray:
    # incomplete Beta at every cell edge, differenced: one evaluation per edge
    Hp = spec.H_prime
    p, r = 1.5 - Hp, Hp - 0.5
    ratio = np.clip((np.arange(m + 1) / m)[None, :] / nodes[:, None], 0.0, 1.0)
    cumulative = special.betainc(p, r, ratio)
    scale = spec.c * special.beta(p, r) * nodes**r * m
    return scale[:, None] * np.diff(cumulative, axis=1)


def _graded_quadrature(m: int, subnodes: int, H_prime: float) -> Tuple[np.ndarray, np.ndarray]:
    grading = min(2.0 / (2.0 * H_prime - 1.0), MAX_GRADING)
    edges = (np.arange(subnodes + 1) / subnodes) ** grading
    mids = ((np.arange(subnodes) + 0.5) / subnodes) ** grading
    dy = 1.0 / m
    nodes = ((np.arange(m)[:, None] + mids[None, :]) * dy).ravel()
    weights = np.tile(np.diff(edges), m) * dy
    return nodes, weights


def _discrete_variance(table: HermiteTable) -> float:
    phi, w, dy, q = table.phi, table.weights, table.dy, table.q
    if q == 1:
        a = phi.T @ w
        return float(dy * np.dot(a, a))
    if q == 2:
        M = phi.T @ (w[:, None] * phi)
        total = float(np.sum(M * M))
        if table.diagonal == "exclude":
            total -= float(np.sum(np.diag(M) ** 2))
        return 2.0 * dy * dy * total
    S = dy * (phi @ phi.T)
    return float(math.factorial(q) * (w @ (S**q) @ w))


@lru_cache(maxsize=8)
def hermite_table(
    H: float,
    q: int,
    m_inner: int,
    subnodes: int = DEFAULT_SUBNODES,
    diagonal: str = "wick",
) -> HermiteTable:
    """
    Build (and cache) the discretized Hermite kernel and its normalization.

    Raises:
        ConfigurationError: H outside (1/2, 1) or unknown diagonal mode
        UnsupportedError: q outside the supported range
        ResolutionError: m_inner too small or the variance quadrature degenerates
    """
    if not 0.5 < H < 1.0:
        raise ConfigurationError(f"H={H} outside (1/2, 1) for family hermite")
    if int(q) != q or q < 1:
        raise UnsupportedError(f"Hermite order q={q} is not supported")
    if q > 4:
        raise UnsupportedError(f"Hermite order q={q} is not supported (q <= 4)")
    if diagonal not in DIAGONAL_MODES:
        raise ConfigurationError(f"diagonal mode {diagonal!r} not in {DIAGONAL_MODES}")
    if diagonal == "exclude" and q > 2:
        raise UnsupportedError("diagonal exclusion is implemented for q <= 2")
    if m_inner < 8:
        raise ResolutionError(f"m_inner={m_inner} is too small (need >= 8)")

    spec = FbmKernelSpec.for_hermite(H, q)
    nodes, weights = _graded_quadrature(m_inner, subnodes, spec.H_prime)
    phi = _cell_averages(spec, nodes, m_inner)
    sigma2 = np.sum(phi * phi, axis=1) / m_inner

    table = HermiteTable(
        H=float(H),
        q=int(q),
        m_inner=int(m_inner),
        subnodes=int(subnodes),
        diagonal=diagonal,
        spec=spec,
        nodes=nodes,
        weights=weights,
        phi=phi,
        sigma2=sigma2,
    )
    variance = _discrete_variance(table)
    if not (math.isfinite(variance) and variance > 0):
        raise ResolutionError(f"Hermite variance quadrature degenerated ({variance})")
    table.d = 1.0 / math.sqrt(variance)
    logger.debug(
        "Hermite table H=%g q=%d m=%d: %d nodes, d(H)=%.6f", H, q, m_inner, nodes.size, table.d
    )
    return table


def normalization_constant(
    H: float, q: int, m_inner: int, subnodes: int = DEFAULT_SUBNODES, diagonal: str = "wick"
) -> float:
    """d(H) making the discretized Var(Z_1) equal to 1 (deterministic, no Monte Carlo)."""
    return hermite_table(H, q, m_inner, subnodes, diagonal).d


def hermite_variance_closed_form(H: float, q: int) -> float:
    """Continuum normalization d(H) = sqrt(H(2H-1) / (q! (H'(2H'-1))^q))."""
    Hp = hermite_index(H, q)
    return math.sqrt(H * (2 * H - 1) / (math.factorial(q) * (Hp * (2 * Hp - 1)) ** q))


def check_hermite_resolution(grid: TimeGrid, m_inner: int) -> None:
    if m_inner < 2 * grid.n:
        raise ResolutionError(f"m_inner={m_inner} must be at least 2n={2 * grid.n}")
    if m_inner % grid.n:
        raise ResolutionError(f"m_inner={m_inner} must be a multiple of n={grid.n}")


def default_m_inner(n: int, minimum: int = 256) -> int:
    """Smallest multiple of n that is >= max(2n, minimum)."""
    return n * max(2, -(-minimum // n))


def hermite_increments(m_inner: int, seed: int) -> np.ndarray:
    return _rng(seed).standard_normal(m_inner) * math.sqrt(1.0 / m_inner)


def _hermite_values(
    table: HermiteTable, increments: np.ndarray, grid: TimeGrid
) -> np.ndarray:
    index = table.output_index(grid.n)
    scale = table.d * grid.T**table.H
    chunk = max(1, 4_000_000 // table.nodes.size)
    out = np.empty((increments.shape[0], grid.n + 1))
    for start in range(0, increments.shape[0], chunk):
        block = increments[start : start + chunk]
        terms = table.chaos(block) * table.weights
        cumulative = np.zeros((block.shape[0], terms.shape[1] + 1))
        np.cumsum(terms, axis=1, out=cumulative[:, 1:])
        out[start : start + chunk] = scale * cumulative[:, index]
    return out


def sample_hermite(
    H: float,
    q: int,
    grid: TimeGrid,
    m_inner: int,
    seed: int,
    subnodes: int = DEFAULT_SUBNODES,
    diagonal: str = "wick",
) -> NoisePath:
    """
    Draw one Hermite path of order q and self-similarity H on ``grid``.

    The inner Brownian increments are kept on the path so Wiener integrals can
    be recomputed against the same randomness.

    ``diagonal`` defaults to "wick": each node term is the exact multiple Ito
    integral of the step kernel, a Hermite polynomial of the projected
    Gaussian. "exclude" instead drops the diagonal cells of the discrete sum
    (q <= 2).
    """
    check_hermite_resolution(grid, m_inner)
    table = hermite_table(H, q, m_inner, subnodes, diagonal)
    increments = hermite_increments(m_inner, seed)
    values = _hermite_values(table, increments[None, :], grid)[0]
    return NoisePath(
        grid=grid,
        values=values,
        kernel=CovarianceKernel("hermite", H, q=q),
        seed=int(seed),
        inner_increments=increments,
        m_inner=m_inner,
    )


def sample_hermite_batch(
    H: float,
    q: int,
    grid: TimeGrid,
    m_inner: int,
    seed: int,
    n_paths: int,
    start: int = 0,
    subnodes: int = DEFAULT_SUBNODES,
    diagonal: str = "wick",
    return_increments: bool = False,
) -> Union[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    check_hermite_resolution(grid, m_inner)
    table = hermite_table(H, q, m_inner, subnodes, diagonal)
    increments = np.stack(
        [hermite_increments(m_inner, path_seed(seed, start + i)) for i in range(n_paths)]
    )
    values = _hermite_values(table, increments, grid)
    if return_increments:
        return values, increments
    return values


# =============================================================================
# Family dispatch
# =============================================================================
def sample_path(
    kernel: CovarianceKernel, grid: TimeGrid, seed: int, m_inner: Optional[int] = None
) -> NoisePath:
    if kernel.family == Family.HERMITE.value:
        m = m_inner if m_inner is not None else default_m_inner(grid.n)
        return sample_hermite(kernel.H, kernel.q, grid, m, seed)
    return sample_gaussian(kernel, grid, seed)


def sample_paths(
    kernel: CovarianceKernel,
    grid: TimeGrid,
    seed: int,
    n_paths: int,
    m_inner: Optional[int] = None,
    start: int = 0,
) -> np.ndarray:
    """(n_paths, n+1) array of paths from the stream ``seed`` for any family."""
    if kernel.family == Family.HERMITE.value:
        m = m_inner if m_inner is not None else default_m_inner(grid.n)
        values = sample_hermite_batch(kernel.H, kernel.q, grid, m, seed, n_paths, start=start)
        return np.asarray(values)
    return sample_gaussian_batch(kernel, grid, seed, n_paths, start=start)


def estimate_hurst(values: np.ndarray, grid: TimeGrid, lags: Sequence[int]) -> float:
    """Half the log-log slope of E|X(t+d) - X(t)|^2 against d over an ensemble."""
    return increment_modulus(np.atleast_2d(values), grid.dt, lags).exponent
