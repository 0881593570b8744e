"""
Hilbert-space valued noise X_t = sum_j sqrt(lambda_j) x_j(t) e_j with nuclear Q.

The state space is a discretized L^2 space: vectors of length N with a mass
(quadrature weight) vector, so <a, b> = sum_i mass_i a_i b_i. Basis vectors
are orthonormal in that inner product.

Stream layout: mode j of path p is scalar path p*J + j of the seed's stream.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .covariance import CovarianceKernel
from .errors import ConfigurationError
from .noise1d import TimeGrid, sample_paths

logger = logging.getLogger(__name__)

BASES = ("canonical", "sine")


@dataclass(frozen=True)
class QSpec:
    """
    Covariance operator Q through its eigenvalues and basis.

    Attributes:
        r: Decay exponent of the default law lambda_j = j^(-r), r > 1
        J: Truncation level
        basis: "canonical" or "sine"
        eigenvalues: Explicit lambda_1..lambda_J (overrides r and J)
    """

    r: float = 2.0
    J: int = 32
    basis: str = "canonical"
    eigenvalues: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.basis not in BASES:
            raise ConfigurationError(f"basis {self.basis!r} not in {BASES}")
        if self.eigenvalues is not None:
            lam = tuple(float(v) for v in self.eigenvalues)
            if not lam:
                raise ConfigurationError("explicit eigenvalue list is empty")
            if any(v <= 0 for v in lam) or any(b >= a for a, b in zip(lam, lam[1:])):
                raise ConfigurationError("eigenvalues must be positive and strictly decreasing")
            object.__setattr__(self, "eigenvalues", lam)
            object.__setattr__(self, "J", len(lam))
            return
        if not self.r > 1.0:
            raise ConfigurationError(f"eigenvalue decay r={self.r} must exceed 1 (nuclear Q)")
        if int(self.J) != self.J or self.J < 1:
            raise ConfigurationError(f"truncation J={self.J} must be a positive integer")
        object.__setattr__(self, "J", int(self.J))

    def lambdas(self) -> np.ndarray:
        if self.eigenvalues is not None:
            return np.asarray(self.eigenvalues)
        return np.arange(1, self.J + 1, dtype=float) ** -self.r

    def with_truncation(self, J: int) -> "QSpec":
        return QSpec(r=self.r, J=J, basis=self.basis)

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "J": self.J,
            "basis": self.basis,
            "eigenvalues": list(self.eigenvalues) if self.eigenvalues else None,
        }


@dataclass
class TraceReport:
    partial: float
    tail: float

    @property
    def total(self) -> float:
        return self.partial + self.tail


def trace(qspec: QSpec) -> TraceReport:
    """
    Truncated trace sum_{j<=J} lambda_j and the tail estimate of the power law.

    The tail (J + 1/2)^(1-r) / (r - 1) is the midpoint integral test; it is
    zero for explicit eigenvalue lists.
    """
    partial = float(np.sum(qspec.lambdas()))
    if qspec.eigenvalues is not None:
        return TraceReport(partial=partial, tail=0.0)
    tail = (qspec.J + 0.5) ** (1.0 - qspec.r) / (qspec.r - 1.0)
    return TraceReport(partial=partial, tail=tail)


def tail_sum(qspec: QSpec, J: int) -> float:
    """sum_{J < j <= qspec.J} lambda_j."""
    return float(np.sum(qspec.lambdas()[J:]))


# =============================================================================
# Bases
# =============================================================================
@dataclass
class EdgeBlock:
    """Coordinates of one discretized L^2(0,1) component inside a state vector."""

    indices: np.ndarray
    x: np.ndarray

    @property
    def interior(self) -> int:
        """Number of nodes strictly inside (0, 1); sine modes vanish at the ends."""
        return int(np.sum((self.x > 0.0) & (self.x < 1.0)))


def _weighted_orthonormal(vectors: np.ndarray, mass: np.ndarray) -> np.ndarray:
    # QR of M^(1/2) V gives orthonormal columns in the weighted product
    root = np.sqrt(mass)
    q, r = np.linalg.qr(root[:, None] * vectors)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return (q * signs[None, :]) / root[:, None]


def sine_modes(x: np.ndarray, mass: np.ndarray, count: int) -> np.ndarray:
    """
    First ``count`` modes sqrt(2) sin(k pi x), orthonormalized in the weighted product.

    Returns:
        Array (count, len(x))
    """
    if count > x.size:
        raise ConfigurationError(f"{count} sine modes requested on {x.size} nodes")
    k = np.arange(1, count + 1)
    raw = math.sqrt(2.0) * np.sin(np.pi * x[:, None] * k[None, :])
    return _weighted_orthonormal(raw, mass).T


def basis_matrix(
    qspec: QSpec,
    dim: int,
    mass: Optional[np.ndarray] = None,
    edges: Optional[Sequence[EdgeBlock]] = None,
    points: Sequence[int] = (),
) -> np.ndarray:
    """
    Rows e_1..e_J of the noise basis in a state space of dimension ``dim``.

    For the sine basis, ``edges`` lists the L^2 components (a single component
    over all coordinates with interior nodes x_i = (i+1)/(dim+1) by default)
    and ``points`` the scalar components; modes are taken round-robin by
    frequency with the point vectors after the first round. An edge carries at
    most as many modes as it has interior nodes.

    Raises:
        ConfigurationError: J exceeds the available basis size
    """
    mass = np.ones(dim) if mass is None else np.asarray(mass, dtype=float)
    J = qspec.J
    if qspec.basis == "canonical":
        if J > dim:
            raise ConfigurationError(f"J={J} exceeds the state dimension {dim}")
        E = np.zeros((J, dim))
        E[np.arange(J), np.arange(J)] = 1.0 / np.sqrt(mass[:J])
        return E

    if edges is None:
        edges = [EdgeBlock(indices=np.arange(dim), x=(np.arange(dim) + 1.0) / (dim + 1.0))]
    counts = [block.interior for block in edges]
    available = sum(counts) + len(points)
    if J > available:
        raise ConfigurationError(f"J={J} exceeds the available basis size {available}")

    per_edge = [
        sine_modes(block.x, mass[block.indices], count) for block, count in zip(edges, counts)
    ]
    rows: List[np.ndarray] = []
    max_modes = max(counts)
    for k in range(max_modes):
        for block, modes in zip(edges, per_edge):
            if k < modes.shape[0]:
                e = np.zeros(dim)
                e[block.indices] = modes[k]
                rows.append(e)
        if k == 0:
            for p in points:
                e = np.zeros(dim)
                e[p] = 1.0 / math.sqrt(mass[p])
                rows.append(e)
        if len(rows) >= J:
            break
    return np.vstack(rows[:J])


# =============================================================================
# Sampling
# =============================================================================
@dataclass
class VectorNoisePath:
    """
    Sampled Q-noise: values[i] is X(t_i) in the discretized state space.

    Attributes:
        grid: Time grid
        values: Array (n+1, dim); row 0 is zero
        qspec: Covariance operator
        kernel: Scalar kernel of the modes (None for the zero path)
        seed: Stream seed
        modes: Scalar mode paths (J, n+1)
    """

    grid: TimeGrid
    values: np.ndarray
    qspec: Optional[QSpec]
    kernel: Optional[CovarianceKernel]
    seed: int
    path_index: int = 0
    modes: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def truncated(self, stop: int) -> "VectorNoisePath":
        """Copy whose increments after grid index ``stop`` are zero."""
        values = self.values.copy()
        values[stop + 1 :] = values[stop]
        return VectorNoisePath(
            self.grid, values, self.qspec, self.kernel, self.seed, self.path_index, None
        )

    def combine(self, other: "VectorNoisePath", a: float, b: float) -> "VectorNoisePath":
        return VectorNoisePath(
            self.grid, a * self.values + b * other.values, None, None, self.seed, self.path_index
        )


def zero_noise(grid: TimeGrid, dim: int) -> VectorNoisePath:
    return VectorNoisePath(grid, np.zeros((grid.n + 1, dim)), None, None, 0)


def embed_scalar(values: np.ndarray, grid: TimeGrid, kernel=None, seed: int = 0) -> VectorNoisePath:
    """A scalar path as one-dimensional noise (J = 1, lambda_1 = 1)."""
    vals = np.asarray(values, dtype=float).reshape(grid.n + 1, 1)
    return VectorNoisePath(grid, vals, QSpec(eigenvalues=(1.0,)), kernel, seed)


def sample_qnoise_batch(
    kernel: CovarianceKernel,
    qspec: QSpec,
    grid: TimeGrid,
    basis: np.ndarray,
    seed: int,
    n_paths: int,
    start: int = 0,
    m_inner: Optional[int] = None,
) -> np.ndarray:
    """
    Values of paths start..start+n_paths-1 as an array (n_paths, n+1, dim).
    """
    J = qspec.J
    if basis.shape[0] != J:
        raise ConfigurationError(f"basis has {basis.shape[0]} rows, expected J={J}")
    scalar = sample_paths(kernel, grid, seed, n_paths * J, m_inner=m_inner, start=start * J)
    scalar = scalar.reshape(n_paths, J, grid.n + 1)
    weighted = np.sqrt(qspec.lambdas())[:, None] * basis
    return np.einsum("pjt,jd->ptd", scalar, weighted)


def sample_qnoise(
    kernel: CovarianceKernel,
    qspec: QSpec,
    grid: TimeGrid,
    dim: int,
    seed: int,
    path_index: int = 0,
    basis: Optional[np.ndarray] = None,
    mass: Optional[np.ndarray] = None,
    m_inner: Optional[int] = None,
) -> VectorNoisePath:
    """
    Draw X = sum_{j<=J} sqrt(lambda_j) x_j e_j from J independent scalar paths.

    Args:
        kernel: Scalar kernel of the modes
        qspec: Eigenvalues, truncation and basis
        grid: Time grid
        dim: State dimension
        seed: Stream seed
        path_index: Index of this path in the stream
        basis: Precomputed basis rows (built from qspec when omitted)
        mass: Mass weights of the state space

    Raises:
        ConfigurationError: J larger than the basis size
    """
    if basis is None:
        basis = basis_matrix(qspec, dim, mass)
    modes = sample_paths(
        kernel, grid, seed, qspec.J, m_inner=m_inner, start=path_index * qspec.J
    )
    values = modes.T @ (np.sqrt(qspec.lambdas())[:, None] * basis)
    return VectorNoisePath(
        grid=grid,
        values=values,
        qspec=qspec,
        kernel=kernel,
        seed=int(seed),
        path_index=path_index,
        modes=modes,
    )
