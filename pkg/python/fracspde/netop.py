"""
Discretized network operator on X = L2(0,1) x L2(0,1) x R x L2(0,1).

State layout: axon voltage u, dendrite voltage u_d, soma value d, recovery
variable v, each edge sampled at x_i = i/n_x. The trace condition
u(0) = u_d(1) = d is eliminated: the reduced unknown vector is

    [u_1 .. u_n | ud_0 .. ud_{n-1} | d | v_0 .. v_n]      (N = 3 n_x + 2)

The operator is assembled from the discrete bilinear form a_h (lumped
trapezoid masses, harmonic-mean face coefficients) so that
<-A z, w>_M = a_h(w, z) holds exactly; the skew u/v coupling is the only
non-symmetric part.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, Iterator, Optional, Tuple, Union

import numpy as np
from scipy import linalg

from .errors import ConfigurationError, DomainError, StateError

logger = logging.getLogger(__name__)

STRATEGIES = ("expm", "crank-nicolson")

# eigenvector condition number above which (-A)^g falls back to a Schur method
MAX_EIGVEC_COND = 1e8


def _one(x):
    return np.ones_like(np.asarray(x, dtype=float))


def _face_mean(values: np.ndarray) -> np.ndarray:
    return 2.0 * values[:-1] * values[1:] / (values[:-1] + values[1:])


@dataclass(frozen=True)
class NetworkCoefficients:
    """
    Coefficients of the axon / dendrite / soma / recovery system.

    Attributes:
        c, c_d: Diffusion coefficients of axon and dendrite
        p, p_d: Leak coefficients of axon and dendrite
        gamma_soma: Soma damping
        eps: Recovery damping
        lam: Dissipativity shift subtracted from p
    """

    c: Callable = _one
    c_d: Callable = _one
    p: Callable = _one
    p_d: Callable = _one
    gamma_soma: float = 1.0
    eps: float = 1.0
    lam: float = 0.0

    def sample(self, x: np.ndarray) -> Dict[str, np.ndarray]:
        values = {}
        for name in ("c", "c_d", "p", "p_d"):
            arr = np.asarray(getattr(self, name)(x), dtype=float)
            values[name] = np.broadcast_to(arr, x.shape).astype(float)
        return values

    def validate(self, x: np.ndarray) -> Dict[str, np.ndarray]:
        """Check positivity on the grid and return the sampled coefficients."""
        values = self.sample(x)
        for name in ("c", "c_d", "p_d"):
            if not np.all(values[name] > 0):
                raise ConfigurationError(f"coefficient {name} must be positive on [0, 1]")
        if not np.all(values["p"] - self.lam > 0):
            raise ConfigurationError(f"p - lambda must be positive on [0, 1] (lambda={self.lam})")
        if not self.gamma_soma > 0:
            raise ConfigurationError(f"gamma_soma={self.gamma_soma} must be positive")
        if not self.eps > 0:
            raise ConfigurationError(f"eps={self.eps} must be positive")
        if self.lam < 0:
            raise ConfigurationError(f"lambda={self.lam} must be non-negative")
        return values


@dataclass(frozen=True)
class NetworkLayout:
    """Index bookkeeping of the reduced state vector."""

    n_x: int

    @property
    def h(self) -> float:
        return 1.0 / self.n_x

    @property
    def size(self) -> int:
        return 3 * self.n_x + 2

    @property
    def u(self) -> slice:
        return slice(0, self.n_x)

    @property
    def u_d(self) -> slice:
        return slice(self.n_x, 2 * self.n_x)

    @property
    def d(self) -> int:
        return 2 * self.n_x

    @property
    def v(self) -> slice:
        return slice(2 * self.n_x + 1, 3 * self.n_x + 2)

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_x + 1) * self.h

    def block_coords(self) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
        """Reduced indices and node coordinates of each edge block."""
        x = self.nodes
        idx = np.arange(self.size)
        return {
            "u": (idx[self.u], x[1:]),
            "u_d": (idx[self.u_d], x[:-1]),
            "v": (idx[self.v], x),
        }


@dataclass
class StateVector:
    """
    Full network state with the trace constraint u[0] = u_d[n_x] = d.
    """

    u: np.ndarray
    u_d: np.ndarray
    d: float
    v: np.ndarray

    def check(self, tol: float = 1e-10) -> None:
        scale = max(1.0, abs(self.d))
        if abs(self.u[0] - self.d) > tol * scale or abs(self.u_d[-1] - self.d) > tol * scale:
            raise StateError(
                f"trace constraint violated: u(0)={self.u[0]:.6g}, u_d(1)={self.u_d[-1]:.6g}, "
                f"d={self.d:.6g}"
            )

    @property
    def n_x(self) -> int:
        return len(self.u) - 1

    def to_reduced(self) -> np.ndarray:
        self.check()
        return np.concatenate([self.u[1:], self.u_d[:-1], [self.d], self.v])

    @classmethod
    def from_reduced(cls, z: np.ndarray, n_x: int) -> "StateVector":
        lay = NetworkLayout(n_x)
        z = np.asarray(z, dtype=float)
        d = float(z[lay.d])
        return cls(
            u=np.concatenate([[d], z[lay.u]]),
            u_d=np.concatenate([z[lay.u_d], [d]]),
            d=d,
            v=z[lay.v].copy(),
        )

    @classmethod
    def from_fields(cls, u, u_d, v, n_x: int) -> "StateVector":
        """Sample callables on the grid; d is taken from u(0) and u_d(1) must agree."""
        x = np.arange(n_x + 1) / n_x
        uu = np.broadcast_to(np.asarray(u(x), dtype=float), x.shape).copy()
        ud = np.broadcast_to(np.asarray(u_d(x), dtype=float), x.shape).copy()
        vv = np.broadcast_to(np.asarray(v(x), dtype=float), x.shape).copy()
        state = cls(u=uu, u_d=ud, d=float(uu[0]), v=vv)
        state.check()
        return state

    def full(self) -> np.ndarray:
        return np.concatenate([self.u, self.u_d, [self.d], self.v])


StateLike = Union[StateVector, np.ndarray]


class OperatorSpec:
    """
    Assembled generator A on the reduced state space.

    Holds A, the lumped mass vector (discrete X inner product), the form matrix
    B with -diag(mass) A = B, and the Gram matrix of the discrete V norm.
    Stability constants are computed on first use and cached; the object is
    otherwise read-only.
    """

    def __init__(
        self,
        A: np.ndarray,
        mass: np.ndarray,
        form: np.ndarray,
        v_gram: np.ndarray,
        kind: str,
        layout: Optional[NetworkLayout] = None,
        coeffs: Optional[NetworkCoefficients] = None,
        form_full: Optional[np.ndarray] = None,
        coercivity: Optional[float] = None,
        strategy: str = "expm",
        substeps: int = 16,
    ):
        if strategy not in STRATEGIES:
            raise ConfigurationError(f"semigroup strategy {strategy!r} not in {STRATEGIES}")
        self.A = A
        self.mass = mass
        self.form = form
        self.v_gram = v_gram
        self.kind = kind
        self.layout = layout
        self.coeffs = coeffs
        self.form_full = form_full
        self.coercivity = coercivity
        self.strategy = strategy
        self.substeps = substeps
        self._propagators: Dict[Tuple[float, str], np.ndarray] = {}

    @property
    def size(self) -> int:
        return self.A.shape[0]

    @property
    def n_x(self) -> Optional[int]:
        return self.layout.n_x if self.layout else None

    # -- norms ----------------------------------------------------------------
    def inner(self, a: np.ndarray, b: np.ndarray):
        """Discrete X inner product along the last axis."""
        return np.sum(a * b * self.mass, axis=-1)

    def norm(self, a: np.ndarray):
        return np.sqrt(np.maximum(self.inner(a, a), 0.0))

    def v_norm_sq(self, a: np.ndarray):
        a = np.asarray(a, dtype=float)
        return np.einsum("...i,ij,...j->...", a, self.v_gram, a)

    def operator_norm(self, S: np.ndarray) -> float:
        """||S|| in the mass-weighted norm."""
        root = np.sqrt(self.mass)
        return float(np.linalg.norm(root[:, None] * S / root[None, :], 2))

    # -- spectra ----------------------------------------------------------------
    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return linalg.eigvals(self.A)

    @cached_property
    def spectral_bound(self) -> float:
        return float(np.max(self.eigenvalues.real))

    @cached_property
    def omega(self) -> float:
        """Decay rate estimate: 90% of the spectral gap."""
        return 0.9 * -self.spectral_bound

    @cached_property
    def omega_dissipative(self) -> float:
        """Largest w with <Az, z> <= -w ||z||^2: smallest eigenvalue of (sym B, M)."""
        sym = 0.5 * (self.form + self.form.T)
        return float(linalg.eigh(sym, np.diag(self.mass), eigvals_only=True)[0])

    @cached_property
    def growth_constant(self) -> float:
        """Smallest M >= 1 with ||e^{tA}|| <= M e^{-omega t} at t in {0.5, 1, 2}."""
        fit = 1.0
        for t in (0.5, 1.0, 2.0):
            fit = max(fit, self.operator_norm(self.propagator(t)) * math.exp(self.omega * t))
        return fit

    def stability(self) -> Dict[str, float]:
        return {
            "spectral_bound": self.spectral_bound,
            "omega": self.omega,
            "omega_dissipative": self.omega_dissipative,
            "M": self.growth_constant,
        }

    # -- semigroup --------------------------------------------------------------
    def propagator(self, t: float, strategy: Optional[str] = None) -> np.ndarray:
        """Matrix of e^{tA} (cached per time and strategy)."""
        if t < 0:
            raise DomainError(f"semigroup time t={t} must be non-negative")
        strategy = strategy or self.strategy
        key = (float(t), strategy)
        cached = self._propagators.get(key)
        if cached is not None:
            return cached
        if t == 0:
            prop = np.eye(self.size)
        elif strategy == "expm":
            prop = linalg.expm(t * self.A)
        else:
            tau = t / self.substeps
            eye = np.eye(self.size)
            step = linalg.solve(eye - 0.5 * tau * self.A, eye + 0.5 * tau * self.A)
            prop = np.linalg.matrix_power(step, self.substeps)
        logger.debug("propagator t=%g via %s (N=%d)", t, strategy, self.size)
        self._propagators[key] = prop
        return prop

    @cached_property
    def _eig(self):
        values, vectors = linalg.eig(self.A)
        return values, vectors, np.linalg.cond(vectors)


def _form_blocks(n_x: int, vals: Dict[str, np.ndarray], coeffs: NetworkCoefficients):
    """Full-coordinate form matrix and mass vector."""
    h = 1.0 / n_x
    m = n_x + 1
    size = 3 * m + 1
    iu, iud, idd, iv = 0, m, 2 * m, 2 * m + 1
    B = np.zeros((size, size))
    w = np.full(m, h)
    w[0] = w[-1] = 0.5 * h

    def stiffness(offset: int, coef: np.ndarray):
        faces = _face_mean(coef) / h
        for i, cf in enumerate(faces):
            a, b = offset + i, offset + i + 1
            B[a, a] += cf
            B[b, b] += cf
            B[a, b] -= cf
            B[b, a] -= cf

    stiffness(iu, vals["c"])
    stiffness(iud, vals["c_d"])
    idx = np.arange(m)
    B[iu + idx, iu + idx] += w * (vals["p"] - coeffs.lam)
    B[iud + idx, iud + idx] += w * vals["p_d"]
    B[iv + idx, iv + idx] += w * coeffs.eps
    B[idd, idd] += coeffs.gamma_soma
    # skew coupling: int (u_U v_W - v_U u_W)
    B[iu + idx, iv + idx] += w
    B[iv + idx, iu + idx] -= w

    mass = np.concatenate([w, w, [1.0], w])
    return B, mass


def _elimination(n_x: int) -> np.ndarray:
    """P with full = P @ reduced under u_0 = ud_n = d."""
    m = n_x + 1
    lay = NetworkLayout(n_x)
    P = np.zeros((3 * m + 1, lay.size))
    r = np.arange(n_x)
    P[1 + r, lay.u.start + r] = 1.0
    P[m + r, lay.u_d.start + r] = 1.0
    P[0, lay.d] = 1.0
    P[2 * m - 1, lay.d] = 1.0
    P[2 * m, lay.d] = 1.0
    rv = np.arange(m)
    P[2 * m + 1 + rv, lay.v.start + rv] = 1.0
    return P


def _v_gram_full(n_x: int) -> np.ndarray:
    h = 1.0 / n_x
    ones = NetworkCoefficients()
    B, _ = _form_blocks(n_x, ones.sample(np.arange(n_x + 1) * h), ones)
    # drop the skew part: symmetric Gram of the H1 x H1 x R x L2 norm
    return 0.5 * (B + B.T)


def assemble(
    coeffs: NetworkCoefficients, n_x: int, strategy: str = "expm", substeps: int = 16
) -> OperatorSpec:
    """
    Assemble the network operator on n_x cells per edge.

    Raises:
        ConfigurationError: n_x < 8 or a coefficient violates positivity
    """
    if int(n_x) != n_x or n_x < 8:
        raise ConfigurationError(f"n_x={n_x} must be an integer >= 8")
    x = np.arange(n_x + 1) / n_x
    vals = coeffs.validate(x)
    B_full, mass_full = _form_blocks(n_x, vals, coeffs)
    P = _elimination(n_x)
    form = P.T @ B_full @ P
    mass = P.T @ mass_full
    A = -form / mass[:, None]
    v_gram = P.T @ _v_gram_full(n_x) @ P
    coercivity = min(
        float(np.min(_face_mean(vals["c"]))),
        float(np.min(_face_mean(vals["c_d"]))),
        float(np.min(vals["p"] - coeffs.lam)),
        float(np.min(vals["p_d"])),
        coeffs.eps,
        coeffs.gamma_soma,
    )
    logger.debug("assembled network operator n_x=%d (N=%d)", n_x, A.shape[0])
    return OperatorSpec(
        A=A,
        mass=mass,
        form=form,
        v_gram=v_gram,
        kind="network",
        layout=NetworkLayout(n_x),
        coeffs=coeffs,
        form_full=B_full,
        coercivity=coercivity,
        strategy=strategy,
        substeps=substeps,
    )


def diagonal_operator(rates, strategy: str = "expm") -> OperatorSpec:
    """A = -diag(rates) with unit masses; the scalar test problems use one rate."""
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    if np.any(rates <= 0):
        raise ConfigurationError("diagonal rates must be positive")
    form = np.diag(rates)
    return OperatorSpec(
        A=-form,
        mass=np.ones(rates.size),
        form=form,
        v_gram=np.eye(rates.size),
        kind="diagonal",
        coercivity=float(rates.min()),
        strategy=strategy,
    )


def scalar_operator(a: float, strategy: str = "expm") -> OperatorSpec:
    return diagonal_operator([a], strategy=strategy)


def _as_vector(spec: OperatorSpec, state: StateLike) -> np.ndarray:
    if isinstance(state, StateVector):
        if spec.layout is None or state.n_x != spec.layout.n_x:
            raise StateError("state does not match the operator grid")
        return state.to_reduced()
    return np.asarray(state, dtype=float)


def _like(spec: OperatorSpec, template: StateLike, z: np.ndarray) -> StateLike:
    if isinstance(template, StateVector):
        return StateVector.from_reduced(z, spec.layout.n_x)
    return z


def apply_operator(spec: OperatorSpec, state: StateLike) -> StateLike:
    return _like(spec, state, spec.A @ _as_vector(spec, state))


def apply_form(spec: OperatorSpec, first: StateLike, second: StateLike) -> float:
    """
    Discrete form a(first, second) with trapezoid quadrature.

    Full StateVectors are checked against the trace constraint and use the
    full-coordinate form; reduced vectors use the eliminated form.

    Raises:
        StateError: a state violates u(0) = u_d(1) = d
    """
    if isinstance(first, StateVector) and isinstance(second, StateVector):
        first.check()
        second.check()
        if spec.form_full is None:
            raise StateError("network states need a network operator")
        return float(first.full() @ spec.form_full @ second.full())
    return float(_as_vector(spec, first) @ spec.form @ _as_vector(spec, second))


def semigroup_apply(
    spec: OperatorSpec, t: float, state: StateLike, strategy: Optional[str] = None
) -> StateLike:
    """
    e^{tA} applied to a state.

    Raises:
        DomainError: t < 0
    """
    z = _as_vector(spec, state)
    return _like(spec, state, spec.propagator(t, strategy) @ z)


def fractional_power_norm(spec: OperatorSpec, gamma_frac: float, state: StateLike) -> float:
    """
    ||(-A)^g z|| in the X norm, g in [0, 1].

    Uses the eigendecomposition of A; an ill-conditioned eigenbasis falls back
    to scipy's Schur-Pade fractional power with a RuntimeWarning.
    """
    if not 0.0 <= gamma_frac <= 1.0:
        raise DomainError(f"fractional order {gamma_frac} outside [0, 1]")
    z = _as_vector(spec, state)
    if gamma_frac == 0.0:
        return float(spec.norm(z))
    if gamma_frac == 1.0:
        return float(spec.norm(spec.A @ z))
    return float(spec.norm(fractional_power_apply(spec, gamma_frac, z)))


def fractional_power_apply(spec: OperatorSpec, gamma_frac: float, z: np.ndarray) -> np.ndarray:
    """(-A)^g applied along the last axis of z."""
    return np.real(np.asarray(z) @ fractional_power_matrix(spec, gamma_frac).T)


def fractional_power_matrix(spec: OperatorSpec, gamma_frac: float) -> np.ndarray:
    values, vectors, cond = spec._eig
    if cond < MAX_EIGVEC_COND:
        powered = (vectors * (-values) ** gamma_frac) @ np.linalg.inv(vectors)
        return np.real(powered)
    message = f"eigenbasis condition {cond:.2e} too large; using Schur fractional power"
    logger.warning(message)
    warnings.warn(message, RuntimeWarning, stacklevel=3)
    return np.real(linalg.fractional_matrix_power(-spec.A, gamma_frac))


def operator_triplets(spec: OperatorSpec, tol: float = 0.0) -> Iterator[Tuple[int, int, float]]:
    """Non-zero entries of A as (row, col, value), row-major."""
    rows, cols = np.nonzero(np.abs(spec.A) > tol)
    for r, c in zip(rows, cols):
        yield int(r), int(c), float(spec.A[r, c])


def random_states(spec: OperatorSpec, count: int, seed: int = 0) -> np.ndarray:
    """Random reduced states (the trace constraint holds by construction)."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((count, spec.size))


def coercivity_ratios(spec: OperatorSpec, states: np.ndarray) -> np.ndarray:
    """a(z, z) / ||z||_V^2 for each row of ``states``."""
    quad = np.einsum("pi,ij,pj->p", states, spec.form, states)
    return quad / spec.v_norm_sq(states)

