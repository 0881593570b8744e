"""
Solver for du = (A u + F(u)) dt + dX in the translated form.

With z = W_A the stochastic convolution, y = u - z solves the random
evolution equation y' = A y + F(z + y). The noise enters only through z;
the y-step never sees an increment of X directly.

Schemes:
    semi-implicit   (I - dt A) y_{k+1} = y_k + dt F(z_k + y_k)
    yosida          same step with F replaced by the Yosida approximation F_alpha
    exponential     second-order exponential time differencing (exact linear part)
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import integrate, linalg

from .convolution import ConvolutionConfig, ConvolutionPath, convolve
from .errors import (
    ConfigurationError,
    ContractError,
    DivergenceError,
    GridMismatchError,
    PreconditionError,
)
from .netop import OperatorSpec, StateLike, _as_vector
from .noise1d import TimeGrid
from .qnoise import VectorNoisePath

logger = logging.getLogger(__name__)

SCHEMES = ("semi-implicit", "yosida", "exponential")

BLOWUP_FACTOR = 1e6
RESOLVENT_TOL = 1e-12
RESOLVENT_MAX_ITER = 200
CONTRACTION_TOL = 0.1


# =============================================================================
# Nonlinearity
# =============================================================================
@dataclass(frozen=True)
class NonlinearitySpec:
    """
    Scalar dissipative part h of F, lifted pointwise.

    Attributes:
        h: Non-increasing scalar map (vectorized)
        lam: Shift lambda moved into the linear part
        rho: Growth degree, |h(u)| <= c (1 + |u|^(2 rho + 1))
        c: Growth constant
        dh: Derivative of h (optional, speeds up the resolvent)
        name: Label for manifests
    """

    h: Callable
    lam: float = 0.0
    rho: float = 0.0
    c: float = 1.0
    dh: Optional[Callable] = None
    name: str = "custom"

    def __call__(self, u):
        return self.h(u)

    def dissipativity_violations(self, samples: int = 1000, bound: float = 5.0, seed: int = 0) -> int:
        """Pairs (u, v) from [-bound, bound] with (h(u) - h(v))(u - v) > 0."""
        rng = np.random.default_rng(seed)
        u, v = rng.uniform(-bound, bound, (2, samples))
        prod = (self.h(u) - self.h(v)) * (u - v)
        scale = 1e-12 * (1.0 + np.abs(u) ** (2 * self.rho + 2) + np.abs(v) ** (2 * self.rho + 2))
        return int(np.sum(prod > scale))

    def growth_violations(self, samples: int = 1000, bound: float = 5.0) -> int:
        u = np.linspace(-bound, bound, samples)
        return int(np.sum(np.abs(self.h(u)) > self.c * (1.0 + np.abs(u) ** (2 * self.rho + 1)) + 1e-12))

    def to_dict(self) -> dict:
        return {"name": self.name, "lambda": self.lam, "rho": self.rho, "c": self.c}


def fitzhugh_nagumo(xi: float = 0.5) -> NonlinearitySpec:
    """
    h(u) = -lambda u + u (1 - u)(u - xi) with lambda = (xi^2 - xi + 1) / 3.

    This lambda is the smallest shift that makes h non-increasing.
    """
    if not 0.0 < xi < 1.0:
        raise ConfigurationError(f"xi={xi} outside (0, 1)")
    lam = (xi * xi - xi + 1.0) / 3.0

    def h(u):
        u = np.asarray(u, dtype=float)
        return -lam * u + u * (1.0 - u) * (u - xi)

    def dh(u):
        u = np.asarray(u, dtype=float)
        return -lam - 3.0 * u * u + 2.0 * (1.0 + xi) * u - xi

    c = 1.0 + (1.0 + xi) + (xi + lam)
    return NonlinearitySpec(h=h, lam=lam, rho=1.0, c=c, dh=dh, name=f"fitzhugh-nagumo(xi={xi})")


def linear_nonlinearity(a: float = 1.0) -> NonlinearitySpec:
    if a < 0:
        raise ConfigurationError(f"linear rate a={a} must be non-negative")
    return NonlinearitySpec(
        h=lambda u: -a * np.asarray(u, dtype=float),
        dh=lambda u: np.full_like(np.asarray(u, dtype=float), -a),
        c=max(a, 1.0),
        name=f"linear(a={a})",
    )


def cubic_nonlinearity() -> NonlinearitySpec:
    """h(u) = -u^3."""
    return NonlinearitySpec(
        h=lambda u: -np.asarray(u, dtype=float) ** 3,
        dh=lambda u: -3.0 * np.asarray(u, dtype=float) ** 2,
        rho=1.0,
        name="cubic",
    )


def zero_nonlinearity() -> NonlinearitySpec:
    return NonlinearitySpec(
        h=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        dh=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        name="zero",
    )


def yosida_resolvent(nl: NonlinearitySpec, alpha: float, w, tol: float = RESOLVENT_TOL):
    """
    J_alpha(w): the root y of y - alpha h(y) = w, componentwise.

    For non-increasing h the root lies between w and w + alpha h(w); Newton
    steps leaving that bracket are replaced by bisection.

    Raises:
        PreconditionError: alpha <= 0
        ContractError: h is not non-increasing on the bracket
    """
    if not alpha > 0:
        raise PreconditionError(f"Yosida parameter alpha={alpha} must be positive")
    scalar = np.isscalar(w)
    w = np.atleast_1d(np.asarray(w, dtype=float)).copy()

    def g(y):
        return y - alpha * nl.h(y) - w

    end = w + alpha * nl.h(w)
    lo = np.minimum(w, end)
    hi = np.maximum(w, end)
    g_lo, g_hi = g(lo), g(hi)
    slack = tol * (1.0 + np.abs(w))
    if np.any(g_lo > slack) or np.any(g_hi < -slack):
        raise ContractError("y - alpha h(y) is not increasing: h violates dissipativity")

    y = w.copy()
    for _ in range(RESOLVENT_MAX_ITER):
        gy = g(y)
        done = np.abs(gy) <= tol * (1.0 + np.abs(w))
        if np.all(done):
            break
        lo = np.where(gy < 0, y, lo)
        hi = np.where(gy > 0, y, hi)
        if nl.dh is not None:
            slope = 1.0 - alpha * nl.dh(y)
            if np.any(slope[~done] <= 0):
                raise ContractError("h has positive slope: not dissipative")
            step = y - gy / slope
        else:
            step = np.full_like(y, np.nan)
        inside = (step > lo) & (step < hi)
        y = np.where(done, y, np.where(inside, step, 0.5 * (lo + hi)))
        if np.all(hi - lo <= tol * (1.0 + np.abs(y))):
            break
    return float(y[0]) if scalar else y


def yosida_approximation(nl: NonlinearitySpec, alpha: float, w):
    """F_alpha(w) = h(J_alpha(w))."""
    return nl.h(yosida_resolvent(nl, alpha, w))


class NemitskyOperator:
    """
    Pointwise lift of h to the state space.

    ``weights`` scales h per coordinate: 1 on coordinates h acts on, 0 on
    those left untouched. The network model lifts onto the axon block, with a
    fractional weight on the soma node shared with u(0).
    """

    def __init__(self, nl: NonlinearitySpec, weights: np.ndarray):
        self.nl = nl
        self.weights = np.asarray(weights, dtype=float)
        self.active = self.weights != 0.0

    @classmethod
    def everywhere(cls, nl: NonlinearitySpec, size: int) -> "NemitskyOperator":
        return cls(nl, np.ones(size))

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        out[..., self.active] = self.nl.h(z[..., self.active])
        return out * self.weights

    def yosida(self, z: np.ndarray, alpha: float) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        out[..., self.active] = yosida_approximation(self.nl, alpha, z[..., self.active])
        return out * self.weights

    def forcing(self, alpha: float) -> Callable[[np.ndarray], np.ndarray]:
        if alpha > 0:
            return lambda z: self.yosida(z, alpha)
        return self


# =============================================================================
# Configuration and results
# =============================================================================
@dataclass(frozen=True)
class SolverConfig:
    """
    Attributes:
        scheme: "semi-implicit", "yosida" or "exponential"
        alpha: Yosida parameter (0 means exact F for the semi-implicit scheme)
        dt: Step; must equal the noise grid step when given
        tol: Tolerance of the scalar resolvent solves
        convolution: Scheme used for W_A
    """

    scheme: str = "semi-implicit"
    alpha: float = 0.0
    dt: Optional[float] = None
    tol: float = RESOLVENT_TOL
    convolution: ConvolutionConfig = field(default_factory=ConvolutionConfig)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"solver scheme {self.scheme!r} not in {SCHEMES}")
        if self.alpha < 0:
            raise ConfigurationError(f"alpha={self.alpha} must be non-negative")
        if self.scheme == "yosida" and not self.alpha > 0:
            raise ConfigurationError("the yosida scheme needs alpha > 0")
        if self.dt is not None and not self.dt > 0:
            raise ConfigurationError(f"dt={self.dt} must be positive")

    def with_alpha(self, alpha: float) -> "SolverConfig":
        return SolverConfig(self.scheme, alpha, self.dt, self.tol, self.convolution)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "alpha": self.alpha,
            "dt": self.dt,
            "tol": self.tol,
            "convolution": {
                "scheme": self.convolution.scheme,
                "alpha": self.convolution.alpha,
                "gamma_frac": self.convolution.gamma_frac,
            },
        }


@dataclass
class SolutionBundle:
    """
    Attributes:
        grid: Time grid
        u: Solution u = y + W_A, shape (n+1, N)
        y: Translated solution
        convolution: The stochastic convolution W_A
        energy: 1/2 ||y_k||^2 + omega_V sum_{j<=k} dt ||y_j||_V^2
        energy_slack: Right minus left side of the per-step energy inequality
        config: Solver configuration
        seed: Seed of the driving noise
    """

    grid: TimeGrid
    u: np.ndarray
    y: np.ndarray
    convolution: ConvolutionPath
    energy: np.ndarray
    energy_slack: Optional[np.ndarray]
    config: SolverConfig
    seed: int = 0
    diagnostics: Dict[str, float] = field(default_factory=dict)

    @property
    def energy_violations(self) -> int:
        if self.energy_slack is None:
            return 0
        scale = 1e-10 * max(1.0, float(np.max(np.abs(self.energy))))
        return int(np.sum(self.energy_slack < -scale))

    def summary(self) -> dict:
        return {
            "scheme": self.config.scheme,
            "steps": self.grid.n,
            "sup_energy": float(np.max(self.energy)),
            "energy_violations": self.energy_violations,
            **self.diagnostics,
        }


# =============================================================================
# Stepping
# =============================================================================
def _phi_blocks(spec: OperatorSpec, dt: float):
    """e^{dt A}, dt phi_1(dt A) and dt phi_2(dt A) from one augmented exponential."""
    N = spec.size
    aug = np.zeros((3 * N, 3 * N))
    aug[:N, :N] = dt * spec.A
    aug[:N, N : 2 * N] = np.eye(N)
    aug[N : 2 * N, 2 * N :] = np.eye(N)
    E = linalg.expm(aug)
    return E[:N, :N], dt * E[:N, N : 2 * N], dt * E[:N, 2 * N :]


def _scale(spec: OperatorSpec, y0: np.ndarray, z: np.ndarray) -> float:
    return max(1.0, float(spec.norm(y0)), float(np.max(spec.norm(z))))


def integrate_translated(
    spec: OperatorSpec,
    forcing: Callable[[np.ndarray], np.ndarray],
    z: np.ndarray,
    y0: np.ndarray,
    dt: float,
    scheme: str,
    record_energy: bool = True,
):
    """
    Step y' = A y + forcing(z + y) over the rows of z.

    Returns:
        (y, energy, slack) with slack None for the exponential scheme

    Raises:
        DivergenceError: ||y|| exceeds 1e6 times the initial scale
    """
    n = z.shape[0] - 1
    y = np.zeros_like(z)
    y[0] = y0
    limit = BLOWUP_FACTOR * _scale(spec, y0, z)
    omega_v = spec.coercivity or 0.0
    energy = np.zeros(n + 1)
    energy[0] = 0.5 * float(spec.inner(y0, y0))
    slack = np.zeros(n) if record_energy and scheme != "exponential" else None
    dissipated = 0.0

    if scheme == "exponential":
        E, P1, P2 = _phi_blocks(spec, dt)
    else:
        lu = linalg.lu_factor(np.eye(spec.size) - dt * spec.A)

    for k in range(n):
        Fk = forcing(z[k] + y[k])
        if scheme == "exponential":
            a = E @ y[k] + P1 @ Fk
            y[k + 1] = a + P2 @ (forcing(z[k + 1] + a) - Fk)
        else:
            y[k + 1] = linalg.lu_solve(lu, y[k] + dt * Fk)

        norm = float(spec.norm(y[k + 1]))
        if not math.isfinite(norm) or norm > limit:
            raise DivergenceError(
                f"solution norm {norm:.3e} exceeds {limit:.3e} at step {k + 1}", step=k + 1
            )
        v_sq = float(spec.v_norm_sq(y[k + 1]))
        dissipated += dt * omega_v * v_sq
        half_sq = 0.5 * float(spec.inner(y[k + 1], y[k + 1]))
        energy[k + 1] = half_sq + dissipated
        if slack is not None:
            rhs = 0.5 * float(spec.inner(y[k], y[k])) + dt * float(spec.inner(Fk, y[k + 1]))
            slack[k] = rhs - (half_sq + dt * omega_v * v_sq)
    return y, energy, slack


def solve(
    spec: OperatorSpec,
    nl: NonlinearitySpec,
    noise: VectorNoisePath,
    u0: StateLike,
    config: Optional[SolverConfig] = None,
    nemitsky: Optional[NemitskyOperator] = None,
    grid: Optional[TimeGrid] = None,
) -> SolutionBundle:
    """
    Solve the stochastic evolution equation on the noise grid.

    Args:
        spec: Generator A
        nl: Scalar nonlinearity
        noise: Driving Q-noise
        u0: Initial state (StateVector or reduced vector)
        config: Scheme, Yosida parameter and convolution settings
        nemitsky: Lift of h (acts on every coordinate when omitted)
        grid: Expected output grid

    Raises:
        GridMismatchError: grids or dimensions disagree
        StateError: u0 violates the trace constraint
        DivergenceError: blow-up guard triggered
    """
    config = config or SolverConfig()
    if grid is not None and not noise.grid.matches(grid):
        raise GridMismatchError("noise grid does not match the requested output grid")
    dt = noise.grid.dt
    if config.dt is not None and not math.isclose(config.dt, dt, rel_tol=1e-12):
        raise GridMismatchError(f"solver dt={config.dt} differs from the noise step {dt}")
    y0 = _as_vector(spec, u0)
    if y0.shape != (spec.size,):
        raise GridMismatchError(f"initial state has shape {y0.shape}, expected ({spec.size},)")
    nemitsky = nemitsky or NemitskyOperator.everywhere(nl, spec.size)

    conv = convolve(spec, noise, config.convolution)
    z = conv.values
    forcing = nemitsky.forcing(config.alpha)
    logger.debug(
        "solve: scheme=%s alpha=%g n=%d N=%d", config.scheme, config.alpha, noise.grid.n, spec.size
    )
    y, energy, slack = integrate_translated(spec, forcing, z, y0, dt, config.scheme)
    bundle = SolutionBundle(
        grid=noise.grid,
        u=y + z,
        y=y,
        convolution=conv,
        energy=energy,
        energy_slack=slack,
        config=config,
        seed=noise.seed,
    )
    bundle.diagnostics["sup_norm"] = float(np.max(spec.norm(bundle.u)))
    if bundle.energy_violations:
        logger.warning("energy inequality violated on %d steps", bundle.energy_violations)
    return bundle


def reference_solution(
    spec: OperatorSpec,
    nl: NonlinearitySpec,
    u0: StateLike,
    grid: TimeGrid,
    nemitsky: Optional[NemitskyOperator] = None,
    rtol: float = 1e-11,
    atol: float = 1e-13,
) -> np.ndarray:
    """
    Noise-free solution y' = A y + F(y) by scipy's adaptive integrators.

    Small systems use DOP853; larger (stiff) ones use Radau with the exact Jacobian.
    """
    y0 = _as_vector(spec, u0)
    nemitsky = nemitsky or NemitskyOperator.everywhere(nl, spec.size)

    def rhs(_t, y):
        return spec.A @ y + nemitsky(y)

    kwargs = {}
    method = "DOP853"
    if spec.size > 4:
        method = "Radau"
        if nl.dh is not None:
            def jac(_t, y):
                diag = np.zeros(spec.size)
                diag[nemitsky.active] = nl.dh(y[nemitsky.active])
                return spec.A + np.diag(diag * nemitsky.weights)

            kwargs["jac"] = jac
    result = integrate.solve_ivp(
        rhs, (0.0, grid.T), y0, method=method, t_eval=grid.points, rtol=rtol, atol=atol, **kwargs
    )
    if not result.success:
        raise ConfigurationError(f"reference integration failed: {result.message}")
    return result.y.T


# =============================================================================
# Diagnostics
# =============================================================================
@dataclass
class ContractionReport:
    times: np.ndarray
    ratios: np.ndarray
    bound: np.ndarray
    omega_hat: float
    tol: float = CONTRACTION_TOL

    @property
    def passes(self) -> bool:
        return bool(np.all(self.ratios <= self.bound * (1.0 + self.tol) + 1e-14))

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.ratios) <= 1e-12 * max(1.0, float(self.ratios[0]))))

    @property
    def worst(self) -> float:
        """Largest ratio / bound over the grid."""
        return float(np.max(self.ratios / self.bound))

    def to_dict(self) -> dict:
        return {
            "omega_hat": self.omega_hat,
            "tol": self.tol,
            "passes": self.passes,
            "monotone": self.monotone,
            "worst_ratio_over_bound": self.worst,
            "final_ratio": float(self.ratios[-1]),
        }


def contraction_check(
    spec: OperatorSpec,
    nl: NonlinearitySpec,
    noise: VectorNoisePath,
    u0: StateLike,
    u1: StateLike,
    config: Optional[SolverConfig] = None,
    nemitsky: Optional[NemitskyOperator] = None,
    tol: float = CONTRACTION_TOL,
) -> ContractionReport:
    """
    ||u(t; u0) - u(t; u1)||^2 / ||u0 - u1||^2 against e^{-2 omega t} on one noise path.

    omega is the discrete dissipativity rate of A, the constant the
    Gronwall argument produces.
    """
    first = solve(spec, nl, noise, u0, config, nemitsky)
    second = solve(spec, nl, noise, u1, config, nemitsky)
    times = noise.grid.points
    omega_hat = spec.omega_dissipative
    bound = np.exp(-2.0 * omega_hat * times)
    initial = float(spec.inner(first.u[0] - second.u[0], first.u[0] - second.u[0]))
    if initial == 0.0:
        ratios = np.zeros_like(times)
    else:
        diff = first.u - second.u
        ratios = spec.inner(diff, diff) / initial
    report = ContractionReport(times=times, ratios=ratios, bound=bound, omega_hat=omega_hat, tol=tol)
    logger.debug("contraction: worst ratio/bound %.4f", report.worst if initial else 0.0)
    return report


@dataclass
class CauchyReport:
    """
    sup_t ||y_alpha - y_beta||^2 against the a-priori bound

        (alpha + beta) int_0^T ||F_alpha(u_alpha)||^2 + ||F_beta(u_beta)||^2 ds

    evaluated along the two runs.
    """

    alpha: float
    beta: float
    sup_sq_diff: float
    bound: float = 0.0

    @property
    def ratio(self) -> float:
        return self.sup_sq_diff / (self.alpha + self.beta)

    @property
    def passes(self) -> bool:
        return self.sup_sq_diff <= self.bound

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "sup_sq_diff": self.sup_sq_diff,
            "ratio": self.ratio,
            "bound": self.bound,
            "passes": self.passes,
        }


def _yosida_run(spec, nl, noise, u0, alpha, config, nemitsky) -> SolutionBundle:
    base = config or SolverConfig(scheme="yosida", alpha=alpha)
    cfg = SolverConfig("yosida", alpha, base.dt, base.tol, base.convolution)
    return solve(spec, nl, noise, u0, cfg, nemitsky)


def _forcing_energy(spec: OperatorSpec, nemitsky: NemitskyOperator, run: SolutionBundle) -> float:
    """Left-endpoint sum of ||F_alpha(u)||^2 dt, matching the explicit forcing of the scheme."""
    forcing = nemitsky.yosida(run.u[:-1], run.config.alpha)
    return float(np.sum(spec.inner(forcing, forcing)) * run.grid.dt)


def yosida_cauchy_check(
    spec: OperatorSpec,
    nl: NonlinearitySpec,
    noise: VectorNoisePath,
    u0: StateLike,
    alpha: float,
    beta: float,
    config: Optional[SolverConfig] = None,
    nemitsky: Optional[NemitskyOperator] = None,
) -> CauchyReport:
    """
    sup_t ||y_alpha(t) - y_beta(t)||^2 for two Yosida parameters on one noise path.

    The report carries the a-priori bound; a run exceeding it is logged as a
    warning and reported with ``passes`` False.
    """
    if not (alpha > 0 and beta > 0):
        raise PreconditionError(f"Yosida parameters must be positive (got {alpha}, {beta})")
    nemitsky = nemitsky or NemitskyOperator.everywhere(nl, spec.size)
    first = _yosida_run(spec, nl, noise, u0, alpha, config, nemitsky)
    if alpha == beta:
        return CauchyReport(alpha, beta, 0.0)
    second = _yosida_run(spec, nl, noise, u0, beta, config, nemitsky)
    diff = first.y - second.y
    bound = (alpha + beta) * (
        _forcing_energy(spec, nemitsky, first) + _forcing_energy(spec, nemitsky, second)
    )
    report = CauchyReport(alpha, beta, float(np.max(spec.inner(diff, diff))), bound)
    if not report.passes:
        logger.warning(
            "yosida cauchy: sup||y_a - y_b||^2 = %.3e exceeds the bound %.3e",
            report.sup_sq_diff,
            report.bound,
        )
    return report


@dataclass
class HalvingStudy:
    alphas: List[float]
    sup_diffs: List[float]

    @property
    def factors(self) -> List[float]:
        return [a / b if b > 0 else math.inf for a, b in zip(self.sup_diffs, self.sup_diffs[1:])]

    def within(self, low: float = 1.3, high: float = 3.0) -> bool:
        return all(low <= f <= high for f in self.factors)

    def to_dict(self) -> dict:
        return {"alphas": self.alphas, "sup_diffs": self.sup_diffs, "factors": self.factors}


def yosida_halving_study(
    spec: OperatorSpec,
    nl: NonlinearitySpec,
    noise: VectorNoisePath,
    u0: StateLike,
    alpha0: float,
    halvings: int = 3,
    config: Optional[SolverConfig] = None,
    nemitsky: Optional[NemitskyOperator] = None,
) -> HalvingStudy:
    """
    sup_t ||y_a - y_{a/2}|| for a = alpha0, alpha0/2, ...; an O(alpha)
    scheme shrinks it by about 2 per halving.
    """
    alphas = [alpha0 / 2**i for i in range(halvings + 2)]
    runs = [_yosida_run(spec, nl, noise, u0, a, config, nemitsky).y for a in alphas]
    diffs = [
        float(np.max(spec.norm(runs[i] - runs[i + 1]))) for i in range(len(runs) - 1)
    ]
    return HalvingStudy(alphas=alphas[:-1], sup_diffs=diffs)


def yosida_energy_band(
    spec: OperatorSpec,
    nl: NonlinearitySpec,
    noise: VectorNoisePath,
    u0: StateLike,
    alphas: Sequence[float] = (1e-1, 1e-2, 1e-3),
    config: Optional[SolverConfig] = None,
    nemitsky: Optional[NemitskyOperator] = None,
) -> Dict[float, float]:
    """sup_t of the a-priori energy for each Yosida parameter."""
    return {
        float(a): float(np.max(_yosida_run(spec, nl, noise, u0, a, config, nemitsky).energy))
        for a in alphas
    }
