"""
Neuron model: FitzHugh-Nagumo axon, Rall dendrite and a dynamic soma.

The axon nonlinearity u(1-u)(u-xi) is split into the shift -lambda u, moved
into the linear operator through p - lambda, and the non-increasing rest
h(u) = -lambda u + u(1-u)(u-xi). Noise enters the axon, dendrite and
recovery blocks; the soma coordinate receives none.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from .covariance import CovarianceKernel, fbm
from .errors import ConfigurationError
from .export import RunManifest
from .netop import (
    NetworkCoefficients,
    NetworkLayout,
    OperatorSpec,
    StateVector,
    _one,
    assemble,
)
from .noise1d import TimeGrid, path_seed
from .qnoise import EdgeBlock, QSpec, VectorNoisePath, basis_matrix, sample_qnoise
from .solver import (
    ContractionReport,
    NemitskyOperator,
    NonlinearitySpec,
    SolutionBundle,
    SolverConfig,
    contraction_check,
    fitzhugh_nagumo,
    solve,
)
from .stats import MCEstimate, mc_mean

logger = logging.getLogger(__name__)

CHANNELS = ("u", "u_d", "v")
DEFAULT_MODES = 16
QUANTILES = (0.05, 0.5, 0.95)


@dataclass(frozen=True)
class NeuronParams:
    """
    Attributes:
        xi: FitzHugh threshold in (0, 1)
        gamma_soma: Soma damping
        eps: Recovery damping
        c, c_d, p, p_d: Axon and dendrite coefficients on [0, 1]
        noise_u, noise_d, noise_v: Channels that receive noise
    """

    xi: float = 0.5
    gamma_soma: float = 1.0
    eps: float = 1.0
    c: Callable = _one
    c_d: Callable = _one
    p: Callable = _one
    p_d: Callable = _one
    noise_u: bool = True
    noise_d: bool = True
    noise_v: bool = True

    def __post_init__(self):
        if not 0.0 < self.xi < 1.0:
            raise ConfigurationError(f"xi={self.xi} outside (0, 1)")

    @property
    def lam(self) -> float:
        return (self.xi * self.xi - self.xi + 1.0) / 3.0

    def coefficients(self) -> NetworkCoefficients:
        return NetworkCoefficients(
            c=self.c,
            c_d=self.c_d,
            p=self.p,
            p_d=self.p_d,
            gamma_soma=self.gamma_soma,
            eps=self.eps,
            lam=self.lam,
        )

    def channels(self) -> List[str]:
        flags = {"u": self.noise_u, "u_d": self.noise_d, "v": self.noise_v}
        return [name for name in CHANNELS if flags[name]]

    def to_dict(self) -> dict:
        return {
            "xi": self.xi,
            "lambda": self.lam,
            "gamma_soma": self.gamma_soma,
            "eps": self.eps,
            "noise_channels": self.channels(),
        }


@dataclass
class NoiseChannel:
    name: str
    qspec: QSpec
    kernel: CovarianceKernel
    basis: np.ndarray
    stream: int


class NoiseAssembler:
    """
    Independent Q-noise on the u, u_d and v blocks of the reduced state.

    Each channel draws from its own sub-stream of the seed, so enabling or
    disabling one channel leaves the others unchanged.
    """

    def __init__(self, layout: NetworkLayout, mass: np.ndarray, channels: List[NoiseChannel]):
        self.layout = layout
        self.mass = mass
        self.channels = channels

    @property
    def dim(self) -> int:
        return self.layout.size

    def sample(
        self, grid: TimeGrid, seed: int, path_index: int = 0, m_inner: Optional[int] = None
    ) -> VectorNoisePath:
        values = np.zeros((grid.n + 1, self.dim))
        for channel in self.channels:
            part = sample_qnoise(
                channel.kernel,
                channel.qspec,
                grid,
                self.dim,
                path_seed(seed, channel.stream),
                path_index=path_index,
                basis=channel.basis,
                m_inner=m_inner,
            )
            values += part.values
        kernel = self.channels[0].kernel if self.channels else None
        qspec = self.channels[0].qspec if self.channels else None
        return VectorNoisePath(grid, values, qspec, kernel, int(seed), path_index)

    def trace(self) -> float:
        """Truncated trace of the assembled covariance operator."""
        return float(sum(np.sum(ch.qspec.lambdas()) for ch in self.channels))


@dataclass
class NeuronModel:
    params: NeuronParams
    operator: OperatorSpec
    nonlinearity: NonlinearitySpec
    nemitsky: NemitskyOperator
    noise: NoiseAssembler

    @property
    def layout(self) -> NetworkLayout:
        return self.operator.layout

    def rest_state(self) -> StateVector:
        n = self.layout.n_x
        return StateVector(u=np.zeros(n + 1), u_d=np.zeros(n + 1), d=0.0, v=np.zeros(n + 1))

    def unit_offset(self) -> np.ndarray:
        """Constant reduced state of unit X norm (satisfies the trace constraint)."""
        ones = np.ones(self.operator.size)
        return ones / float(self.operator.norm(ones))

    def solve(
        self,
        noise: VectorNoisePath,
        u0: Union[StateVector, np.ndarray, None] = None,
        config: Optional[SolverConfig] = None,
    ) -> SolutionBundle:
        u0 = self.rest_state() if u0 is None else u0
        return solve(self.operator, self.nonlinearity, noise, u0, config, self.nemitsky)

    def soma(self, bundle: SolutionBundle) -> np.ndarray:
        return bundle.u[:, self.layout.d]


def _channel_spec(
    value: Union[None, QSpec, Dict[str, QSpec]], name: str, n_x: int
) -> QSpec:
    if isinstance(value, dict):
        value = value.get(name)
    if value is None:
        return QSpec(r=2.0, J=min(DEFAULT_MODES, n_x - 1), basis="sine")
    return value


def _channel_kernel(
    value: Union[None, CovarianceKernel, Dict[str, CovarianceKernel]], name: str
) -> CovarianceKernel:
    if isinstance(value, dict):
        value = value.get(name)
    return value if value is not None else fbm(0.7)


def build_neuron(
    params: Optional[NeuronParams] = None,
    n_x: int = 32,
    qspecs: Union[None, QSpec, Dict[str, QSpec]] = None,
    kernels: Union[None, CovarianceKernel, Dict[str, CovarianceKernel]] = None,
    strategy: str = "expm",
) -> NeuronModel:
    """
    Assemble operator, Nemitsky lift and noise for the neuron model.

    Args:
        params: Model parameters (defaults: unit coefficients, xi = 0.5)
        n_x: Cells per edge
        qspecs: One QSpec for all channels or a dict keyed by "u", "u_d", "v"
        kernels: One kernel for all channels or a dict keyed the same way

    Raises:
        ConfigurationError: invalid coefficients, grid or basis size
    """
    params = params or NeuronParams()
    spec = assemble(params.coefficients(), n_x, strategy=strategy)
    layout = spec.layout
    nl = fitzhugh_nagumo(params.xi)

    weights = np.zeros(spec.size)
    weights[layout.u] = 1.0
    # the shared node u(0) = d carries the axon half cell
    weights[layout.d] = 0.5 * layout.h / spec.mass[layout.d]
    nemitsky = NemitskyOperator(nl, weights)

    coords = layout.block_coords()
    channels = []
    for stream, name in enumerate(CHANNELS):
        if name not in params.channels():
            continue
        qspec = _channel_spec(qspecs, name, n_x)
        indices, x = coords[name]
        basis = basis_matrix(qspec, spec.size, spec.mass, edges=[EdgeBlock(indices, x)])
        channels.append(NoiseChannel(name, qspec, _channel_kernel(kernels, name), basis, stream))
    logger.debug("neuron model: n_x=%d, noise channels %s", n_x, [c.name for c in channels])
    return NeuronModel(
        params=params,
        operator=spec,
        nonlinearity=nl,
        nemitsky=nemitsky,
        noise=NoiseAssembler(layout, spec.mass, channels),
    )


# =============================================================================
# Diagnostics
# =============================================================================
def soma_flux_residual(model: NeuronModel, bundle: SolutionBundle) -> np.ndarray:
    """
    d' + gamma d - (c(0) u'(0) - c_d(1) u_d'(1)) along a trajectory.

    d' is the backward difference matching the implicit step; the edge
    derivatives use one-sided second-order stencils. The dendrite flux is
    taken along its outward normal at x = 1, hence the minus sign. On the
    discrete solution the residual is O(h^2).

    Returns:
        Residual at t_1..t_n
    """
    lay = model.layout
    h = lay.h
    c0 = float(np.asarray(model.params.c(np.array([0.0])))[0])
    cd1 = float(np.asarray(model.params.c_d(np.array([1.0])))[0])
    u = bundle.u
    d = u[:, lay.d]
    u1 = u[:, lay.u.start]
    u2 = u[:, lay.u.start + 1]
    ud_last = u[:, lay.u_d.stop - 1]
    ud_prev = u[:, lay.u_d.stop - 2]
    du0 = (-3.0 * d + 4.0 * u1 - u2) / (2.0 * h)
    dud1 = (3.0 * d - 4.0 * ud_last + ud_prev) / (2.0 * h)
    flux = c0 * du0 - cd1 * dud1
    d_dot = np.diff(d) / bundle.grid.dt
    return d_dot + model.params.gamma_soma * d[1:] - flux[1:]


def trace_autocorrelation(traces: np.ndarray, lag: int) -> np.ndarray:
    """Empirical autocorrelation of each row of ``traces`` at ``lag`` steps."""
    x = traces - traces.mean(axis=1, keepdims=True)
    num = np.sum(x[:, :-lag] * x[:, lag:], axis=1)
    den = np.sum(x * x, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / den, 0.0)


@dataclass
class ExperimentReport:
    """
    Attributes:
        kernel: Label of the driving kernel
        ensemble: Number of paths
        times: Grid times
        soma_quantiles: Soma potential quantiles per time (len(QUANTILES), n+1)
        sup_energy: MC mean of sup_t of the a-priori energy
        sup_norm: Largest sup_t ||u(t)|| over the ensemble
        contraction: Contraction diagnostic on path 0
        autocorrelation: Soma autocorrelation at lag T/10
        wiener_autocorrelation: Same for the Brownian driver at matched trace
        manifest: Run manifest
    """

    kernel: str
    ensemble: int
    times: np.ndarray
    soma_quantiles: np.ndarray
    sup_energy: MCEstimate
    sup_norm: float
    contraction: Optional[ContractionReport]
    autocorrelation: MCEstimate
    wiener_autocorrelation: Optional[MCEstimate] = None
    soma_traces: Optional[np.ndarray] = None
    manifest: Optional[RunManifest] = None
    diagnostics: Dict[str, float] = field(default_factory=dict)

    @property
    def long_memory_z(self) -> Optional[float]:
        """z statistic of autocorrelation(fbm) - autocorrelation(Wiener)."""
        if self.wiener_autocorrelation is None:
            return None
        a, b = self.autocorrelation, self.wiener_autocorrelation
        se = math.hypot(a.stderr, b.stderr)
        if se == 0.0:
            return math.inf if a.estimate > b.estimate else -math.inf
        return (a.estimate - b.estimate) / se

    @property
    def long_memory_witnessed(self) -> Optional[bool]:
        """One-sided 95% test that the fbm trace is more autocorrelated."""
        z = self.long_memory_z
        return None if z is None else z > 1.6448536269514722

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "ensemble": self.ensemble,
            "quantile_levels": list(QUANTILES),
            "soma_quantiles_final": self.soma_quantiles[:, -1],
            "sup_energy": self.sup_energy,
            "sup_norm": self.sup_norm,
            "contraction": self.contraction.to_dict() if self.contraction else None,
            "autocorrelation": self.autocorrelation,
            "wiener_autocorrelation": self.wiener_autocorrelation,
            "long_memory_z": self.long_memory_z,
            "diagnostics": self.diagnostics,
        }


def _run_ensemble(
    model: NeuronModel,
    grid: TimeGrid,
    config: SolverConfig,
    seed: int,
    ensemble: int,
    m_inner: Optional[int],
    workers: int,
) -> List[SolutionBundle]:
    def one(index: int) -> SolutionBundle:
        noise = model.noise.sample(grid, seed, index, m_inner)
        return model.solve(noise, None, config)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(ensemble)))
    return [one(i) for i in range(ensemble)]


def _matched_wiener(model: NeuronModel) -> NeuronModel:
    """Same model and Q with Brownian modes."""
    channels = [
        NoiseChannel(ch.name, ch.qspec, fbm(0.5), ch.basis, ch.stream) for ch in model.noise.channels
    ]
    return NeuronModel(
        params=model.params,
        operator=model.operator,
        nonlinearity=model.nonlinearity,
        nemitsky=model.nemitsky,
        noise=NoiseAssembler(model.layout, model.noise.mass, channels),
    )


def run_experiment(
    params: Optional[NeuronParams] = None,
    config: Optional[SolverConfig] = None,
    kernel: Optional[CovarianceKernel] = None,
    ensemble: int = 16,
    seed: int = 0,
    n_x: int = 32,
    grid: Optional[TimeGrid] = None,
    qspec: Optional[QSpec] = None,
    m_inner: Optional[int] = None,
    workers: int = 1,
    compare_wiener: bool = True,
    contraction: bool = True,
    keep_traces: bool = False,
) -> ExperimentReport:
    """
    Ensemble run of the neuron model with trace statistics.

    Args:
        params: Model parameters
        config: Solver configuration
        kernel: Driving kernel of every channel (fbm H = 0.7 by default)
        ensemble: Number of noise paths
        seed: Master seed; path i uses sub-stream i of each channel
        n_x: Cells per edge
        grid: Time grid (T = 1, n = 256 by default)
        qspec: Covariance operator of each channel
        workers: Thread pool size over paths
        compare_wiener: Also run Brownian noise at matched trace
        contraction: Run the contraction diagnostic on path 0

    Raises:
        ConfigurationError: invalid parameters
    """
    if ensemble < 2:
        raise ConfigurationError(f"ensemble={ensemble} must be at least 2")
    params = params or NeuronParams()
    config = config or SolverConfig()
    kernel = kernel or fbm(0.7)
    grid = grid or TimeGrid(1.0, 256)
    model = build_neuron(params, n_x, qspec, kernel)
    lag = max(1, grid.n // 10)

    logger.info("neuron experiment: %s, %d paths, n=%d", kernel.label(), ensemble, grid.n)
    bundles = _run_ensemble(model, grid, config, seed, ensemble, m_inner, workers)
    traces = np.stack([model.soma(b) for b in bundles])
    energies = np.array([np.max(b.energy) for b in bundles])
    sup_norm = max(b.diagnostics["sup_norm"] for b in bundles)
    autocorr = mc_mean(trace_autocorrelation(traces, lag))

    wiener = None
    if compare_wiener and not (kernel.family == "fbm" and kernel.H == 0.5):
        reference = _matched_wiener(model)
        w_bundles = _run_ensemble(reference, grid, config, seed, ensemble, None, workers)
        w_traces = np.stack([reference.soma(b) for b in w_bundles])
        wiener = mc_mean(trace_autocorrelation(w_traces, lag))

    report_contraction = None
    if contraction:
        noise = model.noise.sample(grid, seed, 0, m_inner)
        rest = model.rest_state().to_reduced()
        report_contraction = contraction_check(
            model.operator,
            model.nonlinearity,
            noise,
            rest,
            rest + model.unit_offset(),
            config,
            model.nemitsky,
        )

    report = ExperimentReport(
        kernel=kernel.label(),
        ensemble=ensemble,
        times=grid.points,
        soma_quantiles=np.quantile(traces, QUANTILES, axis=0),
        sup_energy=mc_mean(energies),
        sup_norm=sup_norm,
        contraction=report_contraction,
        autocorrelation=autocorr,
        wiener_autocorrelation=wiener,
        soma_traces=traces if keep_traces else None,
        diagnostics={
            "energy_violations": int(sum(b.energy_violations for b in bundles)),
            "noise_trace": model.noise.trace(),
            "omega_dissipative": model.operator.omega_dissipative,
            "spectral_bound": model.operator.spectral_bound,
        },
    )
    return report


def experiment_table(report: ExperimentReport) -> Tuple[List[str], np.ndarray]:
    """Header and rows (t, soma quantiles) for CSV export."""
    header = ["t"] + [f"soma_q{int(round(100 * q)):02d}" for q in QUANTILES]
    return header, np.column_stack([report.times, report.soma_quantiles.T])
