"""
fracspde - Evolution Equations Driven by Fractional and Hermite Noise

Sampling, stochastic integration and semilinear evolution equations with
long-memory Gaussian and non-Gaussian drivers.

Version: 0.1.0

Features:
- Covariance kernels of fractional, bifractional and Hermite processes
- Exact path sampling (Cholesky) and Hermite processes of any chaos order
- Wiener integrals of step and smooth integrands with the |H| isometry
- Q-noise on Hilbert spaces with sine or canonical bases
- Finite-element generator of a dendrite/soma network with its semigroup
- Stochastic convolutions, factorization and Hölder diagnostics
- Semi-implicit, Yosida-regularized and exponential solvers
- Noisy FitzHugh-Nagumo neuron experiments with long-memory statistics
- Verification suites with JSON reports and a command-line interface
"""

__version__ = "0.1.0"

# =============================================================================
# Noise
# =============================================================================
from .covariance import CovarianceKernel, bifbm, cov, cov_density, default_bound, fbm, gram, hermite  # noqa: E402
from .errors import (  # noqa: E402
    ConfigurationError,
    DivergenceError,
    FracSpdeError,
    GridMismatchError,
    PreconditionError,
    UnsupportedError,
)
from .noise1d import TimeGrid, estimate_hurst, path_seed, sample_path, sample_paths  # noqa: E402
from .qnoise import QSpec, VectorNoisePath, embed_scalar, sample_qnoise, zero_noise  # noqa: E402
from .stats import MCEstimate, mc_covariance, mc_mean, normality_report  # noqa: E402
from .wiener import StepFunction, h_inner, h_norm, wiener_integral_fn, wiener_integral_step  # noqa: E402

# =============================================================================
# Operators and equations
# =============================================================================
from .convolution import ConvolutionConfig, convolve, factorized_convolve, holder_estimate  # noqa: E402
from .netop import (  # noqa: E402
    NetworkCoefficients,
    OperatorSpec,
    StateVector,
    apply_form,
    assemble,
    scalar_operator,
    semigroup_apply,
)
from .solver import (  # noqa: E402
    NonlinearitySpec,
    SolutionBundle,
    SolverConfig,
    contraction_check,
    fitzhugh_nagumo,
    solve,
)

# =============================================================================
# Experiments, configuration and reports
# =============================================================================
from .config import RunConfig  # noqa: E402
from .export import RunManifest, write_json  # noqa: E402
from .neuron import NeuronParams, build_neuron, run_experiment  # noqa: E402
from .verify import VerifySettings, run_verification  # noqa: E402

__all__ = [
    "__version__",
    # errors
    "FracSpdeError",
    "ConfigurationError",
    "DivergenceError",
    "GridMismatchError",
    "PreconditionError",
    "UnsupportedError",
    # noise
    "CovarianceKernel",
    "fbm",
    "bifbm",
    "hermite",
    "cov",
    "cov_density",
    "default_bound",
    "gram",
    "TimeGrid",
    "path_seed",
    "sample_path",
    "sample_paths",
    "estimate_hurst",
    "MCEstimate",
    "mc_mean",
    "mc_covariance",
    "normality_report",
    "StepFunction",
    "h_inner",
    "h_norm",
    "wiener_integral_step",
    "wiener_integral_fn",
    "QSpec",
    "VectorNoisePath",
    "sample_qnoise",
    "embed_scalar",
    "zero_noise",
    # operators and equations
    "NetworkCoefficients",
    "OperatorSpec",
    "StateVector",
    "assemble",
    "scalar_operator",
    "apply_form",
    "semigroup_apply",
    "ConvolutionConfig",
    "convolve",
    "factorized_convolve",
    "holder_estimate",
    "NonlinearitySpec",
    "fitzhugh_nagumo",
    "SolverConfig",
    "SolutionBundle",
    "solve",
    "contraction_check",
    # experiments
    "NeuronParams",
    "build_neuron",
    "run_experiment",
    "RunConfig",
    "RunManifest",
    "write_json",
    "VerifySettings",
    "run_verification",
]
