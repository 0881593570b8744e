"""
Run configuration with flat dotted keys.

Sources, lowest precedence first: built-in defaults, a YAML file (flat
``section.key`` entries or nested mappings), the FRACSPDE_OUTPUT_DIR
environment variable (output directory only), command-line flags.
"""

import dataclasses
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import yaml

from .convolution import ConvolutionConfig
from .covariance import CovarianceKernel
from .errors import ConfigurationError
from .export import config_hash
from .neuron import NeuronParams
from .noise1d import TimeGrid
from .qnoise import QSpec
from .solver import SCHEMES, SolverConfig

logger = logging.getLogger(__name__)

ENV_OUTPUT_DIR = "FRACSPDE_OUTPUT_DIR"
MODEL_KINDS = ("scalar-test", "neuron")

# dotted key -> attribute
KEYS: Dict[str, str] = {
    "run.seed": "seed",
    "run.output_dir": "output_dir",
    "run.ensemble": "ensemble",
    "run.workers": "workers",
    "run.quick": "quick",
    "grid.T": "T",
    "grid.n": "n",
    "grid.n_x": "n_x",
    "grid.m_inner": "m_inner",
    "noise.family": "family",
    "noise.H": "H",
    "noise.K": "K",
    "noise.q": "q",
    "noise.r": "r",
    "noise.J": "J",
    "noise.paths": "paths",
    "model.kind": "model",
    "model.a": "a",
    "solver.scheme": "scheme",
    "solver.alpha": "alpha",
    "solver.dt": "dt",
    "neuron.xi": "xi",
    "neuron.gamma_soma": "gamma_soma",
    "neuron.eps": "eps",
    "neuron.noise_v": "noise_v",
    "verify.suite": "suite",
}
ATTRS = {attr: key for key, attr in KEYS.items()}


@dataclass
class RunConfig:
    """Every parameter of a run; defaults are echoed into the manifest."""

    seed: int = 0
    output_dir: str = "fracspde-out"
    ensemble: int = 16
    workers: int = 1
    quick: bool = False
    T: float = 1.0
    n: int = 256
    n_x: int = 32
    m_inner: Optional[int] = None
    family: str = "fbm"
    H: float = 0.7
    K: float = 1.0
    q: int = 2
    r: float = 2.0
    J: int = 16
    paths: int = 100
    model: str = "neuron"
    a: float = 1.0
    scheme: str = "semi-implicit"
    alpha: float = 0.0
    dt: Optional[float] = None
    xi: float = 0.5
    gamma_soma: float = 1.0
    eps: float = 1.0
    noise_v: bool = True
    suite: str = "all"

    # -- conversions ------------------------------------------------------------
    def to_flat_dict(self) -> Dict[str, Any]:
        return {key: getattr(self, attr) for key, attr in KEYS.items()}

    @classmethod
    def from_flat_dict(cls, flat: Mapping[str, Any]) -> "RunConfig":
        return cls().updated(flat)

    def updated(self, flat: Mapping[str, Any]) -> "RunConfig":
        """Copy with the given dotted keys replaced (None values are skipped)."""
        changes = {}
        for key, value in flat.items():
            if key not in KEYS:
                raise ConfigurationError(f"unknown configuration key {key!r}")
            if value is None:
                continue
            attr = KEYS[key]
            changes[attr] = _coerce(attr, value)
        return dataclasses.replace(self, **changes)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_flat_dict(), sort_keys=True, default_flow_style=False)

    def config_hash(self) -> str:
        return config_hash(self.to_flat_dict())

    # -- derived objects ----------------------------------------------------------
    def kernel(self) -> CovarianceKernel:
        if self.family == "bifbm":
            return CovarianceKernel("bifbm", self.H, self.K)
        if self.family == "hermite":
            return CovarianceKernel("hermite", self.H, q=self.q)
        if self.family == "fbm":
            return CovarianceKernel("fbm", self.H)
        raise ConfigurationError(f"noise family {self.family!r} not in ('fbm', 'bifbm', 'hermite')")

    def grid(self) -> TimeGrid:
        return TimeGrid(self.T, self.n)

    def qspec(self) -> QSpec:
        basis = "sine" if self.model == "neuron" else "canonical"
        return QSpec(r=self.r, J=self.J, basis=basis)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            scheme=self.scheme, alpha=self.alpha, dt=self.dt, convolution=ConvolutionConfig()
        )

    def neuron_params(self) -> NeuronParams:
        return NeuronParams(
            xi=self.xi, gamma_soma=self.gamma_soma, eps=self.eps, noise_v=self.noise_v
        )

    def validate(self) -> "RunConfig":
        """
        Check every parameter domain.

        Raises:
            ConfigurationError: naming the first violated domain
        """
        checks = [
            (self.ensemble >= 1, f"run.ensemble={self.ensemble} must be >= 1"),
            (self.workers >= 1, f"run.workers={self.workers} must be >= 1"),
            (self.paths >= 1, f"noise.paths={self.paths} must be >= 1"),
            (self.n_x >= 8, f"grid.n_x={self.n_x} must be >= 8"),
            (self.model in MODEL_KINDS, f"model.kind={self.model!r} not in {MODEL_KINDS}"),
            (self.scheme in SCHEMES, f"solver.scheme={self.scheme!r} not in {SCHEMES}"),
            (self.a > 0, f"model.a={self.a} must be positive"),
            (self.gamma_soma > 0, f"neuron.gamma_soma={self.gamma_soma} must be positive"),
            (self.eps > 0, f"neuron.eps={self.eps} must be positive"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigurationError(message)
        if self.model == "neuron" and self.J > self.n_x - 1:
            raise ConfigurationError(
                f"noise.J={self.J} exceeds the {self.n_x - 1} sine modes of an edge (grid.n_x={self.n_x})"
            )
        grid = self.grid()
        if self.dt is not None and abs(self.dt - grid.dt) > 1e-12 * grid.dt:
            raise ConfigurationError(f"solver.dt={self.dt} differs from grid.T / grid.n = {grid.dt}")
        self.kernel()
        self.qspec()
        self.solver_config()
        self.neuron_params()
        return self

    def quick_sized(self) -> "RunConfig":
        """Reduced sizes for smoke runs."""
        if not self.quick:
            return self
        return dataclasses.replace(
            self,
            ensemble=min(self.ensemble, 4),
            n=min(self.n, 128),
            n_x=min(self.n_x, 16),
            J=min(self.J, 8),
            paths=min(self.paths, 10),
            dt=None,
        )


_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}
_OPTIONAL = {"m_inner": int, "dt": float}


def _coerce(attr: str, value: Any) -> Any:
    kind = _OPTIONAL.get(attr, _TYPES[attr])
    try:
        if kind is bool:
            if isinstance(value, str):
                lowered = value.strip().lower()
                if lowered in ("true", "yes", "1", "on"):
                    return True
                if lowered in ("false", "no", "0", "off"):
                    return False
                raise ValueError(value)
            return bool(value)
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if kind is float:
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigurationError(
            f"{ATTRS[attr]}={value!r} is not a valid {getattr(kind, '__name__', kind)}"
        ) from None


def flatten(data: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    """Nested mappings to dotted keys; flat dotted keys pass through."""
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(flatten(value, prefix=f"{name}."))
        else:
            flat[name] = value
    return flat


def load_yaml(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a configuration file.

    Raises:
        OSError: unreadable file
        yaml.YAMLError: malformed YAML
        ConfigurationError: top level is not a mapping
    """
    with open(path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f)
    if data is None:
        return {}
    if not isinstance(data, Mapping):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    return flatten(data)


def resolve(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Merge defaults, file, environment and flags, then validate."""
    environ = os.environ if environ is None else environ
    config = RunConfig()
    if path is not None:
        config = config.updated(load_yaml(path))
        logger.debug("loaded configuration from %s", path)
    if environ.get(ENV_OUTPUT_DIR):
        config = config.updated({"run.output_dir": environ[ENV_OUTPUT_DIR]})
    if overrides:
        config = config.updated(overrides)
    return config.validate()
