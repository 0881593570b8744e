"""
File formats: CSV traces, JSON reports and the run manifest.

CSV numbers use 17 significant digits and '.' as decimal separator; every
file is UTF-8 with LF line endings. JSON documents carry ``schema_version``,
sorted keys and two-space indentation, so equal inputs give equal bytes.
"""

import dataclasses
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from .netop import OperatorSpec, operator_triplets

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

PathLike = Union[str, Path]


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def jsonable(obj: Any) -> Any:
    """Convert numpy values, dataclasses and objects with to_dict into JSON types."""
    if hasattr(obj, "to_dict") and callable(obj.to_dict):
        return jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        # JSON has no inf/nan literals
        return value if math.isfinite(value) else str(value)
    return obj


def dumps(data: Dict[str, Any]) -> str:
    doc = dict(jsonable(data))
    doc.setdefault("schema_version", SCHEMA_VERSION)
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_json(path: PathLike, data: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps(data))
    logger.info("wrote %s", path)
    return path


def _write_rows(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[float]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(fmt(v) for v in row) + "\n")
    logger.debug("wrote %s", path)
    return path


def write_table(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[float]]) -> Path:
    """Numeric table with a header row."""
    return _write_rows(path, header, rows)


def write_path_csv(path: PathLike, times: np.ndarray, values: np.ndarray) -> Path:
    """Scalar path as ``t,value`` rows."""
    return _write_rows(path, ("t", "value"), zip(times, values))


def write_trajectory_csv(path: PathLike, times: np.ndarray, values: np.ndarray) -> Path:
    """Vector trajectory (n+1, N) as ``t,coord_0,...`` rows."""
    values = np.asarray(values)
    header = ["t"] + [f"coord_{i}" for i in range(values.shape[1])]
    return _write_rows(path, header, ([t, *row] for t, row in zip(times, values)))


def export_triplets(spec: OperatorSpec, path: PathLike, tol: float = 0.0) -> Path:
    """Sparse ``row col value`` lines of the assembled generator."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row, col, value in operator_triplets(spec, tol):
            f.write(f"{row} {col} {fmt(value)}\n")
    return path


def read_csv(path: PathLike) -> np.ndarray:
    """Numeric body of a CSV written by this module."""
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def config_hash(flat: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON of a flat configuration."""
    canonical = json.dumps(jsonable(flat), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    """
    Everything needed to reproduce a run.

    Attributes:
        version: Package version
        command: Subcommand that produced the run
        config: Flat configuration with every default filled in
        seed: Master seed
        diagnostics: Summary numbers of the run
        files: Files written, relative to the output directory
    """

    version: str
    command: str
    config: Dict[str, Any]
    seed: int
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    files: List[str] = field(default_factory=list)

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "command": self.command,
            "config": self.config,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "diagnostics": self.diagnostics,
            "files": sorted(self.files),
        }

    def write(self, directory: PathLike, name: str = "manifest.json") -> Path:
        return write_json(Path(directory) / name, self.to_dict())


def write_solution(bundle, directory: PathLike, stem: str = "solution") -> List[str]:
    """
    Trajectory CSVs of u and W_A for a SolutionBundle.

    Returns:
        File names relative to ``directory``
    """
    directory = Path(directory)
    times = bundle.grid.points
    files = [
        write_trajectory_csv(directory / f"{stem}_u.csv", times, bundle.u),
        write_trajectory_csv(directory / f"{stem}_convolution.csv", times, bundle.convolution.values),
        _write_rows(
            directory / f"{stem}_energy.csv", ("t", "energy"), zip(times, bundle.energy)
        ),
    ]
    return [p.name for p in files]


def mc_summary(estimate: Optional[Any]) -> Optional[dict]:
    """{estimate, stderr, n} of an MC estimate (None passes through)."""
    if estimate is None:
        return None
    return {"estimate": estimate.estimate, "stderr": estimate.stderr, "n": estimate.n}
