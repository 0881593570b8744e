"""
fracspde Command Line Interface

Stochastic evolution equations driven by fractional and Hermite noise

Usage:
    fracspde-cli info                Show version, dependencies and suites
    fracspde-cli sample-noise        Sample noise paths and check their covariance
    fracspde-cli verify              Run verification suites
    fracspde-cli solve               Run the solver or the neuron experiment

Or via Python module:
    python -m fracspde <command>
"""

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from . import config as config_mod
from .covariance import cov
from .errors import (
    ConfigurationError,
    FracSpdeError,
    PreconditionError,
    UnsupportedError,
)
from .export import (
    RunManifest,
    write_json,
    write_path_csv,
    write_solution,
    write_table,
)
from .netop import scalar_operator
from .neuron import build_neuron, experiment_table, run_experiment
from .noise1d import path_seed, sample_paths
from .qnoise import embed_scalar
from .solver import fitzhugh_nagumo, solve
from .stats import mc_covariance
from .verify import CHECKPOINTS, VerifySettings, available_suites, run_verification

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


# =============================================================================
# ANSI Color Codes
# =============================================================================
class Color:
    RESET = "\033[0m"
    BOLD = "\033[1m"
    RED = "\033[31m"
    GREEN = "\033[32m"
    YELLOW = "\033[33m"
    BLUE = "\033[34m"
    CYAN = "\033[36m"

    _enabled = True

    @classmethod
    def disable(cls):
        cls._enabled = False

    @classmethod
    def enable(cls):
        cls._enabled = True

    @classmethod
    def get(cls, color: str) -> str:
        return color if cls._enabled else ""


def colorize(color: str) -> str:
    """Apply color code if colors are enabled."""
    return Color.get(color)


def print_banner():
    version = get_version()
    print(
        f"{colorize(Color.CYAN)}{colorize(Color.BOLD)}fracspde{colorize(Color.RESET)} v{version}"
        " - fractional-noise evolution equations\n"
    )


# =============================================================================
# Utility Functions
# =============================================================================
def get_version() -> str:
    try:
        from . import __version__

        return __version__
    except ImportError:
        return "unknown"


def print_success(msg: str):
    print(f"{colorize(Color.GREEN)}✓ {colorize(Color.RESET)}{msg}")


def print_error(msg: str):
    print(f"{colorize(Color.RED)}✗ Error: {colorize(Color.RESET)}{msg}", file=sys.stderr)


def print_warning(msg: str):
    print(f"{colorize(Color.YELLOW)}⚠ Warning: {colorize(Color.RESET)}{msg}")


def print_info(msg: str):
    print(f"{colorize(Color.BLUE)}ℹ {colorize(Color.RESET)}{msg}")


def print_section(title: str):
    print(f"\n{colorize(Color.BOLD)}{colorize(Color.CYAN)}═══ {title} ═══{colorize(Color.RESET)}\n")


# flag dest -> dotted configuration key
FLAG_KEYS = {
    "seed": "run.seed",
    "output": "run.output_dir",
    "ensemble": "run.ensemble",
    "workers": "run.workers",
    "quick": "run.quick",
    "T": "grid.T",
    "n": "grid.n",
    "n_x": "grid.n_x",
    "m_inner": "grid.m_inner",
    "family": "noise.family",
    "H": "noise.H",
    "K": "noise.K",
    "q": "noise.q",
    "r": "noise.r",
    "J": "noise.J",
    "paths": "noise.paths",
    "model": "model.kind",
    "a": "model.a",
    "scheme": "solver.scheme",
    "alpha": "solver.alpha",
    "dt": "solver.dt",
    "xi": "neuron.xi",
    "noise_v": "neuron.noise_v",
    "suite": "verify.suite",
}


def resolve_config(args) -> config_mod.RunConfig:
    """Defaults < --config file < FRACSPDE_OUTPUT_DIR < flags."""
    overrides = {
        key: getattr(args, dest) for dest, key in FLAG_KEYS.items() if getattr(args, dest, None) is not None
    }
    cfg = config_mod.resolve(getattr(args, "config", None), overrides)
    return cfg.quick_sized()


def _manifest(command: str, cfg: config_mod.RunConfig, diagnostics: Dict[str, Any], files: List[str]):
    return RunManifest(
        version=get_version(),
        command=command,
        config=cfg.to_flat_dict(),
        seed=cfg.seed,
        diagnostics=diagnostics,
        files=files,
    )


# =============================================================================
# Command: info - Show version and dependency information
# =============================================================================
def cmd_info(args):
    """Show version, dependency versions and available suites."""
    print_section("fracspde Information")

    import scipy

    print(f"{colorize(Color.BOLD)}Version:{colorize(Color.RESET)}")
    print(f"  fracspde:  {colorize(Color.GREEN)}{get_version()}{colorize(Color.RESET)}")
    print(f"  numpy:     {np.__version__}")
    print(f"  scipy:     {scipy.__version__}")
    print(f"  pyyaml:    {yaml.__version__}")
    print()
    print(f"{colorize(Color.BOLD)}Noise families:{colorize(Color.RESET)} fbm, bifbm, hermite")
    print(f"{colorize(Color.BOLD)}Solver schemes:{colorize(Color.RESET)} semi-implicit, yosida, exponential")
    print(f"{colorize(Color.BOLD)}Verification suites:{colorize(Color.RESET)}")
    for name in available_suites():
        print(f"  {name}")
    return EXIT_OK


# =============================================================================
# Command: sample-noise - Sample paths and compare covariances
# =============================================================================
def cmd_sample_noise(args):
    """Write path CSVs and a covariance summary."""
    cfg = resolve_config(args)
    kernel = cfg.kernel()
    grid = cfg.grid()
    out = Path(cfg.output_dir)
    print_section(f"Sampling {cfg.paths} {kernel.label()} paths")

    def batch(start: int) -> np.ndarray:
        count = min(64, cfg.paths - start)
        return sample_paths(kernel, grid, cfg.seed, count, m_inner=cfg.m_inner, start=start)

    starts = list(range(0, cfg.paths, 64))
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        values = np.concatenate(list(pool.map(batch, starts)))

    files = []
    for i, path in enumerate(values):
        files.append(write_path_csv(out / f"path_{i:04d}.csv", grid.points, path).name)

    checkpoints = []
    for u, w in CHECKPOINTS:
        s, t = u * grid.T, w * grid.T
        entry: Dict[str, Any] = {"s": s, "t": t, "analytic": float(cov(kernel, s, t))}
        if values.shape[0] >= 2:
            est = mc_covariance(values[:, grid.snap(s)], values[:, grid.snap(t)])
            entry["empirical"] = est.to_dict()
        checkpoints.append(entry)
    summary = {"kernel": kernel.to_dict(), "paths": cfg.paths, "checkpoints": checkpoints}
    files.append(write_json(out / "summary.json", summary).name)
    _manifest("sample-noise", cfg, {"paths": cfg.paths}, files).write(out)
    print_success(f"Wrote {cfg.paths} paths and summary.json to {out}")
    return EXIT_OK


# =============================================================================
# Command: verify - Run verification suites
# =============================================================================
def cmd_verify(args):
    """Run suites and write a JSON pass/fail report."""
    cfg = resolve_config(args)
    settings = VerifySettings(seed=cfg.seed, quick=cfg.quick, kernel=cfg.kernel())
    print_section(f"Verification: {cfg.suite}")
    report = run_verification(cfg.suite, settings, workers=cfg.workers)

    for suite in report.suites:
        if suite.passed:
            print_success(f"{suite.name} ({suite.duration_s:.1f}s)")
        elif suite.error:
            print_error(f"{suite.name}: {suite.error}")
        else:
            print_warning(f"{suite.name}: failed {', '.join(suite.failing())}")

    out = Path(cfg.output_dir)
    files = [write_json(out / "verify_report.json", report.to_dict()).name]
    _manifest("verify", cfg, {"passed": report.passed}, files).write(out)

    if report.passed:
        print_success("All criteria passed")
        return EXIT_OK
    for line in report.failing():
        print_error(f"failing criterion: {line}")
    return EXIT_FAILURE


# =============================================================================
# Command: solve - Solver and neuron experiment
# =============================================================================
def _solve_scalar(cfg: config_mod.RunConfig, out: Path) -> Dict[str, Any]:
    spec = scalar_operator(cfg.a)
    nl = fitzhugh_nagumo(cfg.xi)
    grid = cfg.grid()
    kernel = cfg.kernel()
    solver_config = cfg.solver_config()

    def one(index: int):
        values = sample_paths(kernel, grid, cfg.seed, 1, m_inner=cfg.m_inner, start=index)[0]
        noise = embed_scalar(values, grid, kernel, path_seed(cfg.seed, index))
        return solve(spec, nl, noise, np.zeros(1), solver_config)

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        bundles = list(pool.map(one, range(cfg.ensemble)))
    files: List[str] = []
    for i, bundle in enumerate(bundles):
        files += write_solution(bundle, out, stem=f"solution_{i:04d}")
    finals = np.array([b.u[-1, 0] for b in bundles])
    return {
        "files": files,
        "diagnostics": {
            "final_mean": float(finals.mean()),
            "sup_norm": max(b.diagnostics["sup_norm"] for b in bundles),
            "energy_violations": sum(b.energy_violations for b in bundles),
        },
    }


def _solve_neuron(cfg: config_mod.RunConfig, out: Path) -> Dict[str, Any]:
    params = cfg.neuron_params()
    solver_config = cfg.solver_config()
    report = run_experiment(
        params=params,
        config=solver_config,
        kernel=cfg.kernel(),
        ensemble=max(2, cfg.ensemble),
        seed=cfg.seed,
        n_x=cfg.n_x,
        grid=cfg.grid(),
        qspec=cfg.qspec(),
        m_inner=cfg.m_inner,
        workers=cfg.workers,
    )
    header, rows = experiment_table(report)
    files = [write_table(out / "soma_quantiles.csv", header, rows).name]
    files.append(write_json(out / "experiment.json", report.to_dict()).name)

    model = build_neuron(params, cfg.n_x, cfg.qspec(), cfg.kernel())
    noise = model.noise.sample(cfg.grid(), cfg.seed, 0, cfg.m_inner)
    files += write_solution(model.solve(noise, None, solver_config), out, stem="path_0000")
    diagnostics = {
        "sup_norm": report.sup_norm,
        "contraction_passes": report.contraction.passes if report.contraction else None,
        "long_memory_z": report.long_memory_z,
        **report.diagnostics,
    }
    return {"files": files, "diagnostics": diagnostics}


def cmd_solve(args):
    """Run the configured model and write trajectories and the manifest."""
    cfg = resolve_config(args)
    out = Path(cfg.output_dir)
    print_section(f"Solving {cfg.model} with {cfg.kernel().label()} noise ({cfg.scheme})")
    if cfg.model == "neuron":
        result = _solve_neuron(cfg, out)
    else:
        result = _solve_scalar(cfg, out)
    _manifest("solve", cfg, result["diagnostics"], result["files"]).write(out)
    print_success(f"Wrote {len(result['files'])} files and manifest.json to {out}")
    return EXIT_OK


# =============================================================================
# Argument parsing
# =============================================================================
def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="YAML configuration file (flat dotted or nested keys)")
    parser.add_argument("--seed", type=int, help="Master seed (default: 0)")
    parser.add_argument("-o", "--output", help="Output directory (env: FRACSPDE_OUTPUT_DIR)")
    parser.add_argument("--workers", type=int, help="Thread pool size (default: 1)")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")


def _add_noise(parser: argparse.ArgumentParser):
    parser.add_argument("--family", choices=["fbm", "bifbm", "hermite"], help="Noise family")
    parser.add_argument("--H", type=float, help="Hurst parameter")
    parser.add_argument("--K", type=float, help="bifbm exponent K")
    parser.add_argument("--q", type=int, help="Hermite chaos order")
    parser.add_argument("--m-inner", dest="m_inner", type=int, help="Hermite inner resolution")


def _add_grid(parser: argparse.ArgumentParser):
    parser.add_argument("--T", type=float, help="Time horizon (default: 1)")
    parser.add_argument("--n", type=int, help="Time steps (default: 256)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracspde-cli",
        description="Stochastic evolution equations driven by fractional and Hermite noise",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""
{colorize(Color.BOLD)}Examples:{colorize(Color.RESET)}
  fracspde-cli sample-noise --family fbm --H 0.7 --n 1024 --paths 100 --seed 7
  fracspde-cli verify --suite isometry --family fbm --H 0.75
  fracspde-cli verify --suite all --quick
  fracspde-cli solve --model neuron --family fbm --H 0.7 --ensemble 16
  fracspde-cli solve --config run.yaml -o results/

Exit status: 0 pass, 1 verification failure, 2 usage or configuration error.
Run '{colorize(Color.CYAN)}fracspde-cli <command> --help{colorize(Color.RESET)}' for more information.
""",
    )
    parser.add_argument("--version", action="store_true", help="Show version")
    parser.add_argument("--no-color", action="store_true", help="Disable colored output")

    subparsers = parser.add_subparsers(dest="command", help="Commands")

    info_parser = subparsers.add_parser("info", help="Show version, dependencies and suites")
    info_parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    info_parser.set_defaults(func=cmd_info)

    sample_parser = subparsers.add_parser("sample-noise", help="Sample noise paths to CSV")
    _add_common(sample_parser)
    _add_noise(sample_parser)
    _add_grid(sample_parser)
    sample_parser.add_argument("--paths", type=int, help="Number of paths (default: 100)")
    sample_parser.set_defaults(func=cmd_sample_noise)

    verify_parser = subparsers.add_parser("verify", help="Run verification suites")
    _add_common(verify_parser)
    _add_noise(verify_parser)
    verify_parser.add_argument(
        "--suite", help=f"Suite name, comma list or 'all' ({', '.join(available_suites())})"
    )
    verify_parser.add_argument(
        "--quick", action="store_true", default=None, help="Reduced sample sizes"
    )
    verify_parser.set_defaults(func=cmd_verify)

    solve_parser = subparsers.add_parser("solve", help="Run the solver or the neuron experiment")
    _add_common(solve_parser)
    _add_noise(solve_parser)
    _add_grid(solve_parser)
    solve_parser.add_argument("--model", choices=["scalar-test", "neuron"], help="Model")
    solve_parser.add_argument(
        "--scheme", choices=["semi-implicit", "yosida", "exponential"], help="Time scheme"
    )
    solve_parser.add_argument("--alpha", type=float, help="Yosida parameter")
    solve_parser.add_argument("--dt", type=float, help="Step (must equal T/n)")
    solve_parser.add_argument("--n-x", dest="n_x", type=int, help="Cells per edge")
    solve_parser.add_argument("--a", type=float, help="Rate of the scalar test operator")
    solve_parser.add_argument("--r", type=float, help="Eigenvalue decay of Q")
    solve_parser.add_argument("--J", type=int, help="Noise modes per channel")
    solve_parser.add_argument("--xi", type=float, help="FitzHugh threshold")
    solve_parser.add_argument(
        "--no-noise-v", dest="noise_v", action="store_false", default=None, help="No recovery noise"
    )
    solve_parser.add_argument("--ensemble", type=int, help="Number of noise paths")
    solve_parser.add_argument("--quick", action="store_true", default=None, help="Reduced sizes")
    solve_parser.set_defaults(func=cmd_solve)
    return parser


def main(argv: Optional[List[str]] = None):
    """Main entry point."""
    argv = list(sys.argv[1:] if argv is None else argv)
    # Check for --no-color
    if "--no-color" in argv:
        Color.disable()
        argv.remove("--no-color")

    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.version:
        print_banner()
        return EXIT_OK

    if args.command is None:
        print_banner()
        parser.print_help()
        return EXIT_OK

    try:
        return args.func(args)
    except (ConfigurationError, PreconditionError, UnsupportedError) as e:
        print_error(str(e))
        return EXIT_USAGE
    except (OSError, yaml.YAMLError) as e:
        print_error(f"{type(e).__name__}: {e}")
        return EXIT_USAGE
    except FracSpdeError as e:
        print_error(f"{type(e).__name__}: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
