"""CLI entry point for agtv-tomo"""

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from agtv_tomo import __version__
from agtv_tomo.config import Config, read_flat_config
from agtv_tomo.errors import NumericalError
from agtv_tomo.solvers import METHODS
from agtv_tomo.tools import (
    CompareConfig,
    RunConfig,
    SweepConfig,
    run_compare,
    run_phantom,
    run_project,
    run_reconstruct,
    run_sweep,
)
from agtv_tomo.utils.logging import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="Flat key=value configuration file")
    parser.add_argument("--out", type=Path, help="Output directory of the run")
    parser.add_argument("--seed", dest="noise_seed", type=int, help="Noise seed")
    parser.add_argument("--quiet", action="store_true", help="Only warnings and errors on stderr")


def _phantom_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, help="Image side length")
    parser.add_argument("--shepp-logan", dest="shepp_logan", action="store_true", help="Shepp-Logan phantom")
    parser.add_argument("--variant", choices=["modified", "original"], help="Shepp-Logan intensities")
    parser.add_argument("--spec", dest="phantom_spec", type=Path, help="JSON ellipse list")
    parser.add_argument("--image", dest="image_path", type=Path, help="Ground-truth image file")


def _acquisition_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--angles", dest="angle_count", type=int, help="Number of projection angles")
    parser.add_argument("--angle-range", dest="angle_range", type=float, help="Angular range in degrees")
    parser.add_argument("--rays", type=int, help="Rays per angle (default n)")
    parser.add_argument("--noise-model", dest="noise_model", choices=["poisson", "gaussian"])
    parser.add_argument("--noise-level", dest="noise_level", type=float, help="Relative noise level")


def _solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", dest="input_dir", type=Path, help="Directory written by 'project'")
    parser.add_argument("--method", choices=METHODS)
    parser.add_argument("--lambda", dest="lambda", type=float, help="Wavelet sparsity weight")
    parser.add_argument("--gamma", type=float, help="Graph TV weight")
    parser.add_argument("--tau1", type=float)
    parser.add_argument("--tau2", type=float)
    parser.add_argument("--tau3", type=float)
    parser.add_argument("--epsilon", type=float, help="Relative-change tolerance")
    parser.add_argument("--outer-epsilon", dest="outer_epsilon", type=float)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--inner-iters", dest="inner_iters", type=int, help="J or iteration count")
    parser.add_argument("--outer-iters", dest="outer_iters", type=int, help="I, graph rebuilds")
    parser.add_argument("--k", type=int, help="Neighbours per pixel")
    parser.add_argument("--patch-side", dest="patch_side", type=int)
    parser.add_argument("--eta", type=float, help="ART/SIRT relaxation")
    parser.add_argument("--art-mode", dest="art_mode", choices=["cyclic", "randomized"])
    parser.add_argument("--sirt-mode", dest="sirt_mode", choices=["cimmino", "sart"])
    parser.add_argument("--exact-knn", dest="knn_exact", action="store_true")
    parser.add_argument("--knn-quality", dest="knn_quality", type=int)
    parser.add_argument("--wavelet-levels", dest="wavelet_levels", type=int)
    parser.add_argument("--fbp-crop", dest="fbp_crop", type=float)
    parser.add_argument("--solver-seed", dest="seed", type=int, help="Seed of the neighbour search")
    parser.add_argument("--literal-beta", dest="literal_beta", action="store_true")
    parser.add_argument("--no-objective", dest="log_objective", action="store_false")
    parser.add_argument("--profile-row", dest="profile_row", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agtv-tomo",
        description="Sparse-view CT reconstruction with adaptive graph total variation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text, argument_default=argparse.SUPPRESS)
        _common(sub)
        return sub

    phantom = command("phantom", "Rasterize a phantom")
    _phantom_flags(phantom)

    project = command("project", "Simulate a noisy sinogram")
    _phantom_flags(project)
    _acquisition_flags(project)
    project.add_argument("--csv", dest="sinogram_csv", action="store_true", help="Also write sino.csv")

    reconstruct = command("reconstruct", "Reconstruct with one method")
    _phantom_flags(reconstruct)
    _acquisition_flags(reconstruct)
    _solver_flags(reconstruct)
    reconstruct.add_argument("--export-graph", dest="export_graph", action="store_true")

    sweep = command("sweep", "Parameter sweep")
    _phantom_flags(sweep)
    _acquisition_flags(sweep)
    _solver_flags(sweep)
    sweep.add_argument("--lambdas", help="Comma-separated lambda values")
    sweep.add_argument("--gammas", help="Comma-separated gamma values")
    sweep.add_argument("--ks", help="Comma-separated K values")
    sweep.add_argument("--angle-counts", dest="angle_counts", help="Comma-separated angle counts")
    sweep.add_argument("--noise-levels", dest="noise_levels", help="Comma-separated noise levels")
    sweep.add_argument("--seeds", help="Comma-separated noise seeds")
    sweep.add_argument("--workers", type=int)
    sweep.add_argument("--cap", type=int, help="Maximum number of configurations")

    compare = command("compare", "Compare methods on shared sinograms")
    _phantom_flags(compare)
    _acquisition_flags(compare)
    _solver_flags(compare)
    compare.add_argument("--methods", help="Comma-separated methods (default all)")
    compare.add_argument("--seeds", help="Comma-separated noise seeds")
    compare.add_argument("--angle-counts", dest="angle_counts", help="Comma-separated angle counts")
    compare.add_argument("--noise-levels", dest="noise_levels", help="Comma-separated noise levels")
    compare.add_argument("--workers", type=int)
    compare.add_argument("--no-images", dest="save_images", action="store_false")

    return parser


def merge_settings(args: argparse.Namespace) -> Dict[str, Any]:
    """Configuration file values overridden by the flags given on the command line."""
    flags = {key: value for key, value in vars(args).items() if key not in ("command", "config", "quiet")}
    shepp_logan = flags.pop("shepp_logan", False)
    settings: Dict[str, Any] = {}
    config_path = getattr(args, "config", None)
    if config_path is not None:
        settings.update(read_flat_config(config_path))
    settings.update(flags)
    if shepp_logan:
        settings.pop("phantom_spec", None)
        settings.pop("image_path", None)
    return {key: value for key, value in settings.items() if value is not None}


async def dispatch(command: str, settings: Dict[str, Any], config: Config):
    if command == "phantom":
        return await run_phantom(RunConfig.from_flat(settings))
    if command == "project":
        return await run_project(RunConfig.from_flat(settings))
    if command == "reconstruct":
        return await run_reconstruct(RunConfig.from_flat(settings))
    if command == "sweep":
        settings.setdefault("cap", config.SWEEP_CAP)
        settings.setdefault("workers", config.WORKERS)
        return await run_sweep(SweepConfig.from_flat(settings))
    settings.setdefault("workers", config.WORKERS)
    settings.setdefault("seeds", list(range(1, config.COMPARE_SEEDS + 1)))
    return await run_compare(CompareConfig.from_flat(settings))


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = Config.load()
        config.validate()
    except ValueError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    setup_logging(config.LOG_FILE, config.LOG_LEVEL, quiet=getattr(args, "quiet", False))

    try:
        response = asyncio.run(dispatch(args.command, merge_settings(args), config))
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    except ValueError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG

    print(response.model_dump_json(indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
