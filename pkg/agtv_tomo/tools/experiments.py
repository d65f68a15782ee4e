"""Experiment tools: phantom, project, reconstruct, sweep and compare"""

import asyncio
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from agtv_tomo.config import Config
from agtv_tomo.errors import ConfigError, NumericalError
from agtv_tomo.metrics import MetricReport, intensity_profile, raps
from agtv_tomo.projector import ProjectionMatrix, relative_noise
from agtv_tomo.solvers import ReconResult, solver_config
from agtv_tomo.storage import FileStorage, StorageBackend
from agtv_tomo.tools.models import (
    CompareConfig,
    CompareResponse,
    MethodSummary,
    PhantomResponse,
    ProjectResponse,
    ReconstructResponse,
    RunConfig,
    SweepConfig,
    SweepPoint,
    SweepResponse,
)
from agtv_tomo.tools.pipeline import (
    PHANTOM_FILE,
    SINOGRAM_FILE,
    Acquisition,
    acquire,
    evaluate,
    make_phantom,
    prepare,
    system_matrix,
)

logger = logging.getLogger(__name__)

TRACE_HEADER = ["iteration", "objective", "residual_u", "residual_v", "wall_time_ms"]
METRICS_HEADER = [
    "run_id",
    "method",
    "rel_l2_error",
    "outer_iterations",
    "inner_iterations",
    "wall_time",
    "profile_row",
]
SWEEP_HEADER = [
    "run_id",
    "method",
    "n",
    "angle_count",
    "noise_model",
    "noise_level",
    "seed",
    "lambda",
    "gamma",
    "k",
    "status",
    "rel_l2_error",
    "wall_time",
    "outer_iterations",
    "inner_iterations",
    "error",
]
COMPARE_HEADER = [
    "method",
    "angle_count",
    "noise_level",
    "seed",
    "status",
    "rel_l2_error",
    "wall_time",
    "outer_iterations",
    "inner_iterations",
    "error",
]
SUMMARY_HEADER = [
    "method",
    "angle_count",
    "noise_level",
    "runs",
    "failures",
    "mean_rel_l2_error",
    "std_rel_l2_error",
    "mean_wall_time",
]
SWEEP_FILE = "sweep.csv"

# manifest keys a sweep row does not depend on beyond its run_id
_SWEEP_ROW_FREE_KEYS = {
    "command",
    "version",
    "out",
    "export_graph",
    "sinogram_csv",
    "profile_row",
    "lambda",
    "gamma",
    "k",
    "angle_count",
    "noise_level",
    "noise_seed",
    "lambdas",
    "gammas",
    "ks",
    "angle_counts",
    "noise_levels",
    "seeds",
}


@dataclass
class MethodOutcome:
    """One method run inside a comparison."""

    method: str
    angle_count: int
    noise_level: float
    seed: int
    result: Optional[ReconResult] = None
    report: Optional[MetricReport] = None
    error: Optional[str] = None


def resolve_out(cfg: RunConfig, command: str) -> Path:
    """Output directory of a command: ``cfg.out`` or ``$AGTV_OUTPUT_DIR/<command>``."""
    if cfg.out is not None:
        return cfg.out
    return Config.load().output_dir / command


def _optional(value: Optional[float]) -> str:
    return "" if value is None else repr(value)


def _write_result(storage: StorageBackend, run_id: str, result: ReconResult, report: MetricReport) -> None:
    storage.save_image("recon.img", result.image)
    storage.save_preview("recon.pgm", result.image)
    storage.write_csv(
        "metrics.csv",
        METRICS_HEADER,
        [
            [
                run_id,
                result.method,
                _optional(report.rel_l2_error),
                result.outer_iterations_used,
                sum(result.inner_iterations_used),
                repr(result.wall_time),
                report.profile_row,
            ]
        ],
    )
    storage.write_csv("trace.csv", TRACE_HEADER, result.trace_rows())
    storage.write_csv(
        "profile.csv", ["column", "intensity"], list(enumerate(report.profile))
    )
    if report.raps:
        storage.write_csv("raps.csv", ["bin", "power"], list(enumerate(report.raps)))


async def run_phantom(cfg: RunConfig) -> PhantomResponse:
    """
    Rasterize the configured phantom and store it.

    Args:
        cfg: Run configuration (phantom_spec, variant, image_path, n)

    Returns:
        PhantomResponse with the image path and value range
    """
    logger.info("run_phantom called")
    storage = FileStorage(resolve_out(cfg, "phantom"))

    image = await asyncio.to_thread(make_phantom, cfg)
    storage.save_image(PHANTOM_FILE, image)
    storage.save_preview("phantom.pgm", image)
    storage.write_manifest({"command": "phantom", **cfg.to_flat()})

    logger.info(f"Phantom {image.shape[0]}x{image.shape[1]} written to {storage.run_dir}")
    return PhantomResponse(
        path=str(storage.path(PHANTOM_FILE)),
        n=image.shape[0],
        min_value=float(image.min()),
        max_value=float(image.max()),
    )


async def run_project(cfg: RunConfig) -> ProjectResponse:
    """
    Simulate a noisy parallel-beam acquisition of the configured phantom.

    Writes the ground truth, the noisy sinogram, the system matrix and a
    manifest recording the noise seed. A stored system matrix with the same
    geometry is reused.
    """
    logger.info("run_project called")
    storage = FileStorage(resolve_out(cfg, "project"))

    truth = await asyncio.to_thread(make_phantom, cfg)
    A, reused = await asyncio.to_thread(
        system_matrix, truth.shape[0], cfg.angle_count, cfg.angle_range, cfg.rays, storage
    )
    acquisition = await asyncio.to_thread(acquire, cfg, truth, A)

    storage.save_image(PHANTOM_FILE, truth)
    storage.save_sinogram(SINOGRAM_FILE, acquisition.noisy)
    if not reused:
        storage.save_system(A)
    if cfg.sinogram_csv:
        offsets = A.detector_offsets()
        rows = [
            [a, repr(float(A.angles[a])), r, repr(float(offsets[r])), repr(float(acquisition.noisy[a, r]))]
            for a in range(A.q)
            for r in range(A.p)
        ]
        storage.write_csv("sino.csv", ["angle_index", "angle_deg", "ray", "offset", "value"], rows)

    clean_norm = float(np.linalg.norm(acquisition.clean))
    realized = relative_noise(acquisition.noisy, acquisition.clean) if clean_norm > 0 else 0.0
    storage.write_manifest(
        {"command": "project", **cfg.to_flat(), "relative_noise": repr(realized)}
    )

    logger.info(f"Sinogram {A.q}x{A.p} written, realized noise {realized:.4f}")
    return ProjectResponse(
        path=str(storage.path(SINOGRAM_FILE)),
        angle_count=A.q,
        rays=A.p,
        relative_noise=realized,
        reused_system=reused,
    )


async def run_reconstruct(cfg: RunConfig) -> ReconstructResponse:
    """
    Reconstruct with the configured method and write image, metrics, traces and manifest.

    The data come from ``cfg.input_dir`` when set, otherwise they are
    simulated from the configured phantom. Errors propagate to the caller.
    """
    logger.info(f"run_reconstruct called with method {cfg.method}")
    out = resolve_out(cfg, "reconstruct")
    storage = FileStorage(out)

    acquisition = await asyncio.to_thread(prepare, cfg)
    solver = cfg.solver_config()
    result, report = await asyncio.to_thread(
        evaluate, cfg.method, acquisition, solver, cfg.profile_row
    )

    _write_result(storage, out.name, result, report)
    if cfg.export_graph:
        if result.graph is not None and cfg.method in ("gtv", "agtv"):
            storage.save_graph(result.graph)
        else:
            logger.warning(f"Method {cfg.method} builds no patch graph; nothing exported")
    storage.write_manifest({"command": "reconstruct", **cfg.to_flat()})

    return ReconstructResponse(
        path=str(storage.path("recon.img")),
        method=cfg.method,
        rel_l2_error=report.rel_l2_error,
        outer_iterations=result.outer_iterations_used,
        inner_iterations=result.inner_iterations_used,
        wall_time=result.wall_time,
    )


def _sweep_row(
    cfg: SweepConfig,
    point: SweepPoint,
    result: Optional[ReconResult],
    report: Optional[MetricReport],
    error: Optional[str],
) -> List:
    base = cfg.base
    return [
        point.run_id,
        base.method,
        base.n,
        point.angle_count,
        base.noise_model,
        repr(point.noise_level),
        point.seed,
        repr(point.lam),
        repr(point.gamma),
        point.k,
        "ok" if error is None else "error",
        _optional(report.rel_l2_error) if report else "",
        repr(result.wall_time) if result else "",
        result.outer_iterations_used if result else "",
        sum(result.inner_iterations_used) if result else "",
        error or "",
    ]


def _check_sweep_settings(previous: Dict[str, str], current: Dict[str, str], table: Path) -> None:
    """Refuse to resume a sweep table written with different base settings."""
    if not previous:
        return
    old = {k: v for k, v in previous.items() if k not in _SWEEP_ROW_FREE_KEYS}
    new = {k: str(v) for k, v in current.items() if k not in _SWEEP_ROW_FREE_KEYS and v not in (None, "")}
    changed = sorted(key for key in old.keys() | new.keys() if old.get(key) != new.get(key))
    if changed:
        raise ConfigError(
            f"{table} was written with different settings ({', '.join(changed)}); "
            "choose another output directory"
        )


async def run_sweep(cfg: SweepConfig) -> SweepResponse:
    """
    Run every configuration of a parameter sweep and append one CSV row each.

    Configurations with an ``ok`` row in the sweep table are skipped, so an
    interrupted sweep resumes where it stopped; failed ones run again and
    append a new row. Resuming requires the base settings recorded in the
    manifest to match. Configurations run concurrently on ``cfg.workers``
    threads; rows are appended in sweep order.
    """
    logger.info(f"run_sweep called with {cfg.size} configurations")
    base = cfg.base
    if base.input_dir is not None and (cfg.angle_counts or cfg.noise_levels or cfg.seeds):
        raise ConfigError("Angle, noise and seed axes need simulated data, not input_dir")

    storage = FileStorage(resolve_out(base, "sweep"))
    manifest = {"command": "sweep", **base.to_flat()}
    for axis in ("lambdas", "gammas", "ks", "angle_counts", "noise_levels", "seeds"):
        values = getattr(cfg, axis)
        if values:
            manifest[axis] = ",".join(str(v) for v in values)

    rows = storage.read_csv(SWEEP_FILE)
    if rows:
        _check_sweep_settings(storage.read_manifest(), manifest, storage.path(SWEEP_FILE))
    done = {row["run_id"] for row in rows if row["status"] == "ok"}
    points = cfg.points()
    pending = [point for point in points if point.run_id not in done]
    skipped = len(points) - len(pending)
    if skipped:
        logger.info(f"Skipping {skipped} configurations already completed in {SWEEP_FILE}")
    storage.write_manifest(manifest)

    truth = None if base.input_dir is not None else await asyncio.to_thread(make_phantom, base)
    systems: Dict[int, ProjectionMatrix] = {}
    acquisitions: Dict[Tuple[int, float, int], Acquisition] = {}
    for point in pending:
        key = (point.angle_count, point.noise_level, point.seed)
        if key in acquisitions:
            continue
        if truth is None:
            acquisitions[key] = await asyncio.to_thread(prepare, base)
            continue
        if point.angle_count not in systems:
            systems[point.angle_count], _ = await asyncio.to_thread(
                system_matrix, truth.shape[0], point.angle_count, base.angle_range, base.rays
            )
        run = base.model_copy(
            update={
                "angle_count": point.angle_count,
                "noise_level": point.noise_level,
                "noise_seed": point.seed,
            }
        )
        acquisitions[key] = await asyncio.to_thread(acquire, run, truth, systems[point.angle_count])

    semaphore = asyncio.Semaphore(cfg.workers)

    async def run_point(point: SweepPoint) -> List:
        async with semaphore:
            solver = solver_config(
                base.method, {**base.solver, "lam": point.lam, "gamma": point.gamma, "k": point.k}
            )
            acquisition = acquisitions[(point.angle_count, point.noise_level, point.seed)]
            try:
                result, report = await asyncio.to_thread(
                    evaluate, base.method, acquisition, solver, base.profile_row
                )
            except (ValueError, NumericalError) as e:
                logger.error(f"Sweep point {point.run_id} failed: {e}")
                return _sweep_row(cfg, point, None, None, str(e))
            return _sweep_row(cfg, point, result, report, None)

    tasks = [asyncio.create_task(run_point(point)) for point in pending]
    failed = 0
    for task in tasks:
        row = await task
        failed += row[SWEEP_HEADER.index("status")] == "error"
        storage.append_csv(SWEEP_FILE, SWEEP_HEADER, [row])

    logger.info(f"run_sweep completed: {len(pending)} run, {skipped} skipped, {failed} failed")
    return SweepResponse(
        path=str(storage.path(SWEEP_FILE)),
        completed=len(pending) - failed,
        skipped=skipped,
        failed=failed,
    )


def _summaries(outcomes: List[MethodOutcome]) -> List[MethodSummary]:
    grouped: Dict[Tuple[str, int, float], List[MethodOutcome]] = {}
    for outcome in outcomes:
        grouped.setdefault((outcome.method, outcome.angle_count, outcome.noise_level), []).append(outcome)

    summaries = []
    for (method, angle_count, noise_level), group in grouped.items():
        errors = [
            o.report.rel_l2_error
            for o in group
            if o.report is not None and o.report.rel_l2_error is not None
        ]
        times = [o.result.wall_time for o in group if o.result is not None]
        std = None
        if errors:
            std = float(np.std(errors, ddof=1)) if len(errors) > 1 else 0.0
        summaries.append(
            MethodSummary(
                method=method,
                angle_count=angle_count,
                noise_level=noise_level,
                runs=len(group),
                mean_rel_l2_error=float(np.mean(errors)) if errors else None,
                std_rel_l2_error=std,
                mean_wall_time=float(np.mean(times)) if times else None,
                failures=sum(o.error is not None for o in group),
            )
        )
    return summaries


async def run_compare(cfg: CompareConfig) -> CompareResponse:
    """
    Run each method on the same noisy sinograms and tabulate errors, profiles and spectra.

    One sinogram file is written per (angle count, noise level, seed) and
    every method reconstructs from that file. A failing method is logged and
    recorded in its row; the comparison continues. Without a noise level
    axis, file names carry only the angle count.

    Writes compare.csv, summary.csv, profiles.csv, raps.csv and traces.csv.
    """
    logger.info(f"run_compare called for {', '.join(cfg.methods)}")
    base = cfg.base
    if base.input_dir is not None and cfg.noise_levels:
        raise ConfigError("A noise level axis needs simulated data, not input_dir")

    storage = FileStorage(resolve_out(base, "compare"))
    angle_counts = cfg.angle_counts or [base.angle_count]
    levels = cfg.noise_levels or [base.noise_level]
    seeds = cfg.seeds if base.input_dir is None else [base.noise_seed]
    manifest = {
        "command": "compare",
        **base.to_flat(resolved=False),
        "methods": ",".join(cfg.methods),
        "seeds": ",".join(str(s) for s in seeds),
        "angle_counts": ",".join(str(q) for q in angle_counts),
    }
    if cfg.noise_levels:
        manifest["noise_levels"] = ",".join(repr(level) for level in levels)
    storage.write_manifest(manifest)

    def tag(q: int, level: float) -> str:
        return f"q{q}_nl{level:g}" if cfg.noise_levels else f"q{q}"

    jobs: List[Tuple[str, int, float, int, Acquisition]] = []
    if base.input_dir is not None:
        acquisition = await asyncio.to_thread(prepare, base)
        angle_counts = [acquisition.A.q]
        jobs = [
            (m, acquisition.A.q, base.noise_level, base.noise_seed, acquisition) for m in cfg.methods
        ]
    else:
        truth = await asyncio.to_thread(make_phantom, base)
        storage.save_image(PHANTOM_FILE, truth)
        for q in angle_counts:
            A, _ = await asyncio.to_thread(
                system_matrix, truth.shape[0], q, base.angle_range, base.rays
            )
            for level in levels:
                for seed in seeds:
                    run = base.model_copy(
                        update={"angle_count": q, "noise_level": level, "noise_seed": seed}
                    )
                    acquisition = await asyncio.to_thread(acquire, run, truth, A)
                    name = f"sino_{tag(q, level)}_s{seed}.sin"
                    storage.save_sinogram(name, acquisition.noisy)
                    acquisition.noisy = storage.load_sinogram(name)
                    jobs.extend((m, q, level, seed, acquisition) for m in cfg.methods)

    semaphore = asyncio.Semaphore(cfg.workers)

    async def run_method(
        method: str, q: int, level: float, seed: int, acquisition: Acquisition
    ) -> MethodOutcome:
        outcome = MethodOutcome(method=method, angle_count=q, noise_level=level, seed=seed)
        async with semaphore:
            try:
                solver = base.solver_config(method)
                outcome.result, outcome.report = await asyncio.to_thread(
                    evaluate, method, acquisition, solver, base.profile_row
                )
            except (ValueError, NumericalError) as e:
                logger.error(f"{method} failed on {q} views, noise {level:g}, seed {seed}: {e}")
                outcome.error = str(e)
        return outcome

    tasks = [asyncio.create_task(run_method(*job)) for job in jobs]
    outcomes = [await task for task in tasks]

    compare_rows, trace_rows, profile_rows, raps_rows = [], [], [], []
    first_seed = seeds[0]
    for outcome, job in zip(outcomes, jobs):
        result, report = outcome.result, outcome.report
        key = [outcome.angle_count, repr(outcome.noise_level)]
        compare_rows.append(
            [
                outcome.method,
                *key,
                outcome.seed,
                "ok" if outcome.error is None else "error",
                _optional(report.rel_l2_error) if report else "",
                repr(result.wall_time) if result else "",
                result.outer_iterations_used if result else "",
                sum(result.inner_iterations_used) if result else "",
                outcome.error or "",
            ]
        )
        if result is None or report is None:
            continue
        trace_rows.extend([outcome.method, *key, outcome.seed, *row] for row in result.trace_rows())
        if outcome.seed != first_seed:
            continue
        profile_rows.extend(
            [*key, outcome.method, report.profile_row, c, repr(v)] for c, v in enumerate(report.profile)
        )
        raps_rows.extend([*key, outcome.method, k, repr(v)] for k, v in enumerate(report.raps))
        if cfg.save_images:
            name = f"recon_{outcome.method}_{tag(outcome.angle_count, outcome.noise_level)}"
            storage.save_image(f"{name}.img", result.image)
            storage.save_preview(f"{name}.pgm", result.image)

    # the ground truth does not depend on the noise level; its rows leave it blank
    truth_images = {job[1]: job[4].truth for job in jobs if job[4].truth is not None}
    for q, truth in truth_images.items():
        row = base.profile_row if base.profile_row is not None else truth.shape[0] // 2
        profile_rows.extend(
            [q, "", "truth", row, c, repr(float(v))] for c, v in enumerate(intensity_profile(truth, row))
        )
        if truth.shape[0] % 2 == 0:
            raps_rows.extend([q, "", "truth", k, repr(float(v))] for k, v in enumerate(raps(truth)))

    summaries = _summaries(outcomes)
    storage.write_csv("compare.csv", COMPARE_HEADER, compare_rows)
    storage.write_csv(
        "traces.csv", ["method", "angle_count", "noise_level", "seed", *TRACE_HEADER], trace_rows
    )
    storage.write_csv(
        "profiles.csv",
        ["angle_count", "noise_level", "source", "row", "column", "intensity"],
        profile_rows,
    )
    storage.write_csv("raps.csv", ["angle_count", "noise_level", "source", "bin", "power"], raps_rows)
    storage.write_csv(
        "summary.csv",
        SUMMARY_HEADER,
        [
            [
                s.method,
                s.angle_count,
                repr(s.noise_level),
                s.runs,
                s.failures,
                _optional(s.mean_rel_l2_error),
                _optional(s.std_rel_l2_error),
                _optional(s.mean_wall_time),
            ]
            for s in summaries
        ],
    )

    logger.info(f"run_compare completed: {len(outcomes)} runs")
    return CompareResponse(path=str(storage.path("compare.csv")), summaries=summaries)
