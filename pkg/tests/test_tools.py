"""Tests for the experiment tools"""

import logging

import pytest
import pytest_asyncio
from pydantic import ValidationError

from agtv_tomo.errors import ConfigError
from agtv_tomo.storage import FileStorage
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


def _small(**extra) -> RunConfig:
    values = {"n": 16, "angle_count": 12, "noise_level": 0.05}
    values.update(extra)
    return RunConfig(**values)


@pytest_asyncio.fixture
async def projected(tmp_path):
    """A simulated acquisition written by the project tool."""
    out = tmp_path / "acq"
    await run_project(_small(out=out))
    return out


@pytest.mark.asyncio
async def test_run_phantom_default_output(tmp_path):
    """Test that the phantom lands under the configured output directory."""
    response = await run_phantom(_small())
    assert response.n == 16
    assert response.max_value == pytest.approx(1.0)

    run_dir = tmp_path / "runs" / "phantom"
    assert (run_dir / "phantom.img").exists()
    assert (run_dir / "phantom.pgm").exists()
    assert FileStorage(run_dir).read_manifest()["command"] == "phantom"


@pytest.mark.asyncio
async def test_run_project_reuses_system(tmp_path):
    out = tmp_path / "acq"
    first = await run_project(_small(out=out, sinogram_csv=True))
    assert not first.reused_system
    assert (first.angle_count, first.rays) == (12, 16)
    assert abs(first.relative_noise - 0.05) < 0.02

    storage = FileStorage(out)
    manifest = storage.read_manifest()
    assert manifest["noise_seed"] == "1"
    assert float(manifest["relative_noise"]) == pytest.approx(first.relative_noise)
    assert len(storage.read_csv("sino.csv")) == 12 * 16

    second = await run_project(_small(out=out, noise_seed=2))
    assert second.reused_system
    assert second.relative_noise != first.relative_noise


@pytest.mark.asyncio
async def test_run_reconstruct_from_input(projected, tmp_path):
    out = tmp_path / "cs"
    cfg = RunConfig(input_dir=projected, out=out, method="cs", solver={"inner_iters": 5})
    response = await run_reconstruct(cfg)

    assert response.method == "cs"
    assert 0.0 < response.rel_l2_error < 1.0
    storage = FileStorage(out)
    for name in ("recon.img", "recon.pgm", "profile.csv", "raps.csv", "manifest.cfg"):
        assert storage.path(name).exists()
    assert len(storage.read_csv("trace.csv")) == sum(response.inner_iterations)
    metrics = storage.read_csv("metrics.csv")[0]
    assert metrics["method"] == "cs"
    assert float(metrics["rel_l2_error"]) == pytest.approx(response.rel_l2_error)
    assert len(storage.read_csv("profile.csv")) == 16


@pytest.mark.asyncio
async def test_run_reconstruct_without_truth(projected, tmp_path):
    (projected / "phantom.img").unlink()
    out = tmp_path / "blind"
    response = await run_reconstruct(RunConfig(input_dir=projected, out=out, method="fbp"))
    assert response.rel_l2_error is None
    assert FileStorage(out).read_csv("metrics.csv")[0]["rel_l2_error"] == ""


@pytest.mark.asyncio
async def test_run_reconstruct_exports_graph(tmp_path):
    out = tmp_path / "agtv"
    cfg = _small(
        out=out,
        method="agtv",
        export_graph=True,
        solver={"inner_iters": 3, "outer_iters": 2, "k": 5},
    )
    response = await run_reconstruct(cfg)
    assert response.outer_iterations <= 2
    header = (out / "graph.txt").read_text().splitlines()[0].split()
    assert header[:2] == ["16", "5"]


@pytest.mark.asyncio
async def test_export_graph_without_graph_warns(tmp_path, caplog):
    out = tmp_path / "fbp"
    with caplog.at_level(logging.WARNING):
        await run_reconstruct(_small(out=out, method="fbp", export_graph=True))
    assert "builds no patch graph" in caplog.text
    assert not (out / "graph.txt").exists()


@pytest.mark.asyncio
async def test_run_sweep_resumes(tmp_path):
    values = {"n": 16, "angle_count": 12, "method": "cs", "inner_iters": 3, "out": tmp_path / "sweep"}
    cfg = SweepConfig.from_flat({**values, "lambdas": "0.1,0.2", "workers": 2})

    first = await run_sweep(cfg)
    assert (first.completed, first.skipped, first.failed) == (2, 0, 0)
    rows = FileStorage(tmp_path / "sweep").read_csv("sweep.csv")
    assert [row["lambda"] for row in rows] == ["0.1", "0.2"]
    assert all(row["status"] == "ok" for row in rows)

    again = await run_sweep(cfg)
    assert (again.completed, again.skipped) == (0, 2)
    assert len(FileStorage(tmp_path / "sweep").read_csv("sweep.csv")) == 2


@pytest.mark.asyncio
async def test_run_sweep_records_failures(tmp_path):
    values = {"n": 16, "angle_count": 12, "method": "gtv", "inner_iters": 2, "out": tmp_path / "sweep"}
    response = await run_sweep(SweepConfig.from_flat({**values, "ks": "5,300"}))
    assert (response.completed, response.failed) == (1, 1)

    rows = FileStorage(tmp_path / "sweep").read_csv("sweep.csv")
    assert [row["status"] for row in rows] == ["ok", "error"]
    assert "K must satisfy" in rows[1]["error"]


@pytest.mark.asyncio
async def test_run_sweep_retries_failed_rows(tmp_path):
    values = {"n": 16, "angle_count": 12, "method": "gtv", "inner_iters": 2, "out": tmp_path / "sweep"}
    cfg = SweepConfig.from_flat({**values, "ks": "5,300"})
    await run_sweep(cfg)

    again = await run_sweep(cfg)
    assert (again.completed, again.skipped, again.failed) == (0, 1, 1)
    rows = FileStorage(tmp_path / "sweep").read_csv("sweep.csv")
    assert [row["status"] for row in rows] == ["ok", "error", "error"]


@pytest.mark.asyncio
async def test_run_sweep_refuses_other_settings(tmp_path):
    """A sweep table written for one method is not resumed by another."""
    values = {"n": 16, "angle_count": 12, "inner_iters": 3, "out": tmp_path / "sweep", "lambdas": "0.1,0.2"}
    await run_sweep(SweepConfig.from_flat({**values, "method": "cs"}))

    with pytest.raises(ConfigError, match="method"):
        await run_sweep(SweepConfig.from_flat({**values, "method": "sirt"}))
    assert len(FileStorage(tmp_path / "sweep").read_csv("sweep.csv")) == 2


@pytest.mark.asyncio
async def test_run_sweep_extends_axes(tmp_path):
    """Adding values to an axis resumes the table and runs only the new points."""
    values = {"n": 16, "angle_count": 12, "method": "cs", "inner_iters": 3, "out": tmp_path / "sweep"}
    await run_sweep(SweepConfig.from_flat({**values, "lambdas": "0.1"}))

    extended = await run_sweep(SweepConfig.from_flat({**values, "lambdas": "0.1,0.2"}))
    assert (extended.completed, extended.skipped) == (1, 1)


@pytest.mark.asyncio
async def test_run_sweep_rejects_data_axes_with_input(projected):
    cfg = SweepConfig(base=RunConfig(input_dir=projected), seeds=[1, 2], lambdas=[0.1])
    with pytest.raises(ConfigError):
        await run_sweep(cfg)


@pytest.mark.asyncio
async def test_run_compare(tmp_path):
    out = tmp_path / "compare"
    cfg = CompareConfig(
        base=_small(out=out, solver={"inner_iters": 3, "k": 300}),
        methods=["fbp", "sirt", "gtv"],
        seeds=[1, 2],
    )
    response = await run_compare(cfg)

    storage = FileStorage(out)
    rows = storage.read_csv("compare.csv")
    assert len(rows) == 6
    assert {row["status"] for row in rows if row["method"] == "gtv"} == {"error"}
    assert {row["status"] for row in rows if row["method"] != "gtv"} == {"ok"}

    summaries = {s.method: s for s in response.summaries}
    assert summaries["gtv"].failures == 2
    assert summaries["gtv"].mean_rel_l2_error is None
    assert summaries["fbp"].runs == 2
    assert summaries["fbp"].std_rel_l2_error is not None
    assert len(storage.read_csv("summary.csv")) == 3

    sources = {row["source"] for row in storage.read_csv("profiles.csv")}
    assert sources == {"fbp", "sirt", "truth"}
    assert storage.path("sino_q12_s1.sin").exists()
    assert storage.path("sino_q12_s2.sin").exists()
    assert storage.path("recon_fbp_q12.img").exists()
    assert not storage.path("recon_gtv_q12.img").exists()
    assert storage.read_manifest()["methods"] == "fbp,sirt,gtv"


@pytest.mark.asyncio
async def test_run_compare_over_angle_counts(tmp_path):
    """Every (method, angle count) pair gets its own summary."""
    out = tmp_path / "compare"
    cfg = CompareConfig(
        base=_small(out=out, angle_count=8, solver={"inner_iters": 2}),
        methods=["fbp", "cs"],
        seeds=[4],
        angle_counts=[8, 16],
        save_images=False,
    )
    response = await run_compare(cfg)
    assert {(s.method, s.angle_count) for s in response.summaries} == {
        ("fbp", 8),
        ("fbp", 16),
        ("cs", 8),
        ("cs", 16),
    }
    assert not FileStorage(out).path("recon_fbp_q8.img").exists()


@pytest.mark.asyncio
async def test_run_compare_over_noise_levels(tmp_path):
    out = tmp_path / "compare"
    cfg = CompareConfig.from_flat(
        {
            "n": 16,
            "angle_count": 12,
            "inner_iters": 2,
            "out": out,
            "methods": "fbp,cs",
            "seeds": "1",
            "noise_levels": "0.02,0.2",
        }
    )
    response = await run_compare(cfg)

    summaries = {(s.method, s.noise_level): s for s in response.summaries}
    assert set(summaries) == {("fbp", 0.02), ("fbp", 0.2), ("cs", 0.02), ("cs", 0.2)}
    assert summaries[("fbp", 0.02)].mean_rel_l2_error < summaries[("fbp", 0.2)].mean_rel_l2_error

    storage = FileStorage(out)
    assert {row["noise_level"] for row in storage.read_csv("compare.csv")} == {"0.02", "0.2"}
    assert storage.path("sino_q12_nl0.02_s1.sin").exists()
    assert storage.path("recon_cs_q12_nl0.2.img").exists()
    assert storage.read_manifest()["noise_levels"] == "0.02,0.2"


def test_compare_noise_levels_validated():
    with pytest.raises(ValidationError):
        CompareConfig(base=_small(), noise_levels=[0.1, 1.5])


@pytest.mark.asyncio
async def test_compare_noise_levels_need_simulated_data(projected):
    cfg = CompareConfig(base=RunConfig(input_dir=projected), methods=["fbp"], noise_levels=[0.1])
    with pytest.raises(ConfigError):
        await run_compare(cfg)
