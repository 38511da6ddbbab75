import dataclasses
import json
import logging
import os

import pytest

from fidelity import FidelitySpec
from pipeline import (
    ClosedFormSolve,
    ConfidenceAudit,
    CsvDatasetLoad,
    OracleVerify,
    PipelineContext,
    RandomDatasetLoad,
    SolutionReportExport,
    SolvePipeline,
    TradeoffPipeline,
    VerifyPipeline,
)
from pipeline.progress import ProgressReporter
from privacy import AnnouncedMapping
from solver import InternalInfeasibleError
from utils import RunDirs

logging.basicConfig(level=logging.INFO)

ROLES = {"gender": "public", "income": "sensitive"}


def _make_ctx(tmp_path) -> PipelineContext:
    output_dir = tmp_path / "output"
    output_dir.mkdir()
    log_dir = tmp_path / "logs"
    log_dir.mkdir()
    run_dirs = RunDirs(log_dir=str(log_dir), run_log_path=str(log_dir / "run.txt"))
    return PipelineContext(run_dirs=run_dirs, output_dir=str(output_dir))


def _solved_ctx(tmp_path, path, delta=0.9) -> PipelineContext:
    ctx = _make_ctx(tmp_path)
    CsvDatasetLoad(path, ROLES).execute(ctx)
    ClosedFormSolve(FidelitySpec.delta(delta)).execute(ctx)
    return ctx


def test_load_stage_partitions(tmp_path, credit_sample_path):
    ctx = _make_ctx(tmp_path)
    CsvDatasetLoad(credit_sample_path, ROLES).execute(ctx)
    assert len(ctx.dataset) == 6
    assert [g.qid for g in ctx.groups] == [("F",), ("M",)]


def test_random_load_stage(tmp_path):
    ctx = _make_ctx(tmp_path)
    RandomDatasetLoad(5, seed=1).execute(ctx)
    assert len(ctx.groups) == 5


def test_confidence_audit_passes_on_solution(tmp_path, credit_sample_path):
    ctx = _solved_ctx(tmp_path, credit_sample_path)
    ConfidenceAudit().execute(ctx)
    assert ctx.confidence.max_confidence == pytest.approx(0.675)


def test_confidence_audit_catches_leaky_mapping(tmp_path, credit_sample_path):
    ctx = _solved_ctx(tmp_path, credit_sample_path)
    ctx.master = dataclasses.replace(
        ctx.master, mapping=AnnouncedMapping.truthful(ctx.dataset)
    )
    with pytest.raises(InternalInfeasibleError):
        ConfidenceAudit().execute(ctx)


def test_oracle_verify_rows(tmp_path, credit_sample_path):
    ctx = _solved_ctx(tmp_path, credit_sample_path)
    OracleVerify(step=0.005, tolerance=0.01).execute(ctx)
    assert len(ctx.verify_rows) == 2
    female = ctx.verify_rows[0]
    assert female["qid"] == {"gender": "F"}
    assert female["size"] == 3
    assert female["gap"] <= 0.01
    assert female["skipped"] is None


def test_oracle_verify_skips_large_groups(tmp_path, input_dir):
    path = input_dir / "wide.csv"
    rows = "\n".join(f"x{k},q,{k + 1},{k / 4}" for k in range(5))
    path.write_text(f"income,gender,count,d\n{rows}\n", encoding="utf-8")
    ctx = _solved_ctx(tmp_path, str(path))
    OracleVerify(step=0.005, tolerance=0.01).execute(ctx)
    assert ctx.verify_rows[0]["gap"] is None
    assert "at most" in ctx.verify_rows[0]["skipped"]


def test_solution_export_writes_report(tmp_path, credit_sample_path):
    ctx = _solved_ctx(tmp_path, credit_sample_path)
    ctx.config = {"seed": 0}
    SolutionReportExport("solution.json").execute(ctx)
    assert ctx.report_file == os.path.join(ctx.output_dir, "solution.json")
    with open(ctx.report_file, encoding="utf-8") as f:
        report = json.load(f)
    assert report["beta_star"] == pytest.approx(0.675)
    assert report["config"] == {"seed": 0}


def test_solve_pipeline(tmp_path, credit_sample_path):
    result = SolvePipeline(
        credit_sample_path,
        ROLES,
        FidelitySpec.delta(0.9),
        output_dir=str(tmp_path / "out"),
        jobs=2,
    ).run()
    assert result["num_groups"] == 2
    assert result["num_records"] == 6
    assert result["beta_star"] == pytest.approx(0.675)
    assert result["worst_group"] == "gender=F"
    assert os.path.exists(result["report_file"])


def test_solve_pipeline_writes_progress(tmp_path, credit_sample_path, atrp_home):
    SolvePipeline(
        credit_sample_path, ROLES, FidelitySpec.delta(0.9), output_dir=str(tmp_path / "out")
    ).run()
    (run_dir,) = os.listdir(atrp_home / "logs")
    with open(atrp_home / "logs" / run_dir / "progress.json", encoding="utf-8") as f:
        progress = json.load(f)
    assert progress["stages"] == [{"key": "solve", "label": "Solving QID groups"}]
    assert progress["current_stage"] == "solve"
    assert progress["fraction"] == 1.0
    assert os.path.exists(atrp_home / "logs" / run_dir / "run.txt")


def test_tradeoff_pipeline(tmp_path, credit_sample_path):
    result = TradeoffPipeline(
        credit_sample_path, ROLES, "delta", 5, output_dir=str(tmp_path / "out")
    ).run()
    assert result["num_groups"] == 2
    assert result["num_points"] == 5
    assert result["curve_file"].endswith("tradeoff.csv")


def test_verify_pipeline_on_random_instances(tmp_path):
    result = VerifyPipeline(
        FidelitySpec.delta(0.9), output_dir=str(tmp_path / "out"), random_count=10, seed=3
    ).run()
    assert result["num_groups_checked"] == 10
    assert result["num_groups_skipped"] == 0
    assert result["passed"]
    assert result["max_gap"] <= 0.01


def test_verify_pipeline_needs_input(tmp_path):
    with pytest.raises(ValueError):
        VerifyPipeline(FidelitySpec.delta(0.9), output_dir=str(tmp_path))


def test_progress_reporter_throttles(tmp_path):
    reporter = ProgressReporter(str(tmp_path), [("solve", "Solving")])
    reporter.update("solve", 0.1, "first")
    reporter.update("solve", 0.2, "throttled")
    with open(reporter.path, encoding="utf-8") as f:
        assert json.load(f)["status_text"] == "first"
    reporter.callback("solve", "groups")(4, 4)
    with open(reporter.path, encoding="utf-8") as f:
        payload = json.load(f)
    assert payload["fraction"] == 1.0
    assert payload["status_text"] == "4 of 4 groups"


def test_progress_reporter_swallows_write_errors(tmp_path, caplog):
    reporter = ProgressReporter(str(tmp_path / "missing"), [])
    with caplog.at_level(logging.WARNING):
        reporter.update("solve", 0.5, "half")
    assert "progress.json" in caplog.text
