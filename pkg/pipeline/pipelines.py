import logging
import os
from typing import Callable

from fidelity import FidelityKind, FidelitySpec
from pipeline.base import Pipeline, PipelineStage
from pipeline.context import PipelineContext
from pipeline.stages.audit import ConfidenceAudit, OracleVerify
from pipeline.stages.export import CurveExport, SolutionReportExport, VerifyReportExport
from pipeline.stages.load import CsvDatasetLoad, RandomDatasetLoad
from pipeline.stages.solve import ClosedFormSolve, TradeoffSweep
from utils import (
    RunDirs,
    SolveResult,
    TradeoffResult,
    VerifyResult,
    configure_run_logging,
    resolve_log_level,
    setup_run_directories,
)

Roles = dict[str, str] | Callable[[list[str]], dict[str, str]]

# ---------------------------------------------------------------------------
# Shared preamble helper
# ---------------------------------------------------------------------------


def _prepare_run(run_dirs: RunDirs | None, debug: bool, output_dir: str) -> RunDirs:
    """Bootstrap logging + directory scaffolding shared by every pipeline."""
    if run_dirs is None:
        run_dirs = setup_run_directories()

    configure_run_logging(run_dirs["run_log_path"], resolve_log_level(debug))
    os.makedirs(output_dir, exist_ok=True)
    return run_dirs


class _RunPipeline(Pipeline):
    def __init__(
        self,
        output_dir: str,
        config: dict | None,
        debug: bool,
        run_dirs: RunDirs | None,
    ) -> None:
        self.output_dir = output_dir
        self.config = config or {}
        self.debug = debug
        self.run_dirs_arg = run_dirs

    def _build_context(self) -> PipelineContext:
        run_dirs = _prepare_run(self.run_dirs_arg, self.debug, self.output_dir)
        logging.info(f"Run log: {run_dirs['run_log_path']}")
        return PipelineContext(
            run_dirs=run_dirs,
            output_dir=self.output_dir,
            config=self.config,
            debug=self.debug,
        )


# ---------------------------------------------------------------------------
# SolvePipeline: CSV -> closed-form solve -> confidence audit -> JSON report
# ---------------------------------------------------------------------------


class SolvePipeline(_RunPipeline):
    def __init__(
        self,
        data_path: str,
        roles: Roles,
        spec: FidelitySpec,
        output_dir: str,
        report_name: str = "solution.json",
        jobs: int = 1,
        config: dict | None = None,
        debug: bool = False,
        run_dirs: RunDirs | None = None,
    ) -> None:
        super().__init__(output_dir, config, debug, run_dirs)
        self.data_path = data_path
        self.roles = roles
        self.spec = spec
        self.report_name = report_name
        self.jobs = jobs

    def build_load_stage(self) -> PipelineStage:
        return CsvDatasetLoad(self.data_path, self.roles)

    def build_solve_stage(self) -> PipelineStage:
        return ClosedFormSolve(self.spec, self.jobs)

    def build_audit_stage(self) -> PipelineStage:
        return ConfidenceAudit()

    def build_export_stage(self) -> PipelineStage:
        return SolutionReportExport(self.report_name)

    def _to_result(self, ctx: PipelineContext) -> SolveResult:
        worst = ctx.master.worst_group
        return {
            "num_groups": len(ctx.master.groups),
            "num_records": len(ctx.dataset),
            "beta_star": ctx.master.beta_star,
            "gamma_star": ctx.master.gamma_star,
            "worst_group": ctx.dataset.qid_label(worst.qid),
            "report_file": ctx.report_file,
        }


# ---------------------------------------------------------------------------
# TradeoffPipeline: CSV -> fidelity sweep -> CSV curve
# ---------------------------------------------------------------------------


class TradeoffPipeline(_RunPipeline):
    def __init__(
        self,
        data_path: str,
        roles: Roles,
        kind: FidelityKind | str,
        steps: int,
        output_dir: str,
        curve_name: str = "tradeoff.csv",
        config: dict | None = None,
        debug: bool = False,
        run_dirs: RunDirs | None = None,
    ) -> None:
        super().__init__(output_dir, config, debug, run_dirs)
        self.data_path = data_path
        self.roles = roles
        self.kind = kind
        self.steps = steps
        self.curve_name = curve_name

    def build_load_stage(self) -> PipelineStage:
        return CsvDatasetLoad(self.data_path, self.roles)

    def build_solve_stage(self) -> PipelineStage:
        return TradeoffSweep(self.kind, self.steps)

    def build_export_stage(self) -> PipelineStage:
        return CurveExport(self.curve_name)

    def _to_result(self, ctx: PipelineContext) -> TradeoffResult:
        return {
            "num_groups": len(ctx.groups),
            "num_points": len(ctx.curve),
            "curve_file": ctx.curve_file,
        }


# ---------------------------------------------------------------------------
# VerifyPipeline: CSV or random instances -> solve -> grid oracle -> JSON table
# ---------------------------------------------------------------------------


class VerifyPipeline(_RunPipeline):
    def __init__(
        self,
        spec: FidelitySpec,
        output_dir: str,
        data_path: str | None = None,
        roles: Roles | None = None,
        random_count: int | None = None,
        seed: int = 0,
        step: float = 0.005,
        tolerance: float = 0.01,
        report_name: str = "verify.json",
        jobs: int = 1,
        config: dict | None = None,
        debug: bool = False,
        run_dirs: RunDirs | None = None,
    ) -> None:
        if data_path is None and not random_count:
            raise ValueError("VerifyPipeline needs a data path or a random instance count")
        super().__init__(output_dir, config, debug, run_dirs)
        self.spec = spec
        self.data_path = data_path
        self.roles = roles
        self.random_count = random_count
        self.seed = seed
        self.step = step
        self.tolerance = tolerance
        self.report_name = report_name
        self.jobs = jobs

    def build_load_stage(self) -> PipelineStage:
        if self.random_count:
            return RandomDatasetLoad(self.random_count, self.seed)
        return CsvDatasetLoad(self.data_path, self.roles)

    def build_solve_stage(self) -> PipelineStage:
        return ClosedFormSolve(self.spec, self.jobs)

    def build_audit_stage(self) -> PipelineStage:
        return OracleVerify(self.step, self.tolerance)

    def build_export_stage(self) -> PipelineStage:
        return VerifyReportExport(self.report_name, self.tolerance, self.step)

    def _to_result(self, ctx: PipelineContext) -> VerifyResult:
        checked = [r for r in ctx.verify_rows if r["gap"] is not None]
        max_gap = max((r["gap"] for r in checked), default=None)
        return {
            "num_groups_checked": len(checked),
            "num_groups_skipped": len(ctx.verify_rows) - len(checked),
            "max_gap": max_gap,
            "passed": all(r["gap"] <= self.tolerance for r in checked),
            "report_file": ctx.report_file,
        }
