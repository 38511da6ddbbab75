import logging
import os
from abc import ABC

from pipeline.base import PipelineStage
from pipeline.context import PipelineContext
from report import solution_report, verify_report, write_curve, write_json


class ExportStage(PipelineStage, ABC):
    """Stage 4: write the run's results under ``ctx.output_dir``."""

    def __init__(self, filename: str) -> None:
        self.filename = filename

    def _target(self, ctx: PipelineContext) -> str:
        if os.path.isabs(self.filename):
            return self.filename
        return os.path.join(ctx.output_dir, self.filename)


class SolutionReportExport(ExportStage):
    def execute(self, ctx: PipelineContext) -> None:
        path = self._target(ctx)
        write_json(path, solution_report(ctx.dataset, ctx.master, ctx.config))
        ctx.report_file = path


class CurveExport(ExportStage):
    def execute(self, ctx: PipelineContext) -> None:
        path = self._target(ctx)
        write_curve(path, ctx.curve)
        ctx.curve_file = path


class VerifyReportExport(ExportStage):
    def __init__(self, filename: str, tolerance: float, step: float) -> None:
        super().__init__(filename)
        self.tolerance = tolerance
        self.step = step

    def execute(self, ctx: PipelineContext) -> None:
        path = self._target(ctx)
        payload = verify_report(ctx.verify_rows, self.tolerance, self.step)
        payload["config"] = ctx.config
        write_json(path, payload)
        ctx.report_file = path
        if not payload["passed"]:
            logging.error(f"Oracle gap {payload['max_gap']:.2e} exceeds tolerance {self.tolerance}")
