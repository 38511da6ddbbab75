import logging
from abc import ABC

from oracle import GridSpec, TooLargeError, grid_oracle
from pipeline.base import PipelineStage
from pipeline.context import PipelineContext
from privacy import BETA_TOLERANCE, confidence_report
from solver import InternalInfeasibleError


class AuditStage(PipelineStage, ABC):
    """Stage 3: check the announced rules after solving."""


class ConfidenceAudit(AuditStage):
    """Recompute every posterior of the announced mapping against beta*."""

    def execute(self, ctx: PipelineContext) -> None:
        report = confidence_report(ctx.dataset, ctx.master.mapping, ctx.groups)
        ctx.confidence = report
        if report.max_confidence > ctx.master.beta_star + BETA_TOLERANCE:
            raise InternalInfeasibleError(
                f"Announced rules reach confidence {report.max_confidence} "
                f"above beta*={ctx.master.beta_star}"
            )
        logging.info(
            f"Audit passed: max confidence {report.max_confidence:.6f}, "
            f"min uncertainty {report.min_uncertainty:.6f}"
        )


class OracleVerify(AuditStage):
    """Compare each group's closed-form optimum with the grid oracle."""

    progress_marker = ("verify", "Running grid oracle")

    def __init__(self, step: float, tolerance: float) -> None:
        self.grid = GridSpec(step)
        self.tolerance = tolerance

    def execute(self, ctx: PipelineContext) -> None:
        total = len(ctx.master.groups)
        for n, sol in enumerate(ctx.master.groups, start=1):
            label = ctx.dataset.qid_label(sol.qid)
            row = {"qid": ctx.dataset.qid_dict(sol.qid), "size": sol.group.size, "beta_star": sol.beta_star}
            try:
                result = grid_oracle(sol.group, sol.bounds, self.grid)
            except TooLargeError as e:
                logging.warning(f"Skipping group {label}: {e}")
                row.update(beta_grid=None, gap=None, skipped=str(e))
            else:
                gap = abs(result.beta_grid - sol.beta_star)
                row.update(
                    beta_grid=result.beta_grid,
                    gap=gap,
                    modulus=result.modulus,
                    witness=result.witness,
                    skipped=None,
                )
                log = logging.info if gap <= self.tolerance else logging.error
                log(f"Group {label}: closed form {sol.beta_star:.6f}, grid {result.beta_grid:.6f}, gap {gap:.2e}")
            ctx.verify_rows.append(row)
            if ctx.progress:
                ctx.progress.update("verify", n / total, f"{n:,} of {total:,} groups")
