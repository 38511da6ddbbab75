import logging
from abc import ABC

from fidelity import FidelityKind, FidelitySpec
from pipeline.base import PipelineStage
from pipeline.context import PipelineContext
from solver import master_tradeoff, solve_for_uncertainty


class SolveStage(PipelineStage, ABC):
    """Stage 2: compute announced rules or a trade-off curve."""


class ClosedFormSolve(SolveStage):
    progress_marker = ("solve", "Solving QID groups")

    def __init__(self, spec: FidelitySpec, jobs: int = 1) -> None:
        self.spec = spec
        self.jobs = jobs

    def execute(self, ctx: PipelineContext) -> None:
        logging.info(f"Fidelity: {self.spec.describe()}, workers: {self.jobs}")
        callback = ctx.progress.callback("solve", "groups") if ctx.progress else None
        gamma_star, ctx.master = solve_for_uncertainty(
            ctx.dataset,
            self.spec,
            jobs=self.jobs,
            progress_callback=callback,
            groups=ctx.groups,
        )
        logging.info(f"Optimal minimum uncertainty gamma*={gamma_star:.6f} nats")


class TradeoffSweep(SolveStage):
    progress_marker = ("sweep", "Sweeping fidelity")

    def __init__(self, kind: FidelityKind | str, steps: int) -> None:
        self.kind = FidelityKind(kind)
        self.steps = steps

    def execute(self, ctx: PipelineContext) -> None:
        logging.info(f"Sweeping {self.kind.value} over {self.steps} points")
        callback = ctx.progress.callback("sweep", "groups") if ctx.progress else None
        ctx.curve = master_tradeoff(
            ctx.dataset,
            self.kind,
            self.steps,
            groups=ctx.groups,
            progress_callback=callback,
        )
