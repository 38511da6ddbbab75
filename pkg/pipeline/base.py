import logging
from abc import ABC, abstractmethod
from typing import Any

from pipeline.context import PipelineContext
from pipeline.progress import ProgressReporter


class PipelineStage(ABC):
    """A single stage in a solve/audit pipeline.

    Stages mutate a shared ``PipelineContext`` rather than returning values,
    so later stages can read the outputs of earlier ones.
    """

    # ``(stage_key, label)`` for progress.json, or ``None`` for stages that
    # finish too quickly to be worth a marker.
    progress_marker: tuple[str, str] | None = None

    @abstractmethod
    def execute(self, ctx: PipelineContext) -> None: ...


class Pipeline(ABC):
    """Declarative 4-stage pipeline: Load, Solve, Audit, Export.

    Subclasses override the ``build_*_stage`` factories for the stages they
    need; a factory returning ``None`` skips its stage. :meth:`_build_context`
    seeds the ambient settings and :meth:`_to_result` projects the final
    context onto the pipeline's ``TypedDict`` result.
    """

    def build_load_stage(self) -> PipelineStage | None:
        return None

    def build_solve_stage(self) -> PipelineStage | None:
        return None

    def build_audit_stage(self) -> PipelineStage | None:
        return None

    def build_export_stage(self) -> PipelineStage | None:
        return None

    @abstractmethod
    def _build_context(self) -> PipelineContext: ...

    @abstractmethod
    def _to_result(self, ctx: PipelineContext) -> Any: ...

    def run(self) -> Any:
        ctx = self._build_context()
        stages = [
            stage
            for stage in (
                self.build_load_stage(),
                self.build_solve_stage(),
                self.build_audit_stage(),
                self.build_export_stage(),
            )
            if stage is not None
        ]
        markers = [s.progress_marker for s in stages if s.progress_marker is not None]
        ctx.progress = ProgressReporter(ctx.run_dirs["log_dir"], markers)
        for stage in stages:
            logging.debug(f"Running stage {type(stage).__name__}")
            stage.execute(ctx)
        return self._to_result(ctx)
