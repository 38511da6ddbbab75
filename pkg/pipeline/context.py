from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import pandas as pd

from dataset import QidGroup, WeightedDataset
from privacy import ConfidenceReport
from solver import MasterSolution
from utils import RunDirs

if TYPE_CHECKING:
    from pipeline.progress import ProgressReporter


@dataclass
class PipelineContext:
    """Mutable state passed through every stage of a Pipeline.

    Fields are grouped by the stage that fills them; later stages read slots
    that earlier stages populated.
    """

    # Ambient configuration, populated before any stage runs
    run_dirs: RunDirs
    output_dir: str
    # effective run config, echoed into reports
    config: dict = field(default_factory=dict)
    debug: bool = False

    progress: "ProgressReporter | None" = None

    # Load outputs
    dataset: WeightedDataset | None = None
    groups: list[QidGroup] = field(default_factory=list)

    # Solve outputs
    master: MasterSolution | None = None
    curve: pd.DataFrame | None = None

    # Audit outputs
    confidence: ConfidenceReport | None = None
    verify_rows: list[dict] = field(default_factory=list)

    # Export outputs
    report_file: str | None = None
    curve_file: str | None = None
