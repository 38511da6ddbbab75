from pipeline.base import Pipeline, PipelineStage
from pipeline.context import PipelineContext
from pipeline.pipelines import SolvePipeline, TradeoffPipeline, VerifyPipeline
from pipeline.stages.audit import AuditStage, ConfidenceAudit, OracleVerify
from pipeline.stages.export import (
    CurveExport,
    ExportStage,
    SolutionReportExport,
    VerifyReportExport,
)
from pipeline.stages.load import CsvDatasetLoad, LoadStage, RandomDatasetLoad
from pipeline.stages.solve import ClosedFormSolve, SolveStage, TradeoffSweep

__all__ = [
    "AuditStage",
    "ClosedFormSolve",
    "ConfidenceAudit",
    "CsvDatasetLoad",
    "CurveExport",
    "ExportStage",
    "LoadStage",
    "OracleVerify",
    "Pipeline",
    "PipelineContext",
    "PipelineStage",
    "RandomDatasetLoad",
    "SolutionReportExport",
    "SolvePipeline",
    "SolveStage",
    "TradeoffPipeline",
    "TradeoffSweep",
    "VerifyPipeline",
    "VerifyReportExport",
]
