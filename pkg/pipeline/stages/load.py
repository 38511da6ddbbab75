import logging
from abc import ABC
from typing import Callable

from dataset import load_dataset, partition_by_qid
from oracle import random_dataset
from pipeline.base import PipelineStage
from pipeline.context import PipelineContext
from utils import format_number_with_commas


class LoadStage(PipelineStage, ABC):
    """Stage 1: put a dataset and its QID groups on the context."""

    def _partition(self, ctx: PipelineContext) -> None:
        ctx.groups = partition_by_qid(ctx.dataset)
        logging.info(
            f"{format_number_with_commas(len(ctx.dataset))} records in "
            f"{format_number_with_commas(len(ctx.groups))} QID groups"
        )


class CsvDatasetLoad(LoadStage):
    def __init__(
        self,
        data_path: str,
        roles: dict[str, str] | Callable[[list[str]], dict[str, str]],
    ) -> None:
        self.data_path = data_path
        self.roles = roles

    def execute(self, ctx: PipelineContext) -> None:
        logging.info(f"Input file: {self.data_path}")
        ctx.dataset = load_dataset(self.data_path, self.roles)
        self._partition(ctx)


class RandomDatasetLoad(LoadStage):
    """Generated instances, reproducible from ``seed``."""

    def __init__(self, count: int, seed: int, sizes: tuple[int, ...] = (2, 3)) -> None:
        self.count = count
        self.seed = seed
        self.sizes = sizes

    def execute(self, ctx: PipelineContext) -> None:
        logging.info(f"Generating {self.count} random groups (seed {self.seed})")
        ctx.dataset = random_dataset(self.seed, self.count, self.sizes)
        self._partition(ctx)
