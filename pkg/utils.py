import logging
import os
import sys
from datetime import datetime
from typing import TypedDict

LOG_LEVEL_ENV = "ATRP_LOG"
HOME_ENV = "ATRP_HOME"
DEFAULT_HOME = "~/.atrp"


class RunDirs(TypedDict):
    log_dir: str
    run_log_path: str


class SolveResult(TypedDict):
    num_groups: int
    num_records: int
    beta_star: float
    gamma_star: float
    worst_group: str
    report_file: str


class TradeoffResult(TypedDict):
    num_groups: int
    num_points: int
    curve_file: str


class VerifyResult(TypedDict):
    num_groups_checked: int
    num_groups_skipped: int
    max_gap: float | None
    passed: bool
    report_file: str


def atrp_home() -> str:
    return os.path.expanduser(os.environ.get(HOME_ENV, DEFAULT_HOME))


def setup_run_directories() -> RunDirs:
    log_timestamp = datetime.now().strftime("%Y-%m-%d_%H-%M-%S")
    log_dir = os.path.join(atrp_home(), "logs", log_timestamp)
    os.makedirs(log_dir, exist_ok=True)

    return {
        "log_dir": log_dir,
        "run_log_path": os.path.join(log_dir, "run.txt"),
    }


def configure_run_logging(log_file_path, log_level=logging.INFO):
    logging.basicConfig(
        level=log_level,
        format="%(asctime)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        handlers=[
            logging.FileHandler(log_file_path, mode="a", encoding="utf-8"),
            logging.StreamHandler(sys.stdout),
        ],
        force=True,
    )


def resolve_log_level(debug: bool = False) -> int:
    """Level from ``ATRP_LOG``; ``debug`` forces DEBUG."""
    if debug:
        return logging.DEBUG
    name = os.environ.get(LOG_LEVEL_ENV, "INFO").strip().upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        logging.warning(f"Unknown {LOG_LEVEL_ENV}={name!r}, using INFO")
        return logging.INFO
    return level


def format_number_with_commas(num):
    return f"{num:,}"
