"""Structured progress signal for long solves and sweeps.

A running pipeline writes a small ``progress.json`` into its per-run log
directory next to ``run.txt``: the stage list, the current stage and its
completion fraction. External tools can poll it; nothing in the package
reads it back.
"""

import json
import logging
import os
import time


class ProgressReporter:
    """Writes a throttled, atomically-replaced ``progress.json``.

    Stages call :meth:`update` as they work. Writes within one stage are at
    least ``_MIN_WRITE_INTERVAL`` apart, but a stage change or a final 100%
    update always flushes. A failed write is logged and swallowed.
    """

    _MIN_WRITE_INTERVAL = 0.4  # seconds

    def __init__(self, log_dir: str, stages: list[tuple[str, str]]) -> None:
        self._path = os.path.join(log_dir, "progress.json")
        self._stages = [{"key": key, "label": label} for key, label in stages]
        self._started = time.monotonic()
        self._last_write = 0.0
        self._last_stage: str | None = None

    @property
    def path(self) -> str:
        return self._path

    def _due(self, stage_key: str, fraction: float, now: float) -> bool:
        if stage_key != self._last_stage or fraction >= 1.0:
            return True
        return now - self._last_write >= self._MIN_WRITE_INTERVAL

    def update(self, stage_key: str, fraction: float, status_text: str) -> None:
        fraction = max(0.0, min(1.0, fraction))
        now = time.monotonic()
        if not self._due(stage_key, fraction, now):
            return
        payload = {
            "stages": self._stages,
            "current_stage": stage_key,
            "fraction": fraction,
            "status_text": status_text,
            "elapsed_seconds": round(now - self._started, 3),
        }
        staging = self._path + ".tmp"
        try:
            with open(staging, "w", encoding="utf-8") as f:
                json.dump(payload, f)
            os.replace(staging, self._path)
        except OSError as e:
            logging.warning(f"Failed to write progress.json: {e}")
            return
        self._last_write = now
        self._last_stage = stage_key

    def callback(self, stage_key: str, noun: str):
        """A ``(done, total)`` callback reporting into ``stage_key``."""

        def report(done: int, total: int) -> None:
            self.update(stage_key, done / total if total else 1.0, f"{done:,} of {total:,} {noun}")

        return report
