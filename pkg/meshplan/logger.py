#!/usr/bin/env python3
"""
Logging for meshplan.

Provides:
- Package loggers under the "meshplan" hierarchy (stderr, level from
  MESHPLAN_LOG_LEVEL)
- Per-run log files at <out>/runs/<run_id>/run.log
- Log rotation
- Timestamp formatting
"""

import logging
import os
import re
import sys
from collections import deque
from datetime import datetime
from typing import Generator, Optional, TextIO

from meshplan.utils import get_log_level

ROOT_LOGGER = "meshplan"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

TIMESTAMP_RE = re.compile(
    r"^(?P<ts>\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}\.\d{3}) (?P<message>.*)$"
)

_configured = False


def configure_logging(level: Optional[str] = None) -> None:
    """
    Attach the stderr handler to the package root logger.

    Safe to call repeatedly; the level is updated every time.
    """
    global _configured

    root = logging.getLogger(ROOT_LOGGER)
    if not _configured:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
        root.propagate = False
        _configured = True

    root.setLevel((level or get_log_level()).upper())


def get_logger(name: str) -> logging.Logger:
    """Return a logger inside the meshplan hierarchy."""
    if not _configured:
        configure_logging()
    if name == ROOT_LOGGER or name.startswith(ROOT_LOGGER + "."):
        return logging.getLogger(name)
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")


RUN_LOG_NAME = "run.log"


def run_log_path(run_dir: str) -> str:
    """Path of the log file kept inside a run directory."""
    return os.path.join(run_dir, RUN_LOG_NAME)


def _stamp() -> str:
    return datetime.now().isoformat(timespec="milliseconds")


class RunLogger:
    """
    Timestamped log file for one planning run.

    Once the file grows past max_size_mb it moves to run.log.1, replacing
    any earlier backup, and a fresh run.log is started.

    Example:
        with RunLogger("/tmp/out/runs/seed0001-FS") as log:
            log.write("selection: 212 active links")
    """

    def __init__(self, run_dir: str, max_size_mb: int = 10):
        self._stream: Optional[TextIO] = None
        os.makedirs(run_dir, exist_ok=True)
        self.path = run_log_path(run_dir)
        self.limit_bytes = max_size_mb * 1024 * 1024
        self._stream = open(self.path, "a", buffering=1)

    def _roll_over(self) -> None:
        if self._stream is None or os.path.getsize(self.path) <= self.limit_bytes:
            return
        self._stream.close()
        try:
            os.replace(self.path, f"{self.path}.1")
        finally:
            self._stream = open(self.path, "a", buffering=1)

    def write(self, message: str, timestamp: bool = True) -> None:
        """
        Append a message to the run log. Ignored once the logger is closed.

        With timestamp set, every non-empty line of the message gets its own
        prefix; otherwise the text goes out as is, newline-terminated.
        """
        if self._stream is None:
            return
        try:
            self._roll_over()
            if timestamp:
                prefix = _stamp()
                text = "".join(
                    f"{prefix} {line}\n" for line in message.splitlines() if line
                )
            else:
                text = message if message.endswith("\n") else message + "\n"
            self._stream.write(text)
        except OSError:
            pass

    def close(self) -> None:
        stream, self._stream = self._stream, None
        if stream is not None:
            stream.close()

    def __del__(self):
        try:
            self.close()
        except OSError:
            pass

    def __enter__(self) -> "RunLogger":
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> bool:
        self.close()
        return False


def strip_timestamp(line: str) -> str:
    """Drop the RunLogger prefix from one line, if present."""
    match = TIMESTAMP_RE.match(line)
    return match.group("message") if match else line


def read_logs(
    run_dir: str,
    tail: Optional[int] = None,
    timestamps: bool = True,
) -> Generator[str, None, None]:
    """
    Yield the lines of a run log, oldest first.

    Args:
        run_dir: Run output directory
        tail: Only the last `tail` lines when positive
        timestamps: Keep the timestamp prefix
    """
    path = run_log_path(run_dir)
    if not os.path.isfile(path):
        return

    with open(path) as f:
        lines = deque(f, maxlen=tail) if tail and tail > 0 else list(f)

    for line in lines:
        line = line.rstrip("\n")
        yield line if timestamps else strip_timestamp(line)
