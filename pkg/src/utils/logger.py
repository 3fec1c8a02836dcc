from __future__ import annotations

from collections.abc import Callable
import logging
import os
from pathlib import Path
import sys
import tempfile
from typing import TYPE_CHECKING

from dotenv import load_dotenv

if TYPE_CHECKING:
    from src.solver.options import IterationLog

load_dotenv()

_loggers: dict[str, logging.Logger] = {}

def setup_logger(name="opfgap", level=logging.INFO, tofile=False, filename=None):
    """
    Establish an instance of a logger to be used for logging in current context of app

    Args
        name: name of the logger
        level: level of logging info
        tofile: whether to log to a file
        filename: name of the log file (default: LOG_FILE_PATH or opfgap.log)

    """
    if name in _loggers:
        return _loggers[name]

    # Use a named logger instead of root to avoid polluting global handlers
    logger = logging.getLogger(name)
    numeric_level = level if isinstance(level, int) else getattr(logging, str(level).upper(), logging.INFO)
    logger.setLevel(numeric_level)
    formatter = logging.Formatter("[%(asctime)s] - %(name)s %(levelname)s %(message)s")

    if logger.handlers:
        _loggers[name] = logger
        return logger

    env_to_file = os.getenv("LOG_TO_FILE", "false").lower() in {"1", "true", "yes", "on"}
    target_file = os.getenv("LOG_FILE_PATH", "opfgap.log") if filename is None else filename

    if (tofile or env_to_file) and target_file:
        # Sweeps often run from read-only checkouts; fall back to the temp dir.
        candidate_paths = [Path(target_file).parent, Path(), Path(tempfile.gettempdir())]

        selected_path = None
        for p in candidate_paths:
            try:
                if not p.is_dir():
                    continue
                if os.access(p, os.W_OK):
                    selected_path = p
                    break
            except OSError:
                continue

        if selected_path:
            final_path = Path(target_file) if Path(target_file).is_absolute() else selected_path / Path(target_file).name
            try:
                file_handler = logging.FileHandler(final_path)
                file_handler.setFormatter(formatter)
                logger.addHandler(file_handler)
            except PermissionError:
                logger.error("File logging disabled: no write permission for %s", final_path)
            except OSError as e:
                log_exception = f"File logging disabled: OS error for {final_path}: {e}"
                logger.error(log_exception)
        else:
            logger.error("File logging disabled: no writable directory found for %s", target_file)

    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setFormatter(formatter)
    logger.addHandler(stream_handler)

    _loggers[name] = logger
    return logger


def format_iteration(entry: IterationLog) -> str:
    """One fixed-width line per interior-point iteration."""
    return (
        f"{entry.iteration:4d} {entry.objective: .8e} {entry.primal_infeasibility:.2e} "
        f"{entry.dual_infeasibility:.2e} {entry.barrier:.2e} {entry.step_length:.2e}"
    )


def iteration_sink(mode: str, name: str = "opfgap.ipm") -> Callable[[IterationLog], None] | None:
    """
    Map an OPFGAP_LOG mode to a solver iteration sink.

    ``quiet`` and ``info`` return no sink; ``iter`` returns a callable that
    writes one line per iteration through the named logger.
    """
    if mode != "iter":
        return None
    logger = setup_logger(name)

    def _sink(entry: IterationLog) -> None:
        logger.info(format_iteration(entry))

    return _sink
