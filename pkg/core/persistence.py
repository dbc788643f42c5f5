"""
Persistence Management Module
=============================

This module provides the `PersistenceManager` class, responsible for
resolving the per-user log directory of the pruning lab, and the atomic
write helper every artifact writer goes through.
"""

import logging
import os
import pathlib
import sys

logger = logging.getLogger(__name__)


class PersistenceManager:
    """
    Resolves local storage paths across operating systems. Directories are
    created when a path is first requested, not on construction.
    """
    def __init__(self, app_name: str = "ecg-prune"):
        self.app_name = app_name
        self.base_dir = self._get_user_data_dir()

    def _get_user_data_dir(self) -> pathlib.Path:
        home = pathlib.Path.home()
        if sys.platform == "win32":
            return home / "AppData" / "Roaming" / self.app_name
        elif sys.platform == "darwin":
            return home / "Library" / "Application Support" / self.app_name
        else:  # Linux/Unix
            return home / ".local" / "share" / self.app_name

    def get_logs_dir(self) -> str:
        return str(self.base_dir / "logs")

    def get_log_file(self, logs_dir: str | None = None, filename: str = "ecg-prune.log") -> str:
        """Log file path under `logs_dir` (default: the per-user logs directory), creating the directory."""
        directory = pathlib.Path(logs_dir or self.get_logs_dir())
        try:
            os.makedirs(directory, exist_ok=True)
        except OSError as e:
            logger.error(f"Could not create directory {directory}: {e}")
            # Fallback to local 'data' directory if permission denied
            directory = pathlib.Path(__file__).parent.parent / "data" / "logs"
            os.makedirs(directory, exist_ok=True)
            logger.warning(f"Falling back to {directory}")
        return str(directory / filename)


def atomic_write_bytes(path: str | os.PathLike, payload: bytes) -> pathlib.Path:
    """
    Writes `payload` to `path` through a sibling temp file and an atomic replace.

    Parent directories are created on demand. On failure the temp file is
    removed and the original exception propagates.
    """
    target = pathlib.Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    temp_path = target.with_suffix(target.suffix + ".tmp")
    try:
        with open(temp_path, "wb") as f:
            f.write(payload)
        temp_path.replace(target)
    except Exception as e:
        logger.error(f"Failed to write {target}: {e}")
        if temp_path.exists():
            temp_path.unlink()
        raise
    return target
