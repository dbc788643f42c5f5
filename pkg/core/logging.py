import logging
import sys

import orjson

from core.config import settings
from core.persistence import PersistenceManager


class ORJSONFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        log_record = {
            "timestamp": self.formatTime(record, self.datefmt),
            "level": record.levelname,
            "message": record.getMessage(),
            "module": record.module,
            "function": record.funcName,
        }

        if record.exc_info:
            log_record["exception"] = self.formatException(record.exc_info)

        # Merge extra attributes
        if hasattr(record, "payload"):
            log_record.update(record.payload)

        return orjson.dumps(log_record, option=orjson.OPT_SERIALIZE_NUMPY).decode("utf-8")

def _formatter() -> logging.Formatter:
    if settings.json_logs:
        return ORJSONFormatter()
    return logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')

def setup_logging(level: str | None = None):
    handlers = []

    # Console handler on stderr; stdout carries tables and reports
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(_formatter())
    handlers.append(console_handler)

    if settings.log_to_file:
        file_handler = logging.FileHandler(PersistenceManager().get_log_file(settings.logs_dir))
        file_handler.setFormatter(_formatter())
        handlers.append(file_handler)

    level_name = (level or settings.log_level).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        handlers=handlers,
        force=True
    )
