# modules/analytics/logger.py
import os
import logging
from logging import LoggerAdapter
from datetime import datetime
from config import LOG_DIR, LOG_DIR_STR, LOG_TO_CONSOLE, LOGGER_NAME

# Ensure the log directory exists (config.py should already do this, but
# performing it here makes the module self-sufficient if imported alone).
os.makedirs(LOG_DIR, exist_ok=True)
date_str = datetime.now().strftime("%Y-%m-%d")
LOG_PATH = os.path.join(LOG_DIR_STR, f"{date_str}.log")

_base_logger = logging.getLogger(LOGGER_NAME)
_base_logger.setLevel(logging.DEBUG)
_base_logger.propagate = False

# [14:05:12] [LEVEL] [tracking] [bound_ode] Message
formatter = logging.Formatter(
    "[%(asctime)s] [%(levelname)s] [%(experiment)s] [%(stage)s] %(message)s",
    datefmt="%H:%M:%S"
)

if not _base_logger.handlers:
    file_handler = logging.FileHandler(LOG_PATH, encoding="utf-8")
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(formatter)
    _base_logger.addHandler(file_handler)

    # Console output mirrors the file format; off by default so CLI output
    # stays limited to the summary lines.
    if LOG_TO_CONSOLE:
        console_handler = logging.StreamHandler()
        console_handler.setLevel(logging.INFO)
        console_handler.setFormatter(formatter)
        _base_logger.addHandler(console_handler)


class _ContextAdapter(LoggerAdapter):
    def process(self, msg, kwargs):
        extra = self.extra.copy()
        extra.update(kwargs.get("extra", {}))
        kwargs["extra"] = extra
        return msg, kwargs


logger = _ContextAdapter(_base_logger, {"experiment": "-", "stage": "-"})

# CERTIFICATE sits between INFO and WARNING: a bound was issued or checked.
CERTIFICATE_LEVEL = 25
logging.addLevelName(CERTIFICATE_LEVEL, "CERTIFICATE")


def error(experiment: str, stage: str, msg: str, **kwargs):
    logger.error(msg, extra={"experiment": experiment, "stage": stage}, **kwargs)


def warning(experiment: str, stage: str, msg: str, **kwargs):
    logger.warning(msg, extra={"experiment": experiment, "stage": stage}, **kwargs)


def info(experiment: str, stage: str, msg: str, **kwargs):
    logger.info(msg, extra={"experiment": experiment, "stage": stage}, **kwargs)


def debug(experiment: str, stage: str, msg: str, **kwargs):
    logger.debug(msg, extra={"experiment": experiment, "stage": stage}, **kwargs)


def certificate(experiment: str, stage: str, msg: str, **kwargs):
    logger.log(CERTIFICATE_LEVEL, msg, extra={"experiment": experiment, "stage": stage}, **kwargs)
