"""Interpret the INI logging config for the CLI process."""
from __future__ import annotations

import logging
from logging.config import fileConfig
from pathlib import Path

from sievelab.core.config import get_settings

FALLBACK_FORMAT = "%(levelname)-5.5s [%(name)s] %(message)s"


def configure_logging(config_file: Path | None = None, verbose: bool = False) -> None:
    """Set up loggers from the INI file; stdout stays reserved for result tables.

    Args:
        config_file: INI path; falls back to ``Settings.log_config``.
        verbose: raise the ``sievelab`` logger to DEBUG.
    """
    path = Path(config_file or get_settings().log_config)
    if path.is_file():
        fileConfig(path, disable_existing_loggers=False)
    else:
        logging.basicConfig(level=logging.WARNING, format=FALLBACK_FORMAT)
        logging.getLogger(__name__).warning("logging config %s not found, using defaults", path)
    if verbose:
        logging.getLogger("sievelab").setLevel(logging.DEBUG)
