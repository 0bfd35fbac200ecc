"""Logging setup for the command-line entry point.

Library modules only create loggers with ``logging.getLogger(__name__)``;
handlers are installed here, once, by the CLI.
"""

import logging
import sys

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbosity: int = 0) -> None:
    """Install a stderr handler on the ``qcnormal`` logger.

    Args:
        verbosity: 0 for WARNING, 1 for INFO, 2 or more for DEBUG.
    """
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG

    root = logging.getLogger("qcnormal")
    root.setLevel(level)
    if not any(getattr(h, "_qcnormal", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._qcnormal = True  # type: ignore[attr-defined]
        root.addHandler(handler)
