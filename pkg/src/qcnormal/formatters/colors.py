"""ANSI colour support for terminal reports."""

import os
import sys
from typing import TextIO

from qcnormal.core.models import CheckStatus

_CODES = {
    "RESET": "\033[0m",
    "BOLD": "\033[1m",
    "DIM": "\033[2m",
    "RED": "\033[31m",
    "GREEN": "\033[32m",
    "YELLOW": "\033[33m",
    "BLUE": "\033[34m",
    "CYAN": "\033[36m",
    "WHITE": "\033[37m",
    "BRIGHT_BLACK": "\033[90m",
}


def _supported(stream: TextIO) -> bool:
    return hasattr(stream, "isatty") and stream.isatty() and os.getenv("NO_COLOR") is None


class Colors:
    """ANSI codes, empty strings when the terminal should not be coloured."""

    _colors_enabled = _supported(sys.stdout)

    RESET = BOLD = DIM = RED = GREEN = YELLOW = BLUE = CYAN = WHITE = BRIGHT_BLACK = ""

    @classmethod
    def _apply(cls, enabled: bool) -> None:
        cls._colors_enabled = enabled
        for name, code in _CODES.items():
            setattr(cls, name, code if enabled else "")

    @classmethod
    def enable(cls) -> None:
        cls._apply(True)

    @classmethod
    def disable(cls) -> None:
        cls._apply(False)

    @classmethod
    def detect(cls, stream: TextIO = sys.stdout) -> bool:
        """Re-read ``NO_COLOR`` and the tty state of ``stream``."""
        cls._apply(_supported(stream))
        return cls._colors_enabled


Colors._apply(Colors._colors_enabled)


def colorize(text: str, color: str, bold: bool = False) -> str:
    """Wrap ``text`` in ``color`` (and bold) when colours are enabled."""
    if not Colors._colors_enabled:
        return text
    prefix = f"{Colors.BOLD}{color}" if bold else color
    return f"{prefix}{text}{Colors.RESET}"


def status_color(status: CheckStatus) -> str:
    if status == CheckStatus.PASS:
        return Colors.GREEN
    if status == CheckStatus.FAIL:
        return Colors.RED
    return Colors.YELLOW
