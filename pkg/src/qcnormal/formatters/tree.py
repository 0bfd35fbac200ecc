"""Tree formatter for run reports."""

from typing import Any

from qcnormal.core.models import CheckRecord, CheckStatus, RunReport
from qcnormal.formatters.colors import Colors, colorize, status_color
from qcnormal.formatters.json import jsonable


class TreeFormatter:
    """Format run reports as a boxed header followed by grouped check trees."""

    @staticmethod
    def _format_value(value: Any, max_length: int = 90) -> str:
        """Render a measured value on one line, truncated with an ellipsis.

        Args:
            value: Any report value (Fractions, arrays, dicts...).
            max_length: Maximum length before truncating (default: 90).

        Returns:
            A single-line string.
        """
        if value is None:
            return "-"
        text = str(jsonable(value)) if not isinstance(value, str) else value
        text = " ".join(text.split())
        if len(text) > max_length:
            text = text[: max_length - 3] + "..."
        return text

    @staticmethod
    def _group(checks: list[CheckRecord]) -> dict[str, list[CheckRecord]]:
        """Group checks by the prefix before the first dot, keeping run order."""
        groups: dict[str, list[CheckRecord]] = {}
        for check in checks:
            prefix = check.name.split(".", 1)[0]
            groups.setdefault(prefix, []).append(check)
        return groups

    @staticmethod
    def format(report: RunReport) -> str:
        """Format a RunReport as a tree.

        Args:
            report: The report to format.

        Returns:
            Formatted tree as a string.
        """
        output = []
        header_text = f"QCNORMAL: {report.command}  (seed {report.seed})"
        output.append(colorize("╔" + "═" * 70 + "╗", Colors.CYAN))
        output.append(
            colorize("║  ", Colors.CYAN)
            + colorize(header_text[:68].ljust(68), Colors.YELLOW, bold=True)
            + colorize("  ║", Colors.CYAN)
        )
        output.append(colorize("╚" + "═" * 70 + "╝", Colors.CYAN))
        output.append("")

        for suite, checks in TreeFormatter._group(report.checks).items():
            output.append(colorize(f"▶ {suite.upper()}", Colors.BLUE, bold=True))
            output.append(colorize("─" * 72, Colors.BRIGHT_BLACK))
            for check in checks:
                status = colorize(
                    check.status.value.upper().ljust(4), status_color(check.status), bold=True
                )
                name = check.name.split(".", 1)[-1]
                output.append(f"    ├─ {status} {name} [{check.provenance.value}]")
                measured = TreeFormatter._format_value(check.measured)
                output.append(colorize(f"    │  └─ measured: {measured}", Colors.BRIGHT_BLACK))
                if check.tolerance is not None:
                    output.append(
                        colorize(f"    │  └─ tolerance: {check.tolerance:g}", Colors.BRIGHT_BLACK)
                    )
                if check.detail:
                    output.append(colorize(f"    │  └─ {check.detail}", Colors.BRIGHT_BLACK))
                if check.status == CheckStatus.FAIL and check.counterexample:
                    counter = TreeFormatter._format_value(check.counterexample)
                    output.append(colorize(f"    │  └─ counterexample: {counter}", Colors.RED))
            output.append("")

        if report.payload:
            output.append(colorize("▶ RESULT", Colors.BLUE, bold=True))
            output.append(colorize("─" * 72, Colors.BRIGHT_BLACK))
            for key, value in report.payload.items():
                if isinstance(value, list) and value and isinstance(value[0], dict):
                    output.append(f"    ├─ {key}:")
                    for row in value:
                        output.append(f"    │  └─ {TreeFormatter._format_value(row)}")
                else:
                    output.append(f"    ├─ {key}: {TreeFormatter._format_value(value)}")
            output.append("")

        # Statistics
        failed = len(report.failures)
        verdict = colorize(
            "PASS" if report.passed else "FAIL",
            Colors.GREEN if report.passed else Colors.RED,
            bold=True,
        )
        output.append(colorize("📊 STATISTICS:", Colors.CYAN, bold=True))
        output.append(
            colorize("   - Checks run: ", Colors.WHITE)
            + colorize(str(len(report.checks)), Colors.YELLOW, bold=True)
        )
        output.append(
            colorize("   - Failed: ", Colors.WHITE)
            + colorize(str(failed), Colors.YELLOW, bold=True)
        )
        output.append(
            colorize("   - Wall time: ", Colors.WHITE)
            + colorize(f"{report.wall_time:.2f}s", Colors.YELLOW, bold=True)
        )
        output.append(colorize("   - Verdict: ", Colors.WHITE) + verdict)

        return "\n".join(output)
