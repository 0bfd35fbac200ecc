"""Output formatters for run reports and exchange files."""

from qcnormal.formatters.json import JSONFormatter
from qcnormal.formatters.tree import TreeFormatter

__all__ = ["JSONFormatter", "TreeFormatter"]
