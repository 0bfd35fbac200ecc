"""qcnormal - pseudohermitian normal coordinates for quaternionic contact structures.

Parabolic geodesics, graded operators on the quaternionic Heisenberg group and
the conformal normalization of Q-jets.
"""

__version__ = "0.1.0"

from qcnormal.core.config import RunConfig
from qcnormal.core.models import Dim, RunReport, ScalarKind
from qcnormal.core.suites import run_suite
from qcnormal.formatters.json import JSONFormatter
from qcnormal.formatters.tree import TreeFormatter

__all__ = [
    "Dim",
    "RunConfig",
    "RunReport",
    "ScalarKind",
    "run_suite",
    "TreeFormatter",
    "JSONFormatter",
    "__version__",
]
