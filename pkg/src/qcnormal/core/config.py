"""Run configuration."""

from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Optional

from qcnormal.core.errors import ConfigError
from qcnormal.core.models import Dim, ScalarKind


@dataclass(frozen=True)
class RunConfig:
    """Settings shared by every command; validated on construction."""

    n: int = 1
    trials: int = 20
    seed: int = 0
    scalar: ScalarKind = ScalarKind.RATIONAL
    tol: float = 1e-9
    json_out: Optional[Path] = None
    verbosity: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or self.n < 1:
            raise ConfigError(f"--n must be >= 1, got {self.n}")
        if self.trials < 1:
            raise ConfigError(f"--trials must be >= 1, got {self.trials}")
        if not self.tol > 0:
            raise ConfigError(f"--tol must be positive, got {self.tol}")

    @property
    def dim(self) -> Dim:
        """Dimension object for ``n``."""
        return Dim(self.n)

    def echo(self) -> dict[str, Any]:
        """JSON-friendly copy of the configuration for reports."""
        data = asdict(self)
        data["scalar"] = self.scalar.value
        data["json_out"] = str(self.json_out) if self.json_out else None
        return data
