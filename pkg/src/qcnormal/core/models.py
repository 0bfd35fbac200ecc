"""Data models for qcnormal."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional


class ScalarKind(Enum):
    """Scalar backend for tensors and suites."""

    RATIONAL = "rational"
    F64 = "f64"


class AxisKind(Enum):
    """Index kind of a tensor axis."""

    HORIZONTAL = "H"
    VERTICAL = "V"


class CheckStatus(Enum):
    """Outcome of a single verification check."""

    PASS = "pass"
    FAIL = "fail"
    SKIP = "skip"


class Provenance(Enum):
    """Where the expected value of a check comes from."""

    KNOWN = "KNOWN"
    DERIVED = "DERIVED"
    TRIVIAL = "TRIVIAL"


@dataclass(frozen=True)
class Dim:
    """Quaternionic dimension of a QC structure."""

    n: int

    def __post_init__(self) -> None:
        # Imported lazily to keep models free of module cycles.
        from qcnormal.core.errors import ConfigError

        if not isinstance(self.n, int) or self.n < 1:
            raise ConfigError(f"quaternionic dimension must be a positive integer, got {self.n!r}")

    @property
    def h(self) -> int:
        """Horizontal dimension 4n."""
        return 4 * self.n

    @property
    def v(self) -> int:
        """Vertical dimension."""
        return 3

    @property
    def total(self) -> int:
        """Manifold dimension 4n + 3."""
        return 4 * self.n + 3


@dataclass
class PolyConnection:
    """Christoffel symbols Γ^a_{bc} = dz^a(∇_{∂_b}∂_c) as coordinate polynomials.

    Each entry of ``gamma`` maps ``(a, b, c)`` to a list of ``(exponents, coeff)``
    pairs, exponents having one entry per coordinate.
    """

    dim: int
    gamma: dict[tuple[int, int, int], list[tuple[tuple[int, ...], Any]]] = field(
        default_factory=dict
    )

    def degree(self) -> int:
        """Largest total coordinate degree appearing in any symbol."""
        degrees = [sum(mono) for terms in self.gamma.values() for mono, _ in terms]
        return max(degrees, default=0)


@dataclass
class VanishingOrder:
    """Fitted parabolic vanishing order of a function along a dilation ray."""

    order: float
    residual: float
    at_least: Optional[float] = None

    @property
    def below_noise(self) -> bool:
        """True when every sample fell under the noise floor."""
        return self.at_least is not None


@dataclass
class CheckRecord:
    """A single named check in a run report."""

    name: str
    status: CheckStatus
    measured: Any = None
    tolerance: Optional[float] = None
    provenance: Provenance = Provenance.DERIVED
    counterexample: Optional[dict[str, Any]] = None
    detail: Optional[str] = None


@dataclass
class RunReport:
    """Result of a CLI command or verification suite."""

    command: str
    config: dict[str, Any] = field(default_factory=dict)
    checks: list[CheckRecord] = field(default_factory=list)
    wall_time: float = 0.0
    seed: int = 0
    payload: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """True when no check failed."""
        return all(c.status != CheckStatus.FAIL for c in self.checks)

    @property
    def failures(self) -> list[CheckRecord]:
        """Checks with status FAIL."""
        return [c for c in self.checks if c.status == CheckStatus.FAIL]

    def add(self, record: CheckRecord) -> None:
        """Append a check record."""
        self.checks.append(record)
