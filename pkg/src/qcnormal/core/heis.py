"""The quaternionic Heisenberg group: group law, dilations and flat frame.

Coordinates are ``z = (x, t)`` with ``x`` grouped per quaternionic block as
``(w, x, y, z)`` and ``t = (r, s, t)``. The left-invariant fields are
``X_α = ∂_α + 2 Σ_i Σ_β I_{iβα} x^β ∂_{t_i}`` and ``R_i = 2∂_{t_i}``.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from qcnormal.core.errors import TensorShapeError
from qcnormal.core.models import Dim, PolyConnection, ScalarKind
from qcnormal.core.qalg import AcsTriple, coefficient, standard_acs
from qcnormal.core.scalars import convert, identity, random_array, zeros

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GroupPoint:
    """A point (x, t) of the Heisenberg group."""

    x: np.ndarray
    t: np.ndarray

    def __post_init__(self) -> None:
        if self.x.shape[0] % 4 != 0 or self.t.shape != (3,):
            raise TensorShapeError(
                f"group point needs 4n x-coordinates and 3 t-coordinates, got "
                f"{self.x.shape[0]} and {self.t.shape[0] if self.t.ndim else 0}"
            )

    @property
    def dim(self) -> Dim:
        return Dim(self.x.shape[0] // 4)

    def coords(self) -> np.ndarray:
        """Concatenated coordinate vector (x, t)."""
        return np.concatenate([self.x, self.t])

    @classmethod
    def from_coords(cls, z: Any) -> "GroupPoint":
        z = np.asarray(z)
        return cls(z[:-3], z[-3:])

    def same_as(self, other: "GroupPoint", tol: float = 0.0) -> bool:
        """Exact equality for rational points, within ``tol`` for floats."""
        a, b = self.coords(), other.coords()
        if a.shape != b.shape:
            return False
        if a.dtype == object and b.dtype == object:
            return bool(np.all(a == b))
        return bool(np.max(np.abs(a.astype(float) - b.astype(float))) <= tol)


def quaternion_product(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product of two quaternions given as (a, b, c, d)."""
    a1, b1, c1, d1 = p
    a2, b2, c2, d2 = q
    return np.array(
        [
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ],
        dtype=p.dtype,
    )


def conjugate(p: np.ndarray) -> np.ndarray:
    return np.array([p[0], -p[1], -p[2], -p[3]], dtype=p.dtype)


def hermitian_im(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Imaginary part of (p, q) = Σ p_k conj(q_k) over quaternionic blocks."""
    total = np.array([p[0] * 0] * 3, dtype=p.dtype)
    for k in range(0, p.shape[0], 4):
        total = total + quaternion_product(p[k : k + 4], conjugate(q[k : k + 4]))[1:]
    return total


def multiply(p: GroupPoint, q: GroupPoint) -> GroupPoint:
    """Group law (p₁, ω₁)·(p₂, ω₂) = (p₁ + p₂, ω₁ + ω₂ + 2 Im(p₁, p₂)).

    Raises:
        TensorShapeError: the points have different dimensions.
    """
    if p.x.shape != q.x.shape:
        raise TensorShapeError(f"dimension mismatch: {p.x.shape[0]} vs {q.x.shape[0]}")
    return GroupPoint(p.x + q.x, p.t + q.t + hermitian_im(p.x, q.x) * 2)


def inverse(p: GroupPoint) -> GroupPoint:
    return GroupPoint(-p.x, -p.t)


def identity_point(dim: Dim, scalar: ScalarKind = ScalarKind.RATIONAL) -> GroupPoint:
    return GroupPoint(zeros(dim.h, scalar), zeros(3, scalar))


def dilate(s: Any, p: GroupPoint) -> GroupPoint:
    """Parabolic dilation δ_s(x, t) = (s x, s² t)."""
    return GroupPoint(p.x * s, p.t * (s * s))


@dataclass(frozen=True, eq=False)
class AffineField:
    """Vector field (or 1-form) with coefficients ``const + lin @ z``."""

    const: np.ndarray
    lin: np.ndarray

    def at(self, z: np.ndarray) -> np.ndarray:
        return self.const + self.lin @ z


def _pair_coefficients(
    row: AffineField, matrix: Optional[np.ndarray], col: AffineField
) -> tuple[Any, np.ndarray, np.ndarray]:
    """Polynomial coefficients (constant, linear, symmetric quadratic) of rowᵀ Ω col."""
    omega = matrix if matrix is not None else identity(row.const.shape[0], ScalarKind.RATIONAL)
    const = np.asarray(row.const @ omega @ col.const).item()
    linear = row.lin.T @ omega @ col.const + col.lin.T @ omega.T @ row.const
    quad = row.lin.T @ omega @ col.lin
    return const, np.asarray(linear), (quad + quad.T)


@dataclass(frozen=True, eq=False)
class FlatFrame:
    """Left-invariant frame and contact forms of the Heisenberg group.

    ``vec_const[k, a] + vec_lin[k, a, l] z_l`` is the ∂_k-coefficient of the
    frame field ``e_a``; ``eta_const[i, k] + eta_lin[i, k, l] z_l`` is the
    dz_k-coefficient of η^i.
    """

    dim: Dim
    acs: AcsTriple
    vec_const: np.ndarray
    vec_lin: np.ndarray
    eta_const: np.ndarray
    eta_lin: np.ndarray
    scalar: ScalarKind = ScalarKind.RATIONAL
    notes: dict[str, Any] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.dim.total

    def field(self, a: int) -> AffineField:
        return AffineField(self.vec_const[:, a], self.vec_lin[:, a, :])

    def form(self, i: int) -> AffineField:
        return AffineField(self.eta_const[i], self.eta_lin[i])

    def frame_matrix(self, z: Any) -> np.ndarray:
        """Coordinate components F[k, a] of the frame at z."""
        z = np.asarray(z)
        return self.vec_const + np.tensordot(self.vec_lin, z, axes=([2], [0]))

    def eta_matrix(self, z: Any) -> np.ndarray:
        z = np.asarray(z)
        return self.eta_const + np.tensordot(self.eta_lin, z, axes=([2], [0]))

    def d_eta(self, i: int) -> np.ndarray:
        """Constant matrix Ω with dη^i(U, V) = Uᵀ Ω V."""
        lin = self.eta_lin[i]
        return lin.T - lin

    def bracket(self, a: int, b: int) -> AffineField:
        """Lie bracket [e_a, e_b] as an affine field."""
        u, v = self.field(a), self.field(b)
        return AffineField(v.lin @ u.const - u.lin @ v.const, v.lin @ u.lin - u.lin @ v.lin)


def flat_frame(dim: Dim, scalar: ScalarKind = ScalarKind.RATIONAL) -> FlatFrame:
    """Coefficient tables of X_α, R_i and η^i for the flat model."""
    acs = standard_acs(dim, scalar)
    h, size = dim.h, dim.total
    vec_const = zeros((size, size), scalar)
    vec_lin = zeros((size, size, size), scalar)
    eta_const = zeros((3, size), scalar)
    eta_lin = zeros((3, size, size), scalar)
    two = coefficient(2, 1, scalar)
    for alpha in range(h):
        vec_const[alpha, alpha] = coefficient(1, 1, scalar)
    for i in range(3):
        vec_const[h + i, h + i] = two
        eta_const[i, h + i] = coefficient(1, 2, scalar)
        for alpha in range(h):
            for beta in range(h):
                vec_lin[h + i, alpha, beta] = acs[i][beta, alpha] * two
                eta_lin[i, alpha, beta] = -acs[i][beta, alpha]
    return FlatFrame(dim, acs, vec_const, vec_lin, eta_const, eta_lin, scalar)


def left_invariant_frame_matrix(frame: FlatFrame, point: GroupPoint) -> np.ndarray:
    return frame.frame_matrix(point.coords())


def frame_inverse(frame: FlatFrame, z: Any) -> np.ndarray:
    """Inverse of the flat frame matrix, [[I, 0], [−½B, ½I]]."""
    f = frame.frame_matrix(z)
    h, size = frame.dim.h, frame.size
    half = coefficient(1, 2, frame.scalar)
    inv = zeros((size, size), frame.scalar)
    inv[:h, :h] = identity(h, frame.scalar)
    inv[h:, :h] = -f[h:, :h] * half
    inv[h:, h:] = identity(3, frame.scalar) * half
    return inv


def dilation_generator(frame: FlatFrame, point: GroupPoint) -> np.ndarray:
    """Frame components of the Euler field P = x^α∂_α + 2t^i∂_{t_i}."""
    z = point.coords()
    euler = np.concatenate([point.x, point.t * 2])
    return frame_inverse(frame, z) @ euler


@dataclass
class StructureViolation:
    """A failed identity in the flat-model structure check."""

    identity: str
    indices: tuple[int, ...]
    expected: Any
    found: Any


@dataclass
class StructureReport:
    """Outcome of ``structure_check``."""

    violations: list[StructureViolation] = field(default_factory=list)
    torsion: Optional[np.ndarray] = None

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def first(self) -> Optional[StructureViolation]:
        return self.violations[0] if self.violations else None


def _is_zero(arr: Any) -> bool:
    arr = np.asarray(arr)
    if arr.dtype == object:
        return all(x == 0 for x in arr.flat)
    return bool(np.max(np.abs(arr), initial=0.0) <= 1e-12)


def structure_check(dim: Dim, frame: Optional[FlatFrame] = None) -> StructureReport:
    """Verify duality, dη^i = 2g(I_i·,·), the bracket table and central vertical fields.

    Every identity is checked as a polynomial identity in the coordinates, so
    the check is exact over rationals.
    """
    frame = frame or flat_frame(dim)
    h, size = dim.h, dim.total
    report = StructureReport()
    acs = frame.acs

    for i in range(3):
        form = frame.form(i)
        for a in range(size):
            const, lin, quad = _pair_coefficients(form, None, frame.field(a))
            expected = 1 if a == h + i else 0
            if const != expected or not _is_zero(lin) or not _is_zero(quad):
                report.violations.append(
                    StructureViolation("duality", (i, a), expected, const)
                )

    for i in range(3):
        omega = frame.d_eta(i)
        for alpha in range(h):
            for beta in range(h):
                const, lin, quad = _pair_coefficients(
                    frame.field(alpha), omega, frame.field(beta)
                )
                expected = acs[i][beta, alpha] * 2
                if const != expected or not _is_zero(lin) or not _is_zero(quad):
                    report.violations.append(
                        StructureViolation("d_eta", (i, alpha, beta), expected, const)
                    )

    torsion = zeros((3, h, h), frame.scalar)
    for alpha in range(h):
        for beta in range(h):
            br = frame.bracket(alpha, beta)
            if not _is_zero(br.const[:h]) or not _is_zero(br.lin):
                report.violations.append(
                    StructureViolation("bracket_vertical", (alpha, beta), 0, br.const[:h])
                )
                continue
            for i in range(3):
                value, lin, quad = _pair_coefficients(frame.form(i), None, br)
                torsion[i, alpha, beta] = -value
                expected = -acs[i][alpha, beta] * 2
                if -value != expected or not _is_zero(lin) or not _is_zero(quad):
                    report.violations.append(
                        StructureViolation("torsion", (i, alpha, beta), expected, -value)
                    )
    report.torsion = torsion

    for i in range(3):
        for a in range(size):
            br = frame.bracket(h + i, a)
            if not _is_zero(br.const) or not _is_zero(br.lin):
                report.violations.append(
                    StructureViolation("vertical_central", (i, a), 0, br.const)
                )

    if report.violations:
        logger.debug("structure check found %d violations", len(report.violations))
    return report


def coframe_check(dim: Dim, frame: Optional[FlatFrame] = None) -> StructureReport:
    """Check η^i = ½dt^i − Σ I_{iβα} x^β dx^α and that dx^α is dual to X_α."""
    frame = frame or flat_frame(dim)
    h, size = dim.h, dim.total
    report = StructureReport()
    half = coefficient(1, 2, frame.scalar)
    for i in range(3):
        for k in range(size):
            expected_const = half if k == h + i else 0
            if frame.eta_const[i, k] != expected_const:
                report.violations.append(
                    StructureViolation(
                        "eta_constant", (i, k), expected_const, frame.eta_const[i, k]
                    )
                )
            for beta in range(size):
                expected = -frame.acs[i][beta, k] if k < h and beta < h else 0
                if frame.eta_lin[i, k, beta] != expected:
                    report.violations.append(
                        StructureViolation(
                            "eta_linear", (i, k, beta), expected, frame.eta_lin[i, k, beta]
                        )
                    )
    for alpha in range(h):
        theta = AffineField(identity(size, frame.scalar)[alpha], zeros((size, size), frame.scalar))
        for a in range(size):
            const, lin, quad = _pair_coefficients(theta, None, frame.field(a))
            expected = 1 if a == alpha else 0
            if const != expected or not _is_zero(lin) or not _is_zero(quad):
                report.violations.append(
                    StructureViolation("theta_duality", (alpha, a), expected, const)
                )
    return report


def flat_connection(dim: Dim, scalar: ScalarKind = ScalarKind.RATIONAL) -> PolyConnection:
    """Connection making the left-invariant frame parallel.

    Only Γ^{t_k}_{γα} = −2 I_{kγα} is nonzero; all symbols are constant.
    """
    acs = standard_acs(dim, scalar)
    h, size = dim.h, dim.total
    origin = (0,) * size
    gamma: dict[tuple[int, int, int], list[tuple[tuple[int, ...], Any]]] = {}
    for k in range(3):
        for g in range(h):
            for a in range(h):
                value = acs[k][g, a]
                if value != 0:
                    gamma[(h + k, g, a)] = [(origin, value * -2)]
    return PolyConnection(size, gamma)


def random_point(
    rng: np.random.Generator, dim: Dim, scalar: ScalarKind = ScalarKind.RATIONAL
) -> GroupPoint:
    """Random group point with small-denominator rational or float coordinates."""
    z = random_array(rng, (dim.total,), scalar)
    return GroupPoint.from_coords(convert(z, scalar))
