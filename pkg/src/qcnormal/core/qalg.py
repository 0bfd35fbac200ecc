"""Quaternionic linear algebra.

Horizontal frames are grouped in blocks of four, ``(ξ, I₁ξ, I₂ξ, I₃ξ)``.
Each structure I_i is stored as the matrix ``M_i`` of the endomorphism
(column k is the image of e_k), and the lowered tensor is ``I_{iαβ} = M_i[α, β]``.
"""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from qcnormal.core.errors import TensorShapeError
from qcnormal.core.models import AxisKind, Dim, ScalarKind
from qcnormal.core.scalars import convert, identity, zeros

logger = logging.getLogger(__name__)

# Images of (e0, e1, e2, e3) under I1, I2, I3 on one quaternionic block.
QUATERNION_BLOCK: tuple[tuple[tuple[int, int], ...], ...] = (
    ((1, 1), (0, -1), (3, 1), (2, -1)),
    ((2, 1), (3, -1), (0, -1), (1, 1)),
    ((3, 1), (2, 1), (1, -1), (0, -1)),
)


def coefficient(num: int, den: int, kind: ScalarKind) -> Union[Fraction, float]:
    """The scalar num/den in the requested backend."""
    if kind == ScalarKind.RATIONAL:
        return Fraction(num, den)
    return num / den


@dataclass(frozen=True)
class Axis:
    """A tensor axis: index kind and extent."""

    kind: AxisKind
    extent: int


@dataclass(frozen=True, eq=False)
class Tensor:
    """Dense tensor whose axes are tagged horizontal or vertical."""

    axes: tuple[Axis, ...]
    data: np.ndarray
    scalar: ScalarKind = ScalarKind.RATIONAL

    def __post_init__(self) -> None:
        shape = tuple(ax.extent for ax in self.axes)
        if tuple(self.data.shape) != shape:
            raise TensorShapeError(
                f"data shape {tuple(self.data.shape)} does not match axes {shape}"
            )

    @classmethod
    def from_array(
        cls, data: np.ndarray, kinds: str, scalar: ScalarKind = ScalarKind.RATIONAL
    ) -> "Tensor":
        """Build a tensor from an array and a kind string such as ``"HHV"``."""
        data = np.asarray(data, dtype=object if scalar == ScalarKind.RATIONAL else np.float64)
        if len(kinds) != data.ndim:
            raise TensorShapeError(f"{len(kinds)} axis kinds for a rank-{data.ndim} array")
        axes = tuple(Axis(AxisKind(k), size) for k, size in zip(kinds, data.shape))
        return cls(axes, data, scalar)

    @property
    def rank(self) -> int:
        return len(self.axes)

    @property
    def kinds(self) -> str:
        return "".join(ax.kind.value for ax in self.axes)


def contract(a: Tensor, b: Tensor, pairs: Sequence[tuple[int, int]]) -> Tensor:
    """Contract axis ``i`` of ``a`` with axis ``j`` of ``b`` for each pair ``(i, j)``.

    Frames are orthonormal, so raising and lowering are trivial and the
    contraction is a plain sum. The result keeps the free axes of ``a`` followed
    by those of ``b``.

    Raises:
        TensorShapeError: paired axes differ in kind or extent, or the scalar
            backends differ.
    """
    if a.scalar != b.scalar:
        raise TensorShapeError("cannot contract tensors with different scalar backends")
    for i, j in pairs:
        if i >= a.rank or j >= b.rank:
            raise TensorShapeError(f"axis pair {(i, j)} out of range")
        if a.axes[i].kind != b.axes[j].kind:
            raise TensorShapeError(
                f"axis kind mismatch: {a.axes[i].kind.value} vs {b.axes[j].kind.value}"
            )
        if a.axes[i].extent != b.axes[j].extent:
            raise TensorShapeError(
                f"axis extent mismatch: {a.axes[i].extent} vs {b.axes[j].extent}"
            )
    left = [i for i, _ in pairs]
    right = [j for _, j in pairs]
    data = np.tensordot(a.data, b.data, axes=(left, right))
    axes = tuple(ax for k, ax in enumerate(a.axes) if k not in left) + tuple(
        ax for k, ax in enumerate(b.axes) if k not in right
    )
    return Tensor(axes, np.asarray(data), a.scalar)


def epsilon(kind: ScalarKind = ScalarKind.RATIONAL) -> np.ndarray:
    """Levi-Civita symbol ε_{ijk}."""
    eps = zeros((3, 3, 3), kind)
    for perm in itertools.permutations(range(3)):
        sign = 1
        for x, y in itertools.combinations(perm, 2):
            if x > y:
                sign = -sign
        eps[perm] = coefficient(sign, 1, kind)
    return eps


def epsilon_tensor(kind: ScalarKind = ScalarKind.RATIONAL) -> Tensor:
    return Tensor.from_array(epsilon(kind), "VVV", kind)


def metric(dim: Dim, kind: ScalarKind = ScalarKind.RATIONAL) -> np.ndarray:
    """Horizontal metric g_{αβ} in an orthonormal frame."""
    return identity(dim.h, kind)


@dataclass(frozen=True, eq=False)
class AcsTriple:
    """Three almost complex structures satisfying the quaternion relations."""

    dim: Dim
    matrices: np.ndarray
    scalar: ScalarKind = ScalarKind.RATIONAL

    def __getitem__(self, i: int) -> np.ndarray:
        return self.matrices[i]

    def lowered(self) -> np.ndarray:
        """The tensor I_{iαβ} as a (3, h, h) array."""
        return self.matrices

    def violations(self) -> list[str]:
        """Names of violated quaternion relations (empty when all hold)."""
        h = self.dim.h
        ident = identity(h, self.scalar)
        eps = epsilon(self.scalar)
        found: list[str] = []
        for i in range(3):
            m = self.matrices[i]
            if not _equal(m + m.T, zeros((h, h), self.scalar), self.scalar):
                found.append(f"I{i + 1} not antisymmetric")
            if not _equal(m @ m.T, ident, self.scalar):
                found.append(f"I{i + 1} not orthogonal")
            for j in range(3):
                rhs = -ident if i == j else zeros((h, h), self.scalar)
                for k in range(3):
                    rhs = rhs + eps[i, j, k] * self.matrices[k]
                if not _equal(m @ self.matrices[j], rhs, self.scalar):
                    found.append(f"I{i + 1}I{j + 1} != -delta + eps I")
        triple = self.matrices[0] @ self.matrices[1] @ self.matrices[2]
        if not _equal(triple, -ident, self.scalar):
            found.append("I1I2I3 != -Id")
        return found


def _equal(a: np.ndarray, b: np.ndarray, kind: ScalarKind, tol: float = 1e-12) -> bool:
    if kind == ScalarKind.RATIONAL:
        return bool(np.all(a == b))
    return bool(np.max(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))) <= tol)


def standard_acs(dim: Dim, scalar: ScalarKind = ScalarKind.RATIONAL) -> AcsTriple:
    """Block-diagonal ACS triple from n copies of the quaternion action."""
    h = dim.h
    mats = zeros((3, h, h), scalar)
    for i, images in enumerate(QUATERNION_BLOCK):
        for block in range(dim.n):
            base = 4 * block
            for col, (row, sign) in enumerate(images):
                mats[i, base + row, base + col] = coefficient(sign, 1, scalar)
    return AcsTriple(dim, mats, scalar)


def pair_outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rank-4 array ``P[α, β, γ, δ] = a[α, γ] b[β, δ]``."""
    return np.multiply.outer(a, b).transpose(0, 2, 1, 3)


def apply_operator(op: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Apply a rank-4 operator ``op[α, γ, β, δ]`` to a matrix ``t[β, δ]``."""
    return np.asarray(np.tensordot(op, t, axes=([2, 3], [0, 1])))


def compose(op1: np.ndarray, op2: np.ndarray) -> np.ndarray:
    """Operator product ``op1 ∘ op2`` on End(H)."""
    return np.asarray(np.tensordot(op1, op2, axes=([2, 3], [0, 1])))


@dataclass(frozen=True, eq=False)
class CasimirOp:
    """Casimir operator Υ(A) = Σ_i I_i A I_iᵀ with its eigenprojectors."""

    upsilon: np.ndarray
    identity: np.ndarray
    p3: np.ndarray
    pm1: np.ndarray
    scalar: ScalarKind

    def apply(self, t: np.ndarray) -> np.ndarray:
        return apply_operator(self.upsilon, t)

    def project(self, t: np.ndarray, which: int) -> np.ndarray:
        """P3(t) for ``which == 3``, Pm1(t) for ``which == -1``."""
        if which == 3:
            return apply_operator(self.p3, t)
        if which == -1:
            return apply_operator(self.pm1, t)
        raise ValueError(f"eigenvalue must be 3 or -1, got {which}")


def casimir(acs: AcsTriple) -> CasimirOp:
    """Build Υ, P3 = (Υ + 1)/4 and Pm1 = (3 − Υ)/4 for an ACS triple."""
    kind = acs.scalar
    h = acs.dim.h
    ups = zeros((h, h, h, h), kind)
    for i in range(3):
        ups = ups + pair_outer(acs[i], acs[i])
    ident = pair_outer(identity(h, kind), identity(h, kind))
    quarter = coefficient(1, 4, kind)
    p3 = (ups + ident) * quarter
    pm1 = (ident * 3 - ups) * quarter
    logger.debug("built Casimir operator for n=%d", acs.dim.n)
    return CasimirOp(ups, ident, p3, pm1, kind)


def project_eigen(t: Tensor, which: int, acs: AcsTriple) -> Tensor:
    """Project a two-horizontal-index tensor onto the 3 or −1 eigenspace of Υ.

    Raises:
        TensorShapeError: ``t`` is not an (H, H) tensor of extent 4n.
    """
    if t.kinds != "HH" or t.data.shape != (acs.dim.h, acs.dim.h):
        raise TensorShapeError(f"expected an HH tensor of extent {acs.dim.h}, got {t.kinds}")
    cas = casimir(acs)
    data = cas.project(convert(t.data, acs.scalar), which)
    return Tensor(t.axes, data, acs.scalar)


def symmetrize(t: np.ndarray) -> np.ndarray:
    kind = ScalarKind.F64 if t.dtype != object else ScalarKind.RATIONAL
    return (t + t.T) * coefficient(1, 2, kind)


def trace_free_part(t: np.ndarray, kind: ScalarKind) -> np.ndarray:
    """``t − (tr t / h) g`` for a square matrix."""
    h = t.shape[0]
    tr = sum(t[a, a] for a in range(h))
    return t - identity(h, kind) * (tr * coefficient(1, h, kind))
