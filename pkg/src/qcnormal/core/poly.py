"""Parabolically graded polynomials on the Heisenberg group.

Polynomials are sympy ``Poly`` objects over ``QQ`` in the generators
``x1..x4n, t1..t3``. The monomial x^A t^B has parabolic weight |A| + 2|B|.
"""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from typing import Any, Iterator, Mapping, Sequence

import numpy as np
import sympy
from sympy import QQ, Poly
from sympy.polys.matrices import DomainMatrix

from qcnormal.core.errors import MissingJetError, PreconditionError, SingularSystemError
from qcnormal.core.models import Dim
from qcnormal.core.qalg import standard_acs
from qcnormal.core.scalars import to_fraction

logger = logging.getLogger(__name__)

Monomial = tuple[int, ...]


def rational(value: Any) -> sympy.Rational:
    """Exact sympy rational from ints, Fractions or sympy numbers."""
    frac = to_fraction(value)
    return sympy.Rational(frac.numerator, frac.denominator)


class GradedRing:
    """Polynomial ring in (x, t) with the flat-model derivations X_α and T_i."""

    def __init__(self, dim: Dim):
        self.dim = dim
        h = dim.h
        self.xs = sympy.symbols(f"x1:{h + 1}")
        self.ts = sympy.symbols("t1:4")
        self.gens = tuple(self.xs) + tuple(self.ts)
        acs = standard_acs(dim)
        # x_coeff[α][i] is the ∂_{t_i} coefficient of X_α.
        self.x_coeff = [
            [
                self.poly(
                    sum(2 * rational(acs[i][beta, alpha]) * self.xs[beta] for beta in range(h))
                )
                for i in range(3)
            ]
            for alpha in range(h)
        ]

    @property
    def size(self) -> int:
        return len(self.gens)

    def poly(self, expr: Any) -> Poly:
        return Poly(expr, *self.gens, domain=QQ)

    def zero(self) -> Poly:
        return self.poly(0)

    def monomial(self, exps: Sequence[int], coeff: Any = 1) -> Poly:
        return self.from_terms({tuple(exps): coeff})

    def from_terms(self, terms: Mapping[Monomial, Any]) -> Poly:
        data = {tuple(m): rational(c) for m, c in terms.items() if c != 0}
        if not data:
            return self.zero()
        return Poly.from_dict(data, *self.gens, domain=QQ)

    def terms(self, f: Poly) -> dict[Monomial, Fraction]:
        """Nonzero terms of f as exponent tuple → Fraction."""
        return {tuple(m): to_fraction(c) for m, c in f.terms() if c != 0}

    def weight(self, mono: Sequence[int]) -> int:
        h = self.dim.h
        return sum(mono[:h]) + 2 * sum(mono[h:])

    def index_weight(self, a: int) -> int:
        """Parabolic order of a frame index: 1 horizontal, 2 vertical."""
        return 1 if a < self.dim.h else 2

    def is_zero(self, f: Poly) -> bool:
        return bool(f.is_zero)

    def value_at_origin(self, f: Poly) -> Fraction:
        return to_fraction(f.as_dict().get((0,) * self.size, 0))

    def depends_on_t(self, f: Poly) -> bool:
        h = self.dim.h
        return any(sum(m[h:]) > 0 for m in self.terms(f))

    # Derivations ---------------------------------------------------------

    def apply_X(self, alpha: int, f: Poly) -> Poly:
        """X_α f = ∂_α f + Σ_i 2 I_{iβα} x^β ∂_{t_i} f."""
        out = f.diff(self.xs[alpha])
        for i in range(3):
            coeff = self.x_coeff[alpha][i]
            if not coeff.is_zero:
                out = out + coeff * f.diff(self.ts[i])
        return out

    def apply_T(self, i: int, f: Poly) -> Poly:
        """T_i f = 2 ∂_{t_i} f."""
        return f.diff(self.ts[i]) * 2

    def apply_frame(self, a: int, f: Poly) -> Poly:
        """Apply frame field ``a``: X_a for a < 4n, T_{a-4n} otherwise."""
        h = self.dim.h
        return self.apply_X(a, f) if a < h else self.apply_T(a - h, f)

    def sublaplacian(self, f: Poly) -> Poly:
        """ℒ₀ f = −Σ_α X_α X_α f."""
        out = self.zero()
        for alpha in range(self.dim.h):
            out = out - self.apply_X(alpha, self.apply_X(alpha, f))
        return out

    def dilation_euler(self, f: Poly) -> Poly:
        """x^α∂_α f + 2 t^i ∂_{t_i} f, which multiplies weight-m parts by m."""
        out = self.zero()
        for x in self.xs:
            out = out + self.poly(x) * f.diff(x)
        for t in self.ts:
            out = out + self.poly(2 * t) * f.diff(t)
        return out

    def norm_x_squared(self) -> Poly:
        return self.poly(sum(x**2 for x in self.xs))

    # Grading -------------------------------------------------------------

    def homogeneous_part(self, f: Poly, m: int) -> Poly:
        return self.from_terms(
            {mono: c for mono, c in self.terms(f).items() if self.weight(mono) == m}
        )

    def weights(self, f: Poly) -> list[int]:
        return sorted({self.weight(mono) for mono in self.terms(f)})

    def truncate(self, f: Poly, max_weight: int) -> Poly:
        return self.from_terms(
            {mono: c for mono, c in self.terms(f).items() if self.weight(mono) <= max_weight}
        )

    def basis(self, m: int, x_only: bool = False) -> list[Monomial]:
        """Monomials of weight m in graded lexicographic order, x before t."""
        return list(_basis(self.dim.n, m, x_only))

    def coefficients(self, f: Poly, basis: Sequence[Monomial]) -> list[Fraction]:
        terms = self.terms(f)
        index = set(basis)
        stray = [mono for mono in terms if mono not in index]
        if stray:
            raise PreconditionError(f"polynomial has terms outside the basis: {stray[:3]}")
        return [terms.get(mono, Fraction(0)) for mono in basis]

    def random_homogeneous(
        self,
        rng: np.random.Generator,
        m: int,
        x_only: bool = False,
        density: float = 1.0,
        denom: int = 5,
    ) -> Poly:
        """Random weight-m polynomial with small-denominator rational coefficients."""
        terms: dict[Monomial, Fraction] = {}
        for mono in self.basis(m, x_only):
            if rng.random() <= density:
                terms[mono] = Fraction(int(rng.integers(-6, 7)), int(rng.integers(1, denom + 1)))
        return self.from_terms(terms)

    def expr(self, f: Poly) -> str:
        return str(f.as_expr())


@lru_cache(maxsize=None)
def ring_for(n: int) -> GradedRing:
    """Shared ring for quaternionic dimension n."""
    return GradedRing(Dim(n))


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    for combo in itertools.combinations_with_replacement(range(parts), total):
        exps = [0] * parts
        for k in combo:
            exps[k] += 1
        yield tuple(exps)


@lru_cache(maxsize=None)
def _basis(n: int, m: int, x_only: bool) -> tuple[Monomial, ...]:
    h = 4 * n
    monos: list[Monomial] = []
    for j in range(0, m // 2 + 1):
        if x_only and j > 0:
            break
        for a in _compositions(m - 2 * j, h):
            for b in _compositions(j, 3):
                monos.append(a + b)
    monos.sort(key=lambda mono: (sum(mono), mono), reverse=True)
    return tuple(monos)


@lru_cache(maxsize=None)
def dim_homogeneous(dim: Dim, m: int) -> int:
    """dim 𝒫_m = Σ_j C(4n + m − 2j − 1, m − 2j) · C(j + 2, 2)."""
    h = dim.h
    return sum(comb(h + m - 2 * j - 1, m - 2 * j) * comb(j + 2, 2) for j in range(m // 2 + 1))


def homogeneous_part(ring: GradedRing, f: Poly, m: int) -> Poly:
    return ring.homogeneous_part(f, m)


def apply_X(ring: GradedRing, alpha: int, f: Poly) -> Poly:
    return ring.apply_X(alpha, f)


def apply_T(ring: GradedRing, i: int, f: Poly) -> Poly:
    return ring.apply_T(i, f)


def sublaplacian(ring: GradedRing, f: Poly) -> Poly:
    return ring.sublaplacian(f)


def apply_Lm(ring: GradedRing, m: int, f: Poly) -> Poly:
    """L_m f = |x|² ℒ₀ f + t^i T_i f − m(m − 1) f."""
    out = ring.norm_x_squared() * ring.sublaplacian(f)
    for i in range(3):
        out = out + ring.poly(ring.ts[i]) * ring.apply_T(i, f)
    return out - f * (m * (m - 1))


@dataclass(frozen=True, eq=False)
class GradedOperator:
    """Matrix of an operator on 𝒫_m over an ordered monomial basis.

    Column k holds the coefficients of the image of ``basis[k]``.
    """

    m: int
    matrix: DomainMatrix
    basis: tuple[Monomial, ...]
    ring: GradedRing

    @property
    def size(self) -> int:
        return len(self.basis)

    def det(self) -> sympy.Rational:
        return _dm_det(self.matrix)

    def rank(self) -> int:
        return int(self.matrix.convert_to(QQ).rank())

    def is_invertible(self) -> bool:
        return self.rank() == self.size

    def kernel(self) -> list[Poly]:
        """Kernel basis as polynomials."""
        null = self.matrix.convert_to(QQ).nullspace().to_Matrix()
        vectors = []
        for r in range(null.rows):
            vectors.append(
                self.ring.from_terms(
                    {mono: null[r, k] for k, mono in enumerate(self.basis) if null[r, k] != 0}
                )
            )
        return vectors

    def apply(self, f: Poly) -> Poly:
        vec = sympy.Matrix([rational(c) for c in self.ring.coefficients(f, self.basis)])
        image = self.matrix.convert_to(QQ).to_Matrix() * vec
        return self.ring.from_terms({mono: image[k] for k, mono in enumerate(self.basis)})

    def solve(self, rhs: Poly) -> Poly:
        """Unique solution of ``op(u) = rhs`` over the basis.

        Raises:
            SingularSystemError: the matrix is singular.
        """
        from sympy.polys.matrices.exceptions import DMNonInvertibleMatrixError

        b = DomainMatrix.from_Matrix(
            sympy.Matrix([rational(c) for c in self.ring.coefficients(rhs, self.basis)])
        ).convert_to(QQ)
        try:
            sol = self.matrix.convert_to(QQ).lu_solve(b).to_Matrix()
        except (DMNonInvertibleMatrixError, ZeroDivisionError) as exc:
            raise SingularSystemError(f"L_{self.m} is singular on the chosen basis") from exc
        return self.ring.from_terms({mono: sol[k, 0] for k, mono in enumerate(self.basis)})


def _dm_det(matrix: DomainMatrix) -> sympy.Rational:
    return QQ.to_sympy(matrix.convert_to(QQ).det())


def build_Lm(dim: Dim, m: int, x_only: bool = False) -> GradedOperator:
    """Exact matrix of L_m on 𝒫_m (or on its x-only subspace).

    Raises:
        PreconditionError: m < 2.
    """
    if m < 2:
        raise PreconditionError(f"L_m is only used for m >= 2, got {m}")
    return _build_Lm(dim.n, m, x_only)


@lru_cache(maxsize=None)
def _build_Lm(n: int, m: int, x_only: bool) -> GradedOperator:
    ring = ring_for(n)
    basis = tuple(ring.basis(m, x_only))
    position = {mono: k for k, mono in enumerate(basis)}
    mat = sympy.zeros(len(basis), len(basis))
    for col, mono in enumerate(basis):
        image = apply_Lm(ring, m, ring.monomial(mono))
        for target, coeff in ring.terms(image).items():
            if target not in position:
                raise PreconditionError(f"L_{m} left the basis at {target}")
            mat[position[target], col] = rational(coeff)
    logger.debug("built L_%d for n=%d (%d x %d, x_only=%s)", m, n, len(basis), len(basis), x_only)
    return GradedOperator(m, DomainMatrix.from_Matrix(mat).convert_to(QQ), basis, ring)


def solve_Lm(dim: Dim, m: int, rhs: Poly) -> Poly:
    """Exact u ∈ 𝒫_m with L_m u = rhs; for m = 2 the solution is taken x-only.

    Raises:
        PreconditionError: rhs is not homogeneous of weight m, or m = 2 and rhs
            depends on t.
        SingularSystemError: the system is singular.
    """
    ring = ring_for(dim.n)
    if rhs.is_zero:
        return ring.zero()
    bad = [w for w in ring.weights(rhs) if w != m]
    if bad:
        raise PreconditionError(f"right-hand side is not homogeneous of weight {m}: found {bad}")
    x_only = m == 2
    if x_only and ring.depends_on_t(rhs):
        raise PreconditionError("for m = 2 the right-hand side must not depend on t")
    return build_Lm(dim, m, x_only).solve(rhs)


def lm_spectrum(dim: Dim, m: int) -> dict[str, Any]:
    """Dimension, rank, kernel basis and determinant of L_m."""
    op = build_Lm(dim, m)
    kernel = op.kernel()
    return {
        "n": dim.n,
        "m": m,
        "dimension": op.size,
        "rank": op.size - len(kernel),
        "kernel": [op.ring.expr(k) for k in kernel],
        "determinant": str(op.det()) if not kernel else "0",
    }


def frame_sequences(ring: GradedRing, m: int) -> Iterator[tuple[int, ...]]:
    """All frame-index sequences of total parabolic order m."""
    size = ring.size

    def walk(prefix: tuple[int, ...], remaining: int) -> Iterator[tuple[int, ...]]:
        if remaining == 0:
            yield prefix
            return
        for a in range(size):
            w = ring.index_weight(a)
            if w <= remaining:
                yield from walk(prefix + (a,), remaining - w)

    yield from walk((), m)


def frame_derivatives(ring: GradedRing, f: Poly, max_order: int) -> dict[tuple[int, ...], Fraction]:
    """X_A f at the origin for every sequence A of order ≤ max_order.

    X_A applies ``A[0]`` first. Sequences whose derivative vanishes identically
    are pruned, so missing keys mean zero.
    """
    out: dict[tuple[int, ...], Fraction] = {}

    def walk(prefix: tuple[int, ...], g: Poly, order: int) -> None:
        value = ring.value_at_origin(g)
        if value != 0:
            out[prefix] = value
        for a in range(ring.size):
            w = ring.index_weight(a)
            if order + w > max_order:
                continue
            child = ring.apply_frame(a, g)
            if not child.is_zero:
                walk(prefix + (a,), child, order + w)

    walk((), f, 0)
    return out


def taylor_weight(ring: GradedRing, seq: Sequence[int]) -> Fraction:
    """(1/#A!) (½)^{o(A) − #A} for a frame-index sequence A."""
    order = sum(ring.index_weight(a) for a in seq)
    return Fraction(1, factorial(len(seq))) * Fraction(1, 2) ** (order - len(seq))


def sequence_monomial(ring: GradedRing, seq: Sequence[int]) -> Monomial:
    exps = [0] * ring.size
    for a in seq:
        exps[a] += 1
    return tuple(exps)


def parabolic_taylor(
    ring: GradedRing,
    derivs: Mapping[tuple[int, ...], Any],
    m: int,
    complete: bool = True,
) -> Poly:
    """F_(m) = Σ_{o(A)=m} (1/#A!)(½)^{o(A)−#A} x^A (X_A F)|_q.

    With ``complete`` the map must contain every sequence of order m;
    otherwise absent sequences count as zero.

    Raises:
        MissingJetError: a sequence of order m is absent and ``complete`` is set.
    """
    terms: dict[Monomial, Fraction] = {}
    for seq in frame_sequences(ring, m):
        if seq not in derivs:
            if complete:
                raise MissingJetError(f"missing frame derivative for sequence {seq}")
            continue
        value = to_fraction(derivs[seq])
        if value == 0:
            continue
        mono = sequence_monomial(ring, seq)
        terms[mono] = terms.get(mono, Fraction(0)) + taylor_weight(ring, seq) * value
    return ring.from_terms(terms)


def p_squared_identity(ring: GradedRing, u: Poly, m: int) -> Poly:
    """Residual of m²u = xxXXu + 2txXTu + ttTTu + tTu + mu (zero for u ∈ 𝒫_m)."""
    h = ring.dim.h
    rhs = u * m
    for a in range(h):
        xa = ring.poly(ring.xs[a])
        xu = ring.apply_X(a, u)
        for b in range(h):
            rhs = rhs + xa * ring.poly(ring.xs[b]) * ring.apply_X(b, xu)
        for i in range(3):
            rhs = rhs + ring.poly(2 * ring.ts[i]) * xa * ring.apply_X(a, ring.apply_T(i, u))
    for i in range(3):
        ti = ring.poly(ring.ts[i])
        tu = ring.apply_T(i, u)
        rhs = rhs + ti * tu
        for j in range(3):
            rhs = rhs + ti * ring.poly(ring.ts[j]) * ring.apply_T(j, tu)
    return rhs - u * (m * m)
