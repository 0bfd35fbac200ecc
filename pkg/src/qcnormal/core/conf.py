"""Conformal changes and the order-by-order Q-normalization.

Frame indices follow the polynomial ring: ``0 .. 4n-1`` are the horizontal
fields X_α and ``4n + i`` is T_i. A jet Q_{ab,C}(q) is indexed by the
ordered tuple ``(a, b, *C)``; its parabolic order o(abC) counts horizontal
indices once and vertical indices twice.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Any, Iterable, Mapping, Optional, Protocol, Union

import numpy as np
import sympy
from sympy import Poly
from sympy.utilities.iterables import multiset_permutations

from qcnormal.core.curv import A_operator, PointState, divergence_matrices, exact_det
from qcnormal.core.errors import (
    ConfigError,
    InvariantViolation,
    MissingJetError,
    PreconditionError,
    StabilityViolation,
)
from qcnormal.core.heis import flat_connection, flat_frame
from qcnormal.core.models import Dim, PolyConnection, ScalarKind
from qcnormal.core.poly import (
    GradedRing,
    frame_derivatives,
    rational,
    ring_for,
    sequence_monomial,
    solve_Lm,
    taylor_weight,
)
from qcnormal.core.qalg import casimir, coefficient, epsilon, standard_acs
from qcnormal.core.scalars import identity, to_fraction, zeros

logger = logging.getLogger(__name__)

JetKey = tuple[int, ...]


def jet_order(ring: GradedRing, key: Iterable[int]) -> int:
    return sum(ring.index_weight(a) for a in key)


@lru_cache(maxsize=None)
def _total_weight(n: int, key: JetKey) -> Fraction:
    """W(K) = Σ w(C) over the distinct orderings (a, b, C) of the multiset K."""
    ring = ring_for(n)
    return sum(
        (taylor_weight(ring, perm[2:]) for perm in multiset_permutations(list(key))),
        Fraction(0),
    )


@dataclass
class QJetTable:
    """Symmetrized jets Q_{(ab,C)}(q) up to total order ``max_order``.

    ``values`` maps a sorted index multiset K to the weighted average of
    Q_{ab,C} over the orderings of K, each ordering weighted by
    (1/#C!)(½)^{o(C)−#C}. Absent keys are zero.
    """

    dim: Dim
    max_order: int
    values: dict[JetKey, Fraction] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.max_order < 2:
            raise ConfigError(f"jet tables start at order 2, got max_order={self.max_order}")
        ring = ring_for(self.dim.n)
        for key in self.values:
            if len(key) < 2 or jet_order(ring, key) > self.max_order:
                raise InvariantViolation(f"jet {key} is outside orders 2..{self.max_order}")

    @property
    def ring(self) -> GradedRing:
        return ring_for(self.dim.n)

    def value(self, key: Iterable[int]) -> Fraction:
        return self.values.get(tuple(sorted(key)), Fraction(0))

    def order_of(self, key: JetKey) -> int:
        return jet_order(self.ring, key)

    def at_order(self, m: int) -> dict[JetKey, Fraction]:
        return {k: v for k, v in self.values.items() if self.order_of(k) == m}

    def nonzero(self, upto: Optional[int] = None) -> dict[JetKey, Fraction]:
        limit = self.max_order if upto is None else upto
        return {k: v for k, v in self.values.items() if v != 0 and self.order_of(k) <= limit}

    def is_zero(self, upto: Optional[int] = None) -> bool:
        return not self.nonzero(upto)

    def symmetrized(self) -> "QJetTable":
        """The table itself: entries are stored symmetrized, so this is idempotent."""
        return self

    def expanded(self) -> dict[JetKey, Fraction]:
        """Every ordering (a, b, *C) of every stored K, carrying the symmetrized value."""
        out: dict[JetKey, Fraction] = {}
        for key, value in self.values.items():
            if value == 0:
                continue
            for perm in multiset_permutations(list(key)):
                out[tuple(perm)] = value
        return out

    def plus(self, other: "QJetTable") -> "QJetTable":
        if other.dim != self.dim:
            raise ConfigError("cannot add jet tables of different dimension")
        values = dict(self.values)
        for key, value in other.values.items():
            if self.order_of(key) <= self.max_order:
                values[key] = values.get(key, Fraction(0)) + value
        return QJetTable(self.dim, self.max_order, {k: v for k, v in values.items() if v != 0})

    @classmethod
    def from_entries(
        cls,
        dim: Dim,
        entries: Mapping[JetKey, Any],
        max_order: Optional[int] = None,
    ) -> "QJetTable":
        """Symmetrize raw entries Q_{ab,C} keyed by ``(a, b, *C)``.

        Q is symmetric, so an entry ``(a, b, *C)`` whose mirror ``(b, a, *C)``
        is absent stands for both.

        Raises:
            InvariantViolation: an index is out of range or a key is shorter than 2.
        """
        ring = ring_for(dim.n)
        raw: dict[JetKey, Fraction] = {}
        for key, value in entries.items():
            key = tuple(int(k) for k in key)
            if len(key) < 2 or any(k < 0 or k >= ring.size for k in key):
                raise InvariantViolation(f"invalid jet index {key} for n={dim.n}")
            raw[key] = to_fraction(value)
        for key, value in list(raw.items()):
            mirror = (key[1], key[0]) + key[2:]
            if mirror not in raw:
                raw[mirror] = value
        if max_order is None:
            max_order = max((jet_order(ring, k) for k in raw), default=2)
        return cls(dim, max(max_order, 2), _symmetrize(dim, raw, max_order))

    @classmethod
    def from_fields(
        cls, dim: Dim, fields: Mapping[tuple[int, int], Poly], max_order: int
    ) -> "QJetTable":
        """Jets X_C Q_{ab}|_0 of polynomial fields Q_{ab} (keys with a <= b)."""
        ring = ring_for(dim.n)
        raw: dict[JetKey, Fraction] = {}
        for (a, b), f in fields.items():
            budget = max_order - ring.index_weight(a) - ring.index_weight(b)
            if budget < 0 or f.is_zero:
                continue
            for seq, value in frame_derivatives(ring, f, budget).items():
                raw[(a, b) + seq] = value
                if a != b:
                    raw[(b, a) + seq] = value
        return cls(dim, max_order, _symmetrize(dim, raw, max_order))

    @classmethod
    def zero(cls, dim: Dim, max_order: int) -> "QJetTable":
        return cls(dim, max_order, {})


def _symmetrize(
    dim: Dim, raw: Mapping[JetKey, Fraction], max_order: int
) -> dict[JetKey, Fraction]:
    ring = ring_for(dim.n)
    sums: dict[JetKey, Fraction] = {}
    for key, value in raw.items():
        if value == 0 or jet_order(ring, key) > max_order:
            continue
        sorted_key = tuple(sorted(key))
        sums[sorted_key] = sums.get(sorted_key, Fraction(0)) + taylor_weight(ring, key[2:]) * value
    out = {}
    for key, total in sums.items():
        if total != 0:
            out[key] = total / _total_weight(dim.n, key)
    return out


def phi(
    source: Union[QJetTable, Mapping[tuple[int, int], Poly]], m: int, dim: Optional[Dim] = None
) -> Poly:
    """Φ_(m) = Σ_{o(abC)=m} (1/#C!)(½)^{o(C)−#C} x^a x^b x^C Q_{ab,C}(q).

    ``source`` is a jet table or a map of polynomial Q-fields (then ``dim`` is
    required).

    Raises:
        MissingJetError: the table stops below order m.
    """
    if isinstance(source, QJetTable):
        table = source
    else:
        if dim is None:
            raise ConfigError("phi on Q-fields needs the dimension")
        table = QJetTable.from_fields(dim, source, max(m, 2))
    if m > table.max_order:
        raise MissingJetError(
            f"jets of order {m} requested from a table of order {table.max_order}"
        )
    ring = table.ring
    terms: dict[tuple[int, ...], Fraction] = {}
    for key, value in table.at_order(m).items():
        mono = sequence_monomial(ring, key)
        terms[mono] = terms.get(mono, Fraction(0)) + _total_weight(table.dim.n, key) * value
    return ring.from_terms(terms)


@dataclass
class ConformalFactor:
    """u = one_jet + Σ_{m ≥ 2} u_m with u_m homogeneous of weight m.

    The 1-jet is linear in x with zero constant term; the weight-2 piece is x-only.
    """

    dim: Dim
    pieces: dict[int, Poly] = field(default_factory=dict)
    one_jet: Optional[Poly] = None

    def __post_init__(self) -> None:
        ring = ring_for(self.dim.n)
        for m, piece in self.pieces.items():
            if m < 2:
                raise InvariantViolation(f"piece of weight {m}: pieces start at weight 2")
            if any(w != m for w in ring.weights(piece)):
                raise InvariantViolation(f"piece u_{m} is not homogeneous of weight {m}")
            if m == 2 and ring.depends_on_t(piece):
                raise InvariantViolation("u_2 must not depend on t")
        if self.one_jet is not None and any(w != 1 for w in ring.weights(self.one_jet)):
            raise InvariantViolation("the 1-jet must be linear in x with zero constant term")

    @property
    def ring(self) -> GradedRing:
        return ring_for(self.dim.n)

    def total(self) -> Poly:
        out = self.one_jet if self.one_jet is not None else self.ring.zero()
        for piece in self.pieces.values():
            out = out + piece
        return out

    def with_piece(self, m: int, piece: Poly) -> "ConformalFactor":
        pieces = dict(self.pieces)
        if not piece.is_zero:
            pieces[m] = pieces.get(m, self.ring.zero()) + piece
        return replace(self, pieces=pieces)

    def is_zero(self) -> bool:
        return self.total().is_zero


class JetOracle(Protocol):
    """Q-jets of the structure e^{2u}η for a conformal factor u."""

    dim: Dim
    max_order: int

    def __call__(self, factor: ConformalFactor) -> QJetTable: ...


def _half() -> sympy.Rational:
    return sympy.Rational(1, 2)


def linear_increment_fields(ring: GradedRing, u: Poly) -> dict[tuple[int, int], Poly]:
    """Linearized change of Q under e^{2u}.

    ΔQ_{αβ} = −½(X_αX_β + X_βX_α)u + (ℒ₀u) δ_{αβ}, ΔQ_{αi} = −X_αT_iu,
    ΔQ_{ij} = −T_iT_ju.
    """
    h = ring.dim.h
    xu = [ring.apply_X(a, u) for a in range(h)]
    tu = [ring.apply_T(i, u) for i in range(3)]
    lap = ring.sublaplacian(u)
    out: dict[tuple[int, int], Poly] = {}
    for a in range(h):
        for b in range(a, h):
            f = -(ring.apply_X(a, xu[b]) + ring.apply_X(b, xu[a])) * _half()
            if a == b:
                f = f + lap
            out[(a, b)] = f
        for i in range(3):
            out[(a, h + i)] = -ring.apply_X(a, tu[i])
    for i in range(3):
        for j in range(i, 3):
            out[(h + i, h + j)] = -ring.apply_T(i, tu[j])
    return out


@dataclass
class LinearizedOracle:
    """Applies exactly the first-order change of Q, so Φ̃_(m) − Φ_(m) = L_m u_m."""

    base: QJetTable

    @property
    def dim(self) -> Dim:
        return self.base.dim

    @property
    def max_order(self) -> int:
        return self.base.max_order

    def __call__(self, factor: ConformalFactor) -> QJetTable:
        u = factor.total()
        if u.is_zero:
            return self.base
        fields = linear_increment_fields(factor.ring, u)
        return self.base.plus(QJetTable.from_fields(self.dim, fields, self.max_order))


def exp_series(ring: GradedRing, f: Poly, max_weight: int) -> Poly:
    """e^f truncated at parabolic weight ``max_weight``; f(0) must vanish.

    Raises:
        PreconditionError: f has a nonzero constant term.
    """
    if ring.value_at_origin(f) != 0:
        raise PreconditionError("exp_series needs f(0) = 0 to stay rational")
    out = ring.poly(1)
    term = ring.poly(1)
    for k in range(1, max_weight + 1):
        term = ring.truncate(term * f * sympy.Rational(1, k), max_weight)
        if term.is_zero:
            break
        out = out + term
    return out


def _int_matrices(dim: Dim) -> list[list[list[int]]]:
    acs = standard_acs(dim)
    return [[[int(acs[i][r, c]) for c in range(dim.h)] for r in range(dim.h)] for i in range(3)]


def _poly_upsilon(ring: GradedRing, a: list[list[Poly]]) -> list[list[Poly]]:
    """Υ(A) = Σ_i M_i A M_iᵀ on a matrix of polynomials."""
    h = ring.dim.h
    mats = _int_matrices(ring.dim)
    out = [[ring.zero() for _ in range(h)] for _ in range(h)]
    for m in mats:
        nz = [[(c, m[r][c]) for c in range(h) if m[r][c]] for r in range(h)]
        for r in range(h):
            for s in range(h):
                acc = ring.zero()
                for c, mc in nz[r]:
                    for d, md in nz[s]:
                        acc = acc + a[c][d] * (mc * md)
                out[r][s] = out[r][s] + acc
    return out


def _reeb_shift(ring: GradedRing, w: Poly) -> list[list[Poly]]:
    """q[i][b] = (I_i∇w)^b, so that R̃_i = e^{−2w}(T_i − q_i^b X_b)."""
    h = ring.dim.h
    mats = _int_matrices(ring.dim)
    grad = [ring.apply_X(a, w) for a in range(h)]
    zero = ring.zero()
    return [
        [sum((grad[a] * mats[i][b][a] for a in range(h) if mats[i][b][a]), zero) for b in range(h)]
        for i in range(3)
    ]


def _horizontal_bracket(
    ring: GradedRing, q: list[list[Poly]], k: int, l: int, cap: int
) -> list[Poly]:
    """H-part of [V_k, V_l] along the rescaled vertical space, V_k = T_k − q_k^b X_b."""
    h = ring.dim.h
    mats = _int_matrices(ring.dim)
    out = [ring.apply_T(l, q[k][d]) - ring.apply_T(k, q[l][d]) for d in range(h)]
    for b in range(h):
        if not q[k][b].is_zero:
            out = [out[d] + q[k][b] * ring.apply_X(b, q[l][d]) for d in range(h)]
        if not q[l][b].is_zero:
            out = [out[d] - q[l][b] * ring.apply_X(b, q[k][d]) for d in range(h)]
    # [X_b, X_c] = 2 M_s[b, c] T_s, and T_s has H-part q_s
    for s in range(3):
        coeff = ring.zero()
        for b in range(h):
            if q[k][b].is_zero:
                continue
            for c in range(h):
                if mats[s][b][c] and not q[l][c].is_zero:
                    coeff = coeff + q[k][b] * q[l][c] * (2 * mats[s][b][c])
        coeff = ring.truncate(coeff, cap)
        if not coeff.is_zero:
            out = [out[d] + coeff * q[s][d] for d in range(h)]
    return [ring.truncate(f, cap) for f in out]


def _curvature_pairing(
    ring: GradedRing, connection: Mapping[tuple[int, int, int], Poly], a: int, b: int, cap: int
) -> list[Poly]:
    """Σ_{αβ} R(e_a, e_b){}^β{}_α M_j[α, β] for j = 1..3, from frame components."""
    h = ring.dim.h
    size = ring.size
    mats = _int_matrices(ring.dim)
    zero = ring.zero()

    def g(c: int, x: int, y: int) -> Poly:
        return connection.get((c, x, y), zero)

    out = [zero, zero, zero]
    for alpha in range(h):
        for beta in range(h):
            if not any(mats[j][alpha][beta] for j in range(3)):
                continue
            r = ring.apply_frame(a, g(b, alpha, beta)) - ring.apply_frame(b, g(a, alpha, beta))
            for c in range(size):
                r = r + g(b, alpha, c) * g(a, c, beta) - g(a, alpha, c) * g(b, c, beta)
            if a < h and b < h:
                for s in range(3):
                    if mats[s][a][b]:
                        r = r - g(h + s, alpha, beta) * (2 * mats[s][a][b])
            r = ring.truncate(r, cap)
            if r.is_zero:
                continue
            for j in range(3):
                if mats[j][alpha][beta]:
                    out[j] = out[j] + r * mats[j][alpha][beta]
    return out


def flat_q_fields(
    ring: GradedRing,
    w: Poly,
    max_order: int,
    connection: Optional[Mapping[tuple[int, int, int], Poly]] = None,
) -> dict[tuple[int, int], Poly]:
    """Q-fields of e^{2w}η on the flat model in the frame (X_α, R̃_i), exact per weight.

    τ̃ = P₋₁(4w_αw_β − 2w_{(αβ)}), μ̃ = P₃(−2w_αw_β − w_{(αβ)}) made trace-free and
    S̃ = e^{−2w}(−16(n+1)(n+2)|∇w|² − 8(n+2)w_γ{}^γ) give Q_{αβ} = L̃_{αβ} +
    S̃g̃_{αβ}/(8(n+2)) with g̃ = e^{2w}g. Q_{αi} = −A⁻¹(T̃ε) uses the torsion
    T̃_{βkl} = −e^{−2w}[V_k, V_l]_H of the rescaled Reeb fields, and
    Q_{ij} = −B̃_{(ij)}/(16n) contracts the curvature of ``connection`` (the
    frame components of the rescaled connection, built when absent). Each
    block is kept through the weight its jets of order ≤ ``max_order`` reach.
    """
    n, h = ring.dim.n, ring.dim.h
    cap = max_order

    def cut(f: Poly) -> Poly:
        return ring.truncate(f, cap)

    grad = [ring.apply_X(a, w) for a in range(h)]
    hess_sym = [
        [cut((ring.apply_X(b, grad[a]) + ring.apply_X(a, grad[b])) * _half()) for b in range(h)]
        for a in range(h)
    ]
    outer = [[cut(grad[a] * grad[b]) for b in range(h)] for a in range(h)]
    a_tau = [[outer[a][b] * 4 - hess_sym[a][b] * 2 for b in range(h)] for a in range(h)]
    a_mu = [[-outer[a][b] * 2 - hess_sym[a][b] for b in range(h)] for a in range(h)]
    quarter = sympy.Rational(1, 4)
    ups_tau = _poly_upsilon(ring, a_tau)
    ups_mu = _poly_upsilon(ring, a_mu)
    tau = [[(a_tau[a][b] * 3 - ups_tau[a][b]) * quarter for b in range(h)] for a in range(h)]
    mu = [[(a_mu[a][b] + ups_mu[a][b]) * quarter for b in range(h)] for a in range(h)]
    mu_trace = sum((mu[a][a] for a in range(h)), ring.zero())
    for a in range(h):
        mu[a][a] = mu[a][a] - mu_trace * sympy.Rational(1, h)
    grad2 = sum((outer[a][a] for a in range(h)), ring.zero())
    lap = sum((hess_sym[a][a] for a in range(h)), ring.zero())
    # S̃ g̃_{αβ}: the conformal factors of S̃ and g̃ cancel
    s_metric = grad2 * (-16 * (n + 1) * (n + 2)) - lap * (8 * (n + 2))
    s_coeff = sympy.Rational(1, 32 * n * (n + 2)) + sympy.Rational(1, 8 * (n + 2))
    fields: dict[tuple[int, int], Poly] = {}
    for a in range(h):
        for b in range(a, h):
            f = tau[a][b] * _half() + mu[a][b]
            if a == b:
                f = f + s_metric * s_coeff
            fields[(a, b)] = cut(f)

    budget_hv = max_order - 3
    if budget_hv < 0:
        return fields
    q = _reeb_shift(ring, w)
    eps = epsilon(ScalarKind.RATIONAL)
    scale = exp_series(ring, -w * 2, budget_hv)
    # tv[j][β] = T̃_{βkl}ε_j^{kl}
    tv = [[ring.zero() for _ in range(h)] for _ in range(3)]
    for k in range(3):
        for l in range(k + 1, 3):
            br = _horizontal_bracket(ring, q, k, l, budget_hv)
            for j in range(3):
                e = int(eps[j, k, l])
                if e:
                    for beta in range(h):
                        tv[j][beta] = tv[j][beta] - br[beta] * (2 * e)
    tv = [[ring.truncate(scale * f, budget_hv) for f in row] for row in tv]
    _, a_inv = A_operator(ring.dim)
    for i in range(3):
        for alpha in range(h):
            acc = ring.zero()
            for j in range(3):
                for beta in range(h):
                    c = a_inv[i * h + alpha, j * h + beta]
                    if c != 0 and not tv[j][beta].is_zero:
                        acc = acc + tv[j][beta] * rational(c)
            fields[(alpha, h + i)] = -acc

    budget_vv = max_order - 4
    if budget_vv < 0:
        return fields
    if connection is None:
        change = connection_change(w, ring.dim, degree=cap + 2)
        connection = frame_connection(change, ring.dim, cap + 2)
    frame = connection
    # V_k in frame components
    vk = [
        [(h + k, ring.poly(1))] + [(b, -q[k][b]) for b in range(h) if not q[k][b].is_zero]
        for k in range(3)
    ]
    pairing: dict[tuple[int, int], list[Poly]] = {}

    def paired(a: int, b: int) -> list[Poly]:
        if (a, b) not in pairing:
            pairing[(a, b)] = _curvature_pairing(ring, frame, a, b, budget_vv)
        return pairing[(a, b)]

    rkl = [[[ring.zero() for _ in range(3)] for _ in range(3)] for _ in range(3)]
    for k in range(3):
        for l in range(3):
            if k == l:
                continue
            for a, ca in vk[k]:
                for b, cb in vk[l]:
                    if a == b:
                        continue
                    coeff = ring.truncate(ca * cb, budget_vv)
                    if coeff.is_zero:
                        continue
                    for j, r in enumerate(paired(a, b)):
                        rkl[k][l][j] = rkl[k][l][j] + coeff * r
    scale4 = exp_series(ring, -w * 4, budget_vv)
    b_tilde = [[ring.zero() for _ in range(3)] for _ in range(3)]
    for i in range(3):
        for j in range(3):
            acc = ring.zero()
            for k in range(3):
                for l in range(3):
                    e = int(eps[i, k, l])
                    if e:
                        acc = acc + rkl[k][l][j] * e
            b_tilde[i][j] = ring.truncate(scale4 * acc, budget_vv)
    for i in range(3):
        for j in range(i, 3):
            fields[(h + i, h + j)] = -(b_tilde[i][j] + b_tilde[j][i]) * sympy.Rational(1, 32 * n)
    return fields


def _to_frame(
    ring: GradedRing, w: Poly, rescaled: Mapping[tuple[int, int], Poly], max_order: int
) -> dict[tuple[int, int], Poly]:
    """Components in (X_α, T_i) of a form given in (X_α, R̃_i); T_i = e^{2w}R̃_i + q_i^b X_b."""
    h, size = ring.dim.h, ring.size
    full: dict[tuple[int, int], Poly] = {}
    for (a, b), f in rescaled.items():
        if not f.is_zero:
            full[(a, b)] = f
            full[(b, a)] = f
    q = _reeb_shift(ring, w)
    e2w = exp_series(ring, w * 2, max_order)
    rows: list[list[tuple[int, Poly]]] = [[(a, ring.poly(1))] for a in range(h)]
    for i in range(3):
        rows.append([(h + i, e2w)] + [(b, q[i][b]) for b in range(h) if not q[i][b].is_zero])
    out: dict[tuple[int, int], Poly] = {}
    for a in range(size):
        for b in range(size):
            budget = max_order - ring.index_weight(a) - ring.index_weight(b)
            if budget < 0:
                continue
            acc = ring.zero()
            for c, pc in rows[a]:
                for d, pd in rows[b]:
                    f = full.get((c, d))
                    if f is not None:
                        acc = acc + ring.truncate(pc * pd, budget) * f
            acc = ring.truncate(acc, budget)
            if not acc.is_zero:
                out[(a, b)] = acc
    return out


def _to_rescaled_jets(
    ring: GradedRing, w: Poly, jets: Mapping[JetKey, Fraction], max_order: int
) -> dict[JetKey, Fraction]:
    """Jets at the origin re-expressed on R̃_i(0) = T_i − q_i^b(0) X_b."""
    h = ring.dim.h
    q0 = [[ring.value_at_origin(f) for f in row] for row in _reeb_shift(ring, w)]
    if not any(x != 0 for row in q0 for x in row):
        return dict(jets)
    options = {
        b: [(b, Fraction(1))] + [(h + i, -q0[i][b]) for i in range(3) if q0[i][b] != 0]
        for b in range(h)
    }
    out: dict[JetKey, Fraction] = {}
    for key, value in jets.items():
        slots = [options[a] if a < h else [(a, Fraction(1))] for a in key]
        for combo in itertools.product(*slots):
            target = tuple(a for a, _ in combo)
            if jet_order(ring, target) > max_order:
                continue
            coeff = value
            for _, c in combo:
                coeff = coeff * c
            out[target] = out.get(target, Fraction(0)) + coeff
    return out


def frame_connection(
    conn: PolyConnection, dim: Dim, max_weight: Optional[int] = None
) -> dict[tuple[int, int, int], Poly]:
    """Frame components G[a, b, c] = θ^c(∇_{e_a}e_b) of a connection on the flat model.

    The left-invariant frame is parallel for the flat connection, so G vanishes
    there and otherwise is the difference tensor in that frame. Components are
    cut at parabolic weight ``max_weight`` when it is given.
    """
    ring = ring_for(dim.n)
    size = ring.size
    fmat, cmat = _frame_polys(dim.n)
    zero = ring.zero()

    def cut(f: Poly) -> Poly:
        return f if max_weight is None else ring.truncate(f, max_weight)

    half: dict[tuple[int, int, int], Poly] = {}
    for (k, i, j), terms in conn.gamma.items():
        g = cut(ring.from_terms(dict(terms)))
        if g.is_zero:
            continue
        for a in range(size):
            if not fmat[i][a].is_zero:
                half[(k, a, j)] = half.get((k, a, j), zero) + fmat[i][a] * g
    full: dict[tuple[int, int, int], Poly] = {}
    for (k, a, j), g in half.items():
        for b in range(size):
            if not fmat[j][b].is_zero:
                full[(k, a, b)] = full.get((k, a, b), zero) + fmat[j][b] * g
    for a in range(size):
        for b in range(size):
            for k in range(size):
                d = ring.apply_frame(a, fmat[k][b])
                if not d.is_zero:
                    full[(k, a, b)] = full.get((k, a, b), zero) + d
    out: dict[tuple[int, int, int], Poly] = {}
    for (k, a, b), g in full.items():
        for c in range(size):
            if not cmat[c][k].is_zero:
                out[(a, b, c)] = out.get((a, b, c), zero) + cmat[c][k] * g
    cut_out = {key: cut(g) for key, g in out.items()}
    return {key: g for key, g in cut_out.items() if not g.is_zero}


def covariant_jets(
    ring: GradedRing,
    fields: Mapping[tuple[int, int], Poly],
    connection: Mapping[tuple[int, int, int], Poly],
    max_order: int,
) -> dict[JetKey, Fraction]:
    """Q_{ab,C}(0) = (∇^{#C}Q)(e_a, e_b, e_C) at the origin for o(abC) ≤ ``max_order``.

    ``fields`` holds the frame components Q_{ab} for both index orders and
    ``connection`` the components G[c, a, d] of ∇_{e_c}e_a. The last index of
    a key is the outermost derivative. Connection terms never lower o(key)
    plus weight, so each field is cut at max_order − o(key).
    """
    size = ring.size
    zero = ring.zero()
    by_slot: dict[tuple[int, int], list[tuple[int, Poly]]] = {}
    for (c, a, d), g in connection.items():
        by_slot.setdefault((c, a), []).append((d, g))
    keys = [
        key for key in itertools.product(range(size), repeat=2) if jet_order(ring, key) <= max_order
    ]
    level: dict[JetKey, Poly] = {}
    for key in keys:
        f = fields.get(key)
        if f is not None:
            f = ring.truncate(f, max_order - jet_order(ring, key))
            if not f.is_zero:
                level[key] = f
    jets: dict[JetKey, Fraction] = {}
    while keys:
        for key, f in level.items():
            value = ring.value_at_origin(f)
            if value != 0:
                jets[key] = value
        longer = [
            key + (c,)
            for key in keys
            for c in range(size)
            if jet_order(ring, key) + ring.index_weight(c) <= max_order
        ]
        nxt: dict[JetKey, Poly] = {}
        for key in longer:
            base, c = key[:-1], key[-1]
            f = level.get(base)
            out = ring.apply_frame(c, f) if f is not None else zero
            for p, a in enumerate(base):
                for d, g in by_slot.get((c, a), ()):
                    other = level.get(base[:p] + (d,) + base[p + 1 :])
                    if other is not None:
                        out = out - g * other
            out = ring.truncate(out, max_order - jet_order(ring, key))
            if not out.is_zero:
                nxt[key] = out
        keys, level = longer, nxt
    return jets


@dataclass
class FlatModelOracle:
    """Q-jets of e^{2(v+u)}η on the flat model, v being a seeded start factor.

    The rescaled connection comes from ``connection_change``; jets are its
    covariant derivatives of Q̃, read off in the rescaled frame at the origin.
    """

    dim: Dim
    max_order: int
    start: Optional[Poly] = None

    def __post_init__(self) -> None:
        if self.max_order < 2:
            raise ConfigError(f"N must be >= 2, got {self.max_order}")

    def __call__(self, factor: ConformalFactor) -> QJetTable:
        ring = ring_for(self.dim.n)
        w = factor.total()
        if self.start is not None:
            w = w + self.start
        if w.is_zero:
            return QJetTable.zero(self.dim, self.max_order)
        cap = self.max_order + 2
        w = ring.truncate(w, cap)
        connection = frame_connection(connection_change(w, self.dim, degree=cap), self.dim, cap)
        rescaled = flat_q_fields(ring, w, self.max_order, connection)
        fields = _to_frame(ring, w, rescaled, self.max_order)
        jets = covariant_jets(ring, fields, connection, self.max_order)
        raw = _to_rescaled_jets(ring, w, jets, self.max_order)
        logger.debug("flat oracle: %d connection components, %d jets", len(connection), len(raw))
        return QJetTable(self.dim, self.max_order, _symmetrize(self.dim, raw, self.max_order))


def normalize_step(m: int, table: QJetTable) -> Poly:
    """u_m = L_m⁻¹(−Φ_(m)), unique in 𝒫_m (m ≥ 3) or among x-only polynomials (m = 2).

    Raises:
        ConfigError: m < 2.
        PreconditionError: the right-hand side depends on t at m = 2.
    """
    if m < 2:
        raise ConfigError(f"normalization steps start at m = 2, got {m}")
    rhs = -phi(table, m)
    u_m = solve_Lm(table.dim, m, rhs)
    logger.debug("order %d: %d rhs terms, %d solution terms", m, len(rhs.terms()), len(u_m.terms()))
    return u_m


def _check_stability(before: QJetTable, after: QJetTable, m: int) -> None:
    for key in set(before.values) | set(after.values):
        if before.order_of(key) < m and before.value(key) != after.value(key):
            raise StabilityViolation(
                f"adding u_{m} changed the order-{before.order_of(key)} jet {key}: "
                f"{before.value(key)} -> {after.value(key)}"
            )


def normalize(N: int, oracle: JetOracle, one_jet: Optional[Poly] = None) -> ConformalFactor:
    """Choose u_2 .. u_N so that every symmetrized jet of order ≤ N vanishes.

    Raises:
        ConfigError: N < 2 or N exceeds the oracle's order.
        StabilityViolation: the oracle changed a lower-order jet.
    """
    if N < 2:
        raise ConfigError(f"N must be >= 2, got {N}")
    if N > oracle.max_order:
        raise ConfigError(f"N={N} exceeds the oracle order {oracle.max_order}")
    factor = ConformalFactor(oracle.dim, one_jet=one_jet)
    table = oracle(factor)
    for m in range(2, N + 1):
        u_m = normalize_step(m, table)
        factor = factor.with_piece(m, u_m)
        updated = oracle(factor)
        _check_stability(table, updated, m)
        table = updated
        logger.debug("order %d done; %d nonzero jets remain", m, len(table.nonzero(N)))
    return factor


@dataclass
class UJets:
    """Derivatives of a conformal factor at one point.

    ``hess[α, β] = u_{αβ} = X_βX_α u``, ``mixed[i, α] = u_{αi}``,
    ``vert[i, j] = u_{ij}`` and ``grad_v[i] = T_i u``.
    """

    u0: Any
    grad: np.ndarray
    hess: np.ndarray
    mixed: Optional[np.ndarray] = None
    vert: Optional[np.ndarray] = None
    grad_v: Optional[np.ndarray] = None

    @classmethod
    def from_poly(cls, ring: GradedRing, u: Poly) -> "UJets":
        """Jets at the origin of a polynomial factor on the flat model."""
        h = ring.dim.h
        val = ring.value_at_origin
        grad_p = [ring.apply_X(a, u) for a in range(h)]
        tu = [ring.apply_T(i, u) for i in range(3)]

        def arr(values: list[Any], shape: tuple[int, ...]) -> np.ndarray:
            out = np.empty(len(values), dtype=object)
            out[:] = values
            return out.reshape(shape)

        return cls(
            val(u),
            arr([val(g) for g in grad_p], (h,)),
            arr([val(ring.apply_X(b, grad_p[a])) for a in range(h) for b in range(h)], (h, h)),
            arr([val(ring.apply_T(i, grad_p[a])) for i in range(3) for a in range(h)], (3, h)),
            arr([val(ring.apply_T(j, tu[i])) for i in range(3) for j in range(3)], (3, 3)),
            arr([val(t) for t in tu], (3,)),
        )


@dataclass
class RescaleResult:
    """Rescaled state plus the Reeb fields and torsion increment of e^{2u}η."""

    state: PointState
    reeb: np.ndarray
    torsion_increment: np.ndarray


def _conformal_scale(u0: Any, kind: ScalarKind) -> Any:
    """e^{−2u(q)}, which is rational only for u(q) = 0."""
    if u0 == 0:
        return coefficient(1, 1, kind)
    if kind == ScalarKind.RATIONAL:
        raise PreconditionError(
            f"e^(-2u) is irrational for u(q) = {u0}; use the f64 backend for this rescaling"
        )
    return math.exp(-2 * float(u0))


def rescale_point(state: PointState, jets: UJets) -> RescaleResult:
    """Pointwise change of τ, μ, S, R_i, T^α_{ij} and B_{(ij)} under e^{2u}.

    τ̃ = τ + P₋₁(4u_αu_β − 2u_{(αβ)}), μ̃ = μ + P₃(−2u_αu_β − u_{(αβ)}) (trace-free),
    S̃ = e^{−2u}(S − 16(n+1)(n+2)u_γu^γ − 8(n+2)u_γ{}^γ). The torsion and B
    changes are the leading terms; they need ``mixed`` and ``vert``.

    Raises:
        MissingJetError: the torsion or B change is needed but its jet is absent.
        PreconditionError: u(q) != 0 on the rational backend.
    """
    kind, n, h = state.scalar, state.dim.n, state.dim.h
    acs = standard_acs(state.dim, kind)
    cas = casimir(acs)
    half = coefficient(1, 2, kind)
    grad = np.asarray(jets.grad)
    hess = np.asarray(jets.hess)
    if kind == ScalarKind.F64:
        grad, hess = grad.astype(float), hess.astype(float)
    outer = np.multiply.outer(grad, grad)
    u_sym = (hess + hess.T) * half
    tau = state.tau + cas.project(outer * 4 - u_sym * 2, -1)
    mu_inc = cas.project(-outer * 2 - u_sym, 3)
    mu_tr = sum(mu_inc[a, a] for a in range(h))
    mu = state.mu + mu_inc - identity(h, kind) * (mu_tr * coefficient(1, h, kind))
    scale = _conformal_scale(jets.u0, kind)
    grad2 = sum(grad * grad)
    lap = sum(hess[a, a] for a in range(h))
    S = scale * (state.S - grad2 * (16 * (n + 1) * (n + 2)) - lap * (8 * (n + 2)))

    reeb = zeros((3, h + 3), kind)
    for i in range(3):
        reeb[i, :h] = -(acs[i] @ grad) * scale
        reeb[i, h + i] = scale

    t_vv = state.torsion_vv()
    increment = zeros((h, 3, 3), kind)
    B = state.B
    if state.T_vv is not None or state.B is not None:
        if jets.mixed is None:
            raise MissingJetError("the torsion change needs the mixed jets u_{αi}")
        mixed = np.asarray(jets.mixed)
        for i in range(3):
            for j in range(3):
                increment[:, i, j] = acs[j] @ mixed[i] - acs[i] @ mixed[j]
    if state.B is not None:
        if jets.vert is None:
            raise MissingJetError("the B change needs the vertical jets u_{ij}")
        vert = np.asarray(jets.vert)
        B = state.B + (vert + vert.T) * (8 * n)
    new_state = replace(state, tau=tau, mu=mu, S=S, T_vv=t_vv + increment, B=B, R_hhhh=None)
    return RescaleResult(new_state, reeb, increment)


def _connection_blocks(ring: GradedRing, u: Poly) -> dict[tuple[int, int, int], Poly]:
    """Frame components S[a, b, c] of ∇̃ − ∇: the e_c part of S_{e_a}e_b."""
    n, h = ring.dim.n, ring.dim.h
    mats = _int_matrices(ring.dim)
    eps = epsilon(ScalarKind.RATIONAL)
    zero = ring.zero()
    grad = [ring.apply_X(a, u) for a in range(h)]
    tu = [ring.apply_T(i, u) for i in range(3)]
    # p[k][a] = du(I_k e_a), q[i][b] = (I_i ∇u)^b
    p = [
        [sum((grad[g] * mats[k][g][a] for g in range(h) if mats[k][g][a]), zero) for a in range(h)]
        for k in range(3)
    ]
    q = [
        [sum((grad[a] * mats[i][b][a] for a in range(h) if mats[i][b][a]), zero) for b in range(h)]
        for i in range(3)
    ]
    S: dict[tuple[int, int, int], Poly] = {}

    def put(key: tuple[int, int, int], value: Poly) -> None:
        if not value.is_zero:
            S[key] = value

    for a in range(h):
        for b in range(h):
            for c in range(h):
                val = zero
                if b == c:
                    val = val + grad[a]
                if a == c:
                    val = val + grad[b]
                if a == b:
                    val = val - grad[c]
                for i in range(3):
                    m = mats[i]
                    if m[c][b]:
                        val = val - p[i][a] * m[c][b]
                    if m[a][c]:
                        val = val + p[i][b] * m[a][c]
                    if m[b][a]:
                        val = val + p[i][c] * m[b][a]
                put((a, b, c), val)

    hhat = [
        [grad[a] * grad[b] * 2 - ring.apply_X(a, grad[b]) for b in range(h)] for a in range(h)
    ]
    tr_hhat = sum((hhat[a][a] for a in range(h)), zero)
    grad2 = sum((g * g for g in grad), zero)
    trace_part = (grad2 * 4 - tr_hhat) * sympy.Rational(1, 4 * n)
    quarter = sympy.Rational(1, 4)

    def mt_h(i: int, a: int, b: int) -> Poly:
        return sum((hhat[g][b] * mats[i][g][a] for g in range(h) if mats[i][g][a]), zero)

    def h_m(i: int, a: int, b: int) -> Poly:
        return sum((hhat[a][g] * mats[i][g][b] for g in range(h) if mats[i][g][b]), zero)

    def mt_h_m(j: int, k: int, a: int, b: int) -> Poly:
        acc = zero
        for g in range(h):
            if not mats[j][g][a]:
                continue
            for d in range(h):
                if mats[k][d][b]:
                    acc = acc + hhat[g][d] * (mats[j][g][a] * mats[k][d][b])
        return acc

    for i in range(3):
        for a in range(h):
            for b in range(h):
                val = (mt_h(i, a, b) - h_m(i, a, b)) * -quarter
                for j in range(3):
                    for k in range(3):
                        e = int(eps[i, j, k])
                        if e:
                            val = val + mt_h_m(j, k, a, b) * (quarter * e)
                            val = val - p[k][a] * p[j][b] * e
                            if mats[j][b][a]:
                                val = val + tu[k] * (e * mats[j][b][a])
                val = val - p[i][a] * grad[b] + p[i][b] * grad[a]
                if mats[i][b][a]:
                    val = val + trace_part * mats[i][b][a]
                if a == b:
                    # ∇̃ preserves e^{2u}g along R̃_i
                    val = val + tu[i]
                for g in range(h):
                    if (g, a, b) in S and not q[i][g].is_zero:
                        val = val + q[i][g] * S[(g, a, b)]
                put((h + i, a, b), val)

    forms = vertical_form_change(ring, u)
    for a in range(h):
        omega = [[forms[i][j][a] for j in range(3)] for i in range(3)]
        for i in range(3):
            for j in range(3):
                val = omega[i][j]
                if i == j:
                    val = val + grad[a] * 2
                put((a, h + i, h + j), val)
            for b in range(h):
                val = ring.apply_X(a, q[i][b]) - grad[a] * q[i][b] * 2
                for j in range(3):
                    val = val - omega[i][j] * q[j][b]
                for g in range(h):
                    if (a, g, b) in S and not q[i][g].is_zero:
                        val = val + q[i][g] * S[(a, g, b)]
                put((a, h + i, b), val)
    return S


def vertical_form_change(ring: GradedRing, u: Poly) -> list[list[list[Poly]]]:
    """ω̃_i{}^j(X_α) − ω_i{}^j(X_α) = ε^j{}_{ik} du(I^k X_α), indexed [i][j][α]."""
    h = ring.dim.h
    mats = _int_matrices(ring.dim)
    eps = epsilon(ScalarKind.RATIONAL)
    grad = [ring.apply_X(a, u) for a in range(h)]
    out = []
    for i in range(3):
        row = []
        for j in range(3):
            col = []
            for a in range(h):
                acc = ring.zero()
                for k in range(3):
                    if eps[j, i, k] != 0:
                        for g in range(h):
                            if mats[k][g][a]:
                                acc = acc + grad[g] * (int(eps[j, i, k]) * mats[k][g][a])
                col.append(acc)
            row.append(col)
        out.append(row)
    return out


def connection_change(
    u: Poly, dim: Dim, degree: Optional[int] = None
) -> PolyConnection:
    """Christoffel polynomials of the connection of e^{2u}η on the flat model.

    Γ̃^k_{ij} = Γ^k_{ij} + F^k_c S^c_{ab} C^a_i C^b_j, with F the flat frame
    matrix and C its inverse. The vertical-vertical block keeps its flat value.
    With ``degree`` the symbols are truncated at that coordinate degree.

    Raises:
        PreconditionError: ``degree`` would cut the whole change (it starts
            in degree m − 2 for u of lowest weight m).
    """
    ring = ring_for(dim.n)
    size = ring.size
    weights = ring.weights(u)
    if degree is not None and weights and degree < min(weights) - 2:
        raise PreconditionError(
            f"truncation degree {degree} is below the first change degree {min(weights) - 2}"
        )
    base = flat_connection(dim)
    gamma: dict[tuple[int, int, int], Poly] = {
        key: ring.from_terms(dict(terms)) for key, terms in base.gamma.items()
    }
    if not u.is_zero:
        fmat, cmat = _frame_polys(dim.n)
        S = _connection_blocks(ring, u)
        first: dict[tuple[int, int, int], Poly] = {}
        for (a, b, c), val in S.items():
            for i in range(size):
                if not cmat[a][i].is_zero:
                    key = (i, b, c)
                    first[key] = first.get(key, ring.zero()) + cmat[a][i] * val
        second: dict[tuple[int, int, int], Poly] = {}
        for (i, b, c), val in first.items():
            for j in range(size):
                if not cmat[b][j].is_zero:
                    key = (i, j, c)
                    second[key] = second.get(key, ring.zero()) + cmat[b][j] * val
        for (i, j, c), val in second.items():
            for k in range(size):
                if not fmat[k][c].is_zero:
                    key = (k, i, j)
                    gamma[key] = gamma.get(key, ring.zero()) + fmat[k][c] * val
    out: dict[tuple[int, int, int], list[tuple[tuple[int, ...], Any]]] = {}
    for key, poly in gamma.items():
        terms = [
            (mono, coeff)
            for mono, coeff in ring.terms(poly).items()
            if degree is None or sum(mono) <= degree
        ]
        if terms:
            out[key] = terms
    return PolyConnection(size, out)


@lru_cache(maxsize=None)
def _frame_polys(n: int) -> tuple[list[list[Poly]], list[list[Poly]]]:
    """F[k][c], the ∂_k component of e_c, and C = F⁻¹; both are affine in x."""
    ring = ring_for(n)
    frame = flat_frame(ring.dim)
    fmat = [
        [
            ring.poly(_affine_expr(ring, frame.vec_const[k, c], frame.vec_lin[k, c]))
            for c in range(ring.size)
        ]
        for k in range(ring.size)
    ]
    return fmat, _inverse_frame_polys(ring, frame)


def _affine_expr(ring: GradedRing, const: Any, lin: np.ndarray) -> Any:
    expr = rational(const)
    for l, gen in enumerate(ring.gens):
        if lin[l] != 0:
            expr = expr + rational(lin[l]) * gen
    return expr


def _inverse_frame_polys(ring: GradedRing, frame: Any) -> list[list[Poly]]:
    """C[a][k]: frame component a of ∂_k, i.e. [[I, 0], [−½B, ½I]]."""
    h, size = ring.dim.h, ring.size
    half = sympy.Rational(1, 2)
    out = [[ring.zero() for _ in range(size)] for _ in range(size)]
    for a in range(h):
        out[a][a] = ring.poly(1)
    for i in range(3):
        out[h + i][h + i] = ring.poly(half)
        for a in range(h):
            out[h + i][a] = ring.poly(
                -half * _affine_expr(ring, frame.vec_const[h + i, a], frame.vec_lin[h + i, a])
            )
    return out


@dataclass
class VanishingItem:
    """One quantity certified to vanish at the normalization centre."""

    name: str
    order: int
    reason: str
    certificate: Optional[Any] = None


def vanishing_report(table: QJetTable) -> list[VanishingItem]:
    """Curvature and torsion terms forced to zero once Q-jets vanish through order 4.

    Raises:
        PreconditionError: the table stops below order 4 or has a nonzero
            entry of order ≤ 4.
    """
    if table.max_order < 4:
        raise PreconditionError(
            f"the vanishing list needs jets through order 4, got {table.max_order}"
        )
    bad = table.nonzero(4)
    if bad:
        key, value = next(iter(sorted(bad.items())))
        raise PreconditionError(f"jet {key} = {value} is nonzero; the structure is not normalized")
    n = table.dim.n
    m3, m4 = divergence_matrices(n)
    det3, det4 = exact_det(m3), exact_det(m4)
    if det3 == 0 or det4 == 0:
        raise PreconditionError("divergence system is singular")
    a_min_poly = "A² + 2A − 8 = 0"
    s_i_coeff = Fraction(4 * n * n + n + 1, 8 * n * (n + 2))
    q_trace = Fraction(4 * n + 1, 8 * (n + 2))
    items = [
        VanishingItem("S", 2, "Q^α_α = (4n+1)S/(8(n+2))", q_trace),
        VanishingItem("L", 2, "Q_αβ = L_αβ + S g_αβ/(8(n+2))"),
        VanishingItem("tau", 2, "τ = 2 P₋₁(L)"),
        VanishingItem("mu", 2, "μ = trace-free part of P₃(L)"),
        VanishingItem("Ric", 2, "Ric is linear in τ, μ, S"),
        VanishingItem("T_hvh", 2, "T_{αiβ} is linear in τ, μ"),
        VanishingItem("T_vvv", 2, "T_{ijk} = −S ε_{ijk}/(8n(n+2))"),
        VanishingItem("T_hvv", 3, f"Q_αi = −A⁻¹(T ε), {a_min_poly}"),
        VanishingItem("S_h", 3, "first-divergence system", det3),
        VanishingItem("tau_div", 3, "first-divergence system", det3),
        VanishingItem("mu_div", 3, "first-divergence system", det3),
        VanishingItem("B", 4, "Q_ij = −B_(ij)/(16n) and ε^{jk}_i B_jk = −S_{,i}/(4n(n+2))"),
        VanishingItem("S_v", 4, "Q^α_{α,i} + 2Q_{αi,}^α coefficient", s_i_coeff),
        VanishingItem("S_hh_trace", 4, "second-divergence system", det4),
        VanishingItem("tau_double_div", 4, "second-divergence system", det4),
        VanishingItem("mu_double_div", 4, "second-divergence system", det4),
        VanishingItem("vh_ricci_div", 4, "second-divergence system", det4),
    ]
    return items
