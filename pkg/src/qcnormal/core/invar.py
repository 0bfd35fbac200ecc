"""Weight calculus and the weight-4 scalar-invariant reductions.

Weights use the parabolic order o(H) = 1, o(V) = 2. At the centre of normal
coordinates every torsion term of weight 2 vanishes, so the curvature there is
an algebraic curvature tensor with values in 𝔰𝔭(n) (it commutes with each
I_i in both index pairs). The reduction suite samples that class and checks
that every complete contraction of R ⊗ R is a fixed multiple of ‖W‖².
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Any, Iterable, Iterator, Optional

import numpy as np
import sympy
from sympy import QQ, ZZ
from sympy.polys.matrices import DomainMatrix

from qcnormal.core.curv import conformal_curvature, zero_state
from qcnormal.core.errors import ConfigError, InvariantViolation, SingularSystemError
from qcnormal.core.models import Dim, ScalarKind
from qcnormal.core.qalg import AcsTriple, coefficient, epsilon, standard_acs
from qcnormal.core.scalars import convert, is_zero, random_array, to_fraction, zeros

logger = logging.getLogger(__name__)

ORDER = {"H": 1, "V": 2}


class TermKind(Enum):
    """Building blocks of polynomial tensor expressions."""

    TORSION = "T"
    CURVATURE = "R"
    METRIC = "g"
    ACS = "I"
    EPSILON = "ε"
    CONSTANT = "c"


ARITY = {
    TermKind.TORSION: 3,
    TermKind.CURVATURE: 4,
    TermKind.METRIC: 2,
    TermKind.ACS: 3,
    TermKind.EPSILON: 3,
    TermKind.CONSTANT: 0,
}


def _order(word: str) -> int:
    return sum(ORDER[c] for c in word)


@dataclass(frozen=True)
class TermDescriptor:
    """One factor: its kind, the kinds of its indices and of its derivatives.

    ``slots`` and ``derivs`` are words over ``"H"``/``"V"``. Torsion T_{abc}
    has its output index first; the derivative word is a multiset, written
    with horizontal letters first.
    """

    kind: TermKind
    slots: str = ""
    derivs: str = ""

    def __post_init__(self) -> None:
        problems = self.violations()
        if problems:
            raise InvariantViolation(f"malformed {self.kind.name} term: " + "; ".join(problems))

    def violations(self) -> list[str]:
        found: list[str] = []
        if any(c not in ORDER for c in self.slots + self.derivs):
            return ["index kinds must be 'H' or 'V'"]
        if len(self.slots) != ARITY[self.kind]:
            return [f"expected {ARITY[self.kind]} indices, got {len(self.slots)}"]
        if self.derivs and self.kind not in (TermKind.TORSION, TermKind.CURVATURE):
            found.append("only torsion and curvature carry derivatives")
        if self.kind == TermKind.METRIC and self.slots[0] != self.slots[1]:
            found.append("the metric pairs indices of one kind")
        if self.kind == TermKind.ACS and self.slots != "VHH":
            found.append("an almost complex structure is indexed I_{iαβ}")
        if self.kind == TermKind.EPSILON and self.slots != "VVV":
            found.append("ε carries three vertical indices")
        if self.kind == TermKind.CURVATURE and self.slots[2] != self.slots[3]:
            found.append("the last two curvature indices must share a kind")
        return found

    @property
    def horizontal_count(self) -> int:
        return (self.slots + self.derivs).count("H")

    @property
    def vertical_count(self) -> int:
        return (self.slots + self.derivs).count("V")

    @property
    def name(self) -> str:
        """Conventional index notation, e.g. ``T_{αiβ,γ}``."""
        if self.kind == TermKind.CONSTANT:
            return "c"
        greek = iter("αβγδρσμν")
        latin = iter("ijkl")
        letters = [next(greek) if c == "H" else next(latin) for c in self.slots + self.derivs]
        head = "".join(letters[: len(self.slots)])
        tail = "".join(letters[len(self.slots) :])
        return f"{self.kind.value}_{{{head}{',' + tail if tail else ''}}}"


def weight(term: TermDescriptor) -> int:
    """Weight of a single factor.

    w(T_{abc,D}) = o(bcD) − o(a) and w(R_{abcd,E}) = o(abcE) − o(d); metric,
    ACS, ε and constants weigh 0.
    """
    if term.kind == TermKind.TORSION:
        return _order(term.slots[1:] + term.derivs) - _order(term.slots[0])
    if term.kind == TermKind.CURVATURE:
        return _order(term.slots[:3] + term.derivs) - _order(term.slots[3])
    return 0


def product_weight(terms: Iterable[TermDescriptor]) -> int:
    return sum(weight(t) for t in terms)


def has_parity_obstruction(terms: list[TermDescriptor]) -> bool:
    """True when the factors carry an odd number of horizontal indices.

    Horizontal indices are only ever contracted in pairs (by g or by some
    I_i), so such a product admits no complete contraction.
    """
    return sum(t.horizontal_count for t in terms) % 2 == 1


WEIGHT_ZERO = (
    TermDescriptor(TermKind.METRIC, "HH"),
    TermDescriptor(TermKind.METRIC, "VV"),
    TermDescriptor(TermKind.ACS, "VHH"),
    TermDescriptor(TermKind.EPSILON, "VVV"),
)

IDENTICALLY_ZERO = (
    TermDescriptor(TermKind.TORSION, "HHH"),
    TermDescriptor(TermKind.TORSION, "VVH"),
)

# T_{ijk} = λε_{ijk} is tabulated without derivatives: those are derivatives of S.
_UNDIFFERENTIATED = (TermDescriptor(TermKind.TORSION, "VVV"),)

# T_{iαβ} = −2I_{iαβ} and R_{abij} follow from R_{abαβ}, so neither is listed.
_DIFFERENTIATED = (
    (TermKind.TORSION, "HVH"),
    (TermKind.TORSION, "HVV"),
    (TermKind.CURVATURE, "HHHH"),
    (TermKind.CURVATURE, "HVHH"),
    (TermKind.CURVATURE, "VVHH"),
)


def _derivative_words(budget: int) -> list[str]:
    words = []
    for total in range(budget + 1):
        for vertical in range(total // 2 + 1):
            words.append("H" * (total - 2 * vertical) + "V" * vertical)
    return words


def enumerate_table(max_weight: int = 4) -> dict[int, list[TermDescriptor]]:
    """Curvature and torsion terms by weight, up to ``max_weight``.

    Column 1 holds the terms that are identically zero (T_{αβγ}, T_{ijα}).

    Raises:
        ConfigError: ``max_weight`` outside 0..4.
    """
    if not 0 <= max_weight <= 4:
        raise ConfigError(f"weights are tabulated up to 4, got {max_weight}")
    columns: dict[int, list[TermDescriptor]] = {w: [] for w in range(max_weight + 1)}
    columns[0].extend(WEIGHT_ZERO)
    if max_weight >= 1:
        columns[1].extend(IDENTICALLY_ZERO)
    for term in _UNDIFFERENTIATED:
        if weight(term) <= max_weight:
            columns[weight(term)].append(term)
    for kind, slots in _DIFFERENTIATED:
        base = weight(TermDescriptor(kind, slots))
        if base > max_weight:
            continue
        for word in _derivative_words(max_weight - base):
            term = TermDescriptor(kind, slots, word)
            columns[weight(term)].append(term)
    return columns


# --- contraction patterns of R ⊗ R -------------------------------------------


def _relabel(tags: tuple[int, ...]) -> tuple[int, ...]:
    mapping: dict[int, int] = {}
    out = []
    for t in tags:
        if t and t not in mapping:
            mapping[t] = len(mapping) + 1
        out.append(mapping.get(t, 0))
    return tuple(out)


@lru_cache(maxsize=None)
def slot_symmetries() -> tuple[tuple[tuple[int, ...], int], ...]:
    """The eight signed slot permutations of an algebraic curvature tensor.

    Each entry ``(σ, sign)`` sends slot j to ``σ[j]``; generated by the two
    pair antisymmetries and the pair exchange.
    """
    generators = (((1, 0, 2, 3), -1), ((0, 1, 3, 2), -1), ((2, 3, 0, 1), 1))
    group = {(0, 1, 2, 3): 1}
    frontier = [(0, 1, 2, 3)]
    while frontier:
        current = frontier.pop()
        for gen, sign in generators:
            composed = tuple(gen[current[k]] for k in range(4))
            if composed not in group:
                group[composed] = group[current] * sign
                frontier.append(composed)
    return tuple(sorted(group.items()))


@dataclass(frozen=True)
class ContractionPattern:
    """A complete contraction of R_{a0a1a2a3} with R_{b0b1b2b3}.

    Slot k of the first factor is paired with slot ``perm[k]`` of the second:
    through the metric when ``tags[k] == 0``, through I^v_{a_k b_perm[k]}
    otherwise. Equal nonzero tags share their vertical index; three distinct
    tags 1, 2, 3 are contracted with ε in that order.
    """

    perm: tuple[int, ...]
    tags: tuple[int, ...]
    name: Optional[str] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if sorted(self.perm) != [0, 1, 2, 3] or len(self.tags) != 4:
            raise InvariantViolation(f"pattern must pair four slots, got {self.perm}/{self.tags}")
        labels = [t for t in self.tags if t]
        if any(t < 0 for t in self.tags):
            raise InvariantViolation("tags must be non-negative")
        counts = sorted(labels.count(t) for t in set(labels))
        if len(labels) == 1:
            raise InvariantViolation("one almost complex structure leaves a free vertical index")
        if len(labels) == 3 and counts != [1, 1, 1]:
            raise InvariantViolation("three almost complex structures need distinct ε labels")
        if len(labels) in (2, 4) and any(c != 2 for c in counts):
            raise InvariantViolation("vertical indices must be contracted in pairs")

    @property
    def num_acs(self) -> int:
        return sum(1 for t in self.tags if t)

    @property
    def vertical(self) -> str:
        """``"metric"``, ``"delta"`` or ``"epsilon"``."""
        if self.num_acs == 0:
            return "metric"
        return "epsilon" if self.num_acs == 3 else "delta"

    @property
    def key(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Canonical representative under the second factor's symmetries."""
        tags = _relabel(self.tags)
        return min(
            (tuple(sigma[self.perm[k]] for k in range(4)), tags) for sigma, _ in slot_symmetries()
        )

    def factors(self) -> list[TermDescriptor]:
        curvature = TermDescriptor(TermKind.CURVATURE, "HHHH")
        out = [curvature, curvature]
        out += [TermDescriptor(TermKind.METRIC, "HH")] * (4 - self.num_acs)
        out += [TermDescriptor(TermKind.ACS, "VHH")] * self.num_acs
        if self.vertical == "epsilon":
            out.append(TermDescriptor(TermKind.EPSILON, "VVV"))
        elif self.vertical == "delta":
            out += [TermDescriptor(TermKind.METRIC, "VV")] * (self.num_acs // 2)
        return out

    def weight(self) -> int:
        return product_weight(self.factors())

    def describe(self) -> str:
        first = "abcd"
        second = [""] * 4
        extra = iter("efgh")
        acs_parts = []
        for k in range(4):
            if self.tags[k]:
                letter = next(extra)
                acs_parts.append(f"I{self.tags[k]}_{first[k]}{letter}")
                second[self.perm[k]] = letter
            else:
                second[self.perm[k]] = first[k]
        text = f"R_{first} R_{''.join(second)}"
        if acs_parts:
            text += " " + " ".join(acs_parts)
        if self.vertical == "epsilon":
            text += " eps_123"
        return text

    @property
    def label(self) -> str:
        return self.name or self.describe()


NAMED_PATTERNS = (
    ContractionPattern((0, 1, 2, 3), (0, 0, 0, 0), "metric.abcd"),
    ContractionPattern((0, 2, 1, 3), (0, 0, 0, 0), "metric.acbd"),
    ContractionPattern((0, 2, 3, 1), (0, 0, 0, 0), "metric.adbc"),
    ContractionPattern((0, 1, 2, 3), (0, 0, 1, 1), "acs2.1"),
    ContractionPattern((0, 2, 1, 3), (0, 0, 1, 1), "acs2.2"),
    ContractionPattern((0, 2, 3, 1), (0, 0, 1, 1), "acs2.2-swapped"),
    ContractionPattern((0, 1, 2, 3), (0, 1, 0, 1), "acs2.3"),
    ContractionPattern((0, 3, 2, 1), (0, 1, 0, 1), "acs2.4"),
    ContractionPattern((0, 1, 2, 3), (0, 1, 2, 3), "acs3.1"),
    ContractionPattern((0, 2, 3, 1), (0, 1, 2, 3), "acs3.2"),
    ContractionPattern((0, 3, 1, 2), (0, 1, 2, 3), "acs3.3"),
    ContractionPattern((0, 1, 2, 3), (1, 1, 2, 2), "acs4.1"),
    ContractionPattern((0, 2, 1, 3), (1, 1, 2, 2), "acs4.2"),
    ContractionPattern((0, 2, 3, 1), (1, 1, 2, 2), "acs4.3"),
    ContractionPattern((0, 1, 2, 3), (1, 2, 1, 2), "acs4.4"),
    ContractionPattern((0, 3, 2, 1), (1, 2, 1, 2), "acs4.5"),
)

# Multiples of ‖W‖² fixed by the Bianchi identity and by I-commutation.
EXPECTED_CONSTANTS = {
    "metric.abcd": Fraction(1),
    "metric.acbd": Fraction(1, 2),
    "metric.adbc": Fraction(-1, 2),
    "acs2.1": Fraction(3),
    "acs2.3": Fraction(0),
    "acs3.1": Fraction(0),
}

# Patterns equal to a signed copy of another one.
RELATED_CONSTANTS = {"acs2.2-swapped": ("acs2.2", -1)}


def _tag_choices(num_acs: int) -> list[tuple[int, ...]]:
    return {
        0: [()],
        2: [(1, 1)],
        3: [(1, 2, 3)],
        4: [(1, 1, 2, 2), (1, 2, 1, 2), (1, 2, 2, 1)],
    }.get(num_acs, [])


def _raw_patterns(num_acs: int) -> Iterator[ContractionPattern]:
    for perm in itertools.permutations(range(4)):
        for chosen in itertools.combinations(range(4), num_acs):
            for labels in _tag_choices(num_acs):
                tags = [0, 0, 0, 0]
                for slot, label in zip(chosen, labels):
                    tags[slot] = label
                yield ContractionPattern(perm, tuple(tags))


def count_contractions(num_acs: int = 0) -> int:
    """Number of raw pairings before any symmetry is used."""
    return sum(1 for _ in _raw_patterns(num_acs))


def enumerate_contractions(
    weight: int = 4, num_acs: Optional[int] = None
) -> list[ContractionPattern]:
    """Canonical complete contractions of R ⊗ R, named where a name is known.

    Raises:
        ConfigError: ``weight`` other than 4.
    """
    if weight != 4:
        raise ConfigError(f"R ⊗ R contractions have weight 4, got {weight}")
    counts = (0, 2, 3, 4) if num_acs is None else (num_acs,)
    names = {p.key: p.name for p in NAMED_PATTERNS}
    seen: dict[tuple[tuple[int, ...], tuple[int, ...]], ContractionPattern] = {}
    for k in counts:
        for raw in _raw_patterns(k):
            key = raw.key
            if key not in seen:
                seen[key] = ContractionPattern(key[0], key[1], names.get(key))
    patterns = sorted(seen.values(), key=lambda p: (p.num_acs, p.key))
    logger.debug("enumerated %d contraction patterns for acs counts %s", len(patterns), counts)
    return patterns


def evaluate_pattern(pattern: ContractionPattern, r: np.ndarray, acs: AcsTriple) -> Any:
    """Value of the contraction on a curvature tensor ``r[a, b, c, d]``."""
    eps = epsilon(acs.scalar)
    second = np.transpose(r, pattern.perm)
    acs_slots = [k for k in range(4) if pattern.tags[k]]
    labels = sorted({t for t in pattern.tags if t})
    total: Any = coefficient(0, 1, acs.scalar)
    for values in itertools.product(range(3), repeat=len(labels)):
        factor: Any = 1
        if pattern.vertical == "epsilon":
            factor = eps[values]
            if factor == 0:
                continue
        chosen = dict(zip(labels, values))
        y = second
        for k in acs_slots:
            y = np.moveaxis(np.tensordot(acs[chosen[pattern.tags[k]]], y, axes=([1], [k])), 0, k)
        total = total + factor * np.sum(r * y)
    return total


# --- normalized curvature generator ------------------------------------------


def _sympy_rational(value: Any) -> sympy.Rational:
    frac = to_fraction(value)
    return sympy.Rational(frac.numerator, frac.denominator)


@lru_cache(maxsize=None)
def sp_basis(n: int) -> tuple[np.ndarray, ...]:
    """Exact basis of 𝔰𝔭(n): skew matrices commuting with every I_i."""
    acs = standard_acs(Dim(n))
    h = 4 * n
    quarter = Fraction(1, 4)
    candidates = []
    for p, q in itertools.combinations(range(h), 2):
        x = zeros((h, h), ScalarKind.RATIONAL)
        x[p, q] = Fraction(1)
        x[q, p] = Fraction(-1)
        conj = sum((acs[i] @ x @ acs[i] for i in range(3)), zeros((h, h), ScalarKind.RATIONAL))
        candidates.append((x - conj) * quarter)
    columns = sympy.Matrix([[_sympy_rational(v) for v in c.flat] for c in candidates]).T
    _, pivots = columns.rref()
    return tuple(candidates[k] for k in pivots)


def _cyclic(t: np.ndarray) -> np.ndarray:
    """t_{abcd} + t_{bcad} + t_{cabd} on the leading three axes."""
    rest = tuple(range(3, t.ndim))
    return t + np.transpose(t, (1, 2, 0) + rest) + np.transpose(t, (2, 0, 1) + rest)


@lru_cache(maxsize=None)
def normalized_curvature_basis(n: int) -> tuple[np.ndarray, ...]:
    """Exact basis of 𝔰𝔭(n)-valued algebraic curvature tensors.

    Elements are pair-symmetric combinations of E_p ⊗ E_q over a basis of
    𝔰𝔭(n), cut down by the algebraic Bianchi identity.
    """
    sp = sp_basis(n)
    h = 4 * n
    generators = []
    for p in range(len(sp)):
        for q in range(p, len(sp)):
            t = np.multiply.outer(sp[p], sp[q])
            if p != q:
                t = t + np.multiply.outer(sp[q], sp[p])
            generators.append(t)
    cyclic = [_cyclic(g) for g in generators]
    rows = []
    for a, b, c in itertools.combinations(range(h), 3):
        for d in range(h):
            row = [cyc[a, b, c, d] for cyc in cyclic]
            if any(v != 0 for v in row):
                rows.append([_sympy_rational(v) for v in row])
    system = DomainMatrix.from_Matrix(sympy.Matrix(rows)).convert_to(QQ)
    null = system.nullspace().to_Matrix()
    basis = []
    for k in range(null.rows):
        t = zeros((h, h, h, h), ScalarKind.RATIONAL)
        for g, coeff in enumerate(null.row(k)):
            if coeff != 0:
                t = t + generators[g] * to_fraction(coeff)
        basis.append(t)
    logger.debug("normalized curvature space for n=%d has dimension %d", n, len(basis))
    return tuple(basis)


def curvature_symmetrize(t: np.ndarray) -> np.ndarray:
    """Average of a rank-4 tensor over the signed pair symmetries."""
    kind = ScalarKind.RATIONAL if t.dtype == object else ScalarKind.F64
    rest = tuple(range(4, t.ndim))
    total = zeros(t.shape, kind)
    for sigma, sign in slot_symmetries():
        total = total + np.transpose(t, sigma + rest) * sign
    return total * coefficient(1, 8, kind)


@dataclass(frozen=True, eq=False)
class CurvatureProjector:
    """Orthogonal projection onto the normalized curvature space."""

    dim: Dim
    basis: np.ndarray
    gram_inverse: np.ndarray
    scalar: ScalarKind

    @property
    def rank(self) -> int:
        return int(self.basis.shape[1])

    def __call__(self, t: np.ndarray) -> np.ndarray:
        h = self.dim.h
        flat = convert(t, self.scalar).reshape(h**4)
        coeffs = self.gram_inverse @ (self.basis.T @ flat)
        return np.asarray(self.basis @ coeffs).reshape((h, h, h, h))


@lru_cache(maxsize=None)
def _projector(n: int, scalar: ScalarKind) -> CurvatureProjector:
    dim = Dim(n)
    exact = np.stack([b.reshape(dim.h**4) for b in normalized_curvature_basis(n)], axis=1)
    gram = sympy.Matrix([[_sympy_rational(v) for v in row] for row in exact.T @ exact]).inv()
    inverse = np.array(
        [[to_fraction(gram[i, j]) for j in range(gram.cols)] for i in range(gram.rows)],
        dtype=object,
    )
    return CurvatureProjector(dim, convert(exact, scalar), convert(inverse, scalar), scalar)


def curvature_projector(
    dim: Dim, scalar: ScalarKind = ScalarKind.RATIONAL
) -> CurvatureProjector:
    return _projector(dim.n, scalar)


def curvature_violations(r: np.ndarray, acs: AcsTriple, tol: float = 0.0) -> list[str]:
    """Names of the normalized-curvature constraints ``r`` breaks."""
    found = []
    if not is_zero(r + np.transpose(r, (1, 0, 2, 3)), tol):
        found.append("first pair not antisymmetric")
    if not is_zero(r + np.transpose(r, (0, 1, 3, 2)), tol):
        found.append("second pair not antisymmetric")
    if not is_zero(r - np.transpose(r, (2, 3, 0, 1)), tol):
        found.append("pairs not symmetric")
    if not is_zero(_cyclic(r), tol):
        found.append("algebraic Bianchi identity fails")
    for i in range(3):
        m = acs[i]
        right = np.tensordot(r, m, axes=([3], [0]))
        left = np.moveaxis(np.tensordot(m, r, axes=([1], [2])), 0, 2)
        if not is_zero(right - left, tol):
            found.append(f"second pair does not commute with I{i + 1}")
        first = np.transpose(r, (2, 3, 0, 1))
        right = np.tensordot(first, m, axes=([3], [0]))
        left = np.moveaxis(np.tensordot(m, first, axes=([1], [2])), 0, 2)
        if not is_zero(right - left, tol):
            found.append(f"first pair does not commute with I{i + 1}")
    return found


def random_normalized_curvature(
    dim: Dim, rng: np.random.Generator, scalar: ScalarKind = ScalarKind.RATIONAL
) -> np.ndarray:
    """Project a random rank-4 tensor onto the normalized curvature space.

    Float samples are scaled to unit norm.

    Raises:
        InvariantViolation: the projection left the constraint set.
    """
    h = dim.h
    raw = curvature_symmetrize(random_array(rng, (h, h, h, h), scalar))
    r = curvature_projector(dim, scalar)(raw)
    tol = 0.0
    if scalar == ScalarKind.F64:
        norm = float(np.sqrt(np.sum(r * r)))
        if norm > 0:
            r = r / norm
        tol = 1e-12
    problems = curvature_violations(r, standard_acs(dim, scalar), tol)
    if problems:
        raise InvariantViolation("curvature generator: " + "; ".join(problems))
    return r


def w_norm_squared(r: np.ndarray, dim: Dim, scalar: ScalarKind) -> Any:
    """‖W‖² of a state whose only nonzero datum is R_{αβγδ} = r."""
    state = replace(zero_state(dim, scalar, with_jets=False), R_hhhh=r)
    _, norm = conformal_curvature(state)
    return norm


# --- reductions -------------------------------------------------------------


@dataclass
class PatternResult:
    """Measured multiple of ‖W‖² for one pattern across trials."""

    pattern: ContractionPattern
    constants: list[Any]
    expected: Optional[Any] = None
    deviation: float = 0.0

    @property
    def constant(self) -> Any:
        return self.constants[0] if self.constants else None

    @property
    def target(self) -> str:
        reference = self.expected if self.expected is not None else self.constant
        return "0" if reference == 0 else "c*|W|^2"


@dataclass
class ReductionReport:
    """Outcome of :func:`verify_reductions`."""

    n: int
    scalar: ScalarKind
    tol: float
    trials: int
    results: list[PatternResult] = field(default_factory=list)
    degenerate_trials: int = 0

    @property
    def threshold(self) -> float:
        return 0.0 if self.scalar == ScalarKind.RATIONAL else self.tol

    @property
    def failures(self) -> list[PatternResult]:
        return [r for r in self.results if r.deviation > self.threshold]

    @property
    def passed(self) -> bool:
        return not self.failures


def trial_rngs(seed: int, trials: int) -> list[np.random.Generator]:
    """Independent per-trial generators derived from one seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]


def verify_reductions(
    dim: Dim,
    trials: int = 5,
    tol: float = 1e-12,
    scalar: ScalarKind = ScalarKind.RATIONAL,
    seed: int = 0,
) -> ReductionReport:
    """Check every weight-4 contraction of R ⊗ R against ‖W‖².

    Named patterns are compared with their known multiples; every pattern must
    give the same multiple on each sample.

    Raises:
        ConfigError: ``trials < 1``.
        InvariantViolation: the generator failed or every sample vanished.
    """
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    acs = standard_acs(dim, scalar)
    report = ReductionReport(dim.n, scalar, tol, trials)
    samples = []
    for rng in trial_rngs(seed, trials):
        r = random_normalized_curvature(dim, rng, scalar)
        norm = w_norm_squared(r, dim, scalar)
        if abs(float(norm)) <= (0.0 if scalar == ScalarKind.RATIONAL else tol):
            report.degenerate_trials += 1
            continue
        samples.append((r, norm))
    if not samples:
        raise InvariantViolation("every sampled curvature tensor vanished")

    named_keys = {p.key for p in NAMED_PATTERNS}
    patterns = list(NAMED_PATTERNS) + [
        p for p in enumerate_contractions() if p.key not in named_keys
    ]
    by_name: dict[str, PatternResult] = {}
    for pattern in patterns:
        constants = [evaluate_pattern(pattern, r, acs) / norm for r, norm in samples]
        expected: Optional[Any] = None
        if pattern.name in EXPECTED_CONSTANTS:
            expected = EXPECTED_CONSTANTS[pattern.name]
            if scalar == ScalarKind.F64:
                expected = float(expected)
        elif pattern.name in RELATED_CONSTANTS:
            source, sign = RELATED_CONSTANTS[pattern.name]
            expected = by_name[source].constant * sign
        reference = expected if expected is not None else constants[0]
        deviation = max(abs(float(c - reference)) for c in constants)
        result = PatternResult(pattern, constants, expected, deviation)
        report.results.append(result)
        if pattern.name:
            by_name[pattern.name] = result
        logger.debug("%s: constant %s, deviation %.3g", pattern.label, constants[0], deviation)
    logger.info(
        "reductions n=%d: %d patterns, %d failures",
        dim.n,
        len(report.results),
        len(report.failures),
    )
    return report


# --- second covariant derivatives of curvature -------------------------------

_DERIVATIVE_SLOTS = "abcdrs"

# Index pairs carried by I^i, I^j, I^k in the four ε-contractions of R_{abcd,rs}.
ABCD_CONTRACTIONS = {
    "A": (("a", "b"), ("s", "d"), ("r", "c")),
    "B": (("d", "b"), ("s", "a"), ("r", "c")),
    "C": (("b", "c"), ("s", "d"), ("r", "a")),
    "D": (("c", "d"), ("s", "b"), ("r", "a")),
}

ABCD_RELATIONS = {
    "A+2C": {"A": 1, "C": 2},
    "B-C-D": {"B": 1, "C": -1, "D": -1},
    "A-2C": {"A": 1, "C": -2},
    "2B": {"B": 2},
}


def _abcd_weights(acs: AcsTriple) -> dict[str, np.ndarray]:
    h = acs.dim.h
    eps = epsilon(acs.scalar)
    out = {}
    for name, pairs in ABCD_CONTRACTIONS.items():
        positions = [slot for pair in pairs for slot in pair]
        order = tuple(positions.index(s) for s in _DERIVATIVE_SLOTS)
        total = zeros((h,) * 6, acs.scalar)
        for i, j, k in itertools.permutations(range(3)):
            outer = np.multiply.outer(np.multiply.outer(acs[i], acs[j]), acs[k])
            total = total + np.transpose(outer, order) * eps[i, j, k]
        out[name] = total
    return out


def abcd_values(r: np.ndarray, acs: AcsTriple) -> dict[str, Any]:
    """A, B, C, D for a tensor ``r[a, b, c, d, r, s]`` = R_{abcd,rs}."""
    return {name: np.sum(r * w) for name, w in _abcd_weights(acs).items()}


def relation_values(values: dict[str, Any]) -> dict[str, Any]:
    return {
        name: sum(coeff * values[part] for part, coeff in combo.items())
        for name, combo in ABCD_RELATIONS.items()
    }


@dataclass(frozen=True)
class _ExactSystem:
    dimension: int
    rank: int
    basis: tuple[dict[int, Fraction], ...]
    functionals: dict[str, dict[int, Fraction]]


def _check_rank(rank: int, expected: int, size: int) -> None:
    """Compare the exact rank with a float rank of the same rows.

    Raises:
        SingularSystemError: the exact elimination lost rank, or nothing survives.
    """
    if rank < expected:
        raise SingularSystemError(
            f"Bianchi system rank {rank} below the float rank {expected}; "
            "the exact null space is too large"
        )
    if rank >= size:
        raise SingularSystemError(f"Bianchi system has full rank {rank}; no tensors survive")


@lru_cache(maxsize=None)
def _second_derivative_system(n: int) -> _ExactSystem:
    """Null space of the homogeneous Bianchi system on R_{[ab][cd],rs}."""
    h = 4 * n
    pairs = list(itertools.combinations(range(h), 2))
    pair_index = {p: k for k, p in enumerate(pairs)}
    size = len(pairs) ** 2 * h * h

    def param(a: int, b: int, c: int, d: int, r: int, s: int) -> Optional[tuple[int, int]]:
        if a == b or c == d:
            return None
        sign = 1
        if a > b:
            a, b, sign = b, a, -sign
        if c > d:
            c, d, sign = d, c, -sign
        k = (pair_index[(a, b)] * len(pairs) + pair_index[(c, d)]) * h * h + r * h + s
        return k, sign

    rows: list[dict[int, int]] = []

    def add_row(entries: list[Optional[tuple[int, int]]]) -> None:
        row: dict[int, int] = {}
        for entry in entries:
            if entry is not None:
                row[entry[0]] = row.get(entry[0], 0) + entry[1]
        row = {k: v for k, v in row.items() if v}
        if row:
            rows.append(row)

    for a, b, c in itertools.combinations(range(h), 3):
        for d, r, s in itertools.product(range(h), repeat=3):
            add_row([param(a, b, c, d, r, s), param(b, c, a, d, r, s), param(c, a, b, d, r, s)])
    for a, b, r in itertools.combinations(range(h), 3):
        for (c, d), s in itertools.product(pairs, range(h)):
            add_row([param(a, b, c, d, r, s), param(b, r, c, d, a, s), param(r, a, c, d, b, s)])

    system = DomainMatrix(
        {i: {k: ZZ(v) for k, v in row.items()} for i, row in enumerate(rows)},
        (len(rows), size),
        ZZ,
    )
    null = system.to_field().nullspace().to_Matrix()
    dense = np.zeros((len(rows), size))
    for i, row in enumerate(rows):
        for k, v in row.items():
            dense[i, k] = v
    _check_rank(size - null.rows, int(np.linalg.matrix_rank(dense)), size)
    basis = tuple(
        {k: to_fraction(null[i, k]) for k in range(size) if null[i, k] != 0}
        for i in range(null.rows)
    )

    acs = standard_acs(Dim(n))
    functionals: dict[str, dict[int, Fraction]] = {}
    for name, w in _abcd_weights(acs).items():
        coeffs: dict[int, Fraction] = {}
        for idx in zip(*np.nonzero(w != 0)):
            entry = param(*(int(i) for i in idx))
            if entry is not None:
                coeffs[entry[0]] = coeffs.get(entry[0], Fraction(0)) + entry[1] * w[idx]
        functionals[name] = coeffs
    logger.debug("second-derivative system n=%d: %d rows, null dim %d", n, len(rows), len(basis))
    return _ExactSystem(len(basis), size - len(basis), basis, functionals)


@dataclass
class SecondDerivativeReport:
    """Outcome of :func:`verify_second_derivative_system`."""

    n: int
    exact: bool
    samples: int
    subspace_dim: Optional[int] = None
    constraint_rank: Optional[int] = None
    maxima: dict[str, float] = field(default_factory=dict)
    tol: float = 0.0

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.maxima.values())


def _record(maxima: dict[str, float], values: dict[str, Any]) -> None:
    for name, value in {**values, **relation_values(values)}.items():
        maxima[name] = max(maxima.get(name, 0.0), abs(float(value)))


def verify_second_derivative_system(
    dim: Dim, trials: int = 5, seed: int = 0
) -> SecondDerivativeReport:
    """Evaluate A, B, C, D on second derivatives constrained by Bianchi.

    The constrained space is built exactly and every basis vector plus
    ``trials`` random integer combinations are evaluated over the
    rationals. Only n = 1 is supported: the n = 2 system has about 50000
    unknowns, out of reach for exact elimination.

    Raises:
        ConfigError: ``trials < 1`` or ``n != 1``.
        SingularSystemError: the exact system lost rank.
    """
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    if dim.n != 1:
        raise ConfigError(f"the exact second-derivative system needs n = 1, got n = {dim.n}")
    system = _second_derivative_system(1)
    report = SecondDerivativeReport(
        1, True, 0, system.dimension, system.rank, {name: 0.0 for name in ABCD_RELATIONS}
    )
    vectors = list(system.basis)
    for rng in trial_rngs(seed, trials):
        weights = rng.integers(-5, 6, size=len(system.basis))
        combo: dict[int, Fraction] = {}
        for wgt, vec in zip(weights, system.basis):
            for k, v in vec.items():
                combo[k] = combo.get(k, Fraction(0)) + int(wgt) * v
        vectors.append(combo)
    for vec in vectors:
        values = {
            name: sum((vec.get(k, Fraction(0)) * c for k, c in f.items()), Fraction(0))
            for name, f in system.functionals.items()
        }
        _record(report.maxima, values)
        report.samples += 1
    logger.info(
        "second-derivative system: %d samples, max %s", report.samples, max(report.maxima.values())
    )
    return report
