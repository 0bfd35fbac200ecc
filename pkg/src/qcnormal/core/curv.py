"""Pointwise curvature and torsion calculus of a QC structure.

Primitive data (τ, μ, S, T^α_{ij}, R_{αβγδ} and derivative jets) live in a
:class:`PointState`; everything else is derived from it. Matrices use the
endomorphism convention of :mod:`qcnormal.core.qalg`, so ``τ I_i`` is the
matrix product ``tau @ M_i``.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Optional

import numpy as np
from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from qcnormal.core.errors import InvariantViolation, MissingJetError
from qcnormal.core.models import Dim, ScalarKind
from qcnormal.core.qalg import AcsTriple, casimir, coefficient, epsilon, pair_outer, standard_acs
from qcnormal.core.scalars import identity, is_zero, random_array, to_fraction, zeros

logger = logging.getLogger(__name__)

JET_SHAPES = {
    "T_vv_h": "h,3,3,h",
    "tau_v": "h,h,3",
    "mu_v": "h,h,3",
    "S_h": "h",
    "S_v": "3",
    "tau_div": "h",
    "mu_div": "h",
    "vh_ricci_trace": "h",
}


@dataclass(frozen=True, eq=False)
class PointState:
    """Curvature and torsion data of a pseudohermitian structure at one point.

    ``T_vv[α, i, j]`` is T^α_{ij}; ``R_hhhh[α, β, γ, δ]`` is R_{αβγδ}.
    ``jets`` holds the optional derivative data keyed as in ``JET_SHAPES``,
    e.g. ``jets["T_vv_h"][β, k, l, α] = T_{βkl,α}``.
    """

    dim: Dim
    tau: np.ndarray
    mu: np.ndarray
    S: Any
    T_vv: Optional[np.ndarray] = None
    R_hhhh: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None
    jets: dict[str, np.ndarray] = field(default_factory=dict)
    scalar: ScalarKind = ScalarKind.RATIONAL

    @property
    def lam(self) -> Any:
        """λ with S = −8n(n+2)λ."""
        n = self.dim.n
        return -self.S * coefficient(1, 8 * n * (n + 2), self.scalar)

    @property
    def T_vvv(self) -> np.ndarray:
        """T^k_{ij} = λ ε_{ijk}."""
        return epsilon(self.scalar) * self.lam

    def torsion_vv(self) -> np.ndarray:
        if self.T_vv is None:
            return zeros((self.dim.h, 3, 3), self.scalar)
        return self.T_vv

    def jet(self, name: str) -> np.ndarray:
        if name not in self.jets:
            raise MissingJetError(f"jet {name!r} is required but was not supplied")
        return self.jets[name]


def _tol(state: PointState) -> float:
    return 0.0 if state.scalar == ScalarKind.RATIONAL else 1e-10


def validate(state: PointState, acs: Optional[AcsTriple] = None) -> None:
    """Check the declared invariants of a state.

    Raises:
        InvariantViolation: the first invariant found broken.
    """
    acs = acs or standard_acs(state.dim, state.scalar)
    cas = casimir(acs)
    tol = _tol(state)
    h = state.dim.h
    for name, t, which in (("tau", state.tau, -1), ("mu", state.mu, 3)):
        if t.shape != (h, h):
            raise InvariantViolation(f"{name} must be {h}x{h}, got {t.shape}")
        if not is_zero(t - t.T, tol):
            raise InvariantViolation(f"{name} is not symmetric")
        if not is_zero(np.array([np.trace(t)]), tol):
            raise InvariantViolation(f"{name} is not trace-free")
        if not is_zero(cas.project(t, which) - t, tol):
            raise InvariantViolation(f"{name} is not in the {which}-eigenspace of the Casimir")
    for i in range(3):
        if not is_zero(state.mu @ acs[i] - acs[i] @ state.mu, tol):
            raise InvariantViolation(f"mu does not commute with I{i + 1}")
    if state.T_vv is not None and not is_zero(state.T_vv + state.T_vv.transpose(0, 2, 1), tol):
        raise InvariantViolation("T_vv is not antisymmetric in its vertical indices")
    if state.R_hhhh is not None:
        r = state.R_hhhh
        if not is_zero(r + r.transpose(1, 0, 2, 3), tol) or not is_zero(
            r + r.transpose(0, 1, 3, 2), tol
        ):
            raise InvariantViolation("R_hhhh is not antisymmetric in each index pair")


def torsion_endomorphism(state: PointState, acs: Optional[AcsTriple] = None) -> np.ndarray:
    """T^α_{iβ} = ¼(τ I_i + I_i τ) + I_i μ as a (3, h, h) array."""
    acs = acs or standard_acs(state.dim, state.scalar)
    quarter = coefficient(1, 4, state.scalar)
    out = zeros((3, state.dim.h, state.dim.h), state.scalar)
    for i in range(3):
        m = acs[i]
        out[i] = (state.tau @ m + m @ state.tau) * quarter + m @ state.mu
    return out


def ricci(state: PointState) -> np.ndarray:
    """Ric = (2n+2)τ + 2(2n+5)μ + S/(4n) g."""
    n = state.dim.n
    g = identity(state.dim.h, state.scalar)
    return state.tau * (2 * n + 2) + state.mu * (2 * (2 * n + 5)) + g * (
        state.S * coefficient(1, 4 * n, state.scalar)
    )


def ricci_contraction(r: np.ndarray) -> np.ndarray:
    """Ric_{βγ} = Σ_α R_{αβγα}."""
    return np.asarray(np.trace(r, axis1=0, axis2=3))


@dataclass
class RicciResult:
    """Ricci tensor with its optional cross-check against R_hhhh."""

    ric: np.ndarray
    scalar_check: Any
    contraction: Optional[np.ndarray] = None
    residual: float = 0.0

    @property
    def consistent(self) -> bool:
        return self.residual <= 1e-9


def ricci_and_scalar(state: PointState) -> RicciResult:
    """Ricci tensor, its trace, and the contraction of R_hhhh when supplied."""
    ric = ricci(state)
    result = RicciResult(ric, sum(ric[a, a] for a in range(state.dim.h)))
    if state.R_hhhh is not None:
        contracted = ricci_contraction(state.R_hhhh)
        result.contraction = contracted
        result.residual = max(abs(float(x)) for x in (contracted - ric).flat)
        if not result.consistent:
            logger.info("R_hhhh is inconsistent with (tau, mu, S): residual %.3e", result.residual)
    return result


def L_tensor(state: PointState) -> np.ndarray:
    """L = ½τ + μ + S/(32n(n+2)) g."""
    n = state.dim.n
    g = identity(state.dim.h, state.scalar)
    return (
        state.tau * coefficient(1, 2, state.scalar)
        + state.mu
        + g * (state.S * coefficient(1, 32 * n * (n + 2), state.scalar))
    )


def _swap(t: np.ndarray) -> np.ndarray:
    return t.transpose(0, 1, 3, 2)


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.multiply.outer(a, b)


def curvature_terms(L: np.ndarray, acs: AcsTriple) -> np.ndarray:
    """The L-dependent part of W − R, so that W = R + curvature_terms(L)."""
    kind = acs.scalar
    h = acs.dim.h
    n = acs.dim.n
    g = identity(h, kind)
    half = coefficient(1, 2, kind)
    eps = epsilon(kind)
    out = pair_outer(g, L) - _swap(pair_outer(g, L)) + pair_outer(L, g) - _swap(pair_outer(L, g))
    trace_l = sum(L[a, a] for a in range(h))
    for i in range(3):
        m = acs[i]
        lm, ml = L @ m, m @ L
        out = out + pair_outer(m, lm) - _swap(pair_outer(m, lm))
        out = out + pair_outer(lm, m) - _swap(pair_outer(lm, m))
        out = out + _outer(m, lm + ml) * half
        out = out + _outer(lm, m) + _outer(ml, m)
        out = out + _outer(m, m) * (trace_l * coefficient(1, 2 * n, kind))
        for j in range(3):
            for k in range(3):
                if eps[i, j, k] != 0:
                    out = out + _outer(m, acs[j].T @ L @ acs[k]) * (eps[i, j, k] * half)
    return out


def w_flat_curvature(state: PointState, acs: Optional[AcsTriple] = None) -> np.ndarray:
    """The horizontal curvature with vanishing conformal curvature W, built from L."""
    acs = acs or standard_acs(state.dim, state.scalar)
    return -curvature_terms(L_tensor(state), acs)


def conformal_curvature(
    state: PointState, L: Optional[np.ndarray] = None, acs: Optional[AcsTriple] = None
) -> tuple[np.ndarray, Any]:
    """W_{αβγδ} and ‖W‖² = W_{αβγδ}W^{αβγδ}.

    Raises:
        MissingJetError: the state carries no R_hhhh.
    """
    if state.R_hhhh is None:
        raise MissingJetError("conformal curvature needs R_hhhh")
    acs = acs or standard_acs(state.dim, state.scalar)
    L = L_tensor(state) if L is None else L
    w = state.R_hhhh + curvature_terms(L, acs)
    return w, sum(x * x for x in w.flat)


@dataclass
class RicciForms:
    """Closed-form ρ, ζ, σ and, when R_hhhh is known, their contractions."""

    rho: np.ndarray
    zeta: np.ndarray
    sigma: np.ndarray
    contracted: Optional[tuple[np.ndarray, np.ndarray, np.ndarray]] = None

    def traces(self, acs: AcsTriple) -> tuple[Any, Any, Any]:
        """Contractions ρ_{iαβ}I^{iαβ}, ζ_{iαβ}I^{iαβ}, σ_{iαβ}I^{iαβ}."""
        return tuple(  # type: ignore[return-value]
            sum(sum((form[i] * acs[i]).flat) for i in range(3))
            for form in (self.rho, self.zeta, self.sigma)
        )


def ricci_forms(state: PointState, acs: Optional[AcsTriple] = None) -> RicciForms:
    """ρ, ζ, σ from (τ, μ, S), plus the direct contractions of R_hhhh if present."""
    acs = acs or standard_acs(state.dim, state.scalar)
    n, kind = state.dim.n, state.scalar
    h = state.dim.h
    tau, mu, S = state.tau, state.mu, state.S
    s_rho = S * coefficient(1, 8 * n * (n + 2), kind)
    s_zeta = S * coefficient(1, 16 * n * (n + 2), kind)
    rho = zeros((3, h, h), kind)
    zeta = zeros((3, h, h), kind)
    sigma = zeros((3, h, h), kind)
    for i in range(3):
        m = acs[i]
        rho[i] = (tau @ m + m @ tau) * coefficient(1, 2, kind) + mu @ m * 2 - m * s_rho
        zeta[i] = (
            tau @ m * coefficient(-(2 * n + 1), 4 * n, kind)
            - m @ tau * coefficient(1, 4 * n, kind)
            + mu @ m * coefficient(2 * n + 1, 2 * n, kind)
            + m * s_zeta
        )
        sigma[i] = (tau @ m + m @ tau) * coefficient(n + 2, 2 * n, kind) - m * s_rho
    forms = RicciForms(rho, zeta, sigma)
    if state.R_hhhh is not None:
        forms.contracted = contract_ricci_forms(state.R_hhhh, acs)
    return forms


def contract_ricci_forms(
    r: np.ndarray, acs: AcsTriple
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """ρ, ζ, σ as (1/4n) contractions of R_hhhh against I_i.

    The structure is paired with R in a fixed slot order, ``R_{abαβ}M_i[α, β]``,
    ``R_{αabβ}M_i[α, β]`` and ``R_{αβab}M_i[α, β]``, the order under which
    the W = 0 curvature built from L reproduces the closed forms.
    """
    n, kind, h = acs.dim.n, acs.scalar, acs.dim.h
    scale = coefficient(1, 4 * n, kind)
    rho = zeros((3, h, h), kind)
    zeta = zeros((3, h, h), kind)
    sigma = zeros((3, h, h), kind)
    for i in range(3):
        m = acs[i]
        rho[i] = np.tensordot(r, m, axes=([2, 3], [0, 1])) * scale
        zeta[i] = np.tensordot(r, m, axes=([0, 3], [0, 1])) * scale
        sigma[i] = np.tensordot(r, m, axes=([0, 1], [0, 1])) * scale
    return rho, zeta, sigma


def mixed_curvature(state: PointState, acs: Optional[AcsTriple] = None) -> np.ndarray:
    """R_{klαβ} from the first Bianchi identity in a parallel frame, shape (3, 3, h, h).

    Requires the jet ``T_vv_h``; the jets ``mu_v`` and ``tau_v`` enter when
    present and are taken as zero otherwise.

    Raises:
        MissingJetError: ``T_vv_h`` is absent.
    """
    acs = acs or standard_acs(state.dim, state.scalar)
    kind, n, h = state.scalar, state.dim.n, state.dim.h
    dt = state.jet("T_vv_h")
    th = torsion_endomorphism(state, acs)
    eps = epsilon(kind)
    mu_v = state.jets.get("mu_v")
    tau_v = state.jets.get("tau_v")
    quarter = coefficient(1, 4, kind)
    s_coeff = state.S * coefficient(1, 8 * n * (n + 2), kind)
    out = zeros((3, 3, h, h), kind)
    for k in range(3):
        for l in range(3):
            block = (th[l] @ th[k] - th[k] @ th[l]).T + dt[:, k, l, :].T
            if mu_v is not None:
                block = block + (mu_v[:, :, k] @ acs[l] - mu_v[:, :, l] @ acs[k]).T
            if tau_v is not None:
                a = tau_v[:, :, l] @ acs[k] - tau_v[:, :, k] @ acs[l]
                block = block + (a - a.T) * quarter
            for m in range(3):
                if eps[k, l, m] != 0:
                    tm = state.tau @ acs[m]
                    part = (state.mu @ acs[m]).T + (tm.T - tm) * quarter
                    block = block - part * (s_coeff * eps[k, l, m])
            out[k, l] = block
    return out


def b_from_curvature(r_vvhh: np.ndarray, acs: AcsTriple) -> np.ndarray:
    """B_{ij} = R_{klαβ} ε^{kl}_i I_j^{αβ} by direct contraction."""
    eps = epsilon(acs.scalar)
    rkl = np.stack(
        [np.tensordot(r_vvhh, acs[j], axes=([2, 3], [0, 1])) for j in range(3)], axis=-1
    )
    return np.asarray(np.tensordot(eps, rkl, axes=([1, 2], [0, 1])))


@dataclass
class MixedCurvatureResult:
    """I-contracted mixed curvature R_{klαβ}I_j^{αβ} and the tensor B."""

    rkl: np.ndarray
    B: np.ndarray
    antisym_residual: Optional[np.ndarray] = None


def mixed_curvature_and_B(
    state: PointState, acs: Optional[AcsTriple] = None
) -> MixedCurvatureResult:
    """B assembled from torsion jets plus quadratic torsion terms.

    R_{klαβ}I_j^{αβ} = T_{βkl,α}I_j^{αβ} + (T_lT_k − T_kT_l)_{βα} I_j^{αβ}. When
    the jet ``S_v`` is present the residual of ε^{jk}_iB_{jk} + S_{,i}/(4n(n+2))
    is reported as well.

    Raises:
        MissingJetError: ``T_vv_h`` is absent.
    """
    acs = acs or standard_acs(state.dim, state.scalar)
    kind, n = state.scalar, state.dim.n
    dt = state.jet("T_vv_h")
    th = torsion_endomorphism(state, acs)
    eps = epsilon(kind)
    rkl = zeros((3, 3, 3), kind)
    for k in range(3):
        for l in range(3):
            comm = th[l] @ th[k] - th[k] @ th[l]
            for j in range(3):
                m = acs[j]
                direct = sum((dt[:, k, l, :].T * m).flat)
                rkl[k, l, j] = direct + sum((comm.T * m).flat)
    b = np.asarray(np.tensordot(eps, rkl, axes=([1, 2], [0, 1])))
    result = MixedCurvatureResult(rkl, b)
    if "S_v" in state.jets:
        anti = np.asarray(np.tensordot(eps, b, axes=([1, 2], [0, 1])))
        result.antisym_residual = anti + state.jets["S_v"] * coefficient(
            1, 4 * n * (n + 2), kind
        )
    return result


def A_operator(dim: Dim, scalar: ScalarKind = ScalarKind.RATIONAL) -> tuple[np.ndarray, np.ndarray]:
    """A_{iα}^{jβ} = 2 ε_{ijk} I_{kαβ} and A⁻¹ = (A + 2)/8, rows and columns indexed i·4n + α."""
    acs = standard_acs(dim, scalar)
    eps = epsilon(scalar)
    h = dim.h
    a = zeros((3 * h, 3 * h), scalar)
    for i in range(3):
        for j in range(3):
            block = zeros((h, h), scalar)
            for k in range(3):
                if eps[i, j, k] != 0:
                    block = block + acs[k] * (eps[i, j, k] * 2)
            a[i * h : (i + 1) * h, j * h : (j + 1) * h] = block
    a_inv = (a + identity(3 * h, scalar) * 2) * coefficient(1, 8, scalar)
    return a, a_inv


def B_tensor(state: PointState, acs: Optional[AcsTriple] = None) -> np.ndarray:
    """B from the state, or from its torsion jets.

    Raises:
        MissingJetError: neither ``B`` nor the jet ``T_vv_h`` is available.
    """
    if state.B is not None:
        return state.B
    if "T_vv_h" not in state.jets:
        raise MissingJetError("Q_ij needs B or the jet T_vv_h")
    return mixed_curvature_and_B(state, acs).B


def torsion_vector(state: PointState) -> np.ndarray:
    """V[j, β] = Σ_{kl} T_{βkl} ε_{jkl}."""
    return np.asarray(
        np.tensordot(epsilon(state.scalar), state.torsion_vv(), axes=([1, 2], [1, 2]))
    )


def L_and_Q(state: PointState, acs: Optional[AcsTriple] = None) -> tuple[np.ndarray, np.ndarray]:
    """L and the symmetric (4n+3)×(4n+3) tensor Q.

    Q_{αβ} = L_{αβ} + S/(8(n+2)) g_{αβ},
    Q_{αi} = −(A⁻¹)_{iα}^{jβ} T_{βkl} ε_j^{kl},
    Q_{ij} = −B_{(ij)}/(16n).
    """
    acs = acs or standard_acs(state.dim, state.scalar)
    kind, n, h = state.scalar, state.dim.n, state.dim.h
    L = L_tensor(state)
    q = zeros((h + 3, h + 3), kind)
    q[:h, :h] = L + identity(h, kind) * (state.S * coefficient(1, 8 * (n + 2), kind))
    _, a_inv = A_operator(state.dim, kind)
    v = torsion_vector(state).reshape(3 * h)
    q_vh = -(a_inv @ v)
    for i in range(3):
        for alpha in range(h):
            q[alpha, h + i] = q_vh[i * h + alpha]
            q[h + i, alpha] = q_vh[i * h + alpha]
    b = B_tensor(state, acs)
    q[h:, h:] = -(b + b.T) * coefficient(1, 32 * n, kind)
    return L, q


def epsilon_torsion_trace(state: PointState, acs: Optional[AcsTriple] = None) -> np.ndarray:
    """E_α = ε^{ijk} T^β_{jk} I_{iβα}."""
    acs = acs or standard_acs(state.dim, state.scalar)
    v = torsion_vector(state)
    out = zeros(state.dim.h, state.scalar)
    for i in range(3):
        out = out + v[i] @ acs[i]
    return out


@dataclass
class DivergenceReport:
    """Residuals of the three divergence identities and the linear-system certificates."""

    taumuS: np.ndarray
    tormu: np.ndarray
    vhricci: np.ndarray
    det3: Any
    det4: Any

    @property
    def max_residual(self) -> float:
        return max(abs(float(x)) for r in (self.taumuS, self.tormu, self.vhricci) for x in r.flat)


def divergence_matrices(
    n: int, kind: ScalarKind = ScalarKind.RATIONAL
) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient matrices of the first- and second-divergence systems."""
    a = coefficient((4 * n + 1) * (2 * n + 1), 16 * n * (n + 2), kind)
    b = coefficient(-3, 16 * n * (n + 2), kind)
    c = coefficient(-3, 16 * (n + 2), kind)
    one = coefficient(1, 1, kind)
    zero = coefficient(0, 1, kind)
    m3 = np.array([[one, one * 2, a], [one, one * -6, b], [one, zero, c]], dtype=object)
    m4 = np.array(
        [
            [one, one * -6, b, zero],
            [one, zero, c, zero],
            [one, one * -3, zero, -one],
            [one, one * 2, a, zero],
        ],
        dtype=object,
    )
    if kind == ScalarKind.F64:
        return m3.astype(float), m4.astype(float)
    return m3, m4


def exact_det(matrix: np.ndarray) -> Any:
    """Determinant over QQ for Fractions, by LAPACK for floats."""
    if matrix.dtype != object:
        return float(np.linalg.det(matrix))
    entries = [[to_fraction(x) for x in row] for row in matrix]
    dm = DomainMatrix(
        [[QQ(x.numerator, x.denominator) for x in row] for row in entries], matrix.shape, QQ
    )
    return to_fraction(QQ.to_sympy(dm.det()))


def divergence_residuals(state: PointState, acs: Optional[AcsTriple] = None) -> DivergenceReport:
    """Residuals of the τ/μ/S divergence identities.

    Raises:
        MissingJetError: one of ``tau_div``, ``mu_div``, ``S_h`` or
            ``vh_ricci_trace`` is absent.
    """
    acs = acs or standard_acs(state.dim, state.scalar)
    kind, n = state.scalar, state.dim.n
    tdiv, mdiv = state.jet("tau_div"), state.jet("mu_div")
    s_h, vh = state.jet("S_h"), state.jet("vh_ricci_trace")
    e = epsilon_torsion_trace(state, acs)
    taumu = (
        tdiv
        - mdiv * 6
        - e * coefficient(4 * n - 1, 2, kind)
        - s_h * coefficient(3, 16 * n * (n + 2), kind)
    )
    tormu = tdiv - e * coefficient(n + 2, 2, kind) - s_h * coefficient(3, 16 * (n + 2), kind)
    vhr = tdiv - mdiv * 3 + e * 2 - vh
    m3, m4 = divergence_matrices(n, kind)
    return DivergenceReport(taumu, tormu, vhr, exact_det(m3), exact_det(m4))


def random_state(
    dim: Dim,
    rng: np.random.Generator,
    scalar: ScalarKind = ScalarKind.RATIONAL,
    with_curvature: bool = False,
    with_jets: bool = False,
    zero_scalar: bool = False,
) -> PointState:
    """Random valid state: τ and μ projected onto their Casimir eigenspaces.

    With ``with_curvature`` the state carries the W = 0 curvature built from L;
    with ``with_jets`` it carries random jets of every kind in ``JET_SHAPES``, the
    vertical jets of τ and μ projected like τ and μ themselves.
    """
    acs = standard_acs(dim, scalar)
    cas = casimir(acs)
    h = dim.h
    half = coefficient(1, 2, scalar)

    def sym(shape_h: int) -> np.ndarray:
        a = random_array(rng, (shape_h, shape_h), scalar)
        return (a + a.T) * half

    def trace_free(t: np.ndarray) -> np.ndarray:
        tr = sum(t[a, a] for a in range(h))
        return t - identity(h, scalar) * (tr * coefficient(1, h, scalar))

    tau = cas.project(sym(h), -1)
    mu = trace_free(cas.project(sym(h), 3))
    S = coefficient(0, 1, scalar) if zero_scalar else random_array(rng, (1,), scalar)[0]
    tvv = random_array(rng, (h, 3, 3), scalar)
    tvv = (tvv - tvv.transpose(0, 2, 1)) * half
    state = PointState(dim, tau, mu, S, T_vv=tvv, scalar=scalar)
    if with_curvature:
        state = replace(state, R_hhhh=w_flat_curvature(state, acs))
    if with_jets:
        dt = random_array(rng, (h, 3, 3, h), scalar)
        dt = (dt - dt.transpose(0, 2, 1, 3)) * half
        tau_v = random_array(rng, (h, h, 3), scalar)
        mu_v = random_array(rng, (h, h, 3), scalar)
        for k in range(3):
            tau_v[:, :, k] = cas.project((tau_v[:, :, k] + tau_v[:, :, k].T) * half, -1)
            mu_v[:, :, k] = trace_free(cas.project(sym(h), 3))
        jets = {
            "T_vv_h": dt,
            "tau_v": tau_v,
            "mu_v": mu_v,
            "S_h": random_array(rng, (h,), scalar),
            "S_v": random_array(rng, (3,), scalar),
            "tau_div": random_array(rng, (h,), scalar),
            "mu_div": random_array(rng, (h,), scalar),
            "vh_ricci_trace": random_array(rng, (h,), scalar),
        }
        state = replace(state, jets=jets)
    return state


def zero_state(
    dim: Dim, scalar: ScalarKind = ScalarKind.RATIONAL, with_jets: bool = True
) -> PointState:
    """The flat state: all tensors and jets zero."""
    h = dim.h
    jets: dict[str, np.ndarray] = {}
    if with_jets:
        shapes = {"h": h, "3": 3}
        for name, spec in JET_SHAPES.items():
            jets[name] = zeros(tuple(shapes[s] for s in spec.split(",")), scalar)
    return PointState(
        dim,
        zeros((h, h), scalar),
        zeros((h, h), scalar),
        coefficient(0, 1, scalar),
        T_vv=zeros((h, 3, 3), scalar),
        R_hhhh=zeros((h, h, h, h), scalar),
        jets=jets,
        scalar=scalar,
    )
