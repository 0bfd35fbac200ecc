"""Unit tests for qcnormal.core.curv."""

from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from qcnormal.core.curv import (
    A_operator,
    B_tensor,
    L_and_Q,
    PointState,
    RicciForms,
    b_from_curvature,
    conformal_curvature,
    divergence_residuals,
    exact_det,
    divergence_matrices,
    mixed_curvature,
    mixed_curvature_and_B,
    random_state,
    ricci_and_scalar,
    ricci_forms,
    torsion_endomorphism,
    validate,
    w_flat_curvature,
    zero_state,
)
from qcnormal.core.errors import InvariantViolation, MissingJetError
from qcnormal.core.models import Dim, ScalarKind
from qcnormal.core.qalg import casimir, standard_acs
from qcnormal.core.scalars import identity, is_zero, random_array, zeros


def _antisymmetric_pairs(rng, h):
    r = random_array(rng, (h,) * 4, ScalarKind.RATIONAL)
    r = r - r.transpose(1, 0, 2, 3)
    return r - r.transpose(0, 1, 3, 2)


class TestValidate:
    """Test invariant checking of point states."""

    @pytest.mark.parametrize("n", [1, 2])
    def test_random_states_are_valid(self, n):
        """Test random_state only produces valid states."""
        rng = np.random.default_rng(n)
        for _ in range(3):
            validate(random_state(Dim(n), rng, with_curvature=True, with_jets=True))

    def test_random_vertical_jets_in_eigenspaces(self):
        """Test each vertical jet of τ lies in the −1 and of μ in the 3 eigenspace."""
        acs = standard_acs(Dim(1))
        cas = casimir(acs)
        state = random_state(Dim(1), np.random.default_rng(12), with_jets=True)
        for k in range(3):
            tau_k, mu_k = state.jets["tau_v"][:, :, k], state.jets["mu_v"][:, :, k]
            assert np.all(cas.project(tau_k, -1) == tau_k)
            assert np.all(cas.project(mu_k, 3) == mu_k)
            assert np.trace(tau_k) == 0

    def test_asymmetric_tau(self):
        """Test a non-symmetric τ is rejected."""
        state = random_state(Dim(1), np.random.default_rng(0))
        tau = state.tau.copy()
        tau[0, 1] = tau[0, 1] + 1
        with pytest.raises(InvariantViolation, match="tau is not symmetric"):
            validate(replace(state, tau=tau))

    def test_mu_in_wrong_eigenspace(self):
        """Test a μ that does not commute with the I_i is rejected."""
        dim = Dim(1)
        mu = np.diag(np.array([Fraction(1), Fraction(-1), Fraction(1), Fraction(-1)], dtype=object))
        state = PointState(dim, zeros((4, 4), ScalarKind.RATIONAL), mu, Fraction(0))
        with pytest.raises(InvariantViolation):
            validate(state)

    def test_wrong_shape(self):
        """Test a τ of the wrong size is rejected."""
        state = PointState(
            Dim(2), zeros((4, 4), ScalarKind.RATIONAL), zeros((8, 8), ScalarKind.RATIONAL), 0
        )
        with pytest.raises(InvariantViolation, match="tau must be 8x8"):
            validate(state)

    def test_symmetric_vertical_torsion(self):
        """Test T^α_{ij} must be antisymmetric in i, j."""
        state = random_state(Dim(1), np.random.default_rng(1))
        tvv = state.T_vv.copy()
        tvv[0, 0, 1] = tvv[0, 0, 1] + 1
        with pytest.raises(InvariantViolation, match="T_vv"):
            validate(replace(state, T_vv=tvv))


class TestTorsionAndRicci:
    """Test torsion endomorphisms and the Ricci tensor."""

    def test_torsion_traces_vanish(self):
        """Test tr T_i = 0 and tr(T_i I_i) = 0."""
        dim = Dim(1)
        acs = standard_acs(dim)
        state = random_state(dim, np.random.default_rng(3))
        th = torsion_endomorphism(state, acs)
        for i in range(3):
            assert np.trace(th[i]) == 0
            assert np.trace(th[i] @ acs[i]) == 0

    def test_lambda(self):
        """Test S = −8n(n+2)λ."""
        state = replace(zero_state(Dim(2)), S=Fraction(64))
        assert state.lam == -1
        assert state.T_vvv[0, 1, 2] == -1

    @pytest.mark.parametrize("n", [1, 2])
    def test_ricci_trace_is_scalar(self, n):
        """Test the trace of Ric is S."""
        state = random_state(Dim(n), np.random.default_rng(4))
        assert ricci_and_scalar(state).scalar_check == state.S

    def test_ricci_consistency_with_curvature(self):
        """Test contracting the supplied R_hhhh reproduces Ric."""
        state = random_state(Dim(1), np.random.default_rng(5), with_curvature=True)
        result = ricci_and_scalar(state)
        assert result.contraction is not None
        assert result.consistent

    def test_inconsistent_curvature_is_flagged(self):
        """Test an unrelated R_hhhh gives a nonzero residual."""
        rng = np.random.default_rng(6)
        state = random_state(Dim(1), rng)
        state = replace(state, R_hhhh=_antisymmetric_pairs(rng, 4))
        assert not ricci_and_scalar(replace(state, S=Fraction(17))).consistent

    @pytest.mark.parametrize("n", [1, 2])
    def test_ricci_form_traces(self, n):
        """Test the I-traces of ρ, ζ, σ against −3S/(2(n+2)), 3S/(4(n+2)), −3S/(2(n+2))."""
        dim = Dim(n)
        acs = standard_acs(dim)
        state = random_state(dim, np.random.default_rng(7))
        rho, zeta, sigma = ricci_forms(state, acs).traces(acs)
        assert rho == state.S * Fraction(-3, 2 * (n + 2))
        assert zeta == state.S * Fraction(3, 4 * (n + 2))
        assert sigma == state.S * Fraction(-3, 2 * (n + 2))

    @pytest.mark.parametrize("n", [1, 2])
    def test_contracted_form_traces(self, n):
        """Test the forms contracted from the W = 0 curvature have the same traces."""
        dim = Dim(n)
        acs = standard_acs(dim)
        state = random_state(dim, np.random.default_rng(17), with_curvature=True)
        forms = ricci_forms(state, acs)
        assert forms.contracted is not None
        rho, zeta, sigma = RicciForms(*forms.contracted).traces(acs)
        assert rho == state.S * Fraction(-3, 2 * (n + 2))
        assert zeta == state.S * Fraction(3, 4 * (n + 2))
        assert sigma == state.S * Fraction(-3, 2 * (n + 2))

    @pytest.mark.parametrize("n", [1, 2])
    def test_contracted_forms_match_closed_forms(self, n):
        """Test contraction of the W = 0 curvature of a pure-S state gives the closed forms."""
        dim = Dim(n)
        acs = standard_acs(dim)
        state = replace(zero_state(dim, with_jets=False), S=Fraction(9))
        state = replace(state, R_hhhh=w_flat_curvature(state, acs))
        forms = ricci_forms(state, acs)
        rho, zeta, sigma = forms.contracted
        assert np.all(rho == forms.rho)
        assert np.all(zeta == forms.zeta)
        assert np.all(sigma == forms.sigma)
        assert np.all(rho[0] == acs[0] * Fraction(-9, 8 * n * (n + 2)))


class TestConformalCurvature:
    """Test W and the flat-curvature construction."""

    def test_w_equals_r_when_l_vanishes(self):
        """Test W = R on a state with τ = μ = 0 and S = 0."""
        rng = np.random.default_rng(8)
        r = _antisymmetric_pairs(rng, 4)
        state = replace(zero_state(Dim(1), with_jets=False), R_hhhh=r)
        w, norm = conformal_curvature(state)
        assert np.all(w == r)
        assert norm == sum(x * x for x in r.flat)

    @pytest.mark.parametrize("n", [1, 2])
    def test_w_flat_state_has_zero_w(self, n):
        """Test the curvature built from L has W = 0."""
        state = random_state(Dim(n), np.random.default_rng(9), with_curvature=True)
        w, norm = conformal_curvature(state)
        assert is_zero(w)
        assert norm == 0

    def test_flat_curvature_helper(self):
        """Test the curvature built by w_flat_curvature has ‖W‖² = 0."""
        state = random_state(Dim(1), np.random.default_rng(19))
        _, norm = conformal_curvature(replace(state, R_hhhh=w_flat_curvature(state)))
        assert norm == 0

    def test_needs_curvature(self):
        """Test W needs R_hhhh."""
        state = random_state(Dim(1), np.random.default_rng(10))
        with pytest.raises(MissingJetError):
            conformal_curvature(state)

    def test_float_backend(self):
        """Test the float backend agrees within tolerance."""
        state = random_state(Dim(1), np.random.default_rng(11), ScalarKind.F64, with_curvature=True)
        w, _ = conformal_curvature(state)
        assert is_zero(w, 1e-10)


class TestQ:
    """Test the tensor Q and the A operator."""

    @pytest.mark.parametrize("n", [1, 2])
    def test_a_inverse(self, n):
        """Test A⁻¹ = (A + 2)/8 really inverts A."""
        a, a_inv = A_operator(Dim(n))
        assert np.all(a @ a_inv == identity(12 * n, ScalarKind.RATIONAL))

    @pytest.mark.parametrize("n", [1, 2])
    def test_q_trace(self, n):
        """Test tr Q = (4n+1)S/(8(n+2)) and Q is symmetric."""
        dim = Dim(n)
        state = random_state(dim, np.random.default_rng(12), with_jets=True)
        _, q = L_and_Q(state)
        assert sum(q[a, a] for a in range(dim.h)) == state.S * Fraction(4 * n + 1, 8 * (n + 2))
        assert np.all(q == q.T)

    def test_q_vertical_block_from_b(self):
        """Test Q_ij = −B_(ij)/(16n) when B is supplied."""
        dim = Dim(1)
        b = random_array(np.random.default_rng(13), (3, 3), ScalarKind.RATIONAL)
        state = replace(zero_state(dim), B=b)
        _, q = L_and_Q(state)
        assert np.all(q[4:, 4:] == -(b + b.T) / 32)

    def test_b_needs_input(self):
        """Test B_tensor without B or T_vv_h raises."""
        state = random_state(Dim(1), np.random.default_rng(14))
        with pytest.raises(MissingJetError):
            B_tensor(state)

    def test_flat_state(self):
        """Test Q = 0, ‖W‖² = 0 and zero divergence residuals on the flat state."""
        state = zero_state(Dim(1))
        _, q = L_and_Q(state)
        assert is_zero(q)
        assert divergence_residuals(state).max_residual == 0
        assert conformal_curvature(state)[1] == 0


class TestMixedCurvature:
    """Test the mixed curvature R_{klαβ} and B."""

    def test_b_agrees_with_direct_contraction(self):
        """Test B from torsion jets matches contracting R_{klαβ} when τ = μ = 0."""
        dim = Dim(1)
        acs = standard_acs(dim)
        rng = np.random.default_rng(15)
        dt = random_array(rng, (4, 3, 3, 4), ScalarKind.RATIONAL)
        dt = dt - dt.transpose(0, 2, 1, 3)
        state = PointState(
            dim,
            zeros((4, 4), ScalarKind.RATIONAL),
            zeros((4, 4), ScalarKind.RATIONAL),
            Fraction(3),
            jets={"T_vv_h": dt},
        )
        direct = b_from_curvature(mixed_curvature(state, acs), acs)
        assert np.all(direct == mixed_curvature_and_B(state, acs).B)

    def test_mixed_curvature_antisymmetric(self):
        """Test R_{klαβ} is antisymmetric in k, l."""
        state = random_state(Dim(1), np.random.default_rng(16), with_jets=True)
        r = mixed_curvature(state)
        assert np.all(r == -r.transpose(1, 0, 2, 3))

    def test_missing_jet(self):
        """Test mixed curvature requires T_vv_h."""
        with pytest.raises(MissingJetError, match="T_vv_h"):
            mixed_curvature(random_state(Dim(1), np.random.default_rng(17)))


class TestLinearSystems:
    """Test the divergence systems and the exact determinant."""

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_nonsingular(self, n):
        """Test both coefficient matrices are nonsingular."""
        m3, m4 = divergence_matrices(n)
        assert exact_det(m3) != 0
        assert exact_det(m4) != 0

    def test_exact_det(self):
        """Test the exact determinant on small matrices."""
        m = np.array([[Fraction(1), Fraction(2)], [Fraction(3), Fraction(4)]], dtype=object)
        assert exact_det(m) == -2
        singular = np.array([[Fraction(1), Fraction(2)], [Fraction(2), Fraction(4)]], dtype=object)
        assert exact_det(singular) == 0
        swap = np.array([[Fraction(0), Fraction(1)], [Fraction(1), Fraction(0)]], dtype=object)
        assert exact_det(swap) == -1

    def test_float_matrices(self):
        """Test the float determinant matches the exact one."""
        m3, _ = divergence_matrices(1, ScalarKind.F64)
        exact, _ = divergence_matrices(1)
        assert exact_det(m3) == pytest.approx(float(exact_det(exact)))

    def test_divergence_needs_jets(self):
        """Test missing divergence jets raise."""
        state = random_state(Dim(1), np.random.default_rng(18))
        with pytest.raises(MissingJetError):
            divergence_residuals(state)
