"""Unit tests for qcnormal.core.conf."""

from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from qcnormal.core.conf import (
    ConformalFactor,
    FlatModelOracle,
    LinearizedOracle,
    QJetTable,
    UJets,
    _connection_blocks,
    connection_change,
    covariant_jets,
    exp_series,
    flat_q_fields,
    frame_connection,
    linear_increment_fields,
    normalize,
    normalize_step,
    phi,
    rescale_point,
    vanishing_report,
)
from qcnormal.core.curv import zero_state
from qcnormal.core.errors import (
    ConfigError,
    InvariantViolation,
    MissingJetError,
    PreconditionError,
    StabilityViolation,
)
from qcnormal.core.heis import flat_connection
from qcnormal.core.models import Dim, ScalarKind
from qcnormal.core.poly import ring_for
from qcnormal.core.scalars import zeros

DIM = Dim(1)


@pytest.fixture
def ring():
    return ring_for(1)


def _base_table():
    """A small jet table touching orders 2, 3 and 4."""
    return QJetTable.from_entries(
        DIM,
        {
            (0, 0): 1,
            (0, 1): Fraction(1, 2),
            (1, 1, 2): -2,
            (0, 4): 3,
            (2, 3, 0, 1): Fraction(1, 3),
            (4, 5): 1,
            (0, 0, 6): -1,
        },
        max_order=4,
    )


class _DriftingOracle:
    """Returns a fixed sequence of tables, the last one altering an order-2 jet."""

    def __init__(self):
        self.dim = DIM
        self.max_order = 3
        self.calls = 0

    def __call__(self, factor):
        self.calls += 1
        if self.calls == 1:
            return QJetTable(DIM, 3, {(0, 0): Fraction(1)})
        if self.calls == 2:
            return QJetTable(DIM, 3, {})
        return QJetTable(DIM, 3, {(0, 1): Fraction(5)})


class TestQJetTable:
    """Test symmetrized jet tables."""

    def test_order_floor(self):
        """Test tables start at order 2."""
        with pytest.raises(ConfigError):
            QJetTable(DIM, 1)

    def test_key_beyond_order(self):
        """Test a key above max_order is rejected."""
        with pytest.raises(InvariantViolation):
            QJetTable(DIM, 2, {(4, 5): Fraction(1)})

    def test_mirror_entry(self):
        """Test Q_{ab} stands for Q_{ba} and the average keeps its value."""
        table = QJetTable.from_entries(DIM, {(0, 1): 3})
        assert table.value((1, 0)) == 3
        assert table.max_order == 2

    def test_weighted_average(self):
        """Test orderings are averaged with weights (1/#C!)(½)^{o(C)−#C}."""
        table = QJetTable.from_entries(DIM, {(0, 0, 4): 6, (0, 4, 0): 2, (4, 0, 0): 2})
        # (6·½ + 2·1 + 2·1) / (½ + 1 + 1)
        assert table.value((0, 0, 4)) == Fraction(14, 5)
        assert table.order_of((0, 0, 4)) == 4

    def test_invalid_index(self):
        """Test an index past the frame is rejected."""
        with pytest.raises(InvariantViolation):
            QJetTable.from_entries(DIM, {(0, 9): 1})

    def test_plus_and_nonzero(self):
        """Test adding tables and listing nonzero entries by order."""
        a = QJetTable(DIM, 3, {(0, 0): Fraction(1), (0, 1, 2): Fraction(2)})
        b = QJetTable(DIM, 3, {(0, 0): Fraction(-1)})
        total = a.plus(b)
        assert total.is_zero(2)
        assert not total.is_zero()
        assert total.nonzero() == {(0, 1, 2): Fraction(2)}

    def test_plus_dimension_mismatch(self):
        """Test tables of different dimension cannot be added."""
        with pytest.raises(ConfigError):
            QJetTable.zero(DIM, 2).plus(QJetTable.zero(Dim(2), 2))

    def test_expanded(self):
        """Test every ordering of a stored key carries its value."""
        table = QJetTable(DIM, 3, {(0, 1, 2): Fraction(1)})
        assert len(table.expanded()) == 6

    def test_from_fields_of_flat_polynomial(self, ring):
        """Test X_C Q_{ab}|₀ jets of a polynomial field."""
        table = QJetTable.from_fields(DIM, {(0, 0): ring.poly(ring.xs[1])}, 3)
        assert table.value((0, 0, 1)) != 0
        assert table.is_zero(2)


class TestPhi:
    """Test the polynomial Φ_(m)."""

    def test_second_order(self, ring):
        """Test Φ₂ of a single Q₀₀ jet is x₁²."""
        table = QJetTable.from_entries(DIM, {(0, 0): 1})
        assert ring.is_zero(phi(table, 2) - ring.poly(ring.xs[0] ** 2))

    def test_missing_order(self):
        """Test Φ_m above the table order raises."""
        with pytest.raises(MissingJetError):
            phi(QJetTable.zero(DIM, 2), 3)

    def test_fields_need_dimension(self, ring):
        """Test Φ on raw fields needs the dimension."""
        with pytest.raises(ConfigError):
            phi({(0, 0): ring.poly(1)}, 2)


class TestConformalFactor:
    """Test conformal factor invariants."""

    def test_rejects_low_weight_piece(self, ring):
        """Test pieces start at weight 2."""
        with pytest.raises(InvariantViolation):
            ConformalFactor(DIM, {1: ring.poly(ring.xs[0])})

    def test_rejects_inhomogeneous_piece(self, ring):
        """Test a piece must be homogeneous of its weight."""
        with pytest.raises(InvariantViolation):
            ConformalFactor(DIM, {3: ring.poly(ring.xs[0] ** 2)})

    def test_rejects_t_in_u2(self, ring):
        """Test u₂ must be x-only."""
        with pytest.raises(InvariantViolation):
            ConformalFactor(DIM, {2: ring.poly(ring.ts[0])})

    def test_rejects_bad_one_jet(self, ring):
        """Test the 1-jet is linear in x."""
        with pytest.raises(InvariantViolation):
            ConformalFactor(DIM, one_jet=ring.poly(ring.xs[0] + 1))

    def test_total_and_with_piece(self, ring):
        """Test pieces accumulate into the total."""
        factor = ConformalFactor(DIM, one_jet=ring.poly(ring.xs[0]))
        factor = factor.with_piece(2, ring.poly(ring.xs[1] ** 2))
        factor = factor.with_piece(2, ring.poly(ring.xs[1] ** 2))
        assert ring.is_zero(factor.total() - ring.poly(ring.xs[0] + 2 * ring.xs[1] ** 2))
        assert not factor.is_zero()


class TestNormalize:
    """Test the order-by-order Q-normalization."""

    def test_linearized_oracle(self):
        """Test every symmetrized jet through order 4 vanishes."""
        oracle = LinearizedOracle(_base_table())
        factor = normalize(4, oracle)
        assert oracle(factor).is_zero(4)
        assert set(factor.pieces) <= {2, 3, 4}

    def test_idempotent(self):
        """Test normalizing an already normalized table returns u = 0."""
        oracle = LinearizedOracle(_base_table())
        final = oracle(normalize(4, oracle))
        assert normalize(4, LinearizedOracle(final)).is_zero()

    def test_flat_table_needs_nothing(self):
        """Test the flat model is already normalized."""
        assert normalize(4, FlatModelOracle(DIM, 4)).is_zero()

    def test_inverse_problem(self, ring):
        """Test normalizing e^{2v}η on the flat model recovers u = −v."""
        v = ring.poly(ring.xs[0] ** 2 - ring.xs[1] * ring.xs[2] + ring.xs[3] * ring.ts[1])
        oracle = FlatModelOracle(DIM, 3, start=v)
        factor = normalize(3, oracle)
        assert ring.is_zero(factor.total() + v)
        assert oracle(factor).is_zero()

    def test_one_jet_is_kept(self, ring):
        """Test a supplied 1-jet is carried in the factor."""
        one_jet = ring.poly(ring.xs[2])
        factor = normalize(2, LinearizedOracle(_base_table()), one_jet=one_jet)
        assert ring.is_zero(factor.one_jet - one_jet)

    def test_order_bounds(self):
        """Test N must lie in 2..oracle.max_order."""
        oracle = LinearizedOracle(_base_table())
        with pytest.raises(ConfigError):
            normalize(1, oracle)
        with pytest.raises(ConfigError):
            normalize(5, oracle)
        with pytest.raises(ConfigError):
            normalize_step(1, _base_table())

    def test_stability_violation(self):
        """Test an oracle that changes lower-order jets is reported."""
        with pytest.raises(StabilityViolation):
            normalize(3, _DriftingOracle())

    def test_flat_oracle_matches_linearization(self, ring):
        """Test the exact flat-model jets agree with the linearized ones for weight-3 u."""
        u = ring.random_homogeneous(np.random.default_rng(3), 3, density=0.4)
        factor = ConformalFactor(DIM, {3: u})
        exact = FlatModelOracle(DIM, 4)(factor)
        linear = LinearizedOracle(QJetTable.zero(DIM, 4))(factor)
        assert exact.values == linear.values

    def test_flat_oracle_order_floor(self):
        """Test the flat oracle needs N >= 2."""
        with pytest.raises(ConfigError):
            FlatModelOracle(DIM, 1)

    def test_flat_oracle_goes_through_connection_change(self, ring, monkeypatch):
        """Test the flat oracle builds the rescaled connection."""

        def refuse(*args, **kwargs):
            raise PreconditionError("connection requested")

        monkeypatch.setattr("qcnormal.core.conf.connection_change", refuse)
        oracle = FlatModelOracle(DIM, 3, start=ring.poly(ring.xs[0] ** 2))
        with pytest.raises(PreconditionError, match="connection requested"):
            oracle(ConformalFactor(DIM))


class TestFlatFields:
    """Test the exact Q-fields and covariant jets of the flat-model oracle."""

    def test_mixed_block_is_nonlinear(self, ring):
        """Test Q_αi of a pure 1-jet comes from the torsion, not from −T_iX_αw."""
        w = ring.poly(ring.xs[0])
        exact = flat_q_fields(ring, w, 3)
        linear = linear_increment_fields(ring, w)
        h = DIM.h
        mixed = [(a, h + i) for a in range(h) for i in range(3)]
        assert all(ring.is_zero(linear[key]) for key in mixed)
        assert any(not ring.is_zero(exact[key]) for key in mixed)

    def test_mixed_block_linear_part(self, ring):
        """Test Q_αi of a weight-3 factor is −T_iX_αw through weight 0."""
        w = ring.random_homogeneous(np.random.default_rng(5), 3, density=0.5)
        exact = flat_q_fields(ring, w, 3)
        linear = linear_increment_fields(ring, w)
        h = DIM.h
        for a in range(h):
            for i in range(3):
                assert ring.is_zero(exact[(a, h + i)] - ring.truncate(linear[(a, h + i)], 0))

    def test_flat_connection_has_no_frame_part(self):
        """Test the left-invariant frame is parallel for the flat connection."""
        assert frame_connection(flat_connection(DIM), DIM) == {}

    def test_frame_connection_inverts_connection_change(self, ring):
        """Test frame components of the rescaled connection give back ∇̃ − ∇."""
        u = ring.poly(ring.xs[0] ** 2 - ring.xs[1] * ring.xs[2] + ring.xs[3] * ring.ts[0])
        frame = frame_connection(connection_change(u, DIM), DIM)
        blocks = _connection_blocks(ring, u)
        assert set(frame) == set(blocks)
        for key, value in blocks.items():
            assert ring.is_zero(frame[key] - value)

    def test_covariant_jets_without_connection(self, ring):
        """Test a zero connection reduces the jets to frame derivatives."""
        f = ring.poly(ring.xs[0] * ring.xs[1])
        jets = covariant_jets(ring, {(0, 1): f, (1, 0): f}, {}, 4)
        assert jets[(0, 1, 0, 1)] == 1
        assert jets[(1, 0, 1, 0)] == 1
        assert (0, 1) not in jets

    def test_covariant_jets_connection_terms(self, ring):
        """Test ∇_{e_0}e_0 = e_1 moves a constant Q_11 into Q_01,0 and Q_10,0."""
        jets = covariant_jets(ring, {(1, 1): ring.poly(1)}, {(0, 0, 1): ring.poly(1)}, 3)
        assert jets[(1, 1)] == 1
        assert jets[(0, 1, 0)] == -1
        assert jets[(1, 0, 0)] == -1
        assert (1, 1, 0) not in jets


class TestPointwiseRescaling:
    """Test the transformation laws at a point."""

    def test_exp_series(self, ring):
        """Test e^{x₁} through weight 2."""
        out = exp_series(ring, ring.poly(ring.xs[0]), 2)
        assert ring.is_zero(out - ring.poly(1 + ring.xs[0] + ring.xs[0] ** 2 / 2))

    def test_exp_series_needs_zero_constant(self, ring):
        """Test a nonzero constant term is rejected."""
        with pytest.raises(PreconditionError):
            exp_series(ring, ring.poly(ring.xs[0] + 1), 2)

    def test_ujets_from_poly(self, ring):
        """Test derivatives of u = x₁² + t₁ at the origin."""
        jets = UJets.from_poly(ring, ring.poly(ring.xs[0] ** 2 + ring.ts[0]))
        assert jets.u0 == 0
        assert jets.hess[0, 0] == 2
        assert jets.grad_v[0] == 2
        assert all(g == 0 for g in jets.grad)

    def test_scalar_curvature_change(self, ring):
        """Test S̃ = −8(n+2)Σu_αα for u = x₁² on the flat state."""
        jets = UJets.from_poly(ring, ring.poly(ring.xs[0] ** 2))
        result = rescale_point(zero_state(DIM), jets)
        assert result.state.S == -48
        assert result.state.R_hhhh is None
        assert np.all(result.reeb[:, 4:] == np.eye(3, dtype=int))

    def test_tau_mu_split(self, ring):
        """Test τ̃ and μ̃ are trace-free and symmetric after the change."""
        jets = UJets.from_poly(ring, ring.poly(ring.xs[0] ** 2 - 3 * ring.xs[1] * ring.xs[2]))
        state = rescale_point(zero_state(DIM), jets).state
        for t in (state.tau, state.mu):
            assert np.all(t == t.T)
            assert sum(t[a, a] for a in range(4)) == 0

    def test_torsion_change_needs_mixed_jets(self):
        """Test the torsion change requires u_{αi}."""
        jets = UJets(0, zeros(4, ScalarKind.RATIONAL), zeros((4, 4), ScalarKind.RATIONAL))
        with pytest.raises(MissingJetError):
            rescale_point(zero_state(DIM), jets)

    def test_nonzero_value_scales(self):
        """Test S̃ carries e^{−2u(q)} on the float backend."""
        kind = ScalarKind.F64
        jets = UJets(0.5, zeros(4, kind), zeros((4, 4), kind), mixed=zeros((3, 4), kind))
        result = rescale_point(replace(zero_state(DIM, kind), S=10.0), jets)
        assert result.state.S == pytest.approx(10 * np.exp(-1.0))
        assert result.reeb[0, 4] == pytest.approx(np.exp(-1.0))

    def test_nonzero_value_is_not_rational(self):
        """Test the exact backend refuses an irrational e^{−2u(q)}."""
        jets = UJets(
            Fraction(1, 2),
            zeros(4, ScalarKind.RATIONAL),
            zeros((4, 4), ScalarKind.RATIONAL),
            mixed=zeros((3, 4), ScalarKind.RATIONAL),
        )
        with pytest.raises(PreconditionError, match="irrational"):
            rescale_point(replace(zero_state(DIM), S=Fraction(10)), jets)


class TestConnectionChange:
    """Test the connection of e^{2u}η on the flat model."""

    def test_zero_factor_is_flat(self, ring):
        """Test u = 0 gives back the flat connection."""
        conn = connection_change(ring.zero(), DIM)
        flat = flat_connection(DIM)
        assert set(conn.gamma) == set(flat.gamma)
        for key, terms in flat.gamma.items():
            assert [c for _, c in conn.gamma[key]] == [c for _, c in terms]

    def test_degree_truncation(self, ring):
        """Test every symbol is cut at the requested degree."""
        u = ring.poly(ring.xs[0] ** 2 + ring.xs[1] * ring.xs[3])
        conn = connection_change(u, DIM, degree=1)
        assert conn.degree() == 1

    def test_degree_below_change(self, ring):
        """Test a truncation that would drop the whole change is rejected."""
        with pytest.raises(PreconditionError):
            connection_change(ring.poly(ring.xs[0] ** 4), DIM, degree=1)


class TestVanishingReport:
    """Test the list of quantities forced to vanish."""

    def test_full_list(self):
        """Test seventeen quantities are certified for a normalized table."""
        items = vanishing_report(QJetTable.zero(DIM, 4))
        assert len(items) == 17
        assert items[0].name == "S"
        assert items[0].certificate == Fraction(5, 24)
        assert {item.order for item in items} == {2, 3, 4}

    def test_low_order_table(self):
        """Test the list needs order-4 jets."""
        with pytest.raises(PreconditionError):
            vanishing_report(QJetTable.zero(DIM, 3))

    def test_unnormalized_table(self):
        """Test a nonzero jet blocks the list."""
        with pytest.raises(PreconditionError, match="not normalized"):
            vanishing_report(_base_table())
