"""Unit tests for qcnormal.core.invar."""

from fractions import Fraction

import numpy as np
import pytest

from qcnormal.core.errors import ConfigError, InvariantViolation, SingularSystemError
from qcnormal.core.invar import (
    EXPECTED_CONSTANTS,
    NAMED_PATTERNS,
    ContractionPattern,
    TermDescriptor,
    TermKind,
    _check_rank,
    abcd_values,
    count_contractions,
    curvature_projector,
    curvature_symmetrize,
    curvature_violations,
    enumerate_contractions,
    enumerate_table,
    evaluate_pattern,
    has_parity_obstruction,
    normalized_curvature_basis,
    product_weight,
    random_normalized_curvature,
    relation_values,
    slot_symmetries,
    sp_basis,
    trial_rngs,
    verify_reductions,
    verify_second_derivative_system,
    w_norm_squared,
    weight,
)
from qcnormal.core.models import Dim, ScalarKind
from qcnormal.core.qalg import standard_acs
from qcnormal.core.scalars import random_array, zeros


class TestWeights:
    """Test the weight of torsion and curvature terms."""

    @pytest.mark.parametrize(
        "kind,slots,derivs,expected",
        [
            (TermKind.TORSION, "VVV", "", 2),
            (TermKind.TORSION, "HVH", "", 2),
            (TermKind.TORSION, "HVH", "HH", 4),
            (TermKind.TORSION, "HVV", "", 3),
            (TermKind.CURVATURE, "HHHH", "", 2),
            (TermKind.CURVATURE, "HHHH", "V", 4),
            (TermKind.CURVATURE, "VVHH", "", 4),
            (TermKind.METRIC, "HH", "", 0),
            (TermKind.ACS, "VHH", "", 0),
        ],
    )
    def test_weight(self, kind, slots, derivs, expected):
        """Test w(T_{abc,D}) = o(bcD) − o(a) and w(R_{abcd,E}) = o(abcE) − o(d)."""
        assert weight(TermDescriptor(kind, slots, derivs)) == expected

    def test_product_weight(self):
        """Test weights add over a product."""
        r = TermDescriptor(TermKind.CURVATURE, "HHHH")
        g = TermDescriptor(TermKind.METRIC, "HH")
        assert product_weight([r, r, g, g]) == 4

    def test_parity_obstruction(self):
        """Test an odd number of horizontal indices blocks contraction."""
        assert has_parity_obstruction([TermDescriptor(TermKind.CURVATURE, "HVHH")])
        assert not has_parity_obstruction([TermDescriptor(TermKind.TORSION, "HVH")])

    @pytest.mark.parametrize(
        "kind,slots,derivs",
        [
            (TermKind.METRIC, "HV", ""),
            (TermKind.ACS, "HHV", ""),
            (TermKind.METRIC, "HH", "H"),
            (TermKind.CURVATURE, "HHH", ""),
            (TermKind.TORSION, "HXH", ""),
        ],
    )
    def test_malformed_terms(self, kind, slots, derivs):
        """Test malformed descriptors are rejected."""
        with pytest.raises(InvariantViolation):
            TermDescriptor(kind, slots, derivs)

    def test_name(self):
        """Test the index notation of a differentiated torsion term."""
        term = TermDescriptor(TermKind.TORSION, "HVH", "H")
        assert term.name == "T_{αiβ,γ}"


class TestTable:
    """Test the table of terms by weight."""

    def test_column_sizes(self):
        """Test the number of terms in each weight column."""
        table = enumerate_table(4)
        assert {w: len(table[w]) for w in (2, 3, 4)} == {2: 3, 3: 4, 4: 7}
        assert len(table[0]) == 4
        assert len(table[1]) == 2

    def test_every_entry_has_its_column_weight(self):
        """Test each tabulated term sits in the column of its weight."""
        for w, terms in enumerate_table(4).items():
            if w == 0:
                continue
            for term in terms:
                assert weight(term) == w

    def test_smaller_table(self):
        """Test a lower cut only keeps the early columns."""
        assert sorted(enumerate_table(2)) == [0, 1, 2]

    @pytest.mark.parametrize("max_weight", [-1, 5])
    def test_out_of_range(self, max_weight):
        """Test weights outside 0..4 are a configuration error."""
        with pytest.raises(ConfigError):
            enumerate_table(max_weight)


class TestContractions:
    """Test the enumeration of R ⊗ R contractions."""

    def test_slot_symmetries(self):
        """Test the symmetry group of a curvature tensor has eight signed elements."""
        group = dict(slot_symmetries())
        assert len(group) == 8
        assert group[(0, 1, 2, 3)] == 1
        assert group[(1, 0, 2, 3)] == -1
        assert group[(2, 3, 0, 1)] == 1
        assert group[(1, 0, 3, 2)] == 1

    def test_raw_metric_count(self):
        """Test there are 4! raw metric pairings."""
        assert count_contractions(0) == 24

    def test_metric_classes(self):
        """Test the metric pairings collapse to three classes."""
        patterns = enumerate_contractions(num_acs=0)
        assert len(patterns) == 3
        assert {p.name for p in patterns} == {"metric.abcd", "metric.acbd", "metric.adbc"}

    def test_single_acs_has_no_pattern(self):
        """Test one almost complex structure admits no complete contraction."""
        assert count_contractions(1) == 0
        assert enumerate_contractions(num_acs=1) == []

    def test_named_patterns_are_found(self):
        """Test every named pattern appears in the full enumeration."""
        names = {p.name for p in enumerate_contractions() if p.name}
        assert names == {p.name for p in NAMED_PATTERNS}

    def test_patterns_have_weight_four(self):
        """Test every contraction of R ⊗ R has weight 4."""
        assert all(p.weight() == 4 for p in enumerate_contractions())

    def test_wrong_weight(self):
        """Test only weight 4 is supported."""
        with pytest.raises(ConfigError):
            enumerate_contractions(weight=3)

    @pytest.mark.parametrize(
        "perm,tags",
        [
            ((0, 1, 2, 3), (0, 0, 0, 1)),
            ((0, 1, 2, 3), (0, 1, 1, 2)),
            ((0, 1, 2, 3), (1, 1, 1, 2)),
            ((0, 0, 2, 3), (0, 0, 0, 0)),
        ],
    )
    def test_invalid_patterns(self, perm, tags):
        """Test patterns with free indices are rejected."""
        with pytest.raises(InvariantViolation):
            ContractionPattern(perm, tags)

    def test_describe(self):
        """Test the textual form of a pattern."""
        pattern = ContractionPattern((0, 1, 2, 3), (0, 0, 1, 1))
        assert pattern.describe() == "R_abcd R_abef I1_ce I1_df"
        assert pattern.vertical == "delta"
        assert ContractionPattern((0, 1, 2, 3), (0, 1, 2, 3)).vertical == "epsilon"


class TestNormalizedCurvature:
    """Test the 𝔰𝔭(n)-valued curvature generator."""

    def test_sp1_basis_commutes(self):
        """Test 𝔰𝔭(1) is three-dimensional and commutes with each I_i."""
        acs = standard_acs(Dim(1))
        basis = sp_basis(1)
        assert len(basis) == 3
        for x in basis:
            assert np.all(x == -x.T)
            for i in range(3):
                assert np.all(x @ acs[i] == acs[i] @ x)

    def test_curvature_space_dimension(self):
        """Test the n = 1 curvature space has dimension five."""
        assert len(normalized_curvature_basis(1)) == 5

    def test_random_sample_satisfies_constraints(self):
        """Test generated tensors pass every constraint exactly."""
        dim = Dim(1)
        r = random_normalized_curvature(dim, np.random.default_rng(0))
        assert curvature_violations(r, standard_acs(dim)) == []

    def test_float_sample_is_unit(self):
        """Test float samples are normalized."""
        r = random_normalized_curvature(Dim(1), np.random.default_rng(1), ScalarKind.F64)
        assert float(np.sum(r * r)) == pytest.approx(1.0)

    def test_violations_are_named(self):
        """Test a corrupted tensor reports the broken constraints."""
        dim = Dim(1)
        r = random_normalized_curvature(dim, np.random.default_rng(2)).copy()
        r[0, 1, 0, 1] = r[0, 1, 0, 1] + 1
        found = curvature_violations(r, standard_acs(dim))
        assert "first pair not antisymmetric" in found

    def test_w_norm_is_squared_norm(self):
        """Test ‖W‖² equals the squared norm of a normalized curvature tensor."""
        dim = Dim(1)
        r = random_normalized_curvature(dim, np.random.default_rng(3))
        assert w_norm_squared(r, dim, ScalarKind.RATIONAL) == sum(x * x for x in r.flat)

    def test_metric_pattern_value(self):
        """Test R_abcd R_abcd evaluates to the squared norm."""
        dim = Dim(1)
        r = random_normalized_curvature(dim, np.random.default_rng(4))
        value = evaluate_pattern(NAMED_PATTERNS[0], r, standard_acs(dim))
        assert value == sum(x * x for x in r.flat)

    def test_projector_is_idempotent(self):
        """Test projecting twice equals projecting once."""
        project = curvature_projector(Dim(1))
        t = random_array(np.random.default_rng(5), (4, 4, 4, 4), ScalarKind.RATIONAL)
        once = project(t)
        assert np.all(project(once) == once)

    def test_projector_commutes_with_symmetrization(self):
        """Test the projection commutes with the pair-symmetry average."""
        project = curvature_projector(Dim(1))
        t = random_array(np.random.default_rng(6), (4, 4, 4, 4), ScalarKind.RATIONAL)
        assert np.all(project(curvature_symmetrize(t)) == curvature_symmetrize(project(t)))

    def test_float_projector_n2(self):
        """Test idempotence and commutation in float for n = 2."""
        project = curvature_projector(Dim(2), ScalarKind.F64)
        t = np.random.default_rng(7).uniform(-1.0, 1.0, size=(8,) * 4)
        once = project(t)
        assert np.max(np.abs(project(once) - once)) < 1e-12
        swapped = project(curvature_symmetrize(t)) - curvature_symmetrize(once)
        assert np.max(np.abs(swapped)) < 1e-12


class TestReductions:
    """Test every contraction is a fixed multiple of ‖W‖²."""

    def test_exact_reductions_n1(self):
        """Test the exact suite passes with the known constants for n = 1."""
        report = verify_reductions(Dim(1), trials=2, seed=3)
        assert report.passed
        assert report.failures == []
        by_name = {r.pattern.name: r for r in report.results if r.pattern.name}
        for name, expected in EXPECTED_CONSTANTS.items():
            assert by_name[name].constant == expected
            assert by_name[name].deviation == 0
        assert by_name["acs2.2-swapped"].constant == -by_name["acs2.2"].constant

    def test_float_reductions_n1(self):
        """Test the float backend agrees within tolerance."""
        report = verify_reductions(Dim(1), trials=2, scalar=ScalarKind.F64, seed=5)
        assert report.passed
        assert report.threshold == 1e-12

    def test_results_cover_enumeration(self):
        """Test one result per canonical pattern."""
        report = verify_reductions(Dim(1), trials=1)
        assert len(report.results) == len(enumerate_contractions())
        assert all(isinstance(r.pattern.label, str) for r in report.results)

    def test_float_reductions_n2(self):
        """Test the n = 2 float reductions hold to 1e-12."""
        report = verify_reductions(Dim(2), trials=1, tol=1e-12, scalar=ScalarKind.F64, seed=5)
        assert report.passed
        assert all(r.deviation <= 1e-12 for r in report.results)

    def test_trials_must_be_positive(self):
        """Test zero trials is a configuration error."""
        with pytest.raises(ConfigError):
            verify_reductions(Dim(1), trials=0)

    def test_trial_rngs_are_reproducible(self):
        """Test the per-trial generators depend only on the seed."""
        first = [rng.integers(1000) for rng in trial_rngs(7, 3)]
        second = [rng.integers(1000) for rng in trial_rngs(7, 3)]
        assert first == second
        assert len(set(first)) > 1


class TestSecondDerivatives:
    """Test the A, B, C, D contractions of second derivatives."""

    def test_relation_values(self):
        """Test the named linear combinations."""
        values = relation_values({"A": 1, "B": 0, "C": 1, "D": 0})
        assert values == {"A+2C": 3, "B-C-D": -1, "A-2C": -1, "2B": 0}

    def test_zero_tensor(self):
        """Test every contraction of the zero tensor vanishes."""
        acs = standard_acs(Dim(1))
        values = abcd_values(zeros((4,) * 6, ScalarKind.RATIONAL), acs)
        assert set(values) == {"A", "B", "C", "D"}
        assert all(v == 0 for v in values.values())

    def test_exact_system_n1(self):
        """Test A, B, C, D vanish on the exact Bianchi-constrained space."""
        report = verify_second_derivative_system(Dim(1), trials=2)
        assert report.exact
        assert report.subspace_dim > 0
        assert report.passed
        assert all(v == 0 for v in report.maxima.values())
        assert report.samples == report.subspace_dim + 2

    def test_larger_n_is_rejected(self):
        """Test n = 2 is a configuration error instead of a weaker check."""
        with pytest.raises(ConfigError, match="n = 1"):
            verify_second_derivative_system(Dim(2), trials=1)

    def test_rank_loss_is_diagnosed(self):
        """Test an exact rank below the float rank is reported."""
        with pytest.raises(SingularSystemError, match="below the float rank"):
            _check_rank(3, 5, 10)

    def test_full_rank_is_diagnosed(self):
        """Test a system with nothing left to evaluate is reported."""
        with pytest.raises(SingularSystemError, match="no tensors survive"):
            _check_rank(10, 10, 10)
        _check_rank(5, 5, 10)

    def test_trials_must_be_positive(self):
        """Test zero trials is a configuration error."""
        with pytest.raises(ConfigError):
            verify_second_derivative_system(Dim(1), trials=0)


def test_expected_constants_are_fractions():
    """Test tabulated constants are exact."""
    assert all(isinstance(v, Fraction) for v in EXPECTED_CONSTANTS.values())
