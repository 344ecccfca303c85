"""Tests for the planted-coloring analysis."""

import math
from fractions import Fraction

import pytest

from rgg_lab.config import LabSettings
from rgg_lab.errors import DomainError, SizeError
from rgg_lab.models import McEstimate, Pattern
from rgg_lab.patterns import (
    EDGE,
    TRIANGLE,
    WEDGE,
    canonical_class,
    complete,
    cycle,
    edge_subsets,
    enumerate_classes,
    pattern_from_key,
    star,
)
from rgg_lab.pcol import (
    PColParams,
    WeightEntry,
    WeightTable,
    advantage_bound_pcol,
    m_entry,
    partition_probability,
    pcol_signed_weight_exact,
    phi_pcol,
    psi,
    psi_exact,
    ratio_bound_holds,
    reconstruct_phi,
    select_q,
    set_partitions,
    triangle_coefficient,
    w_hat_bound,
    w_table,
)


def _estimate(mean: float) -> McEstimate:
    return McEstimate(mean=mean, stderr=0.0, replicates=1, seed=0)


class TestParams:
    """Tests for parameters and the cross-colour probability."""

    def test_psi(self) -> None:
        """Test psi_q for a few colour counts."""
        assert psi(3) == 0.25
        assert psi(5) == 0.375
        assert psi_exact(3) == Fraction(1, 4)

    def test_small_q_rejected(self) -> None:
        """Test that q < 3 is rejected everywhere."""
        with pytest.raises(DomainError):
            psi(2)
        with pytest.raises(DomainError):
            PColParams(n=10, q=2)
        with pytest.raises(DomainError):
            PColParams(n=1, q=3)

    def test_params_psi(self) -> None:
        """Test the convenience property."""
        assert PColParams(n=10, q=3).psi == 0.25


class TestPartitions:
    """Tests for set partition enumeration."""

    @pytest.mark.parametrize(("k", "bell"), [(0, 1), (1, 1), (3, 5), (4, 15), (5, 52)])
    def test_bell_numbers(self, k: int, bell: int) -> None:
        """Test that the number of restricted-growth strings is the Bell number."""
        assert len(list(set_partitions(k))) == bell

    def test_restricted_growth(self) -> None:
        """Test that every string starts at 0 and grows by at most one."""
        for labels in set_partitions(4):
            assert labels[0] == 0
            for i in range(1, 4):
                assert labels[i] <= max(labels[:i]) + 1

    @pytest.mark.parametrize("q", [3, 4, 7])
    def test_probabilities_sum_to_one(self, q: int) -> None:
        """Test that partition probabilities form a distribution."""
        total = sum(
            partition_probability(max(labels) + 1, 4, q, exact=True)
            for labels in set_partitions(4)
        )
        assert total == 1

    def test_too_many_blocks(self) -> None:
        """Test that partitions with more blocks than colours are impossible."""
        assert partition_probability(4, 4, 3) == 0.0


class TestSignedWeights:
    """Tests for exact planted-coloring signed weights."""

    def test_triangle_at_half(self) -> None:
        """Test the signed triangle weight for three colours."""
        assert pcol_signed_weight_exact(TRIANGLE, 3, 0.5, exact=True) == Fraction(1, 32)

    def test_edge_has_density_half(self) -> None:
        """Test that the single-edge weight vanishes at bias 1/2."""
        for q in (3, 4, 9):
            assert pcol_signed_weight_exact(EDGE, q, 0.5, exact=True) == 0

    @pytest.mark.parametrize("h", [WEDGE, star(3)])
    def test_leaf_vanishes(self, h: Pattern) -> None:
        """Test that patterns with a leaf have zero weight at bias 1/2."""
        assert pcol_signed_weight_exact(h, 4, Fraction(1, 2), exact=True) == 0

    @pytest.mark.parametrize("q", [3, 4, 5, 8])
    def test_triangle_closed_form(self, q: int) -> None:
        """Test the closed form against enumeration and against 1 / (8 (q - 1)^2)."""
        value = pcol_signed_weight_exact(TRIANGLE, q, 0.5)
        assert triangle_coefficient(q) == pytest.approx(value, rel=1e-12)
        assert value == pytest.approx(1.0 / (8.0 * (q - 1) ** 2), rel=1e-12)

    def test_exact_vertex_limit(self) -> None:
        """Test that exact mode stops at six vertices."""
        with pytest.raises(SizeError):
            pcol_signed_weight_exact(cycle(7), 3, 0.5, exact=True)

    def test_float_matches_exact(self) -> None:
        """Test that float and rational modes agree."""
        exact = pcol_signed_weight_exact(cycle(4), 3, 0.5, exact=True)
        assert pcol_signed_weight_exact(cycle(4), 3, 0.5) == pytest.approx(float(exact))


class TestSelectQ:
    """Tests for matching the colour count to a triangle estimate."""

    def test_exact_match(self) -> None:
        """Test that the three-colour value selects q = 3."""
        assert select_q(100, _estimate(1 / 32)) == 3

    def test_rounds_up(self) -> None:
        """Test that a fractional solution is rounded up."""
        assert select_q(100, _estimate(triangle_coefficient(5.5))) == 6

    def test_large_estimate_clamps_to_three(self) -> None:
        """Test that estimates above the q = 2 value select q = 3."""
        assert select_q(100, _estimate(0.5)) == 3

    def test_tiny_estimate_clamps_to_range(self) -> None:
        """Test that tiny estimates select the top of the search range."""
        assert select_q(10, _estimate(1e-30)) == 100

    def test_non_positive_rejected(self) -> None:
        """Test that the estimate must be positive."""
        with pytest.raises(DomainError):
            select_q(100, _estimate(0.0))


class TestMEntries:
    """Tests for M entries and planted-coloring coefficients."""

    def test_diagonal_triangle(self) -> None:
        """Test that M_{H,H} is the proper-colouring probability."""
        assert m_entry(TRIANGLE.edges, TRIANGLE, 3, exact=True) == Fraction(2, 9)

    def test_odd_exponent_is_float(self) -> None:
        """Test that odd scale exponents leave the rationals."""
        value = m_entry((), EDGE, 3, exact=True)
        assert isinstance(value, float)
        assert value == pytest.approx(1 / math.sqrt(3))

    @pytest.mark.parametrize("h", [EDGE, TRIANGLE, cycle(4), WEDGE])
    @pytest.mark.parametrize("q", [3, 5])
    def test_phi_is_normalized_weight(self, h: Pattern, q: int) -> None:
        """Test that phi_pcol is the normalized signed weight at bias psi_q."""
        bias = psi(q)
        raw = pcol_signed_weight_exact(h, q, bias)
        expected = raw / (bias * (1.0 - bias)) ** (h.m / 2)
        assert phi_pcol(h, q) == pytest.approx(expected, abs=1e-12)

    def test_foreign_edge_rejected(self) -> None:
        """Test that K must be inside H."""
        with pytest.raises(DomainError):
            m_entry([(0, 3)], TRIANGLE, 3)

    @pytest.mark.parametrize("h", [TRIANGLE, WEDGE, cycle(4), complete(4)])
    @pytest.mark.parametrize("q", [3, 4, 6])
    def test_ratio_bound(self, h: Pattern, q: int) -> None:
        """Test the ratio bound for every nonempty K in a connected H."""
        for sub in edge_subsets(h, h.m):
            assert ratio_bound_holds(sub, h, q)

    def test_ratio_bound_needs_edges(self) -> None:
        """Test that the ratio bound is not stated for empty K."""
        with pytest.raises(DomainError):
            ratio_bound_holds((), TRIANGLE, 3)


class TestWeightTable:
    """Tests for the weight recursion and advantage bound."""

    def test_identical_models_have_zero_weights(self) -> None:
        """Test that feeding planted-coloring coefficients gives w = 0."""
        table = w_table(4, 2, 3, lambda h: phi_pcol(h, 3))
        assert len(table.entries) == 3
        assert all(entry.w == pytest.approx(0.0, abs=1e-12) for entry in table.entries)
        bound = advantage_bound_pcol(table)
        assert bound.bounded
        assert bound.total == pytest.approx(0.0, abs=1e-20)

    def test_copies(self) -> None:
        """Test the class multiplicities in K_4."""
        table = w_table(4, 2, 3, lambda h: 0.0)
        copies = {entry.label: entry.copies for entry in table.entries}
        assert sorted(copies.values()) == [3, 6, 12]

    def test_reconstruction(self) -> None:
        """Test that summing w_K M_{K,H} reproduces the input coefficients."""
        source = lambda h: 0.1**h.m  # noqa: E731
        table = w_table(5, 3, 3, source)
        for h in enumerate_classes(5, 3):
            assert reconstruct_phi(table, h) == pytest.approx(source(h), abs=1e-12)

    def test_w_hat_factorizes_over_components(self) -> None:
        """Test that a two-component class has the product of its components' w-hat."""
        source = lambda h: 0.1**h.m  # noqa: E731
        table = w_table(5, 4, 5, source)
        union = table.entry(canonical_class(TRIANGLE.disjoint_union(EDGE))).w_hat
        triangle = table.entry(canonical_class(TRIANGLE)).w_hat
        edge = table.entry(canonical_class(EDGE)).w_hat
        assert union == pytest.approx(triangle * edge, rel=1e-9)
        wedge_edge = table.entry(canonical_class(WEDGE.disjoint_union(EDGE))).w_hat
        assert wedge_edge == pytest.approx(
            table.entry(canonical_class(WEDGE)).w_hat * edge, rel=1e-9, abs=1e-15
        )

    @pytest.mark.parametrize("q", [3, 5])
    def test_w_hat_within_bound(self, q: int) -> None:
        """Test that every entry respects the growth bound on w-hat."""
        table = w_table(5, 3, q, lambda h: 0.1**h.m)
        for entry in table.entries:
            h = pattern_from_key(entry.key)
            assert abs(entry.w_hat) <= w_hat_bound(h, 5, q), entry.label

    def test_w_hat_bound_closed_form(self) -> None:
        """Test the bound for a single edge."""
        assert w_hat_bound(EDGE, 100, 4) == pytest.approx(12.0 * (math.log(100) ** 9 / 4) ** 1.5)

    def test_edge_weight(self) -> None:
        """Test that the single-edge weight is the coefficient gap."""
        table = w_table(4, 1, 3, lambda h: 0.2)
        (entry,) = table.entries
        assert entry.w_hat == pytest.approx(0.2 - 1 / math.sqrt(3))
        assert entry.m_diag == pytest.approx(2 / 3)
        assert table.w(None) == 1.0

    def test_budget(self) -> None:
        """Test that oversized universes are refused."""
        with pytest.raises(SizeError, match="budget"):
            w_table(10, 3, 3, lambda h: 0.0, settings=LabSettings(embedding_budget=100))


class TestAdvantageBound:
    """Tests for summing squared weights."""

    @staticmethod
    def _table(*weights: float) -> WeightTable:
        keys = [canonical_class(EDGE), canonical_class(WEDGE), canonical_class(TRIANGLE)]
        entries = tuple(
            WeightEntry(
                key=key,
                label=str(i),
                copies=2,
                phi_rgg=0.0,
                phi_pcol=0.0,
                m_diag=1.0,
                w_hat=w,
                w=w,
            )
            for i, (key, w) in enumerate(zip(keys, weights, strict=False))
        )
        return WeightTable(degree=3, universe=5, q=3, psi=0.25, entries=entries)

    def test_finite(self) -> None:
        """Test the weighted sum of squares."""
        bound = advantage_bound_pcol(self._table(0.5, 0.25))
        assert bound.total == pytest.approx(2 * 0.25 + 2 * 0.0625)
        assert [c.value for c in bound.contributions] == [0.5, 0.125]

    def test_infinite(self) -> None:
        """Test that an infinite weight names the offending class."""
        bound = advantage_bound_pcol(self._table(0.5, math.inf, 0.1))
        assert not bound.bounded
        assert math.isinf(bound.total)
        assert bound.offending == "1"
        assert len(bound.contributions) == 1
