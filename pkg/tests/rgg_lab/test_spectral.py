"""Tests for eigenvalue summaries, trace moments and the regime experiment."""

import itertools
import math

import numpy as np
import pytest

from rgg_lab.config import LabSettings
from rgg_lab.errors import DomainError, SizeError
from rgg_lab.models import Graph, ModelParams
from rgg_lab.rng import stream
from rgg_lab.samplers import sample_er
from rgg_lab.spectral import (
    centered_trace_moment,
    eigen_summary,
    lambda2_regime_experiment,
    regime_bound,
    trace_bound,
    trace_walk_expansion,
)


def _all_graphs(n: int) -> list[Graph]:
    pairs = list(itertools.combinations(range(n), 2))
    return [
        Graph.from_edges(n, [e for e, keep in zip(pairs, bits, strict=True) if keep])
        for bits in itertools.product((False, True), repeat=len(pairs))
    ]


class TestEigenSummary:
    """Tests for eigen_summary."""

    def test_complete_graph(self) -> None:
        """Test the spectrum of K5 and of its centered matrix."""
        s = eigen_summary(Graph.complete(5))
        assert s.lambda1 == pytest.approx(4.0)
        assert s.lambda2 == pytest.approx(-1.0)
        assert s.centered_lambda1 == pytest.approx(1.5)
        assert s.d is None and s.seed is None

    def test_deflation_inequality(self) -> None:
        """Test that lambda_2 never exceeds the centered top eigenvalue."""
        for i in range(5):
            s = eigen_summary(sample_er(ModelParams(n=30, d=1, p=0.5), stream(2, i)))
            assert s.lambda2 <= s.centered_lambda1 + 1e-8

    def test_iterative_matches_dense(self) -> None:
        """Test that the iterative solver agrees with the dense one."""
        g = sample_er(ModelParams(n=60, d=1, p=0.5), stream(4))
        dense = eigen_summary(g)
        iterative = eigen_summary(g, iterative=True, d=7, seed=3)
        assert iterative.lambda1 == pytest.approx(dense.lambda1, rel=1e-6)
        assert iterative.lambda2 == pytest.approx(dense.lambda2, rel=1e-6)
        assert iterative.centered_lambda1 == pytest.approx(dense.centered_lambda1, abs=1e-4)
        assert (iterative.d, iterative.seed) == (7, 3)

    def test_dense_cap(self) -> None:
        """Test that large graphs need the iterative mode."""
        settings = LabSettings(dense_eig_cap=10)
        g = Graph.complete(20)
        with pytest.raises(SizeError, match="iterative"):
            eigen_summary(g, settings)
        assert eigen_summary(g, settings, iterative=True).lambda1 == pytest.approx(19.0)


class TestTraceMoments:
    """Tests for centered trace moments and their walk expansion."""

    @pytest.mark.parametrize("power", [0, 3, 66])
    def test_power_domain(self, power: int) -> None:
        """Test that the power must be even and in range."""
        with pytest.raises(DomainError):
            centered_trace_moment(Graph.complete(3), power)

    def test_second_moment_is_constant(self) -> None:
        """Test that tr((A - J/2)^2) = n^2 / 4 for every graph."""
        g = sample_er(ModelParams(n=9, d=1, p=0.5), stream(1))
        assert centered_trace_moment(g, 2) == pytest.approx(81 / 4)
        assert trace_walk_expansion(9, 2, lambda h: 0.0) == pytest.approx(81 / 4)

    @pytest.mark.parametrize(("n", "power"), [(3, 4), (4, 4), (4, 6)])
    def test_expansion_matches_erdos_renyi(self, n: int, power: int) -> None:
        """Test the expansion against the exact average over all graphs on n vertices."""
        graphs = _all_graphs(n)
        exact = math.fsum(centered_trace_moment(g, power) for g in graphs) / len(graphs)
        assert trace_walk_expansion(n, power, lambda h: 0.0) == pytest.approx(exact)

    @pytest.mark.parametrize("power", [4, 6, 8])
    def test_expansion_on_deterministic_graphs(self, power: int) -> None:
        """Test the expansion with the signed weights of the complete and empty graphs."""
        n = 5
        full = trace_walk_expansion(n, power, lambda h: 0.5**h.m)
        assert full == pytest.approx(centered_trace_moment(Graph.complete(n), power))
        empty = trace_walk_expansion(n, power, lambda h: (-0.5) ** h.m)
        assert empty == pytest.approx(centered_trace_moment(Graph.empty(n), power))

    def test_trace_bound(self) -> None:
        """Test the Markov-type bound."""
        assert trace_bound([10.0, 22.0], 16, 4) == pytest.approx(4.0)
        with pytest.raises(DomainError):
            trace_bound([], 16, 4)


class TestRegime:
    """Tests for the second-eigenvalue regime experiment."""

    def test_regime_bound(self) -> None:
        """Test the regime split and both bound forms."""
        regime, bound = regime_bound(100, 1000, 1.0, 0.0)
        assert regime == "er-like"
        assert bound == pytest.approx(math.log(100) * 10.0)
        regime, bound = regime_bound(100, 25, 1.0, 0.0)
        assert regime == "geometric"
        assert bound == pytest.approx(100 * math.log(100) / 5.0)

    def test_low_dimension_is_larger(self) -> None:
        """Test that low dimension inflates lambda_2 relative to Erdos-Renyi."""
        report = lambda2_regime_experiment(60, (2, 5000), 2, 1)
        assert report.n == 60
        assert [pt.d for pt in report.points] == [2, 5000]
        assert len(report.trials) == 4
        low, high = report.points
        assert low.ratio > high.ratio
        assert low.er_mean_abs_lambda2 == high.er_mean_abs_lambda2
        assert all(pt.bound_holds for pt in report.points)
        assert all(pt.max_abs_lambda2 >= pt.mean_abs_lambda2 for pt in report.points)

    def test_worker_count_invariant(self) -> None:
        """Test that threads do not change the report."""
        serial = lambda2_regime_experiment(30, (4, 40), 2, 5)
        pooled = lambda2_regime_experiment(30, (4, 40), 2, 5, settings=LabSettings(threads=3))
        assert serial == pooled

    def test_validation(self) -> None:
        """Test grid and trial validation."""
        with pytest.raises(DomainError):
            lambda2_regime_experiment(30, (), 2, 0)
        with pytest.raises(DomainError):
            lambda2_regime_experiment(30, (4,), 0, 0)

    def test_trials_are_seeded(self) -> None:
        """Test that every trial records its dimension and root seed."""
        report = lambda2_regime_experiment(20, (3,), 3, 11)
        assert {(s.d, s.seed) for s in report.trials} == {(3, 11)}
        assert np.isfinite([s.lambda2 for s in report.trials]).all()
