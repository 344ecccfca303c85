"""Tests for graph samplers, masks and fragile-edge diagnostics."""

import math

import numpy as np
import pytest
from scipy import special

from rgg_lab.distributions import bartlett_sample, gaussian_product_threshold, spherical_threshold
from rgg_lab.errors import DomainError
from rgg_lab.invariants import covered_edges
from rgg_lab.models import Graph, Mask, ModelParams, Ordering
from rgg_lab.patterns import TRIANGLE, cycle
from rgg_lab.rng import stream
from rgg_lab.samplers import (
    GraphModel,
    apply_mask,
    fragile_delta,
    fragile_diagnostics,
    fragile_rates,
    sample_er,
    sample_graph,
    sample_pcol,
    sample_rgg_gaussian,
    sample_rgg_sphere,
    star_union_mask,
)


class TestGraphModel:
    """Tests for GraphModel."""

    def test_unknown_kind(self) -> None:
        """Test that unknown models are rejected."""
        with pytest.raises(DomainError, match="unknown model"):
            GraphModel(kind="lattice")

    def test_pcol_needs_q(self) -> None:
        """Test that planted coloring requires a colour count."""
        with pytest.raises(DomainError):
            GraphModel(kind="pcol")

    def test_density(self) -> None:
        """Test that planted coloring always has density 1/2."""
        assert GraphModel(kind="pcol", p=0.2, q=5).density == 0.5
        assert GraphModel(kind="er", p=0.2).params(10) == ModelParams(n=10, d=1, p=0.2)


class TestErdosRenyi:
    """Tests for the Erdos-Renyi sampler."""

    def test_density(self) -> None:
        """Test the edge density of a large sample."""
        g = sample_er(ModelParams(n=200, d=1, p=0.3), stream(1))
        assert g.density == pytest.approx(0.3, abs=0.02)

    def test_deterministic(self) -> None:
        """Test that a seed fixes the sample."""
        params = ModelParams(n=30, d=1, p=0.5)
        a = sample_er(params, stream(4))
        b = sample_er(params, stream(4))
        assert np.array_equal(a.adjacency, b.adjacency)

    def test_full_density_gives_complete_graph(self) -> None:
        """Test that p = 1 connects every pair."""
        g = sample_er(ModelParams(n=12, d=1, p=1.0), stream(5))
        assert g.edge_count == 66

    def test_full_density_refused_by_geometric_samplers(self) -> None:
        """Test that the geometric thresholds still need p < 1."""
        with pytest.raises(DomainError):
            sample_rgg_sphere(ModelParams(n=5, d=3, p=1.0), stream(5))
        with pytest.raises(DomainError):
            sample_rgg_gaussian(ModelParams(n=5, d=3, p=1.0), stream(5))


class TestGeometric:
    """Tests for the spherical and Gaussian samplers."""

    def test_gram_frame_when_small(self) -> None:
        """Test that n <= d samples in the Bartlett frame with unit rows."""
        graph, latent = sample_rgg_sphere(ModelParams(n=12, d=40, p=0.3), stream(2))
        assert latent.frame == "gram"
        assert latent.vectors.shape == (12, 12)
        assert np.allclose(np.linalg.norm(latent.vectors, axis=1), 1.0)
        assert graph.n == 12

    def test_ambient_frame_when_large(self) -> None:
        """Test that n > d samples raw vectors."""
        _, latent = sample_rgg_gaussian(ModelParams(n=20, d=5, p=0.3), stream(2))
        assert latent.frame == "ambient"
        assert latent.kind == "gaussian"
        assert latent.vectors.shape == (20, 5)

    def test_sphere_edges_follow_threshold(self) -> None:
        """Test that spherical edges are exactly the pairs above tau."""
        params = ModelParams(n=25, d=8, p=0.2)
        graph, latent = sample_rgg_sphere(params, stream(5))
        gram = latent.gram()
        tau = spherical_threshold(0.2, 8)
        for u, v in [(0, 1), (3, 7), (10, 24)]:
            assert bool(graph.adjacency[u, v]) == bool(gram[u, v] >= tau)

    def test_gaussian_edges_follow_threshold(self) -> None:
        """Test that Gaussian edges are exactly the pairs above rho."""
        params = ModelParams(n=15, d=30, p=0.3)
        graph, latent = sample_rgg_gaussian(params, stream(6))
        rho = gaussian_product_threshold(0.3, 30)
        expected = np.triu(latent.gram() >= rho, k=1)
        assert np.array_equal(np.triu(graph.adjacency, k=1), expected)

    @pytest.mark.parametrize("kind", ["sphere", "gauss"])
    def test_mean_density(self, kind: str) -> None:
        """Test that the mean density over samples matches p."""
        model = GraphModel(kind=kind, d=60, p=0.2)
        densities = [sample_graph(model, 40, stream(8, i)).density for i in range(20)]
        assert float(np.mean(densities)) == pytest.approx(0.2, abs=0.03)

    def test_deterministic(self) -> None:
        """Test that a seed fixes the sample and its latent vectors."""
        params = ModelParams(n=10, d=20, p=0.5)
        a, la = sample_rgg_sphere(params, stream(7))
        b, lb = sample_rgg_sphere(params, stream(7))
        assert np.array_equal(a.adjacency, b.adjacency)
        assert np.array_equal(la.vectors, lb.vectors)

    def test_strong_geometry_has_triangles(self) -> None:
        """Test that low dimension produces many more triangles than ER."""
        model = GraphModel(kind="sphere", d=2, p=0.5)
        counts: list[float] = []
        for i in range(5):
            a = sample_graph(model, 150, stream(1, i)).adjacency.astype(float)
            counts.append(float(np.trace(a @ a @ a)) / 6)
        assert float(np.mean(counts)) > 1.2 * math.comb(150, 3) / 8


class TestPlantedColoring:
    """Tests for the planted coloring sampler."""

    def test_small_q_rejected(self) -> None:
        """Test that q must be at least 3."""
        with pytest.raises(DomainError, match="q >= 3"):
            sample_pcol(10, 2, stream(0))

    def test_same_colour_adjacent(self) -> None:
        """Test that same-colour pairs are always adjacent."""
        sample = sample_pcol(40, 4, stream(3))
        labels = sample.labels
        assert set(labels.tolist()) <= {0, 1, 2, 3}
        same = labels[:, None] == labels[None, :]
        np.fill_diagonal(same, False)
        assert np.all(sample.graph.adjacency[same])

    def test_density_half(self) -> None:
        """Test that the expected density is 1/2."""
        densities = [sample_pcol(60, 5, stream(9, i)).graph.density for i in range(20)]
        assert float(np.mean(densities)) == pytest.approx(0.5, abs=0.03)

    def test_sample_graph_dispatch(self) -> None:
        """Test that sample_graph draws planted coloring graphs."""
        g = sample_graph(GraphModel(kind="pcol", q=3), 12, stream(1))
        assert isinstance(g, Graph)
        assert g.n == 12


class TestMasks:
    """Tests for masks."""

    def test_apply_mask(self) -> None:
        """Test that masked states copy the graph on observed pairs."""
        g = Graph.from_edges(3, [(0, 1)])
        masked = apply_mask(g, Mask.from_edges(3, [(0, 1), (1, 2)]))
        assert masked.states == (True, False)

    def test_apply_mask_size_mismatch(self) -> None:
        """Test that vertex counts must agree."""
        with pytest.raises(DomainError):
            apply_mask(Graph.complete(4), Mask.complete(3))

    def test_star_union(self) -> None:
        """Test the star-union layout."""
        mask = star_union_mask(10, 3)
        assert mask.n == 12
        assert mask.edges[:3] == ((0, 1), (0, 2), (0, 3))
        assert mask.edges[3] == (4, 5)

    @pytest.mark.parametrize(("m", "a"), [(10, 0), (2, 3)])
    def test_star_union_invalid(self, m: int, a: int) -> None:
        """Test that impossible splits are rejected."""
        with pytest.raises(DomainError):
            star_union_mask(m, a)


class TestFragile:
    """Tests for fragile-edge diagnostics."""

    def test_delta(self) -> None:
        """Test the window formula."""
        assert fragile_delta(3, 3, 100, 2.0) == pytest.approx(4 * 9 * math.log(100) / 100)

    def test_decomposition_matches_inner_products(self) -> None:
        """Test that Z_ji + Q_ji reproduces the Gaussian inner product."""
        frame = bartlett_sample(5, 50, stream(11))
        pi = Ordering.identity(5)
        h = cycle(5)
        report = fragile_diagnostics(frame, h, pi, ModelParams(n=5, d=50, p=0.3))
        gram = frame.gram()
        norms = np.sqrt(np.diag(gram))
        for e, (u, v) in enumerate(h.edges):
            inner = gram[u, v]
            assert report.z_values[e] + report.q_values[e] == pytest.approx(inner)
            spherical = inner / (norms[u] * norms[v])
            assert report.z_values[e] + report.spherical_q_values[e] == pytest.approx(spherical)
            assert report.adjacent[e] == (inner >= report.threshold)

    def test_boundary_is_covered_set(self) -> None:
        """Test that the boundary is what the fragile set covers."""
        frame = bartlett_sample(5, 40, stream(2))
        pi = Ordering.from_sequence([2, 0, 4, 1, 3])
        report = fragile_diagnostics(frame, cycle(5), pi, ModelParams(n=5, d=40, p=0.5), 1.5)
        assert report.boundary == covered_edges(cycle(5), pi, report.fragile_set)

    def test_reasonable_at_high_dimension(self) -> None:
        """Test that typical frames are reasonable when d is large."""
        frame = bartlett_sample(3, 10000, stream(1))
        params = ModelParams(n=3, d=10000, p=0.5)
        report = fragile_diagnostics(frame, TRIANGLE, Ordering.identity(3), params)
        assert report.reasonable
        assert report.tail_bound == pytest.approx(9 * math.exp(-3 * math.log(10000)))

    def test_unreasonable_with_tiny_constant(self) -> None:
        """Test that a tiny radius makes the configuration unreasonable."""
        frame = bartlett_sample(3, 100, stream(1))
        report = fragile_diagnostics(
            frame, TRIANGLE, Ordering.identity(3), ModelParams(n=3, d=100, p=0.5), 0.01
        )
        assert not report.reasonable

    def test_all_fragile_with_huge_constant(self) -> None:
        """Test that a huge window makes every edge fragile and the boundary empty."""
        frame = bartlett_sample(3, 100, stream(1))
        report = fragile_diagnostics(
            frame, TRIANGLE, Ordering.identity(3), ModelParams(n=3, d=100, p=0.5), 100.0
        )
        assert report.fragile_set == TRIANGLE.edge_set()
        assert report.boundary == frozenset()

    def test_spherical_kind_uses_tau(self) -> None:
        """Test that the spherical kind centres on tau."""
        frame = bartlett_sample(3, 30, stream(1))
        report = fragile_diagnostics(
            frame, TRIANGLE, Ordering.identity(3), ModelParams(n=3, d=30, p=0.2),
            kind="spherical",
        )
        assert report.threshold == spherical_threshold(0.2, 30)

    def test_pattern_larger_than_frame(self) -> None:
        """Test that the frame must hold every pattern vertex."""
        frame = bartlett_sample(3, 30, stream(1))
        with pytest.raises(DomainError):
            fragile_diagnostics(
                frame, cycle(4), Ordering.identity(4), ModelParams(n=4, d=30, p=0.5)
            )

    def test_rates_match_gaussian_window(self) -> None:
        """Test that fragile rates match the N(0, 1/d) mass of the window."""
        d = 100
        params = ModelParams(n=3, d=d, p=0.5)
        result = fragile_rates(
            TRIANGLE, Ordering.identity(3), params, 20000, stream(5), c_const=0.3
        )
        half = result.delta_value * math.sqrt(d)
        expected = float(special.ndtr(half) - special.ndtr(-half))
        assert len(result.rates) == 3
        assert len(result.correlations) == 3
        for rate in result.rates:
            assert rate == pytest.approx(expected, abs=0.015)
        for corr in result.correlations:
            assert abs(corr) < 0.05
