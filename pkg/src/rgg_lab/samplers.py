"""Graph-model samplers, masks and fragile-edge diagnostics.

Four models are supported:

- ``er``: Erdos-Renyi ``G(n, p)``.
- ``sphere``: spherical random geometric graph, edges where ``<V_i, V_j> >= tau``.
- ``gauss``: Gaussian random geometric graph, edges where ``<Z_i, Z_j> >= rho``.
- ``pcol``: planted coloring with ``q`` colours (see :mod:`rgg_lab.pcol`).

Geometric samplers work in the Bartlett frame (triangular Gram-Schmidt
coordinates) whenever ``n <= d`` and with raw ``N(0, I/d)`` rows otherwise; both
are exact in law. Spherical vectors are normalised Gaussian vectors. Ties at the
threshold count as edges.

Every sampler takes an explicit generator, so ``(params, seed)`` fixes the output
byte for byte.
"""

from __future__ import annotations

import math
from typing import Literal

import numpy as np
import numpy.typing as npt
from weakincentives import FrozenDataclass
from weakincentives.runtime.logging import get_logger

from rgg_lab.distributions import (
    bartlett_batch,
    gaussian_product_threshold,
    spherical_threshold,
)
from rgg_lab.errors import DomainError
from rgg_lab.invariants import covered_edges
from rgg_lab.models import (
    BartlettFrame,
    ColoredGraph,
    Edge,
    EdgeSet,
    FloatMatrix,
    Graph,
    LatentConfiguration,
    Mask,
    MaskedGraph,
    ModelParams,
    Ordering,
    Pattern,
)
from rgg_lab.pcol import psi

logger = get_logger(__name__)

ModelKind = Literal["er", "sphere", "gauss", "pcol"]


@FrozenDataclass()
class GraphModel:
    """A model name with the parameters it needs (``n`` is supplied per sample).

    Attributes:
        kind: ``er``, ``sphere``, ``gauss`` or ``pcol``.
        d: Latent dimension for the geometric models.
        p: Edge density; planted coloring always has density 1/2.
        q: Colour count for ``pcol``.
    """

    kind: str
    d: int = 1
    p: float = 0.5
    q: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("er", "sphere", "gauss", "pcol"):
            raise DomainError(f"unknown model {self.kind!r}")
        if self.kind == "pcol" and self.q is None:
            raise DomainError("the planted coloring model needs q")

    @property
    def density(self) -> float:
        return 0.5 if self.kind == "pcol" else self.p

    def params(self, n: int) -> ModelParams:
        return ModelParams(n=n, d=self.d, p=self.density)


def _from_upper(n: int, upper: npt.NDArray[np.bool_]) -> Graph:
    adj = np.zeros((n, n), dtype=bool)
    rows, cols = np.triu_indices(n, k=1)
    adj[rows, cols] = upper
    adj |= adj.T
    return Graph.from_matrix(adj)


def sample_er(params: ModelParams, rng: np.random.Generator) -> Graph:
    """Each pair present independently with probability ``params.p``."""
    pairs = params.n * (params.n - 1) // 2
    return _from_upper(params.n, rng.random(pairs) < params.p)


def _latent(
    n: int, d: int, rng: np.random.Generator, *, normalize: bool
) -> LatentConfiguration:
    if n <= d:
        vectors: FloatMatrix = bartlett_batch(n, d, 1, rng)[0]
        frame: Literal["ambient", "gram"] = "gram"
    else:
        vectors = rng.standard_normal((n, d)) / math.sqrt(d)
        frame = "ambient"
    if normalize:
        vectors = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    vectors.setflags(write=False)
    return LatentConfiguration(
        kind="spherical" if normalize else "gaussian", frame=frame, vectors=vectors
    )


def _threshold_graph(latent: LatentConfiguration, threshold: float) -> Graph:
    adj = latent.gram() >= threshold
    np.fill_diagonal(adj, False)
    # Round-off can break symmetry of the Gram matrix in the last bit.
    adj = np.triu(adj, k=1)
    return Graph.from_matrix(adj | adj.T)


def sample_rgg_sphere(
    params: ModelParams, rng: np.random.Generator
) -> tuple[Graph, LatentConfiguration]:
    """Spherical random geometric graph with its latent vectors.

    Example:
        >>> from rgg_lab.rng import stream
        >>> graph, latent = sample_rgg_sphere(ModelParams(n=8, d=16, p=0.5), stream(3))
        >>> latent.frame
        'gram'
    """
    tau = spherical_threshold(params.p, params.d)
    latent = _latent(params.n, params.d, rng, normalize=True)
    return _threshold_graph(latent, tau), latent


def sample_rgg_gaussian(
    params: ModelParams, rng: np.random.Generator
) -> tuple[Graph, LatentConfiguration]:
    """Gaussian random geometric graph with its latent vectors."""
    rho = gaussian_product_threshold(params.p, params.d)
    latent = _latent(params.n, params.d, rng, normalize=False)
    return _threshold_graph(latent, rho), latent


def sample_pcol(n: int, q: int, rng: np.random.Generator) -> ColoredGraph:
    """Planted coloring: same-colour pairs always adjacent, others with probability ``psi_q``.

    Raises:
        DomainError: If ``q < 3`` (``q = 2`` leaves no cross-colour edges) or ``n < 2``.
    """
    if q < 3:
        raise DomainError(f"planted coloring needs q >= 3, got {q}")
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    labels = rng.integers(0, q, size=n).astype(np.int64)
    rows, cols = np.triu_indices(n, k=1)
    cross = rng.random(rows.size) < psi(q)
    upper = (labels[rows] == labels[cols]) | cross
    labels.setflags(write=False)
    return ColoredGraph(graph=_from_upper(n, upper), q=q, labels=labels)


def sample_graph(model: GraphModel, n: int, rng: np.random.Generator) -> Graph:
    """Draw one graph from ``model`` on ``n`` vertices."""
    if model.kind == "pcol":
        assert model.q is not None
        return sample_pcol(n, model.q, rng).graph
    params = model.params(n)
    if model.kind == "er":
        return sample_er(params, rng)
    if model.kind == "sphere":
        return sample_rgg_sphere(params, rng)[0]
    return sample_rgg_gaussian(params, rng)[0]


# -- masks ---------------------------------------------------------------------------


def apply_mask(g: Graph, m: Mask) -> MaskedGraph:
    """Observe ``g`` on the pairs of ``m``; every other pair becomes unknown.

    Raises:
        DomainError: If the vertex counts differ.
    """
    if g.n != m.n:
        raise DomainError(f"graph has {g.n} vertices but the mask has {m.n}")
    return MaskedGraph(mask=m, states=tuple(bool(g.adjacency[u, v]) for u, v in m.edges))


def star_union_mask(m_edges: int, a: int) -> Mask:
    """``a`` vertex-disjoint stars with ``m_edges // a`` leaves each.

    Star ``i`` has its centre at vertex ``i * (leaves + 1)`` followed by its leaves.

    Raises:
        DomainError: If ``a < 1`` or ``m_edges // a < 1``.

    Example:
        >>> len(star_union_mask(10, 3).edges)
        9
    """
    if a < 1:
        raise DomainError(f"star count must be >= 1, got {a}")
    leaves = m_edges // a
    if leaves < 1:
        raise DomainError(f"{m_edges} edges cannot be split into {a} nonempty stars")
    edges: list[Edge] = []
    for i in range(a):
        center = i * (leaves + 1)
        edges.extend((center, center + j) for j in range(1, leaves + 1))
    return Mask(n=a * (leaves + 1), edges=tuple(edges))


# -- fragile edges -------------------------------------------------------------------


@FrozenDataclass()
class FragileReport:
    """Per-configuration fragility diagnostics for one pattern copy.

    Pattern vertex ``v`` is carried by frame row ``ordering.ranks[v]``. Tuples
    indexed per edge follow ``pattern.edges``.

    Attributes:
        ordering: The ordering used to orient edges.
        delta_value: ``Delta = C^2 k m log(d) / d``.
        radius: ``R = C sqrt(m log(d) / d)`` bounding the coordinates.
        threshold: Edge threshold (``rho`` or ``tau``) the fragile window is centred on.
        reasonable: Whether every off-diagonal coordinate and ``Z_uu - 1`` lies within
            ``R`` and every dependence term lies within ``Delta``.
        fragile_set: Edges whose coordinate ``Z_ji`` lies in ``[theta - Delta, theta + Delta]``.
        boundary: Edges outside ``fragile_set`` covered by it under ``ordering``.
        z_values: The coordinates ``Z_ji``.
        q_values: Gaussian dependence terms ``Q_ji``.
        spherical_q_values: Spherical dependence terms.
        adjacent: Whether each pair is an edge of the model at this configuration.
        tail_bound: ``k^2 exp(-C' m log d)``, the bound on the unreasonable mass.
    """

    ordering: Ordering
    delta_value: float
    radius: float
    threshold: float
    reasonable: bool
    fragile_set: EdgeSet
    boundary: EdgeSet
    z_values: tuple[float, ...]
    q_values: tuple[float, ...]
    spherical_q_values: tuple[float, ...]
    adjacent: tuple[bool, ...]
    tail_bound: float


def fragile_delta(k: int, m: int, d: int, c_const: float = 1.0) -> float:
    """``C^2 k m log(d) / d``."""
    return c_const**2 * k * m * math.log(d) / d


def _rows(ordering: Ordering, edge: Edge) -> tuple[int, int]:
    high, low = ordering.orient(edge)
    return ordering.ranks[high], ordering.ranks[low]


def fragile_diagnostics(
    frame: BartlettFrame,
    pattern: Pattern,
    ordering: Ordering,
    params: ModelParams,
    c_const: float = 1.0,
    *,
    kind: Literal["gaussian", "spherical"] = "gaussian",
    c_prime: float = 1.0,
) -> FragileReport:
    """Dependence terms, the fragile set and the reasonable-configuration flag.

    For an edge with rows ``i < j`` the Gaussian inner product splits as
    ``<Z_i, Z_j> = Z_ji + Q_ji`` with
    ``Q_ji = sum_{l < i} Z_il Z_jl + Z_ji (Z_ii - 1)``; the spherical form divides
    by ``N = |Z_i| |Z_j|`` giving ``Q_ji / N + Z_ji (1/N - 1)``.

    Raises:
        DomainError: If the pattern has more vertices than the frame or the
            ordering does not match the pattern.
    """
    if pattern.k > frame.k:
        raise DomainError(f"pattern has {pattern.k} vertices but the frame only {frame.k}")
    if len(ordering.ranks) != pattern.k:
        raise DomainError("ordering length does not match the pattern")
    d = frame.d
    coords = frame.coords
    delta = fragile_delta(pattern.k, pattern.m, d, c_const)
    radius = c_const * math.sqrt(pattern.m * math.log(d) / d)
    if kind == "gaussian":
        threshold = gaussian_product_threshold(params.p, d)
    else:
        threshold = spherical_threshold(params.p, d)
    norms = np.linalg.norm(coords, axis=1)

    z_values: list[float] = []
    q_values: list[float] = []
    sq_values: list[float] = []
    adjacent: list[bool] = []
    fragile: set[Edge] = set()
    for edge in pattern.edges:
        j, i = _rows(ordering, edge)
        z = float(coords[j, i])
        q = float(np.dot(coords[i, :i], coords[j, :i])) + z * (float(coords[i, i]) - 1.0)
        scale = float(norms[i] * norms[j])
        sq = q / scale + z * (1.0 / scale - 1.0)
        z_values.append(z)
        q_values.append(q)
        sq_values.append(sq)
        adjacent.append(z + (q if kind == "gaussian" else sq) >= threshold)
        if threshold - delta <= z <= threshold + delta:
            fragile.add(edge)

    rows = coords[: pattern.k, : pattern.k]
    off_diagonal = rows[np.tril_indices(pattern.k, k=-1)]
    diagonal = np.diag(rows) - 1.0
    coords_ok = bool(np.all(np.abs(off_diagonal) <= radius) and np.all(np.abs(diagonal) <= radius))
    terms = q_values if kind == "gaussian" else [*q_values, *sq_values]
    reasonable = coords_ok and all(abs(t) <= delta for t in terms)
    fragile_set = frozenset(fragile)
    return FragileReport(
        ordering=ordering,
        delta_value=delta,
        radius=radius,
        threshold=threshold,
        reasonable=reasonable,
        fragile_set=fragile_set,
        boundary=covered_edges(pattern, ordering, fragile_set),
        z_values=tuple(z_values),
        q_values=tuple(q_values),
        spherical_q_values=tuple(sq_values),
        adjacent=tuple(adjacent),
        tail_bound=pattern.k**2 * math.exp(-c_prime * pattern.m * math.log(d)),
    )


@FrozenDataclass()
class FragileRates:
    """Empirical fragility over many Bartlett frames.

    Attributes:
        frames: Number of frames drawn.
        delta_value: The window half-width used.
        rates: Fraction of frames in which each pattern edge was fragile.
        correlations: Sample correlation of the fragile indicators of each pair of
            distinct edges, in ``itertools.combinations`` order over ``pattern.edges``.
    """

    frames: int
    delta_value: float
    rates: tuple[float, ...]
    correlations: tuple[float, ...]


def fragile_rates(
    pattern: Pattern,
    ordering: Ordering,
    params: ModelParams,
    frames: int,
    rng: np.random.Generator,
    *,
    c_const: float = 1.0,
) -> FragileRates:
    """Estimate per-edge fragile probabilities of the Gaussian model over ``frames`` draws."""
    delta = fragile_delta(pattern.k, pattern.m, params.d, c_const)
    rho = gaussian_product_threshold(params.p, params.d)
    coords = bartlett_batch(pattern.k, params.d, frames, rng)
    indicators = np.empty((pattern.m, frames), dtype=np.float64)
    for e, edge in enumerate(pattern.edges):
        j, i = _rows(ordering, edge)
        indicators[e] = np.abs(coords[:, j, i] - rho) <= delta
    rates = indicators.mean(axis=1)
    correlations: list[float] = []
    for a in range(pattern.m):
        for b in range(a + 1, pattern.m):
            correlations.append(_correlation(indicators[a], indicators[b]))
    logger.debug(
        "Fragile rates estimated.",
        event="samplers.fragile.rates",
        context={"frames": frames, "delta": delta, "edges": pattern.m},
    )
    return FragileRates(
        frames=frames,
        delta_value=delta,
        rates=tuple(float(r) for r in rates),
        correlations=tuple(correlations),
    )


def _correlation(xs: npt.NDArray[np.float64], ys: npt.NDArray[np.float64]) -> float:
    if xs.std() == 0.0 or ys.std() == 0.0:
        return 0.0
    return float(np.corrcoef(xs, ys)[0, 1])
