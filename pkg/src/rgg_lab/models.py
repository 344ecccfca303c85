"""Value types shared across rgg-lab.

All types are immutable frozen dataclasses. Types that hold numpy arrays are
never compared with ``==``; compare their array fields with numpy instead.

Vertices are 0-indexed everywhere. Unordered pairs are stored as ``(u, v)``
with ``u < v``.

Example:
    >>> from rgg_lab.models import ModelParams, Pattern
    >>> params = ModelParams(n=128, d=256, p=0.5)
    >>> triangle = Pattern.from_edges([(0, 1), (1, 2), (0, 2)])
    >>> triangle.k, triangle.m
    (3, 3)
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from typing import Literal

import networkx as nx
import numpy as np
import numpy.typing as npt
from weakincentives import FrozenDataclass

from rgg_lab.errors import DomainError

Edge = tuple[int, int]
EdgeSet = frozenset[Edge]
BoolMatrix = npt.NDArray[np.bool_]
FloatMatrix = npt.NDArray[np.float64]


def norm_edge(u: int, v: int) -> Edge:
    """Return the unordered pair ``{u, v}`` as ``(min, max)``."""
    return (u, v) if u < v else (v, u)


@FrozenDataclass()
class ModelParams:
    """The ``(n, d, p)`` triple defining a graph model instance.

    Attributes:
        n: Vertex count, at least 2.
        d: Latent dimension, at least 1.
        p: Target edge density in ``(0, 1]``. Only Erdos-Renyi sampling accepts
            ``p = 1``; the geometric thresholds need ``p < 1``.
    """

    n: int
    d: int
    p: float

    def __post_init__(self) -> None:
        if self.n < 2:
            raise DomainError(f"n must be >= 2, got {self.n}")
        if self.d < 1:
            raise DomainError(f"d must be >= 1, got {self.d}")
        if not 0.0 < self.p <= 1.0:
            raise DomainError(f"p must lie in (0, 1], got {self.p}")

    def in_sparse_high_dim_regime(self, epsilon: float, gamma: float) -> bool:
        """Whether ``1/2 >= p >= n^(-1+epsilon)`` and ``d >= n^gamma`` hold."""
        return (
            self.p <= 0.5
            and self.p >= self.n ** (-1.0 + epsilon)
            and self.d >= self.n**gamma
        )


@FrozenDataclass()
class ThresholdSet:
    """The three edge thresholds at one ``(p, d)``.

    Attributes:
        xi: Gaussian scalar threshold, ``Pr[N(0, 1/d) >= xi] = p``.
        tau: Spherical inner-product threshold.
        rho: Gaussian inner-product threshold.
    """

    xi: float
    tau: float
    rho: float


@FrozenDataclass()
class BartlettFrame:
    """Gram-Schmidt triangular coordinates of ``k`` Gaussian vectors in dimension ``d``.

    Row ``j`` of ``coords`` holds the first ``j + 1`` coordinates of vector ``j``;
    entries above the diagonal are zero.
    """

    k: int
    d: int
    coords: FloatMatrix

    def gram(self) -> FloatMatrix:
        """Matrix of inner products ``<Z_i, Z_j>``."""
        return self.coords @ self.coords.T

    def inner(self, i: int, j: int) -> float:
        """Inner product of vectors ``i`` and ``j`` from the triangular coordinates."""
        lo = min(i, j)
        return float(np.dot(self.coords[i, : lo + 1], self.coords[j, : lo + 1]))


@FrozenDataclass()
class Graph:
    """A simple undirected graph as a dense symmetric boolean matrix.

    Use :meth:`from_matrix` or :meth:`from_edges` rather than the constructor so
    symmetry and the zero diagonal are checked.
    """

    n: int
    adjacency: BoolMatrix

    @classmethod
    def from_matrix(cls, matrix: npt.ArrayLike) -> Graph:
        adj = np.array(matrix, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise DomainError(f"adjacency must be square, got shape {adj.shape}")
        if np.any(np.diag(adj)):
            raise DomainError("adjacency must have a zero diagonal")
        if not np.array_equal(adj, adj.T):
            raise DomainError("adjacency must be symmetric")
        adj.setflags(write=False)
        return cls(n=int(adj.shape[0]), adjacency=adj)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Edge]) -> Graph:
        adj = np.zeros((n, n), dtype=bool)
        for u, v in edges:
            if u == v or not (0 <= u < n and 0 <= v < n):
                raise DomainError(f"invalid edge ({u}, {v}) for n={n}")
            adj[u, v] = adj[v, u] = True
        return cls.from_matrix(adj)

    @classmethod
    def complete(cls, n: int) -> Graph:
        return cls.from_matrix(~np.eye(n, dtype=bool))

    @classmethod
    def empty(cls, n: int) -> Graph:
        return cls.from_matrix(np.zeros((n, n), dtype=bool))

    def edges(self) -> list[Edge]:
        rows, cols = np.nonzero(np.triu(self.adjacency, k=1))
        return [(int(u), int(v)) for u, v in zip(rows, cols, strict=True)]

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(np.triu(self.adjacency, k=1)))

    @property
    def density(self) -> float:
        return self.edge_count / math.comb(self.n, 2)

    def degrees(self) -> npt.NDArray[np.int64]:
        return self.adjacency.sum(axis=1).astype(np.int64)


@FrozenDataclass()
class Mask:
    """An observed edge set over ``n`` vertices with no isolated vertices."""

    n: int
    edges: tuple[Edge, ...]

    def __post_init__(self) -> None:
        touched: set[int] = set()
        for u, v in self.edges:
            if not u < v or v >= self.n or u < 0:
                raise DomainError(f"mask edge ({u}, {v}) is not a normalized pair in [0, {self.n})")
            touched.update((u, v))
        if len(touched) != self.n:
            raise DomainError(f"mask has {self.n - len(touched)} isolated vertices")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Edge]) -> Mask:
        return cls(n=n, edges=tuple(sorted({norm_edge(u, v) for u, v in edges})))

    @classmethod
    def complete(cls, n: int) -> Mask:
        return cls(n=n, edges=tuple((u, v) for u in range(n) for v in range(u + 1, n)))

    def matrix(self) -> BoolMatrix:
        out = np.zeros((self.n, self.n), dtype=bool)
        if self.edges:
            idx = np.asarray(self.edges)
            out[idx[:, 0], idx[:, 1]] = True
            out[idx[:, 1], idx[:, 0]] = True
        return out


@FrozenDataclass()
class MaskedGraph:
    """A graph observed only on the edges of a mask.

    ``states[i]`` is the presence bit of ``mask.edges[i]``; every other pair is
    unknown.
    """

    mask: Mask
    states: tuple[bool, ...]

    def __post_init__(self) -> None:
        if len(self.states) != len(self.mask.edges):
            raise DomainError(
                f"expected {len(self.mask.edges)} states, got {len(self.states)}"
            )

    @property
    def n(self) -> int:
        return self.mask.n

    def observed(self) -> BoolMatrix:
        return self.mask.matrix()

    def values(self) -> BoolMatrix:
        """Presence matrix with unknown pairs reported as absent."""
        out = np.zeros((self.n, self.n), dtype=bool)
        for (u, v), state in zip(self.mask.edges, self.states, strict=True):
            if state:
                out[u, v] = out[v, u] = True
        return out

    def state(self, u: int, v: int) -> bool | None:
        """Presence of ``{u, v}``, or ``None`` when the pair is unobserved."""
        edge = norm_edge(u, v)
        try:
            return self.states[self.mask.edges.index(edge)]
        except ValueError:
            return None


@FrozenDataclass()
class ColoredGraph:
    """A planted-coloring sample: the graph plus its hidden labels in ``0..q-1``."""

    graph: Graph
    q: int
    labels: npt.NDArray[np.int64]


LatentKind = Literal["spherical", "gaussian"]
LatentFrame = Literal["ambient", "gram"]


@FrozenDataclass()
class LatentConfiguration:
    """Latent vectors behind a geometric graph sample.

    With ``frame="ambient"`` the rows of ``vectors`` are the ``n x d`` latent
    vectors themselves. With ``frame="gram"`` (used when ``n <= d``) the rows are
    their ``n x n`` lower-triangular Bartlett coordinates, which determine every
    inner product. Spherical rows have unit norm in either frame.
    """

    kind: LatentKind
    frame: LatentFrame
    vectors: FloatMatrix

    def gram(self) -> FloatMatrix:
        return self.vectors @ self.vectors.T


@FrozenDataclass()
class Ordering:
    """A bijective labelling ``pi`` of pattern vertices; ``ranks[v] = pi(v)``."""

    ranks: tuple[int, ...]

    def __post_init__(self) -> None:
        if sorted(self.ranks) != list(range(len(self.ranks))):
            raise DomainError(f"ordering {self.ranks} is not a bijection onto 0..k-1")

    @classmethod
    def identity(cls, k: int) -> Ordering:
        return cls(ranks=tuple(range(k)))

    @classmethod
    def from_sequence(cls, sequence: Sequence[int]) -> Ordering:
        """Ordering that ranks ``sequence[0]`` lowest, ``sequence[1]`` next, and so on."""
        ranks = [0] * len(sequence)
        for rank, v in enumerate(sequence):
            ranks[v] = rank
        return cls(ranks=tuple(ranks))

    def orient(self, edge: Edge) -> Edge:
        """Return ``(u, v)`` with ``pi(u) > pi(v)``."""
        a, b = edge
        return (a, b) if self.ranks[a] > self.ranks[b] else (b, a)


@FrozenDataclass()
class Pattern:
    """A small simple graph ``H`` on vertices ``0..k-1`` without isolated vertices."""

    k: int
    edges: tuple[Edge, ...]

    def __post_init__(self) -> None:
        touched: set[int] = set()
        for u, v in self.edges:
            if not 0 <= u < v < self.k:
                raise DomainError(f"pattern edge ({u}, {v}) invalid for k={self.k}")
            touched.update((u, v))
        if len(set(self.edges)) != len(self.edges):
            raise DomainError("pattern edges must be distinct")
        if len(touched) != self.k:
            raise DomainError("pattern vertices without incident edges are not allowed")

    @classmethod
    def from_edges(cls, edges: Iterable[Edge]) -> Pattern:
        """Build a pattern, relabelling the touched vertices to ``0..k-1`` in sorted order."""
        normalized = sorted({norm_edge(u, v) for u, v in edges})
        vertices = sorted({x for e in normalized for x in e})
        relabel = {v: i for i, v in enumerate(vertices)}
        return cls(
            k=len(vertices),
            edges=tuple(sorted(norm_edge(relabel[u], relabel[v]) for u, v in normalized)),
        )

    @classmethod
    def from_networkx(cls, graph: nx.Graph) -> Pattern:  # pyright: ignore[reportMissingTypeArgument]
        return cls.from_edges((int(u), int(v)) for u, v in graph.edges())

    @property
    def m(self) -> int:
        return len(self.edges)

    def edge_set(self) -> EdgeSet:
        return frozenset(self.edges)

    def neighbors(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.k)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def degrees(self) -> list[int]:
        return [len(nb) for nb in self.neighbors()]

    def to_networkx(self) -> nx.Graph:  # pyright: ignore[reportMissingTypeArgument]
        graph: nx.Graph = nx.Graph()  # pyright: ignore[reportMissingTypeArgument]
        graph.add_nodes_from(range(self.k))
        graph.add_edges_from(self.edges)
        return graph

    def components(self) -> list[Pattern]:
        """Connected components, each relabelled to ``0..k_i-1``."""
        graph = self.to_networkx()
        parts: list[Pattern] = []
        for nodes in sorted(nx.connected_components(graph), key=min):
            sub = graph.subgraph(nodes)
            parts.append(Pattern.from_edges(sub.edges()))
        return parts

    def is_connected(self) -> bool:
        return nx.is_connected(self.to_networkx())

    def has_leaf(self) -> bool:
        return any(deg == 1 for deg in self.degrees())

    def disjoint_union(self, other: Pattern) -> Pattern:
        shifted = [(u + self.k, v + self.k) for u, v in other.edges]
        return Pattern(k=self.k + other.k, edges=tuple(sorted([*self.edges, *shifted])))


@FrozenDataclass()
class McEstimate:
    """A Monte Carlo mean with its CLT standard error.

    ``stderr`` is the sample standard deviation of the i.i.d. replicate values
    divided by ``sqrt(replicates)``.
    """

    mean: float
    stderr: float
    replicates: int
    seed: int

    def z_score(self) -> float:
        """``mean / stderr``; infinite for a nonzero mean with zero spread."""
        if self.stderr == 0.0:
            return 0.0 if self.mean == 0.0 else math.copysign(math.inf, self.mean)
        return self.mean / self.stderr
