"""Small-pattern machinery: builtin patterns, canonical classes, automorphisms, counting.

Canonical keys are computed per connected component by a backtracking search for
the lexicographically largest lower-triangular adjacency code. Vertex positions
are constrained by an isomorphism-invariant colour refinement, branches are cut
as soon as their code prefix falls behind the best one, and twin vertices (equal
neighbourhoods) are explored once. Two patterns have equal keys exactly when they
are isomorphic.
"""

from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from functools import cache
from itertools import combinations

import networkx as nx
from networkx.algorithms import isomorphism

from rgg_lab.config import DEFAULT_SETTINGS, LabSettings
from rgg_lab.errors import DomainError, SizeError
from rgg_lab.models import Edge, Graph, Mask, MaskedGraph, Pattern

ComponentKey = tuple[int, tuple[int, ...]]
ClassKey = tuple[ComponentKey, ...]
Host = Graph | Mask | MaskedGraph


def path(k: int) -> Pattern:
    """Path on ``k`` vertices."""
    return Pattern.from_edges((i, i + 1) for i in range(k - 1))


def cycle(k: int) -> Pattern:
    if k < 3:
        raise DomainError(f"cycles need k >= 3, got {k}")
    return Pattern.from_edges((i, (i + 1) % k) for i in range(k))


def star(leaves: int) -> Pattern:
    return Pattern.from_edges((0, i) for i in range(1, leaves + 1))


def complete(k: int) -> Pattern:
    return Pattern.from_edges((i, j) for i in range(k) for j in range(i + 1, k))


EDGE = path(2)
WEDGE = path(3)
TRIANGLE = complete(3)

BUILTIN_PATTERNS: dict[str, Pattern] = {
    "edge": EDGE,
    "wedge": WEDGE,
    "triangle": TRIANGLE,
    "path4": path(4),
    "path5": path(5),
    "star3": star(3),
    "star4": star(4),
    "cycle4": cycle(4),
    "cycle5": cycle(5),
    "k4": complete(4),
    "triangle_pendant": Pattern.from_edges([(0, 1), (1, 2), (0, 2), (2, 3)]),
    "two_edges": Pattern.from_edges([(0, 1), (2, 3)]),
}


def check_cap(h: Pattern, settings: LabSettings = DEFAULT_SETTINGS) -> None:
    if h.k > settings.pattern_cap:
        raise SizeError(
            f"pattern has {h.k} vertices, above the cap of {settings.pattern_cap}; "
            "use the heuristic mode or raise RGG_LAB_PATTERN_CAP"
        )


# -- canonical keys ------------------------------------------------------------


def _refine_colors(adj: Sequence[frozenset[int]]) -> list[int]:
    colors = [len(nb) for nb in adj]
    while True:
        signatures = [
            (colors[v], tuple(sorted(colors[w] for w in adj[v]))) for v in range(len(adj))
        ]
        ranking = {sig: i for i, sig in enumerate(sorted(set(signatures)))}
        refined = [ranking[sig] for sig in signatures]
        if len(set(refined)) == len(set(colors)):
            return refined
        colors = refined


def _canonical_component(adj: Sequence[frozenset[int]]) -> tuple[tuple[int, ...], list[int]]:
    """Best code and the vertex order achieving it, for one connected component."""
    k = len(adj)
    colors = _refine_colors(adj)
    slots = sorted(range(k), key=lambda v: colors[v])
    slot_color = [colors[v] for v in slots]
    best_code: list[int] | None = None
    best_order: list[int] = []

    def extend(order: list[int], code: list[int]) -> None:
        nonlocal best_code, best_order
        t = len(order)
        if t == k:
            if best_code is None or code > best_code:
                best_code, best_order = list(code), list(order)
            return
        seen_twins: list[int] = []
        for v in range(k):
            if colors[v] != slot_color[t] or v in order:
                continue
            if any(adj[v] - {u} == adj[u] - {v} for u in seen_twins):
                continue
            seen_twins.append(v)
            row = [1 if order[s] in adj[v] else 0 for s in range(t)]
            candidate = code + row
            if best_code is not None:
                prefix = best_code[: len(candidate)]
                if candidate < prefix:
                    continue
            extend([*order, v], candidate)

    extend([], [])
    assert best_code is not None
    return tuple(best_code), best_order


def graph_canonical_key(graph: nx.Graph) -> ClassKey:  # pyright: ignore[reportMissingTypeArgument]
    """Canonical key of an arbitrary small networkx graph (isolated vertices allowed)."""
    parts: list[ComponentKey] = []
    for nodes in nx.connected_components(graph):
        labels = sorted(nodes)
        index = {v: i for i, v in enumerate(labels)}
        adj = [frozenset(index[w] for w in graph[v]) for v in labels]
        code, _ = _canonical_component(adj)
        parts.append((len(labels), code))
    return tuple(sorted(parts))


def canonical_class(h: Pattern, settings: LabSettings = DEFAULT_SETTINGS) -> ClassKey:
    """Canonical isomorphism-class key of ``h``.

    Raises:
        SizeError: If ``h`` exceeds the pattern cap.

    Example:
        >>> canonical_class(path(3)) == canonical_class(Pattern.from_edges([(0, 2), (2, 1)]))
        True
    """
    check_cap(h, settings)
    return graph_canonical_key(h.to_networkx())


def canonical_pattern(h: Pattern) -> Pattern:
    """Representative of ``h``'s class, relabelled in canonical order."""
    return pattern_from_key(graph_canonical_key(h.to_networkx()))


def pattern_from_key(key: ClassKey) -> Pattern:
    edges: list[Edge] = []
    offset = 0
    for size, code in key:
        pos = 0
        for t in range(1, size):
            for s in range(t):
                if code[pos]:
                    edges.append((offset + s, offset + t))
                pos += 1
        offset += size
    return Pattern(k=offset, edges=tuple(sorted(edges)))


def key_label(key: ClassKey) -> str:
    """Compact printable form of a class key, e.g. ``3v3e:0-1,0-2,1-2``."""
    pattern = pattern_from_key(key)
    edges = ",".join(f"{u}-{v}" for u, v in pattern.edges)
    return f"{pattern.k}v{pattern.m}e:{edges}"


# -- automorphisms and catalog ---------------------------------------------------


def automorphisms(h: Pattern) -> list[tuple[int, ...]]:
    """All automorphisms of ``h`` as vertex permutations ``perm[v] = image``."""
    graph = h.to_networkx()
    matcher = isomorphism.GraphMatcher(graph, graph)
    return [
        tuple(mapping[v] for v in range(h.k))
        for mapping in matcher.isomorphisms_iter()  # pyright: ignore[reportUnknownVariableType]
    ]


@cache
def _aut_count(key: ClassKey) -> int:
    return len(automorphisms(pattern_from_key(key)))


def automorphism_count(h: Pattern) -> int:
    return _aut_count(graph_canonical_key(h.to_networkx()))


def catalog(max_vertices: int, *, connected_only: bool = True) -> list[Pattern]:
    """Every pattern on 2 to ``max_vertices`` (at most 7) vertices, one per class."""
    if max_vertices > 7:
        raise SizeError("the exhaustive catalog stops at 7 vertices")
    out: list[Pattern] = []
    for graph in nx.graph_atlas_g():  # pyright: ignore[reportUnknownVariableType]
        k = graph.number_of_nodes()  # pyright: ignore[reportUnknownMemberType]
        if k < 2 or k > max_vertices or graph.number_of_edges() == 0:  # pyright: ignore[reportUnknownMemberType]
            continue
        if any(deg == 0 for _, deg in graph.degree()):  # pyright: ignore[reportUnknownMemberType,reportUnknownVariableType]
            continue
        if connected_only and not nx.is_connected(graph):  # pyright: ignore[reportUnknownArgumentType]
            continue
        out.append(Pattern.from_networkx(graph))  # pyright: ignore[reportUnknownArgumentType]
    return out


def enumerate_classes(
    n: int, degree: int, settings: LabSettings = DEFAULT_SETTINGS
) -> list[Pattern]:
    """Representatives of every class of subgraphs of ``K_n`` with ``1..degree`` edges.

    Classes are grown one edge at a time (inside, pendant, or disjoint) and
    deduplicated by canonical key. Ordered by edge count, then key.

    Example:
        >>> [h.m for h in enumerate_classes(4, 2)]
        [1, 2, 2]
    """
    if n < 2 or degree < 1:
        return []
    level: dict[ClassKey, Pattern] = {canonical_class(EDGE, settings): EDGE}
    classes: dict[ClassKey, Pattern] = dict(level)
    for _ in range(degree - 1):
        grown: dict[ClassKey, Pattern] = {}
        for h in level.values():
            present = h.edge_set()
            extensions: list[list[Edge]] = [
                [*h.edges, (u, v)]
                for u in range(h.k)
                for v in range(u + 1, h.k)
                if (u, v) not in present
            ]
            if h.k + 1 <= n:
                extensions.extend([*h.edges, (u, h.k)] for u in range(h.k))
            if h.k + 2 <= n:
                extensions.append([*h.edges, (h.k, h.k + 1)])
            for edges in extensions:
                key = canonical_class(Pattern.from_edges(edges), settings)
                if key not in classes and key not in grown:
                    grown[key] = pattern_from_key(key)
        classes.update(grown)
        level = grown
    return sorted(classes.values(), key=lambda h: (h.m, canonical_class(h, settings)))


def edge_subsets(h: Pattern, max_edges: int) -> Iterator[tuple[Edge, ...]]:
    """Nonempty subsets of ``E(h)`` with at most ``max_edges`` edges."""
    for size in range(1, min(max_edges, h.m) + 1):
        yield from combinations(h.edges, size)


# -- subgraph counting -------------------------------------------------------------


def host_support(host: Host) -> list[frozenset[int]]:
    """Neighbour sets of the pairs a pattern copy may use in ``host``."""
    if isinstance(host, Graph):
        matrix = host.adjacency
    elif isinstance(host, Mask):
        matrix = host.matrix()
    else:
        matrix = host.observed()
    return [frozenset(int(w) for w in row.nonzero()[0]) for row in matrix]


def _search_order(h: Pattern) -> list[int]:
    adj = h.neighbors()
    order: list[int] = []
    placed: set[int] = set()
    while len(order) < h.k:
        start = max((v for v in range(h.k) if v not in placed), key=lambda v: len(adj[v]))
        frontier = [start]
        placed.add(start)
        while frontier:
            v = frontier.pop(0)
            order.append(v)
            for w in sorted(adj[v], key=lambda x: -len(adj[x])):
                if w not in placed:
                    placed.add(w)
                    frontier.append(w)
    return order


def iter_embeddings(
    support: Sequence[frozenset[int]],
    h: Pattern,
    *,
    budget: int,
) -> Iterator[tuple[int, ...]]:
    """Injective maps ``V(h) -> V(host)`` sending every edge of ``h`` onto ``support``.

    Yields ``image`` tuples indexed by pattern vertex. Each unlabeled copy appears
    ``|Aut(h)|`` times.

    Raises:
        SizeError: After ``budget`` search nodes have been expanded.
    """
    n = len(support)
    adj = h.neighbors()
    degrees = [len(nb) for nb in adj]
    host_degree = [len(nb) for nb in support]
    order = _search_order(h)
    position = {v: i for i, v in enumerate(order)}
    earlier = [[w for w in adj[v] if position[w] < position[v]] for v in order]
    image = [-1] * h.k
    used: set[int] = set()
    expanded = 0

    def backtrack(t: int) -> Iterator[tuple[int, ...]]:
        nonlocal expanded
        if t == h.k:
            yield tuple(image)
            return
        v = order[t]
        anchors = earlier[t]
        if anchors:
            pool = set(support[image[anchors[0]]])
            for w in anchors[1:]:
                pool &= support[image[w]]
            candidates = sorted(pool)
        else:
            candidates = range(n)
        for x in candidates:
            if x in used or host_degree[x] < degrees[v]:
                continue
            expanded += 1
            if expanded > budget:
                raise SizeError(
                    f"embedding search exceeded the budget of {budget} nodes; "
                    "raise RGG_LAB_EMBEDDING_BUDGET or use a smaller host"
                )
            image[v] = x
            used.add(x)
            yield from backtrack(t + 1)
            used.discard(x)
            image[v] = -1

    yield from backtrack(0)


def count_subgraphs(host: Host, h: Pattern, settings: LabSettings = DEFAULT_SETTINGS) -> int:
    """Number of edge-subgraphs of ``host`` isomorphic to ``h``.

    For a :class:`Mask` (or a masked graph) the host edges are the observed pairs.

    Raises:
        SizeError: If ``|E(h)|`` exceeds the degree cap or the search exceeds the
            embedding budget.

    Example:
        >>> count_subgraphs(Graph.complete(4), complete(3))
        4
    """
    if h.m > settings.degree_cap:
        raise SizeError(f"pattern has {h.m} edges, above the degree cap {settings.degree_cap}")
    support = host_support(host)
    labeled = sum(1 for _ in iter_embeddings(support, h, budget=settings.embedding_budget))
    return labeled // automorphism_count(h)


def complete_host_count(n: int, h: Pattern) -> int:
    """Copies of ``h`` in ``K_n``: ``n! / ((n - k)! |Aut(h)|)``."""
    if h.k > n:
        return 0
    return math.perm(n, h.k) // automorphism_count(h)
