"""Exact combinatorial invariants of small patterns.

Given an ordering ``pi`` of the vertices of a pattern ``H``, an edge is written
``(u, v)`` with ``pi(u) > pi(v)``. A set ``F`` of edges *covers* ``(u, v)`` when
some edge of ``F`` touches ``u``; it *strongly covers* ``(u, v)`` when ``v`` has
another neighbour ``w != u`` inside the component of ``u`` in the subgraph of
``F`` on vertices ranked at least ``pi(v)``. The ordered (strong) edge
independence number is the size of the smallest ``F`` that together with the
edges it (strongly) covers exhausts ``E(H)``, maximised over orderings.

Ordered covering has a closed form. Let ``S`` be the vertices that have a
smaller-ranked neighbour; ``F`` covers everything exactly when it touches every
vertex of ``S``, so the minimum is ``|S| - nu(H[S])`` with ``nu`` the matching
number. For a connected pattern the complements of ``S`` are exactly the
nonempty independent sets, which turns the maximum over orderings into a
maximum over independent sets.

Strong covering has no such form and is searched exhaustively: orderings are
enumerated up to automorphism, and for each one a branch-and-bound search looks
for a cover no larger than the best value found so far before computing the
exact minimum.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator, Sequence
from itertools import permutations

import networkx as nx
from weakincentives import FrozenDataclass
from weakincentives.runtime.logging import get_logger

from rgg_lab.config import DEFAULT_SETTINGS, LabSettings
from rgg_lab.errors import DomainError, SizeError
from rgg_lab.models import Edge, EdgeSet, Ordering, Pattern, norm_edge
from rgg_lab.patterns import automorphisms
from rgg_lab.rng import stream

logger = get_logger(__name__)


@FrozenDataclass()
class EdgeIndependence:
    """Result of an OEI or SOEI computation.

    Attributes:
        value: The invariant (exact) or the best certified lower bound (heuristic).
        ordering: An ordering attaining ``value``.
        cover: A minimum (strongly) covering set for ``ordering``.
        exact: False when the heuristic mode produced the result.
        lower_bound: Certified lower bound.
        upper_bound: Certified upper bound.
    """

    value: int
    ordering: Ordering
    cover: EdgeSet
    exact: bool
    lower_bound: int
    upper_bound: int


@FrozenDataclass()
class LeafDecomposition:
    """Split of ``E(H)`` into a forest part and a part of minimum degree 2."""

    tree_part: EdgeSet
    no_leaves_part: EdgeSet


@FrozenDataclass()
class InvariantResult:
    """OEI, SOEI and deficiency of one pattern, with witnesses."""

    oei: EdgeIndependence
    soei: EdgeIndependence
    delta: int


# -- covering --------------------------------------------------------------------


def _check_subset(h: Pattern, f: Iterable[Edge]) -> EdgeSet:
    edges = h.edge_set()
    normalized = frozenset(norm_edge(u, v) for u, v in f)
    extra = normalized - edges
    if extra:
        raise DomainError(f"edges {sorted(extra)} are not edges of the pattern")
    return normalized


def covered_edges(h: Pattern, pi: Ordering, f: Iterable[Edge]) -> EdgeSet:
    """Edges of ``E(h) \\ F`` whose higher-ranked endpoint is touched by ``F``.

    Raises:
        DomainError: If ``f`` is not a subset of ``E(h)``.
    """
    chosen = _check_subset(h, f)
    touched = {x for e in chosen for x in e}
    return frozenset(
        e for e in h.edges if e not in chosen and pi.orient(e)[0] in touched
    )


def _component_at_or_above(
    chosen: Iterable[Edge], ranks: Sequence[int], floor: int, start: int
) -> set[int]:
    graph: dict[int, list[int]] = {}
    for a, b in chosen:
        if ranks[a] >= floor and ranks[b] >= floor:
            graph.setdefault(a, []).append(b)
            graph.setdefault(b, []).append(a)
    seen = {start}
    stack = [start]
    while stack:
        x = stack.pop()
        for y in graph.get(x, ()):
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return seen


def strongly_covered_edges(h: Pattern, pi: Ordering, f: Iterable[Edge]) -> EdgeSet:
    """Edges ``(u, v)`` outside ``F`` such that ``v`` has a neighbour ``w != u`` in the
    component of ``u`` within the part of ``F`` ranked at least ``pi(v)``.

    Raises:
        DomainError: If ``f`` is not a subset of ``E(h)``.
    """
    chosen = _check_subset(h, f)
    adj = h.neighbors()
    out: set[Edge] = set()
    for e in h.edges:
        if e in chosen:
            continue
        u, v = pi.orient(e)
        component = _component_at_or_above(chosen, pi.ranks, pi.ranks[v], u)
        if any(w != u and w in component for w in adj[v]):
            out.add(e)
    return frozenset(out)


class _CoverOracle:
    """Strong-cover test over edge bitmasks for one ordering.

    Components of ``F`` restricted to ranks ``>= r`` are built once per distinct
    floor rank with a small union-find, so each test costs ``O(k m)``.
    """

    def __init__(self, h: Pattern, ranks: Sequence[int]) -> None:
        self.k = h.k
        self.edges = list(h.edges)
        self.full = (1 << len(self.edges)) - 1
        adj = h.neighbors()
        self.upper: list[int] = []
        self.floor: list[int] = []
        self.target: list[int] = []
        for a, b in self.edges:
            u, v = (a, b) if ranks[a] > ranks[b] else (b, a)
            self.upper.append(u)
            self.floor.append(ranks[v])
            self.target.append(sum(1 << w for w in adj[v] if w != u))
        self.above = [
            sum(
                1 << i
                for i, (a, b) in enumerate(self.edges)
                if ranks[a] >= r and ranks[b] >= r
            )
            for r in range(h.k)
        ]

    def chosen(self, mask: int) -> list[Edge]:
        return [e for i, e in enumerate(self.edges) if mask >> i & 1]

    def _component_masks(self, mask: int) -> list[int]:
        parent = list(range(self.k))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, (a, b) in enumerate(self.edges):
            if mask >> i & 1:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[ra] = rb
        groups: dict[int, int] = {}
        for x in range(self.k):
            root = find(x)
            groups[root] = groups.get(root, 0) | 1 << x
        return [groups[find(x)] for x in range(self.k)]

    def covered_count(self, mask: int, *, stop_on_miss: bool = False) -> int:
        """Edges in ``mask`` or strongly covered by it (``-1`` on a miss when stopping)."""
        by_floor: dict[int, list[int]] = {}
        total = 0
        for i in range(len(self.edges)):
            if mask >> i & 1:
                total += 1
                continue
            r = self.floor[i]
            comps = by_floor.get(r)
            if comps is None:
                comps = self._component_masks(mask & self.above[r])
                by_floor[r] = comps
            if comps[self.upper[i]] & self.target[i]:
                total += 1
            elif stop_on_miss:
                return -1
        return total

    def covers(self, mask: int) -> bool:
        return self.covered_count(mask, stop_on_miss=True) >= 0


def _prune_cover(oracle: _CoverOracle, mask: int) -> int:
    """Drop edges from a cover while it stays a cover; the result is inclusion-minimal."""
    for i in reversed(range(len(oracle.edges))):
        if mask >> i & 1 and oracle.covers(mask & ~(1 << i)):
            mask &= ~(1 << i)
    return mask


def _greedy_cover(oracle: _CoverOracle) -> int:
    mask = 0
    while not oracle.covers(mask):
        best_gain, best_edge = -1, -1
        for i in range(len(oracle.edges)):
            if mask >> i & 1:
                continue
            gain = oracle.covered_count(mask | 1 << i)
            if gain > best_gain:
                best_gain, best_edge = gain, i
        mask |= 1 << best_edge
    return _prune_cover(oracle, mask)


class _Found(Exception):
    pass


def _min_cover(oracle: _CoverOracle, *, below: int, stop_at: int = -1) -> int | None:
    """Smallest covering mask with fewer than ``below`` edges, or ``None``.

    Edges are branched include-first; a branch is dropped when even taking every
    remaining edge cannot cover (covering is monotone in ``F``). The search ends
    early once a cover of size ``<= stop_at`` is found.
    """
    m = len(oracle.edges)
    best: int | None = None
    limit = below

    def dfs(i: int, mask: int, size: int) -> None:
        nonlocal best, limit
        if size >= limit:
            return
        if oracle.covers(mask):
            best, limit = mask, size
            if size <= stop_at:
                raise _Found
            return
        if i == m:
            return
        rest = oracle.full & ~((1 << i) - 1)
        if not oracle.covers(mask | rest):
            return
        dfs(i + 1, mask | 1 << i, size + 1)
        dfs(i + 1, mask, size)

    try:
        dfs(0, 0, 0)
    except _Found:
        pass
    return best


def _exact_cover(oracle: _CoverOracle) -> int:
    seed = _greedy_cover(oracle)
    found = _min_cover(oracle, below=seed.bit_count())
    return seed if found is None else found


def min_strong_cover(h: Pattern, pi: Ordering) -> EdgeSet:
    """A minimum strongly covering set for ``pi``."""
    oracle = _CoverOracle(h, pi.ranks)
    return frozenset(oracle.chosen(_exact_cover(oracle)))


def soei_for_ordering(h: Pattern, pi: Ordering) -> tuple[int, EdgeSet]:
    """``SOEI_pi(h)`` with a minimum strongly covering set."""
    cover = min_strong_cover(h, pi)
    return len(cover), cover


# -- ordered edge independence ------------------------------------------------------


def _matching(h: Pattern, vertices: Iterable[int]) -> set[Edge]:
    sub = h.to_networkx().subgraph(vertices)
    matching = nx.max_weight_matching(sub, maxcardinality=True)
    return {norm_edge(int(a), int(b)) for a, b in matching}


def oei_for_ordering(h: Pattern, pi: Ordering) -> tuple[int, EdgeSet]:
    """``OEI_pi(h)`` with a minimum covering set."""
    adj = h.neighbors()
    smaller = [v for v in range(h.k) if any(pi.ranks[w] < pi.ranks[v] for w in adj[v])]
    matching = _matching(h, smaller)
    cover = set(matching)
    matched = {x for e in matching for x in e}
    for v in smaller:
        if v not in matched:
            w = min((w for w in adj[v] if pi.ranks[w] < pi.ranks[v]), key=lambda x: pi.ranks[x])
            cover.add(norm_edge(v, w))
    return len(smaller) - len(matching), frozenset(cover)


def _independent_sets(adj: Sequence[set[int]], vertices: Sequence[int]) -> Iterator[list[int]]:
    def extend(i: int, chosen: list[int]) -> Iterator[list[int]]:
        if i == len(vertices):
            yield list(chosen)
            return
        v = vertices[i]
        yield from extend(i + 1, chosen)
        if not any(w in adj[v] for w in chosen):
            chosen.append(v)
            yield from extend(i + 1, chosen)
            chosen.pop()

    return extend(0, [])


def _bfs_sequence(
    adj: Sequence[set[int]], sources: Sequence[int], vertices: Sequence[int]
) -> list[int]:
    allowed = set(vertices)
    sequence = list(sources)
    seen = set(sources)
    head = 0
    while head < len(sequence):
        v = sequence[head]
        head += 1
        for w in sorted(adj[v]):
            if w in allowed and w not in seen:
                seen.add(w)
                sequence.append(w)
    return sequence


def _component_vertices(h: Pattern) -> list[list[int]]:
    return [sorted(c) for c in sorted(nx.connected_components(h.to_networkx()), key=min)]


def _exceeds_caps(h: Pattern, settings: LabSettings) -> bool:
    return h.k > settings.pattern_cap or h.m > settings.edge_cap


def _check_exact(h: Pattern, settings: LabSettings) -> None:
    if _exceeds_caps(h, settings):
        raise SizeError(
            f"pattern with {h.k} vertices and {h.m} edges exceeds the exact-search caps "
            f"({settings.pattern_cap} vertices, {settings.edge_cap} edges); "
            "pass heuristic=True for certified bounds"
        )


def lower_bounds(h: Pattern) -> tuple[int, int]:
    """Certified lower bounds ``(oei, soei)`` from the general inequalities.

    Per connected component: ``OEI >= max(ceil((k-1)/2), delta+1)`` and
    ``SOEI >= max(OEI bound, 2k - |E| - 2)``; both add over components.
    """
    oei_lb = 0
    soei_lb = 0
    for part in h.components():
        o = max(math.ceil((part.k - 1) / 2), delta(part) + 1)
        oei_lb += o
        soei_lb += max(o, 2 * part.k - part.m - 2)
    return oei_lb, soei_lb


def _oei_sequence(h: Pattern) -> list[int]:
    """A vertex sequence (lowest rank first) attaining OEI, component by component."""
    adj = h.neighbors()
    sequence: list[int] = []
    for vertices in _component_vertices(h):
        best_value, best_seq = -1, vertices
        for independent in _independent_sets(adj, vertices):
            if not independent:
                continue
            rest = [v for v in vertices if v not in independent]
            value = len(rest) - len(_matching(h, rest))
            if value > best_value:
                best_value, best_seq = value, _bfs_sequence(adj, independent, vertices)
        sequence.extend(best_seq)
    return sequence


def oei(
    h: Pattern,
    *,
    settings: LabSettings = DEFAULT_SETTINGS,
    heuristic: bool = False,
    samples: int = 2000,
    seed: int = 0,
) -> EdgeIndependence:
    """Ordered edge independence number with a witness ordering and cover.

    Raises:
        SizeError: If ``h`` exceeds the exact-search caps and ``heuristic`` is false.

    Example:
        >>> from rgg_lab.patterns import cycle
        >>> oei(cycle(5)).value
        2
    """
    if heuristic and _exceeds_caps(h, settings):
        return _heuristic(h, strong=False, samples=samples, seed=seed)
    _check_exact(h, settings)
    pi = Ordering.from_sequence(_oei_sequence(h))
    value, cover = oei_for_ordering(h, pi)
    return EdgeIndependence(
        value=value, ordering=pi, cover=cover, exact=True, lower_bound=value, upper_bound=value
    )


def _canonical_orderings(k: int, auts: Sequence[tuple[int, ...]]) -> Iterator[tuple[int, ...]]:
    """Vertex sequences that are lexicographically least within their automorphism orbit."""
    for seq in permutations(range(k)):
        if all(tuple(sigma[v] for v in seq) >= seq for sigma in auts):
            yield seq


_COVER_POOL = 16


def _soei_connected(h: Pattern) -> tuple[int, list[int], EdgeSet]:
    best_seq = _oei_sequence(h)
    oracle = _CoverOracle(h, Ordering.from_sequence(best_seq).ranks)
    best_mask = _exact_cover(oracle)
    best_value = best_mask.bit_count()
    best_cover = frozenset(oracle.chosen(best_mask))
    pool: list[int] = [best_mask]

    for seq in _canonical_orderings(h.k, automorphisms(h)):
        if best_value == h.m:
            break
        oracle = _CoverOracle(h, Ordering.from_sequence(seq).ranks)
        # Any cover no larger than the incumbent rules this ordering out.
        if any(mask.bit_count() <= best_value and oracle.covers(mask) for mask in pool):
            continue
        pruned = _prune_cover(oracle, oracle.full)
        if pruned.bit_count() > best_value:
            found = _min_cover(oracle, below=best_value + 1, stop_at=best_value)
            if found is None:
                mask = _exact_cover(oracle)
                best_value, best_seq = mask.bit_count(), list(seq)
                best_cover = frozenset(oracle.chosen(mask))
                logger.debug(
                    "Improved strong cover bound.",
                    event="invariants.soei.improved",
                    context={"value": best_value, "sequence": best_seq},
                )
                continue
            pruned = found
        pool.insert(0, pruned)
        del pool[_COVER_POOL:]
    return best_value, best_seq, best_cover


def soei(
    h: Pattern,
    *,
    settings: LabSettings = DEFAULT_SETTINGS,
    heuristic: bool = False,
    samples: int = 2000,
    seed: int = 0,
) -> EdgeIndependence:
    """Strong ordered edge independence number with a witness ordering and cover.

    Raises:
        SizeError: If ``h`` exceeds the exact-search caps and ``heuristic`` is false.

    Example:
        >>> from rgg_lab.patterns import cycle
        >>> soei(cycle(5)).value
        3
    """
    if heuristic and _exceeds_caps(h, settings):
        return _heuristic(h, strong=True, samples=samples, seed=seed)
    _check_exact(h, settings)
    sequence: list[int] = []
    cover: set[Edge] = set()
    total = 0
    for vertices in _component_vertices(h):
        part = Pattern.from_edges(e for e in h.edges if e[0] in vertices)
        value, local_seq, local_cover = _soei_connected(part)
        total += value
        sequence.extend(vertices[v] for v in local_seq)
        cover.update(norm_edge(vertices[a], vertices[b]) for a, b in local_cover)
    return EdgeIndependence(
        value=total,
        ordering=Ordering.from_sequence(sequence),
        cover=frozenset(cover),
        exact=True,
        lower_bound=total,
        upper_bound=total,
    )


def _heuristic(h: Pattern, *, strong: bool, samples: int, seed: int) -> EdgeIndependence:
    rng = stream(seed)
    oei_lb, soei_lb = lower_bounds(h)
    best_value, best_pi, best_cover = -1, Ordering.identity(h.k), frozenset[Edge]()
    for _ in range(samples):
        pi = Ordering.from_sequence([int(v) for v in rng.permutation(h.k)])
        if strong:
            oracle = _CoverOracle(h, pi.ranks)
            mask = _greedy_cover(oracle)
            value, cover = mask.bit_count(), frozenset(oracle.chosen(mask))
        else:
            value, cover = oei_for_ordering(h, pi)
        if value > best_value:
            best_value, best_pi, best_cover = value, pi, cover
    # Exact OEI_pi of a sampled ordering is a valid lower bound; a greedy strong cover is not.
    lower = soei_lb if strong else max(oei_lb, best_value)
    upper = h.m if strong else h.k
    logger.info(
        "Heuristic edge independence bounds.",
        event="invariants.heuristic",
        context={"strong": strong, "lower": lower, "upper": upper, "k": h.k, "m": h.m},
    )
    return EdgeIndependence(
        value=lower,
        ordering=best_pi,
        cover=best_cover,
        exact=False,
        lower_bound=lower,
        upper_bound=upper,
    )


# -- deficiency and leaves -------------------------------------------------------------


def delta(h: Pattern) -> int:
    """``max_S |S| - |N(S)|`` over vertex sets ``S``, searched over independent ``S``.

    Example:
        >>> from rgg_lab.patterns import star
        >>> delta(star(4))
        3
    """
    adj = h.neighbors()
    total = 0
    for vertices in _component_vertices(h):
        best = 0
        for independent in _independent_sets(adj, vertices):
            neighbourhood = set[int]().union(*(adj[v] for v in independent))
            best = max(best, len(independent) - len(neighbourhood))
        total += best
    return total


def leaf_decomposition(h: Pattern) -> LeafDecomposition:
    """Strip leaf edges one at a time until no vertex has degree 1."""
    remaining = set(h.edges)
    degree = h.degrees()
    tree: set[Edge] = set()
    while True:
        leaf_edge = next(
            (e for e in sorted(remaining) if degree[e[0]] == 1 or degree[e[1]] == 1), None
        )
        if leaf_edge is None:
            break
        remaining.discard(leaf_edge)
        tree.add(leaf_edge)
        degree[leaf_edge[0]] -= 1
        degree[leaf_edge[1]] -= 1
    return LeafDecomposition(tree_part=frozenset(tree), no_leaves_part=frozenset(remaining))


def leafy_exponent(h: Pattern, settings: LabSettings = DEFAULT_SETTINGS) -> int:
    """``|E(TP(h))| + OEI(NLP(h))``, the exponent of the leaf-aware coefficient bound."""
    parts = leaf_decomposition(h)
    exponent = len(parts.tree_part)
    if parts.no_leaves_part:
        exponent += oei(Pattern.from_edges(parts.no_leaves_part), settings=settings).value
    return exponent


def compute_invariants(h: Pattern, settings: LabSettings = DEFAULT_SETTINGS) -> InvariantResult:
    """OEI, SOEI and deficiency of ``h`` in one call."""
    return InvariantResult(
        oei=oei(h, settings=settings), soei=soei(h, settings=settings), delta=delta(h)
    )


def verify_cover(h: Pattern, pi: Ordering, f: Iterable[Edge], *, strong: bool) -> bool:
    """Whether ``F`` together with the edges it (strongly) covers is all of ``E(h)``."""
    closure = strongly_covered_edges if strong else covered_edges
    chosen = frozenset(norm_edge(u, v) for u, v in f)
    return chosen | closure(h, pi, chosen) == h.edge_set()


def count_bound_constant(count: int, h: Pattern, host_edges: int) -> float:
    """Fitted ``C`` in ``N(H, M) = C^(k^1.1) M^((k + delta)/2)`` for an observed count."""
    if count <= 0 or host_edges <= 1:
        return 0.0
    exponent = (h.k + delta(h)) / 2
    return math.exp((math.log(count) - exponent * math.log(host_edges)) / h.k**1.1)
