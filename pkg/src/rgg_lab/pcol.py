"""Planted-coloring analysis.

Under planted coloring every vertex receives a uniform label from ``q`` colours;
same-coloured pairs are always adjacent and other pairs are adjacent
independently with probability ``psi_q = 1/2 - 1/(2(q-1))``, which makes the
marginal edge density exactly ``1/2``.

Every exact quantity here only depends on which pattern vertices share a colour,
so colourings are enumerated as set partitions of the pattern's vertices
(restricted-growth strings). A partition with ``B`` blocks has probability
``q (q-1) ... (q-B+1) / q^k``.

The low-degree comparison with a random geometric graph uses the recursion::

    w_empty = 1
    w_H = (Phi_rgg(H) - sum_{K strictly inside H} w_K M_{K,H}) / M_{H,H}

where ``M_{K,H}`` is the probability that the monochromatic pairs of ``E(H)`` are
exactly ``E(H) \\ E(K)``, scaled by ``sqrt((1 - psi)/psi)^{|E(H) \\ E(K)|}``, and
``Phi`` is the Fourier coefficient at bias ``psi``. The advantage bound is the
sum of ``w_H^2`` over nonempty ``H`` in ``K_n`` with at most ``D`` edges.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Iterator
from fractions import Fraction
from functools import cache

from scipy import optimize
from weakincentives import FrozenDataclass
from weakincentives.runtime.logging import get_logger

from rgg_lab.config import DEFAULT_SETTINGS, LabSettings
from rgg_lab.errors import DomainError, NumericError, SizeError
from rgg_lab.models import Edge, McEstimate, Pattern, norm_edge
from rgg_lab.patterns import (
    ClassKey,
    canonical_class,
    check_cap,
    complete_host_count,
    enumerate_classes,
    key_label,
)

logger = get_logger(__name__)

Number = float | Fraction


@FrozenDataclass()
class PColParams:
    """Planted-coloring parameters; ``q >= 3``."""

    n: int
    q: int

    def __post_init__(self) -> None:
        if self.q < 3:
            raise DomainError(f"planted coloring needs q >= 3, got {self.q}")
        if self.n < 2:
            raise DomainError(f"n must be >= 2, got {self.n}")

    @property
    def psi(self) -> float:
        return psi(self.q)


def psi(q: int) -> float:
    """Cross-colour edge probability ``1/2 - 1/(2(q-1))``.

    Example:
        >>> psi(3)
        0.25
    """
    if q < 3:
        raise DomainError(f"psi_q needs q >= 3, got {q}")
    return 0.5 - 1.0 / (2.0 * (q - 1))


def psi_exact(q: int) -> Fraction:
    if q < 3:
        raise DomainError(f"psi_q needs q >= 3, got {q}")
    return Fraction(1, 2) - Fraction(1, 2 * (q - 1))


# -- set partitions ------------------------------------------------------------------


def set_partitions(k: int) -> Iterator[tuple[int, ...]]:
    """Restricted-growth strings of length ``k``: one per set partition of ``0..k-1``."""
    labels = [0] * k

    def extend(i: int, blocks: int) -> Iterator[tuple[int, ...]]:
        if i == k:
            yield tuple(labels)
            return
        for b in range(blocks + 1):
            labels[i] = b
            yield from extend(i + 1, max(blocks, b + 1))

    if k == 0:
        yield ()
        return
    yield from extend(1, 1)


def partition_probability(blocks: int, k: int, q: int, *, exact: bool = False) -> Number:
    """Probability that a uniform ``q``-colouring of ``k`` vertices realises a given partition."""
    if blocks > q:
        return Fraction(0) if exact else 0.0
    falling = math.perm(q, blocks)
    if exact:
        return Fraction(falling, q**k)
    return falling / float(q) ** k


@cache
def _mono_distribution(k: int, edges: tuple[Edge, ...], q: int) -> dict[int, Fraction]:
    """Exact law of the monochromatic edge mask over uniform ``q``-colourings."""
    law: dict[int, Fraction] = {}
    for labels in set_partitions(k):
        blocks = max(labels) + 1
        if blocks > q:
            continue
        mask = 0
        for i, (u, v) in enumerate(edges):
            if labels[u] == labels[v]:
                mask |= 1 << i
        law[mask] = law.get(mask, Fraction(0)) + Fraction(math.perm(q, blocks), q**k)
    return law


# -- exact signed weights ------------------------------------------------------------


def pcol_signed_weight_exact(
    h: Pattern,
    q: int,
    bias: Number,
    *,
    exact: bool = False,
    settings: LabSettings = DEFAULT_SETTINGS,
) -> Number:
    """``E[prod_{e in E(h)} (G_e - bias)]`` under planted coloring, by partition enumeration.

    Intra-block edges contribute ``1 - bias``; cross-block edges contribute
    ``psi_q - bias``. With ``exact=True`` the result is a :class:`Fraction`
    (floats passed as ``bias`` are converted exactly).

    Raises:
        DomainError: If ``q < 3``.
        SizeError: Above the pattern cap, or above 6 vertices in exact mode.

    Example:
        >>> from rgg_lab.patterns import TRIANGLE
        >>> pcol_signed_weight_exact(TRIANGLE, 3, 0.5, exact=True)
        Fraction(1, 32)
    """
    check_cap(h, settings)
    if exact and h.k > 6:
        raise SizeError("exact-rational mode is limited to patterns with at most 6 vertices")
    law = _mono_distribution(h.k, h.edges, q)
    if exact:
        b = Fraction(bias)
        intra, cross = 1 - b, psi_exact(q) - b
        total = Fraction(0)
        for mask, prob in law.items():
            same = mask.bit_count()
            total += prob * intra**same * cross ** (h.m - same)
        return total
    b = float(bias)
    intra_f, cross_f = 1.0 - b, psi(q) - b
    return math.fsum(
        float(prob) * intra_f ** mask.bit_count() * cross_f ** (h.m - mask.bit_count())
        for mask, prob in law.items()
    )


def triangle_coefficient(q: float) -> float:
    """Planted-coloring signed triangle weight at bias 1/2 as a function of real ``q``."""
    return (
        1.0 / (8.0 * q**2)
        + 3.0 / (8.0 * (q - 1.0) * q**2)
        - (q - 2.0) / (8.0 * q**2 * (q - 1.0) ** 2)
    )


def select_q(d: int, triangle_rgg: McEstimate) -> int:
    """Smallest integer ``q >= q1`` where ``q1`` matches the RGG triangle estimate.

    Solves ``triangle_coefficient(q1) = triangle_rgg.mean`` on ``[2, 10 d]``. An
    estimate above the value at ``q1 = 2`` selects the smallest valid ``q = 3``;
    one below the value at ``10 d`` selects ``ceil(10 d)``.

    Raises:
        DomainError: If the estimate is not positive.
        NumericError: If root finding fails.

    Example:
        >>> select_q(100, McEstimate(mean=1 / 32, stderr=0.0, replicates=1, seed=0))
        3
    """
    target = triangle_rgg.mean
    if not target > 0.0:
        raise DomainError(f"q selection needs a positive triangle estimate, got {target}")
    lo, hi = 2.0, 10.0 * d
    if target >= triangle_coefficient(lo):
        q1 = lo
    elif target <= triangle_coefficient(hi):
        q1 = hi
    else:
        try:
            q1 = float(
                optimize.brentq(lambda q: triangle_coefficient(q) - target, lo, hi, xtol=1e-13)
            )
        except (RuntimeError, ValueError) as exc:
            raise NumericError(
                "q selection did not converge", diagnostics={"d": d, "target": target}
            ) from exc
    return max(3, math.ceil(q1 - 1e-9))


# -- M entries -----------------------------------------------------------------------


def _edge_mask(h: Pattern, k_edges: Iterable[Edge]) -> int:
    index = {e: i for i, e in enumerate(h.edges)}
    mask = 0
    for u, v in k_edges:
        e = norm_edge(u, v)
        if e not in index:
            raise DomainError(f"edge {e} of K is not an edge of H")
        mask |= 1 << index[e]
    return mask


def m_entry(
    k_edges: Iterable[Edge],
    h: Pattern,
    q: int,
    *,
    exact: bool = False,
    settings: LabSettings = DEFAULT_SETTINGS,
) -> Number:
    """``M_{K,H}`` for ``K`` given by a subset of ``E(h)``.

    In exact mode the result is a Fraction whenever the scale exponent
    ``|E(H) \\ E(K)|`` is even, and a float otherwise.

    Raises:
        DomainError: If ``K`` is not a subgraph of ``h`` or ``q < 3``.
        SizeError: Above the pattern cap.
    """
    check_cap(h, settings)
    k_mask = _edge_mask(h, k_edges)
    full = (1 << h.m) - 1
    target = full & ~k_mask
    prob = _mono_distribution(h.k, h.edges, q).get(target, Fraction(0))
    exponent = target.bit_count()
    if exact:
        ratio = Fraction(1) - psi_exact(q)
        ratio /= psi_exact(q)
        if exponent % 2 == 0:
            return prob * ratio ** (exponent // 2)
        return float(prob) * float(ratio) ** (exponent / 2)
    scale = math.sqrt((1.0 - psi(q)) / psi(q))
    return float(prob) * scale**exponent


def phi_pcol(h: Pattern, q: int) -> float:
    """Planted-coloring Fourier coefficient at bias ``psi_q``; equals ``M_{empty,H}``."""
    return float(m_entry((), h, q))


# -- the w recursion -----------------------------------------------------------------


@FrozenDataclass()
class WeightEntry:
    """One isomorphism class of the weight table.

    Attributes:
        key: Canonical class key.
        label: Printable class label.
        copies: Number of copies of the class in ``K_n``.
        phi_rgg: RGG Fourier coefficient at bias ``psi_q``.
        phi_pcol: Planted-coloring Fourier coefficient at bias ``psi_q``.
        m_diag: ``M_{H,H}``.
        w_hat: ``M_{H,H} w_H``.
        w: ``w_H``; ``inf`` when ``M_{H,H} = 0``.
    """

    key: ClassKey
    label: str
    copies: int
    phi_rgg: float
    phi_pcol: float
    m_diag: float
    w_hat: float
    w: float

    @property
    def infinite(self) -> bool:
        return math.isinf(self.w)


@FrozenDataclass()
class WeightTable:
    """The recursion state for all classes of ``K_n`` with at most ``degree`` edges."""

    degree: int
    universe: int
    q: int
    psi: float
    entries: tuple[WeightEntry, ...]

    def entry(self, key: ClassKey) -> WeightEntry:
        for item in self.entries:
            if item.key == key:
                return item
        raise KeyError(key)

    def w(self, key: ClassKey | None) -> float:
        """``w_K`` for a class key; ``None`` stands for the empty graph."""
        return 1.0 if key is None else self.entry(key).w


def _subgraph_budget(n: int, degree: int) -> int:
    pairs = math.comb(n, 2)
    return sum(math.comb(pairs, j) for j in range(1, degree + 1))


def w_table(
    n: int,
    degree: int,
    q: int,
    phi_rgg: Callable[[Pattern], float],
    *,
    settings: LabSettings = DEFAULT_SETTINGS,
) -> WeightTable:
    """Fill the weight table for all subgraphs of ``K_n`` with at most ``degree`` edges.

    Args:
        n: Universe size.
        degree: Maximum edge count ``D``.
        q: Colour count, at least 3.
        phi_rgg: Source of RGG Fourier coefficients at bias ``psi_q``, called once
            per class representative.
        settings: Caps and budgets.

    Raises:
        BudgetError: If ``K_n`` has more subgraphs with ``<= degree`` edges than the
            embedding budget allows.
    """
    bias = psi(q)
    total = _subgraph_budget(n, degree)
    if total > settings.embedding_budget:
        raise SizeError(
            f"K_{n} has {total} subgraphs with at most {degree} edges, "
            f"above the budget of {settings.embedding_budget}"
        )
    classes = enumerate_classes(n, degree, settings)
    logger.info(
        "Filling weight table.",
        event="pcol.w_table.start",
        context={"n": n, "degree": degree, "q": q, "classes": len(classes)},
    )
    entries: dict[ClassKey, WeightEntry] = {}
    for h in classes:
        key = canonical_class(h, settings)
        phi_r = float(phi_rgg(h))
        phi_p = phi_pcol(h, q)
        m_diag = float(m_entry(h.edges, h, q, settings=settings))
        w_hat = phi_r - phi_p
        unbounded = False
        for sub in _proper_nonempty_subsets(h):
            sub_key = canonical_class(Pattern.from_edges(sub), settings)
            coefficient = float(m_entry(sub, h, q, settings=settings))
            if coefficient == 0.0:
                continue
            w_k = entries[sub_key].w
            if math.isinf(w_k):
                unbounded = True
                break
            w_hat -= w_k * coefficient
        if unbounded or m_diag == 0.0:
            w = math.inf
        else:
            w = w_hat / m_diag
        entries[key] = WeightEntry(
            key=key,
            label=key_label(key),
            copies=complete_host_count(n, h),
            phi_rgg=phi_r,
            phi_pcol=phi_p,
            m_diag=m_diag,
            w_hat=w_hat,
            w=w,
        )
    return WeightTable(
        degree=degree, universe=n, q=q, psi=bias, entries=tuple(entries.values())
    )


def _proper_nonempty_subsets(h: Pattern) -> Iterator[tuple[Edge, ...]]:
    full = (1 << h.m) - 1
    for mask in range(1, full):
        yield tuple(e for i, e in enumerate(h.edges) if mask >> i & 1)


def reconstruct_phi(table: WeightTable, h: Pattern) -> float:
    """``sum_{K subset of H} w_K M_{K,H}``; equals ``Phi_rgg(H)`` when the table is consistent."""
    total = float(m_entry((), h, table.q))
    full = (1 << h.m) - 1
    for mask in range(1, full + 1):
        sub = tuple(e for i, e in enumerate(h.edges) if mask >> i & 1)
        coefficient = float(m_entry(sub, h, table.q))
        if coefficient == 0.0:
            continue
        total += table.w(canonical_class(Pattern.from_edges(sub))) * coefficient
    return total


@FrozenDataclass()
class ClassContribution:
    label: str
    copies: int
    value: float


@FrozenDataclass()
class AdvantageBound:
    """``sum w_H^2`` over nonempty ``H``, with per-class contributions.

    ``total`` is ``inf`` and ``offending`` names the first infinite class when the
    table holds an infinite weight.
    """

    total: float
    bounded: bool
    offending: str | None
    contributions: tuple[ClassContribution, ...]


def advantage_bound_pcol(table: WeightTable) -> AdvantageBound:
    """Sum of ``w_H^2`` over every nonempty ``H`` in the table, counted with multiplicity."""
    contributions: list[ClassContribution] = []
    for entry in table.entries:
        if entry.infinite:
            logger.warning(
                "Weight table is unbounded.",
                event="pcol.advantage.unbounded",
                context={"class": entry.label, "q": table.q},
            )
            return AdvantageBound(
                total=math.inf,
                bounded=False,
                offending=entry.label,
                contributions=tuple(contributions),
            )
        contributions.append(
            ClassContribution(
                label=entry.label, copies=entry.copies, value=entry.copies * entry.w**2
            )
        )
    total = math.fsum(c.value for c in contributions)
    return AdvantageBound(
        total=total, bounded=True, offending=None, contributions=tuple(contributions)
    )


def ratio_bound_holds(k_edges: tuple[Edge, ...], h: Pattern, q: int) -> bool:
    """Whether ``M_{K,H} / M_{K,K} <= 4^{dE} q^{-dV}`` for nonempty ``K`` in connected ``H``."""
    if not k_edges:
        raise DomainError("the ratio bound is stated for nonempty K")
    k_pattern = Pattern.from_edges(k_edges)
    numerator = float(m_entry(k_edges, h, q))
    denominator = float(m_entry(k_pattern.edges, k_pattern, q))
    bound = 4.0 ** (h.m - k_pattern.m) * (1.0 / q) ** (h.k - k_pattern.k)
    return numerator <= bound * denominator * (1.0 + 1e-12)


def w_hat_bound(h: Pattern, n: int, q: int) -> float:
    """``(12|E|)^{|E|} ((log n)^9 / q)^{3|V|/4}``."""
    return (12.0 * h.m) ** h.m * ((math.log(n) ** 9) / q) ** (0.75 * h.k)
