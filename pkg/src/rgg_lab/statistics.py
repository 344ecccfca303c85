"""Signed weights and counts, Monte Carlo Fourier coefficients and the tests built on them.

The signed weight of a pattern copy is ``prod_{(j, i) in E(h)} (G_ji - p)`` and
the signed count sums it over every unlabeled copy in the host: all of ``K_n``
for a graph, only fully observed copies for a masked graph. Edge, wedge and
triangle counts use matrix algebra on ``B = (A - p)`` restricted to the observed
pairs; other patterns enumerate embeddings.

Fourier estimation draws only the ``|V(h)|`` latent vectors a copy depends on.
Replicates are split into fixed-size chunks; chunk ``c`` draws from
``stream(seed, c)`` and chunk moments are merged in chunk order, so estimates
are identical for every worker count.
"""

from __future__ import annotations

import math
import zlib
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import Literal

import numpy as np
import numpy.typing as npt
from scipy import stats
from weakincentives import FrozenDataclass
from weakincentives.runtime.logging import get_logger

from rgg_lab.config import DEFAULT_SETTINGS, LabSettings
from rgg_lab.distributions import (
    bartlett_batch,
    gaussian_product_threshold,
    spherical_threshold,
)
from rgg_lab.errors import DomainError, MaskViolationError, SizeError
from rgg_lab.invariants import leafy_exponent, oei, soei
from rgg_lab.models import Graph, Mask, MaskedGraph, McEstimate, ModelParams, Pattern
from rgg_lab.patterns import (
    EDGE,
    TRIANGLE,
    WEDGE,
    ClassKey,
    automorphism_count,
    canonical_class,
    complete_host_count,
    count_subgraphs,
    enumerate_classes,
    host_support,
    iter_embeddings,
    key_label,
)
from rgg_lab.pcol import psi
from rgg_lab.rng import child_seed, stream
from rgg_lab.samplers import GraphModel, apply_mask, sample_graph

logger = get_logger(__name__)

CHUNK_SIZE = 4096

Host = Graph | MaskedGraph
BoundMode = Literal["oei", "soei", "leafy"]


# -- signed weights and counts ---------------------------------------------------


def signed_weight(g: Host, h: Pattern, embedding: Sequence[int], p: float) -> float:
    """Signed weight of the copy of ``h`` placed by ``embedding`` (pattern vertex -> host vertex).

    Raises:
        MaskViolationError: If an embedded edge is unobserved in a masked graph.
        DomainError: If ``embedding`` is not injective or has the wrong length.

    Example:
        >>> from rgg_lab.patterns import TRIANGLE
        >>> signed_weight(Graph.complete(3), TRIANGLE, (0, 1, 2), 0.5)
        0.125
    """
    if len(embedding) != h.k or len(set(embedding)) != h.k:
        raise DomainError(f"embedding {tuple(embedding)} is not injective on {h.k} vertices")
    weight = 1.0
    for u, v in h.edges:
        a, b = embedding[u], embedding[v]
        if isinstance(g, MaskedGraph):
            state = g.state(a, b)
            if state is None:
                raise MaskViolationError(f"pair ({a}, {b}) is not observed under the mask")
            present = state
        else:
            present = bool(g.adjacency[a, b])
        weight *= (1.0 if present else 0.0) - p
    return weight


def _centered(g: Host, p: float) -> npt.NDArray[np.float64]:
    if isinstance(g, MaskedGraph):
        observed = g.observed()
        return np.where(observed, g.values().astype(np.float64) - p, 0.0)
    centered = g.adjacency.astype(np.float64) - p
    np.fill_diagonal(centered, 0.0)
    return centered


def signed_count(
    g: Host, h: Pattern, p: float, settings: LabSettings = DEFAULT_SETTINGS
) -> float:
    """``CS_h^p(g)``: the signed weight summed over unlabeled copies of ``h``.

    Raises:
        SizeError: If ``h`` has more edges than the degree cap or enumeration
            exceeds the embedding budget.

    Example:
        >>> from rgg_lab.patterns import TRIANGLE
        >>> signed_count(Graph.complete(4), TRIANGLE, 0.5)
        0.5
    """
    key = canonical_class(h, settings)
    if key in _FAST_PATHS:
        return _FAST_PATHS[key](_centered(g, p))
    if h.m > settings.degree_cap:
        raise SizeError(f"pattern has {h.m} edges, above the degree cap {settings.degree_cap}")
    if isinstance(g, MaskedGraph):
        support = host_support(g)
    else:
        support = [frozenset(range(g.n)) - {v} for v in range(g.n)]
    total = math.fsum(
        signed_weight(g, h, image, p)
        for image in iter_embeddings(support, h, budget=settings.embedding_budget)
    )
    return total / automorphism_count(h)


def _edge_count(b: npt.NDArray[np.float64]) -> float:
    return float(np.triu(b, k=1).sum())


def _wedge_count(b: npt.NDArray[np.float64]) -> float:
    rows = b.sum(axis=1)
    squares = (b * b).sum(axis=1)
    return float(((rows * rows - squares) / 2.0).sum())


def _triangle_count(b: npt.NDArray[np.float64]) -> float:
    return float(np.trace(b @ b @ b) / 6.0)


_FAST_PATHS: dict[ClassKey, Callable[[npt.NDArray[np.float64]], float]] = {
    canonical_class(EDGE): _edge_count,
    canonical_class(WEDGE): _wedge_count,
    canonical_class(TRIANGLE): _triangle_count,
}


def er_signed_count_variance(host: Graph | Mask, h: Pattern, p: float) -> float:
    """Null variance of the signed count: ``N(h, host) (p - p^2)^{|E(h)|}``.

    A :class:`Graph` host stands for all of ``K_n``; a :class:`Mask` counts only
    copies inside its edges.
    """
    if isinstance(host, Mask):
        copies = count_subgraphs(host, h)
    else:
        copies = complete_host_count(host.n, h)
    return copies * (p - p * p) ** h.m


# -- Monte Carlo Fourier coefficients ----------------------------------------------


def _present(
    model: GraphModel, h: Pattern, size: int, rng: np.random.Generator
) -> npt.NDArray[np.bool_]:
    rows = np.array([u for u, _ in h.edges], dtype=np.int64)
    cols = np.array([v for _, v in h.edges], dtype=np.int64)
    if model.kind == "er":
        return rng.random((size, h.m)) < model.p
    if model.kind == "pcol":
        assert model.q is not None
        labels = rng.integers(0, model.q, size=(size, h.k))
        return (labels[:, rows] == labels[:, cols]) | (rng.random((size, h.m)) < psi(model.q))
    d = model.d
    if h.k <= d:
        vectors = bartlett_batch(h.k, d, size, rng)
    else:
        vectors = rng.standard_normal((size, h.k, d)) / math.sqrt(d)
    if model.kind == "sphere":
        vectors = vectors / np.linalg.norm(vectors, axis=2, keepdims=True)
        threshold = spherical_threshold(model.p, d)
    else:
        threshold = gaussian_product_threshold(model.p, d)
    inner = np.einsum("sed,sed->se", vectors[:, rows, :], vectors[:, cols, :])
    return inner >= threshold


@FrozenDataclass()
class _Moments:
    count: int
    mean: float
    m2: float


def _merge(a: _Moments, b: _Moments) -> _Moments:
    total = a.count + b.count
    if total == 0:
        return a
    delta = b.mean - a.mean
    return _Moments(
        count=total,
        mean=a.mean + delta * b.count / total,
        m2=a.m2 + b.m2 + delta * delta * a.count * b.count / total,
    )


def mc_fourier(
    model: GraphModel,
    h: Pattern,
    replicates: int,
    seed: int,
    *,
    bias: float | None = None,
    settings: LabSettings = DEFAULT_SETTINGS,
    chunk_size: int = CHUNK_SIZE,
) -> McEstimate:
    """Estimate ``E[SW_h^bias]`` for one copy of ``h`` under ``model``.

    Args:
        model: The graph model; ``n`` plays no role since only one copy is drawn.
        h: The pattern.
        replicates: Number of i.i.d. replicates, at least 1.
        seed: Root seed.
        bias: Centering constant; defaults to the model's density.
        settings: Worker count for the chunk pool.
        chunk_size: Replicates per chunk.

    Example:
        >>> from rgg_lab.patterns import WEDGE
        >>> est = mc_fourier(GraphModel(kind="sphere", d=16, p=0.5), WEDGE, 2000, seed=1)
        >>> abs(est.z_score()) < 6
        True
    """
    if replicates < 1:
        raise DomainError(f"replicates must be >= 1, got {replicates}")
    centre = model.density if bias is None else bias
    chunks = -(-replicates // chunk_size)

    def run_chunk(c: int) -> _Moments:
        size = min(chunk_size, replicates - c * chunk_size)
        present = _present(model, h, size, stream(seed, c))
        values = np.prod(present.astype(np.float64) - centre, axis=1)
        mean = float(values.mean())
        return _Moments(count=size, mean=mean, m2=float(((values - mean) ** 2).sum()))

    logger.debug(
        "Monte Carlo run started.",
        event="mc.start",
        context={"model": model.kind, "k": h.k, "m": h.m, "replicates": replicates, "seed": seed},
    )
    if settings.threads > 1 and chunks > 1:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            parts = list(pool.map(run_chunk, range(chunks)))
    else:
        parts = [run_chunk(c) for c in range(chunks)]
    total = _Moments(count=0, mean=0.0, m2=0.0)
    for part in parts:
        total = _merge(total, part)
    stderr = math.sqrt(total.m2 / (total.count - 1) / total.count) if total.count > 1 else 0.0
    estimate = McEstimate(mean=total.mean, stderr=stderr, replicates=replicates, seed=seed)
    logger.debug(
        "Monte Carlo run finished.",
        event="mc.done",
        context={"mean": estimate.mean, "stderr": estimate.stderr},
    )
    return estimate


def normalized_coefficient(estimate: McEstimate, m: int, bias: float) -> float:
    """``Phi^bias(H) = E[SW_H^bias] / (bias (1 - bias))^{m/2}``."""
    return estimate.mean / (bias * (1.0 - bias)) ** (m / 2.0)


def leaf_vanishes(model: GraphModel, h: Pattern) -> bool:
    """Whether a leaf forces ``E[SW_h] = 0``: spherical model, or Gaussian at ``p = 1/2``."""
    if not h.has_leaf():
        return False
    return model.kind == "sphere" or (model.kind == "gauss" and model.p == 0.5)


# -- bound checks --------------------------------------------------------------------


@FrozenDataclass()
class SlopeFit:
    """Regression of ``log |estimate|`` on ``log d``.

    Attributes:
        slope: Fitted slope; ``None`` when fewer than two points are significant.
        target: ``-exponent / 2``.
        tolerance: Allowed distance of ``slope`` from ``target`` on either side.
        dims: Dimensions used.
        means: Estimates at each dimension.
        stderrs: Standard errors at each dimension.
        within: Whether ``|slope - target| <= tolerance``; ``None`` without a slope.
    """

    slope: float | None
    target: float
    tolerance: float
    dims: tuple[int, ...]
    means: tuple[float, ...]
    stderrs: tuple[float, ...]
    within: bool | None


@FrozenDataclass()
class BoundCheck:
    """Comparison of an estimated coefficient against its structural bound.

    ``passed`` holds exactly when ``|mean| - 3 stderr <= bound``. ``power_limited``
    flags estimates within three standard errors of zero: those are consistent
    with any bound and say nothing about its tightness.
    """

    estimate: McEstimate
    bound_form: str
    exponent: int
    bound: float
    passed: bool
    slack: float
    power_limited: bool
    slope: SlopeFit | None


_BOUND_FORMS: dict[str, str] = {
    "oei": "(8p)^m (kappa k m (log d)^1.5 / sqrt d)^OEI(H)",
    "soei": "(kappa k m (log d)^1.5 / sqrt d)^SOEI(H) at p = 1/2",
    "leafy": "(8p)^m (kappa k m (log d)^1.5 / sqrt d)^(|E(TP(H))| + OEI(NLP(H)))",
}


def coefficient_bound(h: Pattern, d: int, p: float, exponent: int, kappa: float) -> float:
    """``(8p)^m (kappa k m (log d)^{3/2} / sqrt d)^exponent``."""
    base = kappa * h.k * h.m * math.log(d) ** 1.5 / math.sqrt(d)
    return (8.0 * p) ** h.m * base**exponent


def bound_check(
    h: Pattern,
    params: ModelParams,
    mode: BoundMode,
    *,
    replicates: int,
    seed: int,
    model: Literal["sphere", "gauss"] = "sphere",
    kappa: float = 1.0,
    epsilon: float = 0.1,
    gamma: float = 0.1,
    d_grid: Sequence[int] = (),
    slope_tolerance: float = 0.15,
    settings: LabSettings = DEFAULT_SETTINGS,
) -> BoundCheck:
    """Check ``|E[SW_h]|`` against the OEI, SOEI or leaf-peeled bound.

    With two or more dimensions in ``d_grid`` the slope of ``log |estimate|``
    against ``log d`` is also fitted and compared with ``-exponent / 2``; that
    comparison is the meaningful pass/fail since the bound's constant is unknown.

    Raises:
        DomainError: For ``mode="soei"`` away from ``p = 1/2``, or when the
            standing assumption on ``(n, d, p)`` fails.
    """
    if mode == "soei" and params.p != 0.5:
        raise DomainError("the SOEI bound is stated only for p = 1/2")
    if not params.in_sparse_high_dim_regime(epsilon, gamma):
        raise DomainError(
            f"(n={params.n}, d={params.d}, p={params.p}) violates "
            f"p <= 1/2, p >= n^(-1+{epsilon}) or d >= n^{gamma}"
        )
    if mode == "oei":
        exponent = oei(h, settings).value
    elif mode == "soei":
        exponent = soei(h, settings).value
    else:
        exponent = leafy_exponent(h, settings)

    graph_model = GraphModel(kind=model, d=params.d, p=params.p)
    estimate = mc_fourier(graph_model, h, replicates, seed, settings=settings)
    bound = coefficient_bound(h, params.d, params.p, exponent, kappa)
    lower = abs(estimate.mean) - 3.0 * estimate.stderr
    slope = None
    if len(d_grid) >= 2:
        slope = _fit_slope(
            h, params.p, model, d_grid, exponent, replicates, seed, slope_tolerance, settings
        )
    check = BoundCheck(
        estimate=estimate,
        bound_form=_BOUND_FORMS[mode],
        exponent=exponent,
        bound=bound,
        passed=lower <= bound,
        slack=bound - lower,
        power_limited=lower <= 0.0,
        slope=slope,
    )
    logger.info(
        "Bound check finished.",
        event="statistics.bound_check",
        context={"mode": mode, "exponent": exponent, "passed": check.passed, "d": params.d},
    )
    return check


def _fit_slope(
    h: Pattern,
    p: float,
    model: Literal["sphere", "gauss"],
    d_grid: Sequence[int],
    exponent: int,
    replicates: int,
    seed: int,
    tolerance: float,
    settings: LabSettings,
) -> SlopeFit:
    means: list[float] = []
    stderrs: list[float] = []
    for i, d in enumerate(d_grid):
        est = mc_fourier(
            GraphModel(kind=model, d=d, p=p), h, replicates, child_seed(seed, i), settings=settings
        )
        means.append(est.mean)
        stderrs.append(est.stderr)
    return fit_slope(d_grid, means, stderrs, exponent, tolerance)


def fit_slope(
    d_grid: Sequence[int],
    means: Sequence[float],
    stderrs: Sequence[float],
    exponent: int,
    tolerance: float,
) -> SlopeFit:
    """Fit ``log |mean|`` against ``log d`` over the significant estimates.

    Only points with ``|mean| > 3 stderr`` enter the regression. The fit is
    ``within`` when the slope lies inside ``-exponent / 2 +- tolerance``.
    """
    significant = [
        (math.log(d), math.log(abs(mu)))
        for d, mu, se in zip(d_grid, means, stderrs, strict=True)
        if abs(mu) > 3.0 * se
    ]
    target = -exponent / 2.0
    slope: float | None = None
    within: bool | None = None
    if len(significant) >= 2:
        xs, ys = zip(*significant, strict=True)
        slope = float(stats.linregress(xs, ys).slope)  # pyright: ignore[reportAttributeAccessIssue,reportUnknownMemberType,reportUnknownArgumentType]
        within = abs(slope - target) <= tolerance
    return SlopeFit(
        slope=slope,
        target=target,
        tolerance=tolerance,
        dims=tuple(d_grid),
        means=tuple(means),
        stderrs=tuple(stderrs),
        within=within,
    )


# -- detection -----------------------------------------------------------------------


@FrozenDataclass()
class DetectionReport:
    """Signed-count separation between a null and an alternative model.

    Attributes:
        pattern: Label of the counted pattern class.
        samples: Graphs drawn per side.
        mean0: Null mean.
        var0: Null variance.
        mean1: Alternative mean.
        var1: Alternative variance.
        ratio: ``|mean0 - mean1| / sqrt(var0 + var1)``.
        factor: Ratio needed to pass.
        passed: ``ratio >= factor``.
        null_variance_oracle: Exact null variance when the null is Erdos-Renyi.
    """

    pattern: str
    samples: int
    mean0: float
    var0: float
    mean1: float
    var1: float
    ratio: float
    factor: float
    passed: bool
    null_variance_oracle: float | None


def _side_counts(
    model: GraphModel,
    h: Pattern,
    n: int,
    p: float,
    samples: int,
    seed: int,
    side: int,
    mask: Mask | None,
    settings: LabSettings,
) -> npt.NDArray[np.float64]:
    def one(i: int) -> float:
        graph = sample_graph(model, n, stream(seed, side, i))
        host: Host = apply_mask(graph, mask) if mask is not None else graph
        return signed_count(host, h, p, settings)

    if settings.threads > 1:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            return np.array(list(pool.map(one, range(samples))), dtype=np.float64)
    return np.array([one(i) for i in range(samples)], dtype=np.float64)


def detection_test(
    model0: GraphModel,
    model1: GraphModel,
    h: Pattern,
    n: int,
    p: float,
    samples: int,
    seed: int,
    *,
    mask: Mask | None = None,
    factor: float = 5.0,
    settings: LabSettings = DEFAULT_SETTINGS,
) -> DetectionReport:
    """Compare the signed count of ``h`` at bias ``p`` under two models.

    Raises:
        DomainError: If the models do not share the density ``p``, fewer than two
            samples are requested, or the mask does not have ``n`` vertices.
    """
    if samples < 2:
        raise DomainError(f"detection needs at least 2 samples per side, got {samples}")
    for model in (model0, model1):
        if not math.isclose(model.density, p):
            raise DomainError(f"model {model.kind} has density {model.density}, expected {p}")
    if mask is not None and mask.n != n:
        raise DomainError(f"mask has {mask.n} vertices, expected {n}")
    logger.info(
        "Detection test started.",
        event="statistics.detect.start",
        context={"model0": model0.kind, "model1": model1.kind, "n": n, "samples": samples},
    )
    counts0 = _side_counts(model0, h, n, p, samples, seed, 0, mask, settings)
    counts1 = _side_counts(model1, h, n, p, samples, seed, 1, mask, settings)
    mean0, mean1 = float(counts0.mean()), float(counts1.mean())
    var0, var1 = float(counts0.var(ddof=1)), float(counts1.var(ddof=1))
    spread = math.sqrt(var0 + var1)
    gap = abs(mean0 - mean1)
    if spread > 0.0:
        ratio = gap / spread
    else:
        ratio = 0.0 if gap == 0.0 else math.inf
    oracle = None
    if model0.kind == "er":
        host: Graph | Mask = mask if mask is not None else Graph.empty(n)
        oracle = er_signed_count_variance(host, h, p)
    return DetectionReport(
        pattern=key_label(canonical_class(h, settings)),
        samples=samples,
        mean0=mean0,
        var0=var0,
        mean1=mean1,
        var1=var1,
        ratio=ratio,
        factor=factor,
        passed=ratio >= factor,
        null_variance_oracle=oracle,
    )


# -- low-degree advantage --------------------------------------------------------------


@FrozenDataclass()
class ClassTerm:
    """One class's share of the advantage sum.

    ``coefficient`` is ``None`` when the class vanishes analytically.
    """

    label: str
    copies: int
    coefficient: McEstimate | None
    phi: float
    value: float


@FrozenDataclass()
class AdvantageReport:
    total: float
    degree: int
    terms: tuple[ClassTerm, ...]


def low_degree_advantage_er(
    model: GraphModel,
    mask: Mask,
    degree: int,
    *,
    replicates: int,
    seed: int,
    settings: LabSettings = DEFAULT_SETTINGS,
) -> AdvantageReport:
    """``sum_H Phi_model(H)^2`` over subgraphs of the mask with ``1..degree`` edges.

    One estimate is made per isomorphism class and weighted by the number of
    copies inside the mask. Classes that vanish because of a leaf are skipped.

    Raises:
        BudgetError: If counting copies exceeds the embedding budget.
    """
    if degree > settings.degree_cap:
        raise SizeError(f"degree {degree} is above the degree cap {settings.degree_cap}")
    p = model.density
    terms: list[ClassTerm] = []
    for index, h in enumerate(enumerate_classes(mask.n, degree, settings)):
        copies = count_subgraphs(mask, h, settings)
        if copies == 0:
            continue
        label = key_label(canonical_class(h, settings))
        if leaf_vanishes(model, h):
            terms.append(
                ClassTerm(label=label, copies=copies, coefficient=None, phi=0.0, value=0.0)
            )
            continue
        estimate = mc_fourier(model, h, replicates, child_seed(seed, index), settings=settings)
        phi = normalized_coefficient(estimate, h.m, p)
        terms.append(
            ClassTerm(
                label=label,
                copies=copies,
                coefficient=estimate,
                phi=phi,
                value=copies * phi**2,
            )
        )
    total = math.fsum(t.value for t in terms)
    logger.info(
        "Advantage sum computed.",
        event="statistics.advantage",
        context={"model": model.kind, "degree": degree, "classes": len(terms), "total": total},
    )
    return AdvantageReport(total=total, degree=degree, terms=tuple(terms))


# -- coefficient sources for the planted-coloring comparison ---------------------------


def _class_seed(seed: int, key: ClassKey) -> int:
    return child_seed(seed, zlib.crc32(key_label(key).encode("utf-8")))


def mc_phi_source(
    model: GraphModel,
    bias: float,
    *,
    replicates: int,
    seed: int,
    settings: LabSettings = DEFAULT_SETTINGS,
) -> Callable[[Pattern], float]:
    """``Phi^bias`` estimated directly, one seeded estimate per class."""
    cache: dict[ClassKey, float] = {}

    def phi(h: Pattern) -> float:
        key = canonical_class(h, settings)
        if key not in cache:
            estimate = mc_fourier(
                model, h, replicates, _class_seed(seed, key), bias=bias, settings=settings
            )
            cache[key] = normalized_coefficient(estimate, h.m, bias)
        return cache[key]

    return phi


def expansion_phi_source(
    model: GraphModel,
    bias: float,
    *,
    replicates: int,
    seed: int,
    settings: LabSettings = DEFAULT_SETTINGS,
) -> Callable[[Pattern], float]:
    """``Phi^bias`` from the bias-1/2 coefficients of every edge subset.

    Uses ``E[prod (G - bias)] = sum_K (1/2 - bias)^{|E(H)| - |E(K)|} E[SW_K^{1/2}]`` over
    edge subsets ``K`` of ``H``,
    and estimates only leafless classes, which are the only nonzero terms for the
    spherical model.

    Raises:
        DomainError: If ``model`` is not the spherical or Gaussian model at ``p = 1/2``.
    """
    if model.kind not in ("sphere", "gauss") or model.p != 0.5:
        raise DomainError("the expansion source needs a geometric model at p = 1/2")
    half: dict[ClassKey, float] = {}

    def sw_half(sub: Pattern) -> float:
        if leaf_vanishes(model, sub):
            return 0.0
        key = canonical_class(sub, settings)
        if key not in half:
            half[key] = mc_fourier(
                model, sub, replicates, _class_seed(seed, key), bias=0.5, settings=settings
            ).mean
        return half[key]

    def phi(h: Pattern) -> float:
        shift = 0.5 - bias
        total = shift**h.m
        for mask in range(1, 1 << h.m):
            edges = [e for i, e in enumerate(h.edges) if mask >> i & 1]
            total += shift ** (h.m - len(edges)) * sw_half(Pattern.from_edges(edges))
        return total / (bias * (1.0 - bias)) ** (h.m / 2.0)

    return phi
