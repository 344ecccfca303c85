"""Second-eigenvalue computations for density-1/2 geometric graphs.

For a symmetric matrix ``lambda_2(A) = min_v lambda_1(A - v v^T)``, so with
``v = 1 / sqrt(2)`` the second adjacency eigenvalue is at most the top eigenvalue
of the centered matrix ``A - J/2``. Its size is controlled through the trace
``tr((A - J/2)^D)`` for even ``D``, whose expectation expands over closed walks
into signed-weight expectations.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import numpy.typing as npt
from scipy.sparse import linalg as sparse_linalg
from weakincentives import FrozenDataclass
from weakincentives.runtime.logging import get_logger

from rgg_lab.config import DEFAULT_SETTINGS, LabSettings
from rgg_lab.errors import DomainError, NumericError, SizeError
from rgg_lab.models import Edge, Graph, ModelParams, Pattern, norm_edge
from rgg_lab.patterns import ClassKey, canonical_class, pattern_from_key
from rgg_lab.pcol import set_partitions
from rgg_lab.rng import stream
from rgg_lab.samplers import sample_er, sample_rgg_sphere

logger = get_logger(__name__)

_DEFLATION_SLACK = 1e-8


@FrozenDataclass()
class SpectralSummary:
    """Top adjacency eigenvalues of one graph.

    ``lambda2 <= centered_lambda1 + 1e-8`` always holds. ``d`` and ``seed`` are
    ``None`` for graphs that were not sampled by this module.
    """

    n: int
    lambda1: float
    lambda2: float
    centered_lambda1: float
    d: int | None = None
    seed: int | None = None


def _dense(g: Graph) -> tuple[float, float, float]:
    adj = g.adjacency.astype(np.float64)
    values = np.linalg.eigvalsh(adj)
    centered = np.linalg.eigvalsh(adj - 0.5)
    lambda2 = float(values[-2]) if g.n >= 2 else float(values[-1])
    return float(values[-1]), lambda2, float(centered[-1])


def _iterative(g: Graph) -> tuple[float, float, float]:
    adj = g.adjacency.astype(np.float64)
    top = sparse_linalg.eigsh(adj, k=2, which="LA", return_eigenvectors=False)  # pyright: ignore[reportUnknownMemberType,reportUnknownVariableType]
    n = g.n

    def matvec(x: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        return adj @ x - 0.5 * np.full(n, x.sum())

    operator = sparse_linalg.LinearOperator((n, n), matvec=matvec, dtype=np.float64)  # pyright: ignore[reportUnknownMemberType,reportUnknownVariableType]
    centered = sparse_linalg.eigsh(operator, k=1, which="LA", return_eigenvectors=False, tol=1e-6)  # pyright: ignore[reportUnknownMemberType,reportUnknownVariableType,reportUnknownArgumentType]
    ordered = sorted((float(v) for v in top), reverse=True)  # pyright: ignore[reportUnknownVariableType,reportUnknownArgumentType]
    return ordered[0], ordered[1], float(centered[0])  # pyright: ignore[reportUnknownArgumentType]


def eigen_summary(
    g: Graph,
    settings: LabSettings = DEFAULT_SETTINGS,
    *,
    iterative: bool = False,
    d: int | None = None,
    seed: int | None = None,
) -> SpectralSummary:
    """``lambda_1``, ``lambda_2`` of ``A`` and ``lambda_1`` of ``A - J/2``.

    Raises:
        SizeError: Above the dense cap unless ``iterative`` is set.
        NumericError: If the deflation inequality fails beyond round-off.

    Example:
        >>> s = eigen_summary(Graph.complete(5))
        >>> round(s.lambda1, 6), round(s.lambda2, 6)
        (4.0, -1.0)
    """
    if g.n > settings.dense_eig_cap and not iterative:
        raise SizeError(
            f"n={g.n} exceeds the dense eigensolver cap of {settings.dense_eig_cap}; "
            "use the iterative mode or raise RGG_LAB_DENSE_EIG_CAP"
        )
    lambda1, lambda2, centered = _iterative(g) if iterative and g.n > 3 else _dense(g)
    slack = _DEFLATION_SLACK if not iterative else 1e-6 * max(1.0, abs(centered))
    if lambda2 > centered + slack:
        raise NumericError(
            "second eigenvalue exceeds the centered top eigenvalue",
            diagnostics={"lambda2": lambda2, "centered_lambda1": centered, "n": g.n},
        )
    return SpectralSummary(
        n=g.n, lambda1=lambda1, lambda2=lambda2, centered_lambda1=centered, d=d, seed=seed
    )


# -- trace moments -------------------------------------------------------------------


def _check_power(power: int) -> None:
    if power < 2 or power > 64 or power % 2:
        raise DomainError(f"trace power must be even and in [2, 64], got {power}")


def centered_trace_moment(g: Graph, power: int) -> float:
    """``tr((A - J/2)^D)`` for even ``D <= 64``.

    Raises:
        DomainError: For odd or out-of-range ``power``.
    """
    _check_power(power)
    centered = g.adjacency.astype(np.float64) - 0.5
    half = np.linalg.matrix_power(centered, power // 2)
    return float((half * half).sum())


def trace_bound(traces: Sequence[float], n: int, power: int) -> float:
    """``n^{1/D} mean(traces)^{1/D}``, the Markov-type bound on ``|lambda_2|``."""
    _check_power(power)
    if not traces:
        raise DomainError("trace_bound needs at least one trace")
    mean = math.fsum(traces) / len(traces)
    return n ** (1.0 / power) * max(mean, 0.0) ** (1.0 / power)


def _walk_term(walk: tuple[int, ...], coefficient: Callable[[ClassKey], float]) -> float:
    multiplicity: dict[Edge, int] = {}
    diagonal = 0
    for t, a in enumerate(walk):
        b = walk[(t + 1) % len(walk)]
        if a == b:
            diagonal += 1
        else:
            e = norm_edge(a, b)
            multiplicity[e] = multiplicity.get(e, 0) + 1
    odd = [e for e, r in multiplicity.items() if r % 2]
    pairs = sum(r // 2 for r in multiplicity.values())
    value = (-0.5) ** diagonal * 0.25**pairs
    if odd:
        value *= coefficient(canonical_class(Pattern.from_edges(odd)))
    return value


def trace_walk_expansion(n: int, power: int, coefficient: Callable[[Pattern], float]) -> float:
    """``E[tr((A - J/2)^D)]`` summed over closed walks.

    Diagonal steps contribute ``-1/2``, an edge used ``r`` times contributes
    ``(1/4)^{floor(r/2)}``, and the edges used an odd number of times contribute
    ``E[SW^{1/2}]`` of the pattern they span, supplied by ``coefficient``. Walks
    are grouped by their first-appearance labelling, each shape standing for
    ``n (n-1) ... (n-v+1)`` walks on ``v`` distinct vertices.
    """
    _check_power(power)
    cache: dict[ClassKey, float] = {}

    def by_key(key: ClassKey) -> float:
        if key not in cache:
            cache[key] = coefficient(pattern_from_key(key))
        return cache[key]

    total = 0.0
    for walk in set_partitions(power):
        vertices = max(walk) + 1
        if vertices > n:
            continue
        total += math.perm(n, vertices) * _walk_term(walk, by_key)
    return total


# -- regime experiment ---------------------------------------------------------------


@FrozenDataclass()
class RegimePoint:
    """Aggregates for one dimension of the regime experiment.

    Attributes:
        d: Dimension.
        mean_abs_lambda2: Mean of ``|lambda_2|`` over trials.
        max_abs_lambda2: Maximum of ``|lambda_2|`` over trials.
        er_mean_abs_lambda2: Mean ``|lambda_2|`` of matched ``G(n, 1/2)`` graphs.
        ratio: ``mean_abs_lambda2 / er_mean_abs_lambda2``.
        regime: ``geometric`` below ``n (log n)^e`` and ``er-like`` above.
        bound: ``n (log n)^c / sqrt d`` or ``(log n)^c sqrt n`` for the regime.
        bound_holds: Whether every trial satisfies the bound.
    """

    d: int
    mean_abs_lambda2: float
    max_abs_lambda2: float
    er_mean_abs_lambda2: float
    ratio: float
    regime: str
    bound: float
    bound_holds: bool


@FrozenDataclass()
class RegimeReport:
    n: int
    points: tuple[RegimePoint, ...]
    trials: tuple[SpectralSummary, ...]


def regime_bound(
    n: int, d: int, polylog_exponent: float, regime_exponent: float
) -> tuple[str, float]:
    """Regime label and ``|lambda_2|`` bound at ``(n, d)``."""
    log_n = math.log(n)
    if d <= n * log_n**regime_exponent:
        return "geometric", n * log_n**polylog_exponent / math.sqrt(d)
    return "er-like", log_n**polylog_exponent * math.sqrt(n)


def lambda2_regime_experiment(
    n: int,
    d_grid: Sequence[int],
    trials: int,
    seed: int,
    *,
    polylog_exponent: float = 10.0,
    regime_exponent: float = 8.0,
    settings: LabSettings = DEFAULT_SETTINGS,
) -> RegimeReport:
    """``|lambda_2|`` of spherical graphs at ``p = 1/2`` across ``d_grid``.

    Trial ``t`` at grid index ``i`` draws from ``stream(seed, 0, i, t)``; the
    matched Erdos-Renyi reference uses ``stream(seed, 1, t)``.

    Raises:
        DomainError: For an empty grid or ``trials < 1``.
    """
    if not d_grid:
        raise DomainError("d_grid must be non-empty")
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    iterative = n > settings.dense_eig_cap

    def rgg_trial(job: tuple[int, int]) -> SpectralSummary:
        i, t = job
        d = d_grid[i]
        graph, _ = sample_rgg_sphere(ModelParams(n=n, d=d, p=0.5), stream(seed, 0, i, t))
        return eigen_summary(graph, settings, iterative=iterative, d=d, seed=seed)

    def er_trial(t: int) -> SpectralSummary:
        graph = sample_er(ModelParams(n=n, d=1, p=0.5), stream(seed, 1, t))
        return eigen_summary(graph, settings, iterative=iterative, seed=seed)

    jobs = [(i, t) for i in range(len(d_grid)) for t in range(trials)]
    if settings.threads > 1:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            summaries = list(pool.map(rgg_trial, jobs))
            references = list(pool.map(er_trial, range(trials)))
    else:
        summaries = [rgg_trial(job) for job in jobs]
        references = [er_trial(t) for t in range(trials)]

    er_mean = float(np.mean([abs(s.lambda2) for s in references]))
    points: list[RegimePoint] = []
    for i, d in enumerate(d_grid):
        values = [abs(s.lambda2) for s in summaries[i * trials : (i + 1) * trials]]
        mean = float(np.mean(values))
        regime, bound = regime_bound(n, d, polylog_exponent, regime_exponent)
        points.append(
            RegimePoint(
                d=d,
                mean_abs_lambda2=mean,
                max_abs_lambda2=max(values),
                er_mean_abs_lambda2=er_mean,
                ratio=mean / er_mean if er_mean > 0.0 else math.inf,
                regime=regime,
                bound=bound,
                bound_holds=max(values) <= bound,
            )
        )
        logger.info(
            "Regime point finished.",
            event="spectral.regime.point",
            context={"n": n, "d": d, "mean_abs_lambda2": mean, "regime": regime},
        )
    return RegimeReport(n=n, points=tuple(points), trials=tuple(summaries))
