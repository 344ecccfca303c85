"""Numerical primitives: edge thresholds, tail and interval probabilities, Bartlett frames.

Three thresholds define the models at density ``p`` and dimension ``d``:

- ``xi``: ``Pr[X >= xi] = p`` for a scalar ``X ~ N(0, 1/d)``.
- ``tau``: ``Pr[<V_1, V_2> >= tau] = p`` for independent uniform unit vectors. The
  inner product has density proportional to ``(1 - t^2)^((d-3)/2)`` on ``[-1, 1]``,
  so ``(1 + t)/2 ~ Beta((d-1)/2, (d-1)/2)`` and the tail is a regularized
  incomplete beta function.
- ``rho``: ``Pr[<Z_1, Z_2> >= rho] = p`` for independent ``Z_i ~ N(0, I/d)``. By
  rotation invariance ``<Z_1, Z_2> = Z_11 Z_21`` with ``d Z_11^2 ~ chi2(d)``, so the
  tail is a one-dimensional integral over the chi-square law.

At ``p = 1/2`` all three thresholds are exactly zero.
"""

from __future__ import annotations

import math
from typing import Literal

import numpy as np
from scipy import integrate, optimize, special, stats
from weakincentives import FrozenDataclass
from weakincentives.runtime.logging import get_logger

from rgg_lab.errors import DomainError, NumericError
from rgg_lab.models import BartlettFrame, FloatMatrix, ThresholdSet

logger = get_logger(__name__)

CenterKind = Literal["xi", "tau", "rho"]

_PROB_TOL = 1e-12
_QUAD_TAIL_MASS = 1e-16


def _check_density(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")


def _check_dimension(d: int, minimum: int = 1) -> None:
    if d < minimum:
        raise DomainError(f"d must be >= {minimum}, got {d}")


# -- scalar Gaussian ---------------------------------------------------------


def gaussian_tail(x: float, d: int) -> float:
    """``Pr[X >= x]`` for ``X ~ N(0, 1/d)``."""
    return float(special.ndtr(-x * math.sqrt(d)))


def gaussian_tail_threshold(p: float, d: int) -> float:
    """Return ``xi`` with ``Pr[N(0, 1/d) >= xi] = p``.

    Args:
        p: Density in ``(0, 1)``.
        d: Dimension, at least 1.

    Raises:
        DomainError: If ``p`` is outside ``(0, 1)`` or ``d < 1``.

    Example:
        >>> gaussian_tail_threshold(0.5, 100)
        0.0
    """
    _check_density(p)
    _check_dimension(d)
    if p == 0.5:
        return 0.0
    return float(-special.ndtri(p) / math.sqrt(d))


# -- spherical inner product ---------------------------------------------------


def spherical_tail(t: float, d: int) -> float:
    """``Pr[<V_1, V_2> >= t]`` for independent uniform unit vectors in ``R^d``."""
    _check_dimension(d)
    if t <= -1.0:
        return 1.0
    if t > 1.0:
        return 0.0
    if d == 1:
        # Two-point sphere: the inner product is +1 or -1 with equal probability.
        return 0.5
    a = (d - 1) / 2.0
    return float(special.betainc(a, a, (1.0 - t) / 2.0))


def spherical_threshold(p: float, d: int) -> float:
    """Return ``tau`` with ``Pr[<V_1, V_2> >= tau] = p`` on the unit sphere in ``R^d``.

    ``p = 1`` is accepted and returns ``-1`` (every pair adjacent). On the
    two-point sphere ``d = 1`` only ``p in {1/2, 1}`` are attainable.

    Raises:
        DomainError: For ``p`` outside ``(0, 1]``, or an unattainable ``p`` at ``d = 1``.
        NumericError: If the inverse cannot reproduce ``p`` to tolerance.
    """
    _check_dimension(d)
    if p == 1.0:
        return -1.0
    _check_density(p)
    if p == 0.5:
        return 0.0
    if d == 1:
        raise DomainError(f"the two-point sphere supports only p in {{1/2, 1}}, got {p}")

    a = (d - 1) / 2.0
    tau = 1.0 - 2.0 * float(special.betaincinv(a, a, p))
    if abs(spherical_tail(tau, d) - p) <= _PROB_TOL:
        return tau

    # betaincinv lost accuracy; bisect the monotone forward tail instead.
    try:
        tau = float(
            optimize.brentq(
                lambda t: spherical_tail(t, d) - p, -1.0, 1.0, xtol=1e-15, rtol=4e-16
            )
        )
    except (RuntimeError, ValueError) as exc:
        raise NumericError(
            "spherical threshold inversion failed", diagnostics={"p": p, "d": d}
        ) from exc
    return tau


# -- Gaussian inner product ----------------------------------------------------


def gaussian_product_tail(r: float, d: int) -> float:
    """``Pr[<Z_1, Z_2> >= r]`` for independent ``Z_i ~ N(0, I/d)``.

    Integrates ``Pr[Z_21 >= r / Z_11]`` against the law of ``Z_11 = sqrt(U/d)``,
    ``U ~ chi2(d)``, with adaptive Gauss-Kronrod quadrature.

    Raises:
        NumericError: If the quadrature error estimate exceeds the target.
    """
    _check_dimension(d)
    if math.isinf(r):
        return 0.0 if r > 0 else 1.0
    if r == 0.0:
        return 0.5
    if r < 0.0:
        return 1.0 - gaussian_product_tail(-r, d)

    lo = float(stats.chi2.ppf(_QUAD_TAIL_MASS, d))
    hi = float(stats.chi2.isf(_QUAD_TAIL_MASS, d))
    log_norm = (d / 2.0) * math.log(2.0) + math.lgamma(d / 2.0)
    scale = r * d

    def integrand(u: float) -> float:
        log_pdf = (d / 2.0 - 1.0) * math.log(u) - u / 2.0 - log_norm
        return math.exp(log_pdf) * float(special.ndtr(-scale / math.sqrt(u)))

    points = [float(d - 2)] if lo < d - 2 < hi else None
    value, abserr = integrate.quad(
        integrand, lo, hi, points=points, epsabs=1e-14, epsrel=1e-12, limit=400
    )
    if abserr > 1e-10:
        raise NumericError(
            "quadrature for the Gaussian inner-product tail did not converge",
            diagnostics={"r": r, "d": d, "value": value, "abserr": abserr},
        )
    return float(value)


def gaussian_product_threshold(p: float, d: int) -> float:
    """Return ``rho`` with ``Pr[<Z_1, Z_2> >= rho] = p`` for ``Z_i ~ N(0, I/d)``.

    Raises:
        DomainError: For ``p`` outside ``(0, 1)``.
        NumericError: If root finding or the inner quadrature fails.
    """
    _check_density(p)
    _check_dimension(d)
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return -gaussian_product_threshold(1.0 - p, d)

    # The product tail is lighter than the scalar Gaussian tail shifted by ~sqrt(log)/sqrt(d).
    upper = 10.0 * (1.0 + math.sqrt(math.log(1.0 / p))) / math.sqrt(d)
    try:
        rho = float(
            optimize.brentq(
                lambda r: gaussian_product_tail(r, d) - p, 0.0, upper, xtol=1e-15, rtol=4e-16
            )
        )
    except (RuntimeError, ValueError) as exc:
        raise NumericError(
            "Gaussian inner-product threshold inversion failed",
            diagnostics={"p": p, "d": d, "bracket": (0.0, upper)},
        ) from exc
    return rho


def thresholds(p: float, d: int) -> ThresholdSet:
    """All three thresholds at ``(p, d)``."""
    return ThresholdSet(
        xi=gaussian_tail_threshold(p, d),
        tau=spherical_threshold(p, d),
        rho=gaussian_product_threshold(p, d),
    )


# -- interval probabilities ----------------------------------------------------


@FrozenDataclass()
class IntervalProbability:
    """Mass of ``[theta + a, theta + a + delta]`` with its fitted window constant.

    Attributes:
        value: The probability.
        fitted_constant: Smallest ``C`` with ``value`` inside
            ``[delta p sqrt(d) / (C sqrt(log d)), delta p sqrt(d) C sqrt(log d)]``;
            ``None`` when the window is degenerate (zero width, zero mass, ``d = 1``
            or an unbounded interval).
        window_ok: Whether ``|a|`` and ``delta`` lie inside the validity window
            ``1 / (log(d) sqrt(d))``. When false the window statement does not apply.
    """

    value: float
    fitted_constant: float | None
    window_ok: bool


def _tail(kind: CenterKind, x: float, d: int) -> float:
    if kind == "xi":
        return gaussian_tail(x, d)
    if kind == "tau":
        return spherical_tail(x, d)
    return gaussian_product_tail(x, d)


def threshold_for(kind: CenterKind, p: float, d: int) -> float:
    """The threshold named by ``kind`` at ``(p, d)``."""
    if kind == "xi":
        return gaussian_tail_threshold(p, d)
    if kind == "tau":
        return spherical_threshold(p, d)
    return gaussian_product_threshold(p, d)


def interval_probability(
    center_kind: CenterKind, a: float, delta: float, p: float, d: int
) -> IntervalProbability:
    """Probability that the edge statistic lands in ``[theta + a, theta + a + delta]``.

    ``theta`` is the threshold named by ``center_kind``; the law is the scalar
    Gaussian for ``xi``, the spherical inner product for ``tau`` and the Gaussian
    inner product for ``rho``. ``a = -inf`` or ``delta = inf`` give unbounded
    intervals.

    Raises:
        DomainError: If ``delta < 0``.
    """
    if delta < 0.0 or math.isnan(delta):
        raise DomainError(f"delta must be >= 0, got {delta}")
    theta = threshold_for(center_kind, p, d)
    if delta == 0.0:
        value = 0.0
    else:
        lower = theta + a
        upper = lower + delta
        value = _tail(center_kind, lower, d) - _tail(center_kind, upper, d)
        value = min(1.0, max(0.0, value))

    log_d = math.log(d) if d > 1 else 0.0
    window = 1.0 / (log_d * math.sqrt(d)) if log_d > 0 else 0.0
    window_ok = log_d > 0 and abs(a) <= window and delta <= window
    if not window_ok:
        logger.warning(
            "Interval outside the validity window.",
            event="distributions.interval.window",
            context={"kind": center_kind, "a": a, "delta": delta, "window": window},
        )

    fitted: float | None = None
    reference = delta * p * math.sqrt(d)
    if value > 0.0 and log_d > 0 and math.isfinite(reference) and reference > 0.0:
        root = math.sqrt(log_d)
        fitted = max(value / (reference * root), reference / (value * root))
    return IntervalProbability(value=value, fitted_constant=fitted, window_ok=window_ok)


# -- Bartlett decomposition ------------------------------------------------------


def bartlett_batch(k: int, d: int, size: int, rng: np.random.Generator) -> FloatMatrix:
    """Draw ``size`` independent Bartlett coordinate matrices, shape ``(size, k, k)``.

    Below the diagonal entries are ``N(0, 1/d)``; diagonal entry ``j`` (0-indexed)
    is ``sqrt(chi2(d - j) / d)``. Each matrix is the triangular form of ``k``
    i.i.d. ``N(0, I/d)`` vectors in their Gram-Schmidt basis.

    Raises:
        DomainError: If ``k > d`` or ``k < 1``.
    """
    if k < 1 or k > d:
        raise DomainError(f"Bartlett frames need 1 <= k <= d, got k={k}, d={d}")
    coords = np.tril(rng.standard_normal((size, k, k)), k=-1) / math.sqrt(d)
    dof = d - np.arange(k)
    diag = np.sqrt(rng.chisquare(dof, size=(size, k)) / d)
    idx = np.arange(k)
    coords[:, idx, idx] = diag
    return coords


def bartlett_sample(k: int, d: int, rng: np.random.Generator) -> BartlettFrame:
    """Draw one Bartlett frame of ``k`` vectors in dimension ``d``.

    Example:
        >>> from rgg_lab.rng import stream
        >>> frame = bartlett_sample(3, 10, stream(1))
        >>> frame.coords.shape
        (3, 3)
    """
    return BartlettFrame(k=k, d=d, coords=bartlett_batch(k, d, 1, rng)[0])
