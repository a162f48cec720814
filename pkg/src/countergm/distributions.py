"""Exact univariate count distributions used as oracles and building blocks.

Four families appear throughout the model class:

* Poisson and geometric — the two reference measures, in their usual
  parametrizations.
* Zero-modified Poisson (ZMP) — canonical form ``exp(θ₁x + θ₂·1{x>0})/x!``,
  the single-dyad reduction of a Poisson-reference model with a dyad-sum and
  a nonzero-count statistic.
* Conway–Maxwell–Poisson (CMP) — canonical form ``exp(θ₁x + θ₂·log x!)``,
  which interpolates between Poisson (θ₂ = −1) and geometric (θ₂ = 0)
  behavior and whose natural parameter space is not open (the geometric
  boundary belongs to it only for θ₁ < 0).
* The square-root dispersion family ``exp(θ₁√x + θ₂x)/x!`` used as an
  always-well-behaved alternative to CMP.

Normalizing constants without closed forms are computed by adaptive series
summation with an explicit geometric tail bound; truncation is never silent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

__all__ = [
    "CmpParams",
    "ParameterSpaceError",
    "SeriesTruncationError",
    "cmp_in_natural_space",
    "cmp_log_normconst",
    "cmp_log_pmf",
    "cmp_moments",
    "cmp_pmf",
    "geometric_log_pmf",
    "log_factorial",
    "poisson_log_pmf",
    "sqrt_model_log_pmf",
    "sqrt_model_moments",
    "sqrt_model_tune",
    "zmp_log_p0",
    "zmp_log_pmf",
    "zmp_match_zero",
    "zmp_pmf",
]


class ParameterSpaceError(ValueError):
    """Parameters lie outside the natural parameter space of the family."""


class SeriesTruncationError(RuntimeError):
    """A series normalizer hit its term cap before meeting its tail bound."""


_LOGFACT_TABLE = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, 21)))))


def log_factorial(k):
    """log(k!), exact cumulative sums for k <= 20, log-gamma above.

    Accepts scalars or arrays of nonnegative integers.
    """
    k_arr = np.asarray(k)
    small = k_arr <= 20
    idx = np.minimum(k_arr, 20).astype(np.int64)
    out = np.where(small, _LOGFACT_TABLE[idx], gammaln(k_arr + 1.0))
    return float(out) if np.isscalar(k) else out


def poisson_log_pmf(mu: float, x) -> np.ndarray | float:
    """log pmf of Poisson(mu) at x (scalar or array)."""
    if mu <= 0:
        raise ParameterSpaceError(f"Poisson mean must be positive, got {mu}")
    x_arr = np.asarray(x, dtype=np.int64)
    out = x_arr * math.log(mu) - mu - log_factorial(x_arr)
    return float(out) if np.isscalar(x) else out


def geometric_log_pmf(p: float, x) -> np.ndarray | float:
    """log pmf of the geometric distribution on {0,1,2,...} with success prob p."""
    if not 0 < p <= 1:
        raise ParameterSpaceError(f"geometric success probability must be in (0,1], got {p}")
    x_arr = np.asarray(x, dtype=np.int64)
    out = x_arr * math.log1p(-p) + math.log(p) if p < 1 else np.where(x_arr == 0, 0.0, -np.inf)
    return float(out) if np.isscalar(x) else out


# ---------------------------------------------------------------------------
# Adaptive series normalizer
# ---------------------------------------------------------------------------

_REL_TOL = 1e-16
_TAIL_TOL = 1e-14
_CONSECUTIVE = 50
_TERM_CAP = 10**6


def log_series_sum(
    log_term: Callable[[int], float],
    cap: int = _TERM_CAP,
) -> float:
    """log of sum_{x>=0} exp(log_term(x)) by adaptive truncation.

    Accumulation stops once the relative term size has stayed below 1e-16
    for 50 consecutive decreasing terms *and* a geometric majorant bounds the
    remaining tail below 1e-14 of the partial sum.  Hitting the term cap
    raises :class:`SeriesTruncationError` instead of returning a silently
    truncated value.
    """
    log_partial = -math.inf
    prev = math.inf
    below = 0
    for x in range(cap):
        lt = log_term(x)
        log_partial = np.logaddexp(log_partial, lt)
        if lt < prev and lt - log_partial < math.log(_REL_TOL):
            below += 1
            if below >= _CONSECUTIVE:
                ratio = math.exp(lt - prev)
                tail_over_partial = math.exp(lt - log_partial) * ratio / (1.0 - ratio)
                if tail_over_partial < _TAIL_TOL:
                    return float(log_partial)
        else:
            below = 0
        prev = lt
    raise SeriesTruncationError(
        f"series did not meet its tail bound within {cap} terms "
        "(parameters are too close to the boundary of the natural parameter space)"
    )


def _series_moments(log_term: Callable[[int], float], cap: int = _TERM_CAP) -> tuple[float, float]:
    """(mean, variance) of the pmf proportional to exp(log_term(x))."""
    log_z = log_series_sum(log_term, cap=cap)
    mean = 0.0
    second = 0.0
    tiny = 0
    for x in range(cap):
        p = math.exp(log_term(x) - log_z)
        mean += x * p
        second += x * x * p
        if (x * x + 1.0) * p < 1e-18:
            tiny += 1
            if tiny >= 50:
                break
        else:
            tiny = 0
    return mean, second - mean * mean


# ---------------------------------------------------------------------------
# Conway–Maxwell–Poisson, canonical form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CmpParams:
    """Canonical CMP parameters: coefficient on x and on log(x!)."""

    theta1: float
    theta2: float


def cmp_in_natural_space(p: CmpParams) -> bool:
    """Exact membership predicate for the CMP natural parameter space.

    The space is {θ₂ < 0} ∪ {θ₂ = 0 and θ₁ < 0}: for negative θ₂ the
    factorial penalty makes the series converge for every θ₁, while on the
    θ₂ = 0 boundary the terms form a geometric series that converges only
    for θ₁ < 0.
    """
    return p.theta2 < 0 or (p.theta2 == 0 and p.theta1 < 0)


def _cmp_log_term(p: CmpParams) -> Callable[[int], float]:
    t1, t2 = p.theta1, p.theta2
    return lambda x: t1 * x + t2 * log_factorial(x)


def cmp_log_normconst(p: CmpParams) -> float:
    if not cmp_in_natural_space(p):
        raise ParameterSpaceError(
            f"CMP parameters (theta1={p.theta1}, theta2={p.theta2}) lie outside "
            "the natural parameter space {theta2<0} ∪ {theta2=0, theta1<0}"
        )
    if p.theta2 == 0:
        # geometric series: sum e^{θ₁x} = 1/(1 − e^{θ₁})
        return -math.log1p(-math.exp(p.theta1))
    if p.theta2 == -1.0:
        # Poisson: sum μ^x/x! = e^μ with μ = e^{θ₁}
        return math.exp(p.theta1)
    return log_series_sum(_cmp_log_term(p))


def cmp_log_pmf(p: CmpParams, x) -> np.ndarray | float:
    log_z = cmp_log_normconst(p)
    x_arr = np.asarray(x, dtype=np.int64)
    out = p.theta1 * x_arr + p.theta2 * log_factorial(x_arr) - log_z
    return float(out) if np.isscalar(x) else out


def cmp_pmf(p: CmpParams, x) -> np.ndarray | float:
    """pmf proportional to exp(θ₁x + θ₂ log x!).

    θ₂ = −1 recovers Poisson(e^{θ₁}); θ₂ = 0 with θ₁ < 0 recovers the
    geometric distribution with success probability 1 − e^{θ₁}.
    """
    return np.exp(cmp_log_pmf(p, x))


def cmp_moments(p: CmpParams) -> tuple[float, float]:
    """(mean, variance) of the CMP distribution, by series summation."""
    if not cmp_in_natural_space(p):
        raise ParameterSpaceError(
            f"CMP parameters (theta1={p.theta1}, theta2={p.theta2}) lie outside "
            "the natural parameter space"
        )
    return _series_moments(_cmp_log_term(p))


# ---------------------------------------------------------------------------
# Zero-modified Poisson
# ---------------------------------------------------------------------------


def zmp_log_p0(theta1: float, theta2: float) -> float:
    """log P(X=0) = −log(1 + e^{θ₂}(e^{e^{θ₁}} − 1)), computed stably."""
    mu = math.exp(theta1)
    return float(-np.logaddexp(0.0, theta2 + mu + math.log1p(-math.exp(-mu))))


def zmp_log_pmf(theta1: float, theta2: float, x) -> np.ndarray | float:
    """log pmf of the canonical zero-modified Poisson exp(θ₁x + θ₂·1{x>0})/x!.

    All real (θ₁, θ₂) are valid.  θ₂ = 0 reduces to Poisson(e^{θ₁});
    conditionally on being nonzero the distribution is always that of a
    zero-truncated Poisson(e^{θ₁}).
    """
    lp0 = zmp_log_p0(theta1, theta2)
    x_arr = np.asarray(x, dtype=np.int64)
    out = np.where(
        x_arr == 0,
        lp0,
        theta2 + theta1 * x_arr - log_factorial(x_arr) + lp0,
    )
    return float(out) if np.isscalar(x) else out


def zmp_pmf(theta1: float, theta2: float, x) -> np.ndarray | float:
    return np.exp(zmp_log_pmf(theta1, theta2, x))


def zmp_match_zero(theta1: float, zero_prob: float) -> float:
    """θ₂ giving P(X=0)=zero_prob at the given θ₁ (inverse of zmp_log_p0)."""
    if not 0 < zero_prob < 1:
        raise ValueError(f"zero probability must be in (0,1), got {zero_prob}")
    mu = math.exp(theta1)
    # 1/p0 − 1 = e^{θ₂}(e^μ − 1)
    return math.log1p(-zero_prob) - math.log(zero_prob) - mu - math.log1p(-math.exp(-mu))


# ---------------------------------------------------------------------------
# Square-root dispersion family
# ---------------------------------------------------------------------------


def _sqrt_log_term(theta1: float, theta2: float) -> Callable[[int], float]:
    return lambda x: theta1 * math.sqrt(x) + theta2 * x - log_factorial(x)


def sqrt_model_log_pmf(theta1: float, theta2: float, x) -> np.ndarray | float:
    """log pmf proportional to exp(θ₁√x + θ₂x)/x!; valid for all real θ."""
    log_z = log_series_sum(_sqrt_log_term(theta1, theta2))
    x_arr = np.asarray(x, dtype=np.int64)
    out = theta1 * np.sqrt(x_arr) + theta2 * x_arr - log_factorial(x_arr) - log_z
    return float(out) if np.isscalar(x) else out


def sqrt_model_moments(theta1: float, theta2: float) -> tuple[float, float]:
    return _series_moments(_sqrt_log_term(theta1, theta2))


def sqrt_model_tune(theta1: float, target_mean: float) -> float:
    """Find θ₂ such that the sqrt-dispersion family has the given mean.

    The mean is strictly increasing in θ₂, so the root is found by bracketed
    root-finding and refined until the induced mean matches ``target_mean``
    within 1e−10.  θ₁ = 0 with target 1 yields θ₂ = 0 (Poisson(1)); lower θ₁
    at the same mean gives greater dispersion, higher θ₁ less.
    """
    if target_mean <= 0:
        raise ValueError(f"target mean must be positive, got {target_mean}")

    def gap(theta2: float) -> float:
        return sqrt_model_moments(theta1, theta2)[0] - target_mean

    lo = math.log(target_mean) - 1.0
    hi = math.log(target_mean) + 1.0
    flo, fhi = gap(lo), gap(hi)
    for _ in range(60):
        if flo < 0 < fhi or flo > 0 > fhi:
            break
        if flo > 0:
            lo -= 2.0
            flo = gap(lo)
        else:
            hi += 2.0
            fhi = gap(hi)
    else:
        raise ValueError("failed to bracket the mean equation for sqrt_model_tune")
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    theta2 = brentq(gap, lo, hi, xtol=1e-13, rtol=8.9e-16)
    if abs(gap(theta2)) > 1e-10:
        raise ValueError(
            f"sqrt_model_tune did not reach the target mean: residual {gap(theta2):.3e}"
        )
    return float(theta2)
