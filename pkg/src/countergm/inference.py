"""Monte Carlo maximum likelihood, method of moments, tests, and diagnostics.

The likelihood of these models is known only up to an intractable normalizing
constant, but the *ratio* of normalizing constants at two parameter values is
an expectation under one of them:

    κ(θ')/κ(θ) = E_θ[exp((θ'−θ)·g(Y))],

so a sample of sufficient-statistic vectors drawn at θ turns the
log-likelihood difference ℓ(θ')−ℓ(θ) into a computable function of θ'.
:func:`mcmc_mle` alternates sampling with maximizing that estimated
difference inside a trust region until the simulated mean statistics match
the observed ones; :func:`mom_fit` reaches the same fixed point (the two
estimators coincide for linear exponential families) by Robbins–Monro
stochastic approximation.  Reported standard errors combine the inverse
Fisher information with the MCMC uncertainty of the estimate itself.

Model degeneracy — the sampled statistic distribution splitting into two
separated phases — is detected and raises :class:`DegeneracyError` rather
than letting the optimizer chase an unusable approximation.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .distributions import zmp_match_zero
from .network import CountNetwork, NodeAttributes
from .sampler import SampleBatch, SamplerControl, sample
from .terms import (
    ModelError,
    ModelSpec,
    NonzeroCount,
    StatVector,
    Sum,
    ThetaConstraint,
    eval_stats,
    theta_constraints,
)

__all__ = [
    "DegeneracyError",
    "DiagnosticsReport",
    "FitControl",
    "FitResult",
    "MonteCarloTest",
    "default_theta0",
    "diagnostics",
    "effective_sample_size",
    "fit_diagnostics",
    "log_normconst_ratio",
    "mcmc_mle",
    "mom_fit",
    "monte_carlo_test",
]


class DegeneracyError(RuntimeError):
    """The sampled statistic distribution split into two separated phases.

    Carries the offending parameter vector and a diagnostics report; fits
    abort with this rather than continuing against a bimodal sample.
    """

    def __init__(self, message: str, theta=None, report=None):
        super().__init__(message)
        self.theta = theta
        self.report = report


@dataclass(frozen=True)
class FitControl:
    """Numerical controls for the fitting algorithms.

    ``sampler`` governs each iteration's chains (``chains`` of them, run
    concurrently on ``threads`` workers; 0 picks a sensible default).
    MCMLE stops when every statistic's simulated mean is within
    ``tolerance`` sample standard deviations of its observed value and the
    per-statistic effective sample size is at least ``min_ess`` (without the
    ESS floor a short noisy sample could satisfy the tolerance by luck).
    θ updates are capped at Mahalanobis radius ``trust_radius`` in the
    current sample covariance metric, and box/half-space constraints are
    enforced with an interior ``margin``.  ``gain_a``/``gain_t0``/
    ``gain_exponent`` parameterize the Robbins–Monro gain
    a_t = gain_a/(t + gain_t0)^gain_exponent for :func:`mom_fit`, which
    takes ``mom_steps`` stochastic-approximation steps.
    """

    sampler: SamplerControl = field(default_factory=SamplerControl)
    chains: int = 2
    threads: int = 0
    max_iterations: int = 60
    tolerance: float = 0.1
    min_ess: float = 400.0
    trust_radius: float = 2.0
    margin: float = 1e-6
    gain_a: float = 0.1
    gain_t0: float = 10.0
    gain_exponent: float = 0.75
    mom_steps: int = 300

    def __post_init__(self) -> None:
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if not 0.5 < self.gain_exponent <= 1.0:
            raise ValueError(
                f"gain exponent must be in (0.5, 1], got {self.gain_exponent}"
            )
        if self.chains < 1:
            raise ValueError(f"chains must be >= 1, got {self.chains}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.trust_radius <= 0:
            raise ValueError(f"trust_radius must be > 0, got {self.trust_radius}")
        if self.margin <= 0:
            raise ValueError(f"margin must be > 0, got {self.margin}")
        if self.mom_steps < 1:
            raise ValueError(f"mom_steps must be >= 1, got {self.mom_steps}")


@dataclass(frozen=True, eq=False)
class FitResult:
    """Point estimate plus uncertainty and convergence bookkeeping.

    ``vcov`` is the total variance–covariance matrix (inverse estimated
    Fisher information plus the MCMC-approximation component, which is also
    exposed separately as ``vcov_mcmc``); ``std_errors`` are its square-root
    diagonal.  ``status`` is ``converged``, ``boundary`` (moment equations
    met on a natural-parameter-space boundary — estimator guarantees do not
    apply there, so it is always surfaced), or ``max_iterations``.
    ``sample_stats`` pools the retained statistic vectors of the final
    iteration's chains; rows are draws at ``theta``.
    """

    labels: tuple[str, ...]
    theta: np.ndarray
    vcov: np.ndarray
    vcov_mcmc: np.ndarray
    std_errors: np.ndarray
    iterations: int
    converged: bool
    status: str
    boundary: tuple[str, ...]
    sample_stats: np.ndarray
    observed: StatVector
    loglik_ratio: float
    max_discrepancy: float
    min_ess: float
    acceptance_rate: float
    seed: int

    def __post_init__(self) -> None:
        for name in ("theta", "vcov", "vcov_mcmc", "std_errors", "sample_stats"):
            a = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.float64))
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    def mcmc_std_errors(self) -> np.ndarray:
        """MCMC-only component of the standard errors."""
        return np.sqrt(np.diag(self.vcov_mcmc))

    def summary_table(self) -> str:
        """Human-readable estimate table (term, estimate, SE, Wald star at 5%)."""
        width = max(len(lab) for lab in self.labels)
        lines = [f"{'term'.ljust(width)}  {'estimate':>10}  {'std.err':>9}"]
        for lab, th, se in zip(self.labels, self.theta, self.std_errors):
            star = " *" if se > 0 and abs(th) / se > 1.959963984540054 else ""
            lines.append(f"{lab.ljust(width)}  {th:>10.4f}  {se:>9.4f}{star}")
        lines.append(f"status: {self.status} after {self.iterations} iteration(s)")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Normalizing-constant ratio
# ---------------------------------------------------------------------------


def _logmeanexp(u: np.ndarray) -> float:
    m = float(np.max(u))
    return m + math.log(float(np.mean(np.exp(u - m))))


def _weight_ess(u: np.ndarray) -> float:
    """Effective sample size of importance weights proportional to exp(u)."""
    w = np.exp(u - np.max(u))
    w /= w.sum()
    return float(1.0 / np.sum(w * w))


def log_normconst_ratio(sample_batch: SampleBatch, theta, theta_prime) -> float:
    """log κ(θ')/κ(θ) estimated from a sample drawn at θ.

    Computed as logmeanexp_s((θ'−θ)·g(Y^(s))) for stability.  Warns when the
    implied importance effective sample size drops below 5 — the estimate is
    then dominated by a handful of draws and should not be trusted.
    """
    g = sample_batch.stats
    if g.shape[0] == 0:
        raise ValueError("empty sample")
    dtheta = np.asarray(theta_prime, dtype=np.float64) - np.asarray(theta, dtype=np.float64)
    if dtheta.shape != (g.shape[1],):
        raise ValueError(f"theta dimension {dtheta.shape} does not match stats {g.shape}")
    u = g @ dtheta
    ess = _weight_ess(u)
    if ess < 5.0:
        warnings.warn(
            f"normalizing-constant ratio estimate is unreliable: importance ESS "
            f"{ess:.2f} < 5 (theta and theta_prime are too far apart for this sample)",
            RuntimeWarning,
            stacklevel=2,
        )
    return _logmeanexp(u)


# ---------------------------------------------------------------------------
# MCMC diagnostics
# ---------------------------------------------------------------------------


def effective_sample_size(x: np.ndarray) -> float:
    """ESS of a (possibly autocorrelated) scalar chain, by the initial
    monotone positive sequence estimator on paired autocovariances."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if n < 4:
        return float(n)
    xc = x - x.mean()
    c0 = float(xc @ xc) / n
    if c0 == 0.0:
        return float(n)
    # autocovariances via FFT
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n].real / n
    # pair consecutive lags; keep while pairs stay positive and non-increasing
    tau = acov[0]
    prev = math.inf
    t = 1
    while t + 1 < n:
        pair = acov[t] + acov[t + 1]
        if pair <= 0.0:
            break
        pair = min(pair, prev)
        tau += 2.0 * pair
        prev = pair
        t += 2
    return float(n * c0 / tau) if tau > 0 else float(n)


def _split_two_means(col: np.ndarray) -> tuple[float, float, float, float]:
    """Best two-cluster split of a 1-D sample.

    Returns (separation D, smaller cluster mass, left mean, right mean) for
    the split minimizing within-cluster sum of squares; D is the
    Ashman-style statistic √2·|μ₁−μ₂|/√(σ₁²+σ₂²), infinite for two
    zero-variance clusters with distinct means.
    """
    x = np.sort(col)
    n = x.size
    cs = np.cumsum(x)
    cs2 = np.cumsum(x * x)
    k = np.arange(1, n)          # left cluster size
    lm = cs[:-1] / k
    rm = (cs[-1] - cs[:-1]) / (n - k)
    lss = np.maximum(cs2[:-1] - k * lm * lm, 0.0)
    rss = np.maximum((cs2[-1] - cs2[:-1]) - (n - k) * rm * rm, 0.0)
    best = int(np.argmin(lss + rss))
    k1 = best + 1
    mu1, mu2 = float(lm[best]), float(rm[best])
    v1 = float(lss[best]) / max(k1 - 1, 1)
    v2 = float(rss[best]) / max(n - k1 - 1, 1)
    if v1 + v2 == 0.0:
        d = math.inf if mu1 != mu2 else 0.0
    else:
        d = math.sqrt(2.0) * abs(mu1 - mu2) / math.sqrt(v1 + v2)
    return d, min(k1, n - k1) / n, mu1, mu2


_BIMODAL_D = 2.5
_BIMODAL_MASS = 0.15
_BIMODAL_VALLEY = 0.10


def _bimodal(col: np.ndarray) -> bool:
    """Two separated phases: well-split clusters with an empty valley between.

    Cluster separation alone cannot distinguish two phases from one broad
    mode (a hard two-means split of a pure Gaussian already scores D ≈ 2.6),
    so the middle 40% of the between-means interval must also be nearly
    unoccupied — that valley is what phase coexistence actually looks like.
    """
    if np.unique(col).size < 8:
        # too little support to evidence two phases (e.g. a saturated
        # bounded statistic); the mean-vs-observed z-score catches these
        return False
    d, mass, mu1, mu2 = _split_two_means(col)
    if d <= _BIMODAL_D or mass < _BIMODAL_MASS or mu2 <= mu1:
        return False
    delta = mu2 - mu1
    lo, hi = mu1 + 0.3 * delta, mu2 - 0.3 * delta
    p_mid = float(np.mean((col > lo) & (col < hi)))
    p_lo = float(np.mean(col <= lo))
    p_hi = float(np.mean(col >= hi))
    return p_mid < _BIMODAL_VALLEY and p_lo >= _BIMODAL_MASS and p_hi >= _BIMODAL_MASS


@dataclass(frozen=True, eq=False)
class DiagnosticsReport:
    """Per-statistic chain summaries from a sample at a parameter value."""

    labels: tuple[str, ...]
    mean: np.ndarray
    sd: np.ndarray
    ess: np.ndarray
    mcse: np.ndarray
    observed: np.ndarray
    z: np.ndarray                 # (mean − observed) / mcse
    bimodal: tuple[bool, ...]
    acceptance_rate: float

    @property
    def any_bimodal(self) -> bool:
        return any(self.bimodal)

    def summary(self) -> str:
        width = max(len(lab) for lab in self.labels)
        head = (f"{'statistic'.ljust(width)}  {'sim.mean':>11}  {'sd':>9}  "
                f"{'ESS':>7}  {'observed':>11}  {'z':>7}  flag")
        lines = [head]
        for k, lab in enumerate(self.labels):
            flag = "BIMODAL" if self.bimodal[k] else ""
            lines.append(
                f"{lab.ljust(width)}  {self.mean[k]:>11.3f}  {self.sd[k]:>9.3f}  "
                f"{self.ess[k]:>7.0f}  {self.observed[k]:>11.3f}  {self.z[k]:>7.2f}  {flag}"
            )
        lines.append(f"acceptance rate: {self.acceptance_rate:.3f}")
        return "\n".join(lines)


def _diagnose(
    stats_per_chain: Sequence[np.ndarray],
    labels: tuple[str, ...],
    observed: np.ndarray,
    acceptance_rate: float,
) -> DiagnosticsReport:
    pooled = np.vstack(stats_per_chain)
    p = pooled.shape[1]
    mean = pooled.mean(axis=0)
    sd = pooled.std(axis=0, ddof=1)
    ess = np.empty(p)
    for k in range(p):
        ess[k] = sum(effective_sample_size(c[:, k]) for c in stats_per_chain)
    with np.errstate(divide="ignore", invalid="ignore"):
        mcse = np.where(ess > 0, sd / np.sqrt(ess), np.inf)
        z = np.where(mcse > 0, (mean - observed) / mcse, 0.0)
    flags = tuple(bool(_bimodal(pooled[:, k])) for k in range(p))
    return DiagnosticsReport(
        labels=labels, mean=mean, sd=sd, ess=ess, mcse=mcse,
        observed=np.asarray(observed, dtype=np.float64), z=z,
        bimodal=flags, acceptance_rate=acceptance_rate,
    )


def diagnostics(sample_batch: SampleBatch, observed: StatVector) -> DiagnosticsReport:
    """Trace summaries, ESS, mean-vs-observed z-scores, and a bimodality flag."""
    if tuple(sample_batch.labels) != tuple(observed.labels):
        raise ValueError(
            f"sample labels {sample_batch.labels} do not match observed "
            f"{observed.labels}"
        )
    return _diagnose(
        [sample_batch.stats], tuple(sample_batch.labels), observed.values,
        sample_batch.acceptance_rate,
    )


def fit_diagnostics(fit: FitResult) -> DiagnosticsReport:
    """Diagnostics for the final sample retained inside a fit.

    The pooled statistic matrix is treated as one chain, so the ESS is a
    slightly conservative view across chain joins.
    """
    return _diagnose(
        [fit.sample_stats], fit.labels, fit.observed.values, fit.acceptance_rate,
    )


# ---------------------------------------------------------------------------
# Shared fitting machinery
# ---------------------------------------------------------------------------


def _resolve_threads(control: FitControl) -> int:
    if control.threads > 0:
        return control.threads
    import os

    return max(1, min(control.chains, os.cpu_count() or 1))


def _master_seed(control: FitControl) -> int:
    if control.sampler.seed is not None:
        return int(control.sampler.seed)
    return int(np.random.SeedSequence().generate_state(1, np.uint64)[0])


def _iteration_seeds(master: int, iteration: int, chains: int) -> list[int]:
    ss = np.random.SeedSequence(entropy=master, spawn_key=(iteration,))
    return [int(s) for s in ss.generate_state(chains, np.uint64)]


def _run_chains(
    model: ModelSpec,
    theta: np.ndarray,
    y0: CountNetwork,
    attrs: NodeAttributes | None,
    control: FitControl,
    master: int,
    iteration: int,
    draws_mult: int = 1,
) -> list[SampleBatch]:
    seeds = _iteration_seeds(master, iteration, control.chains)
    base = control.sampler
    eff = SamplerControl(
        burnin=base.burnin, interval=base.interval,
        draws=base.draws * draws_mult, pi0=base.pi0,
    )
    controls = [eff.with_seed(s) for s in seeds]
    nw = _resolve_threads(control)
    if nw == 1 or control.chains == 1:
        return [sample(model, theta, y0, attrs, c) for c in controls]
    with ThreadPoolExecutor(max_workers=nw) as pool:
        futures = [pool.submit(sample, model, theta, y0, attrs, c) for c in controls]
        return [f.result() for f in futures]


def _check_degeneracy(
    batches: Sequence[SampleBatch],
    labels: tuple[str, ...],
    observed: np.ndarray,
    theta: np.ndarray,
) -> None:
    report = _diagnose(
        [b.stats for b in batches], labels, observed,
        float(np.mean([b.acceptance_rate for b in batches])),
    )
    if report.any_bimodal:
        bad = [lab for lab, f in zip(labels, report.bimodal) if f]
        raise DegeneracyError(
            "sampled statistics are bimodal for "
            + ", ".join(bad)
            + f" at theta={np.array2string(theta, precision=4)}: the model places "
            "its mass in two separated phases (near-degeneracy); change the model "
            "(e.g. center the offending statistic) or move the starting value",
            theta=theta.copy(),
            report=report,
        )


def _project(theta: np.ndarray, cons: list[ThetaConstraint], margin: float) -> np.ndarray:
    """Cyclic projection onto the intersection of half-spaces with a margin."""
    th = theta.copy()
    for _ in range(32):
        moved = False
        for c in cons:
            v = float(c.coeffs @ th) - (c.bound - margin)
            if v > 0:
                nrm = float(c.coeffs @ c.coeffs)
                th -= c.coeffs * (v / nrm)
                moved = True
        if not moved:
            return th
    raise ModelError("could not project the parameter vector into the constraint set")


def _regularized_cov(g: np.ndarray) -> np.ndarray:
    p = g.shape[1]
    c = np.cov(g.T, ddof=1).reshape(p, p)
    scale = max(float(np.max(np.diag(c))), 1e-12)
    return c + np.eye(p) * scale * 1e-10


def _mcmle_step(
    theta: np.ndarray,
    g_obs: np.ndarray,
    pooled: np.ndarray,
    cov: np.ndarray,
    cons: list[ThetaConstraint],
    control: FitControl,
) -> tuple[np.ndarray, float]:
    """Maximize the sampled log-likelihood difference inside the trust region.

    Returns the new theta and the estimated ℓ(θ_new) − ℓ(θ) along this step.
    """
    s_draws = pooled.shape[0]

    def neg(dt: np.ndarray) -> tuple[float, np.ndarray]:
        u = pooled @ dt
        m = np.max(u)
        w = np.exp(u - m)
        sw = w.sum()
        val = float(dt @ g_obs) - (m + math.log(sw / s_draws))
        grad = g_obs - (pooled.T @ w) / sw
        return -val, -grad

    res = minimize(neg, np.zeros_like(theta), jac=True, method="L-BFGS-B")
    dt = res.x
    # trust region in the sample-covariance metric
    norm = math.sqrt(float(dt @ cov @ dt))
    if norm > control.trust_radius:
        dt *= control.trust_radius / norm
    # keep importance weights usable
    floor = min(10.0, s_draws / 2.0)
    for _ in range(8):
        if _weight_ess(pooled @ dt) >= floor or not np.any(dt):
            break
        dt *= 0.5
    new = _project(theta + dt, cons, control.margin)
    dt_eff = new - theta
    gain = float(dt_eff @ g_obs) - _logmeanexp(pooled @ dt_eff)
    return new, gain


def _batch_means_cov(stats_per_chain: Sequence[np.ndarray]) -> np.ndarray:
    """Estimated covariance of the pooled mean statistic vector, by batch means."""
    p = stats_per_chain[0].shape[1]
    batch_means = []
    blen_total = 0
    for g in stats_per_chain:
        s = g.shape[0]
        nb = max(int(math.floor(math.sqrt(s))), 2)
        blen = s // nb
        if blen < 1:
            continue
        trimmed = g[: nb * blen].reshape(nb, blen, p).mean(axis=1)
        batch_means.append((trimmed, blen))
        blen_total += nb * blen
    if not batch_means or blen_total == 0:
        return np.zeros((p, p))
    # pool batch means; weight each chain's batches by its batch length
    total = np.zeros((p, p))
    nb_all = 0
    grand = np.vstack([bm for bm, _ in batch_means]).mean(axis=0)
    for bm, blen in batch_means:
        dev = bm - grand
        total += blen * (dev.T @ dev)
        nb_all += bm.shape[0]
    if nb_all < 2:
        return np.zeros((p, p))
    tavc = total / (nb_all - 1)          # time-average variance constant
    return tavc / blen_total


def _finalize(
    model: ModelSpec,
    theta: np.ndarray,
    batches: Sequence[SampleBatch],
    observed: StatVector,
    cons: list[ThetaConstraint],
    control: FitControl,
    iterations: int,
    converged: bool,
    loglik_ratio: float,
    master: int,
) -> FitResult:
    pooled = np.vstack([b.stats for b in batches])
    report = _diagnose(
        [b.stats for b in batches], tuple(observed.labels), observed.values,
        float(np.mean([b.acceptance_rate for b in batches])),
    )
    cov = _regularized_cov(pooled)
    try:
        fisher_inv = np.linalg.inv(cov)
    except np.linalg.LinAlgError:
        fisher_inv = np.linalg.pinv(cov)
    sigma_mean = _batch_means_cov([b.stats for b in batches])
    vcov_mcmc = fisher_inv @ sigma_mean @ fisher_inv
    vcov = fisher_inv + vcov_mcmc
    vcov = (vcov + vcov.T) / 2.0
    sd = report.sd
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = np.where(sd > 0, np.abs(report.mean - observed.values) / sd, np.inf)
    active = tuple(
        c.description for c in cons
        if float(c.coeffs @ theta) >= c.bound - 2.0 * control.margin
    )
    if active:
        status = "boundary"
    elif converged:
        status = "converged"
    else:
        status = "max_iterations"
    return FitResult(
        labels=tuple(observed.labels),
        theta=theta,
        vcov=vcov,
        vcov_mcmc=vcov_mcmc,
        std_errors=np.sqrt(np.maximum(np.diag(vcov), 0.0)),
        iterations=iterations,
        converged=converged,
        status=status,
        boundary=active,
        sample_stats=pooled,
        observed=observed,
        loglik_ratio=loglik_ratio,
        max_discrepancy=float(np.max(disc)),
        min_ess=float(np.min(report.ess)),
        acceptance_rate=report.acceptance_rate,
        seed=master,
    )


def default_theta0(
    model: ModelSpec,
    y_obs: CountNetwork,
    attrs: NodeAttributes | None = None,
) -> np.ndarray:
    """Dyad-independent starting values.

    The intensity (Sum) coefficient starts at the log mean count (its exact
    MLE when it is the only term), the zero-modification coefficient at the
    value reproducing the observed zero fraction given that intensity, and
    everything else at zero; the result is projected strictly inside the
    constraint set.
    """
    vals = y_obs.dyad_values()
    mean = max(float(vals.mean()), 1e-4)
    theta = np.zeros(model.p)
    sum_idx = [k for k, t in enumerate(model.terms) if isinstance(t, Sum)]
    if sum_idx:
        if model.reference == "poisson":
            theta[sum_idx[0]] = math.log(mean)
        else:
            theta[sum_idx[0]] = math.log(mean / (1.0 + mean))
    nz_idx = [k for k, t in enumerate(model.terms) if isinstance(t, NonzeroCount)]
    if nz_idx and sum_idx and model.reference == "poisson":
        zero_frac = min(max(float((vals == 0).mean()), 1e-4), 1.0 - 1e-4)
        theta[nz_idx[0]] = zmp_match_zero(theta[sum_idx[0]], zero_frac)
    cons = theta_constraints(model, y_obs, attrs)
    return _project(theta, cons, 1e-3)


# ---------------------------------------------------------------------------
# Fitting algorithms
# ---------------------------------------------------------------------------


def mcmc_mle(
    model: ModelSpec,
    y_obs: CountNetwork,
    attrs: NodeAttributes | None = None,
    theta0=None,
    control: FitControl = FitControl(),
) -> FitResult:
    """Monte Carlo maximum likelihood via iterated normalizing-constant ratios.

    Each iteration samples statistic vectors at the current θ, checks the
    moment equations for convergence, and otherwise maximizes the estimated
    log-likelihood difference within a trust region.  Raises
    :class:`DegeneracyError` when the sampled statistics are bimodal;
    non-convergence within ``control.max_iterations`` is reported through
    ``FitResult.status``, not raised.
    """
    observed = eval_stats(model, y_obs, attrs)
    if not np.all(np.isfinite(observed.values)):
        raise ModelError(f"observed statistics are not finite: {observed.as_dict()}")
    cons = theta_constraints(model, y_obs, attrs)
    if theta0 is None:
        theta = default_theta0(model, y_obs, attrs)
    else:
        theta = np.asarray(theta0, dtype=np.float64).copy()
        if theta.shape != (model.p,):
            raise ModelError(f"theta0 shape {theta.shape} does not match p={model.p}")
        theta = _project(theta, cons, control.margin)
    master = _master_seed(control)
    g_obs = observed.values
    loglik = 0.0
    batches: list[SampleBatch] = []
    converged = False
    iterations = 0

    draws_mult = 1
    for it in range(1, control.max_iterations + 1):
        iterations = it
        batches = _run_chains(model, theta, y_obs, attrs, control, master, it, draws_mult)
        _check_degeneracy(batches, tuple(observed.labels), g_obs, theta)
        pooled = np.vstack([b.stats for b in batches])
        mean = pooled.mean(axis=0)
        sd = pooled.std(axis=0, ddof=1)
        ess = np.array([
            sum(effective_sample_size(b.stats[:, k]) for b in batches)
            for k in range(model.p)
        ])
        with np.errstate(divide="ignore", invalid="ignore"):
            disc = np.where(sd > 0, np.abs(mean - g_obs) / sd, np.inf)
        if float(np.max(disc)) < control.tolerance:
            if float(np.min(ess)) >= control.min_ess:
                converged = True
                break
            # moments agree but the sample is too autocorrelated to certify
            # them; a new theta cannot help, a bigger sample can
            draws_mult = min(draws_mult * 2, 16)
            continue
        cov = _regularized_cov(pooled)
        theta, gain = _mcmle_step(theta, g_obs, pooled, cov, cons, control)
        loglik += gain

    return _finalize(
        model, theta, batches, observed, cons, control,
        iterations, converged, loglik, master,
    )


def mom_fit(
    model: ModelSpec,
    y_obs: CountNetwork,
    attrs: NodeAttributes | None = None,
    theta0=None,
    control: FitControl = FitControl(),
) -> FitResult:
    """Method-of-moments fit by Robbins–Monro stochastic approximation.

    Updates θ_{t+1} = θ_t − a_t D⁻¹(g(Y_t) − g(y_obs)) with the decreasing
    gain from ``control`` and a diagonal scaling D taken from a pilot sample
    at the start.  For these linear exponential families the moment estimator
    coincides with the MLE, so the result is comparable to :func:`mcmc_mle`;
    convergence is declared by the same moment-equation check on a final
    full-size sample.
    """
    observed = eval_stats(model, y_obs, attrs)
    cons = theta_constraints(model, y_obs, attrs)
    if theta0 is None:
        theta = default_theta0(model, y_obs, attrs)
    else:
        theta = np.asarray(theta0, dtype=np.float64).copy()
        if theta.shape != (model.p,):
            raise ModelError(f"theta0 shape {theta.shape} does not match p={model.p}")
        theta = _project(theta, cons, control.margin)
    master = _master_seed(control)
    g_obs = observed.values

    if control.gain_a == 0.0:
        # degenerate gain: no movement is possible; report honestly
        batches = _run_chains(model, theta, y_obs, attrs, control, master, 0)
        return _finalize(
            model, theta, batches, observed, cons, control, 0, False, 0.0, master,
        )

    pilot = _run_chains(model, theta, y_obs, attrs, control, master, 0)
    _check_degeneracy(pilot, tuple(observed.labels), g_obs, theta)
    d_scale = np.vstack([b.stats for b in pilot]).std(axis=0, ddof=1)
    d_scale = np.maximum(d_scale, 1e-8 * max(float(d_scale.max()), 1.0))

    # short per-step chains: a fraction of the configured draws
    step_draws = max(control.sampler.draws // 10, 20)
    step_ctl = SamplerControl(
        burnin=max(control.sampler.burnin // 4, 1),
        interval=control.sampler.interval,
        draws=step_draws,
        pi0=control.sampler.pi0,
    )
    seeds = _iteration_seeds(master, 10**6, control.mom_steps)
    for t in range(1, control.mom_steps + 1):
        b = sample(model, theta, y_obs, attrs, step_ctl.with_seed(seeds[t - 1]))
        g_t = b.stats.mean(axis=0)
        gain = control.gain_a / (t + control.gain_t0) ** control.gain_exponent
        theta = _project(theta - gain * (g_t - g_obs) / d_scale, cons, control.margin)

    batches = _run_chains(model, theta, y_obs, attrs, control, master, 10**6 + 1)
    _check_degeneracy(batches, tuple(observed.labels), g_obs, theta)
    pooled = np.vstack([b.stats for b in batches])
    mean = pooled.mean(axis=0)
    sd = pooled.std(axis=0, ddof=1)
    ess = np.array([
        sum(effective_sample_size(b.stats[:, k]) for b in batches)
        for k in range(model.p)
    ])
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = np.where(sd > 0, np.abs(mean - g_obs) / sd, np.inf)
    converged = bool(
        float(np.max(disc)) < control.tolerance and float(np.min(ess)) >= control.min_ess
    )
    return _finalize(
        model, theta, batches, observed, cons, control,
        control.mom_steps, converged, 0.0, master,
    )


# ---------------------------------------------------------------------------
# Monte Carlo null test
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MonteCarloTest:
    """One-sided Monte Carlo quantile test of a statistic against a null fit."""

    term_label: str
    observed: float
    p_value: float
    nsim: int
    sims: np.ndarray

    def __post_init__(self) -> None:
        s = np.ascontiguousarray(np.asarray(self.sims, dtype=np.float64))
        s.flags.writeable = False
        object.__setattr__(self, "sims", s)

    def quantiles(self, qs=(0.05, 0.25, 0.5, 0.75, 0.95)) -> dict[float, float]:
        return {q: float(np.quantile(self.sims, q)) for q in qs}


def monte_carlo_test(
    model_null: ModelSpec,
    null_fit: FitResult,
    stat_term,
    y_obs: CountNetwork,
    attrs: NodeAttributes | None = None,
    nsim: int = 1000,
    control: SamplerControl | None = None,
) -> MonteCarloTest:
    """Simulate a statistic under a fitted null and locate the observed value.

    The tracked term is appended to the null model with coefficient zero (so
    the null distribution is unchanged but the statistic is recorded), nsim
    networks are simulated at the null fit, and the one-sided p-value is
    (1 + #{simulated ≥ observed})/(nsim + 1).
    """
    if not null_fit.converged:
        raise ModelError(
            f"null fit did not converge (status {null_fit.status!r}); its "
            "simulated null distribution would be meaningless"
        )
    label = stat_term.label or stat_term.default_label()
    if label in model_null.labels:
        raise ModelError(
            f"statistic {label!r} is already part of the null model; drop it "
            "from the null before testing it"
        )
    tracked = ModelSpec(terms=model_null.terms + (stat_term,), reference=model_null.reference)
    theta_aug = np.concatenate([null_fit.theta, [0.0]])
    if control is None:
        control = SamplerControl()
    ctl = SamplerControl(
        burnin=control.burnin, interval=control.interval, draws=nsim,
        pi0=control.pi0, seed=control.seed,
    )
    batch = sample(tracked, theta_aug, y_obs, attrs, ctl)
    sims = batch.stats[:, -1]
    obs = float(eval_stats(tracked, y_obs, attrs).values[-1])
    p = (1.0 + float(np.sum(sims >= obs))) / (nsim + 1.0)
    return MonteCarloTest(
        term_label=label, observed=obs, p_value=p, nsim=nsim, sims=sims,
    )
