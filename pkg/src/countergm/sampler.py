"""Metropolis–Hastings simulation from a count-network model.

One sampler step picks a dyad uniformly, proposes a new value for it — a
direct jump to zero with probability ``pi0`` when the current value is
nonzero, otherwise a draw from a Poisson(current + 1/2) kernel conditioned on
changing — and accepts with the usual Metropolis–Hastings ratio, which the
change statistics make cheap to evaluate.  The jump-to-zero mixture leaves
the stationary distribution untouched (it is absorbed into the Hastings
factor); it exists because count networks are typically zero-inflated and
plain kernel moves leave zeros too slowly.

:func:`sample` runs the compiled chain in :mod:`countergm._engine`;
:func:`mh_step` is a readable single-step reference implementation, kept in
sync by the test suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _engine
from .distributions import log_factorial
from .network import CountNetwork, NodeAttributes, dyad_arrays
from .terms import (
    ActorCovariance,
    ActorSum,
    CMP,
    DyadCovariate,
    ModelError,
    ModelSpec,
    MutualGeoMean,
    MutualMin,
    MutualNegAbsDiff,
    MutualProduct,
    NonzeroCount,
    SqrtSum,
    Sum,
    Transitivity,
    check_theta,
    conditional_logratio,
    eval_stats,
)

__all__ = ["SampleBatch", "SamplerControl", "mh_step", "proposal_pmf", "sample"]


@dataclass(frozen=True)
class SamplerControl:
    """Chain-length and proposal controls for one MCMC run.

    ``burnin`` steps are discarded, then the statistic vector is recorded
    every ``interval`` steps, ``draws`` times.  ``pi0`` is the probability of
    proposing a direct jump to zero from a nonzero value.
    """

    burnin: int = 10_000
    interval: int = 10
    draws: int = 1_000
    pi0: float = 0.2
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.burnin < 0:
            raise ValueError(f"burnin must be >= 0, got {self.burnin}")
        if self.interval < 1:
            raise ValueError(f"interval must be >= 1, got {self.interval}")
        if self.draws < 1:
            raise ValueError(f"draws must be >= 1, got {self.draws}")
        if not 0.0 <= self.pi0 < 1.0:
            raise ValueError(f"pi0 must be in [0, 1), got {self.pi0}")

    def with_seed(self, seed: int | None) -> SamplerControl:
        return replace(self, seed=seed)


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Retained sufficient statistics from one chain plus run metadata.

    ``value_counts[v]`` counts how often dyad value v occurred, pooled over
    all dyads and retained draws (values ≥ 511 share the top bin); it gives
    the empirical dyad pmf without storing the retained networks.
    """

    stats: np.ndarray              # (draws, p)
    labels: tuple[str, ...]
    final_network: CountNetwork
    acceptance_rate: float
    control: SamplerControl
    value_counts: np.ndarray | None = None

    def __post_init__(self) -> None:
        s = np.ascontiguousarray(np.asarray(self.stats, dtype=np.float64))
        if s.ndim != 2 or s.shape[1] != len(self.labels):
            raise ValueError(f"stats shape {s.shape} does not match {len(self.labels)} labels")
        s.flags.writeable = False
        object.__setattr__(self, "stats", s)
        object.__setattr__(self, "labels", tuple(self.labels))
        if self.value_counts is not None:
            h = np.ascontiguousarray(np.asarray(self.value_counts, dtype=np.int64))
            h.flags.writeable = False
            object.__setattr__(self, "value_counts", h)

    def value_pmf(self) -> np.ndarray:
        """Empirical dyad-value pmf from the pooled histogram."""
        if self.value_counts is None:
            raise ValueError("this batch carries no dyad-value histogram")
        return self.value_counts / self.value_counts.sum()


def proposal_pmf(y_star: int, y: int) -> float:
    """Kernel probability p(y*; y) of proposing y* from current value y.

    The kernel is Poisson(y + 1/2) conditioned on not drawing y itself:
    p(y*; y) = e^{−(y+½)}(y+½)^{y*}/y*! / (1 − e^{−(y+½)}(y+½)^{y}/y!).
    """
    if y_star == y:
        raise ValueError("proposal kernel excludes the current value (y_star == y)")
    if y_star < 0 or y < 0:
        raise ValueError(f"counts must be nonnegative, got y_star={y_star}, y={y}")
    lam = y + 0.5
    ll = math.log(lam)
    la = y_star * ll - lam - log_factorial(y_star)
    lb = y * ll - lam - log_factorial(y)
    return math.exp(la - math.log1p(-math.exp(lb)))


def _draw_proposal(rng: np.random.Generator, cur: int, pi0: float) -> int:
    if cur != 0 and pi0 > 0.0 and rng.random() < pi0:
        return 0
    lam = cur + 0.5
    y_star = int(rng.poisson(lam))
    while y_star == cur:
        y_star = int(rng.poisson(lam))
    return y_star


def _log_hastings(cur: int, y_star: int, pi0: float) -> float:
    """log q: ratio of reverse to forward proposal probabilities.

    Jumps to zero can arise from the zero shortcut or from the kernel, so
    the zero-target proposal probability is the mixture
    pi0 + (1 − pi0) p(0; current).
    """
    if cur == 0:
        fwd = proposal_pmf(y_star, 0)
        rev = pi0 + (1.0 - pi0) * proposal_pmf(0, y_star)
        return math.log(rev) - math.log(fwd)
    if y_star == 0:
        fwd = pi0 + (1.0 - pi0) * proposal_pmf(0, cur)
        rev = proposal_pmf(cur, 0)
        return math.log(rev) - math.log(fwd)
    return math.log(proposal_pmf(cur, y_star)) - math.log(proposal_pmf(y_star, cur))


def mh_step(
    model: ModelSpec,
    theta: np.ndarray,
    y: CountNetwork,
    attrs: NodeAttributes | None,
    pi0: float,
    rng: np.random.Generator,
) -> tuple[CountNetwork, bool]:
    """One Metropolis–Hastings step (reference implementation).

    Returns the next network state (the same object on rejection) and
    whether the proposal was accepted.
    """
    ii, jj = dyad_arrays(y.n, y.directed)
    d = int(rng.integers(len(ii)))
    i, j = int(ii[d]) + 1, int(jj[d]) + 1
    cur = y.value(i, j)
    y_star = _draw_proposal(rng, cur, pi0)
    logq = _log_hastings(cur, y_star, pi0)
    logr = logq + conditional_logratio(model, theta, y, attrs, i, j, cur, y_star)
    if logr >= 0.0 or rng.random() < math.exp(logr):
        return y.set_value(i, j, y_star), True
    return y, False


# ---------------------------------------------------------------------------
# Engine bridge
# ---------------------------------------------------------------------------

_ACOV_DIR = {"out": 0, "in": 1, "undirected": 2}
_TP_SEL = {"min": 0, "geomean": 1}
_COMB_SEL = {"max": 0, "sum": 1}
_AFF_SEL = {"min": 0, "geomean": 1}


def _compile_model(model: ModelSpec, y: CountNetwork, attrs: NodeAttributes | None):
    """Lower a ModelSpec to the engine's term-code arrays and covariate stack."""
    from .terms import _make_ctx

    ctx = _make_ctx(y, attrs)
    p = model.p
    codes = np.zeros(p, dtype=np.int64)
    f0 = np.zeros(p, dtype=np.int64)
    f1 = np.zeros(p, dtype=np.int64)
    f2 = np.zeros(p, dtype=np.int64)
    covidx = np.full(p, -1, dtype=np.int64)
    xs: list[np.ndarray] = []
    for k, t in enumerate(model.terms):
        aux = t._resolve(ctx)  # validates direction/covariates up front
        if isinstance(t, Sum):
            codes[k] = _engine.T_SUM
        elif isinstance(t, NonzeroCount):
            codes[k] = _engine.T_NONZERO
        elif isinstance(t, CMP):
            codes[k] = _engine.T_CMP
        elif isinstance(t, SqrtSum):
            codes[k] = _engine.T_SQRT
        elif isinstance(t, (DyadCovariate, ActorSum)):
            codes[k] = _engine.T_COV
            covidx[k] = len(xs)
            xs.append(np.ascontiguousarray(aux, dtype=np.float64))
        elif isinstance(t, MutualMin):
            codes[k] = _engine.T_MUTMIN
        elif isinstance(t, MutualNegAbsDiff):
            codes[k] = _engine.T_MUTNEGABS
        elif isinstance(t, MutualGeoMean):
            codes[k] = _engine.T_MUTGEO
            f0[k] = 1 if t.centered else 0
        elif isinstance(t, MutualProduct):
            codes[k] = _engine.T_MUTPROD
        elif isinstance(t, ActorCovariance):
            codes[k] = _engine.T_ACOV
            f0[k] = _ACOV_DIR[t.direction]
            f1[k] = 1 if t.centered else 0
        elif isinstance(t, Transitivity):
            codes[k] = _engine.T_TRANS
            f0[k] = _TP_SEL[t.twopath]
            f1[k] = _COMB_SEL[t.combine]
            f2[k] = _AFF_SEL[t.affect]
        else:  # pragma: no cover - ModelSpec already rejects unknown terms
            raise ModelError(f"term {t!r} has no compiled implementation")
    if xs:
        x_stack = np.ascontiguousarray(np.stack(xs))
    else:
        x_stack = np.zeros((0, y.n, y.n))
    return codes, f0, f1, f2, covidx, x_stack


def sample(
    model: ModelSpec,
    theta,
    y0: CountNetwork,
    attrs: NodeAttributes | None = None,
    control: SamplerControl = SamplerControl(),
) -> SampleBatch:
    """Run one MCMC chain and return the retained statistic matrix.

    Deterministic given ``control.seed``.  The parameter vector is checked
    against the model's natural-parameter-space constraints before the chain
    starts.
    """
    theta = np.ascontiguousarray(np.asarray(theta, dtype=np.float64))
    check_theta(model, theta, y0, attrs)
    codes, f0, f1, f2, covidx, x_stack = _compile_model(model, y0, attrs)
    ii, jj = dyad_arrays(y0.n, y0.directed)
    g0 = eval_stats(model, y0, attrs).values
    rng = np.random.default_rng(control.seed)
    y = y0.values.copy()
    stats, hist, accepted, total = _engine._run_chain(
        y, y0.directed, ii, jj, codes, f0, f1, f2, covidx, x_stack, theta,
        model.reference == "poisson", control.pi0,
        control.burnin, control.interval, control.draws,
        np.ascontiguousarray(g0), rng,
    )
    final = CountNetwork(n=y0.n, directed=y0.directed, values=y)
    return SampleBatch(
        stats=stats,
        labels=model.labels,
        final_network=final,
        acceptance_rate=accepted / total,
        control=control,
        value_counts=hist,
    )
