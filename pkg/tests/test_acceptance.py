"""End-to-end acceptance gate.

Every headline behavior of the package is pinned here with an explicit,
frozen tolerance: sampler exactness against closed-form dyad distributions,
change-statistic consistency across the whole term catalog, agreement of the
MCMC fitter with a deterministic IRLS oracle on dyad-independent models,
regression against frozen reference fits of the bundled datasets, Monte
Carlo screening tests, parameter-space handling of the factorial-weight
family, the dispersion ordering of the square-root model, and the
degeneracy guard on the uncentered within-actor product statistic.

All sampler budgets (burn-in, interval, draws, seeds) are frozen so a run
is reproducible bit for bit; each test states its tolerance inline.  The
fraternity tests are conditional on the count file being dropped into the
package data directory (see ``countergm/data/README.md``).
"""

import math
import time

import numpy as np
import pytest
import scipy.stats as st

import _oracles as O
from conftest import random_attrs, random_network
from countergm import (
    CMP,
    ActorCovariance,
    ActorSum,
    CmpParams,
    CountNetwork,
    DyadCovariate,
    FitControl,
    ModelSpec,
    MutualGeoMean,
    MutualMin,
    MutualNegAbsDiff,
    MutualProduct,
    NonzeroCount,
    SampleBatch,
    SamplerControl,
    SqrtSum,
    Sum,
    Transitivity,
    cmp_in_natural_space,
    cmp_pmf,
    diagnostics,
    discrete_change,
    eval_stats,
    fraternity_available,
    load_fraternity,
    mcmc_mle,
    monte_carlo_test,
    sample,
    sqrt_model_moments,
    sqrt_model_tune,
)
from countergm.config import load_config

needs_fraternity = pytest.mark.skipif(
    not fraternity_available(),
    reason="fraternity count data not bundled; see countergm/data/README.md",
)

# Reference estimates (and their standard errors) for the bundled karate
# network under the seven-statistic model, frozen as the regression target.
# The last column records which coefficients the reference analysis found
# significant at the 0.05 Wald level.
KARATE_FULL_REFERENCE = {
    "dispersion": (-2.33, 0.60, True),
    "ties": (-7.54, 1.01, True),
    "intensity": (3.64, 0.74, True),
    "hi_intensity": (0.71, 0.15, True),
    "john_intensity": (0.72, 0.16, True),
    "faction_similarity": (0.25, 0.04, True),
    "transitivity": (0.11, 0.09, False),
}

# Same for the fraternity models: the full model and the variant without
# the heterogeneity statistic.
FRATERNITY_BHT_REFERENCE = {
    "ties": (4.98, 0.17, True),
    "intensity": (3.12, 0.06, True),
    "underdispersion": (-8.26, 0.19, True),
    "heterogeneity": (1.46, 0.07, True),
    "transitivity": (0.03, 0.04, False),
}


# ---------------------------------------------------------------------------
# 1. Sampler exactness on dyad-independent models.
#
# With only dyad-level statistics the stationary distribution factorizes, so
# the pooled dyad-value histogram from the chain must match the closed-form
# pmf: Poisson, geometric, and zero-modified Poisson.  Gate: total variation
# < 0.01 and chi-square p > 0.001 on 10**5 retained draws, under a minute.
# ---------------------------------------------------------------------------

EXACTNESS_CONTROL = dict(burnin=5_000, interval=48, draws=100_000)


def pooled_value_pmf(model, theta, seed):
    net = CountNetwork.empty(4, directed=False)
    batch = sample(model, np.asarray(theta, dtype=float), net,
                   control=SamplerControl(seed=seed, **EXACTNESS_CONTROL))
    counts = batch.value_counts.astype(float)
    return counts, counts / counts.sum()


def chi_square_p(counts, probs, min_expected=5.0):
    """Chi-square goodness-of-fit p with sparse upper-tail bins pooled."""
    expected = probs * counts.sum()
    cut = len(expected)
    while cut > 2 and (expected[:cut].min() < min_expected
                       or expected[cut:].sum() < min_expected):
        cut -= 1
    obs = np.append(counts[:cut], counts[cut:].sum())
    exp = np.append(expected[:cut], expected[cut:].sum())
    return st.chisquare(obs, exp).pvalue


def assert_exact(counts, probs, want, elapsed):
    tv = 0.5 * np.abs(probs - want).sum()
    p = chi_square_p(counts, want)
    assert tv < 0.01, f"total variation {tv:.4f}"
    assert p > 0.001, f"chi-square p {p:.5f}"
    assert elapsed < 60.0, f"took {elapsed:.1f}s"


def test_sampler_exact_poisson():
    t0 = time.time()
    counts, probs = pooled_value_pmf(
        ModelSpec(terms=(Sum(),), reference="poisson"), [math.log(2.0)], 7001)
    elapsed = time.time() - t0
    want = st.poisson(2.0).pmf(np.arange(len(counts)))
    want[-1] += st.poisson(2.0).sf(len(counts) - 1)
    assert_exact(counts, probs, want, elapsed)


def test_sampler_exact_geometric():
    t0 = time.time()
    q = 2.0 / 3.0  # success probability 1/3, mean 2
    counts, probs = pooled_value_pmf(
        ModelSpec(terms=(Sum(),), reference="geometric"), [math.log(q)], 7002)
    elapsed = time.time() - t0
    want = (1.0 - q) * q ** np.arange(len(counts))
    want[-1] = q ** (len(counts) - 1)
    assert_exact(counts, probs, want, elapsed)


def test_sampler_exact_zero_modified_poisson():
    t0 = time.time()
    lam, w = 2.0, -1.0
    counts, probs = pooled_value_pmf(
        ModelSpec(terms=(Sum(), NonzeroCount()), reference="poisson"),
        [math.log(lam), w], 7003)
    elapsed = time.time() - t0
    raw = st.poisson(lam).pmf(np.arange(len(counts)))
    raw[-1] += st.poisson(lam).sf(len(counts) - 1)
    want = raw * math.exp(w)
    want[0] = raw[0]
    want /= want.sum()
    assert_exact(counts, probs, want, elapsed)


# ---------------------------------------------------------------------------
# 2. Change-statistic consistency across the whole term catalog.
#
# 1,000 randomized (network, dyad, k1, k2) cases: the incremental change
# must equal the difference of full evaluations — exactly for terms whose
# statistics are integer-valued, within 1e-12 absolute for the square-root
# and log-factorial style terms.
# ---------------------------------------------------------------------------

def change_catalog(rng, n, directed):
    """(term, is_integer_valued) pairs covering every statistic kind."""
    W = rng.normal(size=(n, n)).round(2)
    M = rng.integers(-3, 4, size=(n, n))
    np.fill_diagonal(W, 0.0)
    np.fill_diagonal(M, 0)
    if not directed:
        W = (W + W.T) / 2.0
        M = M + M.T
    catalog = [
        (Sum(label="sum"), True),
        (NonzeroCount(label="nonzero"), True),
        (SqrtSum(label="sqrt_sum"), False),
        (CMP(label="dispersion"), False),
        (DyadCovariate(matrix=M, label="int_cov"), True),
        (DyadCovariate(matrix=W, label="float_cov"), False),
        (DyadCovariate(attribute="x", label="x_similarity"), False),
        (ActorSum(actors=(1, n), label="pair_sum"), True),
        (ActorSum(attribute="flag", label="flag_sum"), True),
    ]
    for tp in ("min", "geomean"):
        for cb in ("max", "sum"):
            for af in ("min", "geomean"):
                catalog.append((
                    Transitivity(twopath=tp, combine=cb, affect=af,
                                 label=f"t_{tp}_{cb}_{af}"),
                    tp == "min" and af == "min",
                ))
    if directed:
        catalog += [
            (MutualMin(label="mut_min"), True),
            (MutualNegAbsDiff(label="mut_nad"), True),
            (MutualGeoMean(label="mut_geo"), False),
            (MutualProduct(label="mut_prod"), False),
            (ActorCovariance(direction="out", label="acov_out"), False),
            (ActorCovariance(direction="in", label="acov_in"), False),
            (ActorCovariance(direction="out", centered=False, label="acov_raw"), False),
        ]
    else:
        catalog += [
            (ActorCovariance(direction="undirected", label="acov"), False),
            (ActorCovariance(direction="undirected", centered=False, label="acov_raw"), False),
        ]
    return catalog


def test_change_statistics_randomized_catalog():
    rng = np.random.default_rng(5150)
    cases = 0
    for _ in range(500):
        for directed in (False, True):
            n = int(rng.integers(4, 9))
            net = random_network(rng, n, directed)
            attrs = random_attrs(rng, n)
            catalog = change_catalog(rng, n, directed)
            model = ModelSpec(terms=tuple(t for t, _ in catalog))
            nodes = 1 + rng.choice(n, size=2, replace=False)
            i, j = int(nodes[0]), int(nodes[1])
            k1, k2 = int(rng.integers(0, 7)), int(rng.integers(0, 7))
            g1 = eval_stats(model, net.set_value(i, j, k1), attrs).values
            g2 = eval_stats(model, net.set_value(i, j, k2), attrs).values
            delta = discrete_change(model, net, attrs, i, j, k1, k2).values
            for k, (term, integral) in enumerate(catalog):
                err = abs(delta[k] - (g2[k] - g1[k]))
                if integral:
                    assert err == 0.0, (term.label, i, j, k1, k2)
                else:
                    assert err <= 1e-12, (term.label, i, j, k1, k2, err)
            cases += 1
    assert cases == 1000


# ---------------------------------------------------------------------------
# 3. Fitter agreement with a deterministic oracle.
#
# [Sum, DyadCovariate] is an ordinary Poisson log-linear model, so the MCMC
# fit must land on the IRLS solution.  Gate: within 3 MCMC standard errors
# (the oracle is exact, so all Monte Carlo noise is the fitter's own),
# floored at 1e-4, on 5 simulated datasets with n=20.  Under 5 minutes.
# ---------------------------------------------------------------------------

def test_fit_matches_irls_oracle_on_dyad_independent_model():
    rng = np.random.default_rng(606)
    t0 = time.time()
    for trial in range(5):
        n = 20
        X = rng.normal(size=(n, n)).round(3)
        X = (X + X.T) / 2.0
        np.fill_diagonal(X, 0.0)
        a, b = -0.2, 0.5
        rows = []
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                mean = math.exp(a + b * X[i - 1, j - 1])
                rows.append((i, j, int(rng.poisson(mean))))
        net = CountNetwork.from_weighted_edge_list(rows, n=n, directed=False)

        xv = np.array([X[i - 1, j - 1] for i, j, _ in rows])
        yv = np.array([float(v) for _, _, v in rows])
        beta, _ = O.poisson_irls(np.column_stack([np.ones_like(xv), xv]), yv)

        model = ModelSpec(terms=(Sum(), DyadCovariate(matrix=X, label="x")))
        control = FitControl(
            sampler=SamplerControl(burnin=20_000, interval=380, draws=1200,
                                   seed=1000 + trial),
            chains=2, threads=2)
        fit = mcmc_mle(model, net, control=control)
        assert fit.converged, f"trial {trial}: {fit.status}"
        mc_se = np.maximum(fit.mcmc_std_errors(), 1e-4)
        gap = np.abs(fit.theta - beta) / mc_se
        assert gap.max() < 3.0, f"trial {trial}: off by {gap} MC std. errors"
    assert time.time() - t0 < 300.0


# ---------------------------------------------------------------------------
# 4. Regression against the reference fit of the karate network.
#
# Every coefficient must fall within 2 reference standard errors of the
# reference estimate and reproduce its significance pattern (in particular,
# transitivity not significant once faction similarity is in the model).
# ---------------------------------------------------------------------------

def wald_significant(fit, label):
    k = fit.labels.index(label)
    return abs(fit.theta[k] / fit.std_errors[k]) > 1.96


def test_karate_full_model_matches_reference_fit():
    rc = load_config("configs/karate_full.yaml")
    fit = mcmc_mle(rc.model, rc.network, rc.attrs, control=rc.fit)
    problems = []
    if not fit.converged:
        problems.append(f"fit did not converge: status {fit.status!r}")
    for k, lab in enumerate(fit.labels):
        ref, se, significant = KARATE_FULL_REFERENCE[lab]
        if abs(fit.theta[k] - ref) > 2.0 * se:
            problems.append(
                f"{lab}: estimate {fit.theta[k]:.3f} not within 2 reference "
                f"std. errors of {ref} (allowed ±{2 * se:.2f})")
        if wald_significant(fit, lab) != significant:
            problems.append(
                f"{lab}: significance flipped (z = "
                f"{fit.theta[k] / fit.std_errors[k]:.2f}, reference "
                f"{'significant' if significant else 'not significant'})")
    if problems:
        pytest.fail(
            "reference-fit regression (see README for the documented "
            "discrepancy analysis):\n  " + "\n  ".join(problems))


# ---------------------------------------------------------------------------
# 5. Regression against the reference fits of the fraternity network
# (conditional on the count file being present).
# ---------------------------------------------------------------------------

@needs_fraternity
def test_fraternity_models_match_reference_fits():
    rc_bht = load_config("configs/fraternity_bht.yaml")
    fit_bht = mcmc_mle(rc_bht.model, rc_bht.network, rc_bht.attrs,
                       control=rc_bht.fit)
    problems = []
    if not fit_bht.converged:
        problems.append(f"BHT fit did not converge: {fit_bht.status!r}")
    for k, lab in enumerate(fit_bht.labels):
        ref, se, _ = FRATERNITY_BHT_REFERENCE[lab]
        if abs(fit_bht.theta[k] - ref) > 2.0 * se:
            problems.append(
                f"BHT {lab}: {fit_bht.theta[k]:.3f} not within ±{2 * se:.2f} "
                f"of {ref}")
    if wald_significant(fit_bht, "transitivity"):
        problems.append("BHT: transitivity should not be significant")

    rc_bt = load_config("configs/fraternity_bt.yaml")
    fit_bt = mcmc_mle(rc_bt.model, rc_bt.network, rc_bt.attrs,
                      control=rc_bt.fit)
    if not fit_bt.converged:
        problems.append(f"BT fit did not converge: {fit_bt.status!r}")
    if not wald_significant(fit_bt, "transitivity"):
        problems.append("BT: transitivity should be significant")
    if problems:
        pytest.fail("\n  ".join(problems))


# ---------------------------------------------------------------------------
# 6. Monte Carlo screening tests.
#
# A statistic left out of the null model is simulated under the fitted null
# and the observed value located in that distribution (one-sided upper p).
# ---------------------------------------------------------------------------

def test_karate_transitivity_screen_under_faction_model():
    rc = load_config("configs/karate_faction.yaml")
    fit = mcmc_mle(rc.model, rc.network, rc.attrs, control=rc.fit)
    assert fit.converged, fit.status
    mc = monte_carlo_test(
        rc.model, fit, rc.test_term, rc.network, rc.attrs,
        nsim=rc.test_nsim,
        control=SamplerControl(burnin=100_000, interval=1122, draws=1, seed=97))
    assert 0.05 <= mc.p_value <= 0.20, mc.p_value


@needs_fraternity
def test_fraternity_heterogeneity_screen_under_plain_model():
    rc = load_config("configs/fraternity_b.yaml")
    fit = mcmc_mle(rc.model, rc.network, rc.attrs, control=rc.fit)
    assert fit.converged, fit.status
    mc = monte_carlo_test(
        rc.model, fit, rc.test_term, rc.network, rc.attrs,
        nsim=rc.test_nsim,
        control=SamplerControl(burnin=100_000, interval=3306, draws=1, seed=98))
    assert mc.nsim == 10_000
    assert mc.p_value < 0.001, mc.p_value


@needs_fraternity
def test_fraternity_transitivity_screen_under_heterogeneity_model():
    rc = load_config("configs/fraternity_bh.yaml")
    fit = mcmc_mle(rc.model, rc.network, rc.attrs, control=rc.fit)
    assert fit.converged, fit.status
    mc = monte_carlo_test(
        rc.model, fit, rc.test_term, rc.network, rc.attrs,
        nsim=rc.test_nsim,
        control=SamplerControl(burnin=100_000, interval=3306, draws=1, seed=99))
    assert 0.3 <= mc.p_value <= 0.6, mc.p_value


# ---------------------------------------------------------------------------
# 7. Factorial-weight family: parameter space, reductions, and honest
# boundary termination.
# ---------------------------------------------------------------------------

def test_cmp_natural_space_grid():
    for t1 in (-2.0, -0.5, 0.0, 0.5, 2.0):
        for t2 in (-2.0, -1.0, -0.25, 0.0, 0.25, 1.0):
            want = t2 < 0.0 or (t2 == 0.0 and t1 < 0.0)
            assert cmp_in_natural_space(CmpParams(t1, t2)) == want, (t1, t2)


def test_cmp_reduces_to_poisson_and_geometric():
    x = np.arange(0, 61)
    for t1 in (-1.0, 0.3, 1.4):
        got = cmp_pmf(CmpParams(t1, -1.0), x)
        want = st.poisson(math.exp(t1)).pmf(x)
        assert np.max(np.abs(got - want)) < 1e-10
    for t1 in (-2.0, -0.7, -0.1):
        q = math.exp(t1)
        got = cmp_pmf(CmpParams(t1, 0.0), x)
        want = (1.0 - q) * q ** x
        assert np.max(np.abs(got - want)) < 1e-10


def test_cmp_fit_reports_boundary_instead_of_silent_estimate():
    # Synthetic counts more dispersed than the geometric reference point:
    # the factorial-weight coefficient is pushed to its upper bound and the
    # fitter must say so rather than return a converged-looking estimate.
    rng = np.random.default_rng(424242)
    n = 10
    rows = []
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            v = int(rng.geometric(0.25)) - 1
            if rng.random() < 0.08:
                v += 12
            rows.append((i, j, v))
    net = CountNetwork.from_weighted_edge_list(rows, n=n, directed=False)
    model = ModelSpec(terms=(Sum(), CMP(label="dispersion")))
    control = FitControl(
        sampler=SamplerControl(burnin=5_000, interval=90, draws=400, seed=31),
        chains=2, threads=2, max_iterations=12)
    fit = mcmc_mle(model, net, control=control)
    assert fit.status == "boundary"
    assert not fit.converged
    assert fit.boundary and "dispersion" in fit.boundary[0]


# ---------------------------------------------------------------------------
# 8. Dispersion ordering of the square-root model.
#
# Tuned to mean 1, the single-dyad distribution must get less dispersed as
# the linear coefficient grows; at theta1=0 it is exactly Poisson(1).  The
# moments are cross-checked against a direct series sum.
# ---------------------------------------------------------------------------

def series_moments(t1, t2, upto=4000):
    y = np.arange(0, upto, dtype=float)
    logw = t1 * np.sqrt(y) + t2 * y - [math.lgamma(v + 1.0) for v in y]
    w = np.exp(logw - logw.max())
    w /= w.sum()
    mean = float(w @ y)
    return mean, float(w @ (y - mean) ** 2)


def test_sqrt_model_variance_strictly_decreasing_at_mean_one():
    variances = []
    for t1 in (-1.0, 0.0, 1.0):
        t2 = sqrt_model_tune(t1, 1.0)
        mean, var = series_moments(t1, t2)
        assert abs(mean - 1.0) < 1e-8, (t1, mean)
        got = sqrt_model_moments(t1, t2)
        assert got[0] == pytest.approx(mean, abs=1e-8)
        assert got[1] == pytest.approx(var, abs=1e-8)
        variances.append(var)
    assert variances[0] > variances[1] > variances[2], variances
    assert abs(variances[1] - 1.0) < 1e-6  # theta1 = 0 is exactly Poisson(1)


# ---------------------------------------------------------------------------
# 9. Degeneracy guard.
#
# With a positive coefficient on the *uncentered* within-actor product
# statistic, an undirected 20-node model coexists in two phases: a sparse
# one (an all-zero neighborhood contributes no tilt, so the empty state is
# self-trapping) and a dense self-sustaining one.  Chains started empty and
# dense stay in their phases, and the pooled sample must trip the
# bimodality flag.  The centered variant at the same coefficient magnitude
# collapses to a single phase and must stay clean.
# ---------------------------------------------------------------------------

DEGENERACY_THETA = np.array([-4.0, 4.5])
DEGENERACY_CONTROL = dict(burnin=1_900, interval=190, draws=500)


def two_start_report(centered):
    n = 20
    empty = CountNetwork.empty(n, directed=False)
    dense = CountNetwork.from_weighted_edge_list(
        [(i, j, 2) for i in range(1, n + 1) for j in range(i + 1, n + 1)],
        n=n, directed=False)
    model = ModelSpec(terms=(
        Sum(),
        ActorCovariance(direction="undirected", centered=centered, label="acov"),
    ))
    lo = sample(model, DEGENERACY_THETA, empty,
                control=SamplerControl(seed=101, **DEGENERACY_CONTROL))
    hi = sample(model, DEGENERACY_THETA, dense,
                control=SamplerControl(seed=102, **DEGENERACY_CONTROL))
    pooled = SampleBatch(
        stats=np.vstack([lo.stats, hi.stats]),
        labels=lo.labels,
        final_network=hi.final_network,
        acceptance_rate=0.5 * (lo.acceptance_rate + hi.acceptance_rate),
        control=lo.control,
        value_counts=lo.value_counts + hi.value_counts,
    )
    return diagnostics(pooled, eval_stats(model, empty))


def test_uncentered_actor_product_trips_bimodality_flag():
    report = two_start_report(centered=False)
    assert report.any_bimodal
    assert report.bimodal[report.labels.index("acov")]


def test_centered_actor_covariance_stays_unimodal():
    report = two_start_report(centered=True)
    assert not report.any_bimodal
