"""Compiled core of the dyad-value Metropolis–Hastings sampler.

Everything here mirrors the pure-Python reference implementations in
:mod:`countergm.terms` and :mod:`countergm.sampler`; the test suite
cross-validates the two paths.  The chain keeps the running statistic vector
and a handful of scalar/vector caches (per-actor √-value sums, global value
and √-value totals, the reciprocal-√-product total) so that every term's
change statistic costs O(1), except transitivity which recomputes only the
contributions whose two-paths pass through the proposed dyad.

Term codes and option flags are fixed here and produced by
``sampler._compile_model``; they are an internal interface.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

T_SUM = 0
T_NONZERO = 1
T_CMP = 2
T_SQRT = 3
T_COV = 4
T_MUTMIN = 5
T_MUTNEGABS = 6
T_MUTGEO = 7
T_MUTPROD = 8
T_ACOV = 9
T_TRANS = 10

# dyad-value histogram resolution; values at or above the top bin are clamped
HIST_SIZE = 512

_LOGFACT_TABLE = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, 21)))))


@njit(cache=True, nogil=True, inline="always")
def _logfact(k):
    if k <= 20:
        return _LOGFACT_TABLE[k]
    return math.lgamma(k + 1.0)


@njit(cache=True, nogil=True, inline="always")
def _kernel_logpmf(a, b):
    # log p(a; b): Poisson(b + 1/2) conditioned on != b
    lam = b + 0.5
    ll = math.log(lam)
    la = a * ll - lam - _logfact(a)
    lb = b * ll - lam - _logfact(b)
    return la - math.log1p(-math.exp(lb))


@njit(cache=True, nogil=True, inline="always")
def _draw_kernel(rng, b):
    lam = b + 0.5
    x = rng.poisson(lam)
    while x == b:
        x = rng.poisson(lam)
    return x


@njit(cache=True, nogil=True, inline="always")
def _twopath(a, b, sel):
    if sel == 0:
        return a if a < b else b
    return math.sqrt(a * b)


@njit(cache=True, nogil=True)
def _trans_contrib(y, n, u, v, tsel, csel, asel):
    own = float(y[u, v])
    if own == 0.0:
        return 0.0
    c = 0.0
    for k in range(n):
        if k == u or k == v:
            continue
        t = _twopath(float(y[u, k]), float(y[k, v]), tsel)
        if csel == 0:
            if t > c:
                c = t
        else:
            c += t
    if asel == 0:
        return own if own < c else c
    return math.sqrt(own * c)


@njit(cache=True, nogil=True)
def _trans_affected(y, directed, n, i, j, val, tsel, csel, asel):
    # total contribution, with the dyad set to `val`, of every dyad whose
    # statistic can depend on y_ij: the dyad itself, (i, x) through
    # intermediary j, and (x, j) through intermediary i.  Dyads whose
    # connecting leg is zero are skipped: a zero leg makes the two-path zero
    # at any y_ij, so their contribution cannot change.
    y[i, j] = val
    if not directed:
        y[j, i] = val
    tot = _trans_contrib(y, n, i, j, tsel, csel, asel)
    for x in range(n):
        if x == i or x == j:
            continue
        if y[j, x] > 0:
            tot += _trans_contrib(y, n, i, x, tsel, csel, asel)
        if y[x, i] > 0:
            tot += _trans_contrib(y, n, x, j, tsel, csel, asel)
    return tot


@njit(cache=True, nogil=True, inline="always")
def _acov_g(t1, t2, f, b, n, ndyads, centered):
    g = (t1 - f) / (2.0 * (n - 2))
    if centered == 1:
        m = b / ndyads
        g += -m * t2 + n * (n - 1) * m * m / 2.0
    return g


@njit(cache=True, nogil=True)
def _run_chain(
    y, directed, ii, jj, codes, f0, f1, f2, covidx, X, theta,
    ref_poisson, pi0, burnin, interval, draws, g0, rng,
):
    n = y.shape[0]
    nd = ii.shape[0]
    p = codes.shape[0]

    # --- caches -----------------------------------------------------------
    sr = np.zeros(n)          # per-actor row sums of sqrt(y)
    sc = np.zeros(n)          # per-actor column sums of sqrt(y)
    for a in range(n):
        for bcol in range(n):
            s = math.sqrt(y[a, bcol])
            sr[a] += s
            sc[bcol] += s
    t1r = 0.0
    t1c = 0.0
    for a in range(n):
        t1r += sr[a] * sr[a]
        t1c += sc[a] * sc[a]
    ftot = 0.0                # full-matrix value total
    sqtot = 0.0               # full-matrix sqrt total
    for a in range(n):
        for bcol in range(n):
            ftot += y[a, bcol]
            sqtot += math.sqrt(y[a, bcol])
    bsq = sqtot if directed else sqtot / 2.0   # sqrt total over the dyad set

    g = g0.copy()
    delta = np.zeros(p)
    stats = np.empty((draws, p))
    hist = np.zeros(HIST_SIZE, dtype=np.int64)
    accepted = 0
    total = burnin + draws * interval
    npairs = float(n * (n - 1))

    step = 0
    rec = 0
    while step < total:
        step += 1

        # --- propose ------------------------------------------------------
        d = int(rng.random() * nd)
        if d == nd:
            d = nd - 1
        i = ii[d]
        j = jj[d]
        cur = y[i, j]
        jumped = False
        if cur != 0 and pi0 > 0.0 and rng.random() < pi0:
            ystar = 0
            jumped = True
        else:
            ystar = _draw_kernel(rng, cur)

        # --- Hastings factor (log q) ---------------------------------------
        if cur == 0:
            logq = math.log(pi0 + (1.0 - pi0) * math.exp(_kernel_logpmf(0, ystar))) \
                - _kernel_logpmf(ystar, 0)
        elif ystar == 0:
            logq = _kernel_logpmf(cur, 0) \
                - math.log(pi0 + (1.0 - pi0) * math.exp(_kernel_logpmf(0, cur)))
        else:
            logq = _kernel_logpmf(cur, ystar) - _kernel_logpmf(ystar, cur)

        # --- change statistics ---------------------------------------------
        scur = math.sqrt(float(cur))
        sk = math.sqrt(float(ystar))
        ds = sk - scur
        dq = float(ystar - cur)

        # candidate cache values (committed only on acceptance)
        if directed:
            t1r_new = t1r + 2.0 * sr[i] * ds + ds * ds
            t1c_new = t1c + 2.0 * sc[j] * ds + ds * ds
            f_new = ftot + dq
            sq_new = sqtot + ds
            b_new = bsq + ds
        else:
            t1r_new = t1r + 2.0 * sr[i] * ds + ds * ds \
                + 2.0 * sr[j] * ds + ds * ds
            t1c_new = t1c
            f_new = ftot + 2.0 * dq
            sq_new = sqtot + 2.0 * ds
            b_new = bsq + ds

        logp = 0.0
        for t in range(p):
            code = codes[t]
            if code == T_SUM:
                dv = dq
            elif code == T_NONZERO:
                dv = (1.0 if ystar > 0 else 0.0) - (1.0 if cur > 0 else 0.0)
            elif code == T_CMP:
                dv = _logfact(ystar) - _logfact(cur)
            elif code == T_SQRT:
                dv = ds
            elif code == T_COV:
                dv = X[covidx[t], i, j] * dq
            elif code == T_MUTMIN:
                back = y[j, i]
                m2 = ystar if ystar < back else back
                m1 = cur if cur < back else back
                dv = float(m2 - m1)
            elif code == T_MUTNEGABS:
                back = y[j, i]
                dv = float(abs(cur - back) - abs(ystar - back))
            elif code == T_MUTGEO:
                sb = math.sqrt(float(y[j, i]))
                dv = sb * ds
                if f0[t] == 1:
                    dv -= (b_new * b_new - bsq * bsq) / (2.0 * npairs)
            elif code == T_MUTPROD:
                dv = float(y[j, i]) * dq
            elif code == T_ACOV:
                if f0[t] == 1:
                    old = _acov_g(t1c, sqtot, ftot, bsq, n, nd, f1[t])
                    new = _acov_g(t1c_new, sq_new, f_new, b_new, n, nd, f1[t])
                else:
                    old = _acov_g(t1r, sqtot, ftot, bsq, n, nd, f1[t])
                    new = _acov_g(t1r_new, sq_new, f_new, b_new, n, nd, f1[t])
                dv = new - old
            else:
                tot1 = _trans_affected(y, directed, n, i, j, cur, f0[t], f1[t], f2[t])
                tot2 = _trans_affected(y, directed, n, i, j, ystar, f0[t], f1[t], f2[t])
                y[i, j] = cur
                if not directed:
                    y[j, i] = cur
                dv = tot2 - tot1
            delta[t] = dv
            logp += theta[t] * dv

        if ref_poisson:
            logp += _logfact(cur) - _logfact(ystar)
        logr = logq + logp

        # --- accept / reject ------------------------------------------------
        if logr >= 0.0 or rng.random() < math.exp(logr):
            accepted += 1
            y[i, j] = ystar
            if not directed:
                y[j, i] = ystar
            for t in range(p):
                g[t] += delta[t]
            if directed:
                sr[i] += ds
                sc[j] += ds
            else:
                sr[i] += ds
                sr[j] += ds
                sc[i] += ds
                sc[j] += ds
            t1r = t1r_new
            t1c = t1c_new
            ftot = f_new
            sqtot = sq_new
            bsq = b_new

        # --- retain ----------------------------------------------------------
        if step > burnin and (step - burnin) % interval == 0:
            for t in range(p):
                stats[rec, t] = g[t]
            for d in range(nd):
                v = y[ii[d], jj[d]]
                if v >= HIST_SIZE:
                    v = HIST_SIZE - 1
                hist[v] += 1
            rec += 1

    return stats, hist, accepted, total
