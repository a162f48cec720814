"""Model statistics (sufficient statistics and change statistics) for count networks.

Each term maps a network to one coordinate of the statistic vector g(y).  The
catalog:

====================  ========================================================
``Sum``               Σ y_ij — the count analogue of an edge count.
``NonzeroCount``      Σ 1{y_ij > 0} — zero modification.
``CMP``               Σ log(y_ij!) — factorial-weight dispersion term; its
                      coefficient interpolates Poisson (−1) to geometric (0)
                      marginal behavior and is bounded above by 1.
``SqrtSum``           Σ √y_ij — variance-stabilized intensity; unconstrained.
``DyadCovariate``     Σ x_ij y_ij for an exogenous dyadic covariate x.
``ActorSum``          Σ of values on dyads incident to a fixed actor set.
``MutualMin``         Σ_{i<j} min(y_ij, y_ji)  (directed only).
``MutualNegAbsDiff``  −Σ_{i<j} |y_ij − y_ji|  (directed only).
``MutualGeoMean``     Σ_{i<j} √(y_ij y_ji), optionally centered (directed).
``MutualProduct``     Σ_{i<j} y_ij y_ji; coefficient must be ≤ 0 (directed).
``ActorCovariance``   pooled covariance of √-values within each actor's
                      dyad neighborhood — actor heterogeneity.
``Transitivity``      Σ_ij v_a(y_ij, combine_k v_p(y_ik, y_kj)) with selectable
                      two-path / combine / affect functions; the default
                      (min, max, min) measures each tie against its strongest
                      two-path.
====================  ========================================================

``discrete_change`` computes Δ^{k1→k2}_{ij} g = g(y with dyad=k2) − g(y with
dyad=k1) incrementally — only contributions touching the dyad are
recomputed — and is validated against whole-network evaluation in the tests.

The natural parameter space of a model is exposed as a list of half-space
constraints by :func:`theta_constraints`.  For the geometric reference (no
factorial damping) the derived constraints are a conservative inner
approximation: boundary slices where a lower-order term could rescue
convergence are excluded.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .distributions import log_factorial
from .network import CountNetwork, NodeAttributes, dyad_arrays

__all__ = [
    "ActorCovariance",
    "ActorSum",
    "CMP",
    "ConstraintError",
    "DyadCovariate",
    "ModelError",
    "ModelSpec",
    "MutualGeoMean",
    "MutualMin",
    "MutualNegAbsDiff",
    "MutualProduct",
    "NonzeroCount",
    "SqrtSum",
    "StatVector",
    "Sum",
    "ThetaConstraint",
    "Transitivity",
    "check_theta",
    "conditional_logratio",
    "discrete_change",
    "eval_stats",
    "log_reference_ratio",
    "theta_constraints",
]


class ModelError(ValueError):
    """Raised for invalid model specifications or parameter-space violations."""


class ConstraintError(ModelError):
    """A parameter vector lies outside the model's natural parameter space."""


class _Ctx(NamedTuple):
    """Shared evaluation context: network matrix plus canonical dyad views."""

    y: np.ndarray        # (n, n) int64, zero diagonal
    n: int
    directed: bool
    ii: np.ndarray       # canonical dyad rows (0-based)
    jj: np.ndarray
    vals: np.ndarray     # y[ii, jj]
    attrs: NodeAttributes


def _make_ctx(y: CountNetwork, attrs: NodeAttributes | None) -> _Ctx:
    if attrs is None:
        attrs = NodeAttributes.empty(y.n)
    if attrs.n != y.n:
        raise ModelError(f"attributes are for {attrs.n} actors but network has {y.n}")
    ii, jj = dyad_arrays(y.n, y.directed)
    return _Ctx(
        y=y.values, n=y.n, directed=y.directed, ii=ii, jj=jj,
        vals=y.values[ii, jj], attrs=attrs,
    )


def _ndyads(ctx: _Ctx) -> int:
    return ctx.n * (ctx.n - 1) if ctx.directed else ctx.n * (ctx.n - 1) // 2


# ---------------------------------------------------------------------------
# Dyad-level covariate resolution (shared by DyadCovariate and ActorSum)
# ---------------------------------------------------------------------------

_TRANSFORMS = ("neg_abs_diff", "abs_diff", "match", "product", "sum")


def _attr_matrix(a: np.ndarray, transform: str) -> np.ndarray:
    col = a[:, None]
    row = a[None, :]
    if transform == "neg_abs_diff":
        return -np.abs(col - row)
    if transform == "abs_diff":
        return np.abs(col - row)
    if transform == "match":
        return (col == row).astype(np.float64)
    if transform == "product":
        return col * row
    if transform == "sum":
        return col + row
    raise ModelError(f"unknown covariate transform {transform!r}; choose from {_TRANSFORMS}")


# ---------------------------------------------------------------------------
# Term catalog
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sum:
    """Total dyad value, Σ_{(i,j)} y_ij."""

    label: str | None = None
    dyad_independent = True

    def default_label(self) -> str:
        return "sum"

    def _resolve(self, ctx: _Ctx):
        return None

    def _stat(self, ctx: _Ctx, aux) -> float:
        return float(ctx.vals.sum())

    def _change(self, ctx: _Ctx, aux, i: int, j: int, k1: int, k2: int) -> float:
        return float(k2 - k1)


@dataclass(frozen=True)
class NonzeroCount:
    """Number of dyads with a positive value, Σ 1{y_ij > 0}."""

    label: str | None = None
    dyad_independent = True

    def default_label(self) -> str:
        return "nonzero"

    def _resolve(self, ctx: _Ctx):
        return None

    def _stat(self, ctx: _Ctx, aux) -> float:
        return float((ctx.vals > 0).sum())

    def _change(self, ctx: _Ctx, aux, i: int, j: int, k1: int, k2: int) -> float:
        return float((k2 > 0) - (k1 > 0))


@dataclass(frozen=True)
class CMP:
    """Factorial-weight dispersion statistic, Σ log(y_ij!).

    With a Poisson reference its coefficient moves the dyad distribution
    between Poisson-like (coefficient −1 relative to the reference already
    being Poisson means coefficient 0 here is Poisson) and geometric-like
    behavior at coefficient 1; values above 1 leave the natural parameter
    space, so :func:`theta_constraints` emits an upper bound of 1.
    """

    label: str | None = None
    dyad_independent = True

    def default_label(self) -> str:
        return "dispersion"

    def _resolve(self, ctx: _Ctx):
        return None

    def _stat(self, ctx: _Ctx, aux) -> float:
        return float(log_factorial(ctx.vals).sum())

    def _change(self, ctx: _Ctx, aux, i: int, j: int, k1: int, k2: int) -> float:
        return float(log_factorial(k2) - log_factorial(k1))


@dataclass(frozen=True)
class SqrtSum:
    """Variance-stabilized intensity, Σ √y_ij (√0 = 0 exactly)."""

    label: str | None = None
    dyad_independent = True

    def default_label(self) -> str:
        return "sqrt_sum"

    def _resolve(self, ctx: _Ctx):
        return None

    def _stat(self, ctx: _Ctx, aux) -> float:
        return float(np.sqrt(ctx.vals).sum())

    def _change(self, ctx: _Ctx, aux, i: int, j: int, k1: int, k2: int) -> float:
        return math.sqrt(k2) - math.sqrt(k1)


@dataclass(frozen=True, eq=False)
class DyadCovariate:
    """Exogenous dyadic covariate statistic, Σ x_ij y_ij.

    The covariate is either an explicit (n, n) ``matrix`` or derived from a
    named per-actor ``attribute`` via ``transform``:

    * ``neg_abs_diff`` — −|a_i − a_j| (similarity; the default)
    * ``abs_diff``     — |a_i − a_j|
    * ``match``        — 1{a_i = a_j}
    * ``product``      — a_i · a_j
    * ``sum``          — a_i + a_j

    Undirected networks require a symmetric covariate.
    """

    matrix: np.ndarray | None = None
    attribute: str | None = None
    transform: str = "neg_abs_diff"
    label: str | None = None
    dyad_independent = True

    def __post_init__(self) -> None:
        if (self.matrix is None) == (self.attribute is None):
            raise ModelError("DyadCovariate needs exactly one of matrix= or attribute=")
        if self.attribute is not None and self.transform not in _TRANSFORMS:
            raise ModelError(
                f"unknown covariate transform {self.transform!r}; choose from {_TRANSFORMS}"
            )
        if self.matrix is not None:
            m = np.ascontiguousarray(np.asarray(self.matrix, dtype=np.float64))
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ModelError(f"covariate matrix must be square, got shape {m.shape}")
            m.flags.writeable = False
            object.__setattr__(self, "matrix", m)

    def default_label(self) -> str:
        if self.attribute is not None:
            return f"cov_{self.transform}_{self.attribute}"
        return "cov"

    def _resolve(self, ctx: _Ctx) -> np.ndarray:
        if self.matrix is not None:
            x = self.matrix
            if x.shape != (ctx.n, ctx.n):
                raise ModelError(
                    f"covariate matrix shape {x.shape} does not match n={ctx.n}"
                )
        else:
            try:
                col = ctx.attrs.column(self.attribute)
            except KeyError as exc:
                raise ModelError(
                    f"term {self.label or self.default_label()!r}: {exc.args[0]}"
                ) from None
            x = _attr_matrix(col, self.transform)
        if not ctx.directed and not np.allclose(x, x.T):
            raise ModelError(
                f"covariate for term {self.label or self.default_label()!r} must be "
                "symmetric on an undirected network"
            )
        return x

    def _stat(self, ctx: _Ctx, aux: np.ndarray) -> float:
        return float((aux[ctx.ii, ctx.jj] * ctx.vals).sum())

    def _change(self, ctx: _Ctx, aux: np.ndarray, i: int, j: int, k1: int, k2: int) -> float:
        return float(aux[i, j]) * (k2 - k1)


@dataclass(frozen=True)
class ActorSum:
    """Sum of dyad values incident to a fixed actor set.

    ``actors`` is a 1-based tuple of actor indices; alternatively a named
    0/1 ``attribute`` marks the set.  A dyad with both endpoints in the set
    is counted once.  With a single actor this is that actor's total
    intensity (in + out for directed networks).
    """

    actors: tuple[int, ...] | None = None
    attribute: str | None = None
    label: str | None = None
    dyad_independent = True

    def __post_init__(self) -> None:
        if (self.actors is None) == (self.attribute is None):
            raise ModelError("ActorSum needs exactly one of actors= or attribute=")
        if self.actors is not None:
            acts = tuple(int(a) for a in self.actors)
            if not acts:
                raise ModelError("ActorSum actor set must be nonempty")
            if len(set(acts)) != len(acts):
                raise ModelError(f"ActorSum actor set has duplicates: {acts}")
            object.__setattr__(self, "actors", acts)

    def default_label(self) -> str:
        if self.attribute is not None:
            return f"actor_sum_{self.attribute}"
        return "actor_sum_" + "_".join(str(a) for a in self.actors)

    def _member_mask(self, ctx: _Ctx) -> np.ndarray:
        if self.actors is not None:
            mask = np.zeros(ctx.n, dtype=bool)
            for a in self.actors:
                if not 1 <= a <= ctx.n:
                    raise ModelError(f"ActorSum actor {a} out of range 1..{ctx.n}")
                mask[a - 1] = True
            return mask
        try:
            col = ctx.attrs.column(self.attribute)
        except KeyError as exc:
            raise ModelError(
                f"term {self.label or self.default_label()!r}: {exc.args[0]}"
            ) from None
        return col != 0

    def _resolve(self, ctx: _Ctx) -> np.ndarray:
        # incidence indicator as a dyadic covariate: 1{i in A or j in A}
        mask = self._member_mask(ctx)
        return (mask[:, None] | mask[None, :]).astype(np.float64)

    def _stat(self, ctx: _Ctx, aux: np.ndarray) -> float:
        return float((aux[ctx.ii, ctx.jj] * ctx.vals).sum())

    def _change(self, ctx: _Ctx, aux: np.ndarray, i: int, j: int, k1: int, k2: int) -> float:
        return float(aux[i, j]) * (k2 - k1)


def _require_directed(term, ctx: _Ctx) -> None:
    if not ctx.directed:
        raise ModelError(
            f"term {type(term).__name__} measures reciprocation and requires a "
            "directed network"
        )


@dataclass(frozen=True)
class MutualMin:
    """Reciprocation strength Σ_{i<j} min(y_ij, y_ji) (directed networks)."""

    label: str | None = None
    dyad_independent = False

    def default_label(self) -> str:
        return "mutual_min"

    def _resolve(self, ctx: _Ctx):
        _require_directed(self, ctx)
        return None

    def _stat(self, ctx: _Ctx, aux) -> float:
        iu, ju = np.triu_indices(ctx.n, k=1)
        return float(np.minimum(ctx.y[iu, ju], ctx.y[ju, iu]).sum())

    def _change(self, ctx: _Ctx, aux, i: int, j: int, k1: int, k2: int) -> float:
        back = int(ctx.y[j, i])
        return float(min(k2, back) - min(k1, back))


@dataclass(frozen=True)
class MutualNegAbsDiff:
    """Reciprocation by closeness, −Σ_{i<j} |y_ij − y_ji| (directed networks)."""

    label: str | None = None
    dyad_independent = False

    def default_label(self) -> str:
        return "mutual_neg_abs_diff"

    def _resolve(self, ctx: _Ctx):
        _require_directed(self, ctx)
        return None

    def _stat(self, ctx: _Ctx, aux) -> float:
        iu, ju = np.triu_indices(ctx.n, k=1)
        return -float(np.abs(ctx.y[iu, ju] - ctx.y[ju, iu]).sum())

    def _change(self, ctx: _Ctx, aux, i: int, j: int, k1: int, k2: int) -> float:
        back = int(ctx.y[j, i])
        return float(abs(k1 - back) - abs(k2 - back))


@dataclass(frozen=True)
class MutualGeoMean:
    """Reciprocation via geometric means, Σ_{i<j} √(y_ij y_ji) (directed).

    With ``centered=True`` the summands are centered at the mean √-value over
    all dyads, m̄ = Σ √y_uv / |dyads|, i.e. Σ_{i<j} (√y_ij − m̄)(√y_ji − m̄),
    which dampens the statistic's tendency to grow with overall intensity.
    """

    centered: bool = False
    label: str | None = None
    dyad_independent = False

    def default_label(self) -> str:
        return "mutual_geomean_centered" if self.centered else "mutual_geomean"

    def _resolve(self, ctx: _Ctx):
        _require_directed(self, ctx)
        return None

    def _stat(self, ctx: _Ctx, aux) -> float:
        iu, ju = np.triu_indices(ctx.n, k=1)
        prod = float(np.sqrt(ctx.y[iu, ju] * ctx.y[ju, iu]).sum())
        if not self.centered:
            return prod
        nd = ctx.n * (ctx.n - 1)
        b = float(np.sqrt(ctx.vals).sum())
        # Σ(√y_ij − m̄)(√y_ji − m̄) over i<j collapses to P − B²/(2|𝕐|)
        return prod - b * b / (2.0 * nd)

    def _change(self, ctx: _Ctx, aux, i: int, j: int, k1: int, k2: int) -> float:
        sb = math.sqrt(int(ctx.y[j, i]))
        d = sb * (math.sqrt(k2) - math.sqrt(k1))
        if not self.centered:
            return d
        nd = ctx.n * (ctx.n - 1)
        cur = math.sqrt(int(ctx.y[i, j]))
        b_rest = float(np.sqrt(ctx.vals).sum()) - cur
        b1 = b_rest + math.sqrt(k1)
        b2 = b_rest + math.sqrt(k2)
        return d - (b2 * b2 - b1 * b1) / (2.0 * nd)


@dataclass(frozen=True)
class MutualProduct:
    """Reciprocation by products, Σ_{i<j} y_ij y_ji (directed networks).

    A positive coefficient makes the model's normalizing sum diverge, so the
    coefficient is constrained to be ≤ 0.
    """

    label: str | None = None
    dyad_independent = False

    def default_label(self) -> str:
        return "mutual_product"

    def _resolve(self, ctx: _Ctx):
        _require_directed(self, ctx)
        return None

    def _stat(self, ctx: _Ctx, aux) -> float:
        iu, ju = np.triu_indices(ctx.n, k=1)
        return float((ctx.y[iu, ju] * ctx.y[ju, iu]).sum())

    def _change(self, ctx: _Ctx, aux, i: int, j: int, k1: int, k2: int) -> float:
        return float(int(ctx.y[j, i]) * (k2 - k1))


@dataclass(frozen=True)
class ActorCovariance:
    """Pooled within-actor covariance of √-values — actor heterogeneity.

    For each actor i, every unordered pair {j, k} of its dyad partners
    contributes (√y_ij − m̄)(√y_ik − m̄), pooled with weight 1/(n−2):

        g(y) = Σ_i (n−2)^{-1} Σ_{j<k} (√y_ij − m̄)(√y_ik − m̄),

    where m̄ is the mean √-value over all dyads.  A positive coefficient
    rewards concentration of activity on a few actors.  ``direction``
    selects the partner map: ``out`` (rows) or ``in`` (columns) on directed
    networks, ``undirected`` on undirected ones.

    ``centered=False`` drops m̄ (raw within-actor products); this variant is
    much more prone to degenerate all-mass-at-high-values behavior and exists
    for exactly that comparison.
    """

    direction: str = "out"
    centered: bool = True
    label: str | None = None
    dyad_independent = False

    def __post_init__(self) -> None:
        if self.direction not in ("out", "in", "undirected"):
            raise ModelError(
                f"ActorCovariance direction must be out, in or undirected, "
                f"got {self.direction!r}"
            )

    def default_label(self) -> str:
        stem = "actor_cov" if self.centered else "actor_cov_raw"
        return f"{stem}_{self.direction}" if self.direction != "undirected" else stem

    def _resolve(self, ctx: _Ctx):
        if ctx.n < 3:
            raise ModelError("ActorCovariance needs at least 3 actors")
        if self.direction == "undirected" and ctx.directed:
            raise ModelError("ActorCovariance(direction='undirected') needs an undirected network")
        if self.direction in ("out", "in") and not ctx.directed:
            raise ModelError(
                f"ActorCovariance(direction={self.direction!r}) needs a directed network; "
                "use direction='undirected'"
            )
        return None

    def _sq_axis(self) -> int:
        return 0 if self.direction == "in" else 1

    def _g_from(self, s: np.ndarray, q: np.ndarray, m: float, n: int) -> float:
        # per-actor Σ_{j<k} a_j a_k = ((Σa)² − Σa²)/2 with a_j = √y_ij − m̄
        deg = n - 1
        sum_a = s - deg * m
        sum_a2 = q - 2.0 * m * s + deg * m * m
        return float(((sum_a * sum_a - sum_a2) / (2.0 * (n - 2))).sum())

    def _stat(self, ctx: _Ctx, aux) -> float:
        sq = np.sqrt(ctx.y)
        ax = self._sq_axis()
        s = sq.sum(axis=ax)
        q = ctx.y.sum(axis=ax).astype(np.float64)
        m = float(np.sqrt(ctx.vals).sum()) / _ndyads(ctx) if self.centered else 0.0
        return self._g_from(s, q, m, ctx.n)

    def _change(self, ctx: _Ctx, aux, i: int, j: int, k1: int, k2: int) -> float:
        sq = np.sqrt(ctx.y)
        ax = self._sq_axis()
        s = sq.sum(axis=ax)
        q = ctx.y.sum(axis=ax).astype(np.float64)
        cur = int(ctx.y[i, j])
        s_cur, q_cur = math.sqrt(cur), float(cur)
        affected = (i, j) if self.direction == "undirected" else ((i,) if ax == 1 else (j,))
        b_rest = (float(np.sqrt(ctx.vals).sum()) - s_cur) if self.centered else 0.0
        nd = _ndyads(ctx)

        def g_at(k: int) -> float:
            sk, qk = math.sqrt(k), float(k)
            s2, q2 = s.copy(), q.copy()
            for a in affected:
                s2[a] += sk - s_cur
                q2[a] += qk - q_cur
            m = (b_rest + sk) / nd if self.centered else 0.0
            return self._g_from(s2, q2, m, ctx.n)

        return g_at(k2) - g_at(k1)


_TWOPATH = ("min", "geomean")
_COMBINE = ("max", "sum")
_AFFECT = ("min", "geomean")


@dataclass(frozen=True)
class Transitivity:
    """Triadic closure for counts: Σ_ij v_a(y_ij, combine_{k≠i,j} v_p(y_ik, y_kj)).

    ``twopath`` scores the i→k→j path from its two legs (``min`` or
    ``geomean``), ``combine`` aggregates over intermediaries k (``max`` picks
    the strongest two-path, ``sum`` adds them all), and ``affect`` compares
    the dyad's own value with the aggregate (``min`` or ``geomean``).  The
    default (min, max, min) counts, for every dyad, how much of its value is
    supported by its strongest two-path.  Works on directed and undirected
    networks (legs are symmetric functions, so the undirected case is
    well-defined).
    """

    twopath: str = "min"
    combine: str = "max"
    affect: str = "min"
    label: str | None = None
    dyad_independent = False

    def __post_init__(self) -> None:
        if self.twopath not in _TWOPATH or self.combine not in _COMBINE or self.affect not in _AFFECT:
            raise ModelError(
                f"Transitivity selectors must be twopath in {_TWOPATH}, combine in "
                f"{_COMBINE}, affect in {_AFFECT}; got "
                f"({self.twopath!r}, {self.combine!r}, {self.affect!r})"
            )

    def default_label(self) -> str:
        if (self.twopath, self.combine, self.affect) == ("min", "max", "min"):
            return "transitive"
        return f"transitive_{self.twopath}_{self.combine}_{self.affect}"

    def _resolve(self, ctx: _Ctx):
        return None

    def _pair(self, a, b):
        if self.twopath == "min":
            return np.minimum(a, b)
        return np.sqrt(a * b)

    def _agg(self, tp, axis=None):
        if self.combine == "max":
            return tp.max(axis=axis) if axis is not None else tp.max()
        return tp.sum(axis=axis) if axis is not None else tp.sum()

    def _aff(self, own, combined):
        if self.affect == "min":
            return np.minimum(own, combined)
        return np.sqrt(own * combined)

    def _stat(self, ctx: _Ctx, aux) -> float:
        y = ctx.y.astype(np.float64)
        # tp[i, k, j] = twopath(y_ik, y_kj); k = i or j is neutral because the
        # diagonal is zero and both selectors vanish with a zero leg.
        tp = self._pair(y[:, :, None], y[None, :, :])
        combined = self._agg(tp, axis=1)
        contrib = self._aff(y, combined)
        return float(contrib[ctx.ii, ctx.jj].sum())

    def _contrib(self, y: np.ndarray, u: int, v: int) -> float:
        tp = self._pair(y[u, :], y[:, v])
        return float(self._aff(float(y[u, v]), self._agg(tp)))

    def _change(self, ctx: _Ctx, aux, i: int, j: int, k1: int, k2: int) -> float:
        # Only contributions whose two-path or own value passes through (i, j)
        # can move: the dyad itself, dyads (i, x) via intermediary j, and
        # dyads (x, j) via intermediary i.
        y = ctx.y.astype(np.float64).copy()
        others = [x for x in range(ctx.n) if x != i and x != j]

        def total_at(k: int) -> float:
            y[i, j] = k
            if not ctx.directed:
                y[j, i] = k
            tot = self._contrib(y, i, j)
            for x in others:
                tot += self._contrib(y, i, x)
                tot += self._contrib(y, x, j)
            return tot

        d = total_at(k2) - total_at(k1)
        y[i, j] = ctx.y[i, j]
        if not ctx.directed:
            y[j, i] = ctx.y[j, i]
        return d


# ---------------------------------------------------------------------------
# Model specification and evaluation
# ---------------------------------------------------------------------------

_TERM_TYPES = (
    Sum, NonzeroCount, CMP, SqrtSum, DyadCovariate, ActorSum,
    MutualMin, MutualNegAbsDiff, MutualGeoMean, MutualProduct,
    ActorCovariance, Transitivity,
)

_REFERENCES = ("poisson", "geometric")


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """An ordered list of statistic terms plus the reference measure.

    The reference measure fixes the baseline dyad distribution the statistics
    tilt: ``poisson`` weights each network by Π 1/y_ij! (so a bare ``Sum``
    model is i.i.d. Poisson), ``geometric`` weights uniformly (a bare ``Sum``
    model with negative coefficient is i.i.d. geometric).
    """

    terms: tuple
    reference: str = "poisson"

    def __post_init__(self) -> None:
        terms = tuple(self.terms)
        if not terms:
            raise ModelError("model needs at least one term")
        for t in terms:
            if not isinstance(t, _TERM_TYPES):
                raise ModelError(f"unknown term type: {t!r}")
        object.__setattr__(self, "terms", terms)
        ref = self.reference.lower()
        if ref not in _REFERENCES:
            raise ModelError(f"reference must be one of {_REFERENCES}, got {self.reference!r}")
        object.__setattr__(self, "reference", ref)
        seen: dict[str, int] = {}
        for k, t in enumerate(terms):
            lab = t.label or t.default_label()
            if lab in seen:
                raise ModelError(
                    f"duplicate term label {lab!r} (terms {seen[lab]} and {k}); "
                    "give one of them an explicit label"
                )
            seen[lab] = k

    @property
    def p(self) -> int:
        return len(self.terms)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(t.label if t.label is not None else t.default_label() for t in self.terms)

    def dyad_independent(self) -> bool:
        return all(t.dyad_independent for t in self.terms)


@dataclass(frozen=True, eq=False)
class StatVector:
    """A statistic (or change-statistic) vector aligned with model terms."""

    labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (len(self.labels),):
            raise ModelError(f"{len(self.labels)} labels but values shape {v.shape}")
        v = np.ascontiguousarray(v)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", tuple(self.labels))

    def as_dict(self) -> dict[str, float]:
        return {lab: float(v) for lab, v in zip(self.labels, self.values)}


def eval_stats(
    model: ModelSpec,
    y: CountNetwork,
    attrs: NodeAttributes | None = None,
) -> StatVector:
    """Evaluate the full statistic vector g(y)."""
    ctx = _make_ctx(y, attrs)
    out = np.empty(model.p)
    for k, t in enumerate(model.terms):
        out[k] = t._stat(ctx, t._resolve(ctx))
    return StatVector(labels=model.labels, values=out)


def discrete_change(
    model: ModelSpec,
    y: CountNetwork,
    attrs: NodeAttributes | None,
    i: int,
    j: int,
    k1: int,
    k2: int,
) -> StatVector:
    """Change statistic Δ^{k1→k2}_{(i,j)} g = g(y with y_ij=k2) − g(y with y_ij=k1).

    Actor indices are 1-based.  The current value of dyad (i, j) is
    irrelevant (both endpoints of the difference overwrite it); all other
    dyads are taken from ``y``, which is left unmodified.
    """
    y._check_dyad(i, j)
    if k1 < 0 or k2 < 0:
        raise ModelError(f"dyad values must be nonnegative, got k1={k1}, k2={k2}")
    ctx = _make_ctx(y, attrs)
    out = np.empty(model.p)
    for k, t in enumerate(model.terms):
        out[k] = t._change(ctx, t._resolve(ctx), i - 1, j - 1, int(k1), int(k2))
    return StatVector(labels=model.labels, values=out)


def log_reference_ratio(model: ModelSpec, k1: int, k2: int) -> float:
    """log h(k2)/h(k1) for one dyad: −log(k2!/k1!) under Poisson, 0 under geometric."""
    if model.reference == "poisson":
        return float(log_factorial(k1) - log_factorial(k2))
    return 0.0


def conditional_logratio(
    model: ModelSpec,
    theta: np.ndarray,
    y: CountNetwork,
    attrs: NodeAttributes | None,
    i: int,
    j: int,
    k1: int,
    k2: int,
) -> float:
    """log of the probability ratio between the networks with y_ij = k2 vs k1.

    Equals log[h(k2)/h(k1)] + θ·Δ^{k1→k2}; this is the building block of both
    the sampler's acceptance ratio and the conditional dyad distribution.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (model.p,):
        raise ModelError(f"theta shape {theta.shape} does not match p={model.p}")
    delta = discrete_change(model, y, attrs, i, j, k1, k2)
    return log_reference_ratio(model, int(k1), int(k2)) + float(theta @ delta.values)


# ---------------------------------------------------------------------------
# Natural parameter space
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ThetaConstraint:
    """Half-space constraint coeffs·θ ≤ bound (or < bound when strict)."""

    coeffs: np.ndarray
    bound: float
    strict: bool
    description: str

    def __post_init__(self) -> None:
        c = np.ascontiguousarray(np.asarray(self.coeffs, dtype=np.float64))
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    def satisfied(self, theta: np.ndarray, margin: float = 0.0) -> bool:
        v = float(self.coeffs @ np.asarray(theta, dtype=np.float64))
        if self.strict or margin > 0:
            return v <= self.bound - margin if margin > 0 else v < self.bound
        return v <= self.bound

    def violation(self, theta: np.ndarray) -> float:
        """How far coeffs·θ sits above the bound (≤ 0 when satisfied)."""
        return float(self.coeffs @ np.asarray(theta, dtype=np.float64)) - self.bound


def _unit(p: int, k: int) -> np.ndarray:
    e = np.zeros(p)
    e[k] = 1.0
    return e


def theta_constraints(
    model: ModelSpec,
    network: CountNetwork | None = None,
    attrs: NodeAttributes | None = None,
) -> list[ThetaConstraint]:
    """Half-space description of the model's natural parameter space.

    Poisson reference: the factorial weight keeps every per-dyad series
    finite except where a term outruns it — the factorial-weight (CMP)
    coefficient is bounded by 1 and the mutual-product coefficient by 0.

    Geometric reference: nothing damps large counts, so convergence rests on
    the statistics themselves.  Only dyad-independent models are supported;
    per-dyad linear loadings (Sum, DyadCovariate, ActorSum) must have
    negative total coefficient on every dyad, which requires the network
    and attributes when covariate terms are present.  Dyads with no linear
    loading fall back to a negative SqrtSum coefficient, then a negative
    factorial-weight coefficient; if no term can keep that dyad's series
    finite the parameter space is empty and a ModelError is raised.  The
    result is a conservative inner description (boundary slices where a
    lower-order term rescues convergence are excluded).
    """
    p = model.p
    labels = model.labels
    cons: list[ThetaConstraint] = []

    if model.reference == "poisson":
        for k, t in enumerate(model.terms):
            if isinstance(t, CMP):
                # at exactly 1 the factorial cancels and convergence depends
                # on the remaining terms; keep the inner description strict
                cons.append(ThetaConstraint(
                    coeffs=_unit(p, k), bound=1.0, strict=True,
                    description=f"{labels[k]}: factorial-weight coefficient must be < 1",
                ))
            elif isinstance(t, MutualProduct):
                cons.append(ThetaConstraint(
                    coeffs=_unit(p, k), bound=0.0, strict=False,
                    description=f"{labels[k]}: mutual-product coefficient must be <= 0",
                ))
        return cons

    # geometric reference
    if not model.dyad_independent():
        raise ModelError(
            "geometric reference is supported for dyad-independent terms only; "
            "dependence statistics have no tractable parameter-space description "
            "without factorial damping"
        )
    cmp_idx = [k for k, t in enumerate(model.terms) if isinstance(t, CMP)]
    if cmp_idx:
        for k in cmp_idx:
            cons.append(ThetaConstraint(
                coeffs=_unit(p, k), bound=0.0, strict=True,
                description=f"{labels[k]}: factorial-weight coefficient must be < 0 "
                            "under the geometric reference",
            ))
        return cons

    linear_terms = [
        (k, t) for k, t in enumerate(model.terms)
        if isinstance(t, (Sum, DyadCovariate, ActorSum))
    ]
    sqrt_idx = [k for k, t in enumerate(model.terms) if isinstance(t, SqrtSum)]

    needs_context = any(isinstance(t, (DyadCovariate, ActorSum)) for _, t in linear_terms)
    if needs_context and network is None:
        raise ModelError(
            "deriving geometric-reference constraints for covariate terms needs "
            "the network (and attributes) to read per-dyad loadings; pass network="
        )

    if linear_terms:
        if needs_context:
            ctx = _make_ctx(network, attrs)
            loads = np.zeros((len(ctx.vals), p))
            for k, t in linear_terms:
                if isinstance(t, Sum):
                    loads[:, k] = 1.0
                else:
                    x = t._resolve(ctx)
                    loads[:, k] = x[ctx.ii, ctx.jj]
            rows = np.unique(loads, axis=0)
        else:
            row = np.zeros(p)
            for k, _ in linear_terms:
                row[k] = 1.0
            rows = row[None, :]
        sqrt_fallback_needed = False
        for row in rows:
            if np.any(row != 0):
                cons.append(ThetaConstraint(
                    coeffs=row.copy(), bound=0.0, strict=True,
                    description="geometric reference: per-dyad linear loading "
                                + " + ".join(
                                    f"{row[k]:g}*{labels[k]}" for k in range(p) if row[k] != 0
                                ) + " must be < 0",
                ))
            else:
                sqrt_fallback_needed = True
        if sqrt_fallback_needed:
            if not sqrt_idx:
                raise ModelError(
                    "empty natural parameter space: some dyads carry no "
                    "value-unbounded statistic under the geometric reference"
                )
            row = np.zeros(p)
            for k in sqrt_idx:
                row[k] = 1.0
            cons.append(ThetaConstraint(
                coeffs=row, bound=0.0, strict=True,
                description="geometric reference: sqrt-statistic coefficient must be < 0 "
                            "on dyads with zero linear loading",
            ))
        return cons

    if sqrt_idx:
        row = np.zeros(p)
        for k in sqrt_idx:
            row[k] = 1.0
        cons.append(ThetaConstraint(
            coeffs=row, bound=0.0, strict=True,
            description="geometric reference: sqrt-statistic coefficient must be < 0",
        ))
        return cons

    raise ModelError(
        "empty natural parameter space: model has only value-bounded statistics "
        "under the geometric reference, so no coefficient makes the distribution proper"
    )


def check_theta(
    model: ModelSpec,
    theta: np.ndarray,
    network: CountNetwork | None = None,
    attrs: NodeAttributes | None = None,
) -> None:
    """Raise ModelError if theta violates any natural-parameter-space constraint."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (model.p,):
        raise ModelError(f"theta shape {theta.shape} does not match p={model.p}")
    bad = [c for c in theta_constraints(model, network, attrs) if not c.satisfied(theta)]
    if bad:
        raise ConstraintError(
            "parameter vector outside the natural parameter space:\n  "
            + "\n  ".join(c.description for c in bad)
        )
