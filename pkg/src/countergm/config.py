"""YAML run configuration: data location, model terms, and numeric controls.

A run document names its data (either a bundled ``dataset`` or a ``network``
edge-list path plus optional ``attributes`` table), a ``reference`` measure,
a list of ``terms``, and optional ``sampler``/``fit`` control blocks; the
subcommand-specific keys (``theta``, ``theta0``, ``test``, ``method``) ride
along.  Everything is validated on load — unknown keys, unknown term kinds,
and covariate names that do not resolve against the attribute table all
raise :class:`ConfigError` pointing at the offending entry.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import datasets
from .inference import FitControl
from .network import CountNetwork, NodeAttributes, read_attributes, read_edge_list
from .sampler import SamplerControl
from .terms import (
    CMP,
    ActorCovariance,
    ActorSum,
    DyadCovariate,
    ModelSpec,
    MutualGeoMean,
    MutualMin,
    MutualNegAbsDiff,
    MutualProduct,
    NonzeroCount,
    SqrtSum,
    Sum,
    Transitivity,
)

__all__ = ["ConfigError", "RunConfig", "load_config", "build_term", "build_model"]


class ConfigError(ValueError):
    """A run configuration document is malformed or inconsistent."""


_TERM_KINDS = {
    "sum": Sum,
    "nonzero": NonzeroCount,
    "nonzero_count": NonzeroCount,
    "cmp": CMP,
    "dispersion": CMP,
    "sqrt_sum": SqrtSum,
    "sqrtsum": SqrtSum,
    "dyad_covariate": DyadCovariate,
    "dyadcov": DyadCovariate,
    "actor_sum": ActorSum,
    "actorsum": ActorSum,
    "mutual_min": MutualMin,
    "mutual_neg_abs_diff": MutualNegAbsDiff,
    "mutual_geomean": MutualGeoMean,
    "mutual_product": MutualProduct,
    "actor_covariance": ActorCovariance,
    "actorcov": ActorCovariance,
    "transitivity": Transitivity,
}


def build_term(entry, where: str = "terms entry"):
    """Instantiate one statistic from its config mapping.

    ``{kind: sum}`` shorthand or a mapping with option keys matching the
    term's constructor (e.g. ``{kind: dyadcov, attribute: faction,
    transform: neg_abs_diff}``).  A bare string is treated as a kind.
    """
    if isinstance(entry, str):
        entry = {"kind": entry}
    if not isinstance(entry, dict):
        raise ConfigError(f"{where}: expected a mapping or term name, got {entry!r}")
    opts = dict(entry)
    kind = opts.pop("kind", None)
    if kind is None:
        raise ConfigError(f"{where}: missing 'kind'")
    key = str(kind).strip().lower().replace("-", "_").replace(" ", "_")
    cls = _TERM_KINDS.get(key)
    if cls is None:
        raise ConfigError(
            f"{where}: unknown term kind {kind!r}; known kinds: "
            + ", ".join(sorted(set(_TERM_KINDS)))
        )
    if "actors" in opts and opts["actors"] is not None:
        opts["actors"] = tuple(int(a) for a in opts["actors"])
    try:
        return cls(**opts)
    except TypeError:
        raise ConfigError(
            f"{where}: invalid options {sorted(opts)} for term kind {key!r}"
        ) from None


def build_model(doc: dict, where: str = "config") -> ModelSpec:
    """Build the ModelSpec from the ``terms`` and ``reference`` keys."""
    entries = doc.get("terms")
    if not entries:
        raise ConfigError(f"{where}: no 'terms' list")
    terms = tuple(
        build_term(e, where=f"terms[{k}]") for k, e in enumerate(entries)
    )
    reference = doc.get("reference", "poisson")
    try:
        return ModelSpec(terms=terms, reference=reference)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass(frozen=True, eq=False)
class RunConfig:
    """A fully resolved run: data, model, and controls, plus provenance."""

    path: str
    sha256: str
    raw: dict
    network: CountNetwork
    attrs: NodeAttributes | None
    model: ModelSpec
    sampler: SamplerControl
    fit: FitControl
    method: str                      # "mcmle" | "mom"
    theta: np.ndarray | None         # for simulate/diagnose
    theta0: np.ndarray | None        # fit starting values
    test_term: object | None
    test_nsim: int


_TOP_KEYS = {
    "dataset", "network", "attributes", "directed", "nodes",
    "reference", "terms", "sampler", "fit", "method",
    "theta", "theta0", "test",
}


def _load_data(doc: dict, base: Path) -> tuple[CountNetwork, NodeAttributes | None]:
    dataset = doc.get("dataset")
    net_path = doc.get("network")
    if dataset is not None and net_path is not None:
        raise ConfigError("give either 'dataset' or 'network', not both")
    if dataset is not None:
        if dataset == "karate":
            d = datasets.load_karate()
        elif dataset == "fraternity":
            d = datasets.load_fraternity()
        else:
            raise ConfigError(
                f"unknown dataset {dataset!r}; bundled datasets: karate, fraternity"
            )
        return d.network, d.attributes
    if net_path is None:
        raise ConfigError("config needs a 'dataset' name or a 'network' path")
    p = (base / str(net_path)).resolve() if not Path(net_path).is_absolute() else Path(net_path)
    if not p.exists():
        raise ConfigError(f"network file does not exist: {p}")
    net = read_edge_list(p, n=doc.get("nodes"), directed=doc.get("directed"))
    attrs = None
    attrs_path = doc.get("attributes")
    if attrs_path is not None:
        ap = (base / str(attrs_path)).resolve() if not Path(attrs_path).is_absolute() else Path(attrs_path)
        if not ap.exists():
            raise ConfigError(f"attributes file does not exist: {ap}")
        attrs = read_attributes(ap)
        if attrs.n != net.n:
            raise ConfigError(
                f"attributes cover {attrs.n} actors but the network has {net.n}"
            )
    return net, attrs


def _check_covariates(model: ModelSpec, attrs: NodeAttributes | None) -> None:
    available = sorted(attrs.data) if attrs is not None else []
    for k, t in enumerate(model.terms):
        name = getattr(t, "attribute", None)
        if name is not None and name not in available:
            raise ConfigError(
                f"terms[{k}] ({t.default_label()}): attribute {name!r} not found; "
                f"available: {available or 'none (no attributes file)'}"
            )


def _control_block(doc: dict, key: str, where: str) -> dict:
    block = doc.get(key) or {}
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: '{key}' must be a mapping")
    return dict(block)


def _theta_vector(doc: dict, key: str, p: int) -> np.ndarray | None:
    v = doc.get(key)
    if v is None:
        return None
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (p,):
        raise ConfigError(
            f"'{key}' has {arr.size} entries but the model has {p} terms"
        )
    return arr


def load_config(
    path,
    seed: int | None = None,
    threads: int | None = None,
) -> RunConfig:
    """Parse, validate, and resolve a YAML run document.

    ``seed`` and ``threads`` override the corresponding config values (they
    are the CLI flags).  The returned config carries the SHA-256 of the raw
    file bytes so every artifact can state exactly what produced it.
    """
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file does not exist: {p}")
    data = p.read_bytes()
    digest = hashlib.sha256(data).hexdigest()
    try:
        doc = yaml.safe_load(data)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: not valid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    unknown = sorted(set(doc) - _TOP_KEYS)
    if unknown:
        raise ConfigError(
            f"{p}: unknown keys {unknown}; known keys: {sorted(_TOP_KEYS)}"
        )

    network, attrs = _load_data(doc, p.parent)
    model = build_model(doc, where=str(p))
    _check_covariates(model, attrs)

    sampler_kw = _control_block(doc, "sampler", str(p))
    if seed is not None:
        sampler_kw["seed"] = int(seed)
    try:
        sampler = SamplerControl(**sampler_kw)
    except TypeError:
        raise ConfigError(
            f"{p}: invalid sampler options {sorted(sampler_kw)}"
        ) from None
    except ValueError as exc:
        raise ConfigError(f"{p}: sampler: {exc}") from None

    fit_kw = _control_block(doc, "fit", str(p))
    fit_kw["sampler"] = sampler
    if threads is not None:
        fit_kw["threads"] = int(threads)
    try:
        fit = FitControl(**fit_kw)
    except TypeError:
        raise ConfigError(f"{p}: invalid fit options {sorted(fit_kw)}") from None
    except ValueError as exc:
        raise ConfigError(f"{p}: fit: {exc}") from None

    method = str(doc.get("method", "mcmle")).lower()
    if method not in ("mcmle", "mom"):
        raise ConfigError(f"{p}: method must be 'mcmle' or 'mom', got {method!r}")

    test_doc = doc.get("test") or {}
    if test_doc and not isinstance(test_doc, dict):
        raise ConfigError(f"{p}: 'test' must be a mapping")
    test_term = None
    test_nsim = int(test_doc.get("nsim", 1000)) if test_doc else 1000
    if "term" in test_doc:
        test_term = build_term(test_doc["term"], where="test.term")
        name = getattr(test_term, "attribute", None)
        if name is not None and (attrs is None or name not in attrs.data):
            raise ConfigError(f"test.term: attribute {name!r} not found")

    return RunConfig(
        path=str(p),
        sha256=digest,
        raw=doc,
        network=network,
        attrs=attrs,
        model=model,
        sampler=sampler,
        fit=fit,
        method=method,
        theta=_theta_vector(doc, "theta", model.p),
        theta0=_theta_vector(doc, "theta0", model.p),
        test_term=test_term,
        test_nsim=test_nsim,
    )
