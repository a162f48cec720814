"""Bundled and drop-in example datasets.

Two networks are referenced throughout the documentation and tests:

* ``karate`` — Zachary's karate club with the count of shared interaction
  contexts per pair of members (undirected, 34 actors, values 0..7).  Bundled
  with the package together with per-actor covariates (faction alignment on a
  -2..2 scale and indicators for the two club leaders).
* ``fraternity`` — Bernard, Killworth and Sailer's behavioral observation
  counts of pairwise conversations among 58 fraternity members (undirected).
  This dataset is *not* redistributed here.  If you have a copy, place it at
  ``<data dir>/fraternity_counts.tsv`` in the edge-list format documented in
  :mod:`countergm.network` and it will be picked up automatically;
  :func:`load_fraternity` validates its headline statistics before returning.

Integrity of bundled files is checked against sha256 digests frozen at build
time, so a corrupted install fails loudly rather than producing subtly wrong
fits.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .network import CountNetwork, NetworkFormatError, NodeAttributes, read_attributes, read_edge_list

__all__ = ["Dataset", "fraternity_available", "load_fraternity", "load_karate"]

_CHECKSUMS = {
    "karate_counts.tsv": "012ab87a81b3170955a1609f6c919c098ff4405e035db979c618c6c7996abd96",
    "karate_attributes.tsv": "de3488848e773d6299d4c2a9726b7654d6d085ea519a7fbc0eb2ffe955827c7a",
}


@dataclass(frozen=True)
class Dataset:
    name: str
    network: CountNetwork
    attributes: NodeAttributes


def _data_path(filename: str) -> Path:
    return Path(resources.files("countergm.data") / filename)


def _verified(filename: str) -> Path:
    path = _data_path(filename)
    if not path.exists():
        raise FileNotFoundError(f"bundled data file missing: {path}")
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    expected = _CHECKSUMS[filename]
    if digest != expected:
        raise NetworkFormatError(
            f"bundled data file {filename} is corrupted "
            f"(sha256 {digest}, expected {expected})"
        )
    return path


def load_karate() -> Dataset:
    """Load the bundled karate-club count network and actor covariates.

    The network has 34 actors and 561 dyads; 78 dyads carry a positive count
    and the counts total 231 with maximum 7.  Attribute columns: ``faction``
    (alignment score -2..2), ``leader_instructor`` (indicator of actor 1) and
    ``leader_president`` (indicator of actor 34).
    """
    net = read_edge_list(_verified("karate_counts.tsv"))
    attrs = read_attributes(_verified("karate_attributes.tsv"))
    if net.n != attrs.n:
        raise NetworkFormatError("karate data files disagree on actor count")
    return Dataset(name="karate", network=net, attributes=attrs)


def _fraternity_path() -> Path:
    return _data_path("fraternity_counts.tsv")


def fraternity_available() -> bool:
    """True if a drop-in fraternity edge list is present in the data dir."""
    return _fraternity_path().exists()


def load_fraternity() -> Dataset:
    """Load the drop-in fraternity conversation-count network.

    Raises ``FileNotFoundError`` when the file has not been provided, and
    ``NetworkFormatError`` when the provided file does not match the
    published headline statistics of the dataset (58 actors, undirected,
    mean count about 2.0, standard deviation about 3.4, maximum above 30),
    which guards against loading the wrong network under this name.
    """
    path = _fraternity_path()
    if not path.exists():
        raise FileNotFoundError(
            f"fraternity data not bundled; place an edge list at {path} "
            "(see countergm.datasets module docs)"
        )
    net = read_edge_list(path, directed=False)
    if net.n != 58:
        raise NetworkFormatError(f"fraternity network must have 58 actors, got {net.n}")
    vals = net.dyad_values().astype(np.float64)
    mean, sd, mx = float(vals.mean()), float(vals.std(ddof=1)), int(vals.max())
    if not (1.8 <= mean <= 2.2 and 3.0 <= sd <= 3.8 and mx > 30):
        raise NetworkFormatError(
            "file at fraternity_counts.tsv does not look like the fraternity "
            f"conversation counts (mean {mean:.3f}, sd {sd:.3f}, max {mx}; "
            "expected mean~2.0, sd~3.4, max>30)"
        )
    return Dataset(name="fraternity", network=net, attributes=NodeAttributes.empty(net.n))
