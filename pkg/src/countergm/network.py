"""Count-valued network containers, dyad-set semantics, and file formats.

A network assigns a count in {0, 1, 2, ...} to every dyad.  The dyad set
contains all ordered pairs of distinct actors for directed networks and all
unordered pairs for undirected ones; self-loops are excluded.  Actor indices
are 1-based throughout the public API, matching the on-disk edge-list format.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

__all__ = [
    "CountNetwork",
    "NodeAttributes",
    "NetworkFormatError",
    "NetworkSummary",
    "dyad_arrays",
    "read_attributes",
    "read_edge_list",
    "summary",
    "write_edge_list",
]


class NetworkFormatError(ValueError):
    """Raised for malformed network or attribute data (files or constructors)."""


@lru_cache(maxsize=64)
def dyad_arrays(n: int, directed: bool) -> tuple[np.ndarray, np.ndarray]:
    """0-based (i, j) index arrays of the dyad set in canonical order.

    The order is fixed and documented: row-major over ordered pairs with
    i != j for directed networks, and row-major over pairs with i < j for
    undirected ones.  Samplers rely on this order for reproducible RNG
    streams, so it must never change.
    """
    if directed:
        ii, jj = np.where(~np.eye(n, dtype=bool))
    else:
        ii, jj = np.triu_indices(n, k=1)
    ii = np.ascontiguousarray(ii.astype(np.int64))
    jj = np.ascontiguousarray(jj.astype(np.int64))
    ii.flags.writeable = False
    jj.flags.writeable = False
    return ii, jj


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class CountNetwork:
    """A directed or undirected network whose dyad values are counts.

    Parameters
    ----------
    n : int
        Number of actors (at least 2).
    directed : bool
        Whether dyads are ordered pairs.
    values : ndarray of shape (n, n)
        Dense value matrix with a zero diagonal; symmetric when undirected.
        Stored as int64 and made read-only.  ``values[i-1, j-1]`` is the
        count on dyad (i, j).
    """

    n: int
    directed: bool
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.n < 2:
            raise NetworkFormatError(f"need at least 2 actors, got n={self.n}")
        vals = np.asarray(self.values)
        if vals.shape != (self.n, self.n):
            raise NetworkFormatError(
                f"value matrix shape {vals.shape} does not match n={self.n}"
            )
        if not np.issubdtype(vals.dtype, np.integer):
            if not np.all(vals == np.floor(vals)):
                raise NetworkFormatError("dyad values must be integers")
        vals = vals.astype(np.int64)
        if np.any(vals < 0):
            raise NetworkFormatError("dyad values must be nonnegative")
        if np.any(np.diag(vals) != 0):
            raise NetworkFormatError("self-loops are not part of the dyad set")
        if not self.directed and np.any(vals != vals.T):
            raise NetworkFormatError("undirected network requires a symmetric value matrix")
        object.__setattr__(self, "values", _frozen(vals))

    # -- construction -----------------------------------------------------

    @classmethod
    def empty(cls, n: int, directed: bool) -> CountNetwork:
        return cls(n=n, directed=directed, values=np.zeros((n, n), dtype=np.int64))

    @classmethod
    def from_weighted_edge_list(
        cls,
        rows: list[tuple[int, int, int]],
        n: int,
        directed: bool,
    ) -> CountNetwork:
        """Build a network from (i, j, value) triples; unlisted dyads are 0.

        Indices are 1-based.  Listing the same dyad twice is an error, as are
        self-loops, out-of-range indices, and negative values.  For undirected
        networks, (i, j) and (j, i) name the same dyad.
        """
        vals = np.zeros((n, n), dtype=np.int64)
        seen: set[tuple[int, int]] = set()
        for row in rows:
            if len(row) != 3:
                raise NetworkFormatError(f"expected (i, j, value) triple, got {row!r}")
            i, j, v = row
            if i != int(i) or j != int(j) or v != int(v):
                raise NetworkFormatError(f"non-integer entry in {row!r}")
            i, j, v = int(i), int(j), int(v)
            if not (1 <= i <= n) or not (1 <= j <= n):
                raise NetworkFormatError(f"actor index out of range in ({i}, {j}): n={n}")
            if i == j:
                raise NetworkFormatError(f"self-loop ({i}, {i}) is not a dyad")
            if v < 0:
                raise NetworkFormatError(f"negative value {v} on dyad ({i}, {j})")
            key = (i, j) if directed else (min(i, j), max(i, j))
            if key in seen:
                raise NetworkFormatError(f"duplicate dyad ({i}, {j})")
            seen.add(key)
            vals[i - 1, j - 1] = v
            if not directed:
                vals[j - 1, i - 1] = v
        return cls(n=n, directed=directed, values=vals)

    # -- dyad access (1-based) --------------------------------------------

    def _check_dyad(self, i: int, j: int) -> None:
        if not (1 <= i <= self.n) or not (1 <= j <= self.n):
            raise NetworkFormatError(f"actor index out of range in ({i}, {j}): n={self.n}")
        if i == j:
            raise NetworkFormatError(f"({i}, {j}) is not a dyad (self-loop)")

    def value(self, i: int, j: int) -> int:
        """Count on dyad (i, j); symmetric lookup when undirected."""
        self._check_dyad(i, j)
        return int(self.values[i - 1, j - 1])

    def set_value(self, i: int, j: int, k: int) -> CountNetwork:
        """Return a new network with dyad (i, j) set to k (k >= 0)."""
        self._check_dyad(i, j)
        if k != int(k) or k < 0:
            raise NetworkFormatError(f"dyad value must be a nonnegative integer, got {k!r}")
        vals = self.values.copy()
        vals[i - 1, j - 1] = int(k)
        if not self.directed:
            vals[j - 1, i - 1] = int(k)
        return CountNetwork(n=self.n, directed=self.directed, values=vals)

    # -- dyad-set views ----------------------------------------------------

    @property
    def ndyads(self) -> int:
        return self.n * (self.n - 1) if self.directed else self.n * (self.n - 1) // 2

    def dyad_values(self) -> np.ndarray:
        """Values over the dyad set in canonical order (see `dyad_arrays`)."""
        ii, jj = dyad_arrays(self.n, self.directed)
        return self.values[ii, jj]

    def nonzero_dyads(self) -> list[tuple[int, int, int]]:
        """(i, j, value) triples (1-based) for nonzero dyads, canonical order."""
        ii, jj = dyad_arrays(self.n, self.directed)
        vals = self.values[ii, jj]
        keep = vals > 0
        return [
            (int(a) + 1, int(b) + 1, int(v))
            for a, b, v in zip(ii[keep], jj[keep], vals[keep])
        ]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CountNetwork):
            return NotImplemented
        return (
            self.n == other.n
            and self.directed == other.directed
            and bool(np.array_equal(self.values, other.values))
        )


@dataclass(frozen=True)
class NodeAttributes:
    """Named per-actor numeric attribute vectors (each of length n)."""

    n: int
    data: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        clean: dict[str, np.ndarray] = {}
        for name, col in self.data.items():
            arr = np.asarray(col, dtype=np.float64)
            if arr.shape != (self.n,):
                raise NetworkFormatError(
                    f"attribute {name!r} has length {arr.shape}, expected ({self.n},)"
                )
            clean[name] = _frozen(arr)
        object.__setattr__(self, "data", clean)

    @classmethod
    def empty(cls, n: int) -> NodeAttributes:
        return cls(n=n, data={})

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.data)

    def column(self, name: str) -> np.ndarray:
        if name not in self.data:
            raise KeyError(
                f"unknown attribute {name!r}; available: {sorted(self.data) or 'none'}"
            )
        return self.data[name]


# ---------------------------------------------------------------------------
# Descriptive summaries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NetworkSummary:
    n: int
    directed: bool
    ndyads: int
    total: int
    mean_value: float
    nonzero_density: float
    sd_value: float
    within_actor_sd: float
    max_value: int


def summary(net: CountNetwork) -> NetworkSummary:
    """Descriptive statistics of the dyad values.

    ``mean_value`` is the total count divided by the dyad count,
    ``nonzero_density`` the share of dyads with a positive value, ``sd_value``
    the sample standard deviation (ddof=1) of the dyad values, and
    ``within_actor_sd`` the square root of the pooled within-actor variance of
    each actor's incident values (out- and in-neighborhoods are pooled as
    separate groups for directed networks).
    """
    vals = net.dyad_values()
    mean = float(vals.mean())
    density = float((vals > 0).mean())
    sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0

    n = net.n
    y = net.values.astype(np.float64)
    mask = ~np.eye(n, dtype=bool)
    if net.directed:
        groups = [y[i][mask[i]] for i in range(n)] + [y[:, i][mask[:, i]] for i in range(n)]
    else:
        groups = [y[i][mask[i]] for i in range(n)]
    ss = 0.0
    dof = 0
    for g in groups:
        if g.size > 1:
            ss += float(((g - g.mean()) ** 2).sum())
            dof += g.size - 1
    within_sd = float(np.sqrt(ss / dof)) if dof > 0 else 0.0

    return NetworkSummary(
        n=n,
        directed=net.directed,
        ndyads=net.ndyads,
        total=int(vals.sum()),
        mean_value=mean,
        nonzero_density=density,
        sd_value=sd,
        within_actor_sd=within_sd,
        max_value=int(vals.max(initial=0)),
    )


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------
#
# Edge list: optional `# key: value` metadata comments (keys `nodes` and
# `directed`), then one whitespace-separated `i j value` triple per line,
# 1-based.  Attribute file: tab/space-separated with a header row that must
# contain an `actor` column, one row per actor.


def _open_text(path_or_file, mode: str = "r"):
    if isinstance(path_or_file, (str, Path)):
        return open(path_or_file, mode, encoding="utf-8"), True
    return path_or_file, False


def read_edge_list(
    path_or_file,
    n: int | None = None,
    directed: bool | None = None,
) -> CountNetwork:
    """Read a weighted edge list; `n`/`directed` override file metadata."""
    fh, close = _open_text(path_or_file)
    meta_n: int | None = None
    meta_directed: bool | None = None
    rows: list[tuple[int, int, int]] = []
    try:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, _, val = body.partition(":")
                    key = key.strip().lower()
                    val = val.strip()
                    if key == "nodes":
                        meta_n = int(val)
                    elif key == "directed":
                        meta_directed = val.lower() in ("true", "1", "yes")
                continue
            parts = line.split()
            if len(parts) != 3:
                raise NetworkFormatError(
                    f"line {lineno}: expected 'i j value', got {line!r}"
                )
            try:
                i, j, v = (int(p) for p in parts)
            except ValueError as exc:
                raise NetworkFormatError(f"line {lineno}: non-integer field in {line!r}") from exc
            rows.append((i, j, v))
    finally:
        if close:
            fh.close()

    n_final = n if n is not None else meta_n
    directed_final = directed if directed is not None else meta_directed
    if n_final is None:
        raise NetworkFormatError("actor count not given (no '# nodes:' metadata and no n=)")
    if directed_final is None:
        raise NetworkFormatError(
            "directedness not given (no '# directed:' metadata and no directed=)"
        )
    return CountNetwork.from_weighted_edge_list(rows, n=n_final, directed=directed_final)


def write_edge_list(net: CountNetwork, path_or_file, header_comment: str | None = None) -> None:
    """Write nonzero dyads as `i j value` with metadata comments."""
    fh, close = _open_text(path_or_file, "w")
    try:
        if header_comment:
            for line in header_comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write(f"# nodes: {net.n}\n")
        fh.write(f"# directed: {str(net.directed).lower()}\n")
        for i, j, v in net.nonzero_dyads():
            fh.write(f"{i}\t{j}\t{v}\n")
    finally:
        if close:
            fh.close()


def read_attributes(path_or_file) -> NodeAttributes:
    """Read a per-actor attribute table (header must include `actor`)."""
    fh, close = _open_text(path_or_file)
    try:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.strip().startswith("#")]
    finally:
        if close:
            fh.close()
    if not lines:
        raise NetworkFormatError("empty attribute file")
    header = lines[0].split()
    if "actor" not in header:
        raise NetworkFormatError("attribute file must have an 'actor' column")
    acol = header.index("actor")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != len(header):
            raise NetworkFormatError(
                f"line {lineno}: expected {len(header)} fields, got {len(parts)}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise NetworkFormatError(f"line {lineno}: non-numeric field in {line!r}") from exc
    n = len(rows)
    actors = [int(r[acol]) for r in rows]
    if sorted(actors) != list(range(1, n + 1)):
        raise NetworkFormatError("actor column must cover 1..n exactly once")
    order = np.argsort(actors)
    table = np.asarray(rows, dtype=np.float64)[order]
    data = {
        name: table[:, k] for k, name in enumerate(header) if k != acol
    }
    return NodeAttributes(n=n, data=data)
