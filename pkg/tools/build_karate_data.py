"""Regenerate the bundled karate-club data files from networkx.

Development-time tool only; the package ships the generated TSVs and never
imports networkx.  The edge weights in networkx's karate_club_graph() are the
original interaction-context counts recorded by Zachary (number of shared
social contexts per pair of club members, 0..7).  Expected totals for the
generated network: 78 positive dyads, total count 231, max 7.

Run from the repository root:

    python3 tools/build_karate_data.py
"""
from __future__ import annotations

import hashlib
import sys
from pathlib import Path

import networkx as nx

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from countergm.network import CountNetwork, write_edge_list  # noqa: E402

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "countergm" / "data"

# Faction alignment of each club member (actors 1..34), coded on the scale
# -2 (strongly with the instructor, actor 1) .. +2 (strongly with the
# president, actor 34), 0 = neutral.
FACTION = [
    -2, -1, -2, -2, -2, -2, -2, -2, 1, 0, -2, -2, -2, -2, 2, 2, -2,
    -1, 2, -1, 2, -1, 2, 2, 2, 2, 2, 1, 1, 2, 1, 2, 2, 2,
]


def main() -> None:
    g = nx.karate_club_graph()
    n = g.number_of_nodes()
    assert n == 34

    rows = [(u + 1, v + 1, int(d["weight"])) for u, v, d in g.edges(data=True)]
    net = CountNetwork.from_weighted_edge_list(rows, n=n, directed=False)

    vals = net.dyad_values()
    assert int((vals > 0).sum()) == 78, (vals > 0).sum()
    assert int(vals.sum()) == 231, vals.sum()
    assert int(vals.max()) == 7, vals.max()

    DATA_DIR.mkdir(parents=True, exist_ok=True)

    edge_path = DATA_DIR / "karate_counts.tsv"
    write_edge_list(
        net,
        edge_path,
        header_comment=(
            "Zachary karate club: number of shared interaction contexts per\n"
            "pair of club members (counts 0..7).  Actor 1 is the instructor,\n"
            "actor 34 the club president."
        ),
    )

    attr_path = DATA_DIR / "karate_attributes.tsv"
    with open(attr_path, "w", encoding="utf-8") as fh:
        fh.write("# Per-actor covariates for the karate club network.\n")
        fh.write("# faction: -2 (strongly instructor) .. 2 (strongly president), 0 neutral\n")
        fh.write("# leader_instructor / leader_president: indicator of the two leaders\n")
        fh.write("actor\tfaction\tleader_instructor\tleader_president\n")
        for a in range(1, n + 1):
            hi = 1 if a == 1 else 0
            jn = 1 if a == 34 else 0
            fh.write(f"{a}\t{FACTION[a - 1]}\t{hi}\t{jn}\n")

    for p in (edge_path, attr_path):
        digest = hashlib.sha256(p.read_bytes()).hexdigest()
        print(f"{digest}  {p.name}")


if __name__ == "__main__":
    main()
