from __future__ import annotations

import numpy as np
import pytest

from countergm import CountNetwork, NodeAttributes, load_karate


def random_network(rng, n, directed, max_value=6, density=0.5) -> CountNetwork:
    """A random count network with roughly the given nonzero density."""
    rows = []
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i == j or (not directed and j < i):
                continue
            if rng.random() < density:
                rows.append((i, j, int(rng.integers(1, max_value + 1))))
    return CountNetwork.from_weighted_edge_list(rows, n=n, directed=directed)


def random_attrs(rng, n) -> NodeAttributes:
    data = {
        "x": rng.normal(size=n).round(3),
        "group": rng.integers(0, 3, size=n).astype(np.float64),
        "flag": (rng.random(size=n) < 0.4).astype(np.float64),
    }
    return NodeAttributes(n=n, data=data)


@pytest.fixture(scope="session")
def karate():
    return load_karate()


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)
