import hashlib
from pathlib import Path

import numpy as np
import pytest

from countergm import NetworkFormatError, fraternity_available, load_fraternity, load_karate
import countergm.datasets as datasets

DATA_DIR = Path(datasets.__file__).parent / "data"

# Checksums pin the exact bundled files; any silent edit fails loudly here.
KARATE_SHA = {
    "karate_counts.tsv": "012ab87a81b3170955a1609f6c919c098ff4405e035db979c618c6c7996abd96",
    "karate_attributes.tsv": "de3488848e773d6299d4c2a9726b7654d6d085ea519a7fbc0eb2ffe955827c7a",
}


@pytest.mark.parametrize("name,sha", sorted(KARATE_SHA.items()))
def test_bundled_file_checksums(name, sha):
    digest = hashlib.sha256((DATA_DIR / name).read_bytes()).hexdigest()
    assert digest == sha


def test_karate_headline_statistics(karate):
    net = karate.network
    assert net.n == 34
    assert not net.directed
    vals = net.dyad_values()
    assert vals.shape == (561,)
    assert vals.sum() == 231
    assert (vals > 0).sum() == 78
    assert vals.max() == 7
    assert vals.mean() == pytest.approx(0.41, abs=0.005)


def test_karate_attributes(karate):
    at = karate.attributes
    assert at.n == 34
    assert set(at.names) == {"faction", "leader_instructor", "leader_president"}
    fac = at.column("faction")
    assert fac.min() == -2 and fac.max() == 2
    assert at.column("leader_instructor").sum() == 1
    assert at.column("leader_instructor")[0] == 1
    assert at.column("leader_president").sum() == 1
    assert at.column("leader_president")[33] == 1
    # the two leaders sit at the opposite ends of the faction scale
    assert fac[0] == -2 and fac[33] == 2


def test_karate_leader_strengths(karate):
    # row sums of the two leaders, straight off the network
    net = karate.network
    hi = sum(net.value(1, j) for j in range(2, 35))
    john = sum(net.value(34, j) for j in range(1, 34))
    assert hi == 42
    assert john == 48


def test_fraternity_available_consistent():
    present = (DATA_DIR / "fraternity_counts.tsv").exists()
    assert fraternity_available() == present


def test_fraternity_missing_raises(monkeypatch, tmp_path):
    monkeypatch.setattr(
        datasets, "_fraternity_path", lambda: tmp_path / "fraternity_counts.tsv"
    )
    with pytest.raises(FileNotFoundError):
        load_fraternity()


def test_fraternity_rejects_wrong_network(monkeypatch, tmp_path, rng):
    # a file with the right shape but implausible values must be refused
    p = tmp_path / "fraternity_counts.tsv"
    lines = ["# nodes=58 directed=0"]
    for i in range(1, 59):
        for j in range(i + 1, 59):
            if rng.random() < 0.1:
                lines.append(f"{i}\t{j}\t1")
    p.write_text("\n".join(lines) + "\n")
    monkeypatch.setattr(datasets, "_fraternity_path", lambda: p)
    with pytest.raises(NetworkFormatError):
        load_fraternity()


@pytest.mark.skipif(not fraternity_available(), reason="fraternity data not bundled")
def test_fraternity_headline_statistics():
    net = load_fraternity().network
    assert net.n == 58
    assert not net.directed
    vals = net.dyad_values().astype(np.float64)
    assert 1.8 <= vals.mean() <= 2.2
    assert vals.max() > 30
