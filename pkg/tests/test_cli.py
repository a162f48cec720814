import json
import math

import numpy as np
import pytest

from countergm import DegeneracyError, write_edge_list
from countergm.cli import main
import countergm.cli as cli
from conftest import random_network

pytestmark = pytest.mark.usefixtures("rng")


@pytest.fixture
def workdir(tmp_path, rng):
    net = random_network(rng, 7, directed=False, density=0.7)
    write_edge_list(net, tmp_path / "net.tsv")
    (tmp_path / "run.yaml").write_text(
        "network: net.tsv\n"
        "terms:\n"
        "  - {kind: sum}\n"
        "sampler: {burnin: 1500, interval: 25, draws: 600, seed: 99}\n"
        "fit: {chains: 2, threads: 2, max_iterations: 30}\n"
        "theta: [0.2]\n"
    )
    return tmp_path, net


def run(args):
    return main([str(a) for a in args])


class TestFit:
    def test_fit_writes_artifacts_and_converges(self, workdir, capsys):
        d, net = workdir
        rc = run(["fit", "--config", d / "run.yaml", "--output-dir", d / "out",
                  "--format", "csv"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "sum" in out
        doc = json.loads((d / "out" / "fit.json").read_text())
        assert doc["converged"] is True
        assert doc["seed"] == 99
        assert len(doc["config_sha256"]) == 64
        want = math.log(net.dyad_values().mean())
        assert doc["theta"][0] == pytest.approx(want, abs=0.1)
        table = (d / "out" / "fit_table.csv").read_text()
        assert table.startswith("#")
        assert "config_sha256=" in table and "seed=99" in table
        assert (d / "out" / "diagnostics.txt").exists()

    def test_fit_exit_3_when_not_converged(self, workdir):
        d, _ = workdir
        text = (d / "run.yaml").read_text().replace(
            "max_iterations: 30", "max_iterations: 30, gain_a: 0.0")
        (d / "run.yaml").write_text(text.replace("fit:", "method: mom\nfit:"))
        rc = run(["fit", "--config", d / "run.yaml", "--output-dir", d / "o3"])
        assert rc == 3

    def test_fit_exit_4_on_degeneracy(self, workdir, monkeypatch):
        d, _ = workdir
        def boom(*a, **kw):
            raise DegeneracyError("sampler collapsed", theta=None, report=None)
        monkeypatch.setattr(cli, "mcmc_mle", boom)
        rc = run(["fit", "--config", d / "run.yaml", "--output-dir", d / "o4"])
        assert rc == 4


class TestSimulate:
    def test_same_seed_same_bytes(self, workdir):
        d, _ = workdir
        for sub in ("a", "b"):
            rc = run(["simulate", "--config", d / "run.yaml",
                      "--output-dir", d / sub, "--seed", 1234])
            assert rc == 0
        assert (d / "a" / "stats.csv").read_bytes() == (d / "b" / "stats.csv").read_bytes()
        rc = run(["simulate", "--config", d / "run.yaml",
                  "--output-dir", d / "c", "--seed", 4321])
        assert rc == 0
        assert (d / "a" / "stats.csv").read_bytes() != (d / "c" / "stats.csv").read_bytes()

    def test_saved_network_round_trips(self, workdir):
        from countergm import eval_stats, read_edge_list
        from countergm.config import load_config

        d, _ = workdir
        rc = run(["simulate", "--config", d / "run.yaml", "--output-dir", d / "s",
                  "--seed", 5, "--save-network"])
        assert rc == 0
        saved = read_edge_list(d / "s" / "network.tsv")
        assert saved.n == 7 and not saved.directed
        # the statistics of the saved final network equal the last csv row
        cfg = load_config(d / "run.yaml")
        got = eval_stats(cfg.model, saved, cfg.attrs).values
        rows = [ln for ln in (d / "s" / "stats.csv").read_text().splitlines()
                if ln and not ln.startswith("#")]
        last = [float(x) for x in rows[-1].split(",")[1:]]
        assert np.allclose(last, got)

    def test_theta_override(self, workdir):
        d, _ = workdir
        rc = run(["simulate", "--config", d / "run.yaml", "--output-dir", d / "t",
                  "--seed", 6, "--theta", "0.9"])
        assert rc == 0
        meta = (d / "t" / "stats.csv").read_text()
        assert "theta=0.9" in meta.replace(" ", "")

    def test_constraint_violation_exits_5(self, workdir):
        d, _ = workdir
        text = (d / "run.yaml").read_text()
        text = text.replace("  - {kind: sum}\n", "  - {kind: sum}\n  - {kind: cmp}\n")
        text = text.replace("theta: [0.2]", "theta: [0.2, 1.5]")
        (d / "run.yaml").write_text(text)
        rc = run(["simulate", "--config", d / "run.yaml", "--output-dir", d / "x"])
        assert rc == 5


class TestTestCommand:
    def test_monte_carlo_artifact(self, workdir, capsys):
        d, _ = workdir
        text = (d / "run.yaml").read_text()
        (d / "run.yaml").write_text(
            text + "test: {term: {kind: nonzero}, nsim: 99}\n")
        rc = run(["test", "--config", d / "run.yaml", "--output-dir", d / "mc"])
        assert rc == 0
        doc = json.loads((d / "mc" / "test.json").read_text())
        assert doc["term"] == "nonzero"
        assert doc["nsim"] == 99
        assert 0.0 < doc["p_value"] <= 1.0
        out = capsys.readouterr().out
        assert "one-sided p" in out

    def test_missing_test_block_is_usage_error(self, workdir):
        d, _ = workdir
        rc = run(["test", "--config", d / "run.yaml", "--output-dir", d / "mc2"])
        assert rc == 2


class TestDiagnose:
    def test_writes_report(self, workdir, capsys):
        d, _ = workdir
        rc = run(["diagnose", "--config", d / "run.yaml", "--output-dir", d / "dg"])
        assert rc == 0
        doc = json.loads((d / "dg" / "diagnostics.json").read_text())
        assert doc["labels"] == ["sum"]
        assert not doc["any_bimodal"]
        assert "ess" in capsys.readouterr().out.lower()


class TestDist:
    def test_poisson_table_matches_closed_form(self, capsys):
        rc = run(["dist", "--family", "poisson", "--mean", 2.0])
        assert rc == 0
        out = capsys.readouterr().out
        row1 = [ln for ln in out.splitlines() if ln.split(",")[0] == "1"]
        assert row1, out
        got = float(row1[0].split(",")[1])
        assert got == pytest.approx(2.0 * math.exp(-2.0), rel=1e-9)

    def test_zmp_zero_probability(self, tmp_path):
        rc = run(["dist", "--family", "zmp", "--theta1", "0.4", "--theta2", "-0.9",
                  "--output-dir", tmp_path, "--format", "csv"])
        assert rc == 0
        from countergm import zmp_pmf

        text = (tmp_path / "dist.csv").read_text()
        rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        got0 = float(rows[1].split(",")[1])
        assert got0 == pytest.approx(float(zmp_pmf(0.4, -0.9, 0)), abs=1e-10)

    def test_invalid_parameters_exit_5(self):
        assert run(["dist", "--family", "cmp", "--theta1", "0.5", "--theta2", "0.5"]) == 5


class TestSummary:
    def test_from_config(self, workdir, capsys):
        d, _ = workdir
        assert run(["summary", "--config", d / "run.yaml"]) == 0
        out = capsys.readouterr().out
        assert "nodes" in out and "7" in out

    def test_from_network_json(self, workdir, capsys):
        d, net = workdir
        assert run(["summary", "--network", d / "net.tsv", "--format", "json"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["nodes"] == 7
        assert doc["total"] == int(net.dyad_values().sum())


class TestExitCodes:
    def test_missing_config_file(self, tmp_path):
        assert run(["fit", "--config", tmp_path / "nope.yaml"]) == 2

    def test_malformed_config(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("dataset: karate\nterms:\n  - {kind: triangles}\n")
        assert run(["fit", "--config", p]) == 2

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2
