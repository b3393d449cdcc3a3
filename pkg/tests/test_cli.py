import csv
import io
import json

import pytest

from ringwalk import cli
from ringwalk.cli import ConfigError, parse_config, read_config_file


def _run(argv, capsys):
    status = cli.main(argv)
    out, err = capsys.readouterr()
    return status, out, err


def _csv_rows(text):
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))


def _header(text):
    return dict(line[2:].split(": ", 1) for line in text.splitlines() if line.startswith("# "))


class TestConfig:
    def test_defaults(self):
        cfg = parse_config(["evolve", "--nodes", "8"])
        assert (cfg.N, cfg.l, cfg.gamma, cfg.method, cfg.preset) == (8, 2, 0.001, "exact", "gurvitz")

    def test_precedence(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment\nnodes = 12\nrange = 3  # trailing\ngamma = 0.004\n")
        cfg = parse_config(["mixing", "--config", str(path), "--gamma", "0.002"])
        assert (cfg.N, cfg.l, cfg.gamma) == (12, 3, 0.002)

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("nodes = 8\ncolour = blue\n")
        with pytest.raises(ConfigError, match="2: unknown key 'colour'"):
            read_config_file(str(path))

    def test_bad_value_and_missing_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("nodes = eight\n")
        with pytest.raises(ConfigError, match="expected int"):
            read_config_file(str(path))
        with pytest.raises(ConfigError, match="cannot read"):
            read_config_file(str(tmp_path / "missing.cfg"))

    def test_grid_lists(self, tmp_path):
        path = tmp_path / "sweep.cfg"
        path.write_text("grid.nodes = 8, 10\ngrid.gamma = 0.001,0.002\n")
        _, grid = read_config_file(str(path))
        assert grid == {"N": [8, 10], "gamma": [0.001, 0.002]}

    @pytest.mark.parametrize("argv,message", [
        (["evolve"], "N: --nodes is required"),
        (["evolve", "-n", "8", "-l", "4"], "l must satisfy 1 <= l <= floor((N-1)/2) = 3, got 4"),
        (["evolve", "-n", "8", "--epsilon", "1.5"], "epsilon"),
        (["evolve", "-n", "8", "--gamma", "-1"], "gamma"),
        (["evolve", "-n", "8", "--initial-node", "8"], "initial_node"),
        (["mixing", "-n", "8", "-l", "1", "--method", "perturbative"], "requires l >= 2"),
        (["sweep", "-n", "8"], "grid"),
    ])
    def test_validation(self, argv, message):
        with pytest.raises(ConfigError) as info:
            parse_config(argv)
        assert message in str(info.value)


class TestExitStatus:
    def test_range_zero_is_usage_error(self, capsys):
        status, out, err = _run(["evolve", "--nodes", "6", "--range", "0"], capsys)
        assert status == 2 and out == ""
        assert err == "ringwalk: error: l must satisfy 1 <= l <= floor((N-1)/2) = 2, got 0\n"

    def test_computation_failure_leaves_no_file(self, tmp_path, capsys, monkeypatch):
        from ringwalk.errors import IntegrationError

        def boom(*args, **kwargs):
            raise IntegrationError("step size underflow", 3.5)

        monkeypatch.setattr(cli, "integrate_master", boom)
        out = tmp_path / "run.csv"
        status, _, err = _run(["evolve", "-n", "6", "-o", str(out)], capsys)
        assert status == 1 and "underflow" in err
        assert list(tmp_path.iterdir()) == []


class TestCommands:
    def test_evolve_starts_localised(self, capsys):
        status, out, _ = _run(["evolve", "-n", "6", "-l", "2", "--gamma", "0.01",
                               "--t-max", "2", "--stride", "1"], capsys)
        assert status == 0
        rows = _csv_rows(out)
        assert [float(r["t"]) for r in rows] == [0.0, 1.0, 2.0]
        assert [float(rows[0][f"P_{j}"]) for j in range(6)] == [1, 0, 0, 0, 0, 0]
        assert float(rows[0]["tv_to_uniform"]) == pytest.approx(2 - 2 / 6)
        header = _header(out)
        assert header["time_scale"] == "0.25" and header["sigma"] == "1"
        assert json.loads(header["config"])["N"] == 6

    @pytest.mark.parametrize("method", ["perturbative", "coherent", "classical"])
    def test_evolve_methods(self, method, capsys):
        status, out, _ = _run(["evolve", "-n", "8", "-l", "2", "--method", method,
                               "--t-max", "1", "--format", "json"], capsys)
        doc = json.loads(out)
        assert status == 0 and doc["header"]["source"] == method
        assert sum(doc["P"][-1]) == pytest.approx(1.0, abs=1e-10)

    def test_mixing_bound(self, capsys):
        status, out, _ = _run(["mixing", "--nodes", "100", "--range", "2", "--gamma", "0.001",
                               "--epsilon", "0.1", "--method", "perturbative", "--stride", "2"], capsys)
        row = _csv_rows(out)[0]
        assert status == 0
        assert float(row["m_inst_bound"]) == pytest.approx(6977.6, abs=0.1)
        assert float(row["m_inst_empirical"]) <= float(row["m_inst_bound"])
        assert float(row["m_ave_lower_bound"]) == pytest.approx(1e6)

    def test_spectrum_rows(self, capsys):
        status, out, _ = _run(["spectrum", "-n", "8", "-l", "3"], capsys)
        rows = _csv_rows(out)
        e4 = next(r for r in rows if r["quantity"] == "E" and r["n"] == "4")
        assert status == 0 and float(e4["value"]) == pytest.approx(-8.0)
        assert sum(r["quantity"] == "lambda" for r in rows) == 64

    def test_degeneracy_json(self, capsys):
        status, out, _ = _run(["degeneracy", "-n", "8", "-l", "3", "--format", "json"], capsys)
        doc = json.loads(out)
        assert status == 0 and doc["header"]["unexpected_degeneracies"] > 0
        assert sum(c["size"] for c in doc["classes"]) == 64

    def test_sweep_writes_manifest(self, tmp_path, capsys):
        cfg = tmp_path / "sweep.cfg"
        cfg.write_text("method = perturbative\nstride = 2\ngrid.nodes = 8, 10\ngrid.epsilon = 0.1, 0.3\n")
        out = tmp_path / "sweep.csv"
        status, _, _ = _run(["sweep", "--config", str(cfg), "-o", str(out), "--jobs", "2"], capsys)
        assert status == 0
        rows = _csv_rows(out.read_text())
        assert [(r["N"], r["epsilon"]) for r in rows] == [("8", "0.1"), ("8", "0.3"), ("10", "0.1"), ("10", "0.3")]
        manifest = json.loads((tmp_path / "sweep.csv.manifest.json").read_text())
        assert manifest["order"] == ["N", "epsilon"] and len(manifest["points"]) == 4

    def test_deterministic(self, capsys):
        argv = ["evolve", "-n", "7", "-l", "3", "--gamma", "0.02", "--t-max", "5"]
        assert _run(argv, capsys)[1] == _run(argv, capsys)[1]
