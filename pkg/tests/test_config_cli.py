import csv
import json
import subprocess
import sys
import textwrap

import pytest

from transmon_hierarchy import cli
from transmon_hierarchy.config import RunConfig, load_config
from transmon_hierarchy.errors import ConfigError, NoConvergence

MINIMAL = """\
[params]
ec = 0.348
ej = 10.158
g = 0.02
omega_r = 6.99

[run]
experiment = rabi-sweep
seed = 4
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


class TestLoadConfig:
    def test_minimal_echo(self, tmp_path, params):
        cfg = load_config(write(tmp_path, MINIMAL))
        assert cfg.experiment == "rabi-sweep" and cfg.params == params and cfg.seed == 4
        d = cfg.as_dict()
        assert d["params"]["ej"] == 10.158
        assert d["options"]["n_points"] == 76
        assert d["solver"]["rel_tol"] == 1e-6
        assert d["models"] == ["CPB", "DO3", "GR", "R"]

    def test_experiment_argument_wins(self, tmp_path):
        assert load_config(write(tmp_path, MINIMAL), "bench").experiment == "bench"

    def test_options_and_solver(self, tmp_path):
        path = write(tmp_path, MINIMAL + "[solver]\nrel_tol = 1e-8\n[rabi-sweep]\nn_points = 5\n")
        cfg = load_config(path)
        assert cfg.solver.rel_tol == 1e-8 and cfg.options["n_points"] == 5

    def test_missing_required_key(self, tmp_path):
        path = write(tmp_path, MINIMAL.replace("ej = 10.158\n", ""))
        with pytest.raises(ConfigError, match="'ej'"):
            load_config(path)

    def test_negative_duration(self, tmp_path):
        path = write(tmp_path, MINIMAL + "[rabi-sweep]\nduration = -5\n")
        with pytest.raises(ConfigError, match=r"run\.ini:11 \[rabi-sweep\] duration: must be positive"):
            load_config(path)

    def test_unknown_key_reports_line(self, tmp_path):
        path = write(tmp_path, MINIMAL.replace("g = 0.02", "gg = 0.02"))
        with pytest.raises(ConfigError, match=r"run\.ini:4 \[params\] gg: unknown key"):
            load_config(path)

    def test_parse_error_reports_line(self, tmp_path):
        path = write(tmp_path, MINIMAL + "[solver]\nthis line is not a key\n")
        with pytest.raises(ConfigError, match=r"run\.ini:11"):
            load_config(path)

    def test_unknown_section(self, tmp_path):
        path = write(tmp_path, MINIMAL + "[plotting]\ncolor = red\n")
        with pytest.raises(ConfigError, match=r"run\.ini:10: unknown section \[plotting\]"):
            load_config(path)

    def test_bad_value_type(self, tmp_path):
        path = write(tmp_path, MINIMAL + "[rabi-sweep]\nn_points = many\n")
        with pytest.raises(ConfigError, match="cannot parse"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.ini")

    def test_no_experiment(self, tmp_path):
        with pytest.raises(ConfigError, match="no experiment"):
            load_config(write(tmp_path, MINIMAL.replace("experiment = rabi-sweep\n", "")))

    def test_run_config_checks(self):
        with pytest.raises(ConfigError):
            RunConfig("bogus")
        with pytest.raises(ConfigError):
            RunConfig("bench", threads=0)


def read_csv(path):
    with path.open() as fh:
        return list(csv.reader(fh))


class TestCli:
    def test_unknown_command_exits_2(self):
        proc = subprocess.run([sys.executable, "-m", "transmon_hierarchy", "bogus"], capture_output=True, text=True)
        assert proc.returncode == 2
        assert "invalid choice" in proc.stderr

    def test_spectra_sweep_defaults(self, tmp_path):
        assert cli.main(["spectra-sweep", "--out", str(tmp_path), "--seed", "9"]) == 0
        rows = read_csv(tmp_path / "spectra_sweep.csv")
        assert len(rows) == 1 + 28
        side = json.loads((tmp_path / "spectra_sweep.json").read_text())
        assert side["seed"] == 9
        assert side["solver"]["rel_tol"] == 1e-6
        assert side["code_version"] == "0.1.0"
        assert side["output"] == "spectra_sweep.csv"

    def test_model_filter(self, tmp_path):
        assert cli.main(["spectra-sweep", "--out", str(tmp_path), "--model", "gr", "--model", "r"]) == 0
        assert {r[0] for r in read_csv(tmp_path / "spectra_sweep.csv")[1:]} == {"GR", "R"}

    def test_output_directory_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TRANSMON_OUT", str(tmp_path / "env"))
        assert cli.main(["converge-dims", "--model", "r"]) == 0
        assert read_csv(tmp_path / "env" / "convergence_dims.csv")[1] == ["R", "2"]

    def test_config_error_exits_2(self, tmp_path, capsys):
        bad = write(tmp_path, MINIMAL + "[rabi-sweep]\nduration = -1\n")
        assert cli.main(["rabi-sweep", "--config", str(bad)]) == 2
        assert "must be positive" in capsys.readouterr().err

    def test_runtime_failure_exits_1(self, tmp_path, monkeypatch):
        def fail(cfg, out):
            raise NoConvergence("no root")

        monkeypatch.setitem(cli.HANDLERS, "calibrate", fail)
        assert cli.main(["calibrate", "--out", str(tmp_path)]) == 1

    def test_config_drives_run(self, tmp_path):
        path = write(tmp_path, MINIMAL + "[pi2-optimize]\nduration = 142.2\n")
        out = tmp_path / "o"
        assert cli.main(["pi2-optimize", "--config", str(path), "--model", "r", "--out", str(out)]) == 0
        rows = read_csv(out / "pi2_amplitudes.csv")
        assert rows[1][0] == "R" and float(rows[1][1]) == pytest.approx(3.25e-3, abs=5e-5)
        assert json.loads((out / "pi2_amplitudes.json").read_text())["config_file"] == str(path)
