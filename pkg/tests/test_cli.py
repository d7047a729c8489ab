import math
import subprocess
import sys

import numpy as np
import pytest

from adabatch.cli import build_spec, main, parse_config_file
from adabatch.errors import ConfigError
from adabatch.report import read_csv


def values(out):
    return dict(line.split("=", 1) for line in out.splitlines() if "=" in line)


class TestRate:
    def test_kappa_50_eps_1(self, capsys):
        assert main(["rate", "--kappa", "50", "--epsilon", "1", "--k", "10"]) == 0
        out = capsys.readouterr().out
        rho = float(values(out)["rho "])
        # independent: ((kappa-1)/(kappa+1))^2 = (49/51)^2, averaged with eps^2 = 1
        assert rho == pytest.approx(((49 / 51) ** 2 + 1) / 2, rel=1e-15)
        assert rho == pytest.approx(0.9615532487504805, rel=1e-15)
        last = out.strip().splitlines()[-1].split("\t")
        assert last[0] == "10"
        assert float(last[1]) == pytest.approx(0.6756680690061274, rel=1e-14)

    def test_theta_nu(self, capsys):
        assert main(["rate", "--kappa", "50", "--theta", "0.6", "--nu", "0.8", "--k", "0"]) == 0
        assert float(values(capsys.readouterr().out)["rho "]) == pytest.approx(0.9615532487504805, rel=1e-14)

    def test_missing_tolerance(self, capsys):
        assert main(["rate", "--kappa", "50"]) == 1


class TestSplit:
    def test_isotropic_noise(self, capsys):
        assert main(["split", "--objective", "quad3", "--xi", "1,0,0", "--epsilon", "1"]) == 0
        v = {k.strip(): v.strip() for k, v in values(capsys.readouterr().out).items()}
        # isotropic covariance: each direction carries a third of the trace
        assert float(v["theta"]) == pytest.approx(1 / math.sqrt(3), rel=1e-14)
        assert float(v["nu"]) == pytest.approx(math.sqrt(2 / 3), rel=1e-14)
        assert float(v["tr S"]) == 3000.0
        assert float(v["|grad|^2"]) == 6.0
        assert float(v["b_norm"]) == 500.0


class TestUsage:
    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--bogus"])
        assert exc.value.code == 1

    def test_no_command(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1

    def test_bad_check_number(self, tmp_path):
        assert main(["verify", "--only", "9", "--out-dir", str(tmp_path)]) == 1

    def test_unknown_case(self, tmp_path):
        assert main(["run", "--case", "7", "--out", str(tmp_path / "x.csv")]) == 1


class TestRun:
    def test_smoke(self, tmp_path, capsys):
        out = tmp_path / "out.csv"
        code = main(
            ["run", "--objective", "quad3", "--case", "3", "--controllers", "norm,innerOrth",
             "--reps", "10", "--budget", "20000", "--out", str(out), "--threads", "1"]
        )
        assert code == 0
        curves = read_csv(out)
        assert list(curves) == [("norm", "3"), ("innerOrth", "3")]
        assert (tmp_path / "out.svg").read_bytes().startswith(b"<?xml")

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        out = tmp_path / "cfg.csv"
        cfg.write_text(
            "# small quad2 run\n"
            "objective = quad2\n"
            "cases = 2\n"
            "controllers = innerOrthOptimalSplit\n"
            "replications = 4\n"
            "budget = 5000\n"
            f"out = {out}\n"
        )
        assert main(["run", "--config", str(cfg), "--threads", "1"]) == 0
        assert list(read_csv(out)) == [("innerOrthOptimalSplit", "2")]

    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("replications = 4\nbudget = 5000\ncases = 1\n")
        out = tmp_path / "o.csv"
        assert main(["run", "--config", str(cfg), "--case", "4", "--controllers", "norm", "--out", str(out),
                     "--threads", "1"]) == 0
        assert list(read_csv(out)) == [("norm", "4")]

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "adabatch", "rate", "--kappa", "2", "--epsilon", "0"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "rho = 0.1111111111111111" in proc.stdout


class TestConfig:
    def test_parse(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("kappa = 50  # comment\nbase-seed = 3\n\nxi0 = 1, 2\n")
        assert parse_config_file(p) == {"kappa": 50.0, "base_seed": 3, "xi0": "1, 2"}

    @pytest.mark.parametrize("text", ["colour = red\n", "kappa = many\n", "just words\n"])
    def test_rejects(self, tmp_path, text):
        p = tmp_path / "c.cfg"
        p.write_text(text)
        with pytest.raises(ConfigError):
            parse_config_file(p)

    def test_custom_case(self):
        spec = build_spec({"epsilon": 1.0, "theta": 0.6})
        (label, tol), = spec.cases
        assert label == "custom"
        assert tol.nu == pytest.approx(0.8)

    def test_defaults_are_table_cases(self):
        spec = build_spec({})
        assert [label for label, _ in spec.cases] == ["1", "2", "3", "4"]
        assert spec.controllers == ("norm", "innerOrth")

    def test_xi0(self):
        np.testing.assert_array_equal(build_spec({"xi0": "1,2", "objective": "quad2"}).start, [1.0, 2.0])
