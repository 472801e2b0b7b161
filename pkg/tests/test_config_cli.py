"""Configuration validation and the command-line interface."""

import json
import os

import pytest

from inflow_euler import cli
from inflow_euler.config import ConfigError, SCENARIOS, parse_config

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestParse:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg.scenario in SCENARIOS
        assert cfg.T0 <= cfg.schedule.tau0 / cfg.schedule.M * (1 + 1e-12)
        echo = cfg.echo()
        assert echo["grid"] == {"K": cfg.K, "P": cfg.P}
        assert parse_config(cfg.to_yaml()).config_hash == cfg.config_hash

    def test_long_horizon_rejected(self):
        with pytest.raises(ConfigError, match="radius constraint"):
            parse_config("schedule: {tau0: 0.1, M: 2}\ntime: {T0: 0.1}\n")

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="grid.Q"):
            parse_config("grid: {Q: 3}\n")

    def test_unknown_scenario(self):
        with pytest.raises(ConfigError, match="scenario"):
            parse_config("scenario: vortex-sheet\n")

    def test_bad_grid(self):
        with pytest.raises(ConfigError, match="P >= 8"):
            parse_config("grid: {K: 2, P: 4}\n")

    def test_auto_needs_no_T0(self):
        with pytest.raises(ConfigError, match="auto"):
            parse_config("schedule: {tau0: 0.1, M: auto}\ntime: {T0: 0.01}\n")

    @pytest.mark.parametrize("name", sorted(SCENARIOS))
    def test_scenarios_accepted(self, name):
        cfg = parse_config(f"scenario: {name}\n")
        assert cfg.ubar_field() is not None

    def test_overrides(self):
        cfg = parse_config("", {"norms.n_max": 10, "seed": 7})
        assert cfg.params.n_max == 10 and cfg.seed == 7

    def test_hash_tracks_content(self):
        assert parse_config("seed: 1\n").config_hash != parse_config("seed: 2\n").config_hash

    @pytest.mark.parametrize("name", ["rest", "galilean", "picard", "wavy_inflow"])
    def test_shipped_configs(self, name):
        with open(os.path.join(CONFIGS, name + ".yaml")) as fh:
            parse_config(fh.read())


class TestExitCodes:
    def test_config_error(self, tmp_path, capsys):
        path = write(tmp_path, "schedule: {tau0: 0.1, M: 2}\ntime: {T0: 0.1}\n")
        assert cli.main(["solve", "--config", path, "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
        assert "radius constraint" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert cli.main(["solve", "--config", str(tmp_path / "none.yaml")]) == cli.EXIT_CONFIG

    def test_numeric_error(self, tmp_path, capsys):
        path = write(tmp_path, "scenario: uniform\ngrid: {K: 4, P: 16}\ntime: {dt: 0.1, T0: 0.1}\n"
                               "schedule: {tau0: 0.1, M: 1}\n")
        assert cli.main(["solve", "--config", path, "--out", str(tmp_path / "o")]) == cli.EXIT_NUMERIC
        assert "CFLError" in capsys.readouterr().err

    def test_certificates_written(self, tmp_path):
        out = tmp_path / "cert"
        code = cli.main(["verify-combinatorics", "--range", "30", "--out", str(out)])
        # r = 3 carries one failing instance in the high and curved tables
        assert code == cli.EXIT_CERTIFICATE
        data = json.loads((out / "certificates.json").read_text())
        assert any(not d["verified"] for d in data)
        assert (out / "certificates.csv").exists()

    def test_check_pressure(self, tmp_path):
        assert cli.main(["check-pressure", "--out", str(tmp_path / "p")]) == cli.EXIT_OK

    def test_rest_solve(self, tmp_path):
        out = tmp_path / "rest"
        code = cli.main(["solve", "--config", os.path.join(CONFIGS, "rest.yaml"), "--out", str(out)])
        assert code == cli.EXIT_OK
        rows = [ln.split(",") for ln in (out / "norm_series.csv").read_text().splitlines()
                if not ln.startswith("#")][1:]
        assert rows and all(float(x) == 0 for r in rows for x in r[2:])


class TestArtifacts:
    def _run(self, out):
        cfg = os.path.join(CONFIGS, "rest.yaml")
        assert cli.main(["solve", "--config", cfg, "--out", str(out), "--seed", "3"]) == 0

    def test_deterministic(self, tmp_path):
        self._run(tmp_path / "a")
        self._run(tmp_path / "b")
        for name in ("norm_series.csv", "series_X.dat"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_manifest_names_hash(self, tmp_path):
        out = tmp_path / "m"
        self._run(out)
        man = json.loads((out / "manifest.json").read_text())
        h = man["config_hash"]
        assert man["artifacts"]
        for a in man["artifacts"]:
            assert a["config_hash"] == h
            if a["path"].endswith((".csv", ".dat")):
                assert h in (out / a["path"]).read_text().splitlines()[0]

    def test_report_figures(self, tmp_path):
        out = tmp_path / "r"
        code = cli.main(["report", "--config", os.path.join(CONFIGS, "rest.yaml"), "--out", str(out)])
        assert code == cli.EXIT_OK
        pngs = sorted(p.name for p in out.glob("*.png"))
        assert "norm_series.png" in pngs and "pressure_decay.png" in pngs
        assert all((out / p).read_bytes()[:4] == b"\x89PNG" for p in pngs)
