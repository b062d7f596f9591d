import math

import pytest

from noma_isac import cli
from noma_isac.config import (
    DEFAULT_CONFIG_TEXT,
    ExperimentConfig,
    default_workers,
    load_config,
    parse_config_text,
)
from noma_isac.errors import ConfigError

FAST = ["sweep_dbm=-30,-25", "trials=10000", "C_list=5"]


class TestParsing:
    def test_defaults_round_trip(self):
        cfg = parse_config_text(DEFAULT_CONFIG_TEXT)
        assert cfg.sweep_dbm == (-40.0, -35.0, -30.0, -25.0, -20.0)
        assert cfg.theta_r == math.pi / 2
        assert cfg.seed == 20240101
        assert cfg.C_list == (5.0, 7.0, 9.0)
        assert cfg.drift_mode is False

    def test_bad_value_reports_key_and_line(self):
        text = "[system]\nalpha = 3.5\nM = five\n"
        with pytest.raises(ConfigError) as info:
            parse_config_text(text)
        assert info.value.key == "M" and info.value.line == 3
        assert "key 'M'" in str(info.value) and "line 3" in str(info.value)

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as info:
            parse_config_text("[system]\n\nbogus = 1\n")
        assert info.value.line == 3

    def test_wrong_section(self):
        with pytest.raises(ConfigError):
            parse_config_text("[experiment]\nalpha = 3\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError):
            parse_config_text("[radar]\nx = 1\n")

    def test_malformed(self):
        with pytest.raises(ConfigError):
            parse_config_text("alpha = 3\n")

    def test_expressions_are_restricted(self):
        assert parse_config_text("[system]\ntheta_o = pi/8 + pi/8\n").theta_o == math.pi / 4
        with pytest.raises(ConfigError):
            parse_config_text("[system]\ntheta_o = __import__('os')\n")

    def test_sweep_forms(self):
        assert parse_config_text("[experiment]\nsweep_dbm = -10:0:5\n").sweep_dbm == (-10.0, -5.0, 0.0)
        assert parse_config_text("[experiment]\nsweep_dbm = 1, 2.5\n").sweep_dbm == (1.0, 2.5)
        with pytest.raises(ConfigError):
            parse_config_text("[experiment]\nsweep_dbm = 0:10:0\n")

    def test_overrides(self):
        cfg = parse_config_text(DEFAULT_CONFIG_TEXT, ["system.alpha=4", "trials = 20000"])
        assert cfg.alpha == 4.0 and cfg.trials == 20000
        assert cfg.where("alpha") is None
        with pytest.raises(ConfigError):
            parse_config_text(DEFAULT_CONFIG_TEXT, ["alpha"])

    def test_noise_off(self):
        cfg = parse_config_text("[system]\nnoise_density_dbm_hz = -inf\n")
        assert cfg.system_params().noise_var == 0.0

    def test_load_merges_defaults(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[system]\nalpha = 4\n")
        cfg = load_config(path)
        assert cfg.alpha == 4.0 and cfg.seed == 20240101 and cfg.where("alpha") == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.ini")


class TestValidation:
    def test_m_below_k(self):
        cfg = parse_config_text("[system]\nM = 1\n")
        with pytest.raises(ConfigError) as info:
            cfg.validate()
        assert info.value.key == "M" and info.value.line == 2

    def test_mc_needs_trials_and_seed(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(trials=100).validate(need_mc=True)
        with pytest.raises(ConfigError):
            ExperimentConfig(seed=None).validate(need_mc=True)
        ExperimentConfig(seed=1).validate(need_mc=True)

    @pytest.mark.parametrize("kv", ["receivers=zf,mmse", "distance_mode=walk", "jml_bound_mode=x", "C_list=-1"])
    def test_enumerations(self, kv):
        with pytest.raises(ConfigError):
            load_config(overrides=[kv]).validate()

    def test_hash_ignores_workers(self):
        import dataclasses

        a = load_config()
        b = dataclasses.replace(a, workers=8)
        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != load_config(overrides=["seed=1"]).config_hash()


class TestWorkersEnv:
    def test_unset(self, monkeypatch):
        monkeypatch.delenv("NOMA_ISAC_WORKERS", raising=False)
        assert default_workers() == 1

    def test_set(self, monkeypatch):
        monkeypatch.setenv("NOMA_ISAC_WORKERS", "3")
        assert default_workers() == 3

    @pytest.mark.parametrize("raw", ["0", "many"])
    def test_invalid(self, monkeypatch, raw):
        monkeypatch.setenv("NOMA_ISAC_WORKERS", raw)
        with pytest.raises(ConfigError):
            default_workers()


def _args(cmd, out, *extra):
    args = [cmd, "--out", str(out)]
    for kv in FAST:
        args += ["--set", kv]
    return args + list(extra)


class TestCli:
    def test_ber_sweep_schema(self, tmp_path, capsys):
        assert cli.main(_args("ber-sweep", tmp_path)) == 0
        path = tmp_path / "ber.csv"
        header = path.read_text().splitlines()[0]
        assert tuple(header.split(",")) == cli.CSV_COLUMNS
        assert b"\r\n" not in path.read_bytes()
        rows = cli.read_csv(path)
        metrics = {r["metric_name"] for r in rows}
        assert metrics == {"mc_ber", "semi_ber", "upper_zf", "upper_zf_clamped", "upper_jml", "upper_jml_clamped"}
        mc = [r for r in rows if r["metric_name"] == "mc_ber"]
        assert len(mc) == 2 * 2 * 2
        for r in mc:
            assert r["ci_low"] <= r["value"] <= r["ci_high"] and r["trials"] == 10000
        assert all(r["seed"] == 20240101 for r in rows)
        assert "rows" in capsys.readouterr().err

    def test_rerun_is_byte_identical(self, tmp_path):
        assert cli.main(_args("ber-sweep", tmp_path / "a")) == 0
        assert cli.main(_args("ber-sweep", tmp_path / "b", "--workers", "2")) == 0
        assert (tmp_path / "a/ber.csv").read_bytes() == (tmp_path / "b/ber.csv").read_bytes()

    def test_outage_sweep(self, tmp_path):
        assert cli.main(_args("outage-sweep", tmp_path)) == 0
        rows = cli.read_csv(tmp_path / "outage.csv")
        names = {r["metric_name"] for r in rows}
        assert names == {"mc_outage_C5", "outage_C5"}
        assert {r["ue_index"] for r in rows} == {0, 1, 2}

    def test_analytic_has_no_mc(self, tmp_path):
        assert cli.main(_args("analytic", tmp_path, "--set", "distance_mode=randomized",
                               "--set", "analyses=upper_zf,outage_zf")) == 0
        rows = cli.read_csv(tmp_path / "analytic.csv")
        assert rows and all(r["trials"] == 0 and r["ci_low"] is None for r in rows)

    def test_seed_flag(self, tmp_path):
        assert cli.main(_args("ber-sweep", tmp_path, "--seed", "5")) == 0
        assert {r["seed"] for r in cli.read_csv(tmp_path / "ber.csv")} == {5}

    def test_config_error_exit(self, tmp_path, capsys):
        path = tmp_path / "bad.ini"
        path.write_text("[system]\nalpha = oops\n")
        assert cli.main(["analytic", "--config", str(path), "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert "alpha" in err and "line 2" in err

    def test_no_applicable_analysis(self, tmp_path):
        assert cli.main(_args("outage-sweep", tmp_path, "--set", "analyses=semi_ber")) == 2

    def test_ambiguous_constellation_exit(self, tmp_path):
        assert cli.main(_args("analytic", tmp_path, "--set", "rotation_convention=as_printed")) == 2

    def test_validate_passes(self, capsys):
        assert cli.main(["validate", "--no-mc"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out

    def test_validate_with_mc(self, capsys):
        assert cli.main(["validate"]) == 0

    def test_validate_reports_bad_configuration(self, capsys):
        assert cli.main(["validate", "--no-mc", "--set", "M=1"]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_validate_reports_coincident_points(self, capsys):
        assert cli.main(["validate", "--no-mc", "--set", "rotation_convention=as_printed"]) == 1
        assert "s_2" in capsys.readouterr().out
