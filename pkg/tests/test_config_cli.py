import json
import math
import os

import pytest

from becsteer.cli import main
from becsteer.config import ConfigError, load_config, parse_config

HERE = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

TINY = """\
# quick protocol for CLI tests
n_a     = 20
n_b     = 20
dz_max  = 3 a0
t_ramp  = 1.5 /omega
t_int   = 0, 0.5 /omega
n_r     = 8
dr      = 0.45 a0
dz      = 0.45 a0
z_margin = 2.5 a0
dt      = 0.05 /omega
"""


def test_parse_shipped_fig2a():
    cfg = load_config(os.path.join(HERE, "configs", "fig2a.cfg"))
    v = cfg.values
    assert v["n_a"] == 100 and v["n_b"] == 100
    assert v["omega"] == pytest.approx(2 * math.pi * 20)
    assert v["dz_max"] == pytest.approx(10.0)
    assert v["t_ramp"] == pytest.approx(10.0)
    assert len(v["t_int"]) == 13 and v["t_int"][-1] == pytest.approx(24.0)
    assert cfg.params.a_00 == pytest.approx(100.4)


def test_parse_shipped_fig3():
    cfg = load_config(os.path.join(HERE, "configs", "fig3.cfg"))
    v = cfg.values
    assert v["n_a"] == 500
    assert v["dz_max"] == pytest.approx(6.0)
    assert v["tau_1"] == pytest.approx(60.0)
    assert v["kappa_11"] == pytest.approx(81e-21)
    # t_loss stays in seconds
    assert v["t_loss"] == pytest.approx(0.2)


def test_seconds_converted_with_omega():
    text = TINY + "t_ramp = 0.25 s\n"
    cfg = parse_config(text)
    assert cfg.values["t_ramp"] == pytest.approx(0.25 * 2 * math.pi * 20)


def test_expressions_and_pi():
    cfg = parse_config(TINY + "omega = 2*pi*10 Hz\npulse_phase_a = pi/2\n")
    assert cfg.values["omega"] == pytest.approx(20 * math.pi)
    assert cfg.values["pulse_phase_a"] == pytest.approx(math.pi / 2)


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match="line 2.*banana"):
        parse_config("n_a = 10\nbanana = 3\n")


def test_malformed_value_reports_line():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("n_a = ten\n")


def test_constraint_violation_reports_line():
    bad = TINY.replace("dz_max  = 3 a0", "dz_max  = -3 a0")
    with pytest.raises(ConfigError, match="dz_max"):
        parse_config(bad)


def test_missing_required_key():
    with pytest.raises(ConfigError, match="t_ramp"):
        parse_config("n_a = 10\nn_b = 10\ndz_max = 3 a0\n")


def test_wrong_unit_rejected():
    with pytest.raises(ConfigError, match="unit"):
        parse_config(TINY + "dz_max = 3 meters\n")


def test_set_overrides_win():
    cfg = parse_config(TINY, overrides=("n_a = 30",))
    assert cfg.values["n_a"] == 30
    with pytest.raises(ConfigError, match="--set"):
        parse_config(TINY, overrides=("n_a = -2",))


def test_echo_round_trips():
    cfg = parse_config(TINY)
    cfg2 = parse_config(cfg.echo())
    for key in ("n_a", "dz_max", "t_ramp", "omega", "t_loss", "window_sigmas"):
        assert cfg2.values[key] == pytest.approx(cfg.values[key])
    assert list(cfg2.values["t_int"]) == pytest.approx(list(cfg.values["t_int"]))


def write_tiny(tmp_path, extra=""):
    p = tmp_path / "tiny.cfg"
    p.write_text(TINY + extra)
    return str(p)


def test_cli_run_writes_results(tmp_path):
    cfgp = write_tiny(tmp_path)
    out = tmp_path / "out"
    assert main(["run", "--config", cfgp, "--out", str(out)]) == 0
    lines = (out / "results.csv").read_text().splitlines()
    assert lines[0].startswith("t_total_s,t_int_s,E_EPR,")
    assert len(lines) == 3
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "run"
    assert all(p["status"] == "ok" for p in man["points"])


def test_cli_missing_config_is_fatal(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.cfg"),
                 "--out", str(tmp_path)]) == 1
    assert "becsteer:" in capsys.readouterr().err


def test_cli_bad_config_is_fatal(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("n_a = 10\nwhat = 3\n")
    assert main(["run", "--config", str(p), "--out", str(tmp_path)]) == 1
    assert "line 2" in capsys.readouterr().err


def test_cli_failed_point_gives_exit_2(tmp_path):
    # a far-too-small Fock window makes the measurement fail at runtime
    cfgp = write_tiny(tmp_path)
    out = tmp_path / "out2"
    code = main(["run", "--config", cfgp, "--out", str(out),
                 "--set", "window_sigmas = 0.2"])
    assert code == 2
    man = json.loads((out / "manifest.json").read_text())
    assert any(p["status"] == "failed" for p in man["points"])


def test_cli_worker_count_determinism(tmp_path):
    cfgp = write_tiny(tmp_path)
    out1, out2 = tmp_path / "w1", tmp_path / "w2"
    assert main(["run", "--config", cfgp, "--out", str(out1),
                 "--workers", "1"]) == 0
    assert main(["run", "--config", cfgp, "--out", str(out2),
                 "--workers", "2"]) == 0
    b1 = (out1 / "results.csv").read_bytes()
    b2 = (out2 / "results.csv").read_bytes()
    assert b1 == b2


def test_cli_oracle_direct_mode(tmp_path):
    cfgp = write_tiny(tmp_path, "oracle_phi_ab = 0, 0.01, 0.02\n")
    out = tmp_path / "orc"
    assert main(["oracle", "--config", cfgp, "--out", str(out)]) == 0
    lines = (out / "oracle.csv").read_text().splitlines()
    assert lines[0].startswith("phi_a,phi_b,phi_ab,oracle_E_EPR")
    assert len(lines) == 4
    es = [float(l.split(",")[3]) for l in lines[1:]]
    assert es[0] == pytest.approx(1.0, abs=1e-8)
    assert es[2] < es[1] < es[0] + 1e-12


def test_cli_losses(tmp_path, capsys):
    cfgp = write_tiny(tmp_path, "tau_1 = 60 s\nt_loss = 0.2 s\n")
    out = tmp_path / "los"
    assert main(["losses", "--config", cfgp, "--out", str(out)]) == 0
    doc = json.loads((out / "losses.json").read_text())
    assert doc["t_hold_s"] == pytest.approx(0.2)
    assert doc["n_lost"] > 0.0
    assert "fraction" in capsys.readouterr().out


def test_cli_sweep(tmp_path):
    cfgp = write_tiny(tmp_path, "sweep_n = 20, 30\nt_int = 0 /omega\n")
    out = tmp_path / "swp"
    assert main(["sweep", "--config", cfgp, "--out", str(out)]) == 0
    lines = (out / "results.csv").read_text().splitlines()
    assert lines[0].startswith("n_a,n_b,dz_max,t_ramp,t_total_s")
    assert len(lines) == 3
    assert lines[1].split(",")[0] == "20"
    assert lines[2].split(",")[0] == "30"


def test_cli_check(capsys):
    assert main(["check"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 4 and "FAIL" not in out
