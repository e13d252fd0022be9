import json
import subprocess
import sys

import numpy as np
import pytest

from vempc.errors import ConfigurationError
from vempc.harness_cli import (bundled_config_path, closed_loop_run, compare_modes, emit_csv,
                               load_bundled, load_config, read_csv)
from vempc.harness_cli.cli import main


def _doc():
    return json.loads(bundled_config_path().read_text())


def _write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_bundled_values(pendulum_cfg):
    c = pendulum_cfg
    assert c.problem.N == 10 and c.K == 240 and c.lam == pytest.approx(0.1)
    np.testing.assert_array_equal(c.problem.Q, np.diag([50.0, 5.0]))
    np.testing.assert_array_equal(c.problem.Qf, 2 * c.problem.Q)
    np.testing.assert_array_equal(c.problem.R, [[0.1]])
    np.testing.assert_allclose(c.Sigma0, 0.25 ** 2 * np.eye(10))
    np.testing.assert_array_equal(c.x0, [0.3, 0.1])


def test_missing_field_named(tmp_path):
    doc = _doc()
    del doc["problem"]["R"]
    with pytest.raises(ConfigurationError, match=r"problem\.R"):
        load_config(_write(tmp_path, doc))


def test_unknown_field_and_bad_shape(tmp_path):
    doc = _doc()
    doc["sampling"]["Kay"] = 3
    with pytest.raises(ConfigurationError, match="Kay"):
        load_config(_write(tmp_path, doc))
    doc = _doc()
    doc["problem"]["Q"] = [[1.0, 0.0, 0.0]]
    with pytest.raises(ConfigurationError, match=r"problem\.Q"):
        load_config(_write(tmp_path, doc))


def test_defaults_echoed(tmp_path):
    doc = _doc()
    del doc["weights"]
    cfg = load_config(_write(tmp_path, doc))
    assert cfg.eta == 1e3 and cfg.echo["weights"]["eta"] == 1e3


def test_equilibrium_all_plain_modes(pendulum_cfg, pendulum_design):
    cfg = pendulum_cfg.with_overrides(x0=np.zeros(2), T=5)
    log = closed_loop_run(cfg, "qp")
    assert np.max(np.abs(log.states())) < 1e-9 and np.max(np.abs(log.inputs())) < 1e-9
    # sampled modes average zero-mean draws: u is zero up to Monte Carlo error
    se = np.sqrt(pendulum_design.tg.Sigma_U[0, 0] / cfg.K)
    for mode in ("variational", "vempc-mock"):
        log = closed_loop_run(cfg, mode)
        assert np.max(np.abs(log.inputs())) <= 4 * se
        assert np.max(np.abs(log.states())) <= 4 * se


def test_qp_closed_loop(pendulum_cfg):
    log = closed_loop_run(pendulum_cfg, "qp")
    assert log.violations() == 0
    assert np.max(np.abs(log.meta["final_state"])) <= 0.02


def test_variational_tracks_qp(pendulum_cfg):
    rep = compare_modes(pendulum_cfg, ["qp", "variational"], reference="qp")
    theta = rep.logs["qp"]["theta"], rep.logs["variational"]["theta"]
    assert np.max(np.abs(theta[0] - theta[1])) <= 0.05


def test_csv(tmp_path, pendulum_cfg):
    log = closed_loop_run(pendulum_cfg.with_overrides(T=1), "qp")
    path = emit_csv(log, tmp_path / "one.csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert lines[0].split(",")[:5] == ["t", "time_s", "theta", "theta_dot", "u"]
    log = closed_loop_run(pendulum_cfg.with_overrides(T=6), "variational")
    back = read_csv(emit_csv(log, tmp_path / "six.csv"))
    assert back.columns == log.columns
    for c in log.columns:
        np.testing.assert_array_equal(back[c], log[c])


def test_timing_accounting(pendulum_cfg):
    log = closed_loop_run(pendulum_cfg.with_overrides(T=3), "vempc-mock")
    assert np.all(log["client_ms"] + log["cloud_ms"] <= log["total_ms"] + 1e-6)
    assert np.all(log["total_ms"] > 0)


def test_cli_exit_codes(tmp_path, capsys):
    out = tmp_path / "run.csv"
    assert main(["run", "--config", str(bundled_config_path()), "--mode", "qp",
                 "--steps", "2", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 3
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    doc = _doc()
    doc["problem"]["R"] = [[-1.0]]
    assert main(["run", "--config", str(_write(tmp_path, doc))]) == 2
    doc = _doc()
    doc["plant"]["A"] = [[1e200, 1e200], [1e200, 1e200]]
    doc["simulation"]["T"] = 2
    assert main(["run", "--config", str(_write(tmp_path, doc, "num.json")), "--mode", "qp"]) == 3
    capsys.readouterr()
    assert main(["show-config", "--config", str(bundled_config_path())]) == 0
    shown = json.loads(capsys.readouterr().out)
    assert shown["weights"]["eta"] == 1000


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "vempc.harness_cli.cli", "--help"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "keygen" in r.stdout


def test_cli_key_and_cache_pipeline(tmp_path, capsys):
    doc = _doc()
    doc["encryption"]["log_n"] = 10
    doc["sampling"]["K"] = 16
    doc["simulation"]["T"] = 2
    cfg = str(_write(tmp_path, doc))
    keys, cache = tmp_path / "keys", tmp_path / "cache"
    assert main(["keygen", "--params", cfg, "--out", str(keys)]) == 0
    assert (keys / "evaluation.keys").stat().st_size > 0
    assert main(["offline", "--config", cfg, "--keys", str(keys), "--cache", str(cache)]) == 0
    assert (cache / "cache.bin").exists()
    out = tmp_path / "run.csv"
    assert main(["run", "--config", cfg, "--mode", "vempc-ckks", "--keys", str(keys),
                 "--cache", str(cache), "--out", str(out)]) == 0
    log = read_csv(out)
    assert len(log) == 2 and np.all(log["err_U"] >= 0)
    doc["encryption"]["log_n"] = 11
    assert main(["run", "--config", str(_write(tmp_path, doc, "other.json")), "--mode",
                 "vempc-ckks", "--keys", str(keys)]) == 2
