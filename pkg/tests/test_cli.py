import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from mfattitude import cli, so3
from mfattitude.errors import ConfigError
from mfattitude.measurements import Gaussian, IsotropicGaussian, VonMisesFisher
from mfattitude.scenario import config_from_dict, config_to_dict, load_scenario, parse_overrides, preset

DATA = Path(__file__).parent / "data"
SHORT = ["--set", "duration_s=1", "--workers", "1"]


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(x) for x in r] for r in rows[1:]])


def test_preset_integrity():
    expected_noise = {"I": IsotropicGaussian(0.08), "III": IsotropicGaussian(0.24)}
    for case, sigma in (("I", 1.0), ("II", 1.0), ("III", 10.0)):
        cfg = preset(case)
        assert cfg.gyro_rate_hz == 50 and cfg.vector_rate_hz == 10
        assert cfg.duration_s == 60 and cfg.dt_s == 0.02 and cfg.mc_runs == 50
        assert cfg.gyro_sigma_deg_per_sqrt_s == sigma
        np.testing.assert_allclose(cfg.f0, so3.exp_so3([np.pi, 0, 0]), atol=1e-15)
        np.testing.assert_allclose(cfg.f0, np.diag([1.0, -1.0, -1.0]), atol=1e-15)
        for noise in cfg.vector_noise:
            if case == "II":
                np.testing.assert_array_equal(noise.q, np.diag([0.01, 0.01, 0.30]))
            else:
                assert noise == expected_noise[case]
    with pytest.raises(ConfigError):
        preset("IV")


def test_config_echo_roundtrip():
    for case in ("I", "II", "III"):
        cfg = preset(case)
        again = config_from_dict(json.loads(json.dumps(config_to_dict(cfg))))
        assert config_to_dict(again) == config_to_dict(cfg)


def test_scenario_file_formats(tmp_path):
    toml = tmp_path / "s.toml"
    toml.write_text(
        'duration_s = 2.0\nseed = 4\nf0_rotvec_rad = [0.0, 0.0, 1.0]\n'
        'estimators = ["be", "mekf"]\n'
        '[[sensors]]\nreference = [1.0, 0.0, 0.0]\nnoise = "gaussian"\n'
        'cov = [[0.01, 0, 0], [0, 0.02, 0], [0, 0, 0.3]]\n'
        '[[sensors]]\nreference = [0.0, 0.6, 0.8]\nnoise = "vmf"\nkappa = 40.0\n')
    cfg = load_scenario(toml)
    assert cfg.duration_s == 2.0 and cfg.seed == 4 and cfg.estimators == ("be", "mekf")
    assert isinstance(cfg.vector_noise[0], Gaussian) and isinstance(cfg.vector_noise[1], VonMisesFisher)
    np.testing.assert_allclose(cfg.f0, so3.exp_so3([0, 0, 1.0]))
    js = tmp_path / "s.json"
    js.write_text(json.dumps(config_to_dict(cfg)))
    assert config_to_dict(load_scenario(js)) == config_to_dict(cfg)


@pytest.mark.parametrize("text", ["bogus_key = 1\n", "duration_s = [1\n",
                                  '[[sensors]]\nreference = [1.0, 0, 0]\nnoise = "laplace"\n',
                                  "dt_s = 0.03\n"])
def test_bad_scenarios_are_config_errors(tmp_path, text):
    p = tmp_path / "bad.toml"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_scenario(p)
    assert cli.main(["run", "--scenario", str(p), "--out", str(tmp_path / "o")]) == 2


def test_missing_scenario_file(tmp_path):
    assert cli.main(["run", "--scenario", str(tmp_path / "nope.toml")]) == 2


def test_parse_overrides():
    out = parse_overrides(["a=1", "b=[1, 2]", "c=hello", "d=0.5"])
    assert out == {"a": 1, "b": [1, 2], "c": "hello", "d": 0.5}
    with pytest.raises(ConfigError):
        parse_overrides(["novalue"])


def test_run_writes_outputs_with_schema(tmp_path, capsys):
    out = tmp_path / "r"
    assert cli.main(["run", "--case", "II", "--runs", "5", "--out", str(out)] + SHORT) == 0
    header, data = read_csv(out / "summary.csv")
    names = ["meas", "mekf", "be", "normbe"]
    assert len(header) == 1 + 4 * len(names)
    assert header[0] == "t_s"
    for n in names:
        assert f"{n}_err_deg_mean" in header and f"{n}_uncertainty" in header
    assert data.shape == (51, len(header))
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["mc_runs"] == 5
    assert set(manifest["results"]) == set(names)
    assert "percentile" in manifest["metadata"]["envelope"]
    assert (out / "table.txt").read_text().startswith(" ")
    assert "BE" in capsys.readouterr().out


def test_golden_summary(tmp_path):
    out = tmp_path / "g"
    assert cli.main(["run", "--case", "I", "--runs", "2", "--seed", "3", "--out", str(out)]
                    + SHORT) == 0
    header, data = read_csv(out / "summary.csv")
    gold_header, gold = read_csv(DATA / "golden_case1_seed3.csv")
    assert header == gold_header
    assert data.shape == gold.shape
    np.testing.assert_array_equal(np.isnan(data), np.isnan(gold))
    np.testing.assert_allclose(data, gold, rtol=1e-9, atol=1e-9)


def test_rerun_and_manifest_replay_are_bitwise(tmp_path):
    args = ["run", "--case", "I", "--runs", "3", "--seed", "7"] + SHORT
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    first = (tmp_path / "a" / "summary.csv").read_bytes()
    assert first == (tmp_path / "b" / "summary.csv").read_bytes()
    replay = ["run", "--scenario", str(tmp_path / "a" / "manifest.json"), "--workers", "1",
              "--out", str(tmp_path / "c")]
    assert cli.main(replay) == 0
    assert first == (tmp_path / "c" / "summary.csv").read_bytes()


def test_empty_estimator_set_writes_manifest_only(tmp_path):
    out = tmp_path / "e"
    assert cli.main(["run", "--case", "I", "--runs", "1", "--estimators", "", "--out", str(out)]
                    + SHORT) == 0
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json"]


def test_estimator_subset_and_overrides(tmp_path):
    out = tmp_path / "s"
    assert cli.main(["run", "--case", "III", "--runs", "2", "--estimators", "be,meas",
                     "--ut-kappa", "2.0", "--set", "gyro_sigma_deg_per_sqrt_s=3",
                     "--out", str(out)] + SHORT) == 0
    header, _ = read_csv(out / "summary.csv")
    assert len(header) == 1 + 4 * 2
    cfg = json.loads((out / "manifest.json").read_text())["config"]
    assert cfg["ut_kappa"] == 2.0 and cfg["gyro_sigma_deg_per_sqrt_s"] == 3.0


def test_config_errors_exit_2(tmp_path):
    base = ["run", "--case", "I", "--out", str(tmp_path / "x")]
    assert cli.main(base + ["--set", "dt_s=0"]) == 2
    assert cli.main(base + ["--estimators", "be,ukf"]) == 2
    assert cli.main(base + ["--set", "nonsense=1"]) == 2
    assert cli.main(base + ["--ut-kappa", "-1"]) == 2
    with pytest.raises(SystemExit):
        cli.main(["run"])


def test_numerical_failure_exit_3(tmp_path, monkeypatch):
    from mfattitude import errors

    def boom(*a, **k):
        raise errors.NoConvergence("forced")

    monkeypatch.setattr(cli, "run_monte_carlo", boom)
    assert cli.main(["run", "--case", "I", "--out", str(tmp_path / "y")]) == 3


def test_module_entry_point(tmp_path):
    out = tmp_path / "m"
    proc = subprocess.run([sys.executable, "-m", "mfattitude.cli", "run", "--case", "I",
                           "--runs", "1", "--out", str(out)] + SHORT,
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "summary.csv").exists()


def test_case1_ordering_small_sample(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", "--case", "I", "--runs", "4", "--workers", "1",
                     "--out", str(out)]) == 0
    res = json.loads((out / "manifest.json").read_text())["results"]
    err = {k: v["average_error_deg"] for k, v in res.items()}
    assert err["be"] <= err["normbe"] + 0.1
    assert err["normbe"] < err["mekf"] < err["meas"]
    assert all(math.isfinite(v) for v in err.values())
