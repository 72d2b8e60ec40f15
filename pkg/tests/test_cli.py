import json
import math
import subprocess
import sys
import time

import pytest

from cutsle.cli import main, number, numbers


def read(path):
    return path.read_bytes()


def test_number_parsing():
    assert number("3*pi/2") == pytest.approx(1.5 * math.pi)
    assert numbers("pi/2, 0.25") == [pytest.approx(math.pi / 2), 0.25]
    with pytest.raises(ValueError):
        number("__import__('os')")


def test_green_eval(capsys, tmp_path):
    assert main(["green-eval", "--kappa", "6", "--out", str(tmp_path)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["alpha0"] == 1.25
    assert res["tildeG"] == pytest.approx(0.62996, abs=1e-5)
    saved = json.loads((tmp_path / "green.json").read_text())
    assert saved == res
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "green-eval" and man["params"]["kappa"] == 6.0


def test_green_eval_custom_config(capsys):
    assert main(["green-eval", "--kappa", "6", "--config", "5, 4, 2, 0.5", "--z0", "0.2, -0.1"]) == 0
    assert json.loads(capsys.readouterr().out)["G_D"] > 0


def test_missing_kappa_is_usage_error(capsys, tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["mc-cutpoint", "--paths", "100", "--seed", "1", "--out", str(tmp_path)])
    assert e.value.code == 2
    err = capsys.readouterr().err
    assert "usage" in err and "--kappa" in err


def test_missing_seed_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["survival", "--kappa", "6", "--paths", "10", "--out", str(tmp_path)])
    assert e.value.code == 2


def test_validation_exit_codes(tmp_path):
    assert main(["density-eval", "--kappa", "9", "--out", str(tmp_path)]) == 2
    assert main(["survival", "--kappa", "6", "--paths", "100", "--seed", "1",
                 "--t-grid", "0, 2, 1", "--out", str(tmp_path)]) == 2
    assert main(["green-eval", "--kappa", "6", "--config", "0, 1, 2, 3"]) == 2


def test_config_file_and_unknown_keys(tmp_path, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text("[green-eval]\nkappa = 5\n")
    assert main(["green-eval", "--config-file", str(ini)]) == 0
    assert json.loads(capsys.readouterr().out)["kappa"] == 5.0
    assert main(["green-eval", "--config-file", str(ini), "--kappa", "7"]) == 0
    assert json.loads(capsys.readouterr().out)["kappa"] == 7.0
    ini.write_text("[green-eval]\nkappa = 5\ncolour = red\n")
    assert main(["green-eval", "--config-file", str(ini)]) == 2


def test_simulate_zero_horizon(tmp_path):
    assert main(["simulate", "--kind", "chord", "--kappa", "6", "--horizon", "0", "--seed", "1",
                 "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert len(lines) == 1 and lines[0].count(",") >= 1


@pytest.mark.parametrize("kind, produced", [("chordal", "trace.csv"), ("radial", "trace.csv"),
                                            ("chord", "trace.csv"), ("ensemble", "ensemble.csv"),
                                            ("z", "z_samples.csv")])
def test_simulate_kinds_and_rerun(tmp_path, kind, produced):
    a = tmp_path / "a"
    b = tmp_path / "b"
    argv = ["simulate", "--kind", kind, "--kappa", "6", "--horizon", "0.2", "--dt", "2e-3",
            "--seed", "4", "--paths", "50", "--out", str(a)]
    assert main(argv) == 0
    assert main(["rerun", "--manifest", str(a / "manifest.json"), "--out", str(b)]) == 0
    assert read(a / produced) == read(b / produced)


def test_density_eval(tmp_path):
    assert main(["density-eval", "--kappa", "6", "--N", "40", "--grid", "9", "--out", str(tmp_path / "a")]) == 0
    rep = json.loads((tmp_path / "a" / "report.json").read_text())
    assert rep["orthonormality"]["value"] < 1e-6
    assert main(["density-eval", "--kappa", "6", "--N", "40", "--grid", "9", "--out", str(tmp_path / "b")]) == 0
    for f in ("spectral.csv", "pZ_t.csv", "pZ_inf.csv", "tilde_pZ_inf.csv"):
        assert read(tmp_path / "a" / f) == read(tmp_path / "b" / f)


def test_mc_cutpoint_repeatable(tmp_path):
    argv = ["mc-cutpoint", "--kappa", "6", "--paths", "100", "--radii", "0.5, 0.3", "--seed", "7",
            "--resolution", "0.2", "--epsilon", "0.3", "--save-scenes", "2"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b")]) == 0
    assert read(tmp_path / "a" / "results.csv") == read(tmp_path / "b" / "results.csv")
    assert (tmp_path / "a" / "scene_00001.csv").exists()
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["seed"] == 7 and man["epsilon_used"] == 0.3


def test_mc_cutpoint_smoke_time(tmp_path):
    t = time.time()
    assert main(["mc-cutpoint", "--kappa", "6", "--paths", "100", "--radii", "0.1", "--seed", "1",
                 "--out", str(tmp_path)]) == 0
    assert time.time() - t < 60


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "cutsle.cli", "green-eval", "--kappa", "6"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and '"alpha0": 1.25' in r.stdout
    r = subprocess.run([sys.executable, "-m", "cutsle.cli", "density-eval", "--kappa", "9",
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 2
