import subprocess
import sys

import pytest

from paylevel.cli import main
from paylevel.sim import parse_metrics, read_log_csv


def test_run_builtin(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--scenario", "plank4", "--out", str(out), "--duration", "6"]) == 0
    log = read_log_csv(out / "log.csv")
    metrics = parse_metrics((out / "metrics.txt").read_text())
    assert len(log) == 300
    assert metrics["scenario"] == "plank4"
    assert metrics["records"] <= 300
    assert not (out / "plot.py").exists()


def test_same_seed_same_bytes(tmp_path):
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["run", "--scenario", "triplank3", "--seed", "7", "--duration", "3", "--out", str(out)]) == 0
        outputs.append(((out / "log.csv").read_bytes(), (out / "metrics.txt").read_bytes()))
    assert outputs[0] == outputs[1]


def test_parallel_workers_same_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--scenario", "heightmap3", "--duration", "3", "--out", str(a)]) == 0
    assert main(["run", "--scenario", "heightmap3", "--duration", "3", "--out", str(b), "--workers", "3"]) == 0
    assert (a / "log.csv").read_bytes() == (b / "log.csv").read_bytes()


def test_list(capsys):
    assert main(["list"]) == 0
    assert capsys.readouterr().out.split() == ["plank4", "triplank3", "heightmap3"]


def test_validate(tmp_path, capsys):
    good = tmp_path / "good.toml"
    good.write_text('name = "smoke"\n')
    assert main(["validate", str(good)]) == 0
    assert "ok" in capsys.readouterr().out

    bad = tmp_path / "bad.toml"
    bad.write_text("[piston]\npistn = 1\n")
    assert main(["validate", str(bad)]) == 3
    err = capsys.readouterr().err
    assert "pistn" in err and "bad.toml:2" in err


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["run"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
    assert capsys.readouterr().err


def test_missing_and_invalid_scenarios(tmp_path, capsys):
    assert main(["run", "--scenario", str(tmp_path / "missing.toml"), "--out", str(tmp_path)]) == 3
    assert "not found" in capsys.readouterr().err
    assert main(["run", "--scenario", "plank4", "--duration", "-1", "--out", str(tmp_path)]) == 3
    assert capsys.readouterr().err


def test_runtime_failure(tmp_path, capsys):
    path = tmp_path / "escape.toml"
    path.write_text(
        '[terrain]\nkind = "flat"\narena = [-2.0, 0.8, -2.0, 2.0]\n'
        "[trajectory]\nwaypoints = [[5.0, 0.5]]\ncruise_speed = 0.5\n"
    )
    assert main(["run", "--scenario", str(path), "--out", str(tmp_path / "o"), "--duration", "20"]) == 4
    err = capsys.readouterr().err
    assert "tick" in err and "robot" in err


def test_plot_script(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--scenario", "plank4", "--duration", "1", "--out", str(out), "--plot-script"]) == 0
    script = (out / "plot.py").read_text()
    compile(script, "plot.py", "exec")
    assert "log.csv" in script
    # one second ends inside the startup ramp, so the metrics window is empty
    assert parse_metrics((out / "metrics.txt").read_text())["records"] == 0


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "paylevel", "list"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "heightmap3" in proc.stdout
