import json
import subprocess
import sys

import pytest

from ksns.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main

RUN = """
[run]
variant = StaticStokes
n1 = 32
n2 = 17
g = 20
t_end = 0.05

[datum]
preset = gaussian_bump
mass = 10
sigma = 0.5
"""

SWEEP = RUN.replace("StaticStokes", "NavierStokes") + "\n[sweep]\ng = 10, 20\nb = 10\n"


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(RUN)
    return p


def test_run_writes_outputs(tmp_path, config):
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out", str(out)]) == EXIT_OK
    payload = json.loads((out / "outcome.json").read_text())
    assert payload["kind"] == "CompletedHorizon"
    assert payload["config_text"] == RUN
    assert (out / "final.ckpt").exists() and (out / "diagnostics.csv").exists()


def test_detector_stop_is_a_normal_exit(tmp_path):
    p = tmp_path / "b.ini"
    p.write_text("[run]\nvariant = NoFlow\nn1 = 64\nn2 = 33\n[datum]\nmass = 80\nsigma = 0.4\n")
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == EXIT_OK
    assert json.loads((tmp_path / "o" / "outcome.json").read_text())["kind"] == "BlowupDetected"


def test_seed_flag_overrides_config(tmp_path):
    p = tmp_path / "r.ini"
    p.write_text("[run]\nn1 = 16\nn2 = 9\nt_end = 0.01\n[datum]\npreset = random_band\nmass = 20\n")
    for seed in (1, 2):
        assert main(["run", "--config", str(p), "--out", str(tmp_path / f"s{seed}"), "--seed", str(seed)]) == EXIT_OK
    a = (tmp_path / "s1" / "diagnostics.csv").read_bytes()
    b = (tmp_path / "s2" / "diagnostics.csv").read_bytes()
    assert a != b
    assert json.loads((tmp_path / "s2" / "outcome.json").read_text())["config"]["seed"] == 2


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nvariant = Magnetic\n")
    assert main(["run", "--config", str(bad)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert main(["run"]) == EXIT_CONFIG
    assert main(["sweep", "--config", str(bad)]) == EXIT_CONFIG
    nosweep = tmp_path / "n.ini"
    nosweep.write_text(RUN)
    assert main(["sweep", "--config", str(nosweep)]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        main(["explode"])
    assert exc.value.code == 2


def test_io_errors_exit_3(tmp_path, config):
    assert main(["run", "--config", str(tmp_path / "missing.ini")]) == EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--config", str(config), "--out", str(blocker / "sub")]) == EXIT_IO
    assert main(["plot", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == EXIT_IO


def test_compare_sweep_and_plot(tmp_path):
    cfg = tmp_path / "s.ini"
    cfg.write_text(SWEEP)
    assert main(["compare", "--config", str(cfg), "--out", str(tmp_path / "c")]) == EXIT_OK
    assert (tmp_path / "c" / "compare_B10.csv").exists()
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "w"), "--workers", "2"]) == EXIT_OK
    lines = (tmp_path / "w" / "sweep.csv").read_text().splitlines()
    assert len(lines) == 3
    assert main(["plot", str(tmp_path / "c"), str(tmp_path / "w"), "--out", str(tmp_path / "p")]) == EXIT_OK
    names = {p.name for p in (tmp_path / "p").iterdir()}
    assert names == {"comparison_r_sq.svg", "w_sweep_heatmap.svg"}


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "ksns.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for verb in ("run", "compare", "sweep", "plot", "verify"):
        assert verb in proc.stdout
