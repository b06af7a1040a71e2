import csv
import json
import subprocess
import sys

import pytest

from prefloop.cli import main
from prefloop.experiment import trajectory_columns


def _rows(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("# ")
    return list(csv.reader(lines[1:]))


@pytest.fixture
def manifest(tmp_path):
    def write(body):
        p = tmp_path / "m.yaml"
        p.write_text(body)
        return p
    return write


def test_zero_steps_single_snapshot(tmp_path, manifest):
    m = manifest("name: z\nn: 10\nd: 2\nsteps: 0\npolicy: softmax\n")
    assert main(["run", str(m), "--out-dir", str(tmp_path / "o")]) == 0
    rows = _rows(tmp_path / "o" / "trajectories" / "z_c000_s0.csv")
    assert rows[0] == trajectory_columns(2)
    assert len(rows) == 2 and rows[1][:4] == ["0", "", "", ""]


def test_two_betas_two_seeds(tmp_path, manifest):
    m = manifest("name: s\nn: 20\nsteps: 30\nseeds: [0, 1]\nsweep: {policy.beta: [1, 2]}\n")
    assert main(["run", str(m), "--out-dir", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "s_summary.csv")
    assert len(rows) == 5
    assert [(r[0], r[2], r[3]) for r in rows[1:]] == [("0", "0", "ok"), ("0", "1", "ok"),
                                                     ("1", "0", "ok"), ("1", "1", "ok")]


def test_config_echo_is_rerunnable(tmp_path, manifest):
    m = manifest("name: e\nn: 20\nsteps: 15\ndynamics: {gamma_oc: 0.1}\n")
    main(["run", str(m), "--out-dir", str(tmp_path)])
    path = tmp_path / "trajectories" / "e_c000_s0.csv"
    echo = json.loads(path.read_text().splitlines()[0][len("# config: "):])
    assert echo["dynamics"]["gamma_oc"] == 0.1 and echo["steps"] == 15


def test_floats_round_trip(tmp_path, manifest):
    m = manifest("name: f\nn: 20\nsteps: 10\n")
    main(["run", str(m), "--out-dir", str(tmp_path)])
    for row in _rows(tmp_path / "trajectories" / "f_c000_s0.csv")[1:]:
        for cell in row[4:]:
            assert repr(float(cell)) == repr(float(repr(float(cell))))
            assert format(float(cell), ".17g") == cell


def test_rerun_is_byte_identical(tmp_path, manifest):
    m = manifest("name: b\nn: 30\nsteps: 60\nseeds: [2]\nsweep: {policy.kind: [uniform, greedy]}\n")
    main(["run", str(m), "--out-dir", str(tmp_path / "a")])
    main(["run", str(m), "--out-dir", str(tmp_path / "b"), "--parallelism", "2"])
    a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert a == b and len(a) == 6
    for rel in a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_config_error_exit_code(tmp_path, manifest, capsys):
    m = manifest("n: 10\ndynamics: {gamme_me: 0.1}\n")
    assert main(["run", str(m), "--out-dir", str(tmp_path)]) == 2
    assert "gamme_me" in capsys.readouterr().err
    assert main(["preset", "nope"]) == 2
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2


def test_run_failure_exit_code(tmp_path, manifest, capsys):
    m = manifest("name: x\nn: 10\nsteps: 3000\nsigma: 1.0e100\nrating_noise_std: 0\npolicy: uniform\n"
                 "dynamics: {pref_noise_std: 0}\nestimator: {alpha: 5.0}\n")
    assert main(["run", str(m), "--out-dir", str(tmp_path)]) == 1
    assert "FAILED" in capsys.readouterr().err
    rows = _rows(tmp_path / "x_summary.csv")
    assert rows[1][3] == "failed"


def test_env_out_dir_and_overrides(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PREFLOOP_OUT_DIR", str(tmp_path))
    assert main(["preset", "fig5", "--seed", "3", "--steps", "20"]) == 0
    assert "seeds: [3]" in capsys.readouterr().out
    assert (tmp_path / "fig5_summary.csv").exists()
    assert len(_rows(tmp_path / "fig5_summary.csv")) == 7


def test_list_and_validate(tmp_path, manifest, capsys):
    assert main(["list-presets"]) == 0
    assert "fig3" in capsys.readouterr().out
    assert main(["validate", str(manifest("n: 10\npolicy: greedy\n"))]) == 0
    assert "kind: greedy" in capsys.readouterr().out


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "prefloop", "list-presets"], capture_output=True, text=True)
    assert out.returncode == 0 and "fig8" in out.stdout
