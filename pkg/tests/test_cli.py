import numpy as np
import pandas as pd
import pytest

from decaylab.main import main


def _run(command, config_path, out_dir, *extra):
    return main([command, "--config", str(config_path), "--out", str(out_dir), *extra])


def test_simulate_writes_a_decaying_trajectory(write_config, wave_cubic_lines, tmp_path):
    out = tmp_path / "sim"
    assert _run("simulate", write_config(wave_cubic_lines), out) == 0
    frame = pd.read_csv(out / "trajectory.csv", comment="#")
    assert frame["time"].iloc[0] == 0.0
    assert np.all(np.diff(frame["energy"]) <= 1e-12 * frame["energy"].iloc[0])
    assert (out / "manifest.txt").is_file()
    assert not (out / "snapshots_u.txt").exists()


def test_simulate_writes_snapshots(write_config, wave_cubic_lines, tmp_path):
    out = tmp_path / "snap"
    assert _run("simulate", write_config(wave_cubic_lines + ["record.snapshots = all"]), out) == 0
    states = pd.read_csv(out / "snapshots_u.txt", comment="#")
    assert list(states["step"])[:2] == [0, 1]
    assert (out / "snapshots_u_tilde.txt").is_file()


def test_missing_feedback_is_a_config_error(write_config, tmp_path, capsys):
    path = write_config(["model.kind = wave1d"])
    assert _run("simulate", path, tmp_path / "x") == 2
    assert "feedback.name" in capsys.readouterr().err


def test_audit_without_snapshots(write_config, wave_cubic_lines, tmp_path, capsys):
    assert _run("audit", write_config(wave_cubic_lines), tmp_path / "a") == 2
    assert "record.snapshots" in capsys.readouterr().err


def test_audit_holds_on_the_cubic_wave(write_config, wave_cubic_lines, tmp_path):
    lines = wave_cubic_lines + ["record.snapshots = all", "audit.T_obs = 0.5"]
    out = tmp_path / "audit"
    assert _run("audit", write_config(lines), out) == 0
    text = (out / "audit.txt").read_text()
    assert text.count("holds=True") == 4


def test_gramian_per_mesh(write_config, tmp_path):
    lines = ["feedback.name = linear", "gramian.meshes = 8,12", "gramian.T_obs = 1"]
    out = tmp_path / "g"
    assert _run("gramian", write_config(lines), out) == 0
    rows = [line for line in (out / "gramian.txt").read_text().splitlines() if line.startswith("n=")]
    assert [row.split()[0] for row in rows] == ["n=8", "n=12"]


def test_envelope_with_linear_feedback(write_config, tmp_path):
    lines = ["model.n = 16", "feedback.name = linear", "run.T_final = 1", "envelope.T_obs = 0.5"]
    out = tmp_path / "env"
    assert _run("envelope", write_config(lines), out) == 0
    text = (out / "envelope.txt").read_text()
    assert "mode = exponential" in text
    frame = pd.read_csv(out / "envelope.csv", comment="#")
    assert list(frame.columns) == ["t", "energy", "envelope"]


def test_envelope_needs_damping(write_config, tmp_path):
    lines = ["model.n = 8", "model.damping.support = none", "feedback.name = linear", "run.T_final = 0.1"]
    assert _run("envelope", write_config(lines), tmp_path / "e") == 3


@pytest.fixture
def sweep_lines():
    return [
        "model.kind = wave1d",
        "feedback.name = linear",
        "run.T_final = 1",
        "sweep.meshes = 8,12,16",
        "gramian.T_obs = 0.5",
    ]


def test_sweep_is_byte_deterministic(write_config, sweep_lines, tmp_path):
    path = write_config(sweep_lines)
    out = tmp_path / "sweep"
    assert _run("sweep", path, out) == 0
    first = {name: (out / name).read_bytes() for name in ("sweep_cells.csv", "sweep_half_time.csv", "manifest.txt")}
    assert _run("sweep", path, out, "--jobs", "1") == 0
    for name, body in first.items():
        assert (out / name).read_bytes() == body
    cells = pd.read_csv(out / "sweep_cells.csv", comment="#")
    assert sorted(cells["n"]) == [8, 12, 16]


def test_sweep_assert_fails_on_impossible_threshold(write_config, sweep_lines, tmp_path):
    out = tmp_path / "strict"
    lines = sweep_lines + ["sweep.max_uniformity = 0.5"]
    assert _run("sweep", write_config(lines), out, "--assert") == 4
    assert "uniformity" in (out / "sweep_failures.txt").read_text()
