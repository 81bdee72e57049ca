import json

import numpy as np
import pytest

from compactkdv.cli import FIGURES, main, shipped_config
from compactkdv.config import ConfigError, dump_config, eval_number, parse_config
from compactkdv.domain import make_grid
from compactkdv.initial_data import Soliton, write_tabulated
from compactkdv.runner import (
    DIAG_COLUMNS,
    MANIFEST_KEYS,
    OUTPUT_ROOT_ENV,
    CheckpointError,
    read_snapshot,
    resume,
    run,
)

SMALL = """
[run]
p = 2
c = 2
N = 80
Nt = 20
T = 0.2
snapshot_every = 5
output = small

[data]
family = soliton
c_speed = 1
"""


def test_shipped_configs_match_reported_runs():
    step = parse_config(shipped_config("step_p2"))
    assert (step.p, step.c, step.N, step.Nt, step.T, step.eps) == (2, 2.0, 600, 1000, 0.01, 1.0)
    assert step.data.family == "mollified_step" and step.data.n == 4
    lor = parse_config(shipped_config("lorentz_p2"))
    assert (lor.p, lor.eps, lor.c, lor.N, lor.Nt, lor.T) == (2, 0.1, 2.0, 800, 10_000, 10.0)
    assert lor.data.family == "algebraic_decay" and lor.data.a == 1.0
    four = parse_config(shipped_config("step2_fourier"))
    assert (four.solver, four.M, four.L, four.Nt, four.T) == ("fourier_ref", 4096, 10.0, 1000, 0.01)
    assert four.data.x0 == pytest.approx(-5 * np.pi)
    for name in FIGURES:
        cfg = parse_config(shipped_config(name))
        assert parse_config(dump_config(cfg)) == cfg


def test_defaults():
    cfg = parse_config(SMALL)
    assert cfg.eps == 1.0 and cfg.lam == "auto"
    assert cfg.snapshot_stride == 5
    cfg = parse_config(SMALL.replace("snapshot_every = 5\n", ""))
    assert cfg.snapshot_stride == 1
    bare = SMALL.replace("snapshot_every = 5\n", "")
    assert parse_config(bare, {"Nt": "500"}).snapshot_stride == 10


@pytest.mark.parametrize("text,key", [
    (SMALL.replace("N = 80", "N = -5"), "N"),
    (SMALL.replace("N = 80", "N = eighty"), "N"),
    (SMALL.replace("Nt = 20\n", ""), "Nt"),
    (SMALL + "bogus = 1\n", "bogus"),
    (SMALL.replace("family = soliton", "family = wave"), "family"),
    (SMALL.replace("p = 2", "p = 1"), "p"),
])
def test_config_errors_name_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert key in str(info.value)


def test_eval_number():
    assert eval_number("-5*pi") == pytest.approx(-5 * np.pi)
    assert eval_number("pi/2") == pytest.approx(np.pi / 2)
    assert eval_number("1e-3") == 1e-3


def test_run_outputs(tmp_path):
    res = run(parse_config(SMALL), root=tmp_path)
    assert res.ok and res.manifest["status"] == "completed"
    out = tmp_path / "small"
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(MANIFEST_KEYS) <= set(manifest)
    lines = (out / "diagnostics.csv").read_text().splitlines()
    assert lines[0].split(",") == DIAG_COLUMNS
    assert len(lines) == 1 + 5
    t, cols = read_snapshot(out / "snapshots" / "snap_000020.csv")
    assert t == pytest.approx(0.2)
    assert np.isnan(cols["x"][0]) and np.isnan(cols["x"][-1])
    g = make_grid(80, 2.0)
    exact = Soliton(1.0, 2, x0=0.2).nodal_values(g)
    assert np.abs(cols["u"] - exact).max() < 1e-4
    spec = (out / "snapshots" / "coeffs_000020.csv").read_text().splitlines()
    assert spec[0] == "n,abs_coeff" and len(spec) == 82


def test_diagnostics_bytes_deterministic(tmp_path):
    run(parse_config(SMALL), root=tmp_path / "a")
    run(parse_config(SMALL), root=tmp_path / "b")
    a = (tmp_path / "a" / "small" / "diagnostics.csv").read_bytes()
    assert a == (tmp_path / "b" / "small" / "diagnostics.csv").read_bytes()


def test_checkpoint_resume_matches_uninterrupted(tmp_path):
    full = run(parse_config(SMALL), root=tmp_path / "full")
    half = run(parse_config(SMALL, {"stop_after": "10"}), root=tmp_path / "half")
    assert half.manifest["status"] == "interrupted"
    done = resume(tmp_path / "half" / "small")
    assert done.manifest["status"] == "completed"
    assert np.abs(done.state.vt - full.state.vt).max() <= 1e-12
    for k in (15, 20):
        name = f"snap_{k:06d}.csv"
        _, a = read_snapshot(tmp_path / "full" / "small" / "snapshots" / name)
        _, b = read_snapshot(tmp_path / "half" / "small" / "snapshots" / name)
        assert np.abs(a["u"] - b["u"]).max() <= 1e-12
    assert ((tmp_path / "full" / "small" / "diagnostics.csv").read_bytes()
            == (tmp_path / "half" / "small" / "diagnostics.csv").read_bytes())


def test_resume_errors(tmp_path):
    with pytest.raises(CheckpointError):
        resume(tmp_path / "nothing")
    run(parse_config(SMALL, {"stop_after": "10"}), root=tmp_path)
    (tmp_path / "small" / "checkpoint.npz").unlink()
    with pytest.raises(CheckpointError):
        resume(tmp_path / "small")
    run(parse_config(SMALL, {"stop_after": "10"}), root=tmp_path)
    with pytest.raises(CheckpointError):
        resume(tmp_path / "small", {"N": "90"})
    (tmp_path / "small" / "checkpoint.npz").write_bytes(b"garbage")
    with pytest.raises(CheckpointError):
        resume(tmp_path / "small")


def test_failure_recorded_in_manifest(tmp_path):
    cfg = parse_config(SMALL, {"T": "20", "Nt": "2", "max_iter": "2"})
    res = run(cfg, root=tmp_path)
    assert not res.ok and res.manifest["failure"]["type"] == "NonConvergence"


def test_fourier_run(tmp_path):
    text = SMALL.replace("c = 2\nN = 80", "solver = fourier_ref\nL = 8\nM = 256")
    res = run(parse_config(text), root=tmp_path)
    assert res.ok
    t, cols = read_snapshot(tmp_path / "small" / "snapshots" / "snap_000020.csv")
    assert np.abs(cols["u"] - Soliton(1.0, 2, x0=0.2).values(cols["x"])).max() < 1e-6


def test_cli_run_env_root_and_overrides(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(SMALL)
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "root"))
    assert main(["run", str(cfg), "--Nt=10", "--snapshot_every=10"]) == 0
    out = tmp_path / "root" / "small"
    assert json.loads((out / "manifest.json").read_text())["config"]["Nt"] == 10
    assert main(["run", str(cfg), "--N=-5"]) == 2
    assert "N" in capsys.readouterr().err
    assert main(["resume", str(tmp_path / "missing")]) == 2


def test_cli_breakup_and_fit(tmp_path, capsys):
    assert main(["breakup", "mollified_step", "2", "--n=4"]) == 0
    line = capsys.readouterr().out
    assert line.startswith("x_c=") and "t_c=" in line
    assert main(["breakup", "algebraic_decay", "2", "--a=1"]) == 0
    capsys.readouterr()
    res = run(parse_config(SMALL, {"Nt": "1", "T": "1e-9", "N": "200"}), root=tmp_path)
    assert main(["fit", str(res.out / "snapshots" / "snap_000001.csv")]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[1] == "position,amplitude,c_fit,misfit"
    c_fit = float(rows[2].split(",")[2])
    assert c_fit == pytest.approx(1.0, rel=1e-6)


def test_tabulated_data_run(tmp_path):
    g = make_grid(80, 2.0)
    path = tmp_path / "data.csv"
    write_tabulated(path, Soliton(1.0, 2).nodal_values(g), 0.0, 0.0, 0.0, c=2.0)
    text = SMALL.replace("family = soliton\nc_speed = 1", f"family = tabulated\npath = {path}")
    tab = run(parse_config(text), root=tmp_path / "t")
    ref = run(parse_config(SMALL), root=tmp_path / "r")
    assert np.abs(tab.state.vt - ref.state.vt).max() <= 1e-12
