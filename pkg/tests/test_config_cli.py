from __future__ import annotations

import json
import textwrap

import numpy as np
import pytest

from emenclose import cli
from emenclose.acceptance import CriterionResult
from emenclose.config import ConfigError, config_echo, load_config, parse_config
from emenclose.geometry import AxisBox, Ball, Empty


def test_parse_defaults():
    cfg = parse_config("")
    assert cfg.n == 32
    assert cfg.sweep.fit == "prefactor"
    assert cfg.sweep.directions.shape == (14, 3)
    assert cfg.sweep.tau_grid == (2.0, 4.0, 6.0, 8.0)
    assert cfg.resonance_guard == 3.8
    assert isinstance(cfg.geometry.obstacle, AxisBox)
    assert cfg.geometry.kind == "hard"
    assert cfg.probe.source == "cgo"
    assert cfg.t_grid == (0.0,)
    assert cfg.grid_n == 64
    assert cfg.out_dir == "out"
    assert cfg.fem.preconditioner == "amg"


def test_parse_full_document():
    cfg = parse_config(textwrap.dedent("""
        # every accepted key in one document
        medium.eps0 = 1.5
        medium.mu0 = 0.5
        medium.omega = 1.1
        medium.resonance_guard = 4.0
        domain.box_lo = [-2.0, -2, -2]
        domain.box_hi = [2, 2, 2.0]
        obstacle.shape = "ball"
        obstacle.center = [0.1, 0.0, 0.0]
        obstacle.radius = 0.4
        obstacle.kind = "soft"
        mesh.n = 12
        fem.s = 0.5
        fem.tol = 1e-9
        fem.iter_cap_factor = 30
        fem.direct_threshold = 5000
        fem.preconditioner = "jacobi"
        fem.trace_mode = "onesided"
        sweep.directions = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, 0, 1]]
        sweep.tau_grid = [1, 2, 3]
        sweep.fit = "slope"
        sweep.correction = false
        sweep.noise_factor = 100
        sweep.grid_n = 32
        probe.source = "plane"
        probe.rho = [1, 0, 0]
        probe.tau = 3.5
        probe.t = 0.2
        probe.direction = [0, 1, 0]
        probe.polarization = [0, 0, 1]
        indicator.t_grid = [0.0, 0.1, 0.2]
        out.dir = "results"
    """))
    assert cfg.medium.eps0 == 1.5 and cfg.medium.mu0 == 0.5
    assert isinstance(cfg.geometry.obstacle, Ball)
    assert cfg.geometry.obstacle.radius == 0.4
    assert cfg.geometry.kind == "soft"
    assert cfg.geometry.box_lo == (-2.0, -2.0, -2.0)
    assert cfg.n == 12
    assert cfg.fem.s == 0.5 and cfg.fem.trace_mode == "onesided"
    assert cfg.fem.direct_threshold == 5000
    assert cfg.sweep.directions.shape == (4, 3)
    assert cfg.sweep.tau_grid == (1.0, 2.0, 3.0)
    assert cfg.sweep.fit == "slope" and cfg.sweep.correction is False
    assert cfg.grid_n == 32
    assert cfg.probe.source == "plane"
    assert cfg.probe.direction == (0.0, 1.0, 0.0)
    assert cfg.t_grid == (0.0, 0.1, 0.2)
    assert cfg.out_dir == "results"


def test_direction_presets_and_counts():
    assert parse_config('sweep.directions = "axis"').sweep.directions.shape \
        == (6, 3)
    assert parse_config('sweep.directions = "diagonal"'
                        ).sweep.directions.shape == (8, 3)
    assert parse_config('sweep.directions = "axis+diagonal"'
                        ).sweep.directions.shape == (14, 3)
    fib = parse_config("sweep.directions = 17").sweep.directions
    assert fib.shape == (17, 3)
    assert np.allclose(np.linalg.norm(fib, axis=1), 1.0)


def test_obstacle_none():
    cfg = parse_config('obstacle.shape = "none"')
    assert isinstance(cfg.geometry.obstacle, Empty)


@pytest.mark.parametrize("text,match", [
    ("mesh.n = 8\nmesh.n = 9", r"line 2: duplicate key 'mesh\.n'"),
    ("mesh.m = 8", r"line 1: unknown key 'mesh\.m'"),
    ("mesh..n = 8", "malformed key"),
    ("mesh.n =", "line 1: missing value"),
    ('probe.source = "cgo', "malformed string"),
    ("mesh.n = abc", "cannot parse value"),
    ("sweep.tau_grid = [2, 4", "arrays must close on one line"),
    ("sweep.tau_grid = [2, 4]]", "unbalanced brackets"),
    ("sweep.tau_grid = [2, 4,]", "trailing comma"),
    ("just some words", "expected 'key = value'"),
    ('obstacle.shape = "torus"', "obstacle.shape must be"),
    ('sweep.directions = "ring"', "unknown direction preset"),
    ("sweep.directions = 3", "count must be at least 4"),
    ("sweep.directions = true", "must be a count"),
    ("sweep.directions = [[1, 0], [0, 1, 0]]", "entries must be 3-vectors"),
    ("probe.rho = [1, 2]", "must be a 3-vector"),
    ("mesh.n = 3", "mesh.n must be at least 4"),
    ("mesh.n = 8.5", "must be an integer"),
    ("fem.s = 0", "fem.s must be positive"),
    ("fem.tol = -1e-9", "fem.tol must be positive"),
    ("sweep.grid_n = 1", "sweep.grid_n must be at least 2"),
    ('probe.source = "laser"', "probe.source must be"),
    ("medium.omega = true", "must be a number"),
    ("sweep.correction = 1", "must be true or false"),
    ("sweep.tau_grid = [2, 2, 3, 4]", "strictly increasing"),
    ("sweep.tau_grid = [2, 4, 6]", "length >= 4"),
    ("medium.omega = 3", "resonance guard violated"),
    ("obstacle.hi = [1, 1, 1]", "strictly inside"),
    ('obstacle.kind = "rigid"', "kind must be"),
])
def test_parse_error_messages(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_unknown_preset_message_lists_options():
    with pytest.raises(ConfigError, match=r"axis\+diagonal"):
        parse_config('sweep.directions = "ring"')


def test_config_echo_round_trips_and_is_deterministic():
    text = "mesh.n = 8\nsweep.fit = \"slope\"\nsweep.tau_grid = [2, 4, 6]"
    a = config_echo(parse_config(text))
    b = config_echo(parse_config(text))
    assert a == b
    blob = json.dumps(a, sort_keys=True)
    assert json.loads(blob) == a
    assert a["medium"]["resonance_guard"] == 3.8
    assert a["mesh"]["n"] == 8
    assert a["sweep"]["fit"] == "slope"
    assert len(a["sweep"]["directions"]) == 14


def test_load_config_reads_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("mesh.n = 6\n")
    assert load_config(path).n == 6
    with pytest.raises(OSError):
        load_config(tmp_path / "absent.cfg")


# ---------------------------------------------------------------------------
# CLI entry points, exercised in process


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return str(path)


def test_cli_forward(tmp_path):
    cfg = _write(tmp_path, "fwd.cfg", """
        obstacle.shape = "none"
        mesh.n = 8
        probe.source = "plane"
    """)
    out = tmp_path / "fwd_out"
    assert cli.main(["forward", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "forward.vtk").exists()
    assert (out / "timings.json").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["mesh"]["n"] == 8
    assert summary["metrics"]["n_nodes"] == 729
    assert summary["metrics"]["probe"] == "plane"
    assert summary["metrics"]["e_dof_norm"] > 0.0
    assert summary["timings"] == {"file": "timings.json"}
    assert set(summary["versions"]) == {"emenclose", "python", "numpy",
                                        "scipy", "pyamg"}
    timings = json.loads((out / "timings.json").read_text())
    assert set(timings) == {"setup", "solve", "total"}


def test_cli_indicator(tmp_path):
    cfg = _write(tmp_path, "ind.cfg", """
        mesh.n = 8
        sweep.tau_grid = [2, 4]
        sweep.fit = "last"
        indicator.t_grid = [0.0, 0.25]
    """)
    out = tmp_path / "ind_out"
    assert cli.main(["indicator", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "indicator.csv").read_text().splitlines()
    assert len(rows) == 1 + 4      # 2 tau values x 2 thresholds
    summary = json.loads((out / "summary.json").read_text())
    assert summary["metrics"]["rows"] == 4
    assert summary["metrics"]["tau_grid"] == [2.0, 4.0]


def test_cli_indicator_rejects_plane_probe(tmp_path, capsys):
    cfg = _write(tmp_path, "bad.cfg", """
        mesh.n = 8
        probe.source = "plane"
        sweep.tau_grid = [2, 4]
        sweep.fit = "last"
    """)
    out = tmp_path / "bad_out"
    assert cli.main(["indicator", "--config", cfg, "--out", str(out)]) == 1
    assert "config error" in capsys.readouterr().err


def test_cli_sweep(tmp_path):
    cfg = _write(tmp_path, "sw.cfg", """
        mesh.n = 8
        sweep.directions = "axis"
        sweep.tau_grid = [2, 4]
        sweep.fit = "last"
        sweep.grid_n = 16
    """)
    out = tmp_path / "sw_out"
    assert cli.main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    assert len((out / "support.csv").read_text().splitlines()) == 7
    summary = json.loads((out / "summary.json").read_text())
    rows = summary["metrics"]["directions"]
    assert len(rows) == 6
    assert all(r["message"] == "ok" for r in rows if r["detected"])
    hull = summary["metrics"]["hull"]
    assert ("volume" in hull) == (out / "hull.vtk").exists()
    assert summary["timings"] == {"file": "timings.json"}


def test_cli_rejects_bad_thread_count(tmp_path, capsys):
    cfg = _write(tmp_path, "t.cfg", "mesh.n = 8\n")
    code = cli.main(["forward", "--config", cfg, "--threads", "0"])
    assert code == 1
    assert "threads" in capsys.readouterr().err


def test_cli_missing_config_file(tmp_path, capsys):
    code = cli.main(["forward", "--config", str(tmp_path / "nope.cfg")])
    assert code == 1
    assert capsys.readouterr().err.startswith("config error")


def test_cli_validate_report(tmp_path, monkeypatch, capsys):
    import emenclose.acceptance as acceptance

    results = [CriterionResult(1, "alpha", True, "fine"),
               CriterionResult(2, "beta", True, "also fine")]

    def fake(progress=None):
        return results

    monkeypatch.setattr(acceptance, "run_acceptance", fake)
    cfg = _write(tmp_path, "v.cfg", "mesh.n = 8\n")
    out = tmp_path / "v_out"
    assert cli.main(["validate", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "acceptance_report.json").read_text())
    assert [c["name"] for c in report["criteria"]] == ["alpha", "beta"]
    assert all(c["passed"] for c in report["criteria"])
    assert "2 of 2 criteria passed" in capsys.readouterr().out

    results[1] = CriterionResult(2, "beta", False, "broken")
    assert cli.main(["validate", "--config", cfg, "--out", str(out)]) == 3
