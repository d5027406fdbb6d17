import csv
import subprocess
import sys

import numpy as np
import pytest

from wplab.cli import ScenarioConfig, load_config, main, parse_config, run
from wplab.errors import ConfigError


def _report(path):
    return dict(ln.split(": ", 1) for ln in path.read_text().splitlines())


# ------------------------------------------------------------------ config

def test_empty_config_gives_defaults():
    cfg = parse_config("")
    assert (cfg.genus, cfg.cover_degree, cfg.refine, cfg.q_seed, cfg.q_truncation, cfg.grid_points) == (2, 2, 3, 0, 6, 5)
    assert cfg.t_max == "auto"
    assert cfg == ScenarioConfig() == load_config(None)


def test_single_key_overrides():
    cfg = parse_config("genus=3\n")
    assert cfg.genus == 3
    assert cfg.cover_degree == 2 and cfg.refine == 3


def test_comments_and_blank_lines():
    cfg = parse_config("# scenario\n\n  refine = 2  # coarse\nt_max=0.05\n")
    assert cfg.refine == 2 and cfg.t_max == 0.05


@pytest.mark.parametrize("text, line, fragment", [
    ("gnus=3", 1, "unknown key 'gnus'"),
    ("genus=2\nrefine=two", 2, "cannot parse"),
    ("grid_points=6", 1, "odd"),
    ("genus=1", 1, "at least 2"),
    ("\n\njust words", 3, "key=value"),
    ("seed=1\nseed=2", 2, "duplicate"),
    ("kernel_kappa=2", 1, "(0, 1)"),
    ("t_max=-1", 1, "positive"),
])
def test_config_errors_name_the_line(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")
    assert fragment in str(info.value)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


# ------------------------------------------------------------------ exit codes

def test_bad_config_exits_2(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("gnus=3\n")
    code = main(["surface", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 2
    text = (tmp_path / "o" / "config_error.txt").read_text()
    assert "line 1" in text and "exit_code: 2" in text


def test_surface_passes(tmp_path):
    code = run("surface", ScenarioConfig(out_dir=str(tmp_path)))
    assert code == 0
    rep = _report(tmp_path / "surface_report.txt")
    assert rep["exit_code"] == "0" and rep["domain_genus"] == "3"
    assert rep["config.refine"] == "3"


def test_surface_area_gate(tmp_path):
    # level 2 misses the area tolerance by construction, a certification failure rather than an error
    assert run("surface", ScenarioConfig(refine=2, out_dir=str(tmp_path))) == 1
    rep = _report(tmp_path / "surface_report.txt")
    assert rep["passed"] == "false" and "error" not in rep
    assert (tmp_path / "mesh.txt").exists()


def test_qdiff_passes(tmp_path):
    assert run("qdiff", ScenarioConfig(refine=2, out_dir=str(tmp_path))) == 0
    assert _report(tmp_path / "qdiff_report.txt")["passed"] == "true"


def test_zero_sweep_is_flat(tmp_path):
    code = run("sweep", ScenarioConfig(refine=2, q_truncation=0, out_dir=str(tmp_path)))
    assert code == 0
    with open(tmp_path / "curve.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "energy", "grad_norm"]
    e = np.array([float(r[1]) for r in rows[1:]])
    assert len(e) == 5 and np.ptp(e) <= 1e-10
    with open(tmp_path / "derivs.csv") as fh:
        assert next(csv.reader(fh)) == ["mu_id", "fd1", "formula1", "fd2", "formula2", "wp4", "hproj4"]


def test_solve_with_one_iteration_exits_3(tmp_path):
    code = run("solve", ScenarioConfig(refine=2, solver_max_iter=1, out_dir=str(tmp_path)))
    assert code == 3
    rep = _report(tmp_path / "solve_report.txt")
    assert rep["converged"] == "false" and rep["error"].startswith("NonConvergence")


def test_solve_converges(tmp_path):
    assert run("solve", ScenarioConfig(refine=2, out_dir=str(tmp_path))) == 0
    rep = _report(tmp_path / "solve_report.txt")
    assert rep["degree"] == "2"
    assert (tmp_path / "map.txt").exists()


def test_coarse_cover_exits_1(tmp_path):
    # the covering domain at level 1 has inverted faces, reported as a mesh failure
    assert run("surface", ScenarioConfig(refine=1, out_dir=str(tmp_path))) == 1
    assert "MeshError" in _report(tmp_path / "surface_report.txt")["error"]


def test_sweep_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert run("sweep", ScenarioConfig(refine=2, q_truncation=4, seed=5, out_dir=str(d))) == 0
        outs.append(((d / "curve.csv").read_bytes(), (d / "derivs.csv").read_bytes()))
    assert outs[0] == outs[1]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "wplab", "surface", "--out", str(tmp_path), "--seed", "3"],
                          capture_output=True, text=True, timeout=600)
    assert proc.returncode == 0, proc.stderr
    assert _report(tmp_path / "surface_report.txt")["config.seed"] == "3"


@pytest.mark.slow
def test_certify_on_defaults(tmp_path):
    code = main(["certify", "--out", str(tmp_path)])
    assert code == 0
    rep = _report(tmp_path / "certificate.txt")
    assert rep["certificate.passed"] == "true" and rep["exit_code"] == "0"
    assert (tmp_path / "derivs.csv").exists()
