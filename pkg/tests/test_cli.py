import json
from pathlib import Path

import numpy as np
import pytest

from vigrating.cli import main, write_slab_example_config
from vigrating.config import PERIOD, load_config
from vigrating.errors import ConfigError


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


BASE = """
[problem]
k = 1.0
theta_deg = 0.0
shape = slab
q_re = 3.0
thickness = 1.0

[numerics]
n1 = 32
n2 = 64
rho_box = 1.1277533039647577

[output]
directory = {out}
"""


def test_load_config_units(tmp_path):
    cfg = load_config(_write(tmp_path / "a.ini", BASE.format(out="o")))
    assert cfg.k_period == 1.0
    wave = cfg.wave()
    assert np.isclose(wave.k, 1.0 / PERIOD)
    contrast = cfg.contrast()
    assert np.isclose(contrast.h, np.pi)     # thickness of one period
    grid = cfg.grid(contrast)
    assert np.isclose(grid.rho_box, PERIOD * 1.1277533039647577)


def test_config_strictness(tmp_path):
    bad = BASE.format(out="o") + "typo_key = 1\n"
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path / "b.ini", bad))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path / "c.ini",
                           BASE.format(out="o").replace("q_re = 3.0", "")))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path / "d.ini",
                           BASE.format(out="o") + "q11_re = 1\n"))
    with pytest.raises(ConfigError):
        load_config(_write(
            tmp_path / "e.ini",
            BASE.format(out="o") + "\n[mystery]\nx = 1\n",
        ))
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")


def test_config_matrix_and_two_layer(tmp_path):
    text = """
[problem]
k = 0.8
theta_deg = 10.0
shape = circle
radius = 0.2
q11_re = 2.0
q12_re = 0.3
q22_re = 1.0
q22_im = -0.2

[numerics]
n1 = 16
n2 = 16
rho_box = 0.5
"""
    cfg = load_config(_write(tmp_path / "m.ini", text))
    c = cfg.contrast()
    q = c.sample(np.array(0.0), np.array(0.0))
    assert q[0, 1] == q[1, 0] == 0.3
    assert q[1, 1] == 1.0 - 0.2j

    text2 = """
[problem]
k = 0.8
theta_deg = 0.0
shape = two_layer
thickness1 = 0.1
thickness2 = 0.2
q1_re = 2.0
q2_re = -1.5

[numerics]
n1 = 16
n2 = 32
"""
    cfg2 = load_config(_write(tmp_path / "t.ini", text2))
    c2 = cfg2.contrast()
    assert np.isclose(c2.h, PERIOD * 0.15)


def test_cmd_solve_writes_outputs(tmp_path):
    out = tmp_path / "run"
    cfg = _write(tmp_path / "s.ini", BASE.format(out=out))
    assert main(["solve", str(cfg)]) == 0
    doc = json.loads((out / "result.json").read_text())
    assert doc["metadata"]["converged"] is True
    assert doc["metadata"]["energy_defect"] < 1e-6
    assert doc["metadata"]["relative_residual"] < 2e-8
    csv_text = (out / "efficiencies.csv").read_text()
    assert csv_text.splitlines()[0] == "j,alpha_j,beta_j_re,beta_j_im,e_refl,e_trans"
    assert len(doc["residual_history"]) == doc["metadata"]["iterations"]


def test_cmd_solve_exit_codes(tmp_path):
    # anomalous: one full wave per period at normal incidence
    anom = BASE.format(out=tmp_path / "x").replace("k = 1.0",
                                                   f"k = {PERIOD!r}")
    cfg = _write(tmp_path / "anom.ini", anom)
    assert main(["solve", str(cfg)]) == 3

    broken = BASE.format(out=tmp_path / "y").replace("rho_box = 1.1277533039647577",
                                                     "rho_box = 0.6")
    cfg2 = _write(tmp_path / "geo.ini", broken)
    assert main(["solve", str(cfg2)]) == 3          # box below twice the height

    stall = BASE.format(out=tmp_path / "z").replace(
        "rho_box = 1.1277533039647577",
        "rho_box = 1.1277533039647577\nmax_iterations = 2\nrel_tol = 1e-14",
    )
    cfg3 = _write(tmp_path / "stall.ini", stall)
    assert main(["solve", str(cfg3)]) == 2
    partial = json.loads((tmp_path / "z" / "result.json").read_text())
    assert partial["converged"] is False


def test_cmd_sweep_skips_anomalies(tmp_path):
    out = tmp_path / "sw"
    cfg = _write(tmp_path / "s.ini", BASE.format(out=out))
    lo, hi = PERIOD - 0.1, PERIOD + 0.1
    assert main(["sweep", str(cfg), "--param", "k", "--from", str(lo),
                 "--to", str(hi), "--steps", "3", "--output", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("k,")
    values = {ln.split(",")[0] for ln in lines[1:]}
    # the middle point sits exactly on the anomaly and is skipped
    assert len(values) == 2


def test_cmd_diagnose(tmp_path):
    out = tmp_path / "diag"
    cfg = _write(tmp_path / "s.ini", BASE.format(out=out))
    assert main(["diagnose", str(cfg)]) == 0
    doc = json.loads((out / "garding_report.json").read_text())
    cond = {c["name"]: c["status"] for c in doc["conditions"]}
    assert cond["positive_definite_contrast"] == "satisfied"

    neg = BASE.format(out=out).replace("q_re = 3.0", "q_re = -5.0")
    cfg2 = _write(tmp_path / "n.ini", neg)
    assert main(["diagnose", str(cfg2)]) == 0
    doc2 = json.loads((out / "garding_report.json").read_text())
    assert doc2["sign_verdict"] == "negative"
    entry = [c for c in doc2["conditions"]
             if c["name"] == "negative_contrast_extension"][0]
    assert "threshold_sqrt_inf_abs_min" in entry["details"]


def test_bundled_config_roundtrip(tmp_path):
    cfg = tmp_path / "slab.ini"
    write_slab_example_config(cfg, n=64)
    loaded = load_config(cfg)
    assert loaded.n1 == 64
    problem = loaded.build()
    # slab faces midway between rows: no node carries the half value
    face_vals = problem.q_grid[:, :, 0, 0]
    assert not np.any(np.isclose(face_vals, 1.5))


def test_cmd_validate_quick(capsys):
    assert main(["validate", "--level", "quick"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 7


def test_sweep_parallel_matches_serial(tmp_path, monkeypatch):
    cfg = _write(tmp_path / "s.ini", BASE.format(out=tmp_path / "a"))
    args = ["sweep", str(cfg), "--param", "theta", "--from", "0", "--to",
            "20", "--steps", "3"]
    assert main(args + ["--output", str(tmp_path / "serial")]) == 0
    monkeypatch.setenv("GRATING_THREADS", "3")
    assert main(args + ["--output", str(tmp_path / "par")]) == 0
    assert (tmp_path / "serial" / "sweep.csv").read_bytes() == (
        tmp_path / "par" / "sweep.csv").read_bytes()


def test_solve_from_raster(tmp_path):
    import numpy as np

    from vigrating.problem import write_raster

    # x1-invariant raster equivalent to a thin slab
    n1, n2 = 8, 64
    rho_r = 0.6 * PERIOD
    cells = np.zeros((n1, n2, 2, 2), dtype=complex)
    x2_centers = -rho_r + 2 * rho_r * (np.arange(n2) + 0.5) / n2
    inside = np.abs(x2_centers) < 0.25 * PERIOD
    cells[:, inside] = 2.0 * np.eye(2)
    raster = tmp_path / "grating.bin"
    write_raster(raster, cells, h=0.25 * PERIOD, rho=rho_r)

    text = f"""
[problem]
k = 0.8
theta_deg = 5.0
shape = raster
path = {raster}

[numerics]
n1 = 16
n2 = 128
rho_box = 0.55

[output]
directory = {tmp_path / "rout"}
"""
    cfg = _write(tmp_path / "r.ini", text)
    assert main(["solve", str(cfg)]) == 0
    doc = json.loads((tmp_path / "rout" / "result.json").read_text())
    assert doc["metadata"]["converged"] is True
    assert doc["metadata"]["energy_defect"] < 1e-4


def test_sweep_skips_invalid_directions(tmp_path):
    # theta beyond 90 degrees flips d2 nonnegative; such points are skipped
    out = tmp_path / "sw2"
    cfg = _write(tmp_path / "s.ini", BASE.format(out=out))
    assert main(["sweep", str(cfg), "--param", "theta", "--from", "80",
                 "--to", "100", "--steps", "3", "--output", str(out)]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    values = {ln.split(",")[0] for ln in lines[1:]}
    assert len(values) == 1          # only theta = 80 is a valid direction
