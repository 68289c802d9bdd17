import json
import subprocess
import sys

import numpy as np
import pytest

from qdfss.cli import main
from qdfss.config import ConfigError, RunConfig, dump_config, load_config, parse_config


def write_config(tmp_path):
    text = f"""
[grid]
nx = 256
ny = 256

[output]
directory = {tmp_path / "out"}
prefix = t

[sweep]
workers = 1
"""
    path = tmp_path / "run.ini"
    path.write_text(text)
    return str(path)


def config_with(tmp_path, sections: dict):
    cfg = load_config(write_config(tmp_path))
    text = dump_config(cfg)
    for section, pairs in sections.items():
        for key, value in pairs.items():
            lines = text.splitlines()
            start = lines.index(f"[{section}]")
            for k in range(start + 1, len(lines)):
                if lines[k].startswith(f"{key} ="):
                    lines[k] = f"{key} = {value}"
                    break
            else:
                raise KeyError(key)
            text = "\n".join(lines) + "\n"
    path = tmp_path / "custom.ini"
    path.write_text(text)
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_default_config_round_trip():
    cfg = RunConfig()
    assert parse_config(dump_config(cfg)) == cfg


def test_custom_config_round_trip(tmp_path):
    cfg = load_config(config_with(tmp_path, {"device": {"dot_axis_angle_deg": 20.0},
                                             "solver": {"poisson_maxiter": 40}}))
    assert cfg.device.dot_axis_angle_theta == 20.0
    assert cfg.solver.poisson_maxiter == 40
    assert parse_config(dump_config(cfg)) == cfg


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key 'dot_radius' in section \\[device\\]"):
        parse_config("[device]\ndot_radius = 15\n")


def test_solve_prints_report(tmp_path, capsys):
    code, out, _ = run(["solve", "--config", write_config(tmp_path), "--quadrupole", "0.2"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["v_left_V"] == 0.2 and d["v_top_V"] == -0.2
    assert d["fss_ueV"] == pytest.approx(2 * abs(d["delta_ueV"]), rel=1e-8)
    assert 0 < d["beta"] <= 1


def test_explicit_flags_match_quadrupole(tmp_path, capsys):
    cfg = write_config(tmp_path)
    _, a, _ = run(["solve", "--config", cfg, "--v-top", "0.5", "--v-bottom", "0.5",
                   "--v-left", "-0.5", "--v-right", "-0.5"], capsys)
    _, b, _ = run(["solve", "--config", cfg, "--quadrupole", "-0.5"], capsys)
    assert a == b


def test_flag_overrides_quadrupole(tmp_path, capsys):
    _, out, _ = run(["solve", "--config", write_config(tmp_path), "--quadrupole", "0.3",
                     "--v-right", "0.1"], capsys)
    d = json.loads(out)
    assert (d["v_top_V"], d["v_right_V"]) == (-0.3, 0.1)


def test_bad_key_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text("[grid]\nnx = 256\nnxx = 3\n")
    code, _, err = run(["solve", "--config", str(path)], capsys)
    assert code == 2
    assert "nxx" in err


def test_geometry_exit_code(tmp_path, capsys):
    cfg = config_with(tmp_path, {"device": {"gate_arc_width_nm": 500.0}})
    code, _, err = run(["solve", "--config", cfg], capsys)
    assert code == 4
    assert err


def test_convergence_exit_code(tmp_path, capsys):
    cfg = config_with(tmp_path, {"solver": {"poisson_maxiter": 1}})
    code, _, _ = run(["solve", "--config", cfg, "--quadrupole", "0.4"], capsys)
    assert code == 3


def test_sweep_writes_outputs(tmp_path, capsys):
    cfg = config_with(tmp_path, {"sweep": {"quad_n": 2, "quad_v_min_v": 0.0,
                                           "quad_v_max_v": 0.2}})
    code, out, _ = run(["sweep", "--config", cfg, "--mode", "quadrupole"], capsys)
    assert code == 0
    summary = json.loads(out)
    lines = (tmp_path / "out" / "t_quadrupole.csv").read_text().splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("v,fss_ueV,")
    assert summary["n_points"] == 2 and summary["n_failed"] == 0
    assert json.loads((tmp_path / "out" / "t_quadrupole_summary.json").read_text()) == summary


def test_grid_sweep_matrices(tmp_path, capsys):
    cfg = config_with(tmp_path, {"sweep": {"rl_n": 2, "tb_n": 1}})
    code, _, _ = run(["sweep", "--config", cfg, "--mode", "grid"], capsys)
    assert code == 0
    m = (tmp_path / "out" / "t_grid_fss_matrix.csv").read_text().splitlines()
    assert m[0] == "delta_v_rl\\delta_v_tb,0"
    assert len(m) == 3


def test_optimize_budget(tmp_path, capsys):
    cfg = config_with(tmp_path, {"optimize": {"max_evals": 1}})
    code, out, _ = run(["optimize", "--config", cfg], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["converged"] is False
    assert d["n_evaluations"] == 1
    assert len((tmp_path / "out" / "t_optimize_trace.csv").read_text().splitlines()) == 2


def test_export_zero_potential(tmp_path, capsys):
    target = tmp_path / "phi.csv"
    code, _, _ = run(["export-fields", "--config", write_config(tmp_path), "--what",
                      "potential", "-o", str(target)], capsys)
    assert code == 0
    data = np.loadtxt(target, delimiter=",", skiprows=1)
    assert target.read_text().splitlines()[0] == "x_nm,y_nm,phi_V"
    assert data.shape == (256 * 256, 3)
    assert np.all(data[:, 2] == 0.0)


def test_export_density_normalised(tmp_path, capsys):
    code, out, _ = run(["export-fields", "--config", write_config(tmp_path), "--what",
                        "psi-h", "--quadrupole", "0.3"], capsys)
    assert code == 0
    data = np.loadtxt(out.splitlines()[1:], delimiter=",")
    h = data[1, 1] - data[0, 1]
    assert data[:, 2].sum() * h * h == pytest.approx(1.0, abs=1e-9)


def test_outputs_reproducible(tmp_path, capsys):
    cfg = write_config(tmp_path)
    _, a, _ = run(["solve", "--config", cfg, "--quadrupole", "0.45"], capsys)
    _, b, _ = run(["solve", "--config", cfg, "--quadrupole", "0.45"], capsys)
    assert a == b


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "qdfss", "solve", "--config",
                           write_config(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["v_top_V"] == 0.0
