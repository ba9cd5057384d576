import numpy as np
import pytest

from memflow.cli import main, read_config_file, resolve_config, write_vtk
from memflow.mesh import read_mesh, unit_square_mesh


def run_cli(tmp_path, *args):
    out = tmp_path / "out"
    code = main([*args, f"out={out}"])
    return code, out


def test_regime_rho_zero(tmp_path, capsys):
    code, out = run_cli(tmp_path, "regime", "mu=1", "rho=0", "beta=0.5", "delta=10",
                        "alpha=0")
    assert code == 0
    text = capsys.readouterr().out
    assert "PASS" in text
    assert "theta=41" in text
    kv = dict(line.split("=", 1) for line in (out / "regime.kv").read_text().splitlines())
    assert kv["theta"] == "41"
    assert kv["basic_passes"] == "True"
    assert (out / "run-manifest").exists()


def test_regime_benchmark_parameters_fail(tmp_path, capsys):
    code, out = run_cli(tmp_path, "regime", "mu=1", "rho=16", "beta=0.5", "delta=10")
    assert code == 0
    kv = dict(line.split("=", 1) for line in (out / "regime.kv").read_text().splitlines())
    assert kv["basic_passes"] == "False"
    assert kv["projection_passes"] == "False"


def test_kernel_check(tmp_path, capsys):
    code, out = run_cli(tmp_path, "kernel-check", "beta=0.5", "delta=10", "tau=1e-3",
                        "T=1", "soe_tol=1e-8", "trials=100", "n_steps=200")
    assert code == 0
    kv = dict(line.split("=", 1) for line in
              (out / "kernel-check.kv").read_text().splitlines())
    assert kv["certification"] == "PASS"
    assert int(kv["modes"]) <= 120
    assert float(kv["certified_rel_err"]) <= 1e-8


def test_gronwall_cli(tmp_path):
    code, out = run_cli(tmp_path, "gronwall", "C=0.5", "C0=1", "beta_hat=0.5",
                        "delta_hat=10", "alpha_hat=0", "tau=1e-3", "T=1")
    assert code == 0
    kv = dict(line.split("=", 1) for line in (out / "gronwall.kv").read_text().splitlines())
    assert kv["passed"] == "True"
    lines = (out / "gronwall.csv").read_text().splitlines()
    assert lines[0] == "t,y,bound"


def test_mesh_gen_roundtrip(tmp_path):
    code, out = run_cli(tmp_path, "mesh-gen", "kind=unit_square", "n=4")
    assert code == 0
    mesh = read_mesh(out / "mesh.txt")
    assert mesh.n_vertices == 25
    assert mesh.n_triangles == 32


def test_mesh_gen_contraction(tmp_path):
    code, out = run_cli(tmp_path, "mesh-gen", "kind=contraction", "grading=0.5",
                        "base_h=2.0")
    assert code == 0
    mesh = read_mesh(out / "mesh.txt")
    assert mesh.n_triangles > 0


def test_unknown_key_names_key(tmp_path, capsys):
    code = main(["regime", "bogus_key=3"])
    assert code == 2
    assert "bogus_key" in capsys.readouterr().err


def test_type_mismatch_names_key(tmp_path, capsys):
    code = main(["regime", "rho=abc"])
    assert code == 2
    assert "rho" in capsys.readouterr().err


def test_lambda_pair_derivation(tmp_path):
    cfg, _ = resolve_config({}, ["lambda1=0.1", "lambda2=0.038461538461538464", "mu=1"])
    assert abs(cfg.delta - 10.0) <= 1e-12
    assert abs(cfg.rho - 16.0) <= 1e-9


def test_lambda_conflict_rejected(capsys):
    code = main(["regime", "lambda1=0.1", "lambda2=0.05", "rho=3"])
    assert code == 2
    err = capsys.readouterr().err
    assert "rho" in err


def test_lambda_requires_pair(capsys):
    code = main(["regime", "lambda1=0.1"])
    assert code == 2
    assert "lambda1" in capsys.readouterr().err


def test_lambda_ordering_enforced(capsys):
    code = main(["regime", "lambda1=0.1", "lambda2=0.2"])
    assert code == 2
    assert "lambda2" in capsys.readouterr().err


def test_config_file_and_override_precedence(tmp_path):
    cfg_file = tmp_path / "study.cfg"
    cfg_file.write_text("# comment line\nrho = 4.0\nbeta = 0.25  # trailing comment\n")
    items = read_config_file(cfg_file)
    cfg, _ = resolve_config(items, ["rho=8.0"])
    assert cfg.rho == 8.0  # override wins
    assert cfg.beta == 0.25


def test_manifest_echoes_resolved_config(tmp_path):
    code, out = run_cli(tmp_path, "regime", "rho=2.5")
    assert code == 0
    manifest = dict(line.split("=", 1)
                    for line in (out / "run-manifest").read_text().splitlines())
    assert manifest["subcommand"] == "regime"
    assert manifest["rho"] == "2.5"
    assert manifest["mu"] == "1"


def test_determinism_identical_outputs(tmp_path):
    _, out1 = run_cli(tmp_path / "a", "gronwall", "C=0.3", "tau=1e-2", "T=0.5", "seed=7")
    _, out2 = run_cli(tmp_path / "b", "gronwall", "C=0.3", "tau=1e-2", "T=0.5", "seed=7")
    assert (out1 / "gronwall.csv").read_bytes() == (out2 / "gronwall.csv").read_bytes()


def test_convergence_cli_coarse(tmp_path, capsys):
    code, out = run_cli(tmp_path, "convergence", "n_list=2,4", "tau=5e-3", "T=0.05",
                        "soe_tol=1e-7")
    assert code == 0
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == "n,h,err_u_L2,rate_u_L2,err_u_H1,rate_u_H1,err_p_L2,rate_p_L2"
    assert len(lines) == 3


def test_decay_cli_coarse(tmp_path):
    code, out = run_cli(tmp_path, "decay", "n=4", "tau=2e-3", "T=0.6", "stride=10",
                        "soe_tol=1e-7")
    assert code == 0
    assert (out / "decay.csv").read_text().splitlines()[0] == "t,err_u_L2,err_u_H1,err_p_L2"
    kv = dict(line.split("=", 1) for line in (out / "decay.kv").read_text().splitlines())
    assert float(kv["slope_u_l2"]) < 0


def test_project_cli_coarse(tmp_path):
    code, out = run_cli(tmp_path, "project", "n_list=2,4", "tau=0.05", "T=0.1",
                        "soe_tol=1e-7")
    assert code == 0
    lines = (out / "projection.csv").read_text().splitlines()
    assert lines[0] == "n,h,err_L2,rate_L2,err_H1,rate_H1"


def test_contraction_cli_coarse(tmp_path):
    code, out = run_cli(tmp_path, "contraction", "tau=1e-2", "T=0.1", "base_h=1.2",
                        "grading=0.6", "soe_tol=1e-6", "dump_matrices=true")
    assert code == 0
    assert (out / "final.vtk").exists()
    assert (out / "operator-M.txt").exists()
    kv = dict(line.split("=", 1) for line in (out / "contraction.kv").read_text().splitlines())
    assert float(kv["flux_balance_error"]) <= 1e-8
    header = (out / "final.vtk").read_text().splitlines()
    assert header[0] == "# vtk DataFile Version 3.0"
    assert "DATASET UNSTRUCTURED_GRID" in header[3]


def test_sweep_cli_coarse(tmp_path):
    code, out = run_cli(tmp_path, "sweep", "beta_list=0,0.5", "include_ns=false",
                        "tau=1e-2", "T=0.1", "base_h=1.2", "grading=0.6",
                        "soe_tol=1e-6")
    assert code == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "beta,rho,vortex_area,max_speed"
    assert len(lines) == 3
    assert (out / "sweep-beta0-rho16.vtk").exists()


def test_vtk_cell_types(tmp_path):
    mesh = unit_square_mesh(2)
    path = tmp_path / "m.vtk"
    write_vtk(path, mesh, {"pressure": np.zeros(mesh.n_vertices),
                           "velocity": np.zeros((mesh.n_vertices, 2))})
    text = path.read_text().splitlines()
    idx = text.index(f"CELL_TYPES {mesh.n_triangles}")
    types = set(text[idx + 1: idx + 1 + mesh.n_triangles])
    assert types == {"5"}
