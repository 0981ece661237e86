import json
import subprocess
import sys

import numpy as np
import pytest

from mdforms import cli
from mdforms.cli import canonical_json, main
from mdforms.cochains import MixedForm, read_form, write_form
from mdforms.fixtures import fixture_path, load_fixture
from mdforms.hodge import SolverError
from mdforms.operators import layout


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, json.loads(out), out


def test_canonical_json_format():
    text = canonical_json({"b": 0.1, "a": [1, True, None, np.float64(1e-300)], "c": float("nan")})
    assert text == '{"a":[1,true,null,1e-300],"b":0.10000000000000001,"c":"NaN"}\n'


def test_check_ok_and_flipped(capsys):
    code, rep, _ = run(capsys, "check", "--geometry", fixture_path("slit_regions"))
    assert code == 0 and rep["conforming"] is True
    code, rep, _ = run(capsys, "check", "--geometry", fixture_path("slit_regions_flipped"))
    assert code == 1
    assert {v["kind"] for v in rep["violations"]} == {"orientation", "sign_identity"}


@pytest.mark.parametrize("content", ["", "{", '{"n": 2}'])
def test_input_errors_exit_2(capsys, tmp_path, content):
    path = tmp_path / "g.json"
    path.write_text(content)
    code, rep, _ = run(capsys, "check", "--geometry", path)
    assert code == 2 and rep["kind"] == "input"


def test_missing_file_and_bad_args(capsys, tmp_path):
    code, rep, _ = run(capsys, "betti", "--geometry", tmp_path / "none.json")
    assert code == 2
    assert main(["frobnicate", "--geometry", "x"]) == 2
    capsys.readouterr()
    code, rep, _ = run(capsys, "solve", "--geometry", fixture_path("interval_pair"), "--k", "5")
    assert code == 2


def test_verify_is_deterministic(capsys, tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    code1, rep, out1 = run(capsys, "verify", "--geometry", fixture_path("annulus"), "--seed", 7, "--out", a)
    code2, _, out2 = run(capsys, "verify", "--geometry", fixture_path("annulus"), "--seed", 7, "--out", b)
    assert code1 == code2 == 0
    assert out1 == out2
    assert (a / "verify.json").read_bytes() == (b / "verify.json").read_bytes()
    assert rep["seed"] == 7 and rep["pass"] is True
    assert [d["dd_max_abs"] for d in rep["degrees"]] == [0, 0]


def test_verify_rejects_nonconforming(capsys):
    code, rep, _ = run(capsys, "verify", "--geometry", fixture_path("slit_regions_flipped"))
    assert code == 1 and rep["conforming"] is False


def test_betti_reports_expected(capsys):
    code, rep, _ = run(capsys, "betti", "--geometry", fixture_path("annulus"))
    assert code == 0 and rep["betti"] == [1, 1, 0] and rep["matches_expected"]
    code, rep, _ = run(capsys, "betti", "--geometry", fixture_path("annulus"), "--bc", "essential")
    assert rep["betti"] == [0, 1, 1]


def test_decompose_exports_parts(capsys, tmp_path):
    code, rep, _ = run(capsys, "decompose", "--geometry", fixture_path("annulus"), "--k", 1, "--out", tmp_path)
    assert code == 0
    assert rep["harmonic_dim"] == 1 and rep["poincare_constant"] > 0
    parts = [read_form(tmp_path / f"{n}.csv")[0].coefficients for n in ("a_d", "a_dstar", "a_0")]
    assert all(len(p) == layout(load_fixture("annulus"), 1).total for p in parts)


def test_decompose_reads_form(capsys, tmp_path):
    g = load_fixture("interval_pair")
    x = np.arange(layout(g, 1).total, dtype=float)
    write_form(tmp_path / "in.csv", MixedForm(1, x), g.hash)
    code, rep, _ = run(capsys, "decompose", "--geometry", fixture_path("interval_pair"), "--k", 1, "--form", tmp_path / "in.csv")
    assert code == 0 and rep["residuals"]["reconstruction"] <= 1e-8
    code, rep, _ = run(capsys, "decompose", "--geometry", fixture_path("interval_pair"), "--k", 0, "--form", tmp_path / "in.csv")
    assert code == 2


def test_solve_zero_source_exports_zero(capsys, tmp_path):
    code, rep, _ = run(capsys, "solve", "--geometry", fixture_path("square_fracture"), "--out", tmp_path, "--vtk")
    assert code == 0
    sol, meta = read_form(tmp_path / "solution.csv")
    assert not sol.coefficients.any() and sol.k == 2
    assert meta["geometry_hash"] == load_fixture("square_fracture").hash
    assert len(rep["vtk"]) == 4


def test_solve_with_rhs_and_coefficients(capsys, tmp_path):
    g = load_fixture("slit_regions")
    f = np.random.default_rng(0).standard_normal(layout(g, 1).total)
    write_form(tmp_path / "f.csv", MixedForm(1, f), g.hash)
    (tmp_path / "c.json").write_text(json.dumps({"k": 1, "default_r": 2.0, "default_rstar": 0.5}))
    code, rep, _ = run(
        capsys, "solve", "--geometry", fixture_path("slit_regions"), "--k", 1,
        "--rhs", tmp_path / "f.csv", "--coeff", tmp_path / "c.json", "--bc", "natural",
    )
    assert code == 0
    assert rep["residuals"]["euler_lagrange"] <= 1e-8
    (tmp_path / "c.json").write_text(json.dumps({"k": 1, "default_r": -2.0}))
    code, _, _ = run(capsys, "solve", "--geometry", fixture_path("slit_regions"), "--k", 1, "--coeff", tmp_path / "c.json")
    assert code == 2


def test_poincare_then_solve_consistent(capsys):
    code, rep, _ = run(capsys, "poincare", "--geometry", fixture_path("annulus"), "--k", 1, "--bc", "essential")
    assert code == 0
    C = rep["poincare_constant"]["1"]
    assert np.isfinite(C) and C > 0
    assert rep["coercivity_unit"] >= 1 / (1 + C**2) * (1 - 1e-10)
    code, rep, _ = run(capsys, "solve", "--geometry", fixture_path("annulus"), "--k", 1)
    assert code == 0 and 0 < rep["coercivity"] < np.inf


def test_solver_failure_exits_3(capsys, monkeypatch):
    def boom(*args, **kwargs):
        raise SolverError("did not converge")

    monkeypatch.setattr(cli, "solve_hodge_laplace", boom)
    code, rep, _ = run(capsys, "solve", "--geometry", fixture_path("interval_pair"))
    assert code == 3 and rep["kind"] == "solver"


def test_console_script_and_threads_env(tmp_path):
    env = {"MDFORMS_THREADS": "1", "PATH": "/usr/bin:/bin"}
    out = subprocess.run(
        [sys.executable, "-m", "mdforms.cli", "betti", "--geometry", str(fixture_path("torus"))],
        capture_output=True, text=True, env=env,
    )
    assert out.returncode == 0
    assert json.loads(out.stdout)["betti"] == [1, 2, 1]
