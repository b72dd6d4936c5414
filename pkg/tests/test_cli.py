import io as stdio
import json
import sys

import numpy as np
import pytest

from torusvrep import io
from torusvrep.cli import run
from torusvrep.fourier import random_function
from torusvrep.spaces import englisch_density, make_density, make_potential


def test_solve_zero_potential(tmp_path):
    assert run(["solve", "--n", "1", "--cutoff", "8", "--potential", "zero", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "solve.json").read_text())
    assert rep["schema"] == "torus-vrep/1"
    assert rep["energy"] == 0.0
    header = (tmp_path / "profile.csv").read_text().splitlines()[0]
    assert header == "x,rho,v"


def test_solve_is_byte_deterministic(tmp_path):
    args = ["solve", "--n", "2", "--cutoff", "4", "--spinful", "--interaction", "delta",
            "--coupling", "2", "--potential", "cos", "--amplitude", "3", "--svg"]
    assert run(args + ["--out", str(tmp_path / "a")]) == 0
    assert run(args + ["--out", str(tmp_path / "b"), "--workers", "3"]) == 0
    for name in ("solve.json", "density.json", "profile.csv", "density.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_solve_convergence_flag_exit_code(tmp_path):
    code = run(["solve", "--cutoff", "8", "--potential", "delta", "--gamma", "5",
                "--check-convergence", "--out", str(tmp_path)])
    assert code == 3
    rep = json.loads((tmp_path / "solve.json").read_text())
    assert rep["convergence"]["converged"] is False


def test_example_pipes_into_invert(tmp_path, monkeypatch, capsys):
    assert run(["example", "englisch", "--a", "1", "--b", "0.5", "--alpha", "0.25", "--cutoff", "16"]) == 0
    text = capsys.readouterr().out
    monkeypatch.setattr(sys, "stdin", stdio.StringIO(text))
    code = run(["invert", "--density", "-", "--potential-cutoff", "16", "--out", str(tmp_path)])
    assert code == 0
    rep = json.loads((tmp_path / "invert.json").read_text())
    assert rep["certificate"]["weak_duality"] is True
    assert rep["mismatch"] < 1e-5
    trace = (tmp_path / "trace.csv").read_text().splitlines()
    assert trace[0] == "iter,G,mismatch,step"
    assert (tmp_path / "potential.json").exists()


def test_invert_nonconvergence_exit_code(tmp_path):
    rho = make_density(2, coefficients=[0.4, 2.0, 0.4])
    io.save_field(tmp_path / "rho.json", rho)
    code = run(["invert", "--density", str(tmp_path / "rho.json"), "--cutoff", "3",
                "--max-iter", "1", "--out", str(tmp_path)])
    assert code == 3


def test_nrep_outputs(tmp_path):
    io.save_field(tmp_path / "rho.json", make_density(2, coefficients=[0.5, 2.0, 0.5]))
    assert run(["nrep", "--density", str(tmp_path / "rho.json"), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "nrep.json").read_text())
    assert rep["bound_holds"] and rep["density_error"] < 1e-10
    header = (tmp_path / "nrep.csv").read_text().splitlines()[0]
    assert header == "x,rho_in,rho_reconstructed,abs_phi_0,abs_phi_1"


def test_verify_kinetic_bounds(tmp_path):
    code = run(["verify", "kinetic-bounds", "--potential", "delta", "--gamma", "1", "--eps", "0.1",
                "--samples", "60", "--out", str(tmp_path)])
    assert code == 0
    rep = json.loads((tmp_path / "verify_kinetic-bounds.json").read_text())
    assert rep["a"] <= 0.1 and rep["bound_passed"] and rep["coercivity_passed"]


def test_config_file_with_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# model\nn = 2\ncutoff = 5\nspinful = true\n", encoding="utf-8")
    assert run(["solve", "--config", str(cfg), "--cutoff", "3", "--out", str(tmp_path)]) == 0
    model = json.loads((tmp_path / "solve.json").read_text())["model"]
    assert model == {"n_particles": 2, "cutoff": 3, "spinful": True, "interaction": "none",
                     "coupling": 0.0}


@pytest.mark.parametrize("body,field", [("cutof = 3\n", "cutof"), ("cutoff = x\n", "cutoff"),
                                        ("interaction = magnetic\n", "interaction")])
def test_bad_config_exits_2(tmp_path, capsys, body, field):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(body, encoding="utf-8")
    assert run(["solve", "--config", str(cfg)]) == 2
    assert field in capsys.readouterr().err


def test_invalid_inputs_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "density", "coeff_re": [1, 2]}', encoding="utf-8")
    assert run(["nrep", "--density", str(bad)]) == 2
    assert run(["solve", "--n", "9", "--cutoff", "1"]) == 2
    assert run(["bogus"]) == 2
    assert run(["invert", "--density", str(tmp_path / "missing.json")]) == 2


def test_field_round_trip(tmp_path, rng):
    objs = [englisch_density(1, 0.5, 0.25, 2, 12),
            make_potential(function=random_function(rng, 9)),
            make_density(3, coefficients=(random_function(rng, 4) * 0.1 + 3).coeffs)]
    for i, obj in enumerate(objs):
        path = tmp_path / f"f{i}.json"
        io.save_field(path, obj)
        back = io.load_field(path)
        assert type(back) is type(obj)
        assert np.array_equal(back.coeffs, obj.coeffs)
        io.save_field(tmp_path / "again.json", back)
        assert (tmp_path / "again.json").read_bytes() == path.read_bytes()


def test_samples_only_density(tmp_path):
    x = np.arange(32) / 32
    d = {"kind": "density", "n_particles": 1, "cutoff": 2, "samples": list(1 + 0.5 * np.cos(2 * np.pi * x)),
         "grid": 32}
    rho = io.field_from_dict(d)
    assert rho.coeffs[3] == pytest.approx(0.25)


def test_float_formatting():
    text = io.dumps({"a": 0.1, "b": 1.0, "c": [1e-20, float("nan")], "d": 3})
    assert '"a": 0.10000000000000001' in text
    assert '"b": 1.0' in text and "null" in text and '"d": 3' in text
    assert json.loads(text)["a"] == 0.1
