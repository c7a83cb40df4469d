import io
import json

import pytest

from jetkt.cli import run

from conftest import PROBLEMS
from golden_cases import GOLDEN, load_manifest, run_case

FAST_CASES = [c for c in load_manifest() if c["argv"][0] != "kt-homology"]


def call(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, out, err)
    return code, out.getvalue(), err.getvalue()


def write(tmp_path, text, name="p.eq"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.mark.parametrize("case", FAST_CASES, ids=lambda c: c["golden"])
def test_golden(case):
    code, text = run_case(case)
    assert code == case["exit"]
    assert text == (GOLDEN / case["golden"]).read_text(encoding="utf-8")


def test_cosymmetries_json():
    code, out, _ = call(["cosymmetries", str(PROBLEMS / "kdv.eq"), "--jet-order", "2", "--degree", "2", "--json"])
    assert code == 0
    doc = json.loads(out)
    assert list(doc) == ["problem", "command", "bounds", "results"]
    assert [r["psi"] for r in doc["results"]] == [["1"], ["u[1]"], ["u[1]_{x^2} + 1/2*u[1]^2"]]


def test_kt_check_summary_line():
    code, out, _ = call(["kt-check", str(PROBLEMS / "grad.eq"), "--antighost", "2", "--jet-order", "2"])
    assert code == 0
    assert out.splitlines()[0].startswith("delta^2 = 0: PASS (")


def test_deterministic_output():
    argv = ["compare", str(PROBLEMS / "kdv.eq"), "--bound", "2", "--json"]
    assert call(argv)[1] == call(argv)[1]


def test_output_flag(tmp_path):
    target = tmp_path / "out.json"
    code, out, _ = call(["adjoint", str(PROBLEMS / "kdv.eq"), "--json", "--output", str(target)])
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["results"][0]["operator"] == [["-D_{t} + u[1]*D_{x} + D_{x^3}"]]


def test_usage_errors():
    with pytest.raises(SystemExit) as e:
        run(["bogus", "x.eq"], io.StringIO(), io.StringIO())
    assert e.value.code == 1
    assert call(["linearize", "/nonexistent/file.eq"])[0] == 1


def test_parse_error_exit(tmp_path):
    path = write(tmp_path, "independent x, t;\ndependent u;\nequation u*u_t = u_xx;\n")
    code, out, err = call(["linearize", path])
    assert code == 2
    assert err.startswith(f"{path}:3:") and "E_SOLVED_FORM" in err


def test_validation_failure_exit(tmp_path):
    assert call(["compare", str(PROBLEMS / "grad.eq")])[0] == 3
    path = write(tmp_path, "independent x, y; dependent u; equation u_x = u; equation u_y = x*u;")
    assert call(["cosymmetries", path])[0] == 3
    path = write(tmp_path, "independent x, t; dependent u; equation u_t = u_xxx; compat D1 = [D_x];")
    assert call(["kt-check", path])[0] == 3


def test_rejected_computation_exit(tmp_path):
    assert call(["kt-homology", str(PROBLEMS / "kdv.eq"), "--jet-order", "-1"])[0] == 4
    path = write(tmp_path, "independent x, t; dependent u; equation u_t = u_xx; current bad = [u, u];")
    code, out, err = call(["to-cosymmetry", path, "--json"])
    assert code == 4
    assert json.loads(out)["error"].startswith("not conserved")
