import json
import subprocess
import sys

import pytest

from toricheights.cli import main

XY1 = {"vars": 2, "terms": [{"exp": [0, 0], "coef": "1"}, {"exp": [1, 0], "coef": "1"}, {"exp": [0, 1], "coef": "1"}]}


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def files(tmp_path):
    def write(name, obj):
        p = tmp_path / name
        p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
        return str(p)

    return write


def test_poly_mv_squares(capsys, files):
    path = files("squares.json", [{"dim": 2, "vertices": [[0, 0], [1, 0]]}, {"dim": 2, "vertices": [[0, 0], [0, 1]]}])
    code, out, _ = run(capsys, "poly", "mv", "--in", path)
    assert code == 0
    assert json.loads(out) == {"mixed_volume": "1", "error": "0"}


def test_fractions_are_strings(capsys):
    code, out, _ = run(capsys, "height", "tuple", "--coords", "2,3/4")
    assert code == 0
    assert "error" in json.loads(out)


def test_malformed_json_exits_2(capsys, files):
    code, _, err = run(capsys, "poly", "mv", "--in", files("bad.json", "{not json"))
    assert code == 2 and err


def test_missing_file_exits_2(capsys, tmp_path):
    assert run(capsys, "poly", "mv", "--in", str(tmp_path / "nope.json"))[0] == 2


def test_unknown_subcommand_exits_2(capsys):
    assert run(capsys, "poly", "frobnicate")[0] == 2
    assert run(capsys, "nothing")[0] == 2


def test_bounds_zero_samples_exits_2(capsys):
    assert run(capsys, "mahler", "bounds", "--seed", "7", "--samples", "0")[0] == 2


def test_veronese_invalid_pair_exits_2(capsys):
    assert run(capsys, "res", "veronese", "--r", "2", "--n", "2")[0] == 2


def test_all_degenerate_experiment_exits_3(capsys, files):
    path = files("fs.json", [XY1, XY1])
    code, out, _ = run(capsys, "toric", "experiment", "--poly", path, "--N", "1", "--samples", "3")
    assert code == 3
    assert json.loads(out)["all_degenerate"] is True


def test_unmet_tolerance_exits_3(capsys, files):
    d = files("d.json", [{"simplex": 2}])
    fs = files("fs.json", [XY1, XY1])
    code, out, _ = run(capsys, "toric", "gualdi", "--divisors", d, "--polys", fs, "--tol", "1e-9", "--budget", "64")
    assert code == 3
    assert json.loads(out)["meets_tol"] is False


def test_toric_height_canonical(capsys, files):
    d = files("d.json", [{"simplex": 2}, {"simplex": 2}, {"simplex": 2}])
    code, out, _ = run(capsys, "toric", "height", "--divisors", d)
    rep = json.loads(out)
    assert code == 0 and rep["exact"] == "0" and rep["error"] == "0"


def test_mahler_torus_methods(capsys, files):
    path = files("p.json", {"groups": [1], "terms": [{"exp": [1], "coef": "2"}, {"exp": [0], "coef": "1"}]})
    code, out, _ = run(capsys, "mahler", "torus", "--poly", path)
    assert code == 0 and json.loads(out)["error_kind"] != "stderr"
    code, out, _ = run(capsys, "mahler", "torus", "--poly", path, "--method", "qmc", "--budget", "1024")
    assert code == 0 and json.loads(out)["error_kind"] == "stderr"


def test_csv_output(capsys):
    code, out, _ = run(capsys, "res", "converge", "--case", "point", "--nmax", "3", "--coords", "2,3", "--out", "csv")
    assert code == 0
    assert len(out.strip().splitlines()) == 4


def test_output_file(capsys, tmp_path):
    target = tmp_path / "r.json"
    code, out, _ = run(capsys, "res", "sylvester", "--n", "2", "--output", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())


def test_worker_count_does_not_change_output(capsys, files):
    path = files("fs.json", [XY1, XY1])
    argv = ["toric", "experiment", "--poly", path, "--N", "7", "--samples", "10", "--seed", "3"]
    a = run(capsys, *argv, "--workers", "1")[1]
    b = run(capsys, *argv, "--workers", "4")[1]
    assert a == b


def test_entry_point_is_byte_deterministic():
    argv = [sys.executable, "-m", "toricheights.cli", "mahler", "bounds", "--seed", "7", "--samples", "20"]
    a = subprocess.run(argv, capture_output=True, check=True).stdout
    b = subprocess.run(argv, capture_output=True, check=True).stdout
    assert a == b and a
