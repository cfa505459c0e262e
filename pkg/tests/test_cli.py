import json
import subprocess
import sys

import numpy as np
import pytest

from atomrec.cli import main
from atomrec.io import parse_array, parse_set_spec, read_matrix_csv, set_spec_string, write_matrix_csv


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_norm(capsys):
    code, out, _ = _run(capsys, "norm", "--set", "canonical:2", "--z", "3,-4")
    assert code == 0 and float(out) == 7
    code, out, _ = _run(capsys, "norm", "--set", "rank1:2x2", "--z", "3,0;0,1")
    assert float(out) == pytest.approx(4)


def test_tail_and_solve(capsys):
    code, out, _ = _run(capsys, "tail", "--set", "rank1:2x2", "--z", "3,0;0,1", "--s", "1")
    assert json.loads(out)["tail"] == pytest.approx(1)
    code, out, _ = _run(capsys, "solve", "--set", "canonical:3", "--null", "1,1,-1", "--y", "2,0")
    rep = json.loads(out)
    assert code == 0 and rep["converged"]


def test_solve_with_matrix_file(tmp_path, capsys):
    path = tmp_path / "A.csv"
    write_matrix_csv(path, np.array([[1.0, 0, 1], [0, 1, 1]]))
    code, out, _ = _run(capsys, "solve", "--set", "canonical:3", "--A", str(path), "--y", "2,0")
    assert code == 0 and np.allclose(json.loads(out)["z_hat"], [2, 0, 0], atol=1e-9)


def test_certify(capsys):
    code, out, _ = _run(capsys, "certify", "--set", "canonical:3", "--null", "1,1,1", "--s", "1",
                        "--kind", "strong")
    doc = json.loads(out)
    assert doc["holds"] and doc["constants"]["c"] == pytest.approx(1 / np.sqrt(3))
    code, out, _ = _run(capsys, "certify", "--set", "canonical:3", "--null", "1,1,1", "--s", "1")
    assert json.loads(out)["constants"]["rho"] == pytest.approx(0.5)


def test_width(capsys):
    code, out, _ = _run(capsys, "width", "--set", "canonical:2", "--samples", "2000")
    assert json.loads(out)["mean"] == pytest.approx(np.sqrt(np.pi / 2), abs=0.05)


def test_phase_writes_files(tmp_path, capsys):
    out = tmp_path / "grid"
    code, stdout, _ = _run(capsys, "phase", "--set", "canonical:6", "--s", "1:2", "--m", "3,6",
                           "--trials", "2", "--out", str(out))
    assert code == 0
    files = stdout.split()
    assert files == [str(out) + ".csv", str(out) + ".json"]
    assert open(files[0]).read().count("\n") == 9


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "v.cfg"
    cfg.write_text("atoms = canonical:3\nnull_space = 1,1,1\ns = 1\ntrials = 4\neps = 0.01\n"
                   "signal = compressible\ntau_samples = 300\n")
    code, stdout, _ = _run(capsys, "verify-bounds", "--config", str(cfg), "--trials", "3",
                           "--out", str(tmp_path / "v"), "--format", "json")
    assert code == 0
    doc = json.loads(open(stdout.strip()).read())
    assert len(doc["records"]) == 3 and doc["kind"] == "verify"


def test_exit_codes(tmp_path, capsys):
    # configuration error
    assert _run(capsys, "phase", "--config", str(tmp_path / "missing.cfg"))[0] == 2
    assert _run(capsys, "norm", "--set", "simplex:3", "--z", "1,2,3")[0] == 2
    assert _run(capsys, "norm", "--set", "canonical:3", "--z", "1,2")[0] == 2
    # refused experiment
    code, _, err = _run(capsys, "min-measure", "--set", "canonical:16", "--s", "2", "--m", "4",
                        "--out", str(tmp_path / "r"))
    assert code == 3 and "refused" in err
    code, _, _ = _run(capsys, "verify-bounds", "--set", "rank1:2x2", "--m", "3", "--s", "1",
                      "--trials", "2", "--out", str(tmp_path / "obs"))
    assert code == 3
    # infeasible equality system
    assert _run(capsys, "solve", "--set", "canonical:2", "--null", "0,1", "--y", "1")[0] == 0
    code = _run(capsys, "solve", "--set", "canonical:2", "--A", _write(tmp_path, [[1, 0], [1, 0]]),
                "--y", "1,2")[0]
    assert code == 3
    # solver failure budget
    cfg = tmp_path / "b.cfg"
    cfg.write_text("atoms = canonical:10\nm = 5\ns = 2\ntrials = 5\nmax_iter = 2\neps = 0.1\n")
    assert _run(capsys, "phase", "--config", str(cfg), "--out", str(tmp_path / "b"))[0] == 4


def _write(tmp_path, M):
    p = tmp_path / "M.csv"
    write_matrix_csv(p, np.array(M, dtype=float))
    return str(p)


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "atomrec", "norm", "--set", "canonical:2", "--z", "1,-1"],
                         capture_output=True, text=True, check=True).stdout
    assert float(out) == 2


# ---------------------------------------------------------------- io helpers


def test_matrix_csv_round_trip(tmp_path):
    M = np.random.default_rng(0).standard_normal((3, 4))
    p = tmp_path / "m.csv"
    write_matrix_csv(p, M)
    assert np.array_equal(read_matrix_csv(str(p)), M)


def test_parse_array_and_set_specs(tmp_path):
    assert np.array_equal(parse_array("3,-4"), [3, -4])
    assert parse_array("1,0;0,1").shape == (2, 2)
    F = np.array([[1.0, 0, 1], [0, 1, 1]])
    write_matrix_csv(tmp_path / "F.csv", F)
    fr = parse_set_spec("frame:F.csv", base_dir=str(tmp_path))
    assert fr.n_atoms == 3 and set_spec_string(fr) == "frame:F.csv"
    for spec in ("canonical:5", "rank1:2x3", "frame:ring8"):
        assert set_spec_string(parse_set_spec(spec)) == spec
