import io as _io
import json

import numpy as np
import pytest
from scipy.stats import norm

from kacrice import io
from kacrice.cli import main
from kacrice.errors import InputError
from kacrice.model import GroupLasso, MaskOp


def run(argv):
    buf = _io.StringIO()
    code = main(argv, out=buf)
    out = dict(line.split("=", 1) for line in buf.getvalue().splitlines())
    return code, out


@pytest.fixture
def files(tmp_path):
    np.savetxt(tmp_path / "X.csv", np.eye(2), delimiter=",")
    np.savetxt(tmp_path / "y.csv", [2.0, 1.0])
    np.savetxt(tmp_path / "Y.txt", np.diag([3.0, 1.0]))
    return tmp_path


def test_pivot_lasso(files):
    code, out = run(["pivot", "--penalty", "lasso", "--design", str(files / "X.csv"),
                     "--response", str(files / "y.csv"), "--sigma", "I"])
    assert code == 0
    assert float(out["p_value"]) == pytest.approx(norm.sf(2) / norm.sf(1), rel=1e-12)
    assert float(out["lambda1"]) == 2.0 and out["v_plus"] == "inf"


def test_interval(files):
    code, out = run(["interval", "--alpha", "0.1", "--penalty", "lasso", "--design", str(files / "X.csv"),
                     "--response", str(files / "y.csv")])
    assert code == 0 and float(out["lo"]) <= float(out["hi"])


def test_vbounds_nuclear(files):
    code, out = run(["vbounds", "--penalty", "nuclear", "--response", str(files / "Y.txt"),
                     "--method", "admm", "--tol", "1e-9"])
    assert code == 0
    assert float(out["v_minus"]) == pytest.approx(1.0, abs=1e-6) and out["v_plus"] == "inf"
    assert int(out["iterations"]) > 0


def test_group_with_labels(tmp_path):
    rng = np.random.default_rng(0)
    np.savetxt(tmp_path / "X.csv", rng.standard_normal((6, 4)), delimiter=",")
    np.savetxt(tmp_path / "y.csv", rng.standard_normal(6))
    np.savetxt(tmp_path / "g.txt", [0, 0, 1, 1], fmt="%d")
    code, out = run(["pivot", "--penalty", "group", "--design", str(tmp_path / "X.csv"),
                     "--response", str(tmp_path / "y.csv"), "--groups", str(tmp_path / "g.txt")])
    assert code == 0 and 0 <= float(out["p_value"]) <= 1


def test_mask_operator(tmp_path):
    rng = np.random.default_rng(1)
    mask = (rng.random((5, 3)) < 0.8).astype(int)
    mask[0, 0] = 1
    np.savetxt(tmp_path / "M.csv", mask, fmt="%d", delimiter=",")
    np.savetxt(tmp_path / "Y.csv", mask * rng.standard_normal((5, 3)), delimiter=",")
    code, out = run(["pivot", "--penalty", "nuclear", "--op", "mask", "--mask-file", str(tmp_path / "M.csv"),
                     "--response", str(tmp_path / "Y.csv")])
    assert code == 0 and 0 <= float(out["p_value"]) <= 1


def test_simulate_deterministic_csv(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["simulate", "--scenario", "lasso-small", "--reps", "100", "--seed", "7", "--out"]
    assert run(argv + [str(a)])[0] == 0
    assert run(argv + [str(b), "--threads", "3"])[0] == 0
    assert a.read_bytes() == b.read_bytes()
    header = a.read_text().splitlines()[0]
    assert header == "replicate,p_value,lambda1,v_minus,v_plus,sigma2"
    assert len(a.read_text().splitlines()) == 101


def test_coverage_command(tmp_path):
    code, out = run(["coverage", "--scenario", "lasso-small", "--reps", "50", "--seed", "1",
                     "--out", str(tmp_path / "c.csv")])
    assert code == 0 and 0 <= float(out["coverage"]) <= 1


def test_exit_codes(files):
    assert main(["pivot", "--penalty", "lasso", "--design", str(files / "X.csv"),
                 "--response", str(files / "Y.txt")], out=_io.StringIO()) == 2
    assert main(["simulate", "--scenario", "nope"], out=_io.StringIO()) == 2
    assert main(["pivot", "--penalty", "lasso", "--design", str(files / "missing.csv"),
                 "--response", str(files / "y.csv")], out=_io.StringIO()) == 2
    assert main(["bogus"], out=_io.StringIO()) == 2


def test_numerical_failure_exit_code(files, monkeypatch):
    from kacrice import cli
    from kacrice.errors import NonMonotone

    def boom(problem, method="dual"):
        raise NonMonotone("forced")

    monkeypatch.setattr(cli, "fit", boom)
    assert main(["pivot", "--penalty", "lasso", "--design", str(files / "X.csv"),
                 "--response", str(files / "y.csv")], out=_io.StringIO()) == 3


# ---------------------------------------------------------------------------
# io


def test_read_matrix_delimiters(tmp_path):
    f = tmp_path / "m.txt"
    f.write_text("1,2;3\n4\t5  6\n")
    assert np.array_equal(io.read_matrix(f), [[1, 2, 3], [4, 5, 6]])


def test_read_matrix_errors(tmp_path):
    f = tmp_path / "bad.txt"
    f.write_text("1,2\n3\n")
    with pytest.raises(InputError):
        io.read_matrix(f)
    f.write_text("1,a\n")
    with pytest.raises(InputError):
        io.read_matrix(f)
    with pytest.raises(InputError):
        io.read_vector(tmp_path / "nope.txt")


def test_penalty_config(tmp_path):
    f = tmp_path / "pen.json"
    f.write_text(json.dumps({"kind": "group", "groups": [[0, 1], [2]], "weights": [1.0, 2.0]}))
    pen, op = io.read_penalty_config(f)
    assert isinstance(pen, GroupLasso) and op is None and np.allclose(pen.weights, [1, 2])
    f.write_text(json.dumps({"kind": "nuclear", "op_kind": "mask", "shape": [2, 2], "mask": [[0, 0], [1, 1]]}))
    pen, op = io.read_penalty_config(f)
    assert isinstance(op, MaskOp) and op.mask.sum() == 2
    f.write_text(json.dumps({"kind": "ridge"}))
    with pytest.raises(InputError):
        io.read_penalty_config(f)


def test_config_on_command_line(tmp_path, files):
    cfg = tmp_path / "pen.json"
    cfg.write_text(json.dumps({"kind": "group", "groups": [[0], [1]], "weights": [1.0, 1.0]}))
    code, out = run(["pivot", "--config", str(cfg), "--design", str(files / "X.csv"),
                     "--response", str(files / "y.csv")])
    assert code == 0
    assert float(out["p_value"]) == pytest.approx(norm.sf(2) / norm.sf(1), rel=1e-10)
