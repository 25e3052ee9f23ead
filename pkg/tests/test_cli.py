import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from realgit.cli import EXIT_CAP, EXIT_NONCONVERGED, EXIT_OK, EXIT_VALIDATION, REPORT_FORMAT, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out else None), out.err


def test_analyze_r2_axis(capsys):
    code, rep, _ = run(capsys, "analyze", "--action", "scaling-r2", "--vector", "1,0")
    assert code == EXIT_OK
    res = rep["results"]
    assert res["null_cone"] is True
    assert res["torus"]["null_cone"] is True and res["torus"]["orbit_closed"] is False
    # label norm equals the norm of the weight of e_1 (torus coordinates)
    assert abs(res["stratum_label"]["norm"] - np.sqrt(0.5)) < 1e-9
    assert res["null_cone_agrees_with_label"]
    assert rep["format"] == REPORT_FORMAT and rep["settings"]["seed"] == 0


def test_analyze_sl2_e12(capsys):
    code, rep, _ = run(capsys, "analyze", "--action", "sl-conj:2", "--vector", "0,1,0,0")
    assert code == EXIT_OK
    res = rep["results"]
    assert abs(res["stratum_label"]["norm"] - np.sqrt(2)) < 1e-12
    assert res["minimal_vector_descent"]["status"] == "null"
    assert "torus" not in res


def test_analyze_sl2_normal(capsys):
    code, rep, _ = run(capsys, "analyze", "--action", "sl-conj:2", "--vector", "1,0,0,-1")
    assert code == EXIT_OK
    d = rep["results"]["minimal_vector_descent"]
    assert d["status"] == "semistable"
    np.testing.assert_allclose(d["vector"], [1, 0, 0, -1], atol=1e-12)
    assert rep["results"]["stratum_label"]["norm"] < 1e-12


def test_analyze_vector_file_and_out(capsys, tmp_path):
    vf = tmp_path / "v.txt"
    vf.write_text("1\n2\n")
    out = tmp_path / "r.json"
    code, rep, _ = run(capsys, "analyze", "--action", "scaling-r2", "--vector", str(vf), "--out", str(out))
    assert code == EXIT_OK and rep is None
    rep = json.loads(out.read_text())
    np.testing.assert_allclose(rep["results"]["torus"]["minimal_vector"], [np.sqrt(2), np.sqrt(2)], atol=1e-10)
    vf.write_text("1, 2\n")
    code, rep2, _ = run(capsys, "analyze", "--action", "scaling-r2", "--vector", str(vf))
    assert rep2["results"] == rep["results"]


def test_flow_trace(capsys, tmp_path):
    trace = tmp_path / "t.csv"
    code, rep, _ = run(capsys, "flow", "--action", "scaling-r2", "--vector", "1,2", "--trace", str(trace))
    assert code == EXIT_OK and rep["results"]["converged"]
    rows = list(csv.reader(trace.open()))
    assert rows[0][:4] == ["step", "time", "energy", "grad_norm"]
    assert float(rows[-1][2]) < 1e-12
    np.testing.assert_allclose(rep["results"]["limit"], [np.sqrt(0.5)] * 2, atol=1e-8)


def test_flow_critical_start_one_row(capsys, tmp_path):
    trace = tmp_path / "t.csv"
    code, rep, _ = run(capsys, "flow", "--action", "sl-conj:2", "--vector", "0,1,0,0", "--trace", str(trace))
    assert code == EXIT_OK
    assert len(list(csv.reader(trace.open()))) == 2  # header + one row


def test_flow_step_cap_exit(capsys):
    code, rep, _ = run(capsys, "flow", "--action", "sl-conj:3", "--vector", "1,2,0,0,1,3,1,0,-2", "--max-steps", "10")
    assert code == EXIT_NONCONVERGED
    assert rep["results"]["converged"] is False and rep["results"]["gradient_residual"] > 1e-10


def test_labels_sl2(capsys):
    code, rep, _ = run(capsys, "labels", "--action", "sl-conj:2", "--samples", "100")
    assert code == EXIT_OK
    cands = rep["results"]["candidates"]
    assert [round(c["norm"] ** 2, 9) for c in cands] == [0, 2]
    assert all(c["hits"] > 0 for c in cands) and sum(c["hits"] for c in cands) == 100
    assert rep["results"]["agreement"]


def test_labels_trivial(capsys):
    code, rep, _ = run(capsys, "labels", "--action", "trivial:3", "--samples", "5")
    assert code == EXIT_OK
    assert len(rep["results"]["candidates"]) == 1 and rep["results"]["candidates"][0]["norm"] == 0


def test_labels_sl3_census(capsys):
    code, rep, _ = run(capsys, "labels", "--action", "sl-conj:3", "--samples", "40", "--seed", "7")
    assert code == EXIT_OK
    res = rep["results"]
    assert res["agreement"] and res["census_count"] == res["realized_count"] == 3
    assert rep["settings"]["seed"] == 7


def test_determinism(capsys):
    argv = ["labels", "--action", "sl-conj:2", "--samples", "20", "--seed", "3"]
    main(argv)
    a = capsys.readouterr().out
    main(argv)
    b = capsys.readouterr().out
    assert a == b


@pytest.mark.parametrize(
    "argv",
    [
        ["analyze", "--action", "nope", "--vector", "1,0"],
        ["analyze", "--action", "scaling-r2", "--vector", "1,0,3"],
        ["analyze", "--action", "scaling-r2", "--vector", "1,x"],
        ["analyze", "--action", "scaling-r2", "--vector", "0,0"],
        ["analyze", "--action", "scaling-r2", "--vector", "1,nan"],
        ["flow", "--action", "sl-conj:9", "--vector", "1"],
    ],
)
def test_validation_exit(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_VALIDATION and err.startswith("error:")


def test_bad_spec_file(capsys, tmp_path):
    spec = tmp_path / "a.json"
    spec.write_text('{"dim_v": 2, "generators": [[1, 1, 0, 1]]}')  # not transpose-closed
    code, _, err = run(capsys, "analyze", "--action", str(spec), "--vector", "1,0")
    assert code == EXIT_VALIDATION


def big_torus_spec(tmp_path, n=23):
    spec = tmp_path / "big.json"
    gen = np.diag(np.arange(1, n + 1) - 12.0)
    spec.write_text(json.dumps({"dim_v": n, "generators": [gen.ravel().tolist()], "name": "big-torus"}))
    return spec


def test_cap_exit_and_supports(capsys, tmp_path):
    spec = big_torus_spec(tmp_path)
    code, _, err = run(capsys, "labels", "--action", str(spec))
    assert code == EXIT_CAP and "--supports" in err
    sup = tmp_path / "s.json"
    # [11] has weight 0 (label 0 again); [3, 4] fails the active-set filter
    sup.write_text(json.dumps([[0, 22], [11], [3, 4], [5]]))
    code, rep, _ = run(capsys, "labels", "--action", str(spec), "--supports", str(sup))
    assert code == EXIT_OK
    assert len(rep["results"]["candidates"]) == 2
    assert rep["results"]["unconfirmed_subsets"] == 1
    v = ",".join(["1"] + ["0"] * 21 + ["1"])
    code, _, err = run(capsys, "analyze", "--action", str(spec), "--vector", v)
    assert code == EXIT_CAP
    code, rep, _ = run(capsys, "analyze", "--action", str(spec), "--vector", v, "--supports", str(sup))
    assert code == EXIT_OK and rep["results"]["torus"]["null_cone"] is False


def test_json_spec_file(capsys, tmp_path):
    spec = tmp_path / "r2.json"
    spec.write_text(json.dumps({"dim_v": 2, "generators": [[1, 0, 0, -1]], "name": "r2-file"}))
    code, rep, _ = run(capsys, "analyze", "--action", str(spec), "--vector", "1,1")
    assert code == EXIT_OK and rep["action"]["name"] == "r2-file"
    assert rep["results"]["minimal_vector_descent"]["status"] == "semistable"


def test_module_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "realgit", "analyze", "--action", "scaling-r2", "--vector", "1,1"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert out.returncode == 0
    assert json.loads(out.stdout)["results"]["null_cone"] is False
