import io
import json

import pytest
from mpmath import mpf

from inerter_iep.cli import EXIT_FAILED, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, main


def _run(capsys, argv, stdin=None, monkeypatch=None):
    if stdin is not None:
        monkeypatch.setattr("sys.stdin", io.StringIO(stdin))
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def _write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(path)


def test_feasible_exit_codes(tmp_path, capsys):
    ok = _write(tmp_path, "ok.json", {"lambdas": ["1", "2", "3"], "mults": [1, 1, 3]})
    code, out, _ = _run(capsys, ["feasible", ok])
    assert code == EXIT_OK and json.loads(out) == {"feasible": True, "violations": []}
    bad = _write(tmp_path, "bad.json", {"lambdas": ["1"], "mults": [2]})
    code, out, _ = _run(capsys, ["feasible", bad])
    assert code == EXIT_INFEASIBLE and json.loads(out)["violations"] == [{"index": 1, "mult": 2, "limit": 1}]


def test_synth_then_analyze_round_trip(tmp_path, capsys):
    spec = _write(tmp_path, "spec.json", {"lambdas": ["0.5", "2", "3.25"], "mults": [1, 2, 2]})
    out_path = tmp_path / "chain.json"
    csv_path = tmp_path / "trace.csv"
    code, _, _ = _run(capsys, ["synth", spec, "-o", str(out_path), "--csv", str(csv_path)])
    assert code == EXIT_OK
    result = json.loads(out_path.read_text())
    assert result["verified"] is True and result["mode"] == "adaptive"
    assert result["pinned_indices"] == [1, 4, 5]
    assert csv_path.read_text().startswith("j,strategy,lambda_star,b,m,mu_over_nu")
    code, out, _ = _run(capsys, ["analyze", str(out_path), "--cluster-tol", "1e-12"])
    assert code == EXIT_OK
    rep = json.loads(out)
    assert rep["multiplicities"] == [1, 2, 2]
    for got, want in zip(rep["eigenvalues"], ["0.5", "2", "3.25"]):
        assert abs(mpf(got) - mpf(want)) < mpf(10) ** -20
    code, out, _ = _run(capsys, ["verify", str(out_path)])
    assert code == EXIT_OK and json.loads(out)["all_green"] is True


def test_synth_is_deterministic(tmp_path, capsys):
    spec = _write(tmp_path, "spec.json", {"lambdas": ["1", "4"], "mults": [1, 2], "pinned_masses": ["2", "3"]})
    first = _run(capsys, ["synth", spec])[1]
    second = _run(capsys, ["synth", spec])[1]
    assert first == second
    chain = json.loads(first)["chain"]
    assert chain["m"][0] == "2.0" and chain["m"][2] == "3.0"


def test_stdin_and_float64(capsys, monkeypatch):
    code, out, _ = _run(capsys, ["analyze", "--float64"], json.dumps(
        {"n": 2, "m": ["1", "1"], "k": ["1", "1"], "b": ["0", "0"]}), monkeypatch)
    assert code == EXIT_OK
    eig = json.loads(out)["eigenvalues"]
    assert isinstance(eig[0], float) and abs(eig[0] - 0.3819660112501051) < 1e-15


def test_verify_reports_failure(tmp_path, capsys):
    doc = {"chain": {"n": 2, "m": ["1", "1"], "k": ["1", "1"], "b": ["0", "0"]},
           "spectrum": {"lambdas": ["1", "2"], "mults": [1, 1]}}
    code, out, _ = _run(capsys, ["verify", _write(tmp_path, "v.json", doc)])
    assert code == EXIT_FAILED and json.loads(out)["all_green"] is False


@pytest.mark.parametrize("command,body,needle", [
    ("analyze", "{not json", "1:2"),
    ("analyze", {"n": 2, "m": ["1", "1"], "k": ["1", "-1"], "b": ["0", "0"]}, "k"),
    ("feasible", {"lambdas": ["1", "x"], "mults": [1, 1]}, "spectrum.lambdas[1]"),
    ("verify", {"chain": {}}, "verify"),
    ("bound5", {"n": 1, "m": ["1"], "k": ["1"], "b": ["0"], "lambdas": ["1", "2", "3"]}, "n=5"),
])
def test_malformed_input_exits_one(tmp_path, capsys, command, body, needle):
    code, _, err = _run(capsys, [command, _write(tmp_path, "in.json", body)])
    assert code == EXIT_INPUT
    assert needle in err


def test_missing_file_exits_one(capsys):
    code, _, err = _run(capsys, ["analyze", "/nonexistent/chain.json"])
    assert code == EXIT_INPUT and err.startswith("error:")


def test_fuzz_and_bound5(tmp_path, capsys):
    code, out, _ = _run(capsys, ["fuzz", "--trials", "200", "--seed", "3", "--n-max", "5"])
    summary = json.loads(out)
    assert code == EXIT_OK and summary["violations"] == 0 and summary["trials"] == 200
    spec = _write(tmp_path, "five.json", {"lambdas": ["1", "2", "3"], "mults": [1, 1, 3]})
    synth_out = tmp_path / "five_chain.json"
    assert _run(capsys, ["synth", spec, "-o", str(synth_out)])[0] == EXIT_OK
    code, out, _ = _run(capsys, ["bound5", str(synth_out)])
    assert code == EXIT_OK and json.loads(out)["holds"] is True
