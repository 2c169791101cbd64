import io
import json
import re
from pathlib import Path

import pytest

from qx import corpus
from qx.cli import EXIT_INPUT, EXIT_LIMIT, EXIT_OK, EXIT_VERIFY, run_cli

INVALID = sorted((Path(__file__).parent / "invalid").glob("*.qc"))

GHZ_NAMED = {"ghz": [[0.7071067811865476, 0], [0, 0], [0, 0], [0, 0], [0, 0], [0, 0], [0, 0], [0.7071067811865476, 0]]}


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run_cli([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def test_parse_emits_canonical_ir():
    code, out, _ = cli("parse", corpus.path("src"))
    assert code == EXIT_OK
    doc = json.loads(out)
    assert list(doc) == sorted(doc)
    assert doc["wire_count"] == 3 and [d["name"] for d in doc["defs"]] == ["SRC"]


def test_parse_accepts_serialized_ir(tmp_path):
    _, ir_text, _ = cli("parse", corpus.path("shor"))
    f = tmp_path / "shor.json"
    f.write_text(ir_text)
    code, again, _ = cli("parse", f)
    assert code == EXIT_OK and again == ir_text


def test_run_outputs_ket_expression():
    assert cli("run", corpus.path("fig1")) == (EXIT_OK, "0.6|00> + 0.8|11>\n", "")
    code, out, _ = cli("run", corpus.path("shor"), "--policy", "block")
    assert out.strip() == "0.6|psi+>|psi+>|psi+> + 0.8|psi->|psi->|psi->"


def test_run_precision_and_json():
    _, out, _ = cli("run", corpus.path("src"), "--precision", "3")
    assert out.strip() == "0.99|000> - 0.141|111>"
    _, out, _ = cli("run", corpus.path("fig1"), "--format", "json")
    doc = json.loads(out)
    assert doc["wire_count"] == 2 and [t["kets"] for t in doc["terms"]] == ["|00>", "|11>"]


def test_expand_and_render():
    code, out, _ = cli("expand", corpus.path("fig1"))
    assert code == EXIT_OK and out.count("subgraph ") == 2 and out.endswith("= 0.6|00> + 0.8|11>\n")
    code, out, _ = cli("render", corpus.path("damping"))
    assert code == EXIT_OK and "[RY(1.047)]" in out
    code, out, _ = cli("expand", corpus.path("src"), "--policy", "block", "--format", "json")
    assert code == EXIT_OK and len(json.loads(out)["branches"]) == 2


@pytest.mark.parametrize("name", corpus.NAMES)
@pytest.mark.parametrize("policy", ["split", "block"])
def test_verify_corpus(name, policy):
    code, out, _ = cli("verify", corpus.path(name), "--policy", policy)
    doc = json.loads(out)
    assert code == EXIT_OK
    assert list(doc) == ["fidelity", "branch_count", "policy", "pass"]
    assert doc["pass"] is True and doc["policy"] == policy and doc["fidelity"] >= 1 - 1e-9


def test_verify_failure_exit_code():
    # aggressive pruning throws away the 0.6 branch
    code, out, err = cli("verify", corpus.path("fig1"), "--prune", "0.7")
    assert code == EXIT_VERIFY
    assert json.loads(out)["pass"] is False
    assert "verification failed" in err


def test_branch_budget_exit_code():
    code, out, err = cli("run", corpus.path("shor"), "--max-branches", "4")
    assert code == EXIT_LIMIT and out == "" and "exceed" in err


def test_qubit_limit_exit_code(tmp_path):
    f = tmp_path / "big.qc"
    f.write_text("qubits 21\n")
    code, _, err = cli("verify", f)
    assert code == EXIT_LIMIT and "20 qubits" in err
    assert cli("run", f)[0] == EXIT_OK


@pytest.mark.parametrize("path", INVALID, ids=lambda p: p.stem)
@pytest.mark.parametrize("command", ["parse", "verify"])
def test_invalid_inputs_report_line(path, command):
    code, out, err = cli(command, path)
    assert code == EXIT_INPUT and out == ""
    m = re.match(rf"{re.escape(str(path))}:(\d+):(\d+): error: \S", err)
    assert m, err
    assert 1 <= int(m.group(1)) <= len(path.read_text().splitlines())


def test_invalid_corpus_size():
    assert len(INVALID) >= 8


def test_missing_file_and_bad_arguments(tmp_path):
    code, _, err = cli("run", tmp_path / "nope.qc")
    assert code == EXIT_INPUT and "cannot read" in err
    assert cli("run", corpus.path("fig1"), "--tol", "-1")[0] == EXIT_INPUT
    assert cli("run", corpus.path("fig1"), "--precision", "0")[0] == EXIT_INPUT
    assert cli("explode", corpus.path("fig1"))[0] == EXIT_INPUT


def _ghz(tmp_path):
    states = tmp_path / "states.json"
    states.write_text(json.dumps(GHZ_NAMED))
    qc = tmp_path / "ghz.qc"
    qc.write_text("qubits 3\ngate H q0\ngate CNOT q0 q1\ngate CNOT q0 q2\n")
    return states, qc


def test_states_flag(tmp_path):
    states, qc = _ghz(tmp_path)
    assert cli("run", qc, "--policy", "block", "--states", states)[1].strip() == "|ghz>"
    assert "ghz" not in cli("run", qc, "--policy", "block")[1]


def test_states_env_and_override(tmp_path, monkeypatch):
    states, qc = _ghz(tmp_path)
    monkeypatch.setenv("QX_STATES", str(states))
    assert cli("run", qc, "--policy", "block")[1].strip() == "|ghz>"
    other = tmp_path / "other.json"
    other.write_text(json.dumps({"cat": GHZ_NAMED["ghz"]}))
    assert cli("run", qc, "--policy", "block", "--states", other)[1].strip() == "|cat>"


def test_states_usable_in_dsl(tmp_path):
    states = tmp_path / "states.json"
    states.write_text(json.dumps({"r": [[0.6, 0], [0.8, 0]]}))
    qc = tmp_path / "r.qc"
    qc.write_text("qubits 1\nstate q0 = |r>\n")
    assert cli("run", qc, "--states", states)[1].strip() == "|r>"
    code, _, err = cli("run", qc)
    assert code == EXIT_INPUT and ":2:" in err


@pytest.mark.parametrize("bad", ['{"x": [1, 0]}', '{"x": [[0.6, 0], [0.6, 0]]}', '{"0": [[1, 0], [0, 0]]}', "[]"])
def test_bad_states_file(tmp_path, bad):
    f = tmp_path / "s.json"
    f.write_text(bad)
    code, _, err = cli("run", corpus.path("fig1"), "--states", f)
    assert code == EXIT_INPUT and "named states" in err


@pytest.mark.parametrize("command", ["parse", "run", "expand", "verify", "render"])
@pytest.mark.parametrize("fmt", ["text", "json"])
def test_repeat_runs_identical(command, fmt):
    runs = [cli(command, corpus.path("shor"), "--policy", "block", "--format", fmt) for _ in range(3)]
    assert runs[0] == runs[1] == runs[2]
