"""End-to-end command-line checks against the bundled example documents."""

import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from conftest import chain3_phi_u, chain3_phi_x

from locrel.cli import main
from locrel.rational import RationalMatrix

DATA = Path(__file__).parent / "data"


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, err = run_cli(capsys, *argv)
    assert code in (0, 2), err
    return code, json.loads(out)


def test_structure_check_corpus(capsys):
    code, doc = run_json(
        capsys, "structure", "check", "--input", str(DATA / "tridiag3.json")
    )
    assert code == 0
    assert doc["structured"] is True
    assert doc["networkRealizable"] is True
    assert doc["tfStructured"] is False


def test_structure_realize_corpus(capsys):
    code, doc = run_json(
        capsys, "structure", "realize", "--input", str(DATA / "chain3_phi_u_realize.json")
    )
    assert code == 0
    assert doc["structure"]["structured"] is True
    assert doc["structure"]["networkRealizable"] is True
    assert np.asarray(doc["system"]["A"]).shape[0] > 0


def test_relative_check_corpus(capsys):
    code, doc = run_json(
        capsys, "relative", "check", "--input", str(DATA / "ring4_relative_row.json")
    )
    assert code == 0
    assert doc == {"relative": True}


def test_relative_decompose_corpus(capsys):
    code, doc = run_json(
        capsys, "relative", "decompose", "--input", str(DATA / "ring4_relative_row.json")
    )
    assert code == 0
    want = [
        [0.0, -1.0, 0.0, -1.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
    ]
    assert np.allclose(doc["m"], want, atol=1e-10)
    assert np.allclose(doc["rowSums"], [-2.0, 1.0, 0.0, 1.0], atol=1e-10)


def test_sls_check_corpus(capsys):
    code, doc = run_json(
        capsys, "sls", "check", "--input", str(DATA / "chain3_plant_controller.json")
    )
    assert code == 0
    assert doc["ok"] is True
    assert doc["affineResidual"] < 1e-8


def test_sls_closed_loops_corpus(capsys):
    code, doc = run_json(
        capsys, "sls", "closed-loops", "--input", str(DATA / "chain3_plant_controller.json")
    )
    assert code == 0
    px = RationalMatrix.from_json(doc["phiX"])
    pu = RationalMatrix.from_json(doc["phiU"])
    for s in (1.0, 2.0 + 1.0j):
        assert np.max(np.abs(px.evaluate(s) - chain3_phi_x().evaluate(s))) < 1e-8
        assert np.max(np.abs(pu.evaluate(s) - chain3_phi_u().evaluate(s))) < 1e-8


def test_sls_recover_corpus(capsys):
    code, doc = run_json(
        capsys, "sls", "recover", "--input", str(DATA / "chain3_closed_loops.json")
    )
    assert code == 0
    K = RationalMatrix.from_json(doc["controller"]["matrix"])
    want = np.array(
        [
            [-9.0, 18.0, -6.0],
            [18.0, -13.0, 12.0],
            [-6.0, 12.0, -4.0],
        ]
    )
    assert np.max(np.abs(23.0 * K.evaluate(1.0) - want)) < 1e-8


def test_sls_implement_corpus(capsys):
    code, doc = run_json(
        capsys, "sls", "implement", "--input", str(DATA / "chain3_closed_loops.json")
    )
    assert code == 0
    assert doc["structure"]["structured"] is True


def test_consensus_feasibility_exit_codes(capsys):
    code, doc = run_json(
        capsys, "consensus", "feasibility", "--n", "8", "--b", "1", "--gamma", "1.0"
    )
    assert code == 2
    assert doc["verdict"] == "Infeasible"
    assert doc["rank"] == 7 and doc["threshold"] == 3
    assert np.allclose(doc["witnessRowSums"], 1.0, atol=1e-8)

    code, doc = run_json(
        capsys,
        "consensus",
        "feasibility",
        "--n",
        "8",
        "--b",
        "3",
        "--measure",
        "lr",
    )
    assert code == 0
    assert doc["verdict"] == "PotentiallyFeasible"


def test_consensus_h2_static(capsys):
    code, doc = run_json(
        capsys, "consensus", "h2", "--n", "4", "--gamma", "1.0"
    )
    assert code == 0
    assert doc["h2Squared"] == pytest.approx(4.625, abs=1e-9)


def test_consensus_h2_approximation(capsys):
    code, doc = run_json(
        capsys,
        "consensus",
        "h2",
        "--n",
        "4",
        "--gamma",
        "1.0",
        "--controller",
        "ka",
        "--a",
        "-10",
    )
    assert code == 0
    assert doc["h2Squared"] == pytest.approx(4.775, abs=1e-9)


def test_consensus_h2_ka_needs_pole(capsys):
    code, out, err = run_cli(
        capsys, "consensus", "h2", "--n", "4", "--controller", "ka"
    )
    assert code == 1
    assert "needs its pole" in err


def test_consensus_gap_demo(capsys):
    code, doc = run_json(
        capsys, "consensus", "gap-demo", "--n", "4", "--b", "1", "--gamma", "1.0"
    )
    assert code == 2
    assert doc["verdict"] == "Infeasible"
    assert doc["h2Values"]["ks"] == pytest.approx(4.625, abs=1e-9)
    assert doc["structureWitnesses"]["kaNetworkRealizable"] is True


def test_spatial_feasibility(capsys):
    code, doc = run_json(
        capsys, "spatial", "feasibility", "--d", "1", "--n", "8", "--b", "1"
    )
    assert code == 2
    assert doc["excludedCount"] == 5

    code, out, err = run_cli(
        capsys, "spatial", "feasibility", "--d", "3", "--n", "3", "--b", "1"
    )
    assert code == 1
    assert "error" in err


def test_spatial_h2_corpus(capsys):
    code, doc = run_json(
        capsys, "spatial", "h2", "--input", str(DATA / "kernel_ring8.json")
    )
    assert code == 0
    assert doc["h2Squared"] == pytest.approx(0.625, abs=1e-12)
    assert doc["parsevalH2Squared"] == pytest.approx(0.625, abs=1e-8)
    assert doc["h2"] == pytest.approx(np.sqrt(0.625), abs=1e-12)


def test_output_is_deterministic(capsys):
    _, out1, _ = run_cli(
        capsys, "consensus", "gap-demo", "--n", "4", "--b", "1", "--gamma", "1.0"
    )
    _, out2, _ = run_cli(
        capsys, "consensus", "gap-demo", "--n", "4", "--b", "1", "--gamma", "1.0"
    )
    assert out1 == out2


def test_csv_output(capsys):
    code, out, err = run_cli(
        capsys,
        "consensus",
        "h2",
        "--n",
        "4",
        "--gamma",
        "1.0",
        "--output",
        "csv",
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "key,value"
    key, value = lines[1].split(",")
    assert key == "h2Squared"
    assert float(value) == pytest.approx(4.625, abs=1e-9)


def test_flags_before_and_after_action_word(capsys):
    path = str(DATA / "ring4_relative_row.json")
    _, doc1 = run_json(capsys, "relative", "--input", path, "check")
    _, doc2 = run_json(capsys, "relative", "check", "--input", path)
    assert doc1 == doc2 == {"relative": True}


def test_stdin_input(capsys, monkeypatch):
    doc = {"gain": [1.0, -2.0, 1.0]}
    monkeypatch.setattr(sys, "stdin", io.StringIO(json.dumps(doc)))
    code, out = run_json(capsys, "relative", "check", "--input", "-")
    assert out == {"relative": True}


def test_missing_input_is_an_error(capsys):
    code, out, err = run_cli(capsys, "structure", "check")
    assert code == 1
    assert "needs --input" in err


def test_unreadable_input_is_an_error(capsys):
    code, out, err = run_cli(capsys, "structure", "check", "--input", "no-such.json")
    assert code == 1
    assert "error" in err


def test_unknown_action_exits_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["structure", "destroy"])
    assert exc.value.code == 1


def test_module_entry_point():
    result = subprocess.run(
        [sys.executable, "-m", "locrel.cli", "consensus", "h2", "--n", "4", "--gamma", "1"],
        capture_output=True,
        text=True,
        cwd=str(Path(__file__).parent.parent),
    )
    assert result.returncode == 0
    assert json.loads(result.stdout)["h2Squared"] == pytest.approx(4.625, abs=1e-9)
