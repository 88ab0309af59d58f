import csv
import json

import pytest

from cvqms.cli import EXIT_CONFIG, EXIT_OK, EXIT_VIOLATION, main


def test_catalog(capsys):
    assert main(["catalog"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "qou" in out and "cnot" in out


def test_certify_writes_report(tmp_path):
    rc = main(["certify", "--model", "qou", "--lambda", "1.4142", "--mu", "1", "--k", "1,2",
               "--out", str(tmp_path)])
    assert rc == EXIT_OK
    doc = json.loads((tmp_path / "certificate.json").read_text())
    assert [r["verdict"] for r in doc["reports"]] == ["certified", "certified"]
    assert doc["reports"][0]["tight"]["c_star"] >= doc["reports"][0]["spec"]["c"]


def test_certify_tight_form(tmp_path):
    rc = main(["certify", "--model", "l_photon", "--l", "2", "--alpha", "1", "--k", "2", "--form", "tight",
               "--c", "0.5", "--out", str(tmp_path)])
    assert rc == EXIT_OK


def test_simulate_csv(tmp_path):
    rc = main(["simulate", "--model", "pure_loss", "--cutoff", "12", "--t-final", "1", "--dt-sample", "0.25",
               "--state", "fock:2", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    rows = list(csv.reader((tmp_path / "trace.csv").open()))
    assert rows[0] == ["t", "trace", "min_eig", "leakage", "W_2", "V_0"]
    assert len(rows) == 6
    assert abs(float(rows[-1][1]) - 1) < 1e-9
    run = json.loads((tmp_path / "run.json").read_text())
    assert run["model"] == "pure_loss"


def test_config_file_and_override(tmp_path):
    cfg = {"schema": 1, "command": "lemmas", "options": {"trials": 50}, "seed": 4}
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    rc = main(["lemmas", "--config", str(path), "--seed", "5", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    doc = json.loads((tmp_path / "lemmas.json").read_text())
    assert doc["trials"] == 50 and doc["seed"] == 5


@pytest.mark.parametrize("cfg", [{"schema": 2}, {"command": "simulate"}, {"bogus": 1}])
def test_bad_config(tmp_path, cfg):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert main(["lemmas", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_bad_arguments(tmp_path):
    assert main(["simulate", "--model", "nope"]) == EXIT_CONFIG
    assert main(["simulate", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["lemmas", "--set", "novalue", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_perturb_qou(tmp_path):
    rc = main(["perturb", "--kind", "qou", "--eps", "0.01,0.001", "--t", "1", "--cutoff", "30",
               "--out", str(tmp_path)])
    assert rc in (EXIT_OK, EXIT_VIOLATION)
    doc = json.loads((tmp_path / "perturbation.json").read_text())
    assert doc["passed"] == (rc == EXIT_OK)
    assert rc == EXIT_OK


def test_ec_norm(tmp_path):
    rc = main(["ec-norm", "--eps", "0.05", "--E", "1", "--cutoff", "10", "--probes", "4", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    doc = json.loads((tmp_path / "ec_norm.json").read_text())
    assert doc["lower_bound"] > 0


def test_certify_cnot_multimode_order(tmp_path):
    rc = main(["certify", "--model", "cnot", "--alpha", "1", "--eps", "0.5", "--T", "2", "--cutoff", "20,20",
               "--k", "2:2", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    doc = json.loads((tmp_path / "certificate.json").read_text())
    assert doc["reports"][0]["spec"]["k"] == [2.0, 2.0]
    assert {r["verdict"] for r in doc["reports"]} == {"certified"}


def test_bad_number(tmp_path):
    assert main(["certify", "--model", "qou", "--lambda", "2", "--mu", "1", "--k", "two",
                 "--out", str(tmp_path)]) == EXIT_CONFIG


def test_hamiltonian_rows(tmp_path):
    rows = "hamiltonian=[[1,0,1,0,0],[1,0,0,0,1]]"
    assert main(["certify", "--model", "l_photon_plus_hamiltonian", "--alpha", "1", "--set", rows, "--k", "2",
                 "--out", str(tmp_path)]) == EXIT_OK
    # degree 3 exceeds 2(l-1) for l = 2
    assert main(["simulate", "--model", "l_photon_plus_hamiltonian", "--set", "hamiltonian=[[1,0,3,0,0]]",
                 "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["simulate", "--model", "l_photon_plus_hamiltonian", "--set", "hamiltonian=oops",
                 "--out", str(tmp_path)]) == EXIT_CONFIG
