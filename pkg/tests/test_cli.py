import json

import pytest

from akltmqc import cli


@pytest.fixture
def identity_circuit(tmp_path):
    path = tmp_path / "identity.json"
    path.write_text(
        json.dumps(
            {
                "format_version": 1,
                "wires": 1,
                "gates": [
                    {"gate": "init", "wire": 0},
                    {"gate": "readout", "wire": 0},
                ],
            }
        )
    )
    return str(path)


@pytest.fixture
def cnot_circuit(tmp_path):
    path = tmp_path / "cnot.json"
    path.write_text(
        json.dumps(
            {
                "format_version": 1,
                "wires": 2,
                "gates": [
                    {"gate": "init", "wire": 0},
                    {"gate": "init", "wire": 1},
                    {"gate": "cnot", "control": 0, "target": 1},
                    {"gate": "readout", "wire": 0},
                    {"gate": "readout", "wire": 1},
                ],
            }
        )
    )
    return str(path)


def test_percolate_full_occupation(capsys):
    code = cli.main(
        ["percolate", "--p", "1.0", "--size", "8x16", "--trials", "100",
         "--seed", "7"]
    )
    out = capsys.readouterr().out
    assert code == 0
    header, row = out.strip().splitlines()
    assert header == "p,rows,cols,trials,fraction,stderr,format_version"
    fields = row.split(",")
    assert fields[0] == "1.0"
    assert float(fields[4]) == 1.0


def test_run_identity_example(capsys, identity_circuit):
    code = cli.main(
        ["run", "--lattice", "2x4", "--circuit", identity_circuit,
         "--seed", "1", "--mode", "exact"]
    )
    assert code == 0
    data = json.loads(capsys.readouterr().out)
    assert data["corrected"] == [0]
    assert data["kind"] == "run"
    assert data["format_version"] == 1


def test_run_byte_identical(tmp_path, identity_circuit):
    args = ["run", "--lattice", "2x4", "--circuit", identity_circuit,
            "--seed", "2", "--mode", "exact"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_sample_artifact(capsys):
    code = cli.main(
        ["sample", "--lattice", "3x4", "--seed", "11", "--mode", "iid",
         "--trials", "3"]
    )
    assert code == 0
    data = json.loads(capsys.readouterr().out)
    assert data["kind"] == "sample"
    assert len(data["samples"]) == 3
    for i, rec in enumerate(data["samples"]):
        assert rec["trial"] == i
        assert len(rec["axes"]) == 3
        assert all(len(row) == 4 for row in rec["axes"])
        assert set("".join(rec["axes"])) <= set("xyz")


def test_sample_jobs_invariant(tmp_path):
    base = ["sample", "--lattice", "2x6", "--seed", "8", "--mode", "iid",
            "--trials", "4"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(base + ["--jobs", "1", "--out", str(a)]) == 0
    assert cli.main(base + ["--jobs", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_route_artifact(capsys, identity_circuit):
    code = cli.main(
        ["route", "--lattice", "2x4", "--circuit", identity_circuit,
         "--seed", "1"]
    )
    assert code == 0
    data = json.loads(capsys.readouterr().out)
    assert data["kind"] == "route"
    assert "grid" in data["backbone"]
    assert "clusters" in data and "off_limits" in data


def test_missing_seed_is_validation_error(capsys):
    code = cli.main(["sample", "--lattice", "2x4"])
    assert code == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "validation"


def test_bad_size_is_validation_error(capsys):
    code = cli.main(["sample", "--lattice", "wide", "--seed", "1"])
    assert code == 1
    assert json.loads(capsys.readouterr().err)["error"] == "validation"


def test_bad_circuit_file(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code = cli.main(
        ["run", "--lattice", "2x4", "--circuit", str(bad), "--seed", "1"]
    )
    assert code == 1


def test_unroutable_circuit_is_protocol_error(capsys, cnot_circuit):
    code = cli.main(
        ["run", "--lattice", "2x3", "--circuit", cnot_circuit,
         "--seed", "1", "--mode", "iid"]
    )
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "protocol"


def test_out_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_DIR_ENV, str(tmp_path))
    code = cli.main(
        ["percolate", "--p", "1.0", "--size", "4x8", "--trials", "10",
         "--seed", "3", "--out", "sweep.csv"]
    )
    assert code == 0
    assert (tmp_path / "sweep.csv").exists()


def test_verify_line_format(capsys, monkeypatch):
    stub = [
        (1, "alpha", lambda jobs=1: {"criterion": 1, "passed": True,
                                     "detail": "ok"}),
        (8, "beta", lambda jobs=1: {"criterion": 8, "passed": True,
                                    "detail": "ok"}),
    ]
    monkeypatch.setattr(cli, "ACCEPTANCE_CHECKS", stub)
    assert cli.main(["verify", "--level", "full"]) == 0
    out = capsys.readouterr().out
    assert "PASS  1 alpha: ok" in out
    assert "passed 2/2 (full level)" in out
    # fast level skips the slow criteria entirely
    assert cli.main(["verify", "--level", "fast"]) == 0
    out = capsys.readouterr().out
    assert "SKIP  8 beta" in out
    assert "passed 1/1 (fast level)" in out


def test_verify_failure_exits_two(capsys, monkeypatch):
    stub = [
        (1, "alpha", lambda jobs=1: {"criterion": 1, "passed": False,
                                     "detail": "broken"}),
    ]
    monkeypatch.setattr(cli, "ACCEPTANCE_CHECKS", stub)
    assert cli.main(["verify", "--level", "full"]) == 2
    assert "FAIL  1 alpha: broken" in capsys.readouterr().out
