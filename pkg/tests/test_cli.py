from __future__ import annotations

import csv
import json

import pytest

from spatialmix.branching import read_bm_text, spectral_radius
from spatialmix.cli import EXIT_INPUT, EXIT_OK, EXIT_TOLERANCE, RunManifest, emit, main
from spatialmix.exactcount import CountResult


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out.strip().splitlines()
    return code, out


def test_emit_count():
    assert emit(CountResult(7)) == b'{"count":"7","log2count":2.807354922}'


def test_emit_is_deterministic():
    rec = {"b": 1.0 / 3, "a": [1, 2.5, True, None], "c": "x"}
    assert emit(rec) == emit(dict(rec)) == b'{"b":0.3333333333,"a":[1,2.5,true,null],"c":"x"}'


def test_emit_csv():
    data = emit([{"depth": 1, "gap": 0.5}, {"depth": 2, "gap": 1 / 3}], "csv").decode()
    assert data == "depth,gap\n1,0.5\n2,0.3333333333\n"


def test_count_command(capsys, tmp_path):
    code, out = run(capsys, "count", "--cons", "hs", "--m", "2", "--n", "2")
    assert code == EXIT_OK and out == ['{"count":"7","log2count":2.807354922}']
    fix = tmp_path / "fix.json"
    fix.write_text(json.dumps([[0, 0, 1]]))
    code, out = run(capsys, "count", "--cons", "hs", "--m", "2", "--n", "2", "--fix", str(fix))
    assert json.loads(out[0])["count"] == "2"


def test_input_errors(capsys, tmp_path):
    assert run(capsys, "count", "--cons", "hs", "--m", "0", "--n", "2")[0] == EXIT_INPUT
    assert run(capsys, "count", "--cons", "xx", "--m", "2", "--n", "2")[0] == EXIT_INPUT
    fix = tmp_path / "bad.json"
    fix.write_text(json.dumps([[0, 0, 1], [0, 1, 1]]))
    assert run(capsys, "count", "--cons", "hs", "--m", "2", "--n", "2", "--fix", str(fix))[0] == EXIT_INPUT
    assert run(capsys, "capacity", "--cons", "hs", "--eps", "2")[0] == EXIT_INPUT
    assert run(capsys, "nosuch")[0] == EXIT_INPUT
    assert run(capsys, "--version")[0] == EXIT_OK


def test_saw_check(capsys, tmp_path):
    graph = tmp_path / "g.json"
    graph.write_text(json.dumps({"edges": [[0, 1], [1, 2], [2, 0], [2, 3]], "fixing": {"3": 1}}))
    code, out = run(capsys, "saw-check", "--graph", str(graph), "--root", "0", "--depth", "12")
    rec = json.loads(out[0])
    assert code == EXIT_OK and rec["diff"] <= 1e-12
    assert rec["pGraph"] == pytest.approx(2 / 3)
    code, _ = run(capsys, "saw-check", "--graph", str(graph), "--root", "0", "--depth", "1")
    assert code == EXIT_INPUT


def test_bm_command(capsys, tmp_path):
    code, out = run(capsys, "bm", "--cons", "rwim", "--l", "6", "--order",
                    "--order-spec", "NW,N,NE,E,SE,S,SW,W", "--out-dir", str(tmp_path))
    rec = json.loads(out[0])
    assert code == EXIT_OK and rec["ntypes"] == 603
    assert rec["lambdaStar"] == pytest.approx(4.0632, abs=1e-3)
    path = tmp_path / "rwim_l6_ord.bm"
    back = read_bm_text(path.read_text())
    assert spectral_radius(back).lambda_star == pytest.approx(rec["lambdaStar"], abs=1e-9)
    manifest = json.loads((tmp_path / "rwim_l6_ord.manifest.json").read_text())
    assert manifest["hash"] == rec["manifest"]


def test_bm_output_byte_identical(capsys, tmp_path):
    for k in range(2):
        run(capsys, "bm", "--cons", "hh", "--l", "4", "--out-dir", str(tmp_path / str(k)))
    assert (tmp_path / "0" / "hh_l4_unord.bm").read_bytes() == (tmp_path / "1" / "hh_l4_unord.bm").read_bytes()


def test_certify_command(capsys):
    code, out = run(capsys, "certify", "--cons", "hh", "--l", "4", "--order")
    rec = json.loads(out[0])
    assert list(rec) == ["cons", "l", "ordered", "lambdaStar", "gamma", "verdict"]
    assert rec["verdict"] == "SSM_CERTIFIED"


def test_capacity_command(capsys):
    code, out = run(capsys, "capacity", "--cons", "hs", "--eps", "1e-3")
    rec = json.loads(out[0])
    assert code == EXIT_OK and rec["certified"] is True
    assert list(rec)[:5] == ["t", "p_t", "estimate", "series", "certified"]
    code, out = run(capsys, "capacity", "--cons", "rwim", "--eps", "1e-6", "--t-max", "2")
    assert code == EXIT_TOLERANCE


def test_nak_commands(capsys, tmp_path):
    path = tmp_path / "gap.csv"
    code, out = run(capsys, "nak-gap", "--depth", "200", "--csv", str(path))
    assert code == EXIT_OK
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 200 and rows[0] == {"depth": "1", "gap": "0.5"}
    code, out = run(capsys, "nak-fixedpoint")
    rec = json.loads(out[0])
    assert rec["verdict"] == "REPELLING" and rec["xhat"] < 0.3356


@pytest.mark.parametrize(
    "target",
    ["table2", "gamma", "fig4", "nak-fixedpoint"],
    ids=["hh-ordered", "threshold", "gap-series", "fixed-point"],
)
def test_reproduce_targets(capsys, tmp_path, monkeypatch, target):
    monkeypatch.setenv("SPATIALMIX_THREADS", "1")
    code, out = run(capsys, "reproduce", target, "--out-dir", str(tmp_path))
    assert code == EXIT_OK
    summary = json.loads(out[-1])
    assert summary["pass"] is True
    checks = [json.loads(line) for line in out[:-1]]
    assert checks and all(c["pass"] for c in checks)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["hash"] == summary["manifest"]


def test_reproduce_tolerance_failure(capsys, tmp_path, monkeypatch):
    import spatialmix.cli as cli

    ref = cli.load_reference()
    ref["gamma"]["d5"] = {"lower": 4.1, "upper": 4.2}
    monkeypatch.setattr(cli, "load_reference", lambda: ref)
    monkeypatch.setenv("SPATIALMIX_THREADS", "1")
    code, _ = run(capsys, "reproduce", "gamma", "--out-dir", str(tmp_path))
    assert code == EXIT_TOLERANCE


def test_manifest_hash_ignores_wall_time():
    a = RunManifest("bm", {"l": 4})
    b = RunManifest("bm", {"l": 4}, wall_time=12.5)
    assert a.hash == b.hash != RunManifest("bm", {"l": 6}).hash
