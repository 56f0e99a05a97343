import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from copocut import instances
from copocut.benders import REPORT_COLUMNS
from copocut.cli import build_parser, main


@pytest.fixture(scope="module")
def inst_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "inst.json"
    assert main(["generate", "--S", "2", "--n", "2", "--m", "1", "--seed", "3",
                 "--out", str(path)]) == 0
    return path


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_all_verbs_are_registered():
    sub = next(a for a in build_parser()._actions if a.dest == "verb")
    assert set(sub.choices) == {"generate", "solve", "envelope", "quad-cut", "surface", "audit-cuts"}


def test_generate_matches_library(inst_path):
    ref = instances.generate_instance(instances.GeneratorConfig(2, 2, 1, seed=3))
    assert inst_path.read_text() == instances.dumps(ref)


def test_solve_then_audit_from_report(inst_path, tmp_path, capsys):
    report = tmp_path / "rep.json"
    assert main(["solve", "--instance", str(inst_path), "--format", "json", "--out", str(report)]) == 0
    doc = json.loads(report.read_text())
    assert doc["status"] == "converged"
    assert doc["UB"] >= doc["LB"] - 1e-6
    assert doc["cuts"]
    assert main(["audit-cuts", "--instance", str(inst_path), "--report", str(report)]) == 0
    audit = json.loads(capsys.readouterr().out)
    assert audit["ok"] and audit["cuts"] == len(doc["cuts"])


def test_solve_csv_columns(inst_path, capsys):
    assert main(["solve", "--instance", str(inst_path), "--jobs", "2"]) == 0
    text = capsys.readouterr().out
    assert tuple(text.splitlines()[0].split(",")) == REPORT_COLUMNS


def test_envelope_on_fixture(capsys):
    assert main(["envelope", "--fixture", "env-simplex", "--param", "b=-1",
                 "--point", "0.5", "--point", "1.5", "--epsilon", "0"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert rows[0]["status"] == "value"
    assert float(rows[0]["value"]) == pytest.approx(-0.5, abs=1e-5)
    assert rows[1]["status"] == "unbounded" and rows[1]["value"] == "inf"


def test_envelope_on_instance_block(inst_path, capsys):
    inst = instances.load(inst_path)
    w = ",".join(repr(float(v)) for v in inst.witnesses[1])
    assert main(["envelope", "--instance", str(inst_path), "--block", "1", "--point", w,
                 "--format", "json"]) == 0
    (row,) = json.loads(capsys.readouterr().out)
    assert row["status"] == "value"


def test_quad_cut_and_surface_with_certificate(tmp_path, capsys):
    cert = tmp_path / "cert.json"
    assert main(["quad-cut", "--fixture", "quad-1d", "--param", "B=0", "--param", "C=1",
                 "--point", "0.5", "--out", str(cert)]) == 0
    (doc,) = json.loads(cert.read_text())
    assert doc["qhat_at_x"] == pytest.approx(0.25, abs=1e-5)
    assert main(["surface", "--fixture", "quad-1d", "--param", "B=0", "--param", "C=1",
                 "--grid", "11", "--phi", "closed", "--no-envelope",
                 "--certificate", str(cert)]) == 0
    rows = _rows(capsys.readouterr().out)
    assert len(rows) == 11
    for r in rows:
        x = float(r["x1"])
        assert float(r["phi"]) == pytest.approx((1 - x) ** 2)
        assert float(r["qhat"]) <= float(r["phi"]) + 1e-5
        assert r["envelope"] == ""


def test_surface_marks_points_outside_domain(capsys):
    assert main(["surface", "--fixture", "env-simplex", "--grid", "5", "--lo", "-0.5", "--hi", "1.5",
                 "--phi", "closed"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert [r["phi"] for r in rows][0] == instances.SENTINEL
    assert [r["envelope"] for r in rows][-1] == instances.SENTINEL


def test_bad_point_is_rejected():
    with pytest.raises(SystemExit):
        main(["envelope", "--fixture", "quad-2d", "--point", "0.5"])


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "copocut.cli", "generate", "--S", "1", "--n", "2",
                          "--m", "1"], capture_output=True, text=True, check=True)
    inst = instances.loads(out.stdout)
    assert inst.S == 1 and np.all(np.isfinite(inst.A))
