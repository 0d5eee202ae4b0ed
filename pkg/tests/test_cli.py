import json

import pytest

from confdef.cli import main
from confdef.config import RunConfig
from confdef.io import read_json


def run(*argv):
    return main([str(a) for a in argv])


def test_gallery_is_deterministic(tmp_path):
    assert run("gallery", "--out", tmp_path / "a") == 0
    assert run("gallery", "--out", tmp_path / "b") == 0
    assert (tmp_path / "a" / "gallery.json").read_bytes() == (tmp_path / "b" / "gallery.json").read_bytes()


def test_triple_report_shape(tmp_path):
    assert run("triple", "--out", tmp_path) == 0
    rep = read_json(tmp_path / "triple.json")
    assert rep["verdict"] == "pass"
    assert rep["provenance"]["config_hash"]
    assert all(c["ok"] for c in rep["checks"])


def test_emitted_csv_verifies_and_tampering_fails(tmp_path):
    assert run("gallery", "--out", tmp_path, "--emit-csv") == 0
    assert run("triple", "--out", tmp_path, "--emit-csv") == 0
    assert run("verify", "--out", tmp_path) == 0
    assert read_json(tmp_path / "verify.json")["verdict"] == "pass"

    target = sorted((tmp_path / "gallery").glob("rho_V_1*.csv"))[0]
    lines = target.read_text().splitlines(keepends=True)
    mid = 2 + (len(lines) - 2) // 2  # a central sample, inside every margin
    cells = lines[mid].rstrip("\n").split(",")
    cells[-1] = repr(float(cells[-1]) * 1.5)
    lines[mid] = ",".join(cells) + "\n"
    target.write_text("".join(lines))
    assert run("verify", "--out", tmp_path) == 2


def test_verify_without_csv_fails(tmp_path):
    assert run("gallery", "--out", tmp_path) == 0
    assert run("verify", "--out", tmp_path) == 2


def test_non_member_listed_as_member_fails(tmp_path):
    cfg = {"candidates": [{"kind": "hyperbolic", "U": "poly 1 0 1", "V": "poly 1 0 1"}]}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert run("cs-check", "--config", tmp_path / "c.json", "--out", tmp_path) == 2


def test_tolerance_scale_is_recorded(tmp_path):
    assert run("gallery", "--out", tmp_path, "--tol-scale", "2") == 0
    rep = read_json(tmp_path / "gallery.json")
    assert rep["config"]["tolerances"]["disc_const"] == 2 * RunConfig().tolerances.disc_const


@pytest.mark.parametrize(
    "argv",
    [
        ["bogus"],
        [],
        ["gallery", "--refine", "-1"],
        ["gallery", "--config", "/nonexistent/c.json"],
        ["verify", "--out", "/nonexistent/dir"],
    ],
)
def test_usage_errors_exit_one(argv, capsys):
    assert run(*argv) == 1
    assert "confdef" in capsys.readouterr().err


def test_unknown_config_key_exits_one(tmp_path):
    (tmp_path / "c.json").write_text('{"nn": 6}')
    assert run("gallery", "--config", tmp_path / "c.json", "--out", tmp_path) == 1
    (tmp_path / "d.json").write_text("{not json")
    assert run("gallery", "--config", tmp_path / "d.json", "--out", tmp_path) == 1
