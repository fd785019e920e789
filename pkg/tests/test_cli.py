from __future__ import annotations

import json

import pytest

from nestcalc import cli


def run(capsys, *argv: str) -> tuple[int, str, str]:
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_check_corpus_file(capsys):
    code, out, _ = run(capsys, "check", "ptree.nc")
    assert code == 0 and "ok" in out


def test_check_functorial_grose_fails(capsys):
    code, out, err = run(capsys, "check", "grose_functorial.nc")
    assert code == 1
    assert "IllegalFunctorialVariableInMuBody" in out + err


def test_check_json_and_file_positions(tmp_path, capsys):
    src = tmp_path / "bad.nc"
    src.write_text("term ok : 1 = unit\nterm bad : 1 + 1 = unit\n")
    code, out, _ = run(capsys, "check", str(src), "--json")
    data = json.loads(out)
    assert code == 1 and not data["ok"]
    (diag,) = data["diagnostics"]
    assert diag["file"] == str(src) and diag["line"] == 2 and diag["decl"] == "bad"


def test_check_empty_file(tmp_path, capsys):
    empty = tmp_path / "empty.nc"
    empty.write_text("")
    assert run(capsys, "check", str(empty))[0] == 0


def test_parse_error_is_a_check_failure(tmp_path, capsys):
    src = tmp_path / "broken.nc"
    src.write_text("term x : 1 = \n")
    code, out, err = run(capsys, "check", str(src))
    assert code == 1 and "ParseError" in out + err


def test_normalize_reverse_ptree(capsys):
    code, out, _ = run(capsys, "normalize", "ptree.nc", "ptree_demo")
    _, expected, _ = run(capsys, "normalize", "ptree.nc", "ptree_expected")
    assert code == 0 and out == expected


def test_normalize_trace_and_seed(capsys):
    code, out, _ = run(capsys, "normalize", "ptree.nc", "ptree_demo", "--trace", "--json")
    data = json.loads(out)
    assert code == 0 and data["trace"] and data["fuel_used"] == len(data["trace"])
    _, seeded, _ = run(capsys, "normalize", "ptree.nc", "ptree_demo", "--seed", "7", "--json")
    assert json.loads(seeded)["normal_form"] == data["normal_form"]


def test_normalize_identity_demo(capsys):
    code, out, _ = run(capsys, "normalize", "list.nc", "bools_id")
    _, bools, _ = run(capsys, "normalize", "list.nc", "bools")
    assert code == 0 and out == bools


def test_normalize_fuel_exhausted(capsys):
    code, _, err = run(capsys, "normalize", "ptree.nc", "ptree_demo", "--fuel", "1")
    assert code == 1 and "fuel" in err


def test_normalize_unknown_term(capsys):
    assert run(capsys, "normalize", "ptree.nc", "nope")[0] == 2


def test_denote_list_carrier(capsys):
    code, out, _ = run(capsys, "denote", "--type", "List a", "--set", "a=2")
    data = json.loads(out)
    assert code == 0 and data["set"]["size"] == 7 and data["depth"] == 3


def test_denote_lan_example(capsys):
    code, out, _ = run(capsys, "denote", "--gadt", "--type", "(Lan[][1] 1) a", "--rel", "a=1x0")
    data = json.loads(out)
    assert code == 0
    rel = data["relation"]
    assert (rel["dom_size"], rel["cod_size"], rel["pairs"]) == (0, 0, 0)
    assert data["set_at_first_projection"]["size"] == 1


def test_denote_empty_type(capsys):
    code, out, _ = run(capsys, "denote", "--type", "0")
    assert code == 0 and json.loads(out)["set"]["size"] == 0


def test_denote_term(capsys):
    code, out, _ = run(capsys, "denote", "ptree.nc", "ptree_demo")
    assert code == 0 and json.loads(out)


def test_denote_needs_assignments(capsys):
    assert run(capsys, "denote", "--type", "List a")[0] == 2


def test_verify_lan(capsys):
    code, out, _ = run(capsys, "verify", "lan")
    assert code == 0
    assert "expectations met" in out


def test_verify_unknown_suite(capsys):
    assert run(capsys, "verify", "nope")[0] == 2


@pytest.mark.parametrize("argv", [
    ("check", "ptree.nc", "--probe-sizes", ""),
    ("check", "ptree.nc", "--mu-depth", "0"),
    ("check", "ptree.nc", "--fuel", "0"),
])
def test_invalid_config_is_usage_error(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_config_file_then_flags(tmp_path):
    conf = tmp_path / "nc.conf"
    conf.write_text("# lab settings\nprobe_sizes = 2,0,1\nmu_depth = 2\ngadt = true\n")
    args = cli.build_parser().parse_args(["verify", "lan", "--mu-depth", "3"])
    cfg = cli.build_config(args, {"NESTCALC_CONFIG": str(conf)})
    assert cfg.probe_sizes == [0, 1, 2] and cfg.mu_depth == 3 and cfg.gadt


def test_bad_config_file_is_usage_error(tmp_path, capsys, monkeypatch):
    conf = tmp_path / "nc.conf"
    conf.write_text("colour = blue\n")
    monkeypatch.setenv("NESTCALC_CONFIG", str(conf))
    assert run(capsys, "check", "ptree.nc")[0] == 2


def test_output_file(tmp_path, capsys):
    dest = tmp_path / "out.json"
    code, out, _ = run(capsys, "check", "ptree.nc", "--json", "--output", str(dest))
    assert code == 0 and json.loads(dest.read_text())["ok"]
