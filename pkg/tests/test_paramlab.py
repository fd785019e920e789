from __future__ import annotations

import json

import pytest

from nestcalc import paramlab as pl
from nestcalc.paramlab import CheckReport, Instance, LabConfig

SMALL = LabConfig(probe_sizes=(0, 1, 2), mu_depth=2)


def verdicts(job) -> list[str]:
    return [i.verdict for i in pl.run_job(job)]


def test_instance_expectations():
    assert Instance("x", {}, "pass").met
    assert not Instance("x", {}, "fail").met
    assert Instance("x", {}, "fail", "w", expected="fail").met
    assert not Instance("x", {}, "inconclusive", expected="fail").met


def test_report_ok_counts_inverted_expectations():
    report = CheckReport("lan", SMALL.to_json(), [
        Instance("a", {}, "pass"), Instance("b", {}, "fail", "w", expected="fail")])
    assert report.ok
    assert report.summary == {"pass": 1, "fail": 1, "inconclusive": 0}
    data = json.loads(json.dumps(report.to_json()))
    assert data["suite"] == "lan" and data["expectations_met"] is True
    report.instances.append(Instance("c", {}, "inconclusive"))
    assert not report.ok


def test_unknown_suite_is_rejected():
    with pytest.raises(ValueError):
        pl.suite_jobs("nope", SMALL)


@pytest.mark.parametrize("src", list(pl.DATA_TYPES))
def test_iel_on_data_types_at_small_depth(src):
    assert set(verdicts(("iel-type", SMALL, src, 2))) == {"pass"}


def test_graph_lemma_on_list():
    assert set(verdicts(("graph-type", SMALL, "List a"))) == {"pass"}


def test_abstraction_control_fails_with_witness():
    (inst,) = pl.run_job(("abstraction-control", SMALL))
    assert inst.verdict == "fail" and inst.witness and inst.met


@pytest.mark.parametrize("name", ["swap", "reversePTree", "cons", "notB"])
def test_abstraction_on_terms(name):
    assert set(verdicts(("abstraction-term", SMALL, name))) == {"pass"}


def test_naturality_suite():
    report = pl.run_naturality_laws(SMALL)
    assert report.ok and report.summary["fail"] == 0
    assert {i.parameters["law"] for i in report.instances} >= set(pl.law_names())


def test_free_bottom_and_identity():
    assert verdicts(("free-bottom", LabConfig())) == ["pass"]
    assert set(verdicts(("free-identity", LabConfig()))) == {"pass"}


def test_lan_suite_and_worker_pool_agree():
    serial = pl.run_lan_counterexample(LabConfig())
    pooled = pl.run_suite("lan", LabConfig(workers=2))
    assert serial.ok and pooled.ok
    assert [i.to_json() for i in serial.instances] == [i.to_json() for i in pooled.instances]
    control = [i for i in serial.instances if i.expected == "fail"]
    assert len(control) == 1 and control[0].verdict == "fail"


def test_cross_oracle_agrees():
    results = pl.cross_oracle()
    assert results and all(i.met for i in results)


def test_first_order_closed_types():
    prog = pl.base_program()
    assert pl.first_order_closed(prog.types["ptree_demo"])
    assert not pl.first_order_closed(prog.types["swap"])
