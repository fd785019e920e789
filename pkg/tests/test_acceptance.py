"""Acceptance criteria, each at its stated bound; one status line per criterion."""

from __future__ import annotations

import time
from contextlib import contextmanager

import pytest

from nestcalc import paramlab as pl
from nestcalc.finmodel import Env, Model, enumerate_nat, probe_set
from nestcalc.kinding import KindJudgment, check_type
from nestcalc.rewrite import normalize
from nestcalc.syntax import Var, parse_type
from helpers import leaves, program

MINUTE = 60.0


@contextmanager
def criterion(capsys, number: int, title: str, limit: float | None):
    start = time.perf_counter()
    notes: list[str] = []
    status = "FAIL"
    try:
        yield notes
        elapsed = time.perf_counter() - start
        if limit is None:
            status = "PASS"
            notes.append(f"{elapsed:.2f}s")
        else:
            status = "PASS" if elapsed < limit else "FAIL"
            notes.append(f"{elapsed:.2f}s of {limit:.0f}s")
            assert elapsed < limit, f"took {elapsed:.1f}s, limit {limit:.0f}s"
    finally:
        with capsys.disabled():
            print(f"\n[criterion {number}] {status} {title}: {'; '.join(notes)}")


def suite_line(report) -> str:
    s = report.summary
    return f"{s['pass']} pass, {s['fail']} fail, {s['inconclusive']} inconclusive"


STATED = {
    "List": ({}, {"a": 0}), "PTree": ({}, {"a": 0}), "Forest": ({}, {"a": 0}),
    "Bush": ({}, {"a": 0}), "ListADT": ({"a": 0}, {}), "Tree": ({"a": 0, "c": 0}, {}),
    "GRose": ({"f": 1, "a": 0}, {}), "Nats": ({}, {}),
}

STATED_TERMS = {
    "pleaf": "Nat[a](a, PTree a)", "pnode": "Nat[a](PTree (a * a), PTree a)",
    "swap": "Nat[a](a * a, a * a)", "reversePTree": "Nat[a](PTree a, PTree a)",
    "bnil": "Nat[a](1, Bush a)", "bcons": "Nat[a](a * Bush (Bush a), Bush a)",
    "inInv": "Nat[a](Bush a, 1 + a * Bush (Bush a))",
    "consalg": "Nat[a](a * Bush (Bush a), Bush a)",
    "balg": "Nat[a](1 + a * Bush (Bush a), Bush a)", "rustle": "Nat[a](Bush a, Bush a)",
    "gleaf": "Nat[](1, GRose f a)", "gnode": "Nat[](a * f (GRose f a), GRose f a)",
    "tleaf": "Nat[](a, Tree a c)", "tnode": "Nat[](Tree a c * c * Tree a c, Tree a c)",
    "sconst": "Nat[a](a, Seq a)", "spair": "Nat[c, d](Seq c * Seq d, Seq (c * d))",
    "sseq": "Nat[c](NatsTo (Seq c), Seq (NatsTo c))",
}


def test_criterion_1_corpus_fidelity(capsys):
    with criterion(capsys, 1, "corpus fidelity", 1.0) as notes:
        base = program("ptree.nc", "list.nc", "bush.nc", "grose.nc", "fusion.nc", "laws.nc")
        gadt = program("seq.nc")
        assert base.ok and gadt.ok
        for name, (gamma, phi) in STATED.items():
            decl = base.aliases[name]
            assert ({b.name: b.arity for b in decl.gamma}, {b.name: b.arity for b in decl.phi}) \
                == (gamma, phi), name
            check_type(KindJudgment(gamma, phi, decl.body))
        for name, src in STATED_TERMS.items():
            prog = gadt if name in gadt.types else base
            assert prog.types[name] == parse_type(src, prog.aliases), name
            assert name in prog.terms, name
        bad = program("grose_functorial.nc")
        assert [d.rule for d in bad.diagnostics] == ["IllegalFunctorialVariableInMuBody"]
        notes.append(f"{len(base.terms) + len(gadt.terms)} terms, {len(STATED)} types checked; "
                     "functorial GRose rejected")


def test_criterion_2_golden_normal_forms(capsys):
    prog = program("ptree.nc", "bush.nc")
    with criterion(capsys, 2, "reversePTree golden", 1.0) as notes:
        out, _ = normalize(Var("ptree_demo"), globals_=prog.terms)
        assert leaves(normalize(Var("ptree_in"), globals_=prog.terms)[0]) == [1, 2, 3, 4]
        assert leaves(out) == [4, 3, 2, 1]
        assert out == normalize(Var("ptree_expected"), globals_=prog.terms)[0]
        notes.append("((1,2),(3,4)) -> ((4,3),(2,1))")
    with criterion(capsys, 2, "rustle golden", 1.0) as notes:
        out, _ = normalize(Var("bush_demo"), globals_=prog.terms)
        assert out == normalize(Var("bush_expected"), globals_=prog.terms)[0]
        notes.append("input bush maps to the stated output bush")


def _suite(capsys, number: int, title: str, limit: float, run):
    with criterion(capsys, number, title, limit) as notes:
        report = run()
        notes.append(suite_line(report))
        bad = [i for i in report.instances if not i.met]
        assert not bad, [i.to_json() for i in bad[:3]]
    return report


def test_criterion_3_identity_extension(capsys):
    report = _suite(capsys, 3, "identity extension", 5 * MINUTE, pl.run_iel)
    assert report.summary["fail"] == report.summary["inconclusive"] == 0
    covered = {i.description.split(" (")[0] for i in report.instances}
    assert {f"IEL {t}" for t in ("List a", "PTree a", "Bush a", "Forest a", "Tree a c")} <= covered
    assert {i.parameters.get("depth") for i in report.instances} >= {1, 2, 3}
    signatures = [i for i in report.instances if "(carrier of " in i.description]
    assert len({i.description for i in signatures}) == len(pl.base_nat_signatures())


def test_criterion_4_graph_lemma(capsys):
    report = _suite(capsys, 4, "graph lemma", 5 * MINUTE, pl.run_graph_lemma)
    assert report.summary["fail"] == report.summary["inconclusive"] == 0


def test_criterion_5_abstraction(capsys):
    report = _suite(capsys, 5, "abstraction theorem", 10 * MINUTE, pl.run_abstraction)
    controls = [i for i in report.instances if i.expected == "fail"]
    assert len(controls) == 1 and controls[0].verdict == "fail" and controls[0].witness
    terms = [i for i in report.instances if i.expected == "pass"]
    assert all(i.verdict == "pass" for i in terms)
    assert 3 in pl.LabConfig().probe_sizes


def test_criterion_6_naturality_laws(capsys):
    report = _suite(capsys, 6, "naturality laws", 2 * MINUTE, pl.run_naturality_laws)
    laws = set(pl.law_names())
    assert {"mapId", "mapComp", "mapHigher", "foldList", "foldPTree", "inRight", "inLeft",
            "squareSingleton", "squareLeftmost"} <= laws
    for law in laws:
        kinds = {i.description for i in report.instances if i.parameters.get("law") == law}
        assert kinds == {f"law {law} by rewriting", f"law {law} in the model"}


def test_criterion_7_free_theorems(capsys):
    with criterion(capsys, 7, "free theorems", 10 * MINUTE) as notes:
        model = Model(probe_sizes=(0, 1, 2))
        bottom = enumerate_nat(model, parse_type("Nat[a](1, a)"), Env(), (0, 1, 2))
        assert len(bottom) == 0
        model = Model(probe_sizes=(1, 2))
        ident = enumerate_nat(model, parse_type("Nat[a](a, a)"), Env(), (1, 2))
        assert len(ident) == 1
        for n in (1, 2):
            assert all(ident[0].apply((probe_set(n),), x) == x for x in probe_set(n).elements())
        report = pl.run_free_theorems()
        bad = [i for i in report.instances if not i.met]
        assert not bad, [i.to_json() for i in bad[:3]]
        groups = {"filter": 0, "list short cut": 0, "nested short cut": 0}
        for i in report.instances:
            for g in groups:
                groups[g] += g in i.description
        assert all(groups.values())
        notes.append(f"(a) 0 inhabitants; (b) identity only; {suite_line(report)}")


def test_criterion_8_lan_counterexample(capsys):
    report = _suite(capsys, 8, "Kan extension counterexample", MINUTE, pl.run_lan_counterexample)
    by = {i.description: i for i in report.instances}
    assert by["Kan extension counterexample: set side"].witness == "size 1"
    assert by["Kan extension counterexample: relational side"].witness == "sizes (0, 0, 0)"
    coherence = [i for i in report.instances if i.description.startswith("projection coherence")]
    assert coherence and all(i.verdict == "pass" for i in coherence)


def test_criterion_9_cross_oracle(capsys):
    with criterion(capsys, 9, "cross-oracle agreement", None) as notes:
        results = pl.cross_oracle()
        bad = [i for i in results if not i.met]
        notes.append(f"{len(results) - len(bad)}/{len(results)} agree")
        assert results and not bad, [i.to_json() for i in bad]
