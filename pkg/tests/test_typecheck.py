from __future__ import annotations

from functools import cache

import pytest

from nestcalc.corpus import available, source
from nestcalc.subst import subst_term_types, substitute_free
from nestcalc.syntax import (
    Abs, BVar, Binder, One, Sum, VarApp, free_type_vars as _free, parse_file, parse_term,
    parse_type,
)
from nestcalc.typecheck import (
    Checker, ContextDecl, GadtConstructDisabled, TypingJudgment, check_program, check_term,
    infer_redex_type, typecheck_seq_constructors,
)
from helpers import program

CORPUS = ["ptree.nc", "list.nc", "bush.nc", "grose.nc", "fusion.nc", "laws.nc", "seq.nc"]


def diagnose(text: str) -> list[str]:
    prog = check_program(parse_file(source("types.nc") + "\n" + text))
    return [d.rule for d in prog.diagnostics]


@pytest.mark.parametrize("name", CORPUS)
def test_corpus_file_checks(name):
    prog = program(name)
    assert prog.ok, [d.to_json() for d in prog.diagnostics]
    assert set(prog.terms) == {d.name for d in prog.term_decls()}


def test_every_bundled_file_is_covered():
    rejected = {"grose_functorial.nc", "tree_functorial.nc"}
    assert set(available()) == set(CORPUS) | rejected | {"types.nc"}


@pytest.mark.parametrize("name, ascribed", [
    ("pleaf", "Nat[a](a, PTree a)"),
    ("pnode", "Nat[a](PTree (a * a), PTree a)"),
    ("swap", "Nat[a](a * a, a * a)"),
    ("reversePTree", "Nat[a](PTree a, PTree a)"),
    ("bnil", "Nat[a](1, Bush a)"),
    ("bcons", "Nat[a](a * Bush (Bush a), Bush a)"),
    ("inInv", "Nat[a](Bush a, 1 + a * Bush (Bush a))"),
    ("consalg", "Nat[a](a * Bush (Bush a), Bush a)"),
    ("balg", "Nat[a](1 + a * Bush (Bush a), Bush a)"),
    ("rustle", "Nat[a](Bush a, Bush a)"),
])
def test_listed_terms_have_their_stated_types(name, ascribed):
    prog = program("ptree.nc", "bush.nc")
    assert prog.types[name] == parse_type(ascribed, prog.aliases)
    assert name in prog.terms


def test_seq_constructors_and_pair_in_lan_form():
    prog = typecheck_seq_constructors()
    assert {"sconst", "spair", "sseq"} <= set(prog.terms)
    want = parse_type("Nat[b]((Lan[g1, g2][g1 * g2] Seq g1 * Seq g2) b, Seq b)", prog.aliases)
    assert prog.types["spairLan"] == want


def test_fold_into_nat_type_is_rejected():
    rules = diagnose("term bad : Nat[a](PTree a, Nat[](PTree a, PTree (a * a))) = L[a] x. x")
    assert rules == ["UnknownVariable"]


@pytest.mark.parametrize("text, rule", [
    ("term bad : 1 = unit[1] unit", "NotANatType"),
    ("term idd : Nat[a](a, a) = L[a] x. x\nterm bad : 1 = idd[1, 1] unit", "BinderCountMismatch"),
    ("term bad : Nat[a](a, 1 + a) = L[a] x. inl x", "TypeMismatch"),
    ("term bad : Nat[a](a, 1) = L[a] x. (L[] y. x : Nat[](1, 1))[] unit",
     "FunctorialContextNotEmptyForApplication"),
    ("term bad : Nat[b](b, c + b) = L[c] x. inr x", "FreshnessViolation"),
    ("term k : Nat[a](1 + a * 1, 1 + 1) = L[a] x. inl unit\n"
     "term bad : Nat[a](List a, 1) = fold {List} {[a] 1} [] k", "AlgebraTypeMismatch"),
    ("term bad : Nat[a](a, (Lan[g][1] g) a) = L[a] x. x", "LanDisabled"),
    ("term bad : 1 = nowhere", "UnboundTermVariable"),
])
def test_rule_diagnostics(text, rule):
    assert diagnose(text) == [rule]


def test_higher_arity_binders_need_gadt_mode():
    ty = parse_type("Nat[h^1, b](h b, h b)")
    term = parse_term("L[h^1, b] x. x")
    with pytest.raises(GadtConstructDisabled):
        Checker().check(ContextDecl(), term, ty)
    Checker(gadt=True).check(ContextDecl(), term, ty)


def test_diagnostic_positions_and_types():
    prog = check_program(parse_file("term ok : 1 = unit\nterm bad : Nat[a](a, 1 + a) = L[a] x. inl x"))
    (d,) = prog.diagnostics
    assert d.decl == "bad" and d.line == 2
    assert d.to_json()["rule"] == "TypeMismatch"


def test_identity_redex_type():
    prog = program("list.nc")
    t = parse_term("id[1] unit")
    assert infer_redex_type(ContextDecl(), t, globals_=prog.types) == One()


def test_fold_redex_type():
    prog = program("ptree.nc")
    body = prog.terms["reversePTree"]
    assert infer_redex_type(ContextDecl(), body, globals_=prog.types) == prog.types["reversePTree"]


@cache
def _all_terms():
    prog = program(*CORPUS)
    return prog, [d.name for d in prog.term_decls()]


@pytest.mark.parametrize("name", _all_terms()[1])
def test_weakening(name):
    prog, _ = _all_terms()
    ascribed = prog.types[name]
    ctx = ContextDecl({**_free(ascribed), "zz": 0}, {"yy": 0}, (("w", One()),))
    globals_ = {k: v for k, v in prog.types.items() if k != name}
    check_term(TypingJudgment(ctx, prog.terms[name], ascribed), prog.gadt[name], globals_)


MAYBE = Abs((Binder("x"),), Sum(One(), VarApp(BVar(0, 0))))


@pytest.mark.parametrize("name", [n for n in _all_terms()[1] if _free(_all_terms()[0].types[n])])
def test_type_substitution_preserves_typing(name):
    prog, _ = _all_terms()
    bool_t = parse_type("Bool", prog.aliases)
    bindings = {"a": bool_t, "b": bool_t, "c": One(), "f": MAYBE}
    globals_ = {k: substitute_free(v, bindings) for k, v in prog.types.items() if k != name}
    ascribed = substitute_free(prog.types[name], bindings)
    assert not _free(ascribed)
    term = subst_term_types(prog.terms[name], bindings)
    check_term(TypingJudgment(ContextDecl(), term, ascribed), prog.gadt[name], globals_)
