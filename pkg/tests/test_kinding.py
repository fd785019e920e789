from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from nestcalc.corpus import load_program
from nestcalc.kinding import (
    ArityMismatch, IllegalFunctorialVariableInMuBody, KindError, KindJudgment, LanDisabled,
    NatBinderArityViolation, UnknownVariable, check_type, demote, is_well_formed, weaken,
)
from nestcalc.syntax import One, free_type_vars, parse_type
from strategies import GAMMA, PHI, types


def judge(src: str, gamma=None, phi=None, aliases=None) -> KindJudgment:
    return KindJudgment(dict(gamma or {}), dict(phi or {}), parse_type(src, aliases))


GROSE = "(mu b. 1 + a * f b)"


def test_ptree_in_functorial_context():
    check_type(judge("(mu f. \\b. b + f (b * b)) a", phi={"a": 0}))


def test_grose_rejected_with_functorial_parameters():
    with pytest.raises(IllegalFunctorialVariableInMuBody) as err:
        check_type(judge(GROSE, phi={"f": 1, "a": 0}))
    assert "f" in err.value.message or "a" in err.value.message


def test_grose_accepted_with_non_functorial_parameters():
    check_type(judge(GROSE, gamma={"f": 1, "a": 0}))


def test_mu_body_may_use_its_own_binders_and_gamma():
    check_type(judge("(mu f. \\b. c + f b) a", gamma={"c": 0}, phi={"a": 0}))


def test_functorial_variable_hidden_inside_nat():
    with pytest.raises(UnknownVariable):
        check_type(judge("Nat[x](x, a)", phi={"a": 0}))
    check_type(judge("Nat[x](x, c)", gamma={"c": 0}, phi={"a": 0}))


def test_unknown_variable_and_arity_mismatch():
    with pytest.raises(UnknownVariable):
        check_type(judge("a + z", phi={"a": 0}))
    with pytest.raises(ArityMismatch) as err:
        check_type(judge("h", gamma={"h": 1}))
    assert err.value.expected == "1" and err.value.actual == "0"


def test_nat_binder_arity_only_in_gadt_mode():
    j = judge("Nat[h^1, x](h x, 1)")
    with pytest.raises(NatBinderArityViolation):
        check_type(j)
    check_type(j, gadt_mode=True)


def test_lan_only_in_gadt_mode():
    j = judge("(Lan[x][1] x) a", phi={"a": 0})
    with pytest.raises(LanDisabled):
        check_type(j)
    check_type(j, gadt_mode=True)


def test_judgment_contexts_are_disjoint():
    with pytest.raises(ValueError):
        KindJudgment({"a": 0}, {"a": 0}, One())


@pytest.mark.parametrize("name, gamma, phi", [
    ("List", {}, {"a": 0}),
    ("PTree", {}, {"a": 0}),
    ("Forest", {}, {"a": 0}),
    ("Bush", {}, {"a": 0}),
    ("ListADT", {"a": 0}, {}),
    ("Tree", {"a": 0, "c": 0}, {}),
    ("GRose", {"f": 1, "a": 0}, {}),
    ("Nats", {}, {}),
])
def test_corpus_types_in_stated_contexts(name, gamma, phi):
    prog = load_program("types.nc")
    decl = prog.aliases[name]
    assert {b.name: b.arity for b in decl.gamma} == gamma
    assert {b.name: b.arity for b in decl.phi} == phi
    check_type(KindJudgment(gamma, phi, decl.body))


def test_seq_types_check_in_gadt_mode():
    prog = load_program("types.nc", "seq.nc")
    assert prog.ok
    assert prog.gadt["sconst"]


def test_functorial_corpus_variants_rejected():
    assert not load_program("grose_functorial.nc").ok
    assert not load_program("tree_functorial.nc").ok
    rules = {d.rule for d in load_program("grose_functorial.nc").diagnostics}
    assert rules == {"IllegalFunctorialVariableInMuBody"}


def test_demote_list_parameter():
    j = judge("(mu f. \\b. 1 + b * f b) a", phi={"a": 0})
    out = demote(j, "a")
    assert not out.phi and len(out.gamma) == 1
    check_type(out)
    with pytest.raises(KindError):
        demote(j, "c")


def test_demote_allows_use_inside_mu_body():
    # The demoted variable may occur in a mu body, where functorial ones may not.
    j = judge("a * (mu q. 1 + b * q)", phi={"a": 0, "b": 0})
    with pytest.raises(IllegalFunctorialVariableInMuBody):
        check_type(j)
    out = demote(j, "b")
    check_type(out)
    assert set(out.phi) == {"a"}


def test_weaken_examples():
    check_type(weaken(KindJudgment({}, {}, One()), {"a": 0}))
    nat = judge("Nat[x](x, x * x)")
    wide = weaken(nat, extra_phi={"b": 0})
    check_type(wide)
    assert "b" not in free_type_vars(wide.subject)
    with pytest.raises(KindError):
        weaken(judge("a", phi={"a": 0}), {"a": 0})


@settings(max_examples=300, deadline=None)
@given(types())
def test_generated_types_are_well_formed(t):
    check_type(KindJudgment(GAMMA, PHI, t))


@settings(max_examples=200, deadline=None)
@given(types(), st.sampled_from([({"e": 0}, {}), ({}, {"e": 0}), ({"k": 2}, {"z": 0})]))
def test_weakening_preserves_well_formedness(t, extra):
    assert is_well_formed(weaken(KindJudgment(GAMMA, PHI, t), *extra))


@settings(max_examples=200, deadline=None)
@given(types(), st.sampled_from(sorted(PHI)))
def test_demotion_preserves_well_formedness(t, var):
    assert is_well_formed(demote(KindJudgment(GAMMA, PHI, t), var))
