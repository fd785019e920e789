from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from nestcalc.corpus import load_program
from nestcalc.kinding import KindJudgment, check_type
from nestcalc.subst import (
    SubstBinding, SubstError, replace_var, subst_term, subst_type, subst_type_first_order,
    substitute_free, unroll,
)
from nestcalc.syntax import Lam, One, Top, Var, VarApp, parse_term, parse_type, pretty
from nestcalc.typecheck import ContextDecl, TypingJudgment, check_term
from strategies import GAMMA, PHI, types

ALIASES = load_program("types.nc").aliases


def ty(src: str):
    return parse_type(src, ALIASES)


def test_second_order_variable_case():
    out = subst_type(ty("g c"), SubstBinding("g", 1, ("x",), ty("1 + x")))
    assert out == ty("1 + c")


def test_nat_types_untouched():
    nat = ty("Nat[y](y, g y)")
    assert subst_type(nat, SubstBinding("g", 1, ("x",), ty("x * x"))) == nat


def test_in_source_for_ptree():
    ptree = ty("PTree c")
    src = unroll(ptree.abstraction, [VarApp("c")])
    assert src == ty("c + PTree (c * c)")


def test_in_source_for_bush_and_forest():
    assert unroll(ty("Bush c").abstraction, [VarApp("c")]) == ty("1 + c * Bush (Bush c)")
    assert unroll(ty("Forest c").abstraction, [VarApp("c")]) == ty("1 + c * PTree (Forest c)")
    assert unroll(ty("Nats").abstraction, []) == ty("1 + Nats")


def test_mu_entered_only_through_arguments():
    h = ty("(mu f. \\b. 1 + f b) (g c)")
    out = subst_type(h, SubstBinding("g", 1, ("x",), ty("x + x")))
    assert out == ty("(mu f. \\b. 1 + f b) (c + c)")


def test_first_order_examples():
    assert subst_type_first_order(ty("a * c"), [("a", One())]) == ty("1 * c")
    nat = ty("Nat[a](a, a)")
    assert subst_type_first_order(nat, [("a", One())]) == nat
    assert subst_type_first_order(ty("List a"), [("a", ty("PTree c"))]) == ty("List (PTree c)")
    with pytest.raises(SubstError):
        subst_type_first_order(ty("g c"), [("g", One())])


def test_first_order_is_sequential():
    out = subst_type_first_order(ty("a * c"), [("a", ty("c")), ("c", One())])
    assert out == ty("1 * 1")


def test_replace_var():
    grose = ty("(mu b. 1 + a * g b)")
    assert replace_var(grose, ("q", 1), ("r", 1)) == grose
    renamed = replace_var(grose, ("g", 1), ("h", 1))
    assert pretty(renamed) == "(mu b. 1 + a * h b)"
    with pytest.raises(SubstError):
        replace_var(grose, ("g", 1), ("a", 1))
    with pytest.raises(SubstError):
        replace_var(grose, ("a", 0), ("a2", 1))
    inner = ty("Nat[a](a, c)")
    assert replace_var(inner, ("a", 0), ("e", 0)) == inner


def test_arity_mismatch_rejected():
    with pytest.raises(SubstError):
        SubstBinding("g", 1, (), One())
    with pytest.raises(SubstError):
        subst_type(ty("g c"), SubstBinding("g", 2, ("x", "y"), One()))


def test_term_substitution():
    assert subst_term(Var("x"), "x", Top()) == Top()
    lam = parse_term("L[a] x. y")
    out = subst_term(lam, "y", Var("x"))
    assert isinstance(out, Lam) and out.body == Var("x") and out.body != Var(0)


def test_substituted_fold_body_retypechecks():
    # Inline the algebra of rustle into its fold; typing is preserved without
    # the algebra's global signature.
    prog = load_program("types.nc", "bush.nc")
    inlined = subst_term(prog.terms["rustle"], "balg", prog.terms["balg"])
    assert "balg" not in pretty(inlined)
    others = {k: v for k, v in prog.types.items() if k not in ("balg", "rustle")}
    check_term(TypingJudgment(ContextDecl(), inlined, prog.types["rustle"]), globals_=others)


@settings(max_examples=200, deadline=None)
@given(types(visible={**PHI, "g": 1}), types(visible={**PHI, "x": 0}))
def test_second_order_substitution_preserves_kinding(h, f):
    out = subst_type(h, SubstBinding("g", 1, ("x",), f))
    check_type(KindJudgment(GAMMA, PHI, out))


@settings(max_examples=200, deadline=None)
@given(types(visible={**PHI, "e": 0}), types())
def test_arity_zero_case_is_first_order(h, f):
    assert subst_type(h, SubstBinding("e", 0, (), f)) == subst_type_first_order(h, [("e", f)])


@settings(max_examples=200, deadline=None)
@given(types())
def test_substituting_absent_name_is_identity(h):
    assert substitute_free(h, {"absent": One()}) == h
    assert subst_type(h, SubstBinding("absent", 1, ("x",), One())) == h


@settings(max_examples=100, deadline=None)
@given(types(), st.sampled_from(sorted(PHI)))
def test_replace_then_restore(h, var):
    assert replace_var(replace_var(h, (var, 0), ("fresh#1", 0)), ("fresh#1", 0), (var, 0)) == h
