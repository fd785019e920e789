from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from nestcalc import syntax as sx
from nestcalc.corpus import available, load_decls, source
from nestcalc.syntax import (
    BVar, Binder, Mu, Nat, One, ParseError, Sum, VarApp, Zero, alpha_eq, instantiate,
    parse_type, pretty, shift,
)
from helpers import program
from strategies import types


@settings(max_examples=300, deadline=None)
@given(types(scoped=False))
def test_pretty_parse_round_trip(t):
    assert parse_type(pretty(t)) == t


@settings(max_examples=200, deadline=None)
@given(types(scoped=False))
def test_shift_by_zero_and_inverse(t):
    assert shift(t, 0) == t
    assert shift(shift(t, 2), -2) == t


@settings(max_examples=200, deadline=None)
@given(types(scoped=False))
def test_instantiate_closed_type_is_identity(t):
    # No dangling indices at depth 0, so instantiation changes nothing.
    assert instantiate(t, [One()]) == t


def test_binder_names_do_not_affect_equality():
    one = parse_type("Nat[x](x, x * 1)")
    two = parse_type("Nat[y](y, y * 1)")
    assert one == two and alpha_eq(one, two)
    assert parse_type("Nat[x](x, 1)") != parse_type("Nat[x](1, x)")


def test_mu_groups_bind_fix_then_params():
    t = parse_type("(mu f. \\b. 1 + b * f b) a")
    assert isinstance(t, Mu) and t.fix == Binder("f", 1)
    assert t.body == Sum(One(), sx.Prod(VarApp(BVar(0, 1)),
                                        VarApp(BVar(0, 0), (VarApp(BVar(0, 1)),))))
    assert t.args == (VarApp("a"),)


def test_nested_binders_reference_outer_groups():
    t = parse_type("Nat[a](a, (mu f. \\b. f (a * b)) a)")
    inner = t.target.body
    assert inner == VarApp(BVar(0, 0), (sx.Prod(VarApp(BVar(1, 0)), VarApp(BVar(0, 1))),))


@pytest.mark.parametrize("text", [
    "Nat[a](a",
    "(mu f. 1 + f) a b c d e",
    "1 + ",
    "mu",
    "Nat[a^x](a, a)",
])
def test_malformed_types_raise_parse_error(text):
    with pytest.raises((ParseError, sx.ArityError)):
        parse_type(text)


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="()[]{}.,:;=*+\\^ abfx01LNatmuinkcoe\n-", max_size=40))
def test_parser_fails_only_with_parse_error(text):
    try:
        sx.parse_file(text)
    except (ParseError, sx.ArityError):
        pass


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as err:
        sx.parse_file("type T a = 1 +\n\nterm x : T = )")
    assert err.value.line >= 1 and err.value.col >= 1


@pytest.mark.parametrize("name", available())
def test_corpus_files_round_trip_through_printer(name):
    deps = [] if name == "types.nc" else ["types.nc"]
    decls = load_decls(*deps, name)
    text = "\n".join(pretty(d) for d in decls)
    again = sx.parse_file(text)
    assert [pretty(d) for d in again] == [pretty(d) for d in decls]


def test_free_variables_and_local_closure():
    t = parse_type("h (c + a) * Nat[x](x, c)")
    assert sx.free_type_vars(t) == {"h": 1, "c": 0, "a": 0}
    assert not sx.free_type_vars(parse_type("Nat[x](x, 1)"))
    assert sx.is_locally_closed(parse_type("(mu f. \\b. b) 0"))
    assert isinstance(parse_type("0"), Zero)


def test_corpus_source_concatenates_files():
    text = source("types.nc", "list.nc")
    assert "type List" in text and "term cons" in text
    assert isinstance(parse_type("Nat[](1, 1)"), Nat)


def loose_oracle(t) -> int:
    return max([v.ref.depth - d + 1 for v, d in sx.iter_types(t)
                if isinstance(v, VarApp) and isinstance(v.ref, BVar) and v.ref.depth >= d] + [0])


@settings(max_examples=200, deadline=None)
@given(types(scoped=False), st.integers(0, 2))
def test_cached_type_summaries_match_traversal(t, depth):
    closed = sx.close_type(t, ["a", "h"], depth)
    assert sx.loose_groups(closed) == loose_oracle(closed)
    assert sx.free_names(closed) == set(sx.free_type_vars(closed))
    assert sx.loose_groups(t) == loose_oracle(t) == 0


def lam_bodies(t):
    for node in sx.iter_terms(t):
        if isinstance(node, sx.Lam):
            yield node


@pytest.mark.parametrize("name", ["ptree.nc", "bush.nc", "list.nc", "laws.nc"])
def test_pruned_term_traversals_match_full_ones(name):
    prog = program(name)
    for term in prog.terms.values():
        info = sx.term_info(term)
        assert info.loose_vars == info.loose_types == 0
        assert info.free_vars == sx.free_term_vars(term)
        for lam in lam_bodies(term):
            names = sx.fresh_names(lam.binders)
            full = sx.map_term(lam.body, on_type=lambda x, d: sx.instantiate(
                x, [VarApp(n) for n in names], d))
            opened = sx.open_term_types(lam.body, names)
            assert opened == full
            assert sx.open_term_var(opened, sx.Var("v")) == sx.map_term(
                opened, on_var=lambda v, d: sx.Var("v") if v.ref == d else v)
            assert sx.close_term_types(opened, names) == lam.body
